#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <filesystem>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gdr/corpus.hpp"
#include "gdr/denseindex.hpp"
#include "gdr/dialogue.hpp"
#include "gdr/error.hpp"
#include "gdr/flowgen.hpp"
#include "gdr/io.hpp"
#include "gdr/lexindex.hpp"
#include "gdr/metrics.hpp"
#include "gdr/retrieve.hpp"
#include "gdr/text.hpp"

namespace gdr::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

/// Raised for bad flag combinations noticed after parsing.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json hashes(const std::vector<std::pair<std::string, fs::path>>& inputs) {
    json j = json::object();
    for (const auto& [name, path] : inputs) j[name] = {{"path", path.string()}, {"sha256", io::sha256_file(path)}};
    return j;
}

void write_meta(const fs::path& out, const std::string& command, json params, json inputs) {
    json meta = {{"command", command}, {"params", std::move(params)}, {"inputs", std::move(inputs)}};
    meta["output_sha256"] = io::sha256_file(out);
    io::write_file_atomic(fs::path(out.string() + ".meta.json"), meta.dump(2) + "\n");
}

SchemaAdapter load_adapter(const std::string& layout, const std::string& adapter_path) {
    SchemaAdapter a;
    if (!adapter_path.empty()) {
        a = SchemaAdapter::from_json(json::parse(io::read_file(adapter_path)));
    } else if (layout == "multidoc2dial") {
        a = SchemaAdapter::multidoc2dial();
    }
    if (layout == "canonical") a.layout = SchemaAdapter::Layout::Canonical;
    if (layout == "multidoc2dial") a.layout = SchemaAdapter::Layout::MultiDoc2Dial;
    return a;
}

SegmentationMode parse_mode(const std::string& mode, std::size_t window, std::size_t max_struct) {
    if (mode == "token") return SegmentationMode::token_window(window);
    return SegmentationMode::structure(max_struct ? std::optional<std::size_t>(max_struct) : std::nullopt);
}

bool is_bmix(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    char magic[4] = {};
    in.read(magic, 4);
    return in && std::string(magic, 4) == "BMIX";
}

std::vector<std::pair<std::string, fs::path>> parse_labelled(const std::vector<std::string>& items) {
    std::vector<std::pair<std::string, fs::path>> out;
    for (const auto& s : items) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            out.emplace_back(fs::path(s).stem().string(), s);
        } else {
            out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
        }
    }
    return out;
}

// --- ingest --------------------------------------------------------------

struct IngestArgs {
    std::string documents;
    std::vector<std::string> splits;
    std::string layout = "auto";
    std::string adapter;
    std::string out;
};

int cmd_ingest(const IngestArgs& a, const std::string& data_dir, std::ostream& out) {
    std::string layout = a.layout;
    fs::path docs = a.documents;
    auto splits = parse_labelled(a.splits);
    if (docs.empty()) {
        if (data_dir.empty()) throw UsageError("ingest needs --documents or a data directory");
        docs = fs::path(data_dir) / "multidoc2dial_doc.json";
        if (splits.empty()) {
            for (const char* s : {"train", "validation", "test"}) {
                const auto p = fs::path(data_dir) / ("multidoc2dial_dial_" + std::string(s) + ".json");
                if (fs::exists(p)) splits.emplace_back(s, p);
            }
        }
    }
    if (layout == "auto") layout = docs.extension() == ".jsonl" ? "canonical" : "multidoc2dial";
    for (const auto& [_, p] : splits)
        if (!fs::exists(p)) throw IngestError("missing dialogue file " + p.string());
    if (!fs::exists(docs)) throw IngestError("missing document file " + docs.string());

    const auto adapter = load_adapter(layout, a.adapter);
    const auto corpus = load_corpus(docs, adapter);
    const fs::path dir = a.out;
    save_documents(dir / "documents.jsonl", corpus.documents);
    json manifest = {{"layout", layout}, {"documents", corpus.documents.size()}, {"splits", json::object()}};
    std::vector<std::pair<std::string, fs::path>> inputs{{"documents", docs}};
    for (const auto& [name, path] : splits) {
        const auto dials = load_dialogues(path, adapter, &corpus.spans);
        const auto queries = build_queries(dials, &corpus.documents);
        save_dialogues(dir / ("dialogues." + name + ".jsonl"), dials);
        save_queries(dir / ("queries." + name + ".jsonl"), queries);
        std::size_t ungrounded = 0;
        for (const auto& q : queries) ungrounded += q.ungrounded ? 1 : 0;
        manifest["splits"][name] = {{"dialogues", dials.size()}, {"queries", queries.size()},
                                    {"ungrounded_queries", ungrounded}};
        inputs.emplace_back("dialogues." + name, path);
        out << name << ": " << dials.size() << " dialogues, " << queries.size() << " queries\n";
    }
    manifest["inputs"] = hashes(inputs);
    io::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
    out << "documents: " << corpus.documents.size() << "\n";
    return kOk;
}

// --- segment -------------------------------------------------------------

struct SegmentArgs {
    std::string documents;
    std::string mode = "struct";
    std::size_t window = 100;
    std::size_t max_structure_tokens = 0;
    bool no_list_grouping = false;
    std::string out;
};

int cmd_segment(const SegmentArgs& a, std::ostream& out, std::ostream& err) {
    const auto corpus = load_corpus(a.documents, SchemaAdapter::canonical());
    TagPolicy tags;
    tags.group_lists = !a.no_list_grouping;
    std::vector<std::string> warnings;
    const auto mode = parse_mode(a.mode, a.window, a.max_structure_tokens);
    const auto passages = segment_corpus(corpus.documents, mode, tags, &warnings);
    for (const auto& w : warnings) err << "warning: " << w << "\n";
    save_passages(a.out, passages);
    double total = 0;
    for (const auto& p : passages) total += static_cast<double>(text::index_token_count(p.rendered_text));
    const double mean = passages.empty() ? 0.0 : total / static_cast<double>(passages.size());
    write_meta(a.out, "segment",
               {{"mode", mode.name()}, {"window", a.window}, {"max_structure_tokens", a.max_structure_tokens},
                {"group_lists", tags.group_lists}, {"passages", passages.size()},
                {"mean_rendered_tokens", mean}},
               hashes({{"documents", a.documents}}));
    out << passages.size() << " passages (" << mode.name() << "), mean rendered length " << mean << " tokens\n";
    return kOk;
}

// --- build-index ---------------------------------------------------------

struct BuildArgs {
    std::string passages;
    std::string kind = "bm25";
    double k1 = 0.9;
    double b = 0.4;
    std::string embeddings;
    std::string out;
};

int cmd_build_index(const BuildArgs& a, std::ostream& out) {
    const auto passages = load_passages(a.passages);
    if (a.kind == "bm25") {
        const auto start = std::chrono::steady_clock::now();
        const auto idx = Bm25Index::build(passages, {a.k1, a.b});
        idx.save(a.out);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        write_meta(a.out, "build-index",
                   {{"kind", "bm25"}, {"k1", a.k1}, {"b", a.b}, {"passages", idx.n_docs()},
                    {"vocabulary", idx.vocabulary_size()}},
                   hashes({{"passages", a.passages}}));
        out << "bm25 index: " << idx.n_docs() << " passages, " << idx.vocabulary_size() << " terms in " << secs
            << " s\n";
        return kOk;
    }
    if (a.embeddings.empty()) throw UsageError("--embeddings is required for a dense index");
    const auto emb = EmbeddingSet::load(a.embeddings);
    std::vector<std::string> missing;
    for (const auto& p : passages)
        if (!emb.contains(p.passage_id)) missing.push_back(p.passage_id);
    if (!missing.empty()) {
        std::string msg = std::to_string(missing.size()) + " passages have no embedding, e.g. '" + missing[0] + "'";
        throw IngestError(msg);
    }
    if (emb.size() != passages.size())
        throw IngestError("embedding file has " + std::to_string(emb.size() - passages.size()) +
                          " rows for unknown passages");
    emb.save_binary(a.out);
    write_meta(a.out, "build-index", {{"kind", "dense"}, {"dim", emb.dim()}, {"passages", emb.size()}},
               hashes({{"passages", a.passages}, {"embeddings", a.embeddings}}));
    out << "dense index: " << emb.size() << " vectors of dim " << emb.dim() << "\n";
    return kOk;
}

// --- retrieve ------------------------------------------------------------

struct RetrieveArgs {
    std::string index;
    std::string queries;
    std::string query_embeddings;
    std::string current_embeddings;
    std::string segmentation = "struct";
    std::string rerank = "none";
    std::string merge = "round_robin";
    std::size_t k = 10;
    std::size_t per_list_depth = 0;
    std::size_t max_query_tokens = kDefaultQueryTokens;
    std::string out;
};

int cmd_retrieve(const RetrieveArgs& a, std::ostream& out) {
    const auto queries = load_queries(a.queries);
    RunConfig cfg;
    cfg.segmentation = a.segmentation;
    cfg.rerank = parse_rerank_mode(a.rerank);
    cfg.merge = parse_merge_policy(a.merge);
    cfg.k = a.k;
    cfg.per_list_depth = a.per_list_depth;
    cfg.max_query_tokens = a.max_query_tokens;
    std::vector<std::pair<std::string, fs::path>> inputs{{"index", a.index}, {"queries", a.queries}};

    RetrievalRun run;
    if (is_bmix(a.index)) {
        const auto idx = Bm25Index::load(a.index);
        cfg.retriever = "bm25";
        cfg.extra["k1"] = idx.params().k1;
        cfg.extra["b"] = idx.params().b;
        cfg.extra["inputs"] = hashes(inputs);
        run = retrieve_all(idx, queries, cfg);
    } else {
        if (a.query_embeddings.empty()) throw UsageError("--query-embeddings is required for a dense index");
        if (cfg.rerank == RerankMode::CurrentTurn && a.current_embeddings.empty())
            throw UsageError("--current-embeddings is required with --rerank current_turn");
        DenseIndex idx(EmbeddingSet::load(a.index));
        const auto qv = EmbeddingSet::load(a.query_embeddings);
        inputs.emplace_back("query_embeddings", a.query_embeddings);
        std::optional<EmbeddingSet> cv;
        if (!a.current_embeddings.empty()) {
            cv = EmbeddingSet::load(a.current_embeddings);
            inputs.emplace_back("current_embeddings", a.current_embeddings);
        }
        cfg.retriever = "dense";
        cfg.extra["inputs"] = hashes(inputs);
        run = retrieve_all(idx, queries, qv, cv ? &*cv : nullptr, cfg);
    }
    save_run(a.out, run);
    out << "retrieved " << run.results.size() << " queries with " << cfg.retriever << " (k=" << cfg.k
        << ", rerank=" << a.rerank << ")\n";
    return kOk;
}

// --- evaluation ----------------------------------------------------------

std::vector<std::size_t> parse_ks(const std::string& s) {
    std::vector<std::size_t> ks;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            const auto k = std::stoul(item);
            if (k == 0) throw UsageError("k must be positive");
            ks.push_back(k);
        } catch (const std::logic_error&) {
            throw UsageError("bad k list '" + s + "'");
        }
    }
    if (ks.empty()) throw UsageError("empty k list");
    return ks;
}

struct EvalRetrievalArgs {
    std::string run;
    std::string queries;
    std::string passages;
    std::string documents;
    std::string ks = "1,5,10";
    std::string level = "passage";
    std::string out;
};

int cmd_eval_retrieval(const EvalRetrievalArgs& a, std::ostream& out, std::ostream& err) {
    const auto run = load_run(a.run);
    const auto queries = load_queries(a.queries);
    const auto passages = load_passages(a.passages);
    std::optional<SpanLookup> spans;
    std::vector<std::pair<std::string, fs::path>> inputs{
        {"run", a.run}, {"queries", a.queries}, {"passages", a.passages}};
    if (!a.documents.empty()) {
        spans = load_corpus(a.documents, SchemaAdapter::canonical()).spans;
        inputs.emplace_back("documents", a.documents);
    }
    PassageCatalog catalog(passages, spans ? &*spans : nullptr);
    const auto level = a.level == "document" ? RecallLevel::Document : RecallLevel::Passage;
    auto report = evaluate_retrieval(run, queries, catalog, parse_ks(a.ks), level);
    report.config = {{"run", to_json(run.config)}, {"level", a.level}, {"inputs", hashes(inputs)}};
    if (report.excluded_queries)
        err << "warning: " << report.excluded_queries << " queries without gold grounding were excluded\n";
    io::write_file_atomic(a.out, to_json(report).dump(2) + "\n");
    out << format_report_table({{fs::path(a.run).stem().string(), report}});
    return kOk;
}

struct EvalGenerationArgs {
    std::string predictions;
    std::string queries;
    std::string task = "grounding";
    std::string out;
};

int cmd_eval_generation(const EvalGenerationArgs& a, std::ostream& out) {
    const auto preds = load_predictions(a.predictions);
    const auto queries = load_queries(a.queries);
    auto report = evaluate_generation(preds, queries,
                                      a.task == "response" ? GenerationTask::Response : GenerationTask::Grounding);
    report.config = {{"task", a.task},
                     {"inputs", hashes({{"predictions", a.predictions}, {"queries", a.queries}})}};
    io::write_file_atomic(a.out, to_json(report).dump(2) + "\n");
    out << format_report_table({{a.task, report}});
    return kOk;
}

// --- compose-flows -------------------------------------------------------

struct ComposeArgs {
    std::string documents;
    std::vector<std::string> dialogues;
    flowgen::FlowgenConfig config;
    std::vector<std::size_t> target_segments{2, 3, 4};
    std::string out;
    std::string report;
};

int cmd_compose_flows(ComposeArgs a, std::ostream& out) {
    const auto corpus = load_corpus(a.documents, SchemaAdapter::canonical());
    std::vector<Dialogue> dialogues;
    std::vector<std::pair<std::string, fs::path>> inputs{{"documents", a.documents}};
    for (const auto& p : a.dialogues) {
        auto d = load_dialogues(p, SchemaAdapter::canonical());
        dialogues.insert(dialogues.end(), d.begin(), d.end());
        inputs.emplace_back("dialogues." + fs::path(p).stem().string(), p);
    }
    a.config.target_segments = {a.target_segments.begin(), a.target_segments.end()};
    try {
        a.config.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const auto result = flowgen::run_flowgen(dialogues, corpus.documents, a.config);
    std::vector<json> rows;
    for (const auto& f : result.flows) rows.push_back(flowgen::to_json(f));
    io::write_file_atomic(a.out, io::to_jsonl(rows));
    const auto report = flowgen::validate_flows(result.flows, dialogues, a.config);
    const auto graph = flowgen::build_transition_graph(corpus.documents, a.config.url_parent_depth);
    json rj = flowgen::to_json(report);
    rj["seed"] = a.config.seed;
    rj["segments"] = result.segments.size();
    rj["skipped_segments"] = result.skipped_segments;
    rj["malformed_urls"] = graph.malformed_urls;
    rj["unknown_link_targets"] = graph.unknown_link_targets;
    rj["inputs"] = hashes(inputs);
    rj["output_sha256"] = io::sha256_file(a.out);
    const fs::path report_path = a.report.empty() ? fs::path(a.out + ".report.json") : fs::path(a.report);
    io::write_file_atomic(report_path, rj.dump(2) + "\n");
    out << result.flows.size() << " flows from " << result.segments.size() << " segments (" << result.skipped_segments
        << " skipped), " << report.violations() << " rule violations\n";
    return report.violations() ? kFailed : kOk;
}

// --- report / sweep ------------------------------------------------------

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_path, std::ostream& out) {
    std::vector<std::pair<std::string, EvalReport>> rows;
    for (const auto& [label, path] : parse_labelled(inputs))
        rows.emplace_back(label, report_from_json(json::parse(io::read_file(path))));
    const auto table = format_report_table(rows);
    if (!out_path.empty()) io::write_file_atomic(out_path, table);
    out << table;
    return kOk;
}

struct SweepArgs {
    std::string passages;
    std::string queries;
    std::vector<double> k1s{0.9, 1.2};
    std::vector<double> bs{0.4, 0.75};
    std::string ks = "1,5,10";
    std::size_t k = 10;
    std::string out;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
    const auto passages = load_passages(a.passages);
    const auto queries = load_queries(a.queries);
    const auto ks = parse_ks(a.ks);
    PassageCatalog catalog(passages);
    std::vector<std::pair<std::string, EvalReport>> rows;
    json results = json::array();
    for (const double k1 : a.k1s) {
        for (const double b : a.bs) {
            const auto idx = Bm25Index::build(passages, {k1, b});
            RunConfig cfg;
            cfg.k = std::max(a.k, *std::max_element(ks.begin(), ks.end()));
            const auto report = evaluate_retrieval(retrieve_all(idx, queries, cfg), queries, catalog, ks);
            std::ostringstream label;
            label << "k1=" << k1 << ",b=" << b;
            rows.emplace_back(label.str(), report);
            auto j = to_json(report);
            j["k1"] = k1;
            j["b"] = b;
            results.push_back(j);
        }
    }
    const auto table = format_report_table(rows);
    if (!a.out.empty()) {
        json doc = {{"sweep", results}, {"inputs", hashes({{"passages", a.passages}, {"queries", a.queries}})}};
        io::write_file_atomic(a.out, doc.dump(2) + "\n");
    }
    out << table;
    return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Document-grounded dialogue retrieval and flow generation toolkit", "gdr"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Key-value configuration file; command-line flags take precedence");
    std::string data_dir;
    app.add_option("--data-dir", data_dir, "Dataset root directory")->envname("GDR_DATA_DIR");

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Convert raw documents and dialogues to canonical files");
    c_ingest->add_option("--documents", ingest.documents, "Document file")->check(CLI::ExistingFile);
    c_ingest->add_option("--split", ingest.splits, "Dialogue file as NAME=PATH (repeatable)");
    c_ingest->add_option("--layout", ingest.layout)->check(CLI::IsMember({"auto", "canonical", "multidoc2dial"}));
    c_ingest->add_option("--adapter", ingest.adapter, "Schema adapter JSON")->check(CLI::ExistingFile);
    c_ingest->add_option("--out", ingest.out, "Output directory")->required();

    SegmentArgs seg;
    auto* c_seg = app.add_subcommand("segment", "Split canonical documents into passages");
    c_seg->add_option("--documents", seg.documents)->required()->check(CLI::ExistingFile);
    c_seg->add_option("--mode", seg.mode)->check(CLI::IsMember({"token", "struct"}));
    c_seg->add_option("--window", seg.window)->check(CLI::PositiveNumber);
    c_seg->add_option("--max-structure-tokens", seg.max_structure_tokens, "0 disables the cap");
    c_seg->add_flag("--no-list-grouping", seg.no_list_grouping);
    c_seg->add_option("--out", seg.out)->required();

    BuildArgs build;
    auto* c_build = app.add_subcommand("build-index", "Build a BM25 or dense index over passages");
    c_build->add_option("--passages", build.passages)->required()->check(CLI::ExistingFile);
    c_build->add_option("--kind", build.kind)->check(CLI::IsMember({"bm25", "dense"}));
    c_build->add_option("--k1", build.k1);
    c_build->add_option("--b", build.b);
    c_build->add_option("--embeddings", build.embeddings, "Passage embeddings (JSONL or EMB1)")
        ->check(CLI::ExistingFile);
    c_build->add_option("--out", build.out)->required();

    RetrieveArgs ret;
    auto* c_ret = app.add_subcommand("retrieve", "Run retrieval for every query");
    c_ret->add_option("--index", ret.index)->required()->check(CLI::ExistingFile);
    c_ret->add_option("--queries", ret.queries)->required()->check(CLI::ExistingFile);
    c_ret->add_option("--query-embeddings", ret.query_embeddings)->check(CLI::ExistingFile);
    c_ret->add_option("--current-embeddings", ret.current_embeddings)->check(CLI::ExistingFile);
    c_ret->add_option("--segmentation", ret.segmentation, "Label stored in the run header");
    c_ret->add_option("--rerank", ret.rerank)->check(CLI::IsMember({"none", "current_turn"}));
    c_ret->add_option("--merge", ret.merge)->check(
        CLI::IsMember({"round_robin", "concat_dedupe", "score_normalized"}));
    c_ret->add_option("--k", ret.k)->check(CLI::PositiveNumber);
    c_ret->add_option("--per-list-depth", ret.per_list_depth, "0 means k");
    c_ret->add_option("--max-query-tokens", ret.max_query_tokens)->check(CLI::PositiveNumber);
    c_ret->add_option("--out", ret.out)->required();

    EvalRetrievalArgs er;
    auto* c_er = app.add_subcommand("eval-retrieval", "Recall@k of a run file");
    c_er->add_option("--run", er.run)->required()->check(CLI::ExistingFile);
    c_er->add_option("--queries", er.queries)->required()->check(CLI::ExistingFile);
    c_er->add_option("--passages", er.passages)->required()->check(CLI::ExistingFile);
    c_er->add_option("--documents", er.documents, "Canonical documents, to resolve span ids")
        ->check(CLI::ExistingFile);
    c_er->add_option("--ks", er.ks, "Comma-separated cutoffs");
    c_er->add_option("--level", er.level)->check(CLI::IsMember({"passage", "document"}));
    c_er->add_option("--out", er.out)->required();

    EvalGenerationArgs eg;
    auto* c_eg = app.add_subcommand("eval-generation", "F1/EM/BLEU of generated text");
    c_eg->add_option("--predictions", eg.predictions)->required()->check(CLI::ExistingFile);
    c_eg->add_option("--queries", eg.queries)->required()->check(CLI::ExistingFile);
    c_eg->add_option("--task", eg.task)->check(CLI::IsMember({"grounding", "response"}));
    c_eg->add_option("--out", eg.out)->required();

    ComposeArgs comp;
    auto* c_comp = app.add_subcommand("compose-flows", "Recompose dialogues into multi-document flows");
    c_comp->add_option("--documents", comp.documents)->required()->check(CLI::ExistingFile);
    c_comp->add_option("--dialogues", comp.dialogues)->required()->check(CLI::ExistingFile);
    c_comp->add_option("--seed", comp.config.seed)->required();
    c_comp->add_option("--min-turns", comp.config.min_turns);
    c_comp->add_option("--max-turns", comp.config.max_turns);
    c_comp->add_option("--target-segments", comp.target_segments)->delimiter(',');
    c_comp->add_option("--related-preference", comp.config.related_preference);
    c_comp->add_option("--responding-act", comp.config.responding_act);
    c_comp->add_option("--followup-act", comp.config.followup_act);
    c_comp->add_option("--url-depth", comp.config.url_parent_depth);
    c_comp->add_option("--out", comp.out)->required();
    c_comp->add_option("--report", comp.report, "Validation report path (default: <out>.report.json)");

    std::vector<std::string> report_inputs;
    std::string report_out;
    auto* c_rep = app.add_subcommand("report", "Tabulate evaluation reports");
    c_rep->add_option("inputs", report_inputs, "Report files, optionally LABEL=PATH")->required();
    c_rep->add_option("--out", report_out);

    SweepArgs sweep;
    auto* c_sweep = app.add_subcommand("sweep", "BM25 parameter sweep");
    c_sweep->add_option("--passages", sweep.passages)->required()->check(CLI::ExistingFile);
    c_sweep->add_option("--queries", sweep.queries)->required()->check(CLI::ExistingFile);
    c_sweep->add_option("--k1", sweep.k1s)->delimiter(',');
    c_sweep->add_option("--b", sweep.bs)->delimiter(',');
    c_sweep->add_option("--ks", sweep.ks);
    c_sweep->add_option("--out", sweep.out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "gdr: " << e.what() << "\n";
        return kUsage;
    }

    try {
        if (c_ingest->parsed()) return cmd_ingest(ingest, data_dir, out);
        if (c_seg->parsed()) return cmd_segment(seg, out, err);
        if (c_build->parsed()) return cmd_build_index(build, out);
        if (c_ret->parsed()) return cmd_retrieve(ret, out);
        if (c_er->parsed()) return cmd_eval_retrieval(er, out, err);
        if (c_eg->parsed()) return cmd_eval_generation(eg, out);
        if (c_comp->parsed()) return cmd_compose_flows(comp, out);
        if (c_rep->parsed()) return cmd_report(report_inputs, report_out, out);
        if (c_sweep->parsed()) return cmd_sweep(sweep, out);
    } catch (const UsageError& e) {
        err << "gdr: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "gdr: error: " << e.what() << "\n";
        return kFailed;
    }
    return kUsage;
}

}  // namespace gdr::cli
