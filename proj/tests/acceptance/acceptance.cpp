// Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//
//   gdr_acceptance            run every criterion
//   gdr_acceptance c3 c5      run a subset
//
// Exit status: 1 if any criterion failed, 77 if every selected criterion was
// skipped, 0 otherwise.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gdr/corpus.hpp"
#include "gdr/denseindex.hpp"
#include "gdr/dialogue.hpp"
#include "gdr/flowgen.hpp"
#include "gdr/io.hpp"
#include "gdr/lexindex.hpp"
#include "gdr/metrics.hpp"
#include "gdr/retrieve.hpp"
#include "gdr/text.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace gdr;

namespace {

// Tolerances.
constexpr double kRecallTolPoints = 2.5;
constexpr double kPassageCountTol = 0.05;
constexpr double kMeanLengthTol = 0.10;
constexpr double kF1Tol = 1e-9;
constexpr double kBleuTol = 1e-4;
constexpr double kDenseBudgetSeconds = 1.0;
constexpr double kBm25BudgetSeconds = 60.0;

enum class Status { Pass, Fail, Skip };

struct Outcome {
    Status status;
    std::string detail;
};

fs::path data_path(const std::string& name) { return fs::path(GDR_TEST_DATA_DIR) / name; }

double seconds_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

std::string fmt(double v, int prec = 1) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(prec) << v;
    return s.str();
}

const char* dataset_env() { return std::getenv("GDR_DATA_DIR"); }

struct Dataset {
    LoadedCorpus corpus;
    std::map<std::string, std::vector<Dialogue>> splits;
};

std::optional<Dataset> load_dataset(std::string& why) {
    const char* dir = dataset_env();
    if (!dir || !*dir) {
        why = "GDR_DATA_DIR not set; the MultiDoc2Dial release is required";
        return std::nullopt;
    }
    const fs::path root(dir);
    const auto docs = root / "multidoc2dial_doc.json";
    if (!fs::exists(docs)) {
        why = docs.string() + " not found";
        return std::nullopt;
    }
    Dataset d;
    const auto adapter = SchemaAdapter::multidoc2dial();
    d.corpus = load_corpus(docs, adapter);
    for (const char* split : {"train", "validation", "test"}) {
        const auto p = root / ("multidoc2dial_dial_" + std::string(split) + ".json");
        if (fs::exists(p)) d.splits[split] = load_dialogues(p, adapter, &d.corpus.spans);
    }
    return d;
}

// ---------------------------------------------------------------- C1

Outcome c1_bm25_recall() {
    std::string why;
    auto ds = load_dataset(why);
    if (!ds) return {Status::Skip, why};
    if (!ds->splits.count("validation")) return {Status::Skip, "validation split file missing"};
    const auto queries = build_queries(ds->splits["validation"], &ds->corpus.documents);

    struct Target {
        SegmentationMode mode;
        std::array<double, 3> recall;
    };
    const std::vector<Target> targets = {{SegmentationMode::structure(), {19.6, 41.9, 50.8}},
                                         {SegmentationMode::token_window(100), {19.5, 42.7, 51.4}}};
    bool ok = true;
    std::string detail;
    for (const auto& t : targets) {
        const auto start = std::chrono::steady_clock::now();
        const auto passages = segment_corpus(ds->corpus.documents, t.mode);
        const auto idx = Bm25Index::build(passages);
        RunConfig cfg;
        cfg.k = 10;
        cfg.segmentation = t.mode.name();
        const auto run = retrieve_all(idx, queries, cfg);
        const double secs = seconds_since(start);
        PassageCatalog catalog(passages, &ds->corpus.spans);
        const auto report = evaluate_retrieval(run, queries, catalog, {1, 5, 10});
        const std::array<std::size_t, 3> ks = {1, 5, 10};
        detail += t.mode.name() + ":";
        for (std::size_t i = 0; i < 3; ++i) {
            const double got = 100.0 * report.recall_at.at(ks[i]);
            const bool within = std::abs(got - t.recall[i]) <= kRecallTolPoints;
            ok = ok && within;
            detail += " @" + std::to_string(ks[i]) + "=" + fmt(got) + (within ? "" : "(!)") + "/" + fmt(t.recall[i]);
        }
        detail += " [" + fmt(secs, 2) + " s, " + std::to_string(report.excluded_queries) + " excluded]; ";
        ok = ok && secs < kBm25BudgetSeconds;
    }
    return {ok ? Status::Pass : Status::Fail, detail};
}

// ---------------------------------------------------------------- C2

Outcome c2_corpus_statistics() {
    std::string why;
    auto ds = load_dataset(why);
    if (!ds) return {Status::Skip, why};
    bool ok = true;
    std::string detail;
    auto within = [&](const std::string& label, double got, double want, double rel) {
        const bool in = std::abs(got - want) <= rel * want;
        ok = ok && in;
        detail += label + "=" + fmt(got, 1) + "/" + fmt(want, 1) + (in ? "" : "(!)") + " ";
    };
    const auto structure = segment_corpus(ds->corpus.documents, SegmentationMode::structure());
    const auto token = segment_corpus(ds->corpus.documents, SegmentationMode::token_window(100));
    double total = 0;
    for (const auto& p : structure) total += static_cast<double>(text::index_token_count(p.rendered_text));
    within("struct_passages", static_cast<double>(structure.size()), 4110, kPassageCountTol);
    within("struct_mean_len", total / static_cast<double>(structure.size()), 106.6, kMeanLengthTol);
    within("token_passages", static_cast<double>(token.size()), 4283, kPassageCountTol);

    const std::map<std::string, std::pair<std::size_t, std::size_t>> expected = {
        {"train", {3474, 21453}}, {"validation", {661, 4201}}, {"test", {661, 4094}}};
    for (const auto& [split, want] : expected) {
        auto it = ds->splits.find(split);
        if (it == ds->splits.end()) {
            ok = false;
            detail += split + "=missing ";
            continue;
        }
        const auto& dials = it->second;
        const auto queries = build_queries(dials);
        const bool exact = dials.size() == want.first && queries.size() == want.second;
        ok = ok && exact;
        detail += split + "=" + std::to_string(dials.size()) + "/" + std::to_string(queries.size()) +
                  (exact ? " " : "(!) ");
        if (!exact) {
            // Per-dialogue breakdown: agent turns that yield no query explain
            // any shortfall against the published counts.
            std::cout << "  diff " << split << ": expected " << want.first << " dialogues / " << want.second
                      << " queries, got " << dials.size() << " / " << queries.size() << "\n";
            std::map<std::string, std::size_t> per_dial;
            for (const auto& q : queries) ++per_dial[q.query_id.substr(0, q.query_id.rfind(':'))];
            for (const auto& d : dials) {
                std::size_t agents = 0;
                for (const auto& t : d.turns) agents += t.role == Role::Agent ? 1 : 0;
                if (per_dial[d.dial_id] != agents)
                    std::cout << "    " << d.dial_id << ": " << agents << " agent turns, " << per_dial[d.dial_id]
                              << " queries\n";
            }
        }
    }
    return {ok ? Status::Pass : Status::Fail, detail};
}

// ---------------------------------------------------------------- C3

Outcome c3_dense_exactness() {
    constexpr std::size_t n = 1000, dim = 32, nq = 100, k = 10;
    std::mt19937_64 rng(20240607);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    EmbeddingSet set(dim);
    std::vector<std::vector<float>> rows;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<float> v(dim);
        for (auto& x : v) x = u(rng);
        // A few exact duplicates so the id tie-break is exercised.
        if (i % 97 == 5)
            for (std::size_t j = 0; j < dim; ++j) v[j] = rows[i - 1][j];
        rows.push_back(v);
        set.add("p" + std::to_string(i), v);
    }
    std::vector<std::vector<float>> queries;
    for (std::size_t q = 0; q < nq; ++q) {
        std::vector<float> v(dim);
        for (auto& x : v) x = u(rng);
        queries.push_back(v);
    }
    const auto build_start = std::chrono::steady_clock::now();
    DenseIndex idx(set);
    std::vector<std::vector<ScoredHit>> got;
    for (const auto& q : queries) got.push_back(idx.search(q, k));
    const double secs = seconds_since(build_start);

    std::size_t mismatches = 0;
    for (std::size_t q = 0; q < nq; ++q) {
        std::vector<std::pair<double, std::string>> all;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < dim; ++j) s += double(rows[i][j]) * double(queries[q][j]);
            all.emplace_back(s, "p" + std::to_string(i));
        }
        std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (std::size_t r = 0; r < k; ++r) {
            if (got[q].size() != k || got[q][r].passage_id != all[r].second || got[q][r].score != all[r].first)
                ++mismatches;
        }
    }
    const bool ok = mismatches == 0 && secs < kDenseBudgetSeconds;
    return {ok ? Status::Pass : Status::Fail, std::to_string(nq) + " queries x " + std::to_string(n) +
                                                  " passages, " + std::to_string(mismatches) + " mismatches, " +
                                                  fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------- C4

Outcome c4_metric_conformance() {
    double worst_f1 = 0;
    std::size_t em_bad = 0, rows = 0;
    io::for_each_jsonl(data_path("golden_f1_em.jsonl"), [&](const json& j, std::size_t) {
        const auto pred = j.at("pred").get<std::string>();
        const auto golds = j.at("golds").get<std::vector<std::string>>();
        worst_f1 = std::max(worst_f1, std::abs(token_f1(pred, golds) - j.at("f1").get<double>()));
        em_bad += exact_match(pred, golds) != j.at("em").get<int>() ? 1 : 0;
        ++rows;
    });
    const auto bj = json::parse(io::read_file(data_path("golden_bleu.json")));
    std::vector<std::string> preds, refs;
    for (const auto& p : bj.at("pairs")) {
        preds.push_back(p.at("pred"));
        refs.push_back(p.at("ref"));
    }
    double bleu_err = std::abs(corpus_bleu(preds, refs) - bj.at("bleu").get<double>());
    for (const auto& e : bj.at("extra"))
        bleu_err = std::max(bleu_err, std::abs(corpus_bleu(e.at("preds"), e.at("refs")) - e.at("bleu").get<double>()));
    const bool ok = rows == 200 && worst_f1 <= kF1Tol && em_bad == 0 && preds.size() == 50 && bleu_err <= kBleuTol;
    std::ostringstream d;
    d << rows << " F1/EM pairs: max |dF1|=" << std::scientific << std::setprecision(2) << worst_f1
      << ", EM mismatches=" << em_bad << "; " << preds.size() << " BLEU pairs: max |dBLEU|=" << bleu_err;
    return {ok ? Status::Pass : Status::Fail, d.str()};
}

// ---------------------------------------------------------------- C5

// Validator written against the rules directly, without the library's
// split-point or audit helpers.
std::vector<std::string> check_flows(const std::vector<flowgen::ComposedFlow>& flows,
                                     const std::map<std::string, const Dialogue*>& by_id,
                                     const flowgen::FlowgenConfig& cfg) {
    std::vector<std::string> problems;
    auto splittable_after = [&](const Dialogue& d, std::size_t i) {
        return i + 1 < d.turns.size() && d.turns[i].role == Role::Agent && d.turns[i].da == cfg.responding_act &&
               d.turns[i + 1].da != cfg.followup_act;
    };
    std::set<std::pair<std::string, std::size_t>> used_turns;
    for (const auto& f : flows) {
        const std::string where = f.flow_id;
        if (f.turns.size() < cfg.min_turns || f.turns.size() > cfg.max_turns)
            problems.push_back(where + ": " + std::to_string(f.turns.size()) + " turns");
        std::size_t cursor = 0;
        for (std::size_t s = 0; s < f.segments.size(); ++s) {
            const auto& seg = f.segments[s];
            const Dialogue& d = *by_id.at(seg.source_dial_id);
            if (s > 0 && f.segments[s - 1].grounding_doc_id == seg.grounding_doc_id)
                problems.push_back(where + ": adjacent segments share " + seg.grounding_doc_id);
            const auto b = seg.turn_range.begin, e = seg.turn_range.end;
            if (e <= b || e > d.turns.size()) {
                problems.push_back(where + ": bad range");
                continue;
            }
            if (b > 0 && !splittable_after(d, b - 1)) problems.push_back(where + ": segment starts off a split");
            const bool truncated = s + 1 == f.segments.size() && f.turns.size() == cfg.max_turns;
            if (e < d.turns.size() && !splittable_after(d, e - 1) && !truncated)
                problems.push_back(where + ": segment ends off a split");
            for (auto i = b; i < e; ++i) {
                if (!used_turns.insert({d.dial_id, i}).second)
                    problems.push_back(where + ": turn reused " + d.dial_id + "#" + std::to_string(i));
                for (const auto& r : d.turns[i].references)
                    if (r.doc_id != seg.grounding_doc_id) problems.push_back(where + ": segment spans documents");
                if (cursor >= f.turns.size() || f.turns[cursor].utterance != d.turns[i].utterance)
                    problems.push_back(where + ": turn text differs from source");
                ++cursor;
            }
        }
        if (cursor != f.turns.size()) problems.push_back(where + ": turn count differs from segments");
    }
    return problems;
}

Outcome c5_flowgen_rules() {
    const auto corpus = load_corpus(data_path("fixture_docs.jsonl"), SchemaAdapter::canonical());
    const auto dials = load_dialogues(data_path("fixture_dials.jsonl"), SchemaAdapter::canonical());
    if (dials.size() != 50) return {Status::Fail, "fixture has " + std::to_string(dials.size()) + " dialogues"};
    std::map<std::string, const Dialogue*> by_id;
    for (const auto& d : dials) by_id[d.dial_id] = &d;

    std::size_t violations = 0, nondeterministic = 0, flows_total = 0, empty_runs = 0;
    std::string first_problem;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        flowgen::FlowgenConfig cfg;
        cfg.seed = seed;
        const auto a = flowgen::run_flowgen(dials, corpus.documents, cfg);
        const auto b = flowgen::run_flowgen(dials, corpus.documents, cfg);
        std::string sa, sb;
        for (const auto& f : a.flows) sa += flowgen::to_json(f).dump() + "\n";
        for (const auto& f : b.flows) sb += flowgen::to_json(f).dump() + "\n";
        nondeterministic += sa != sb ? 1 : 0;
        const auto problems = check_flows(a.flows, by_id, cfg);
        violations += problems.size();
        if (!problems.empty() && first_problem.empty()) first_problem = problems.front();
        flows_total += a.flows.size();
        empty_runs += a.flows.empty() ? 1 : 0;
    }
    const bool ok = violations == 0 && nondeterministic == 0 && flows_total > 0;
    std::string detail = "1000 seeds, " + std::to_string(flows_total) + " flows, " + std::to_string(violations) +
                         " violations, " + std::to_string(nondeterministic) + " non-identical reruns, " +
                         std::to_string(empty_runs) + " empty runs";
    if (!first_problem.empty()) detail += "; first: " + first_problem;
    return {ok ? Status::Pass : Status::Fail, detail};
}

// ---------------------------------------------------------------- C6

Outcome c6_rerank_properties() {
    std::mt19937_64 rng(606);
    std::size_t bad = 0;
    auto make = [&](std::size_t universe, HitSource src) {
        std::vector<ScoredHit> out;
        std::set<std::string> seen;
        const std::size_t len = rng() % (universe + 1);
        for (std::size_t i = 0; i < len; ++i) {
            auto id = "p" + std::to_string(rng() % universe);
            if (seen.insert(id).second) out.push_back({id, 0.0, out.size() + 1, src});
        }
        return out;
    };
    auto ids = [](const std::vector<ScoredHit>& v) {
        std::vector<std::string> out;
        for (const auto& h : v) out.push_back(h.passage_id);
        return out;
    };
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t universe = 1 + rng() % 30;
        const auto full = make(universe, HitSource::FullQuery);
        const auto cur = trial % 10 == 0 ? full : make(universe, HitSource::CurrentTurn);
        const std::size_t k = 1 + rng() % 25;
        std::set<std::string> uni;
        for (const auto& h : full) uni.insert(h.passage_id);
        for (const auto& h : cur) uni.insert(h.passage_id);
        const auto out = ids(rerank_union(full, cur, k));
        const auto next = ids(rerank_union(full, cur, k + 1));
        const bool unique = std::set<std::string>(out.begin(), out.end()).size() == out.size();
        const bool length = out.size() == std::min(k, uni.size());
        const bool prefix = std::equal(out.begin(), out.end(), next.begin());
        bool same = true;
        if (ids(full) == ids(cur)) {
            auto top = ids(full);
            top.resize(std::min(k, top.size()));
            same = out == top;
        }
        bad += (unique && length && prefix && same) ? 0 : 1;
    }
    return {bad == 0 ? Status::Pass : Status::Fail, "10000 triples, " + std::to_string(bad) + " failing"};
}

// ---------------------------------------------------------------- C7

Outcome c7_external_models_smoke() {
    std::cout << "  note: dense-retriever rows and every fine-tuned generation row of the published tables need\n"
                 "  trained neural encoders and generators; they are not reproduced here. Retrieval and metric\n"
                 "  machinery is covered by c3/c4; this check feeds externally produced embeddings and\n"
                 "  predictions through the same pipeline.\n";
    const auto corpus = load_corpus(data_path("fixture_docs.jsonl"), SchemaAdapter::canonical());
    const auto dials = load_dialogues(data_path("fixture_dials.jsonl"), SchemaAdapter::canonical());
    const auto passages = segment_corpus(corpus.documents, SegmentationMode::structure());
    const auto queries = build_queries(dials, &corpus.documents);
    const auto pemb = EmbeddingSet::load_jsonl(data_path("fixture_passage_emb.jsonl"));
    const auto qemb = EmbeddingSet::load_jsonl(data_path("fixture_query_emb.jsonl"));
    std::size_t missing = 0;
    for (const auto& p : passages) missing += pemb.contains(p.passage_id) ? 0 : 1;
    if (missing || pemb.size() != passages.size())
        return {Status::Fail, std::to_string(missing) + " passages lack embeddings"};
    DenseIndex idx(pemb);
    RunConfig cfg;
    cfg.retriever = "dense";
    const auto run = retrieve_all(idx, queries, qemb, nullptr, cfg);
    PassageCatalog catalog(passages);
    const auto rr = evaluate_retrieval(run, queries, catalog, {1, 5, 10});
    const auto preds = load_predictions(data_path("fixture_predictions.jsonl"));
    const auto gen = evaluate_generation(preds, queries, GenerationTask::Response);
    const bool sane = rr.recall_at.at(1) <= rr.recall_at.at(5) && rr.recall_at.at(5) <= rr.recall_at.at(10) &&
                      *gen.f1 > 0.0 && *gen.f1 <= 1.0 && *gen.bleu >= 0.0 && *gen.bleu <= 100.0;
    return {sane ? Status::Pass : Status::Fail,
            "dense R@1/5/10=" + fmt(100 * rr.recall_at.at(1)) + "/" + fmt(100 * rr.recall_at.at(5)) + "/" +
                fmt(100 * rr.recall_at.at(10)) + " over " + std::to_string(rr.n_queries) + " queries; response F1=" +
                fmt(100 * *gen.f1) + " EM=" + fmt(100 * *gen.em) + " BLEU=" + fmt(*gen.bleu)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::pair<std::string, std::function<Outcome()>>>> criteria = {
        {"c1", {"BM25 recall@1/5/10 within 2.5 points (dataset)", c1_bm25_recall}},
        {"c2", {"corpus, dialogue and query statistics (dataset)", c2_corpus_statistics}},
        {"c3", {"dense top-10 identical to naive oracle, < 1 s", c3_dense_exactness}},
        {"c4", {"F1/EM within 1e-9, BLEU within 1e-4 of reference", c4_metric_conformance}},
        {"c5", {"flowgen rules over 1000 seeds, byte-identical reruns", c5_flowgen_rules}},
        {"c6", {"rerank properties over 10000 triples", c6_rerank_properties}},
        {"c7", {"external embeddings/predictions smoke test", c7_external_models_smoke}},
    };
    std::set<std::string> selected(argv + 1, argv + argc);
    int failed = 0, skipped = 0, ran = 0;
    for (const auto& [id, entry] : criteria) {
        if (!selected.empty() && !selected.count(id)) continue;
        ++ran;
        Outcome o;
        try {
            o = entry.second();
        } catch (const std::exception& e) {
            o = {Status::Fail, std::string("exception: ") + e.what()};
        }
        const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIP";
        std::cout << tag << " " << id << " " << entry.first << " -- " << o.detail << std::endl;
        failed += o.status == Status::Fail ? 1 : 0;
        skipped += o.status == Status::Skip ? 1 : 0;
    }
    if (ran == 0) {
        std::cerr << "no such criterion\n";
        return 2;
    }
    if (failed) return 1;
    return skipped == ran ? 77 : 0;
}
