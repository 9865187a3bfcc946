#include "gdr/retrieve.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>
#include <mutex>
#include <thread>
#include <unordered_set>

#include "gdr/error.hpp"
#include "gdr/io.hpp"
#include "gdr/text.hpp"

namespace gdr {
namespace {

using json = nlohmann::json;

// Runs fn(i) for i in [0, n) on a few threads. Each index writes only its
// own slot, so results do not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 16);
    if (n < 64 || workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::jthread> pool;
    std::exception_ptr error;
    std::mutex error_mu;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) fn(i);
            } catch (...) {
                std::lock_guard lock(error_mu);
                if (!error) error = std::current_exception();
            }
        });
    }
    pool.clear();
    if (error) std::rethrow_exception(error);
}

std::vector<ScoredHit> tag(std::vector<ScoredHit> hits, HitSource s) {
    for (auto& h : hits) h.source = s;
    return hits;
}

std::vector<ScoredHit> merge_round_robin(const std::vector<ScoredHit>& full, const std::vector<ScoredHit>& cur,
                                         std::size_t k) {
    std::vector<ScoredHit> out;
    std::unordered_set<std::string> seen;
    const std::size_t n = std::max(full.size(), cur.size());
    for (std::size_t i = 0; i < n && out.size() < k; ++i) {
        for (const auto* list : {&full, &cur}) {
            if (i < list->size() && out.size() < k && seen.insert((*list)[i].passage_id).second)
                out.push_back((*list)[i]);
        }
    }
    return out;
}

std::vector<ScoredHit> merge_concat(const std::vector<ScoredHit>& full, const std::vector<ScoredHit>& cur,
                                    std::size_t k) {
    std::vector<ScoredHit> out;
    std::unordered_set<std::string> seen;
    for (const auto* list : {&full, &cur}) {
        for (const auto& h : *list) {
            if (out.size() == k) return out;
            if (seen.insert(h.passage_id).second) out.push_back(h);
        }
    }
    return out;
}

std::vector<double> min_max(const std::vector<ScoredHit>& hits) {
    std::vector<double> out(hits.size(), 1.0);
    if (hits.empty()) return out;
    auto [lo, hi] = std::minmax_element(hits.begin(), hits.end(),
                                        [](const auto& a, const auto& b) { return a.score < b.score; });
    const double span = hi->score - lo->score;
    if (span <= 0.0) return out;
    for (std::size_t i = 0; i < hits.size(); ++i) out[i] = (hits[i].score - lo->score) / span;
    return out;
}

std::vector<ScoredHit> merge_normalized(const std::vector<ScoredHit>& full, const std::vector<ScoredHit>& cur,
                                        std::size_t k) {
    struct Item {
        double norm;
        int list;
        std::size_t pos;
        const ScoredHit* hit;
    };
    std::vector<Item> items;
    const auto nf = min_max(full);
    const auto nc = min_max(cur);
    for (std::size_t i = 0; i < full.size(); ++i) items.push_back({nf[i], 0, i, &full[i]});
    for (std::size_t i = 0; i < cur.size(); ++i) items.push_back({nc[i], 1, i, &cur[i]});
    std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
        if (a.norm != b.norm) return a.norm > b.norm;
        if (a.pos != b.pos) return a.pos < b.pos;
        return a.list < b.list;
    });
    std::vector<ScoredHit> out;
    std::unordered_set<std::string> seen;
    for (const auto& it : items) {
        if (out.size() == k) break;
        if (seen.insert(it.hit->passage_id).second) out.push_back(*it.hit);
    }
    return out;
}

std::string format_score(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace

const char* to_string(RerankMode m) { return m == RerankMode::None ? "none" : "current_turn"; }

const char* to_string(MergePolicy m) {
    switch (m) {
        case MergePolicy::RoundRobin: return "round_robin";
        case MergePolicy::ConcatDedupe: return "concat_dedupe";
        case MergePolicy::ScoreNormalized: return "score_normalized";
    }
    return "round_robin";
}

RerankMode parse_rerank_mode(const std::string& s) {
    if (s == "none") return RerankMode::None;
    if (s == "current_turn") return RerankMode::CurrentTurn;
    throw std::invalid_argument("unknown rerank mode '" + s + "'");
}

MergePolicy parse_merge_policy(const std::string& s) {
    if (s == "round_robin") return MergePolicy::RoundRobin;
    if (s == "concat_dedupe") return MergePolicy::ConcatDedupe;
    if (s == "score_normalized") return MergePolicy::ScoreNormalized;
    throw std::invalid_argument("unknown merge policy '" + s + "'");
}

std::vector<ScoredHit> rerank_union(const std::vector<ScoredHit>& full, const std::vector<ScoredHit>& current,
                                    std::size_t k, MergePolicy policy) {
    std::vector<ScoredHit> out;
    switch (policy) {
        case MergePolicy::RoundRobin: out = merge_round_robin(full, current, k); break;
        case MergePolicy::ConcatDedupe: out = merge_concat(full, current, k); break;
        case MergePolicy::ScoreNormalized: out = merge_normalized(full, current, k); break;
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = i + 1;
    return out;
}

RetrievalRun retrieve_all(const Bm25Index& index, const std::vector<DialQuery>& queries, const RunConfig& config,
                          QueryRenderer full_renderer, QueryRenderer current_renderer) {
    if (config.k == 0) throw std::invalid_argument("k must be >= 1");
    const std::size_t budget = config.max_query_tokens;
    if (!full_renderer) full_renderer = [budget](const DialQuery& q) { return render_query(q, budget); };
    if (!current_renderer)
        current_renderer = [budget](const DialQuery& q) { return render_current_turn(q, budget); };
    std::vector<std::vector<ScoredHit>> lists(queries.size());
    parallel_for(queries.size(), [&](std::size_t i) {
        const auto& q = queries[i];
        if (config.rerank == RerankMode::None) {
            lists[i] = index.search(full_renderer(q), config.k);
            return;
        }
        auto full = tag(index.search(full_renderer(q), config.depth()), HitSource::FullQuery);
        auto cur = tag(index.search(current_renderer(q), config.depth()), HitSource::CurrentTurn);
        lists[i] = rerank_union(full, cur, config.k, config.merge);
    });
    RetrievalRun run{config, {}};
    for (std::size_t i = 0; i < queries.size(); ++i) run.results[queries[i].query_id] = std::move(lists[i]);
    return run;
}

RetrievalRun retrieve_all(const DenseIndex& index, const std::vector<DialQuery>& queries,
                          const EmbeddingSet& query_vectors, const EmbeddingSet* current_vectors,
                          const RunConfig& config) {
    if (config.k == 0) throw std::invalid_argument("k must be >= 1");
    const bool rerank = config.rerank == RerankMode::CurrentTurn;
    if (rerank && !current_vectors)
        throw IngestError("current-turn rerank needs a current-turn embedding set");
    for (const auto* set : {&query_vectors, current_vectors}) {
        if (!set) continue;
        std::vector<std::string> missing;
        for (const auto& q : queries) {
            if (!set->contains(q.query_id)) missing.push_back(q.query_id);
        }
        if (!missing.empty()) {
            std::string msg = std::to_string(missing.size()) + " query ids missing from embedding set:";
            for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
            if (missing.size() > 20) msg += " ...";
            throw IngestError(msg);
        }
        if (set->dim() != index.dim())
            throw DimensionError("query embeddings have dim " + std::to_string(set->dim()) + ", index has " +
                                 std::to_string(index.dim()));
    }
    std::vector<std::vector<ScoredHit>> lists(queries.size());
    parallel_for(queries.size(), [&](std::size_t i) {
        const auto& id = queries[i].query_id;
        if (!rerank) {
            lists[i] = index.search(query_vectors.at(id), config.k);
            return;
        }
        auto full = tag(index.search(query_vectors.at(id), config.depth()), HitSource::FullQuery);
        auto cur = tag(index.search(current_vectors->at(id), config.depth()), HitSource::CurrentTurn);
        lists[i] = rerank_union(full, cur, config.k, config.merge);
    });
    RetrievalRun run{config, {}};
    for (std::size_t i = 0; i < queries.size(); ++i) run.results[queries[i].query_id] = std::move(lists[i]);
    return run;
}

json to_json(const RunConfig& c) {
    return {{"retriever", c.retriever},
            {"segmentation", c.segmentation},
            {"rerank", to_string(c.rerank)},
            {"merge", to_string(c.merge)},
            {"k", c.k},
            {"per_list_depth", c.depth()},
            {"max_query_tokens", c.max_query_tokens},
            {"extra", c.extra}};
}

RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    c.retriever = j.value("retriever", c.retriever);
    c.segmentation = j.value("segmentation", c.segmentation);
    c.rerank = parse_rerank_mode(j.value("rerank", std::string("none")));
    c.merge = parse_merge_policy(j.value("merge", std::string("round_robin")));
    c.k = j.value("k", c.k);
    c.per_list_depth = j.value("per_list_depth", std::size_t{0});
    c.max_query_tokens = j.value("max_query_tokens", c.max_query_tokens);
    if (j.contains("extra")) c.extra = j["extra"];
    return c;
}

std::string escape_id(std::string_view id) {
    std::string out;
    out.reserve(id.size());
    for (char c : id) {
        const auto u = static_cast<unsigned char>(c);
        if (c == '%' || u <= 0x20 || u == 0x7F) {
            char buf[4];
            std::snprintf(buf, sizeof buf, "%%%02X", u);
            out += buf;
        } else {
            out.push_back(c);
        }
    }
    return out;
}

std::string unescape_id(std::string_view id) {
    std::string out;
    out.reserve(id.size());
    for (std::size_t i = 0; i < id.size(); ++i) {
        if (id[i] == '%' && i + 2 < id.size()) {
            unsigned v = 0;
            auto [p, ec] = std::from_chars(id.data() + i + 1, id.data() + i + 3, v, 16);
            if (ec == std::errc() && p == id.data() + i + 3) {
                out.push_back(static_cast<char>(v));
                i += 2;
                continue;
            }
        }
        out.push_back(id[i]);
    }
    return out;
}

std::string format_run(const RetrievalRun& run) {
    json header = {{"run", to_json(run.config)}};
    json no_hits = json::array();
    for (const auto& [qid, hits] : run.results)
        if (hits.empty()) no_hits.push_back(qid);
    if (!no_hits.empty()) header["no_hits"] = no_hits;
    std::string out = header.dump();
    out += '\n';
    for (const auto& [qid, hits] : run.results) {
        const auto q = escape_id(qid);
        for (const auto& h : hits) {
            out += q;
            out += ' ';
            out += escape_id(h.passage_id);
            out += ' ';
            out += std::to_string(h.rank);
            out += ' ';
            out += format_score(h.score);
            out += ' ';
            out += to_string(h.source);
            out += '\n';
        }
    }
    return out;
}

RetrievalRun parse_run(std::string_view content, const std::string& origin) {
    RetrievalRun run;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    bool header = false;
    while (pos < content.size()) {
        auto nl = content.find('\n', pos);
        if (nl == std::string_view::npos) nl = content.size();
        const auto line = text::strip(content.substr(pos, nl - pos));
        pos = nl + 1;
        ++lineno;
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        if (!header) {
            try {
                const auto j = json::parse(line);
                run.config = run_config_from_json(j.at("run"));
                if (j.contains("no_hits"))
                    for (const auto& q : j["no_hits"]) run.results[q.get<std::string>()];
            } catch (const std::exception& e) {
                throw IngestError(where + ": bad run header: " + e.what());
            }
            header = true;
            continue;
        }
        const auto fields = text::split_whitespace(line);
        if (fields.size() != 5) throw IngestError(where + ": expected 5 fields");
        ScoredHit h;
        h.passage_id = unescape_id(fields[1]);
        try {
            h.rank = std::stoul(fields[2]);
            h.score = std::stod(fields[3]);
        } catch (const std::exception&) {
            throw IngestError(where + ": bad rank or score");
        }
        if (fields[4] == "full_query")
            h.source = HitSource::FullQuery;
        else if (fields[4] == "current_turn")
            h.source = HitSource::CurrentTurn;
        else
            throw IngestError(where + ": unknown source '" + fields[4] + "'");
        auto& list = run.results[unescape_id(fields[0])];
        if (h.rank != list.size() + 1) throw IngestError(where + ": ranks must run 1..n in order");
        list.push_back(std::move(h));
    }
    if (!header) throw IngestError(origin + ": empty run file");
    return run;
}

void save_run(const std::filesystem::path& path, const RetrievalRun& run) {
    io::write_file_atomic(path, format_run(run));
}

RetrievalRun load_run(const std::filesystem::path& path) {
    return parse_run(io::read_file(path), path.string());
}

}  // namespace gdr
