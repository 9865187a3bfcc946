#include "gdr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "gdr/error.hpp"
#include "gdr/io.hpp"
#include "gdr/text.hpp"

namespace gdr {
namespace {

using json = nlohmann::json;

double f1_single(const text::TokenList& pred, const text::TokenList& gold) {
    if (pred.empty() || gold.empty()) return pred == gold ? 1.0 : 0.0;
    std::unordered_map<std::string, long> counts;
    for (const auto& t : gold) ++counts[t];
    long same = 0;
    for (const auto& t : pred) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++same;
        }
    }
    if (same == 0) return 0.0;
    const double precision = 1.0 * same / static_cast<double>(pred.size());
    const double recall = 1.0 * same / static_cast<double>(gold.size());
    return (2 * precision * recall) / (precision + recall);
}

using Ngram = std::string;  // tokens joined by '\x01'

std::map<Ngram, long long> ngram_counts(const text::TokenList& toks, std::size_t n) {
    std::map<Ngram, long long> out;
    if (toks.size() < n) return out;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
        Ngram g = toks[i];
        for (std::size_t j = 1; j < n; ++j) {
            g += '\x01';
            g += toks[i + j];
        }
        ++out[g];
    }
    return out;
}

// SacreBLEU floors log(0) to this value.
double floored_log(double x) { return x == 0.0 ? -9999999999.0 : std::log(x); }

json values_json(const MetricValues& v) {
    json j = {{"n_queries", v.n_queries}};
    json rec = json::object();
    for (const auto& [k, r] : v.recall_at) rec[std::to_string(k)] = r;
    j["recall_at"] = rec;
    j["f1"] = v.f1 ? json(*v.f1) : json(nullptr);
    j["em"] = v.em ? json(*v.em) : json(nullptr);
    j["bleu"] = v.bleu ? json(*v.bleu) : json(nullptr);
    return j;
}

MetricValues values_from_json(const json& j) {
    MetricValues v;
    v.n_queries = j.value("n_queries", std::size_t{0});
    if (j.contains("recall_at")) {
        for (const auto& [k, r] : j["recall_at"].items()) v.recall_at[std::stoul(k)] = r.get<double>();
    }
    auto opt = [&](const char* key, std::optional<double>& out) {
        if (j.contains(key) && j[key].is_number()) out = j[key].get<double>();
    };
    opt("f1", v.f1);
    opt("em", v.em);
    opt("bleu", v.bleu);
    return v;
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
    return buf;
}

std::string fixed1(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

}  // namespace

PassageCatalog::PassageCatalog(const std::vector<Passage>& passages, const SpanLookup* spans) : spans_(spans) {
    for (const auto& p : passages) by_doc_[p.doc_id].push_back(&p);
}

std::set<std::string> PassageCatalog::positives(const DialQuery& q, RecallLevel level) const {
    std::set<std::string> out;
    for (const auto& g : q.gold_grounding) {
        auto it = by_doc_.find(g.doc_id);
        if (it == by_doc_.end())
            throw EvalError("query '" + q.query_id + "': grounding document '" + g.doc_id + "' not in corpus");
        if (level == RecallLevel::Document) {
            for (const auto* p : it->second) out.insert(p->passage_id);
            continue;
        }
        std::optional<CharRange> range = g.char_range;
        if (!range && spans_) {
            if (auto d = spans_->find(g.doc_id); d != spans_->end()) {
                if (auto s = d->second.find(g.span_id); s != d->second.end()) range = s->second;
            }
        }
        if (!range)
            throw EvalError("query '" + q.query_id + "': cannot resolve span '" + g.span_id + "' of '" +
                            g.doc_id + "'");
        for (const auto* p : it->second) {
            if (p->source_char_range.overlaps(*range)) out.insert(p->passage_id);
        }
    }
    return out;
}

PositiveSets compute_positives(const std::vector<DialQuery>& queries, const PassageCatalog& catalog,
                               RecallLevel level) {
    PositiveSets out;
    for (const auto& q : queries) {
        auto pos = catalog.positives(q, level);
        if (pos.empty())
            out.excluded.push_back(q.query_id);
        else
            out.by_query.emplace(q.query_id, std::move(pos));
    }
    return out;
}

double recall_at_k(const RetrievalRun& run, const std::map<std::string, std::set<std::string>>& positives,
                   std::size_t k) {
    if (k == 0) throw std::invalid_argument("k must be >= 1");
    std::size_t n = 0;
    std::size_t hits = 0;
    for (const auto& [qid, pos] : positives) {
        if (pos.empty()) continue;
        ++n;
        auto it = run.results.find(qid);
        if (it == run.results.end()) continue;
        const auto& list = it->second;
        const std::size_t m = std::min(k, list.size());
        for (std::size_t i = 0; i < m; ++i) {
            if (pos.count(list[i].passage_id)) {
                ++hits;
                break;
            }
        }
    }
    if (n == 0) throw EvalError("recall over zero queries with gold positives");
    return static_cast<double>(hits) / static_cast<double>(n);
}

double token_f1(std::string_view pred, const std::vector<std::string>& golds) {
    if (golds.empty()) throw std::invalid_argument("token_f1 needs at least one gold");
    const auto p = text::squad_normalize(pred);
    double best = 0.0;
    for (const auto& g : golds) best = std::max(best, f1_single(p, text::squad_normalize(g)));
    return best;
}

int exact_match(std::string_view pred, const std::vector<std::string>& golds) {
    if (golds.empty()) throw std::invalid_argument("exact_match needs at least one gold");
    const auto p = text::squad_normalize(pred);
    for (const auto& g : golds) {
        if (text::squad_normalize(g) == p) return 1;
    }
    return 0;
}

BleuStats& BleuStats::operator+=(const BleuStats& o) {
    for (int n = 0; n < 4; ++n) {
        correct[n] += o.correct[n];
        total[n] += o.total[n];
    }
    sys_len += o.sys_len;
    ref_len += o.ref_len;
    return *this;
}

double BleuStats::score() const {
    double bp = 1.0;
    if (sys_len < ref_len) bp = sys_len > 0 ? std::exp(1.0 - static_cast<double>(ref_len) / sys_len) : 0.0;
    if (std::all_of(correct.begin(), correct.end(), [](long long c) { return c == 0; })) return 0.0;
    std::array<double, 4> precisions{};
    double smooth = 1.0;
    for (int n = 0; n < 4; ++n) {
        if (total[n] == 0) break;
        if (correct[n] == 0) {
            smooth *= 2;
            precisions[n] = 100.0 / (smooth * static_cast<double>(total[n]));
        } else {
            precisions[n] = 100.0 * static_cast<double>(correct[n]) / static_cast<double>(total[n]);
        }
    }
    // Left-to-right summation, as Python's sum() over the list.
    double log_sum = 0.0;
    for (double p : precisions) log_sum += floored_log(p);
    return bp * std::exp(log_sum / 4);
}

BleuStats bleu_segment_stats(std::string_view hyp, std::string_view ref) {
    const auto h = text::tokenize_13a(text::rstrip(hyp));
    const auto r = text::tokenize_13a(text::rstrip(ref));
    BleuStats s;
    s.sys_len = static_cast<long long>(h.size());
    s.ref_len = static_cast<long long>(r.size());
    for (std::size_t n = 1; n <= 4; ++n) {
        const auto hc = ngram_counts(h, n);
        const auto rc = ngram_counts(r, n);
        for (const auto& [g, c] : hc) {
            s.total[n - 1] += c;
            if (auto it = rc.find(g); it != rc.end()) s.correct[n - 1] += std::min(c, it->second);
        }
    }
    return s;
}

double corpus_bleu(const std::vector<std::string>& preds, const std::vector<std::string>& refs) {
    if (preds.size() != refs.size())
        throw EvalError("corpus_bleu: " + std::to_string(preds.size()) + " predictions vs " +
                        std::to_string(refs.size()) + " references");
    if (preds.empty()) throw EvalError("corpus_bleu over an empty corpus");
    BleuStats total;
    for (std::size_t i = 0; i < preds.size(); ++i) total += bleu_segment_stats(preds[i], refs[i]);
    return total.score();
}

EvalReport evaluate_retrieval(const RetrievalRun& run, const std::vector<DialQuery>& queries,
                              const PassageCatalog& catalog, const std::vector<std::size_t>& ks,
                              RecallLevel level) {
    const auto pos = compute_positives(queries, catalog, level);
    EvalReport report;
    report.excluded_queries = pos.excluded.size();
    report.n_queries = pos.by_query.size();
    for (auto k : ks) report.recall_at[k] = recall_at_k(run, pos.by_query, k);
    std::map<std::string, std::map<std::string, std::set<std::string>>> by_domain;
    for (const auto& q : queries) {
        if (auto it = pos.by_query.find(q.query_id); it != pos.by_query.end())
            by_domain[q.domain][q.query_id] = it->second;
    }
    for (const auto& [dom, p] : by_domain) {
        auto& v = report.per_domain[dom];
        v.n_queries = p.size();
        for (auto k : ks) v.recall_at[k] = recall_at_k(run, p, k);
    }
    report.config = {{"run", to_json(run.config)},
                     {"level", level == RecallLevel::Passage ? "passage" : "document"}};
    return report;
}

EvalReport evaluate_generation(const std::map<std::string, std::string>& predictions,
                               const std::vector<DialQuery>& queries, GenerationTask task) {
    if (queries.empty()) throw EvalError("generation evaluation over zero queries");
    std::set<std::string> qids;
    std::vector<std::string> missing;
    for (const auto& q : queries) {
        qids.insert(q.query_id);
        if (!predictions.count(q.query_id)) missing.push_back(q.query_id);
    }
    std::vector<std::string> unknown;
    for (const auto& [id, _] : predictions) {
        if (!qids.count(id)) unknown.push_back(id);
    }
    auto list = [](const std::vector<std::string>& ids) {
        std::string s;
        for (std::size_t i = 0; i < ids.size() && i < 10; ++i) s += " " + ids[i];
        return ids.size() > 10 ? s + " ..." : s;
    };
    if (!missing.empty())
        throw EvalError(std::to_string(missing.size()) + " queries without prediction:" + list(missing));
    if (!unknown.empty())
        throw EvalError(std::to_string(unknown.size()) + " predictions for unknown queries:" + list(unknown));

    struct Acc {
        double f1 = 0, em = 0;
        std::vector<std::string> preds, refs;
    };
    Acc all;
    std::map<std::string, Acc> dom;
    for (const auto& q : queries) {
        const auto& pred = predictions.at(q.query_id);
        const auto& gold = task == GenerationTask::Grounding ? q.gold_span_text : q.gold_response;
        const double f = token_f1(pred, {gold});
        const double e = exact_match(pred, {gold});
        for (Acc* a : {&all, &dom[q.domain]}) {
            a->f1 += f;
            a->em += e;
            a->preds.push_back(pred);
            a->refs.push_back(gold);
        }
    }
    auto finish = [](MetricValues& v, const Acc& a) {
        const auto n = static_cast<double>(a.preds.size());
        v.n_queries = a.preds.size();
        v.f1 = a.f1 / n;
        v.em = a.em / n;
        v.bleu = corpus_bleu(a.preds, a.refs);
    };
    EvalReport report;
    finish(report, all);
    for (const auto& [d, a] : dom) finish(report.per_domain[d], a);
    report.config = {{"task", task == GenerationTask::Grounding ? "grounding" : "response"}};
    return report;
}

std::map<std::string, std::string> load_predictions(const std::filesystem::path& path) {
    std::map<std::string, std::string> out;
    io::for_each_jsonl(path, [&](const json& row, std::size_t line) {
        const std::string where = path.string() + ":" + std::to_string(line);
        if (!row.contains("query_id") || !row["query_id"].is_string() || !row.contains("text") ||
            !row["text"].is_string())
            throw IngestError(where + ": expected {\"query_id\": string, \"text\": string}");
        if (!out.emplace(row["query_id"].get<std::string>(), row["text"].get<std::string>()).second)
            throw IngestError(where + ": duplicate query_id");
    });
    return out;
}

json to_json(const EvalReport& r) {
    json j = values_json(r);
    json dom = json::object();
    for (const auto& [d, v] : r.per_domain) dom[d] = values_json(v);
    j["per_domain"] = dom;
    j["excluded_queries"] = r.excluded_queries;
    j["config"] = r.config;
    return j;
}

EvalReport report_from_json(const json& j) {
    EvalReport r;
    static_cast<MetricValues&>(r) = values_from_json(j);
    if (j.contains("per_domain")) {
        for (const auto& [d, v] : j["per_domain"].items()) r.per_domain[d] = values_from_json(v);
    }
    r.excluded_queries = j.value("excluded_queries", std::size_t{0});
    if (j.contains("config")) r.config = j["config"];
    return r;
}

std::string format_report_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
    bool gen = false;
    std::set<std::size_t> ks;
    std::size_t label_w = 3;
    for (const auto& [label, r] : rows) {
        gen = gen || r.f1.has_value();
        for (const auto& [k, _] : r.recall_at) ks.insert(k);
        label_w = std::max(label_w, label.size());
    }
    std::vector<std::string> header{"F1", "EM", "BL"};
    if (!gen) header.clear();
    for (auto k : ks) header.push_back("@" + std::to_string(k));

    std::ostringstream out;
    auto cell = [&](const std::string& s) {
        out << ' ';
        for (std::size_t i = s.size(); i < 6; ++i) out << ' ';
        out << s;
    };
    out << std::string(label_w, ' ');
    for (const auto& h : header) cell(h);
    out << '\n';
    for (const auto& [label, r] : rows) {
        out << label << std::string(label_w - label.size(), ' ');
        if (gen) {
            cell(r.f1 ? pct(*r.f1) : "-");
            cell(r.em ? pct(*r.em) : "-");
            cell(r.bleu ? fixed1(*r.bleu) : "-");
        }
        for (auto k : ks) {
            auto it = r.recall_at.find(k);
            cell(it == r.recall_at.end() ? "-" : pct(it->second));
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace gdr
