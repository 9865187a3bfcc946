#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gdr/corpus.hpp"
#include "gdr/dialogue.hpp"
#include "gdr/retrieve.hpp"

namespace gdr {

enum class RecallLevel { Passage, Document };

/// Passages grouped by source document, for resolving gold groundings.
class PassageCatalog {
public:
    explicit PassageCatalog(const std::vector<Passage>& passages, const SpanLookup* spans = nullptr);

    /// Passages overlapping any gold grounding range (Passage level), or all
    /// passages of the grounding documents (Document level). Throws
    /// EvalError for an unknown doc_id or an unresolvable span.
    std::set<std::string> positives(const DialQuery& q, RecallLevel level = RecallLevel::Passage) const;

private:
    std::map<std::string, std::vector<const Passage*>> by_doc_;
    const SpanLookup* spans_;
};

struct PositiveSets {
    std::map<std::string, std::set<std::string>> by_query;  // only queries with a non-empty set
    std::vector<std::string> excluded;                      // queries without gold grounding
};

PositiveSets compute_positives(const std::vector<DialQuery>& queries, const PassageCatalog& catalog,
                               RecallLevel level = RecallLevel::Passage);

/// Mean over queries in `positives` of [any top-k hit is positive]. A query
/// missing from the run counts as a miss. Throws EvalError when `positives`
/// is empty.
double recall_at_k(const RetrievalRun& run, const std::map<std::string, std::set<std::string>>& positives,
                   std::size_t k);

/// SQuAD token F1, maximized over golds.
double token_f1(std::string_view pred, const std::vector<std::string>& golds);
/// SQuAD exact match after normalization, maximized over golds.
int exact_match(std::string_view pred, const std::vector<std::string>& golds);

struct BleuStats {
    std::array<long long, 4> correct{};
    std::array<long long, 4> total{};
    long long sys_len = 0;
    long long ref_len = 0;

    BleuStats& operator+=(const BleuStats& o);
    /// BLEU in [0, 100] with exponential smoothing of zero precisions.
    double score() const;
};

BleuStats bleu_segment_stats(std::string_view hyp, std::string_view ref);

/// SacreBLEU-compatible corpus BLEU: 13a tokens, case-sensitive, exp smoothing.
double corpus_bleu(const std::vector<std::string>& preds, const std::vector<std::string>& refs);

struct MetricValues {
    std::size_t n_queries = 0;
    std::map<std::size_t, double> recall_at;
    std::optional<double> f1;
    std::optional<double> em;
    std::optional<double> bleu;
};

struct EvalReport : MetricValues {
    std::map<std::string, MetricValues> per_domain;
    std::size_t excluded_queries = 0;
    nlohmann::json config = nlohmann::json::object();
};

EvalReport evaluate_retrieval(const RetrievalRun& run, const std::vector<DialQuery>& queries,
                              const PassageCatalog& catalog, const std::vector<std::size_t>& ks,
                              RecallLevel level = RecallLevel::Passage);

enum class GenerationTask { Grounding, Response };

/// `predictions` maps query_id to generated text. Every query must have a
/// prediction and every prediction a query (EvalError otherwise).
EvalReport evaluate_generation(const std::map<std::string, std::string>& predictions,
                               const std::vector<DialQuery>& queries, GenerationTask task);

/// JSON Lines {"query_id": ..., "text": ...}.
std::map<std::string, std::string> load_predictions(const std::filesystem::path& path);

nlohmann::json to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);

/// Plain-text table, one row per labelled report, values in percent with
/// one decimal: F1 EM BL (when present) then @k columns.
std::string format_report_table(const std::vector<std::pair<std::string, EvalReport>>& rows);

}  // namespace gdr
