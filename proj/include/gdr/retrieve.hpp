#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gdr/denseindex.hpp"
#include "gdr/dialogue.hpp"
#include "gdr/hit.hpp"
#include "gdr/lexindex.hpp"

namespace gdr {

enum class RerankMode { None, CurrentTurn };

/// How the full-query and current-turn lists are combined.
enum class MergePolicy {
    RoundRobin,       // full[0], current[0], full[1], ... skipping seen ids
    ConcatDedupe,     // all of full, then current, skipping seen ids
    ScoreNormalized,  // min-max normalize each list, merge by normalized score
};

struct RunConfig {
    std::string retriever = "bm25";  // "bm25" | "dense"
    std::string segmentation = "struct";
    RerankMode rerank = RerankMode::None;
    MergePolicy merge = MergePolicy::RoundRobin;
    std::size_t k = 10;
    /// Hits fetched from each list before merging; 0 means k.
    std::size_t per_list_depth = 0;
    std::size_t max_query_tokens = kDefaultQueryTokens;
    /// Free-form provenance (input hashes, bm25 params, ...).
    nlohmann::json extra = nlohmann::json::object();

    std::size_t depth() const { return per_list_depth ? per_list_depth : k; }
};

struct RetrievalRun {
    RunConfig config;
    std::map<std::string, std::vector<ScoredHit>> results;  // query_id -> ranked hits
};

using QueryRenderer = std::function<std::string(const DialQuery&)>;

/// Merges two rank-sorted lists into at most k unique passages and renumbers
/// ranks from 1. Hits keep their own score and source.
std::vector<ScoredHit> rerank_union(const std::vector<ScoredHit>& full, const std::vector<ScoredHit>& current,
                                    std::size_t k, MergePolicy policy = MergePolicy::RoundRobin);

/// Lexical retrieval. The full query defaults to render_query with the
/// configured token budget; the current-turn query (rerank mode) to
/// render_current_turn.
RetrievalRun retrieve_all(const Bm25Index& index, const std::vector<DialQuery>& queries, const RunConfig& config,
                          QueryRenderer full_renderer = {}, QueryRenderer current_renderer = {});

/// Dense retrieval with externally encoded queries keyed by query_id.
/// `current_vectors` is required when config.rerank is CurrentTurn. Throws
/// IngestError listing query ids absent from an embedding set.
RetrievalRun retrieve_all(const DenseIndex& index, const std::vector<DialQuery>& queries,
                          const EmbeddingSet& query_vectors, const EmbeddingSet* current_vectors,
                          const RunConfig& config);

nlohmann::json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);

/// First line: JSON header with the config. Then one line per hit:
/// "query_id passage_id rank score source". Ids are percent-escaped so they
/// contain no whitespace.
std::string format_run(const RetrievalRun& run);
RetrievalRun parse_run(std::string_view content, const std::string& origin = "run");
void save_run(const std::filesystem::path& path, const RetrievalRun& run);
RetrievalRun load_run(const std::filesystem::path& path);

std::string escape_id(std::string_view id);
std::string unescape_id(std::string_view id);

const char* to_string(RerankMode m);
const char* to_string(MergePolicy m);
RerankMode parse_rerank_mode(const std::string& s);
MergePolicy parse_merge_policy(const std::string& s);

}  // namespace gdr
