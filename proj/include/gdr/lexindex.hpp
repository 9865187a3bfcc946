#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gdr/corpus.hpp"
#include "gdr/hit.hpp"

namespace gdr {

struct Bm25Params {
    double k1 = 0.9;
    double b = 0.4;

    /// Throws BuildError unless k1 >= 0 and 0 <= b <= 1.
    void validate() const;
};

struct Posting {
    std::uint32_t ordinal;
    std::uint32_t tf;
    friend bool operator==(const Posting&, const Posting&) = default;
};

/// Okapi BM25 over index tokens of each passage's rendered text. Immutable
/// once built; concurrent searches are safe.
class Bm25Index {
public:
    static Bm25Index build(const std::vector<Passage>& passages, Bm25Params params = {});

    /// Top-k passages by BM25, score descending then passage_id ascending.
    /// Passages matching no query term are never returned.
    std::vector<ScoredHit> search(std::string_view query_text, std::size_t k) const;

    /// Scores for already tokenized, deduplicated query terms.
    std::vector<ScoredHit> search_terms(const std::vector<std::string>& unique_terms, std::size_t k) const;

    double idf(std::string_view term) const;

    const Bm25Params& params() const { return params_; }
    std::size_t n_docs() const { return doc_lengths_.size(); }
    double avgdl() const { return avgdl_; }
    const std::vector<std::uint32_t>& doc_lengths() const { return doc_lengths_; }
    const std::vector<std::string>& ids() const { return ids_; }
    std::size_t vocabulary_size() const { return terms_.size(); }
    /// Empty for unknown terms.
    const std::vector<Posting>& postings(std::string_view term) const;

    /// Binary "BMIX" file, little-endian.
    void save(const std::filesystem::path& path) const;
    static Bm25Index load(const std::filesystem::path& path);

    friend bool operator==(const Bm25Index& a, const Bm25Index& b);

private:
    void finalize();

    Bm25Params params_;
    std::vector<std::string> ids_;
    std::vector<std::uint32_t> doc_lengths_;
    double avgdl_ = 0.0;
    std::vector<std::string> terms_;
    std::vector<std::vector<Posting>> postings_;
    std::unordered_map<std::string, std::uint32_t> term_ids_;
    std::vector<std::uint32_t> id_order_;  // ordinal -> position in sorted id order
};

}  // namespace gdr
