#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gdr/hit.hpp"

namespace gdr {

/// Vectors keyed by id, all of length `dim`, stored row-major in float32.
class EmbeddingSet {
public:
    EmbeddingSet() = default;
    explicit EmbeddingSet(std::size_t dim) : dim_(dim) {}

    /// Throws DimensionError on length mismatch and IngestError on a repeated id.
    void add(std::string id, std::span<const float> vec);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }
    std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
    const std::vector<float>& data() const { return data_; }
    bool contains(const std::string& id) const { return index_.count(id) > 0; }
    /// Throws std::out_of_range for unknown ids.
    std::span<const float> at(const std::string& id) const { return row(index_.at(id)); }

    /// JSON Lines: {"id": "...", "vec": [...]} per line.
    static EmbeddingSet load_jsonl(const std::filesystem::path& path);
    /// "EMB1" binary cache: u32 dim, u64 count, id table, row-major float32 LE.
    static EmbeddingSet load_binary(const std::filesystem::path& path);
    /// Dispatches on the magic bytes.
    static EmbeddingSet load(const std::filesystem::path& path);
    void save_binary(const std::filesystem::path& path) const;
    void save_jsonl(const std::filesystem::path& path) const;

private:
    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<float> data_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Exhaustive maximum-inner-product search. Each score is accumulated in
/// double precision, component by component from left to right, so results
/// are bit-reproducible.
class DenseIndex {
public:
    explicit DenseIndex(EmbeddingSet passages);

    /// Exactly min(k, size()) hits, score descending then id ascending.
    std::vector<ScoredHit> search(std::span<const float> query, std::size_t k) const;

    std::size_t dim() const { return set_.dim(); }
    std::size_t size() const { return set_.size(); }
    const EmbeddingSet& embeddings() const { return set_; }

private:
    EmbeddingSet set_;
    std::vector<std::uint32_t> id_order_;
};

double inner_product(std::span<const float> a, std::span<const float> b);

}  // namespace gdr
