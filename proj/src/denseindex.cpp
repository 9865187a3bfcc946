#include "gdr/denseindex.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "gdr/error.hpp"
#include "gdr/io.hpp"

namespace gdr {
namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', '1'};

void put_le(std::string& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(const std::string& in, std::size_t& pos, int bytes, const std::string& path) {
    if (pos + static_cast<std::size_t>(bytes) > in.size()) throw IngestError(path + ": truncated EMB1 file");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= std::uint64_t(static_cast<unsigned char>(in[pos++])) << (8 * i);
    return v;
}

}  // namespace

void EmbeddingSet::add(std::string id, std::span<const float> vec) {
    if (dim_ == 0) {
        if (vec.empty()) throw DimensionError("embedding '" + id + "' is empty");
        dim_ = vec.size();
    }
    if (vec.size() != dim_)
        throw DimensionError("embedding '" + id + "' has " + std::to_string(vec.size()) +
                             " components, expected " + std::to_string(dim_));
    if (!index_.emplace(id, ids_.size()).second) throw IngestError("duplicate embedding id '" + id + "'");
    ids_.push_back(std::move(id));
    data_.insert(data_.end(), vec.begin(), vec.end());
}

EmbeddingSet EmbeddingSet::load_jsonl(const std::filesystem::path& path) {
    EmbeddingSet set;
    std::vector<float> buf;
    io::for_each_jsonl(path, [&](const nlohmann::json& row, std::size_t line) {
        const std::string where = path.string() + ":" + std::to_string(line);
        if (!row.contains("id") || !row["id"].is_string()) throw IngestError(where + ": missing string 'id'");
        if (!row.contains("vec") || !row["vec"].is_array()) throw IngestError(where + ": missing array 'vec'");
        buf.clear();
        for (const auto& x : row["vec"]) {
            if (!x.is_number()) throw IngestError(where + ": non-numeric component");
            buf.push_back(x.get<float>());
        }
        try {
            set.add(row["id"].get<std::string>(), buf);
        } catch (const DimensionError& e) {
            throw DimensionError(where + ": " + e.what());
        } catch (const IngestError& e) {
            throw IngestError(where + ": " + e.what());
        }
    });
    if (set.size() == 0) throw IngestError(path.string() + ": no embeddings");
    return set;
}

EmbeddingSet EmbeddingSet::load_binary(const std::filesystem::path& path) {
    static_assert(std::endian::native == std::endian::little, "EMB1 reader assumes a little-endian host");
    const std::string raw = io::read_file(path);
    const std::string p = path.string();
    if (raw.size() < 4 || std::memcmp(raw.data(), kMagic, 4) != 0) throw IngestError(p + ": not an EMB1 file");
    std::size_t pos = 4;
    const auto dim = get_le(raw, pos, 4, p);
    const auto count = get_le(raw, pos, 8, p);
    if (dim == 0 || count == 0) throw IngestError(p + ": empty EMB1 file");
    std::vector<std::string> ids;
    ids.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto len = get_le(raw, pos, 4, p);
        if (pos + len > raw.size()) throw IngestError(p + ": truncated EMB1 id table");
        ids.emplace_back(raw.substr(pos, len));
        pos += len;
    }
    const std::size_t nbytes = dim * count * sizeof(float);
    if (raw.size() - pos != nbytes) throw IngestError(p + ": EMB1 payload size mismatch");
    std::vector<float> data(dim * count);
    std::memcpy(data.data(), raw.data() + pos, nbytes);
    EmbeddingSet set(dim);
    for (std::uint64_t i = 0; i < count; ++i)
        set.add(std::move(ids[i]), std::span<const float>(data.data() + i * dim, dim));
    return set;
}

EmbeddingSet EmbeddingSet::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    char head[4] = {};
    in.read(head, 4);
    if (in.gcount() == 4 && std::memcmp(head, kMagic, 4) == 0) return load_binary(path);
    return load_jsonl(path);
}

void EmbeddingSet::save_binary(const std::filesystem::path& path) const {
    std::string out(kMagic, 4);
    put_le(out, dim_, 4);
    put_le(out, ids_.size(), 8);
    for (const auto& id : ids_) {
        put_le(out, id.size(), 4);
        out += id;
    }
    out.append(reinterpret_cast<const char*>(data_.data()), data_.size() * sizeof(float));
    io::write_file_atomic(path, out);
}

void EmbeddingSet::save_jsonl(const std::filesystem::path& path) const {
    std::string out;
    for (std::size_t i = 0; i < size(); ++i) {
        auto r = row(i);
        nlohmann::json j = {{"id", ids_[i]}, {"vec", std::vector<float>(r.begin(), r.end())}};
        out += j.dump();
        out += '\n';
    }
    io::write_file_atomic(path, out);
}

double inner_product(std::span<const float> a, std::span<const float> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += static_cast<double>(a[j]) * static_cast<double>(b[j]);
    return s;
}

DenseIndex::DenseIndex(EmbeddingSet passages) : set_(std::move(passages)) {
    if (set_.size() == 0) throw BuildError("cannot build a dense index over zero vectors");
    std::vector<std::uint32_t> by_id(set_.size());
    std::iota(by_id.begin(), by_id.end(), 0u);
    const auto& ids = set_.ids();
    std::sort(by_id.begin(), by_id.end(), [&](auto x, auto y) { return ids[x] < ids[y]; });
    id_order_.assign(set_.size(), 0);
    for (std::uint32_t pos = 0; pos < by_id.size(); ++pos) id_order_[by_id[pos]] = pos;
}

std::vector<ScoredHit> DenseIndex::search(std::span<const float> query, std::size_t k) const {
    if (query.size() != dim())
        throw DimensionError("query has " + std::to_string(query.size()) + " components, index dim is " +
                             std::to_string(dim()));
    if (k == 0) throw std::invalid_argument("k must be >= 1");
    const std::size_t n = size();
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) scores[i] = inner_product(set_.row(i), query);
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    const std::size_t m = std::min(k, n);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                      [&](auto x, auto y) {
                          if (scores[x] != scores[y]) return scores[x] > scores[y];
                          return id_order_[x] < id_order_[y];
                      });
    std::vector<ScoredHit> hits;
    hits.reserve(m);
    for (std::size_t r = 0; r < m; ++r)
        hits.push_back({set_.ids()[order[r]], scores[order[r]], r + 1, HitSource::FullQuery});
    return hits;
}

}  // namespace gdr
