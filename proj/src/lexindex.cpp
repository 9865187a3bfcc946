#include "gdr/lexindex.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "gdr/error.hpp"
#include "gdr/io.hpp"
#include "gdr/text.hpp"

namespace gdr {
namespace {

constexpr char kMagic[4] = {'B', 'M', 'I', 'X'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void f64(double d) {
        std::uint64_t v;
        std::memcpy(&v, &d, sizeof v);
        u64(v);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    const std::string& data() const { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}
    void need(std::size_t n) {
        if (pos_ + n > data_.size()) throw IngestError(path_ + ": truncated index file");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
        return v;
    }
    double f64() {
        const auto v = u64();
        double d;
        std::memcpy(&d, &v, sizeof d);
        return d;
    }
    std::string str() {
        const auto n = u32();
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::string_view raw(std::size_t n) {
        need(n);
        std::string_view v(data_.data() + pos_, n);
        pos_ += n;
        return v;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    std::string data_;
    std::string path_;
    std::size_t pos_ = 0;
};

const std::vector<Posting> kNoPostings;

}  // namespace

void Bm25Params::validate() const {
    if (!(k1 >= 0.0)) throw BuildError("bm25 k1 must be >= 0");
    if (!(b >= 0.0 && b <= 1.0)) throw BuildError("bm25 b must be in [0, 1]");
}

Bm25Index Bm25Index::build(const std::vector<Passage>& passages, Bm25Params params) {
    params.validate();
    if (passages.empty()) throw BuildError("cannot build a BM25 index over zero passages");
    Bm25Index idx;
    idx.params_ = params;
    idx.ids_.reserve(passages.size());
    idx.doc_lengths_.reserve(passages.size());
    std::unordered_map<std::string, std::uint32_t> tf;
    for (std::uint32_t ord = 0; ord < passages.size(); ++ord) {
        const auto& p = passages[ord];
        idx.ids_.push_back(p.passage_id);
        const auto toks = text::index_tokenize(p.rendered_text);
        idx.doc_lengths_.push_back(static_cast<std::uint32_t>(toks.size()));
        tf.clear();
        // Record terms in first-occurrence order so the vocabulary layout
        // is deterministic.
        std::vector<const std::string*> order;
        for (const auto& t : toks) {
            auto [it, fresh] = tf.try_emplace(t, 0);
            if (fresh) order.push_back(&it->first);
            ++it->second;
        }
        for (const auto* t : order) {
            auto [it, fresh] = idx.term_ids_.try_emplace(*t, static_cast<std::uint32_t>(idx.terms_.size()));
            if (fresh) {
                idx.terms_.push_back(*t);
                idx.postings_.emplace_back();
            }
            idx.postings_[it->second].push_back({ord, tf[*t]});
        }
    }
    idx.finalize();
    return idx;
}

void Bm25Index::finalize() {
    const double total = std::accumulate(doc_lengths_.begin(), doc_lengths_.end(), 0.0);
    avgdl_ = total / static_cast<double>(doc_lengths_.size());
    std::vector<std::uint32_t> by_id(ids_.size());
    std::iota(by_id.begin(), by_id.end(), 0u);
    std::sort(by_id.begin(), by_id.end(), [&](auto x, auto y) { return ids_[x] < ids_[y]; });
    id_order_.assign(ids_.size(), 0);
    for (std::uint32_t pos = 0; pos < by_id.size(); ++pos) id_order_[by_id[pos]] = pos;
    if (term_ids_.empty()) {
        for (std::uint32_t t = 0; t < terms_.size(); ++t) term_ids_.emplace(terms_[t], t);
    }
}

const std::vector<Posting>& Bm25Index::postings(std::string_view term) const {
    auto it = term_ids_.find(std::string(term));
    return it == term_ids_.end() ? kNoPostings : postings_[it->second];
}

double Bm25Index::idf(std::string_view term) const {
    const double df = static_cast<double>(postings(term).size());
    const double n = static_cast<double>(n_docs());
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::vector<ScoredHit> Bm25Index::search(std::string_view query_text, std::size_t k) const {
    std::vector<std::string> unique;
    std::unordered_set<std::string> seen;
    for (auto& t : text::index_tokenize(query_text)) {
        if (seen.insert(t).second) unique.push_back(std::move(t));
    }
    return search_terms(unique, k);
}

std::vector<ScoredHit> Bm25Index::search_terms(const std::vector<std::string>& unique_terms,
                                               std::size_t k) const {
    if (k == 0) throw std::invalid_argument("k must be >= 1");
    std::vector<double> acc(n_docs(), 0.0);
    std::vector<std::uint32_t> touched;
    const double k1 = params_.k1;
    const double b = params_.b;
    for (const auto& term : unique_terms) {
        const auto& plist = postings(term);
        if (plist.empty()) continue;
        const double w = idf(term);
        for (const auto& p : plist) {
            const double tf = p.tf;
            const double norm = k1 * (1.0 - b + b * doc_lengths_[p.ordinal] / avgdl_);
            if (acc[p.ordinal] == 0.0) touched.push_back(p.ordinal);
            acc[p.ordinal] += w * tf * (k1 + 1.0) / (tf + norm);
        }
    }
    auto better = [&](std::uint32_t x, std::uint32_t y) {
        if (acc[x] != acc[y]) return acc[x] > acc[y];
        return id_order_[x] < id_order_[y];
    };
    const std::size_t n = std::min(k, touched.size());
    std::partial_sort(touched.begin(), touched.begin() + static_cast<std::ptrdiff_t>(n), touched.end(),
                      better);
    std::vector<ScoredHit> hits;
    hits.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        hits.push_back({ids_[touched[i]], acc[touched[i]], i + 1, HitSource::FullQuery});
    return hits;
}

void Bm25Index::save(const std::filesystem::path& path) const {
    Writer w;
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.f64(params_.k1);
    w.f64(params_.b);
    w.u64(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        w.str(ids_[i]);
        w.u32(doc_lengths_[i]);
    }
    w.u64(terms_.size());
    for (std::size_t t = 0; t < terms_.size(); ++t) {
        w.str(terms_[t]);
        w.u32(static_cast<std::uint32_t>(postings_[t].size()));
        for (const auto& p : postings_[t]) {
            w.u32(p.ordinal);
            w.u32(p.tf);
        }
    }
    io::write_file_atomic(path, w.data());
}

Bm25Index Bm25Index::load(const std::filesystem::path& path) {
    Reader r(io::read_file(path), path.string());
    if (r.raw(4) != std::string_view(kMagic, 4)) throw IngestError(path.string() + ": not a BMIX file");
    if (const auto v = r.u32(); v != kVersion)
        throw IngestError(path.string() + ": unsupported BMIX version " + std::to_string(v));
    Bm25Index idx;
    idx.params_.k1 = r.f64();
    idx.params_.b = r.f64();
    const auto n = r.u64();
    if (n == 0) throw IngestError(path.string() + ": index holds zero passages");
    for (std::uint64_t i = 0; i < n; ++i) {
        idx.ids_.push_back(r.str());
        idx.doc_lengths_.push_back(r.u32());
    }
    const auto n_terms = r.u64();
    for (std::uint64_t t = 0; t < n_terms; ++t) {
        idx.terms_.push_back(r.str());
        const auto np = r.u32();
        std::vector<Posting> plist;
        plist.reserve(np);
        for (std::uint32_t i = 0; i < np; ++i) {
            const auto ord = r.u32();
            const auto tf = r.u32();
            if (ord >= n || (!plist.empty() && plist.back().ordinal >= ord))
                throw IngestError(path.string() + ": corrupt postings for '" + idx.terms_.back() + "'");
            plist.push_back({ord, tf});
        }
        idx.postings_.push_back(std::move(plist));
    }
    if (!r.done()) throw IngestError(path.string() + ": trailing bytes after postings");
    idx.finalize();
    return idx;
}

bool operator==(const Bm25Index& a, const Bm25Index& b) {
    return a.params_.k1 == b.params_.k1 && a.params_.b == b.params_.b && a.ids_ == b.ids_ &&
           a.doc_lengths_ == b.doc_lengths_ && a.terms_ == b.terms_ && a.postings_ == b.postings_;
}

}  // namespace gdr
