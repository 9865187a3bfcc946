#pragma once

#include <cstddef>
#include <string>

namespace gdr {

enum class HitSource { FullQuery, CurrentTurn };

inline const char* to_string(HitSource s) {
    return s == HitSource::FullQuery ? "full_query" : "current_turn";
}

/// One ranked search result. Ranks within a list run 1..n without gaps.
struct ScoredHit {
    std::string passage_id;
    double score = 0.0;
    std::size_t rank = 1;
    HitSource source = HitSource::FullQuery;

    friend bool operator==(const ScoredHit&, const ScoredHit&) = default;
};

}  // namespace gdr
