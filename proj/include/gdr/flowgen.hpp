#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gdr/corpus.hpp"
#include "gdr/dialogue.hpp"

namespace gdr::flowgen {

/// Deterministic draws on top of mt19937_64. The standard distributions
/// are implementation-defined, so these are spelled out to keep seeded
/// output identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    /// Uniform in [0, n); n >= 1.
    std::uint64_t below(std::uint64_t n);
    /// Uniform in [0, 1) with 53 random bits.
    double unit();
    bool bernoulli(double p) { return unit() < p; }
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

private:
    std::mt19937_64 engine_;
};

/// Half-open turn indices into the source dialogue.
struct TurnRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
    friend bool operator==(const TurnRange&, const TurnRange&) = default;
    friend auto operator<=>(const TurnRange&, const TurnRange&) = default;
};

struct DialogueSegment {
    std::string source_dial_id;
    TurnRange turn_range;
    std::string grounding_doc_id;
    std::string domain;

    friend bool operator==(const DialogueSegment&, const DialogueSegment&) = default;
};

enum class Relation { UrlSibling, Hyperlink };
const char* to_string(Relation r);

struct TransitionGraph {
    /// Symmetric adjacency used for traversal.
    std::map<std::string, std::set<std::string>> related;
    /// Directed edge kinds as observed (url_sibling edges appear both ways).
    std::map<std::pair<std::string, std::string>, std::set<Relation>> kinds;
    std::size_t malformed_urls = 0;
    std::size_t unknown_link_targets = 0;

    bool are_related(const std::string& a, const std::string& b) const;
};

struct FlowgenConfig {
    std::uint64_t seed = 0;
    std::size_t min_turns = 6;
    std::size_t max_turns = 20;
    std::set<std::size_t> target_segments{2, 3, 4};
    double related_preference = 0.5;
    std::string responding_act = "respond_solution";
    std::string followup_act = "query_condition";
    /// Path components removed from a URL to get its parent.
    std::size_t url_parent_depth = 1;

    /// Throws std::invalid_argument on inconsistent settings.
    void validate() const;
};

struct FlowTurn {
    std::string source_dial_id;
    std::size_t source_index = 0;
    int turn_id = 0;
    Role role = Role::User;
    std::string da;
    std::string utterance;
    std::string grounding_doc_id;
    /// Placeholder instruction for turns that must be re-collected.
    std::string rewrite;
};

struct ComposedFlow {
    std::string flow_id;
    std::vector<DialogueSegment> segments;
    std::vector<FlowTurn> turns;
    std::set<std::size_t> rewrite_flags;  // indices into turns
    std::uint64_t seed = 0;
};

/// Indices i where turn i is an agent turn with `responding_act` and turn
/// i+1 exists with a dialogue act other than `followup_act`. Splitting at i
/// yields [.., i] and [i+1, ..].
std::vector<std::size_t> find_split_points(const Dialogue& d, const std::string& responding_act,
                                           const std::string& followup_act);

/// Picks s uniformly from {1,2,3} capped at |splits| (0 when there are no
/// splits), then a uniform s-subset of `splits`, and cuts s+1 segments.
/// Grounding document is the first referenced document in each segment.
std::vector<DialogueSegment> segment_dialogue(const Dialogue& d, const std::vector<std::size_t>& splits, Rng& rng);

/// True when every reference inside the segment points at one document.
bool single_document(const Dialogue& d, const TurnRange& r, std::string* doc_id = nullptr);

/// "scheme://host/a/b/c" -> "scheme://host/a/b" for depth 1. Empty when the
/// URL has no scheme/host or too few path components.
std::string url_parent(const std::string& url, std::size_t depth = 1);

TransitionGraph build_transition_graph(const std::vector<SourceDocument>& docs, std::size_t url_parent_depth = 1);

struct ComposeInput {
    const std::vector<Dialogue>* dialogues = nullptr;
    /// doc_id -> title, used in rewrite placeholders; falls back to doc_id.
    const std::map<std::string, std::string>* doc_titles = nullptr;
};

/// Greedy seeded recomposition of segments into multi-document flows.
/// Segments are pooled per domain; each is used at most once; adjacent
/// segments differ in grounding document; flows shorter than min_turns are
/// dropped and longer ones truncated to max_turns.
std::vector<ComposedFlow> compose_flows(const std::vector<DialogueSegment>& segments, const TransitionGraph& graph,
                                        const FlowgenConfig& config, Rng& rng, const ComposeInput& input);

struct FlowgenResult {
    std::vector<ComposedFlow> flows;
    std::vector<DialogueSegment> segments;
    std::size_t skipped_segments = 0;  // ungrounded or multi-document
};

/// Full pipeline for one seed: split points, segmentation, composition.
FlowgenResult run_flowgen(const std::vector<Dialogue>& dialogues, const std::vector<SourceDocument>& docs,
                          const FlowgenConfig& config);

/// Rule audit of composed flows against their source dialogues.
struct ValidationReport {
    std::size_t flows = 0;
    std::size_t duplicate_segments = 0;
    std::size_t adjacent_same_document = 0;
    std::size_t turn_bound_violations = 0;
    std::size_t split_point_violations = 0;
    std::size_t rewrite_flag_violations = 0;

    std::size_t violations() const {
        return duplicate_segments + adjacent_same_document + turn_bound_violations + split_point_violations +
               rewrite_flag_violations;
    }
};

ValidationReport validate_flows(const std::vector<ComposedFlow>& flows, const std::vector<Dialogue>& dialogues,
                                const FlowgenConfig& config);

nlohmann::json to_json(const DialogueSegment& s);
nlohmann::json to_json(const ComposedFlow& f);
nlohmann::json to_json(const ValidationReport& r);

}  // namespace gdr::flowgen
