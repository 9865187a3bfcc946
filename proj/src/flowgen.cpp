#include "gdr/flowgen.hpp"

#include <algorithm>
#include <stdexcept>

namespace gdr::flowgen {
namespace {

using json = nlohmann::json;

std::string first_reference(const Dialogue& d, const TurnRange& r) {
    for (std::size_t i = r.begin; i < r.end; ++i) {
        if (!d.turns[i].references.empty()) return d.turns[i].references.front().doc_id;
    }
    return {};
}

const Dialogue* find_dialogue(const std::map<std::string, const Dialogue*>& by_id, const std::string& id) {
    auto it = by_id.find(id);
    return it == by_id.end() ? nullptr : it->second;
}

}  // namespace

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below(0)");
    const std::uint64_t threshold = (0 - n) % n;
    while (true) {
        const std::uint64_t x = engine_();
        if (x >= threshold) return x % n;
    }
}

double Rng::unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

const char* to_string(Relation r) { return r == Relation::UrlSibling ? "url_sibling" : "hyperlink"; }

bool TransitionGraph::are_related(const std::string& a, const std::string& b) const {
    auto it = related.find(a);
    return it != related.end() && it->second.count(b) > 0;
}

void FlowgenConfig::validate() const {
    if (min_turns > max_turns) throw std::invalid_argument("min_turns must not exceed max_turns");
    if (max_turns == 0) throw std::invalid_argument("max_turns must be positive");
    if (target_segments.empty()) throw std::invalid_argument("target_segments is empty");
    for (auto t : target_segments) {
        if (t < 2 || t > 4) throw std::invalid_argument("target_segments must be within {2,3,4}");
    }
    if (!(related_preference >= 0.0 && related_preference <= 1.0))
        throw std::invalid_argument("related_preference must be in [0, 1]");
}

std::vector<std::size_t> find_split_points(const Dialogue& d, const std::string& responding_act,
                                           const std::string& followup_act) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i + 1 < d.turns.size(); ++i) {
        const auto& t = d.turns[i];
        if (t.role == Role::Agent && t.da == responding_act && d.turns[i + 1].da != followup_act)
            out.push_back(i);
    }
    return out;
}

bool single_document(const Dialogue& d, const TurnRange& r, std::string* doc_id) {
    std::string doc;
    for (std::size_t i = r.begin; i < r.end; ++i) {
        for (const auto& ref : d.turns[i].references) {
            if (doc.empty())
                doc = ref.doc_id;
            else if (ref.doc_id != doc)
                return false;
        }
    }
    if (doc_id) *doc_id = doc;
    return !doc.empty();
}

std::vector<DialogueSegment> segment_dialogue(const Dialogue& d, const std::vector<std::size_t>& splits, Rng& rng) {
    std::size_t s = 0;
    if (!splits.empty()) s = 1 + rng.below(std::min<std::size_t>(3, splits.size()));
    std::vector<std::size_t> pool = splits;
    for (std::size_t i = 0; i < s; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
    std::vector<std::size_t> chosen(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(s));
    std::sort(chosen.begin(), chosen.end());

    std::vector<DialogueSegment> out;
    std::size_t start = 0;
    auto emit = [&](std::size_t end) {
        TurnRange r{start, end};
        out.push_back({d.dial_id, r, first_reference(d, r), d.domain});
        start = end;
    };
    for (auto i : chosen) emit(i + 1);
    emit(d.turns.size());
    return out;
}

std::string url_parent(const std::string& url, std::size_t depth) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos || scheme == 0) return {};
    const auto host_begin = scheme + 3;
    auto path_begin = url.find('/', host_begin);
    if (path_begin == host_begin) return {};
    if (path_begin == std::string::npos) return {};
    std::string path = url.substr(path_begin);
    if (auto q = path.find_first_of("?#"); q != std::string::npos) path.resize(q);
    while (path.size() > 1 && path.back() == '/') path.pop_back();
    std::vector<std::string> parts;
    std::size_t pos = 1;
    while (pos <= path.size()) {
        auto next = path.find('/', pos);
        if (next == std::string::npos) next = path.size();
        if (next > pos) parts.push_back(path.substr(pos, next - pos));
        pos = next + 1;
    }
    if (parts.size() <= depth) return {};
    std::string out = url.substr(0, path_begin);
    for (std::size_t i = 0; i + depth < parts.size(); ++i) out += "/" + parts[i];
    return out;
}

TransitionGraph build_transition_graph(const std::vector<SourceDocument>& docs, std::size_t url_parent_depth) {
    TransitionGraph g;
    std::map<std::string, std::vector<std::string>> by_parent;
    std::set<std::string> known;
    for (const auto& d : docs) known.insert(d.doc_id);
    for (const auto& d : docs) {
        if (!d.url || d.url->empty()) continue;
        const bool well_formed = d.url->find("://") != std::string::npos;
        const auto parent = well_formed ? url_parent(*d.url, url_parent_depth) : std::string{};
        if (!well_formed) ++g.malformed_urls;
        if (!parent.empty()) by_parent[parent].push_back(d.doc_id);
    }
    auto add = [&](const std::string& a, const std::string& b, Relation kind) {
        if (a == b) return;
        g.related[a].insert(b);
        g.related[b].insert(a);
        g.kinds[{a, b}].insert(kind);
    };
    for (const auto& [_, members] : by_parent) {
        for (const auto& a : members) {
            for (const auto& b : members) add(a, b, Relation::UrlSibling);
        }
    }
    for (const auto& d : docs) {
        for (const auto& target : d.hyperlinks) {
            if (!known.count(target)) {
                ++g.unknown_link_targets;
                continue;
            }
            add(d.doc_id, target, Relation::Hyperlink);
        }
    }
    return g;
}

std::vector<ComposedFlow> compose_flows(const std::vector<DialogueSegment>& segments, const TransitionGraph& graph,
                                        const FlowgenConfig& config, Rng& rng, const ComposeInput& input) {
    config.validate();
    if (!input.dialogues) throw std::invalid_argument("compose_flows needs the source dialogues");
    std::map<std::string, const Dialogue*> by_id;
    for (const auto& d : *input.dialogues) by_id.emplace(d.dial_id, &d);

    std::map<std::string, std::vector<std::size_t>> pools;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& s = segments[i];
        const Dialogue* d = find_dialogue(by_id, s.source_dial_id);
        if (!d || s.grounding_doc_id.empty() || s.turn_range.size() == 0 || s.turn_range.end > d->turns.size())
            continue;
        std::string doc;
        if (!single_document(*d, s.turn_range, &doc) || doc != s.grounding_doc_id) continue;
        pools[s.domain].push_back(i);
    }
    const std::vector<std::size_t> targets(config.target_segments.begin(), config.target_segments.end());

    std::vector<ComposedFlow> flows;
    std::vector<char> used(segments.size(), 0);
    for (auto& [domain, pool] : pools) {
        rng.shuffle(pool);
        for (const auto start : pool) {
            if (used[start]) continue;
            std::vector<std::size_t> chain{start};
            used[start] = 1;
            std::size_t turns = segments[start].turn_range.size();
            const std::size_t target = targets[rng.below(targets.size())];
            while (chain.size() < target && turns < config.max_turns) {
                const auto& last_doc = segments[chain.back()].grounding_doc_id;
                std::vector<std::size_t> related, other;
                for (const auto c : pool) {
                    const auto& seg = segments[c];
                    if (used[c] || seg.grounding_doc_id == last_doc) continue;
                    if (turns + seg.turn_range.size() > config.max_turns) continue;
                    (graph.are_related(last_doc, seg.grounding_doc_id) ? related : other).push_back(c);
                }
                if (related.empty() && other.empty()) break;
                const bool want_related = rng.bernoulli(config.related_preference);
                const auto& from = (want_related && !related.empty()) || other.empty() ? related : other;
                const auto pick = from[rng.below(from.size())];
                used[pick] = 1;
                chain.push_back(pick);
                turns += segments[pick].turn_range.size();
            }
            if (turns < config.min_turns) {
                // Later segments go back to the pool; the start stays consumed.
                for (std::size_t i = 1; i < chain.size(); ++i) used[chain[i]] = 0;
                continue;
            }

            ComposedFlow f;
            f.flow_id = "flow-" + std::to_string(config.seed) + "-" + std::to_string(flows.size());
            f.seed = config.seed;
            for (const auto c : chain) {
                auto seg = segments[c];
                const Dialogue& d = *by_id.at(seg.source_dial_id);
                const std::size_t room = config.max_turns - f.turns.size();
                if (seg.turn_range.size() > room) seg.turn_range.end = seg.turn_range.begin + room;
                const bool flag_first = !f.segments.empty() || seg.turn_range.begin != 0;
                std::string title = seg.grounding_doc_id;
                if (input.doc_titles) {
                    if (auto t = input.doc_titles->find(title); t != input.doc_titles->end() && !t->second.empty())
                        title = t->second;
                }
                for (std::size_t i = seg.turn_range.begin; i < seg.turn_range.end; ++i) {
                    const auto& t = d.turns[i];
                    FlowTurn ft{d.dial_id, i, t.turn_id, t.role, t.da, t.utterance, seg.grounding_doc_id, {}};
                    if (i == seg.turn_range.begin && flag_first) {
                        f.rewrite_flags.insert(f.turns.size());
                        ft.rewrite = "<REWRITE: add background from " + title + ">";
                    }
                    f.turns.push_back(std::move(ft));
                }
                f.segments.push_back(std::move(seg));
            }
            flows.push_back(std::move(f));
        }
    }
    return flows;
}

FlowgenResult run_flowgen(const std::vector<Dialogue>& dialogues, const std::vector<SourceDocument>& docs,
                          const FlowgenConfig& config) {
    config.validate();
    Rng rng(config.seed);
    FlowgenResult out;
    for (const auto& d : dialogues) {
        const auto splits = find_split_points(d, config.responding_act, config.followup_act);
        for (auto& s : segment_dialogue(d, splits, rng)) {
            if (s.grounding_doc_id.empty() || !single_document(d, s.turn_range)) {
                ++out.skipped_segments;
                continue;
            }
            out.segments.push_back(std::move(s));
        }
    }
    const auto graph = build_transition_graph(docs, config.url_parent_depth);
    std::map<std::string, std::string> titles;
    for (const auto& d : docs) titles.emplace(d.doc_id, d.title);
    out.flows = compose_flows(out.segments, graph, config, rng, {&dialogues, &titles});
    return out;
}

ValidationReport validate_flows(const std::vector<ComposedFlow>& flows, const std::vector<Dialogue>& dialogues,
                                const FlowgenConfig& config) {
    std::map<std::string, const Dialogue*> by_id;
    for (const auto& d : dialogues) by_id.emplace(d.dial_id, &d);
    ValidationReport r;
    r.flows = flows.size();
    std::map<std::string, std::vector<TurnRange>> claimed;
    for (const auto& f : flows) {
        if (f.turns.size() < config.min_turns || f.turns.size() > config.max_turns) ++r.turn_bound_violations;
        std::size_t offset = 0;
        for (std::size_t k = 0; k < f.segments.size(); ++k) {
            const auto& s = f.segments[k];
            auto& ranges = claimed[s.source_dial_id];
            for (const auto& other : ranges) {
                if (other.begin < s.turn_range.end && s.turn_range.begin < other.end) ++r.duplicate_segments;
            }
            ranges.push_back(s.turn_range);
            if (k > 0 && f.segments[k - 1].grounding_doc_id == s.grounding_doc_id) ++r.adjacent_same_document;
            const Dialogue* d = find_dialogue(by_id, s.source_dial_id);
            if (!d || s.turn_range.end > d->turns.size()) {
                ++r.split_point_violations;
                continue;
            }
            const auto splits = find_split_points(*d, config.responding_act, config.followup_act);
            auto is_split = [&](std::size_t i) { return std::binary_search(splits.begin(), splits.end(), i); };
            if (s.turn_range.begin > 0 && !is_split(s.turn_range.begin - 1)) ++r.split_point_violations;
            const bool truncated_tail = k + 1 == f.segments.size() && f.turns.size() == config.max_turns;
            if (s.turn_range.end < d->turns.size() && !truncated_tail && !is_split(s.turn_range.end - 1))
                ++r.split_point_violations;
            const bool needs_flag = k > 0 || s.turn_range.begin != 0;
            if (needs_flag && !f.rewrite_flags.count(offset)) ++r.rewrite_flag_violations;
            offset += s.turn_range.size();
        }
    }
    return r;
}

json to_json(const DialogueSegment& s) {
    return {{"source_dial_id", s.source_dial_id},
            {"turn_range", {s.turn_range.begin, s.turn_range.end}},
            {"grounding_doc_id", s.grounding_doc_id},
            {"domain", s.domain}};
}

json to_json(const ComposedFlow& f) {
    json segs = json::array();
    for (const auto& s : f.segments) segs.push_back(to_json(s));
    json turns = json::array();
    for (const auto& t : f.turns) {
        json jt = {{"source_dial_id", t.source_dial_id},
                   {"source_index", t.source_index},
                   {"turn_id", t.turn_id},
                   {"role", gdr::to_string(t.role)},
                   {"da", t.da},
                   {"utterance", t.utterance},
                   {"grounding_doc_id", t.grounding_doc_id}};
        if (!t.rewrite.empty()) jt["rewrite"] = t.rewrite;
        turns.push_back(std::move(jt));
    }
    return {{"flow_id", f.flow_id},
            {"seed", f.seed},
            {"segments", segs},
            {"turns", turns},
            {"rewrite_flags", std::vector<std::size_t>(f.rewrite_flags.begin(), f.rewrite_flags.end())}};
}

json to_json(const ValidationReport& r) {
    return {{"flows", r.flows},
            {"duplicate_segments", r.duplicate_segments},
            {"adjacent_same_document", r.adjacent_same_document},
            {"turn_bound_violations", r.turn_bound_violations},
            {"split_point_violations", r.split_point_violations},
            {"rewrite_flag_violations", r.rewrite_flag_violations},
            {"violations", r.violations()},
            {"passed", r.violations() == 0}};
}

}  // namespace gdr::flowgen
