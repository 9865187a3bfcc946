#include <doctest.h>

#include <set>

#include "gdr/flowgen.hpp"
#include "testing.hpp"

using namespace gdr;
using namespace gdr::flowgen;

namespace {

DialTurn t(int id, Role role, std::string da, std::string doc = {}) {
    DialTurn out{id, role, std::move(da), "utt " + std::to_string(id), {}};
    if (!doc.empty()) out.references.push_back({doc, "1", std::nullopt});
    return out;
}

// Alternating user/agent turns; agents respond with a solution, user turns
// are plain queries, each block of two exchanges grounded in one document.
Dialogue long_dialogue(std::string id, std::size_t exchanges, const std::vector<std::string>& docs) {
    Dialogue d{std::move(id), "ssa", {}};
    for (std::size_t i = 0; i < exchanges; ++i) {
        const auto& doc = docs[(i / 2) % docs.size()];
        d.turns.push_back(t(static_cast<int>(2 * i + 1), Role::User, "query_solution", doc));
        d.turns.push_back(t(static_cast<int>(2 * i + 2), Role::Agent, "respond_solution", doc));
    }
    return d;
}

}  // namespace

TEST_CASE("split points") {
    Dialogue none{"d", "ssa", {t(1, Role::User, "query_solution"), t(2, Role::Agent, "respond_condition")}};
    CHECK(find_split_points(none, "respond_solution", "query_condition").empty());

    Dialogue d{"d",
               "ssa",
               {t(1, Role::User, "query_solution"), t(2, Role::Agent, "respond_solution"),
                t(3, Role::User, "query_solution"), t(4, Role::Agent, "respond_solution")}};
    CHECK(find_split_points(d, "respond_solution", "query_condition") == std::vector<std::size_t>{1});

    d.turns[2].da = "query_condition";
    CHECK(find_split_points(d, "respond_solution", "query_condition").empty());
}

TEST_CASE("segment_dialogue without splits and determinism") {
    const auto d = long_dialogue("d", 6, {"x"});
    Rng rng(1);
    const auto one = segment_dialogue(d, {}, rng);
    REQUIRE(one.size() == 1);
    CHECK(one[0].turn_range == TurnRange{0, 12});
    CHECK(one[0].grounding_doc_id == "x");

    const std::vector<std::size_t> splits = {1, 3, 5, 7, 9};
    Rng a(99), b(99);
    CHECK(segment_dialogue(d, splits, a) == segment_dialogue(d, splits, b));
}

TEST_CASE("segment counts over many seeds") {
    const auto d = long_dialogue("d", 8, {"x"});
    const std::vector<std::size_t> splits = {1, 3, 5, 7, 9, 11, 13};
    std::map<std::size_t, int> counts;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        Rng rng(seed);
        const auto segs = segment_dialogue(d, splits, rng);
        ++counts[segs.size()];
        REQUIRE(segs.front().turn_range.begin == 0);
        REQUIRE(segs.back().turn_range.end == d.turns.size());
        for (std::size_t i = 1; i < segs.size(); ++i) {
            REQUIRE(segs[i].turn_range.begin == segs[i - 1].turn_range.end);
            REQUIRE(std::count(splits.begin(), splits.end(), segs[i].turn_range.begin - 1) == 1);
        }
    }
    CHECK(counts.size() == 3);
    for (std::size_t n = 2; n <= 4; ++n) {
        // Each count is uniform with p = 1/3; 10k draws stay well within 5 sigma.
        CHECK(counts[n] > 3333 - 250);
        CHECK(counts[n] < 3333 + 250);
    }
    Rng rng(4);
    CHECK(segment_dialogue(d, {5}, rng).size() == 2);
}

TEST_CASE("rng helpers") {
    Rng rng(123);
    for (int i = 0; i < 1000; ++i) {
        CHECK(rng.below(7) < 7);
        const double u = rng.unit();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    CHECK_THROWS(rng.below(0));
    Rng a(5), b(5);
    std::vector<int> x = {1, 2, 3, 4, 5, 6}, y = x;
    a.shuffle(x);
    b.shuffle(y);
    CHECK(x == y);
}

TEST_CASE("url parents and transition graph") {
    CHECK(url_parent("https://www.ssa.gov/benefits/x") == "https://www.ssa.gov/benefits");
    CHECK(url_parent("https://www.ssa.gov/benefits/x/", 1) == "https://www.ssa.gov/benefits");
    CHECK(url_parent("https://www.ssa.gov/a/b/c?q=1", 2) == "https://www.ssa.gov/a");
    CHECK(url_parent("https://www.ssa.gov/x").empty());
    CHECK(url_parent("not a url").empty());

    SourceDocument a, b, c, d;
    a.doc_id = "Doc-1";
    a.url = "https://www.ssa.gov/benefits/x";
    a.hyperlinks = {"Doc-2", "ghost"};
    b.doc_id = "Doc-2";
    c.doc_id = "Doc-3";
    c.url = "https://www.ssa.gov/benefits/y";
    d.doc_id = "Doc-4";
    d.url = "nonsense";
    const auto g = build_transition_graph({a, b, c, d});
    CHECK(g.are_related("Doc-1", "Doc-2"));
    CHECK(g.are_related("Doc-2", "Doc-1"));
    CHECK(g.kinds.at({"Doc-1", "Doc-2"}) == std::set<Relation>{Relation::Hyperlink});
    CHECK(g.kinds.at({"Doc-1", "Doc-3"}) == std::set<Relation>{Relation::UrlSibling});
    CHECK(g.are_related("Doc-3", "Doc-1"));
    CHECK_FALSE(g.are_related("Doc-2", "Doc-3"));
    CHECK(g.unknown_link_targets == 1);
    CHECK(g.malformed_urls == 1);

    SourceDocument plain;
    plain.doc_id = "z";
    CHECK(build_transition_graph({plain, b}).related.empty());
}

TEST_CASE("compose_flows rules on small pools") {
    // Four 2-turn dialogues on two documents.
    std::vector<Dialogue> dials;
    std::vector<DialogueSegment> segs;
    for (int i = 0; i < 4; ++i) {
        const std::string doc = i % 2 ? "B" : "A";
        dials.push_back(long_dialogue("d" + std::to_string(i), 2, {doc}));
        segs.push_back({dials.back().dial_id, {0, 4}, doc, "ssa"});
    }
    FlowgenConfig cfg;
    cfg.seed = 3;
    const TransitionGraph graph;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        const auto flows = compose_flows(segs, graph, cfg, rng, {&dials, nullptr});
        for (const auto& f : flows) {
            for (std::size_t i = 1; i < f.segments.size(); ++i)
                CHECK(f.segments[i].grounding_doc_id != f.segments[i - 1].grounding_doc_id);
            CHECK(f.turns.size() >= cfg.min_turns);
            CHECK(f.turns.size() <= cfg.max_turns);
            CHECK(f.rewrite_flags.count(4) == 1);
            CHECK(f.turns[4].rewrite.find("<REWRITE: add background from") == 0);
        }
        CHECK(validate_flows(flows, dials, cfg).violations() == 0);
    }

    // Every possible flow would be too short.
    std::vector<Dialogue> tiny;
    std::vector<DialogueSegment> tiny_segs;
    for (int i = 0; i < 2; ++i) {
        tiny.push_back(long_dialogue("t" + std::to_string(i), 1, {i ? "B" : "A"}));
        tiny_segs.push_back({tiny.back().dial_id, {0, 2}, i ? "B" : "A", "ssa"});
    }
    Rng rng(0);
    CHECK(compose_flows(tiny_segs, graph, cfg, rng, {&tiny, nullptr}).empty());
}

TEST_CASE("run_flowgen on the fixture is deterministic and rule-abiding") {
    const auto corpus = load_corpus(testing::data_path("fixture_docs.jsonl"), SchemaAdapter::canonical());
    const auto dials = load_dialogues(testing::data_path("fixture_dials.jsonl"), SchemaAdapter::canonical());
    FlowgenConfig cfg;
    cfg.seed = 17;
    const auto a = run_flowgen(dials, corpus.documents, cfg);
    const auto b = run_flowgen(dials, corpus.documents, cfg);
    CHECK(!a.flows.empty());
    REQUIRE(a.flows.size() == b.flows.size());
    for (std::size_t i = 0; i < a.flows.size(); ++i) CHECK(to_json(a.flows[i]).dump() == to_json(b.flows[i]).dump());
    const auto report = validate_flows(a.flows, dials, cfg);
    CHECK(report.violations() == 0);
    CHECK(to_json(report)["passed"] == true);

    FlowgenConfig bad;
    bad.min_turns = 30;
    CHECK_THROWS(bad.validate());
}
