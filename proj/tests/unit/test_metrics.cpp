#include <doctest.h>

#include <cmath>

#include "gdr/error.hpp"
#include "gdr/io.hpp"
#include "gdr/metrics.hpp"
#include "testing.hpp"

using namespace gdr;

namespace {

constexpr double kF1Tol = 1e-9;
constexpr double kBleuTol = 1e-4;

Passage make_passage(const std::string& id, const std::string& doc, std::size_t b, std::size_t e) {
    Passage p;
    p.passage_id = id;
    p.doc_id = doc;
    p.source_char_range = {b, e};
    return p;
}

DialQuery make_query(const std::string& id, std::vector<GroundingRef> refs, std::string domain = "ssa") {
    DialQuery q;
    q.query_id = id;
    q.gold_grounding = std::move(refs);
    q.domain = std::move(domain);
    return q;
}

RetrievalRun run_of(std::map<std::string, std::vector<std::string>> lists) {
    RetrievalRun run;
    for (auto& [qid, ids] : lists) {
        std::vector<ScoredHit> hits;
        for (std::size_t i = 0; i < ids.size(); ++i)
            hits.push_back({ids[i], 1.0 / static_cast<double>(i + 1), i + 1, HitSource::FullQuery});
        run.results[qid] = hits;
    }
    return run;
}

}  // namespace

TEST_CASE("token F1 examples") {
    // "a" is an article and is removed before counting: P = 2/2, R = 2/3.
    CHECK(std::abs(token_f1("a b c", {"b c d"}) - 0.8) <= kF1Tol);
    CHECK(std::abs(token_f1("x b c", {"b c d"}) - 2.0 / 3.0) <= kF1Tol);
    CHECK(token_f1("", {""}) == 1.0);
    CHECK(token_f1("", {"x"}) == 0.0);
    CHECK(token_f1("cat", {"dog", "the cat"}) == 1.0);
    CHECK(exact_match("The Cat!", {"cat"}) == 1);
    CHECK(exact_match("cat dog", {"cat"}) == 0);
    CHECK(exact_match("The Answer!", {"answer"}) == 1);
    CHECK(exact_match("answer one", {"answer"}) == 0);
    CHECK(exact_match("", {""}) == 1);
}

TEST_CASE("token F1 and EM match the reference script") {
    int rows = 0;
    io::for_each_jsonl(testing::data_path("golden_f1_em.jsonl"), [&](const nlohmann::json& j, std::size_t) {
        const auto pred = j.at("pred").get<std::string>();
        const auto golds = j.at("golds").get<std::vector<std::string>>();
        CAPTURE(pred);
        CHECK(std::abs(token_f1(pred, golds) - j.at("f1").get<double>()) <= kF1Tol);
        CHECK(exact_match(pred, golds) == j.at("em").get<int>());
        ++rows;
    });
    CHECK(rows == 200);
}

TEST_CASE("F1 properties") {
    const std::vector<std::string> texts = {"a b c", "the big dog", "x", "", "b a", "c c c d"};
    for (const auto& p : texts) {
        for (const auto& g : texts) {
            const double f = token_f1(p, {g});
            CHECK(f >= 0.0);
            CHECK(f <= 1.0);
            CHECK(f == doctest::Approx(token_f1(g, {p})));
        }
        CHECK(token_f1(p, {p}) == 1.0);
        CHECK(exact_match(p, {p}) == 1);
    }
}

TEST_CASE("corpus BLEU matches sacrebleu") {
    const auto j = nlohmann::json::parse(io::read_file(testing::data_path("golden_bleu.json")));
    std::vector<std::string> preds, refs;
    for (const auto& p : j.at("pairs")) {
        preds.push_back(p.at("pred"));
        refs.push_back(p.at("ref"));
    }
    CHECK(preds.size() == 50);
    CHECK(std::abs(corpus_bleu(preds, refs) - j.at("bleu").get<double>()) <= kBleuTol);
    for (const auto& e : j.at("extra")) {
        const auto ep = e.at("preds").get<std::vector<std::string>>();
        CAPTURE(ep[0]);
        CHECK(std::abs(corpus_bleu(ep, e.at("refs").get<std::vector<std::string>>()) - e.at("bleu").get<double>()) <=
              kBleuTol);
    }
}

TEST_CASE("BLEU properties") {
    CHECK(corpus_bleu({"a"}, {"b"}) == 0.0);
    CHECK(corpus_bleu({"the cat sat on the mat"}, {"the cat sat on the mat"}) == doctest::Approx(100.0));
    const double b = corpus_bleu({"the cat sat on a mat today"}, {"the cat sat on the mat"});
    CHECK(b > 0.0);
    CHECK(b < 100.0);
    CHECK_THROWS(corpus_bleu({"a"}, {"a", "b"}));
}

TEST_CASE("recall@k on a hand-built run") {
    std::vector<Passage> passages = {make_passage("d1::token::0", "d1", 0, 100),
                                     make_passage("d1::token::1", "d1", 100, 200),
                                     make_passage("d2::token::0", "d2", 0, 50)};
    PassageCatalog catalog(passages);
    std::vector<DialQuery> queries = {
        make_query("q1", {{"d1", "5", CharRange{120, 130}}}),
        make_query("q2", {{"d2", "1", CharRange{10, 20}}}),
        make_query("q3", {}),
    };
    const auto pos = compute_positives(queries, catalog);
    CHECK(pos.by_query.at("q1") == std::set<std::string>{"d1::token::1"});
    CHECK(pos.excluded == std::vector<std::string>{"q3"});

    const auto run = run_of({{"q1", {"d2::token::0", "d1::token::1"}}, {"q2", {"d1::token::0"}}});
    CHECK(recall_at_k(run, pos.by_query, 1) == 0.0);
    CHECK(recall_at_k(run, pos.by_query, 2) == 0.5);

    const auto doc_pos = compute_positives(queries, catalog, RecallLevel::Document);
    CHECK(doc_pos.by_query.at("q1").size() == 2);

    const auto report = evaluate_retrieval(run, queries, catalog, {1, 2});
    CHECK(report.n_queries == 2);
    CHECK(report.excluded_queries == 1);
    CHECK(report.recall_at.at(2) == 0.5);
    CHECK(report.per_domain.at("ssa").n_queries == 2);
}

TEST_CASE("recall errors") {
    std::vector<Passage> passages = {make_passage("d1::token::0", "d1", 0, 100)};
    PassageCatalog catalog(passages);
    CHECK_THROWS_AS(catalog.positives(make_query("q", {{"nope", "1", CharRange{0, 1}}})), EvalError);
    CHECK_THROWS_AS(catalog.positives(make_query("q", {{"d1", "1", std::nullopt}})), EvalError);
    CHECK_THROWS_AS(recall_at_k(RetrievalRun{}, {}, 5), EvalError);
}

TEST_CASE("generation evaluation is strict about ids") {
    auto q = make_query("q1", {});
    q.gold_span_text = "the cat sat";
    q.gold_response = "the dog sat";
    const std::vector<DialQuery> queries{q};
    const auto r = evaluate_generation({{"q1", "the cat sat"}}, queries, GenerationTask::Grounding);
    CHECK(*r.f1 == 1.0);
    CHECK(*r.em == 1.0);
    CHECK(r.bleu.has_value());
    CHECK_THROWS_AS(evaluate_generation({}, queries, GenerationTask::Response), EvalError);
    CHECK_THROWS_AS(evaluate_generation({{"q1", "x"}, {"q2", "y"}}, queries, GenerationTask::Response), EvalError);
}

TEST_CASE("report round trip and table") {
    EvalReport r;
    r.n_queries = 3;
    r.recall_at = {{1, 0.25}, {5, 0.5}};
    r.f1 = 0.4;
    const auto back = report_from_json(to_json(r));
    CHECK(back.recall_at == r.recall_at);
    CHECK(*back.f1 == 0.4);
    const auto table = format_report_table({{"bm25", r}});
    CHECK(table.find("25.0") != std::string::npos);
    CHECK(table.find("40.0") != std::string::npos);
}
