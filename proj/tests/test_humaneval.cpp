#include <doctest.h>

#include <cmath>
#include <fstream>

#include "cfeg/common.hpp"
#include "cfeg/humaneval.hpp"
#include "oracles/oracles.hpp"
#include "support.hpp"

using namespace cfeg::humaneval;
using nlohmann::json;

namespace {

std::vector<EvalItem> ab_items(std::size_t n) {
    std::vector<EvalItem> out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto id = "i" + std::to_string(i);
        out.push_back({id, "speaker: context " + id, {{"cfeg", "cfeg reply " + id}, {"base", "base reply " + id}}, Mode::ab_pair});
    }
    return out;
}

std::vector<EvalItem> likert_items(std::size_t n) {
    std::vector<EvalItem> out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto id = "i" + std::to_string(i);
        out.push_back({id, "speaker: context " + id, {{"cfeg", "cfeg reply " + id}}, Mode::likert});
    }
    return out;
}

Submission likert(const Task& t, int coh, int emp, int inf, int flu, std::string key = "") {
    return {t.task_id, t.annotator_id, {{"coherence", coh}, {"empathy", emp}, {"informative", inf}, {"fluency", flu}}, {},
            std::move(key)};
}

Submission ab(const Task& t, Preference p, std::string key = "") {
    return {t.task_id, t.annotator_id, {}, {{"coherence", p}, {"empathy", p}, {"informative", p}}, std::move(key)};
}

AnnotationRecord ab_record(std::string left, std::string right, Preference p) {
    AnnotationRecord r;
    r.mode = Mode::ab_pair;
    r.left_system = std::move(left);
    r.right_system = std::move(right);
    for (const auto& a : kAbAspects) r.preferences[a] = p;
    return r;
}

}  // namespace

TEST_CASE("task counts") {
    CHECK(make_session("s", likert_items(1), {"ann1"}, 0).tasks.size() == 1);
    CHECK(make_session("s", ab_items(200), {"a", "b", "c"}, 0).tasks.size() == 600);
    const auto two = make_session("s", {{"i", "c", {{"x", "1"}, {"y", "2"}}, Mode::likert}}, {"a"}, 0);
    CHECK(two.tasks.size() == 2);
    CHECK_THROWS_AS(make_session("s", {{"i", "c", {{"x", "1"}}, Mode::ab_pair}}, {"a"}, 0), cfeg::PreconditionError);
    CHECK_THROWS_AS(make_session("s", ab_items(2), {"a", "a"}, 0), cfeg::PreconditionError);
    CHECK_THROWS_AS(make_session("../s", ab_items(2), {"a"}, 0), cfeg::PreconditionError);
    auto dup = ab_items(2);
    dup[1].item_id = dup[0].item_id;
    CHECK_THROWS_AS(make_session("s", dup, {"a"}, 0), cfeg::PreconditionError);
}

TEST_CASE("left assignment is a fair coin") {
    // Binomial(100, 0.5): mean 50, sigma 5
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto s = make_session("s", ab_items(100), {"a"}, seed);
        int left = 0;
        for (const auto& t : s.tasks) left += t.shown[0] == "cfeg";
        CAPTURE(seed);
        CHECK(std::abs(left - 50) <= 15);
    }
    const auto a = make_session("s", ab_items(20), {"a", "b"}, 9);
    const auto b = make_session("s", ab_items(20), {"a", "b"}, 9);
    CHECK(to_json(a) == to_json(b));
    CHECK(to_json(session_from_json(to_json(a))) == to_json(a));
}

TEST_CASE("likert submissions persist and read back") {
    testing_support::TempDir dir;
    Store store(dir.path());
    const auto s = make_session("s1", likert_items(3), {"ann1"}, 0);
    store.create_session(s);
    store.record("s1", likert(s.tasks[0], 4, 5, 4, 5));
    const auto recs = store.annotations("s1");
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].scores == std::map<std::string, int>{{"coherence", 4}, {"empathy", 5}, {"informative", 4}, {"fluency", 5}});
    CHECK(recs[0].left_system == "cfeg");

    Store reopened(dir.path());
    REQUIRE(reopened.annotations("s1").size() == 1);
    CHECK(reopened.annotations("s1")[0].to_json() == recs[0].to_json());
    CHECK(reopened.session("s1") != nullptr);
}

TEST_CASE("invalid submissions carry their status") {
    testing_support::TempDir dir;
    Store store(dir.path());
    const auto s = make_session("s1", likert_items(2), {"ann1", "ann2"}, 0);
    store.create_session(s);
    const auto& t = s.tasks[0];
    auto status = [&](const std::string& session, const Submission& sub) {
        try {
            store.record(session, sub);
        } catch (const AnnotationError& e) {
            return e.status();
        }
        return 200;
    };
    CHECK(status("s1", likert(t, 6, 5, 4, 5)) == 400);
    CHECK(status("s1", likert(t, 0, 5, 4, 5)) == 400);
    auto missing = likert(t, 3, 3, 3, 3);
    missing.scores.erase("fluency");
    CHECK(status("s1", missing) == 400);
    auto extra = likert(t, 3, 3, 3, 3);
    extra.scores["style"] = 3;
    CHECK(status("s1", extra) == 400);
    CHECK(status("s1", ab(t, Preference::A)) == 400);
    auto other = likert(t, 3, 3, 3, 3);
    other.annotator_id = t.annotator_id == "ann1" ? "ann2" : "ann1";
    CHECK(status("s1", other) == 403);
    CHECK(status("nope", likert(t, 3, 3, 3, 3)) == 404);
    auto unknown_task = likert(t, 3, 3, 3, 3);
    unknown_task.task_id = "t999";
    CHECK(status("s1", unknown_task) == 404);
    CHECK(store.annotations("s1").empty());

    CHECK(status("s1", likert(t, 3, 3, 3, 3, "k1")) == 200);
    CHECK(status("s1", likert(t, 4, 4, 4, 4)) == 409);
    CHECK(store.record("s1", likert(t, 3, 3, 3, 3, "k1")).replayed);
    CHECK(store.annotations("s1").size() == 1);

    CHECK_THROWS_AS(Submission::from_json({{"task_id", "t0"}, {"annotator_id", "a"}, {"scores", {{"coherence", "4"}}}}),
                    AnnotationError);
    CHECK_THROWS_AS(Submission::from_json({{"task_id", "t0"}, {"annotator_id", "a"}, {"preferences", {{"empathy", "C"}}}}),
                    AnnotationError);
}

TEST_CASE("a crash between write and ack leaves the record exactly once") {
    testing_support::TempDir dir;
    const auto s = make_session("s1", ab_items(4), {"ann1"}, 5);
    {
        Store store(dir.path());
        store.create_session(s);
        store.record("s1", ab(s.tasks[0], Preference::A, "k0"));
        store.set_fault_hook([](const AnnotationRecord&) { throw std::runtime_error("simulated crash"); });
        CHECK_THROWS_AS(store.record("s1", ab(s.tasks[1], Preference::B, "k1")), std::runtime_error);
    }
    Store restarted(dir.path());
    const auto recs = restarted.annotations("s1");
    REQUIRE(recs.size() == 2);
    CHECK(recs[1].task_id == s.tasks[1].task_id);
    // the client never saw an ack and retries with the same key
    CHECK(restarted.record("s1", ab(s.tasks[1], Preference::B, "k1")).replayed);
    CHECK(restarted.annotations("s1").size() == 2);
    std::ifstream log(dir / "annotations.jsonl");
    std::size_t lines = 0;
    for (std::string l; std::getline(log, l);) ++lines;
    CHECK(lines == 2);
}

TEST_CASE("a torn tail is discarded on restart") {
    testing_support::TempDir dir;
    const auto s = make_session("s1", ab_items(3), {"ann1"}, 5);
    {
        Store store(dir.path());
        store.create_session(s);
        store.record("s1", ab(s.tasks[0], Preference::A));
    }
    {
        std::ofstream log(dir / "annotations.jsonl", std::ios::app);
        log << R"({"session_id":"s1","task_id":"t1","item)";
    }
    Store restarted(dir.path());
    CHECK(restarted.annotations("s1").size() == 1);
    CHECK_FALSE(restarted.answered("s1", "t1"));
    restarted.record("s1", ab(s.tasks[1], Preference::tie));
    CHECK(Store(dir.path()).annotations("s1").size() == 2);
}

TEST_CASE("blinded task payloads never name systems") {
    testing_support::TempDir dir;
    Store store(dir.path());
    const auto s = make_session("s1", ab_items(10), {"ann1", "ann2"}, 3);
    store.create_session(s);
    const auto payload = blinded_tasks(s, "ann1", store);
    CHECK(payload["tasks"].size() == 10);
    const auto dump = payload.dump();
    CHECK(dump.find("\"cfeg\"") == std::string::npos);
    CHECK(dump.find("\"base\"") == std::string::npos);
    CHECK(dump.find("left_system") == std::string::npos);
    CHECK(payload["tasks"][0]["responses"][0]["label"] == "Response 1");
    CHECK(payload["progress"]["done"] == 0);
}

TEST_CASE("A/B outcomes are de-blinded") {
    std::vector<AnnotationRecord> recs;
    // 11 for cfeg, 7 for base, 2 ties, with cfeg on either side
    for (int i = 0; i < 11; ++i) recs.push_back(i % 2 ? ab_record("cfeg", "base", Preference::A) : ab_record("base", "cfeg", Preference::B));
    for (int i = 0; i < 7; ++i) recs.push_back(i % 2 ? ab_record("cfeg", "base", Preference::B) : ab_record("base", "cfeg", Preference::A));
    recs.push_back(ab_record("cfeg", "base", Preference::tie));
    recs.push_back(ab_record("base", "cfeg", Preference::tie));
    recs.push_back(ab_record("cfeg", "icl", Preference::A));
    const auto rows = ab_results(recs, "cfeg", "base");
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) {
        CHECK(r.win == 55.0);
        CHECK(r.lose == 35.0);
        CHECK(r.tie == 10.0);
        CHECK(r.n == 20);
        CHECK(r.win + r.lose + r.tie == 100.0);
    }
    CHECK(rows[0].aspect == "coherence");
    CHECK(rows[1].aspect == "empathy");
    CHECK(rows[2].aspect == "informative");

    std::vector<AnnotationRecord> all_a;
    for (int i = 0; i < 6; ++i) all_a.push_back(i % 2 ? ab_record("cfeg", "base", Preference::A) : ab_record("base", "cfeg", Preference::B));
    CHECK(ab_results(all_a, "cfeg", "base")[0].win == 100.0);
    CHECK(ab_results(all_a, "base", "cfeg")[0].lose == 100.0);
    CHECK_THROWS_AS(ab_results(all_a, "cfeg", "cot"), cfeg::PreconditionError);
}

TEST_CASE("kappa textbook cases") {
    // p_o = 1/2 and both raters split 50/50, so p_e = 1/2
    const auto zero = kappa({{"y", "y"}, {"y", "n"}, {"n", "y"}, {"n", "n"}});
    CHECK(zero.kappa == 0.0);
    CHECK(zero.method == "cohen");
    CHECK(kappa({{"a", "a"}, {"b", "b"}, {"c", "c"}}).kappa == 1.0);
    CHECK(kappa({{"a", "a", "a"}, {"b", "b", "b"}}).kappa == 1.0);
    CHECK(kappa({{"a", "a"}, {"a", "a"}}).kappa == 1.0);
    CHECK_THROWS_AS(kappa({}), cfeg::PreconditionError);
    CHECK_THROWS_AS(kappa({{"a"}}), cfeg::PreconditionError);
    CHECK_THROWS_AS(kappa({{"a", "b"}, {"a"}}), cfeg::PreconditionError);
}

TEST_CASE("Fleiss kappa on the 14-rater table") {
    const int table[10][5] = {{0, 0, 0, 0, 14}, {0, 2, 6, 4, 2}, {0, 0, 3, 5, 6}, {0, 3, 9, 2, 0}, {2, 2, 8, 1, 1},
                              {7, 7, 0, 0, 0},  {3, 2, 6, 3, 0}, {2, 5, 3, 2, 2}, {6, 5, 2, 1, 0}, {0, 2, 2, 3, 7}};
    std::vector<std::vector<std::string>> labels;
    for (const auto& row : table) {
        std::vector<std::string> item;
        for (int c = 0; c < 5; ++c) {
            for (int k = 0; k < row[c]; ++k) item.push_back(std::to_string(c + 1));
        }
        labels.push_back(item);
    }
    const auto k = kappa(labels);
    CHECK(k.method == "fleiss");
    CHECK(k.p_o == doctest::Approx(0.378021978021978).epsilon(1e-12));
    CHECK(k.p_e == doctest::Approx(0.21275510204081632).epsilon(1e-12));
    CHECK(k.kappa == doctest::Approx(0.20993070442195522).epsilon(1e-12));
}

TEST_CASE("Cohen kappa matches the counting oracle") {
    cfeg::Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::vector<std::string>> labels;
        std::vector<std::pair<std::string, std::string>> pairs;
        for (int i = 0; i < 30; ++i) {
            const auto a = std::to_string(rng.below(4));
            const auto b = rng.below(3) == 0 ? a : std::to_string(rng.below(4));
            labels.push_back({a, b});
            pairs.emplace_back(a, b);
        }
        CHECK(cohen_kappa(labels).kappa == doctest::Approx(oracle::cohen(pairs)).epsilon(1e-12));
    }
}

TEST_CASE("random labels give kappa near zero") {
    cfeg::Rng rng(8);
    for (std::size_t raters : {2, 3}) {
        std::vector<std::vector<std::string>> labels;
        for (int i = 0; i < 1000; ++i) {
            std::vector<std::string> item;
            for (std::size_t r = 0; r < raters; ++r) item.push_back(std::to_string(1 + rng.below(5)));
            labels.push_back(item);
        }
        CAPTURE(raters);
        CHECK(std::abs(kappa(labels).kappa) < 0.1);
    }
}

TEST_CASE("session agreement per aspect") {
    testing_support::TempDir dir;
    Store store(dir.path());
    const auto s = make_session("s1", ab_items(8), {"ann1", "ann2"}, 4);
    store.create_session(s);
    for (const auto& t : s.tasks) {
        // both annotators always prefer cfeg, wherever it is shown
        store.record("s1", ab(t, t.shown[0] == "cfeg" ? Preference::A : Preference::B));
    }
    const auto agreement = session_agreement(*store.session("s1"), store.annotations("s1"));
    REQUIRE(agreement.count("ab_pair.empathy"));
    CHECK(agreement.at("ab_pair.empathy").kappa == 1.0);
    CHECK(agreement.at("ab_pair.empathy").items == 8);

    const auto single = make_session("s2", ab_items(2), {"ann1"}, 4);
    CHECK_THROWS_AS(session_agreement(single, {}), cfeg::PreconditionError);
}
