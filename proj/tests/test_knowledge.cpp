#include <doctest.h>

#include "cfeg/common.hpp"
#include "cfeg/inflect.hpp"
#include "cfeg/knowledge.hpp"
#include "support.hpp"

using namespace cfeg::knowledge;

namespace {

const std::string kCause = "I burned my hair with my hair dryer.";
const std::string kLast = "Yeah, it is the worst, I look so weird with my hair like this, it is so embarrassing.";

CommonsenseBundle table3_bundle() {
    return {kCause,
            Mode::cause_oriented,
            {{Relation::xIntent, "to look nice"},
             {Relation::xNeed, "to have a haircut"},
             {Relation::xWant, "to fix the hair"},
             {Relation::xEffect, "burn hair"},
             {Relation::xReact, "embarrassed"}}};
}

}  // namespace

TEST_CASE("fixture backend returns the hair-dryer inferences for each mode") {
    FixtureKnowledgeBackend backend(testing_support::kFixtures / "knowledge.jsonl");
    const auto cause = fetch_commonsense(kCause, Mode::cause_oriented, backend);
    CHECK(cause.inferences == table3_bundle().inferences);
    const auto last = fetch_commonsense(kLast, Mode::last_utterance, backend);
    CHECK(last.inferences.at(Relation::xNeed) == "to have a hair dryer");
    CHECK(last.mode == Mode::last_utterance);
}

TEST_CASE("pass-through of backend tails") {
    FixtureKnowledgeBackend backend;
    for (auto r : kRelations) backend.add("h", r, {"x", "y"});
    const auto b = fetch_commonsense("h", Mode::cause_oriented, backend);
    for (auto r : kRelations) CHECK(b.inferences.at(r) == "x");
}

TEST_CASE("a relation without tails names the relation") {
    FixtureKnowledgeBackend backend;
    for (auto r : kRelations) {
        if (r != Relation::xWant) backend.add("h", r, {"x"});
    }
    backend.add("h", Relation::xWant, {});
    try {
        fetch_commonsense("h", Mode::cause_oriented, backend);
        FAIL("expected a backend error");
    } catch (const cfeg::BackendError& e) {
        CHECK(std::string(e.what()).find("xWant") != std::string::npos);
        CHECK_FALSE(e.retryable());
    }
}

TEST_CASE("knowledge source per mode") {
    const auto d = testing_support::fixture_corpus().front();
    CHECK(knowledge_source(d, Mode::cause_oriented, kCause) == kCause);
    CHECK(knowledge_source(d, Mode::last_utterance, kCause) == kLast);
}

TEST_CASE("hair-dryer bundle verbalization") {
    CHECK(verbalize(table3_bundle(), "He") ==
          "He tends to look nice; He needs to have a haircut; He wants to fix his hair; The effect is that he ends up "
          "burning his hair; He feels embarrassed.");
    CHECK(verbalize(table3_bundle(), "They") ==
          "They tend to look nice; They need to have a haircut; They want to fix their hair; The effect is that they "
          "end up burning their hair; They feel embarrassed.");
    CHECK_THROWS_AS(verbalize(table3_bundle(), "it"), cfeg::PreconditionError);
}

TEST_CASE("verbalization structure") {
    CommonsenseBundle b{"s", Mode::cause_oriented,
                        {{Relation::xIntent, "a"}, {Relation::xNeed, "b"}, {Relation::xWant, "c"},
                         {Relation::xEffect, "d"}, {Relation::xReact, "e"}}};
    const auto s = verbalize(b, "He");
    std::size_t seps = 0;
    for (std::size_t p = 0; (p = s.find("; ", p)) != std::string::npos; ++p) ++seps;
    CHECK(seps == 4);
    CHECK(s.back() == '.');
    CHECK(std::count(s.begin(), s.end(), '.') == 1);

    // only the final segment moves when xReact changes
    auto b2 = b;
    b2.inferences[Relation::xReact] = "f";
    const auto t = verbalize(b2, "He");
    const auto cut = s.rfind("; ");
    CHECK(s.substr(0, cut) == t.substr(0, cut));
    CHECK(s.substr(cut) != t.substr(cut));
}

TEST_CASE("surface-form helpers") {
    CHECK(cfeg::gerund("burn") == "burning");
    CHECK(cfeg::gerund("make") == "making");
    CHECK(cfeg::gerund("get") == "getting");
    CHECK(cfeg::gerund_phrase("to get a haircut") == "getting a haircut");
    CHECK(cfeg::third_person("try") == "tries");
    CHECK(cfeg::third_person("wash") == "washes");
    const auto he = cfeg::Pronoun::he();
    CHECK(cfeg::personalize("burn hair", he) == "burn his hair");
    CHECK(cfeg::personalize("wash their hair", he) == "wash his hair");
    CHECK(cfeg::personalize("to be happy", he) == "to be happy");
}

TEST_CASE("bundle json round trip") {
    const auto b = table3_bundle();
    const auto back = bundle_from_json(to_json(b));
    CHECK(back.inferences == b.inferences);
    CHECK(back.source_text == b.source_text);
}

TEST_CASE("batch fetch keeps input order") {
    FixtureKnowledgeBackend backend(testing_support::kFixtures / "knowledge.jsonl");
    std::vector<KnowledgeJob> jobs = {{kLast, Mode::last_utterance}, {kCause, Mode::cause_oriented}};
    const auto out = fetch_all(jobs, backend, 2, {});
    REQUIRE(out.size() == 2);
    CHECK(out[0].source_text == kLast);
    CHECK(out[1].inferences.at(Relation::xEffect) == "burn hair");
}
