#include <doctest.h>

#include "cfeg/cause.hpp"
#include "cfeg/common.hpp"
#include "support.hpp"

using namespace cfeg::cause;
using cfeg::corpus::Dialogue;
using nlohmann::json;
using testing_support::make_dialogue;

namespace {

const Dialogue kBreakup = make_dialogue(
    "fig1", "sad", {"I just broke up with my girlfriend. I feel awful.", "I'm sorry, what happened?", "She moved away."},
    "That must hurt.");

json span(std::size_t u, std::size_t s, std::size_t e, double c) {
    return {{"utterance_index", u}, {"char_start", s}, {"char_end", e}, {"confidence", c}};
}

AnnotatedCause annotate_with(const Dialogue& d, json spans) {
    FixtureCauseBackend backend(json{{d.id, {{"spans", std::move(spans)}}}});
    return annotate_causes(d, backend);
}

CauseSpan cs(std::string id, std::string text) { return {std::move(id), 0, 0, 0, std::move(text)}; }

}  // namespace

TEST_CASE("span text is cut from the utterance") {
    const auto c = annotate_with(kBreakup, json::array({span(0, 0, 35, 0.8)}));
    CHECK(c.span.text == "I just broke up with my girlfriend.");
    CHECK_FALSE(c.fallback);
    CHECK(c.confidence == 0.8);
}

TEST_CASE("a span covering a whole utterance is returned unchanged") {
    const auto c = annotate_with(kBreakup, json::array({span(2, 0, 15, 1.0)}));
    CHECK(c.span.text == "She moved away.");
    CHECK(c.span.utterance_index == 2);
    CHECK(c.span.char_start == 0);
    CHECK(c.span.char_end == 15);
}

TEST_CASE("highest confidence wins, ties by utterance then start") {
    CHECK(annotate_with(kBreakup, json::array({span(2, 0, 15, 0.4), span(0, 0, 35, 0.9)})).span.utterance_index == 0);
    CHECK(annotate_with(kBreakup, json::array({span(2, 0, 15, 0.5), span(0, 36, 49, 0.5)})).span.text ==
          "I feel awful.");
    CHECK(annotate_with(kBreakup, json::array({span(0, 36, 49, 0.5), span(0, 0, 35, 0.5)})).span.char_start == 0);

    // exhaustive comparison against a direct argmax over random confidences
    cfeg::Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        json spans = json::array();
        double best = -1;
        std::size_t best_u = 0;
        for (std::size_t u = 0; u < 3; ++u) {
            const double c = static_cast<double>(rng.below(1000)) / 1000.0;
            spans.push_back(span(u, 0, 3, c));
            if (c > best) best = c, best_u = u;
        }
        CHECK(annotate_with(kBreakup, spans).span.utterance_index == best_u);
    }
}

TEST_CASE("no spans falls back to the last speaker utterance") {
    const auto c = annotate_with(kBreakup, json::array());
    CHECK(c.fallback);
    CHECK(c.span.text == "She moved away.");
    CHECK(c.span.utterance_index == 2);
    CHECK(c.span.char_end == 15);
}

TEST_CASE("spans outside the dialogue are rejected") {
    auto bad = [&](json s) {
        try {
            annotate_with(kBreakup, json::array({s}));
        } catch (const cfeg::BackendError& e) {
            return !e.retryable();
        }
        return false;
    };
    CHECK(bad(span(3, 0, 1, 0.9)));
    CHECK(bad(span(2, 0, 16, 0.9)));
    CHECK(bad(span(2, 5, 5, 0.9)));
    CHECK(bad(span(0, 0, 1, 1.5)));
}

TEST_CASE("missing fixture entry is a non-retryable error") {
    FixtureCauseBackend backend(json::object());
    CHECK_THROWS_AS(annotate_causes(kBreakup, backend), cfeg::BackendError);
}

TEST_CASE("offsets count code points") {
    const auto d = make_dialogue("u", "sad", {"Café crème was cold."}, "x");
    CHECK(utf8_length("Café") == 4);
    const auto c = annotate_with(d, json::array({span(0, 5, 10, 0.9)}));
    CHECK(c.span.text == "crème");
    CHECK(utf8_byte_offset("é", 1) == 2);
    CHECK_THROWS(utf8_byte_offset("ab", 3));
}

TEST_CASE("fixture file drives the batch annotator") {
    FixtureCauseBackend backend(testing_support::kFixtures / "causes.json");
    const auto corpus = testing_support::fixture_corpus();
    const auto out = annotate_all(corpus, backend, 4, {});
    REQUIRE(out.size() == 50);
    CHECK(out[0].span.text == "I burned my hair with my hair dryer.");
    std::vector<std::string> fallbacks;
    for (const auto& c : out) {
        if (c.fallback) fallbacks.push_back(c.span.dialogue_id);
    }
    CHECK(fallbacks == std::vector<std::string>{"fx-005", "fx-022", "fx-039"});
    // the 0.4 span on the final turn never beats the 0.9 event span
    CHECK(out[3].span.utterance_index == 0);
}

TEST_CASE("annotated cause json round trip") {
    const auto c = annotate_with(kBreakup, json::array({span(0, 0, 35, 0.8)}));
    CHECK(to_json(annotated_from_json(to_json(c))) == to_json(c));
}

TEST_CASE("token F1 hand cases") {
    // P = R = 2/3, so F1 = 2/3
    CHECK(token_f1({"a", "b", "c"}, {"b", "c", "d"}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(cause_span_f1({cs("x", "a b c")}, {cs("x", "b c d")}) == 2.0 / 3.0);
    CHECK(token_f1({}, {}) == 1.0);
    CHECK(token_f1({"a"}, {}) == 0.0);
    CHECK(token_f1({"a", "a"}, {"a"}) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("cause span F1 identity, disjoint and macro average") {
    const std::vector<CauseSpan> gold = {cs("1", "I broke up"), cs("2", "lost my job")};
    CHECK(cause_span_f1(gold, gold) == 1.0);
    CHECK(cause_span_f1({cs("1", "x y"), cs("2", "z")}, gold) == 0.0);
    // 1.0 on the first, 0 on the second
    CHECK(cause_span_f1({cs("2", "nothing"), cs("1", "I broke up")}, gold) == 0.5);
}

TEST_CASE("cause span F1 requires matching id sets") {
    const std::vector<CauseSpan> gold = {cs("1", "a"), cs("2", "b")};
    CHECK_THROWS_AS(cause_span_f1({cs("1", "a")}, gold), cfeg::PreconditionError);
    CHECK_THROWS_AS(cause_span_f1({cs("1", "a"), cs("3", "b")}, gold), cfeg::PreconditionError);
    CHECK_THROWS_AS(cause_span_f1({cs("1", "a"), cs("1", "b")}, gold), cfeg::PreconditionError);
}
