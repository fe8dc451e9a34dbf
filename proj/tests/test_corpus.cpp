#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "cfeg/corpus.hpp"
#include "support.hpp"

using namespace cfeg::corpus;
using testing_support::make_dialogue;

namespace {

std::vector<Dialogue> synthetic(std::size_t n) {
    std::vector<Dialogue> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(make_dialogue("d" + std::to_string(i), "sad", {"hi"}, "hello"));
    }
    return out;
}

std::set<std::string> ids(const std::vector<Dialogue>& v) {
    std::set<std::string> s;
    for (const auto& d : v) s.insert(d.id);
    return s;
}

}  // namespace

TEST_CASE("label set loads the 32 categories") {
    const auto labels = testing_support::labels();
    CHECK(labels.names().size() == 32);
    CHECK(labels.contains("embarrassed"));
    CHECK_FALSE(labels.contains("Embarrassed"));
    CHECK_THROWS(LabelSet::from_names({"a", "b"}));
}

TEST_CASE("fixture corpus imports with ids preserved") {
    const auto labels = testing_support::labels();
    const auto r = import_corpus(testing_support::kFixtures / "corpus.jsonl", Format::canonical, labels);
    REQUIRE(r.dialogues.size() == 50);
    CHECK(r.rejects.empty());
    for (std::size_t i = 0; i < 50; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "fx-%03zu", i);
        CHECK(r.dialogues[i].id == id);
    }
}

TEST_CASE("empty input gives nothing") {
    std::istringstream in("");
    const auto r = import_canonical(in, testing_support::labels());
    CHECK(r.dialogues.empty());
    CHECK(r.rejects.empty());
}

TEST_CASE("invalid records are rejected with a reason and the line") {
    std::istringstream in(
        R"({"id":"a","emotion":"sad","utterances":[{"role":"speaker","text":"x"}],"gold_response":"y"})" "\n"
        R"({"id":"b","emotion":"blue","utterances":[{"role":"speaker","text":"x"}],"gold_response":"y"})" "\n"
        R"({"id":"c","emotion":"sad","utterances":[{"role":"listener","text":"x"}],"gold_response":"y"})" "\n"
        R"({"id":"a","emotion":"sad","utterances":[{"role":"speaker","text":"x"}],"gold_response":"y"})" "\n"
        "not json\n"
        R"({"id":"e","emotion":"sad","utterances":[{"role":"speaker","text":"x"},{"role":"listener","text":"y"}],"gold_response":"z"})" "\n");
    const auto r = import_canonical(in, testing_support::labels());
    REQUIRE(r.dialogues.size() == 1);
    CHECK(r.dialogues[0].id == "a");
    REQUIRE(r.rejects.size() == 5);
    CHECK(r.rejects[0].line == 2);
    CHECK(r.rejects[0].reason.find("label set") != std::string::npos);
    CHECK(r.rejects[1].reason.find("alternate") != std::string::npos);
    CHECK(r.rejects[2].reason == "duplicate id");
    CHECK(r.rejects[3].reason.find("malformed") != std::string::npos);
    CHECK(r.rejects[4].reason.find("last history turn") != std::string::npos);
}

TEST_CASE("text normalization collapses newlines") {
    CHECK(normalize_text("  a\nb\r\n\nc  ") == "a b c");
    std::istringstream in(
        R"({"id":"a","emotion":"Sad ","utterances":[{"role":"speaker","text":"one\ntwo"}],"gold_response":"y"})");
    const auto r = import_canonical(in, testing_support::labels());
    REQUIRE(r.dialogues.size() == 1);
    CHECK(r.dialogues[0].utterances[0].text == "one two");
    CHECK(r.dialogues[0].emotion == "sad");
}

TEST_CASE("EmpatheticDialogues csv import") {
    std::istringstream in(
        "conv_id,utterance_idx,context,prompt,speaker_idx,utterance,selfeval,tags\n"
        "hit:1,1,sentimental,p,1,I remember going to the fireworks_comma_ it was great.,,\n"
        "hit:1,2,sentimental,p,2,Was this a friend you were in love with?,,\n"
        "hit:1,3,sentimental,p,1,This was a best friend.,,\n"
        "hit:1,4,sentimental,p,2,Where has she gone now?,,\n"
        "hit:2,1,afraid,p,1,Only a speaker turn.,,\n"
        "hit:3,1,proud,p,1,Got the job.,,\n"
        "hit:3,2,proud,p,2,Congrats!,,\n"
        "hit:3,3,proud,p,1,Thanks.,,\n");
    const auto r = import_edialogue_csv(in, testing_support::labels());
    REQUIRE(r.dialogues.size() == 2);
    const auto& d = r.dialogues[0];
    CHECK(d.id == "hit:1");
    CHECK(d.emotion == "sentimental");
    REQUIRE(d.utterances.size() == 3);
    CHECK(d.utterances[0].text == "I remember going to the fireworks, it was great.");
    CHECK(d.gold_response == "Where has she gone now?");
    CHECK(r.dialogues[1].utterances.size() == 1);
    CHECK(r.dialogues[1].gold_response == "Congrats!");
    REQUIRE(r.rejects.size() == 1);
    CHECK(r.rejects[0].id == "hit:2");
}

TEST_CASE("ratio parsing") {
    auto r = parse_ratios("8:1:1");
    CHECK(r[0].value() == doctest::Approx(0.8));
    CHECK(r[1].num * 10 == r[1].den);
    auto d = parse_ratios("0.8,0.1,0.1");
    CHECK(d[2].value() == doctest::Approx(0.1));
    CHECK_THROWS(parse_ratios("1:1"));
    CHECK_THROWS(parse_ratios("a:b:c"));
}

TEST_CASE("split sizes at full benchmark scale") {
    // floor(24850 * 0.1) = 2485 for valid and test; train gets 24850 - 4970
    const auto corpus = synthetic(24850);
    const auto s = split_corpus(corpus, parse_ratios("8:1:1"), 7);
    CHECK(s.train.size() == 19880);
    CHECK(s.valid.size() == 2485);
    CHECK(s.test.size() == 2485);
    auto tr = ids(s.train), va = ids(s.valid), te = ids(s.test);
    std::size_t overlap = 0;
    for (const auto& id : va) overlap += tr.count(id) + te.count(id);
    for (const auto& id : te) overlap += tr.count(id);
    CHECK(overlap == 0);
    CHECK(tr.size() + va.size() + te.size() == 24850);
}

TEST_CASE("small split and determinism") {
    const auto corpus = synthetic(10);
    const auto a = split_corpus(corpus, parse_ratios("8:1:1"), 3);
    CHECK(a.train.size() == 8);
    CHECK(a.valid.size() == 1);
    CHECK(a.test.size() == 1);
    const auto ratios = parse_ratios("8:1:1");
    const auto m1 = make_manifest(a, ratios, 3).to_json().dump();
    const auto m2 = make_manifest(split_corpus(corpus, ratios, 3), ratios, 3).to_json().dump();
    CHECK(m1 == m2);

    // input order does not matter, only ids and seed
    auto reversed = corpus;
    std::reverse(reversed.begin(), reversed.end());
    CHECK(make_manifest(split_corpus(reversed, ratios, 3), ratios, 3).to_json().dump() == m1);

    bool differs = false;
    for (std::uint64_t seed = 4; seed < 10 && !differs; ++seed) {
        differs = make_manifest(split_corpus(corpus, ratios, seed), ratios, seed).to_json()["test"] !=
                  make_manifest(a, ratios, 3).to_json()["test"];
    }
    CHECK(differs);
}

TEST_CASE("manifest round trip and application") {
    const auto corpus = synthetic(40);
    const auto ratios = parse_ratios("8:1:1");
    const auto s = split_corpus(corpus, ratios, 11);
    const auto m = SplitManifest::from_json(make_manifest(s, ratios, 11).to_json());
    const auto back = apply_manifest(corpus, m);
    CHECK(ids(back.train) == ids(s.train));
    CHECK(ids(back.test) == ids(s.test));
    for (const auto& d : back.valid) CHECK(d.split == Split::valid);

    auto missing = m;
    missing.test.push_back("nope");
    CHECK_THROWS(apply_manifest(corpus, missing));
}

TEST_CASE("context string") {
    CHECK(context_string(make_dialogue("a", "sad", {"hi"}, "x")) == "speaker: hi");
    const auto three = make_dialogue("b", "sad",
                                     {"I just broke up with my girlfriend.", "Oh no, what happened?",
                                      "She said we are not a good match."},
                                     "x");
    CHECK(context_string(three) ==
          "speaker: I just broke up with my girlfriend.; listener: Oh no, what happened?; speaker: She said we are "
          "not a good match.");
    const auto four = make_dialogue("c", "sad", {"a", "b", "c", "d"}, "x");
    const auto s = context_string(four);
    CHECK(std::count(s.begin(), s.end(), ';') == 3);
    CHECK(last_speaker_text(three) == "She said we are not a good match.");
}

TEST_CASE("canonical write and read round trip") {
    testing_support::TempDir dir;
    const auto corpus = testing_support::fixture_corpus();
    write_canonical(dir / "c.jsonl", corpus);
    const auto back = read_canonical(dir / "c.jsonl");
    REQUIRE(back.size() == corpus.size());
    for (std::size_t i = 0; i < back.size(); ++i) CHECK(to_json(back[i]) == to_json(corpus[i]));
}
