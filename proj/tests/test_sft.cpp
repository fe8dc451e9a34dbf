#include <doctest.h>

#include <fstream>

#include "cfeg/common.hpp"
#include "cfeg/digest.hpp"
#include "cfeg/sft_export.hpp"
#include "fixture_inputs.hpp"

using namespace cfeg::sft;
using nlohmann::json;

namespace {

ExportInputs inputs(const testing_support::FixtureInputs& fx, const std::vector<cfeg::corpus::Dialogue>& dialogues) {
    return {&dialogues, &fx.corpus, &fx.causes, &fx.cause_bundles, &fx.valence};
}

std::vector<json> read_lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<json> out;
    for (std::string line; std::getline(in, line);) out.push_back(json::parse(line));
    return out;
}

}  // namespace

TEST_CASE("every exported target re-parses with all fields") {
    testing_support::FixtureInputs fx;
    const auto examples = build_examples(inputs(fx, fx.corpus), {});
    REQUIRE(examples.size() == 50);
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& ex = examples[i];
        const auto& d = fx.corpus[i];
        CAPTURE(ex.output);
        const auto p = cfeg::templates::parse_response(ex.output, cfeg::templates::TargetVariant::R2la);
        REQUIRE(p.parse_ok);
        CHECK(*p.emotion == d.emotion);
        CHECK(*p.cause_text == fx.causes.at(d.id).span.text);
        CHECK(p.response == d.gold_response);
        CHECK(p.listener_emotion == cfeg::templates::listener_fields(d.emotion, fx.valence).first);
    }
}

TEST_CASE("instruction and input rebuild the P2kgE prompt") {
    testing_support::FixtureInputs fx;
    ExportOptions opts;
    opts.seed = 13;
    const auto examples = build_examples(inputs(fx, fx.corpus), opts);
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& d = fx.corpus[i];
        const auto demos = cfeg::templates::sample_demonstrations(fx.corpus, d.id, 13);
        const auto prompt = cfeg::templates::build_prompt(cfeg::templates::PromptVariant::P2kgE, d,
                                                          cfeg::knowledge::verbalize(fx.cause_bundles.at(d.id), "He"), &demos);
        CHECK(examples[i].instruction + " " + examples[i].input == prompt);
        CHECK(examples[i].demo_ids == demos.dialogue_ids);
    }
}

TEST_CASE("hair-dryer dialogue record") {
    testing_support::FixtureInputs fx;
    const std::vector<cfeg::corpus::Dialogue> one = {fx.corpus.front()};
    const auto ex = build_examples(inputs(fx, one), {}).front();
    CHECK(ex.output.find("because he says \"I burned my hair with my hair dryer.\"") != std::string::npos);
    CHECK(ex.output.find("I'm sorry to hear that. I will reassure him: ") != std::string::npos);
    CHECK(ex.input.find("In this Dialogue, He tends to look nice; He needs to have a haircut;") != std::string::npos);
}

TEST_CASE("export is stable and writes a manifest") {
    testing_support::FixtureInputs fx;
    testing_support::TempDir dir;
    const std::vector<cfeg::corpus::Dialogue> three(fx.corpus.begin(), fx.corpus.begin() + 3);
    const auto a = export_sft(inputs(fx, three), {}, dir / "a.jsonl");
    const auto b = export_sft(inputs(fx, three), {}, dir / "b.jsonl");
    CHECK(a.records == 3);
    CHECK(a.digest == b.digest);
    CHECK(cfeg::file_digest(dir / "a.jsonl") == a.digest);
    CHECK(cfeg::read_file(dir / "a.jsonl") == cfeg::read_file(dir / "b.jsonl"));

    const auto lines = read_lines(dir / "a.jsonl");
    REQUIRE(lines.size() == 3);
    CHECK(lines[0].contains("instruction"));
    CHECK(lines[0]["meta"]["dialogue_id"] == "fx-000");

    const auto m = json::parse(cfeg::read_file(manifest_path(dir / "a.jsonl")));
    CHECK(m["records"] == 3);
    CHECK(m["digest"] == "sha256:" + a.digest);
    CHECK(m["trainer"]["lora_rank"] == 8);

    ExportOptions other;
    other.seed = 99;
    CHECK(export_sft(inputs(fx, three), other, dir / "c.jsonl").digest != a.digest);
}

TEST_CASE("record count follows the train split") {
    testing_support::FixtureInputs fx;
    const auto ratios = cfeg::corpus::parse_ratios("3:1:1");
    const auto split = cfeg::corpus::split_corpus(fx.corpus, ratios, 0);
    ExportInputs in{&split.train, &split.train, &fx.causes, &fx.cause_bundles, &fx.valence};
    const auto examples = build_examples(in, {});
    CHECK(examples.size() == split.train.size());
    CHECK(examples.size() == 30);
    for (const auto& ex : examples) {
        for (const auto& id : ex.demo_ids) {
            CHECK(std::any_of(split.train.begin(), split.train.end(), [&](const auto& d) { return d.id == id; }));
        }
    }
}

TEST_CASE("missing side inputs are listed") {
    testing_support::FixtureInputs fx;
    auto causes = fx.causes;
    causes.erase("fx-004");
    causes.erase("fx-010");
    ExportInputs in{&fx.corpus, &fx.corpus, &causes, &fx.cause_bundles, &fx.valence};
    try {
        build_examples(in, {});
        FAIL("expected a precondition error");
    } catch (const cfeg::PreconditionError& e) {
        CHECK(std::string(e.what()).find("fx-004, fx-010") != std::string::npos);
    }
}
