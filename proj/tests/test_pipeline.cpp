#include <doctest.h>

#include <fstream>

#include "cfeg/common.hpp"
#include "cfeg/config.hpp"
#include "cfeg/digest.hpp"
#include "cfeg/humaneval.hpp"
#include "cfeg/pipeline.hpp"
#include "config_support.hpp"

using namespace cfeg;
using testing_support::TempDir;
using testing_support::write_config;

namespace {

config::Config fixture_config(const TempDir& dir, const testing_support::Overrides& o = {}) {
    return config::load(write_config(dir.path(), o));
}

std::map<std::string, bool> skipped(const std::vector<pipeline::StageResult>& results) {
    std::map<std::string, bool> out;
    for (const auto& r : results) out[r.stage] = r.skipped;
    return out;
}

}  // namespace

TEST_CASE("full run over the fixture corpus") {
    TempDir dir;
    pipeline::Pipeline p(fixture_config(dir));
    const auto results = p.run_all();
    REQUIRE(results.size() == pipeline::kStages.size());
    for (const auto& r : results) CHECK_FALSE(r.skipped);

    CHECK(results[0].summary["dialogues"] == 50);
    CHECK(results[1].summary == nlohmann::json{{"train", 30}, {"valid", 10}, {"test", 10}});
    CHECK(results[5].summary["records"] == 30);

    const auto report = nlohmann::json::parse(read_file(p.artifact("report.json")));
    REQUIRE(report["rows"].size() == 6);
    for (const auto& row : report["rows"]) {
        CAPTURE(row.dump());
        CHECK(row["n_examples"] == 10);
        CHECK(row["ppl"].is_number());
    }
    CHECK(read_file(p.artifact("final_report.txt")).rfind("Automatic evaluation", 0) == 0);

    const auto& m = p.manifest().data();
    CHECK(m["backends"]["model"] == "mock:mock_model.jsonl");
    CHECK(m["config"]["model"]["parallelism"] == 4);
    CHECK(m["stages"]["infer"]["outputs"].contains("predictions/cfeg.jsonl"));
}

TEST_CASE("a second run skips every stage and changes nothing") {
    TempDir dir;
    const auto cfg = fixture_config(dir);
    pipeline::Pipeline(cfg).run_all();
    const auto before = read_file(cfg.workdir / "report.json");
    const auto stages_before = nlohmann::json::parse(read_file(cfg.workdir / "manifest.json"))["stages"];

    pipeline::Pipeline again(cfg);
    for (const auto& r : again.run_all()) {
        CAPTURE(r.stage);
        CHECK(r.skipped);
    }
    CHECK(read_file(cfg.workdir / "report.json") == before);
    CHECK(nlohmann::json::parse(read_file(cfg.workdir / "manifest.json"))["stages"] == stages_before);
}

TEST_CASE("a stage refuses an input edited after it was recorded") {
    TempDir dir;
    pipeline::Pipeline p(fixture_config(dir));
    for (const char* s : {"ingest", "split", "annotate-causes"}) p.run(s);
    std::ofstream(p.artifact("causes.jsonl"), std::ios::app) << "\n";
    try {
        p.run("gen-knowledge");
        FAIL("expected a digest mismatch");
    } catch (const DigestMismatch& e) {
        CHECK(std::string(e.what()).find("causes.jsonl") != std::string::npos);
        CHECK(std::string(e.what()).find("annotate-causes") != std::string::npos);
    }
    // rerunning the producer repairs the chain
    p.run("annotate-causes");
    CHECK_NOTHROW(p.run("gen-knowledge"));
}

TEST_CASE("a stage whose inputs were never produced fails with a config error") {
    TempDir dir;
    pipeline::Pipeline p(fixture_config(dir));
    CHECK_THROWS_AS(p.run("infer"), ConfigError);
    CHECK_THROWS_AS(p.run("no-such-stage"), ConfigError);
}

TEST_CASE("chain of thought makes two calls per test dialogue") {
    TempDir dir;
    pipeline::Pipeline p(fixture_config(dir, {{"infer.strategies", "cot"}}));
    for (const auto& s : pipeline::kStages) {
        const auto r = p.run(s);
        if (s == "infer") {
            CHECK(r.summary["backend_calls"] == 20);
            CHECK(r.summary["strategies"]["cot"]["records"] == 10);
        }
    }
    CHECK(p.manifest().data()["stages"]["infer"]["summary"]["backend_calls"] == 20);
}

TEST_CASE("two workdirs produce byte-identical reports") {
    TempDir a, b;
    const auto ca = fixture_config(a), cb = fixture_config(b, {{"model.parallelism", "1"}});
    pipeline::Pipeline(ca).run_all();
    pipeline::Pipeline(cb).run_all();
    CHECK(read_file(ca.workdir / "report.json") == read_file(cb.workdir / "report.json"));
    CHECK(read_file(ca.workdir / "final_report.txt") == read_file(cb.workdir / "final_report.txt"));
    CHECK(read_file(ca.workdir / "sft.jsonl") == read_file(cb.workdir / "sft.jsonl"));
    CHECK(read_file(ca.workdir / "predictions/cfeg.jsonl") == read_file(cb.workdir / "predictions/cfeg.jsonl"));
}

TEST_CASE("changing a model setting reruns inference but not the stages before it") {
    TempDir dir;
    pipeline::Pipeline(fixture_config(dir)).run_all();
    pipeline::Pipeline p(fixture_config(dir, {{"model.temperature", "0.7"}}));
    const auto s = skipped(p.run_all());
    for (const char* st : {"ingest", "split", "annotate-causes", "gen-knowledge", "build-prompts", "export-sft"}) {
        CAPTURE(st);
        CHECK(s.at(st));
    }
    CHECK_FALSE(s.at("infer"));
    CHECK_FALSE(s.at("evaluate"));
}

TEST_CASE("several demo seeds are averaged in the report") {
    TempDir dir;
    pipeline::Pipeline p(fixture_config(dir, {{"run.eval_seeds", "1,2,3"}, {"infer.strategies", "base,cfeg"}}));
    p.run_all();
    CHECK(std::filesystem::exists(p.artifact("predictions/cfeg.seed2.jsonl")));
    const auto report = nlohmann::json::parse(read_file(p.artifact("report.json")));
    REQUIRE(report["rows"].size() == 2);
    CHECK(report["rows"][1]["strategy"] == "cfeg");
    CHECK(report["rows"][1]["runs"] == 3);
}

TEST_CASE("A/B annotations show up in the final report") {
    TempDir dir;
    const auto cfg = fixture_config(dir);
    pipeline::Pipeline p(cfg);
    p.run_all();

    const auto created = pipeline::create_session(cfg, {"s1", "ab_pair", {"cfeg", "base"}, {"ann1", "ann2"}, 5, 9});
    CHECK(created["items"] == 5);
    CHECK(created["tasks"] == 10);
    CHECK_THROWS_AS(pipeline::create_session(cfg, {"s2", "ab_pair", {"cfeg"}, {"ann1"}, 5, 9}), ConfigError);
    CHECK_THROWS_AS(pipeline::create_session(cfg, {"s2", "rank", {"cfeg"}, {"ann1"}, 5, 9}), ConfigError);

    humaneval::Store store(cfg.humaneval_dir);
    const auto session = store.session("s1");
    for (const auto& t : session->tasks) {
        // always prefer whichever side shows cfeg
        const auto pref = t.shown.front() == "cfeg" ? humaneval::Preference::A : humaneval::Preference::B;
        store.record("s1", {t.task_id, t.annotator_id, {}, {{"coherence", pref}, {"empathy", pref}, {"informative", pref}}, ""});
    }
    const auto r = p.run("report");
    CHECK_FALSE(r.skipped);
    const auto text = read_file(p.artifact("final_report.txt"));
    CHECK(text.find("A/B test, session s1: cfeg vs. base") != std::string::npos);
    CHECK(text.find("empathy       100.0%    0.0%    0.0%    10") != std::string::npos);
}
