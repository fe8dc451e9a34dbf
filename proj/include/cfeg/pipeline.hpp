#pragma once

// Stage runner behind the CLI. Every stage reads and writes files under the
// run's workdir and records their digests in manifest.json.

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfeg/config.hpp"

namespace cfeg::pipeline {

inline const std::vector<std::string> kStages = {"ingest",    "split",      "annotate-causes", "gen-knowledge",
                                                 "build-prompts", "export-sft", "infer",      "evaluate",
                                                 "report"};

struct StageResult {
    std::string stage;
    bool skipped = false;
    nlohmann::json summary;
};

class RunManifest {
public:
    static RunManifest load_or_create(const config::Config& c);
    void save() const;

    const nlohmann::json& data() const { return j_; }
    nlohmann::json* stage(const std::string& name);
    void set_stage(const std::string& name, nlohmann::json record);
    void set_backend(const std::string& kind, const std::string& identity);

    /// The stage that recorded `path` as an output, if any.
    std::optional<std::string> producer_of(const std::string& rel_path) const;

private:
    std::filesystem::path path_;
    nlohmann::json j_;
};

class Pipeline {
public:
    explicit Pipeline(config::Config c);

    StageResult run(const std::string& stage);
    /// Every stage in order; stops at the first error.
    std::vector<StageResult> run_all();

    const config::Config& config() const { return cfg_; }
    const RunManifest& manifest() const { return manifest_; }
    std::filesystem::path artifact(const std::string& rel) const { return cfg_.workdir / rel; }

private:
    struct Declared {
        std::vector<std::string> inputs;   // workdir-relative artifacts of earlier stages
        std::vector<std::filesystem::path> sources;  // files outside the workdir
        nlohmann::json params;
    };

    StageResult stage(const std::string& name, const Declared& d,
                      const std::function<nlohmann::json(std::vector<std::string>& outputs)>& body);

    StageResult ingest();
    StageResult split();
    StageResult annotate_causes();
    StageResult gen_knowledge();
    StageResult build_prompts();
    StageResult export_sft();
    StageResult infer();
    StageResult evaluate();
    StageResult report();

    config::Config cfg_;
    RunManifest manifest_;
};

/// File name of a strategy's predictions for one demo seed.
std::string prediction_file(const std::string& strategy, std::uint64_t seed, bool seeded);

/// Builds a humaneval session from the predictions of an infer run.
struct SessionRequest {
    std::string id;
    std::string mode;  // likert | ab_pair
    std::vector<std::string> systems;
    std::vector<std::string> annotators;
    std::size_t items = 200;
    std::uint64_t seed = 0;
};
nlohmann::json create_session(const config::Config& c, const SessionRequest& req);

}  // namespace cfeg::pipeline
