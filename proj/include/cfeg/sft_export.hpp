#pragma once

// Instruction-tuning pairs <P2kgE prompt, listener-aware target> for an
// external trainer.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfeg/cause.hpp"
#include "cfeg/corpus.hpp"
#include "cfeg/knowledge.hpp"
#include "cfeg/templates.hpp"

namespace cfeg::sft {

struct SftExample {
    std::string instruction;  // Ins2 + demonstration block
    std::string input;        // dialogue + knowledge clause
    std::string output;       // rendered target
    std::string dialogue_id;
    std::vector<std::string> demo_ids;
    templates::TargetVariant target_variant = templates::TargetVariant::R2la;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
};

/// Hyperparameters handed to the external trainer, copied into the manifest.
struct TrainerConfig {
    double learning_rate = 5e-5;
    int lora_rank = 8;
    int batch_size = 4;
};

struct ExportOptions {
    std::uint64_t seed = 0;
    templates::TargetVariant target_variant = templates::TargetVariant::R2la;
    templates::TemplateOptions template_options;
    TrainerConfig trainer;
};

struct ExportInputs {
    const std::vector<corpus::Dialogue>* dialogues = nullptr;
    /// Demonstrations are drawn from here (the train split).
    const std::vector<corpus::Dialogue>* demo_pool = nullptr;
    const std::map<std::string, cause::AnnotatedCause>* causes = nullptr;
    /// Cause-oriented bundles keyed by dialogue id.
    const std::map<std::string, knowledge::CommonsenseBundle>* bundles = nullptr;
    const templates::ValenceMap* valence = nullptr;
};

/// One example per dialogue, in input order. Throws PreconditionError
/// listing every id that lacks a cause or knowledge bundle.
std::vector<SftExample> build_examples(const ExportInputs& in, const ExportOptions& opts);

struct SftManifest {
    std::size_t records = 0;
    std::string digest;  // sha256 of the record file
    nlohmann::json to_json(const ExportOptions& opts) const;
};

/// Writes one JSON record per line and `<path>.manifest.json` next to it.
SftManifest export_sft(const ExportInputs& in, const ExportOptions& opts, const std::filesystem::path& path);

std::filesystem::path manifest_path(const std::filesystem::path& records);

}  // namespace cfeg::sft
