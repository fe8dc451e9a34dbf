#pragma once

// Run configuration: an INI file (key = value under [sections]). Relative
// paths resolve against the file's directory. Credentials come only from the
// environment: CFEG_MODEL_TOKEN, CFEG_CAUSE_TOKEN, CFEG_KNOWLEDGE_TOKEN,
// CFEG_ADMIN_TOKEN.

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfeg/cause.hpp"
#include "cfeg/chat_backend.hpp"
#include "cfeg/corpus.hpp"
#include "cfeg/knowledge.hpp"
#include "cfeg/orchestrator.hpp"
#include "cfeg/sft_export.hpp"
#include "cfeg/templates.hpp"

namespace cfeg::config {

struct Config {
    std::filesystem::path source;

    // [run]
    std::filesystem::path workdir;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> eval_seeds;  // cfeg demo sampling; defaults to {seed}

    // [data]
    std::filesystem::path corpus;
    corpus::Format format = corpus::Format::canonical;
    std::filesystem::path labels;
    std::filesystem::path valence;
    std::string ratios = "8:1:1";

    // [cause]
    std::string cause_backend;  // fixture:<path> | http(s)://...
    std::string cause_token;

    // [knowledge]
    std::string knowledge_backend;
    std::string knowledge_token;
    int knowledge_k = 1;

    // [model]
    std::string model_backend;  // mock:<script path> | http(s)://...
    std::string model_token;
    std::string model_name = "default";
    double temperature = 0.0;
    int max_tokens = 256;
    std::size_t parallelism = 4;
    int timeout_ms = 30000;
    int retries = 3;
    int backoff_ms = 200;
    bool logprobs = false;  // http backends only; mocks always can

    // [templates]
    templates::TargetVariant target = templates::TargetVariant::R2la;
    std::string pronoun = "He";
    bool literal = false;

    // [infer]
    std::vector<orchestrator::Strategy> strategies;
    std::string eval_split = "test";
    std::size_t limit = 0;  // 0 = whole split

    // [sft]
    sft::TrainerConfig trainer;

    // [humaneval]
    std::filesystem::path humaneval_dir;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path static_dir;
    std::string admin_token;

    RetryPolicy retry() const;
    Pronoun pronoun_forms() const;
    templates::TemplateOptions template_options() const;

    /// Every setting except credentials, in a stable order.
    nlohmann::json resolved() const;
};

/// Throws ConfigError naming every missing or malformed key.
Config load(const std::filesystem::path& path);

std::unique_ptr<cause::CauseBackend> make_cause_backend(const Config& c);
std::unique_ptr<knowledge::KnowledgeBackend> make_knowledge_backend(const Config& c);
std::unique_ptr<chat::Backend> make_model_backend(const Config& c);

}  // namespace cfeg::config
