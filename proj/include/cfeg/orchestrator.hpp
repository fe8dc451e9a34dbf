#pragma once

// Batch inference for every strategy in the comparison matrix.

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfeg/cause.hpp"
#include "cfeg/chat_backend.hpp"
#include "cfeg/concurrency.hpp"
#include "cfeg/corpus.hpp"
#include "cfeg/kernels.hpp"
#include "cfeg/knowledge.hpp"
#include "cfeg/templates.hpp"

namespace cfeg::orchestrator {

enum class Strategy { base, icl, cot, ckg, kg_ecpe, cfeg };

inline constexpr Strategy kAllStrategies[] = {Strategy::base, Strategy::icl,     Strategy::cot,
                                              Strategy::ckg,  Strategy::kg_ecpe, Strategy::cfeg};

std::string_view to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view s);

inline constexpr std::string_view kCotStage1 =
    "Don't rush to reply yet, what may be the user's emotion, and what may be the situation?";
inline constexpr std::string_view kCotStage2 = "Combine your thoughts with the dialogue context and give your response.";

struct GenerationConfig {
    std::string model_name = "default";
    double temperature = 0.0;
    int max_tokens = 256;
    std::size_t parallelism = 4;
    std::uint64_t seed = 0;
    RetryPolicy retry;
};

/// Scores candidate dialogues against a query; higher is more similar.
class SimilarityBackend {
public:
    virtual ~SimilarityBackend() = default;
    virtual std::vector<double> scores(const corpus::Dialogue& query, const std::vector<corpus::Dialogue>& pool) = 0;
    virtual std::string identity() const = 0;
};

/// Token-set Jaccard over the utterance texts (role tags excluded).
class LexicalSimilarity : public SimilarityBackend {
public:
    std::vector<double> scores(const corpus::Dialogue& query, const std::vector<corpus::Dialogue>& pool) override;
    std::string identity() const override { return "lexical-jaccard"; }
};

/// Tokens used for lexical similarity.
std::vector<std::string> similarity_tokens(const corpus::Dialogue& d);

/// Indices of the top-k pool dialogues by score, ties broken by id; the
/// query's own id is excluded.
std::vector<std::size_t> rank_similar(const corpus::Dialogue& query, const std::vector<corpus::Dialogue>& pool,
                                      std::size_t k, SimilarityBackend& backend);

/// Top five similar train dialogues rendered as a demonstration block.
templates::DemoBlock similar_demos(const corpus::Dialogue& query, const std::vector<corpus::Dialogue>& train,
                                   SimilarityBackend* backend = nullptr);

struct PredictionRecord {
    std::string dialogue_id;
    Strategy strategy = Strategy::base;
    std::string prompt_digest;
    std::string raw_text;
    templates::ParsedResponse parsed;
    double latency_ms = 0.0;
    chat::Usage usage;
    int attempts = 0;
    std::string error;  // non-empty when retries were exhausted

    /// Timing is left out so reruns produce byte-identical files.
    nlohmann::json to_json() const;
    static PredictionRecord from_json(const nlohmann::json& j);
};

/// Side inputs each strategy may need, keyed by dialogue id.
struct StrategyInputs {
    const std::vector<corpus::Dialogue>* train = nullptr;
    const std::map<std::string, cause::AnnotatedCause>* causes = nullptr;
    const std::map<std::string, knowledge::CommonsenseBundle>* cause_bundles = nullptr;
    const std::map<std::string, knowledge::CommonsenseBundle>* last_bundles = nullptr;
    SimilarityBackend* similarity = nullptr;  // lexical fallback when null
    templates::TemplateOptions template_options;
    templates::TargetVariant cfeg_target = templates::TargetVariant::R2la;
};

/// Output template each strategy's replies are parsed with.
templates::TargetVariant target_for(Strategy s, templates::TargetVariant cfeg_target);

/// The chat turns of the first (for cot, stage-1) request.
std::vector<chat::Message> first_messages(Strategy s, const corpus::Dialogue& d, const StrategyInputs& in,
                                          std::uint64_t seed);

/// Throws PreconditionError if the strategy's side inputs are missing.
void check_inputs(Strategy s, const std::vector<corpus::Dialogue>& split, const StrategyInputs& in);

/// One record per dialogue in input order. Backend failures are recorded in
/// the record after retries; they never abort the batch.
std::vector<PredictionRecord> run_strategy(Strategy s, const std::vector<corpus::Dialogue>& split,
                                           const GenerationConfig& cfg, chat::Backend& backend,
                                           const StrategyInputs& in);

struct RunSummary {
    std::size_t records = 0;
    std::size_t backend_calls = 0;
    std::vector<std::string> gaps;  // dialogue ids without a reply
    nlohmann::json to_json() const;
};

RunSummary summarize(const std::vector<PredictionRecord>& records);

void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

}  // namespace cfeg::orchestrator
