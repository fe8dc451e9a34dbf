#pragma once

// Automatic evaluation: emotion accuracy, perplexity, Distinct-n, BLEU-n and
// the per-strategy comparison report.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfeg/chat_backend.hpp"
#include "cfeg/concurrency.hpp"
#include "cfeg/templates.hpp"

namespace cfeg::metrics {

/// Lowercase, split on whitespace, and emit every ASCII punctuation
/// character as its own token: "I'm sad." -> i ' m sad .
std::vector<std::string> tokenize(std::string_view text);

/// Fraction of exact (lowercased, trimmed) label matches; an unparsed emotion
/// counts as wrong.
double emotion_accuracy(const std::vector<templates::ParsedResponse>& parsed, const std::vector<std::string>& gold);

/// Unique n-grams / total n-grams across all responses.
double distinct_n(const std::vector<std::string>& responses, int n);

/// Sentence BLEU for n in {2, 4}; see kernels::sentence_bleu.
double bleu_n(std::string_view hypothesis, std::string_view reference, int n);

/// exp(total NLL / total tokens) over every sequence; nullopt when there are
/// no tokens at all.
std::optional<double> perplexity(const std::vector<std::vector<double>>& token_logprobs);

struct ScoringItem {
    std::string prompt;
    std::string target;
};

struct ScoringConfig {
    std::string model;
    std::size_t parallelism = 1;
    RetryPolicy retry;
};

/// Scores each gold target conditioned on its prompt through the backend's
/// token logprobs. Returns nullopt, and fills `warning`, when the backend
/// cannot provide logprobs.
std::optional<double> backend_perplexity(const std::vector<ScoringItem>& items, chat::Backend& backend,
                                         const ScoringConfig& cfg, std::string* warning = nullptr);

/// The messages sent when scoring one item.
std::vector<chat::Message> scoring_messages(const ScoringItem& item);

/// One evaluated run of a strategy, aligned with the gold set by dialogue id.
struct StrategyRun {
    std::string strategy;
    std::vector<std::string> dialogue_ids;
    std::vector<templates::ParsedResponse> parsed;
    std::optional<double> ppl;
};

struct GoldSet {
    std::vector<std::string> dialogue_ids;
    std::vector<std::string> emotions;
    std::vector<std::string> responses;
    /// Optional silver cause spans; enables the cause_f1 column.
    std::optional<std::vector<std::string>> causes;
};

struct MetricRow {
    std::string strategy;
    double acc = 0;
    std::optional<double> ppl;
    double dist1 = 0, dist2 = 0;
    double bleu2 = 0, bleu4 = 0;
    std::optional<double> cause_f1;
    std::size_t n_examples = 0;
    std::size_t runs = 1;
};

struct MetricReport {
    std::vector<MetricRow> rows;

    nlohmann::json to_json() const;
    /// Aligned plain-text table; proportions shown x100, Dist also raw.
    std::string to_text() const;
};

inline const std::vector<std::string> kColumns = {"acc", "ppl", "dist1", "dist2", "bleu2", "bleu4", "cause_f1"};

MetricRow evaluate_run(const StrategyRun& run, const GoldSet& gold);

/// Rows in first-seen strategy order; several runs of one strategy (seeds)
/// are averaged column by column. Throws PreconditionError when a run's
/// dialogue ids differ from the gold set.
MetricReport build_report(const std::vector<StrategyRun>& runs, const GoldSet& gold);

}  // namespace cfeg::metrics
