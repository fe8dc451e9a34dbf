#pragma once

// Five-relation commonsense inferences for a source span, and their
// verbalization into the knowledge sentence spliced into prompts.

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfeg/concurrency.hpp"
#include "cfeg/corpus.hpp"
#include "cfeg/http_json.hpp"
#include "cfeg/inflect.hpp"

namespace cfeg::knowledge {

enum class Relation { xIntent, xNeed, xWant, xEffect, xReact };

/// Verbalization order.
inline constexpr std::array<Relation, 5> kRelations = {Relation::xIntent, Relation::xNeed, Relation::xWant,
                                                       Relation::xEffect, Relation::xReact};

std::string_view to_string(Relation r);
std::optional<Relation> parse_relation(std::string_view s);

enum class Mode { cause_oriented, last_utterance };
std::string_view to_string(Mode m);
std::optional<Mode> parse_mode(std::string_view s);

struct CommonsenseBundle {
    std::string source_text;
    Mode mode = Mode::cause_oriented;
    std::map<Relation, std::string> inferences;  // all five present
};

class KnowledgeBackend {
public:
    virtual ~KnowledgeBackend() = default;
    /// Ranked tails for (head, relation), best first.
    virtual std::vector<std::string> tails(const std::string& head, Relation relation, int k) = 0;
    virtual std::string identity() const = 0;
};

/// Line-delimited {"head", "relation", "tails"} records. A missing
/// (head, relation) pair is a non-retryable BackendError.
class FixtureKnowledgeBackend : public KnowledgeBackend {
public:
    explicit FixtureKnowledgeBackend(const std::filesystem::path& path);
    FixtureKnowledgeBackend() = default;
    void add(const std::string& head, Relation r, std::vector<std::string> tails);
    std::vector<std::string> tails(const std::string& head, Relation relation, int k) override;
    std::string identity() const override { return "fixture:" + label_; }

private:
    std::map<std::pair<std::string, Relation>, std::vector<std::string>> table_;
    std::string label_ = "inline";
};

/// POSTs {"head", "relation", "k"}; expects {"tails": [...]}.
class HttpKnowledgeBackend : public KnowledgeBackend {
public:
    explicit HttpKnowledgeBackend(HttpEndpoint ep) : ep_(std::move(ep)) {}
    std::vector<std::string> tails(const std::string& head, Relation relation, int k) override;
    std::string identity() const override { return ep_.base + ep_.path; }

private:
    HttpEndpoint ep_;
};

/// Top-ranked tail for each of the five relations. Throws a non-retryable
/// BackendError naming the relation if the backend returns no tail for it.
CommonsenseBundle fetch_commonsense(const std::string& source_text, Mode mode, KnowledgeBackend& backend, int k = 1);

/// Source text for a dialogue under each mode: the cause span text, or the
/// final speaker utterance.
std::string knowledge_source(const corpus::Dialogue& d, Mode mode, const std::string& cause_text);

struct KnowledgeJob {
    std::string source_text;
    Mode mode;
};

std::vector<CommonsenseBundle> fetch_all(const std::vector<KnowledgeJob>& jobs, KnowledgeBackend& backend,
                                         std::size_t parallelism, const RetryPolicy& retry, int k = 1);

/// Five fixed frames joined by "; " and terminated with ".":
///   <S> tends <xIntent>; <S> needs <xNeed>; <S> wants <xWant>;
///   The effect is that <s> ends up <xEffect as gerund>; <S> feels <xReact>.
std::string verbalize(const CommonsenseBundle& bundle, const Pronoun& subject);
/// Throws PreconditionError unless subject is He, She or They.
std::string verbalize(const CommonsenseBundle& bundle, std::string_view subject);

nlohmann::json to_json(const CommonsenseBundle& b);
CommonsenseBundle bundle_from_json(const nlohmann::json& j);

}  // namespace cfeg::knowledge
