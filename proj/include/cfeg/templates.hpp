#pragma once

// Prompt variants, output (target) templates, demonstration blocks and the
// parser that recovers structured fields from raw model text.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cfeg/corpus.hpp"
#include "cfeg/inflect.hpp"

namespace cfeg::templates {

inline constexpr std::string_view kIns1 = "Analyze emotion and respond empathetically to the provided dialogue";
inline constexpr std::string_view kIns2 =
    "Analysis the emotion and identify the cause from the dialogue. Then respond empathetically to the provided "
    "dialogue.";
inline constexpr std::string_view kDemoPreamble = "I'll give you five examples.";
inline constexpr std::size_t kDemoCount = 5;

enum class PromptVariant { P1, P2, P2kg, P2kgE };
enum class TargetVariant { R1, R2, R2la, T1, T2, T3, T4, T5 };
enum class ListenerEmotion { glad, sorry };
enum class Intent { reassurance, sympathize };
enum class Valence { positive, negative };

inline constexpr TargetVariant kAllTargets[] = {TargetVariant::R1, TargetVariant::R2, TargetVariant::R2la,
                                                TargetVariant::T1, TargetVariant::T2, TargetVariant::T3,
                                                TargetVariant::T4, TargetVariant::T5};

std::string_view to_string(PromptVariant v);
std::string_view to_string(TargetVariant v);
std::string_view to_string(ListenerEmotion e);
std::string_view to_string(Intent i);
std::optional<PromptVariant> parse_prompt_variant(std::string_view s);
std::optional<TargetVariant> parse_target_variant(std::string_view s);
std::optional<ListenerEmotion> parse_listener_emotion(std::string_view s);
std::optional<Intent> parse_intent(std::string_view s);

/// Target variants whose template carries a cause / the listener clause.
bool has_cause(TargetVariant v);
bool has_listener_clause(TargetVariant v);

/// Emotion label -> valence. File format: one `label<whitespace>valence` per
/// line, '#' starts a comment.
class ValenceMap {
public:
    static ValenceMap load(const std::filesystem::path& path);
    /// Throws std::runtime_error if any label lacks an entry.
    void require_total(const corpus::LabelSet& labels) const;
    void set(const std::string& label, Valence v) { map_[label] = v; }
    std::optional<Valence> get(std::string_view label) const;
    std::size_t size() const { return map_.size(); }

private:
    std::map<std::string, Valence, std::less<>> map_;
};

/// positive -> (glad, sympathize); negative -> (sorry, reassurance).
std::pair<ListenerEmotion, Intent> listener_fields(std::string_view emotion, const ValenceMap& vmap);

struct DemoBlock {
    std::vector<std::string> dialogue_ids;
    std::string rendered;
};

/// `(k) <context>; listener: <gold response>`
std::string render_demo_dialogue(const corpus::Dialogue& d, std::size_t k);

/// `I'll give you five examples. Examples: (1) ... (5) ...`. Requires
/// exactly five distinct dialogues.
DemoBlock render_demos(const std::vector<const corpus::Dialogue*>& demos);

/// Five distinct train dialogues other than the query, drawn uniformly
/// without replacement and listed in pool order. Deterministic in
/// (pool ids, query id, seed).
DemoBlock sample_demonstrations(const std::vector<corpus::Dialogue>& train, const std::string& query_id,
                                std::uint64_t seed);

/// A prompt split at the point where the shared preamble ends; the full
/// prompt is `instruction + " " + input`.
struct PromptParts {
    std::string instruction;
    std::string input;
    std::string joined() const { return instruction + " " + input; }
};

PromptParts prompt_parts(PromptVariant variant, const corpus::Dialogue& dialogue,
                         const std::optional<std::string>& knowledge, const DemoBlock* demos);

std::string build_prompt(PromptVariant variant, const corpus::Dialogue& dialogue,
                         const std::optional<std::string>& knowledge = std::nullopt,
                         const DemoBlock* demos = nullptr);

/// P1 with a demonstration block after the instruction.
std::string build_icl_prompt(const corpus::Dialogue& dialogue, const DemoBlock& demos);

/// Appends "." unless the text already ends in sentence punctuation.
std::string terminate(std::string_view s);

struct TemplateOptions {
    Pronoun pronoun = Pronoun::he();
    /// Emit "I will reassurance him" / "I will sympathize him" instead of the
    /// verb forms "reassure" / "sympathize with".
    bool literal = false;
};

struct TargetFields {
    std::string emotion;
    std::string cause_text;
    std::optional<ListenerEmotion> listener_emotion;
    std::optional<Intent> intent;
    std::string response;
};

struct TargetRecord {
    TargetVariant variant = TargetVariant::R1;
    TargetFields fields;
    std::string rendered;
};

/// Throws PreconditionError when a field the variant needs is missing.
TargetRecord render_target(TargetVariant variant, const TargetFields& fields, const TemplateOptions& opts = {});

struct ParsedResponse {
    std::optional<std::string> emotion;
    std::optional<std::string> cause_text;
    std::optional<ListenerEmotion> listener_emotion;
    std::optional<Intent> intent;
    std::string response;
    bool parse_ok = false;
};

/// Total: on any anchor failure parse_ok is false and response is raw.
ParsedResponse parse_response(std::string_view raw, TargetVariant variant);

nlohmann::json to_json(const ParsedResponse& p);
ParsedResponse parsed_from_json(const nlohmann::json& j);

}  // namespace cfeg::templates
