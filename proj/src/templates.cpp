#include "cfeg/templates.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <regex>
#include <set>

#include "cfeg/common.hpp"
#include "cfeg/digest.hpp"

namespace cfeg::templates {

using nlohmann::json;

std::string_view to_string(PromptVariant v) {
    switch (v) {
        case PromptVariant::P1: return "P1";
        case PromptVariant::P2: return "P2";
        case PromptVariant::P2kg: return "P2kg";
        case PromptVariant::P2kgE: return "P2kgE";
    }
    return "";
}

std::string_view to_string(TargetVariant v) {
    switch (v) {
        case TargetVariant::R1: return "R1";
        case TargetVariant::R2: return "R2";
        case TargetVariant::R2la: return "R2la";
        case TargetVariant::T1: return "T1";
        case TargetVariant::T2: return "T2";
        case TargetVariant::T3: return "T3";
        case TargetVariant::T4: return "T4";
        case TargetVariant::T5: return "T5";
    }
    return "";
}

std::string_view to_string(ListenerEmotion e) { return e == ListenerEmotion::glad ? "glad" : "sorry"; }
std::string_view to_string(Intent i) { return i == Intent::reassurance ? "reassurance" : "sympathize"; }

std::optional<PromptVariant> parse_prompt_variant(std::string_view s) {
    for (auto v : {PromptVariant::P1, PromptVariant::P2, PromptVariant::P2kg, PromptVariant::P2kgE}) {
        if (to_string(v) == s) return v;
    }
    return std::nullopt;
}

std::optional<TargetVariant> parse_target_variant(std::string_view s) {
    for (auto v : kAllTargets) {
        if (to_string(v) == s) return v;
    }
    return std::nullopt;
}

std::optional<ListenerEmotion> parse_listener_emotion(std::string_view s) {
    if (s == "glad") return ListenerEmotion::glad;
    if (s == "sorry") return ListenerEmotion::sorry;
    return std::nullopt;
}

std::optional<Intent> parse_intent(std::string_view s) {
    if (s == "reassurance" || s == "reassure") return Intent::reassurance;
    if (s == "sympathize" || s == "sympathize with") return Intent::sympathize;
    return std::nullopt;
}

bool has_cause(TargetVariant v) { return v != TargetVariant::R1; }
bool has_listener_clause(TargetVariant v) { return v != TargetVariant::R1 && v != TargetVariant::R2; }

ValenceMap ValenceMap::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read valence map " + path.string());
    ValenceMap m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        auto fields = split_whitespace(line);
        if (fields.empty()) continue;
        if (fields.size() != 2) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected `label valence`");
        }
        if (fields[1] == "positive") {
            m.set(to_lower(fields[0]), Valence::positive);
        } else if (fields[1] == "negative") {
            m.set(to_lower(fields[0]), Valence::negative);
        } else {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad valence " + fields[1]);
        }
    }
    return m;
}

void ValenceMap::require_total(const corpus::LabelSet& labels) const {
    for (const auto& l : labels.names()) {
        if (!map_.count(l)) throw std::runtime_error("valence map has no entry for " + l);
    }
}

std::optional<Valence> ValenceMap::get(std::string_view label) const {
    auto it = map_.find(label);
    if (it == map_.end()) return std::nullopt;
    return it->second;
}

std::pair<ListenerEmotion, Intent> listener_fields(std::string_view emotion, const ValenceMap& vmap) {
    auto v = vmap.get(to_lower(emotion));
    if (!v) throw PreconditionError("listener_fields: unmapped emotion '" + std::string(emotion) + "'");
    if (*v == Valence::positive) return {ListenerEmotion::glad, Intent::sympathize};
    return {ListenerEmotion::sorry, Intent::reassurance};
}

std::string terminate(std::string_view s) {
    std::string out(s);
    if (out.empty() || (out.back() != '.' && out.back() != '!' && out.back() != '?')) out += '.';
    return out;
}

std::string render_demo_dialogue(const corpus::Dialogue& d, std::size_t k) {
    return "(" + std::to_string(k) + ") " + corpus::context_string(d) + "; listener: " + d.gold_response;
}

DemoBlock render_demos(const std::vector<const corpus::Dialogue*>& demos) {
    if (demos.size() != kDemoCount) throw PreconditionError("demonstration block needs exactly five dialogues");
    DemoBlock block;
    block.rendered = std::string(kDemoPreamble) + " Examples:";
    std::set<std::string> ids;
    for (std::size_t i = 0; i < demos.size(); ++i) {
        if (!ids.insert(demos[i]->id).second) throw PreconditionError("duplicate demonstration " + demos[i]->id);
        block.dialogue_ids.push_back(demos[i]->id);
        block.rendered += " " + render_demo_dialogue(*demos[i], i + 1);
    }
    return block;
}

DemoBlock sample_demonstrations(const std::vector<corpus::Dialogue>& train, const std::string& query_id,
                                std::uint64_t seed) {
    std::vector<std::size_t> eligible;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (train[i].id != query_id && seen.insert(train[i].id).second) eligible.push_back(i);
    }
    if (eligible.size() < kDemoCount) {
        throw PreconditionError("sample_demonstrations: fewer than five eligible train dialogues");
    }
    // Per-query stream so one seed gives different demos for different queries.
    const auto h = sha256_hex(query_id);
    Rng rng(seed ^ std::stoull(h.substr(0, 16), nullptr, 16));
    for (std::size_t i = 0; i < kDemoCount; ++i) {
        std::swap(eligible[i], eligible[i + rng.below(eligible.size() - i)]);
    }
    std::vector<std::size_t> chosen(eligible.begin(), eligible.begin() + kDemoCount);
    std::sort(chosen.begin(), chosen.end());
    std::vector<const corpus::Dialogue*> demos;
    for (auto i : chosen) demos.push_back(&train[i]);
    return render_demos(demos);
}

PromptParts prompt_parts(PromptVariant variant, const corpus::Dialogue& dialogue,
                         const std::optional<std::string>& knowledge, const DemoBlock* demos) {
    const bool wants_kg = variant == PromptVariant::P2kg || variant == PromptVariant::P2kgE;
    const bool wants_demos = variant == PromptVariant::P2kgE;
    if (wants_kg != knowledge.has_value()) {
        throw PreconditionError(std::string("build_prompt: ") + std::string(to_string(variant)) +
                                (wants_kg ? " requires" : " forbids") + " knowledge");
    }
    if (wants_demos != (demos != nullptr)) {
        throw PreconditionError(std::string("build_prompt: ") + std::string(to_string(variant)) +
                                (wants_demos ? " requires" : " forbids") + " demonstrations");
    }
    PromptParts parts;
    parts.instruction = terminate(variant == PromptVariant::P1 ? kIns1 : kIns2);
    if (demos) parts.instruction += " " + terminate(demos->rendered);
    parts.input = "The Dialogue: " + terminate(corpus::context_string(dialogue));
    if (knowledge) parts.input += " In this Dialogue, " + *knowledge;
    return parts;
}

std::string build_prompt(PromptVariant variant, const corpus::Dialogue& dialogue,
                         const std::optional<std::string>& knowledge, const DemoBlock* demos) {
    return prompt_parts(variant, dialogue, knowledge, demos).joined();
}

std::string build_icl_prompt(const corpus::Dialogue& dialogue, const DemoBlock& demos) {
    return terminate(kIns1) + " " + terminate(demos.rendered) + " The Dialogue: " +
           terminate(corpus::context_string(dialogue));
}

namespace {

std::string intent_phrase(Intent i, bool literal) {
    if (literal) return std::string(to_string(i));
    return i == Intent::reassurance ? "reassure" : "sympathize with";
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

// A quoted cause closing a sentence takes no extra period if it already ends
// in one, as in `says "I burned my hair." I'm sorry`.
std::string quoted_end(const std::string& s) {
    const bool closed = !s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?');
    return quoted(s) + (closed ? "" : ".");
}

}  // namespace

TargetRecord render_target(TargetVariant variant, const TargetFields& f, const TemplateOptions& opts) {
    const auto& p = opts.pronoun;
    auto require = [&](bool ok, const char* what) {
        if (!ok) throw PreconditionError("render_target(" + std::string(to_string(variant)) + "): missing " + what);
    };
    require(!f.emotion.empty(), "emotion");
    require(!f.response.empty(), "response");
    if (has_cause(variant)) require(!f.cause_text.empty(), "cause");
    if (has_listener_clause(variant)) {
        require(f.listener_emotion.has_value(), "listener emotion");
        require(f.intent.has_value(), "intent");
    }

    const std::string feels = p.subject + " " + p.verb("feel") + " " + f.emotion;
    const std::string reply = "I will reply " + p.object + ": " + f.response;
    std::string head;
    switch (variant) {
        case TargetVariant::R1:
            head = feels + ".";
            break;
        case TargetVariant::R2:
        case TargetVariant::R2la:
        case TargetVariant::T5:
            head = feels + " because " + p.lower + " " + p.verb("say") + " " + quoted_end(f.cause_text);
            break;
        case TargetVariant::T1:
            head = "Emotion: " + f.emotion + " Cause: " + quoted_end(f.cause_text);
            break;
        case TargetVariant::T2:
            head = p.subject + " " + p.verb("say") + " " + quoted(f.cause_text) + " and " + p.lower + " " +
                   p.verb("feel") + " " + f.emotion + ".";
            break;
        case TargetVariant::T3:
            head = quoted(f.cause_text) + " makes " + p.object + " feel " + f.emotion + ".";
            break;
        case TargetVariant::T4:
            head = feels + " upon saying " + quoted_end(f.cause_text);
            break;
    }

    TargetRecord rec{variant, f, {}};
    if (has_listener_clause(variant)) {
        rec.rendered = head + " I'm " + std::string(to_string(*f.listener_emotion)) + " to hear that. I will " +
                       intent_phrase(*f.intent, opts.literal) + " " + p.object + ": " + f.response;
    } else {
        rec.rendered = head + " " + reply;
        rec.fields.listener_emotion.reset();
        rec.fields.intent.reset();
    }
    if (!has_cause(variant)) rec.fields.cause_text.clear();
    return rec;
}

namespace {

// Only the fixed prefix is matched; the response is whatever follows it.
constexpr std::size_t kMaxPrefix = 4096;

const std::string kSubj = "(?:He|She|They|A|The speaker)";
const std::string kSubjLower = "(?:he|she|they)";
const std::string kObj = "(?:him|her|them)";
const std::string kCause = "\"?([\\s\\S]*?)\"?";
const std::string kListener =
    "(?:I'm so|I'm|I am|I feel so|I feel) (glad|sorry) to hear that\\.?\\s+(?:Therefore, )?I will "
    "(reassurance|reassure|sympathize with|sympathize) " +
    kObj + ": ?";
const std::string kReply = "I will reply(?: " + kObj + ")?(?: as follows)?: ?";

struct Pattern {
    std::regex re;
    int emotion = 0, cause = 0, listener = 0, intent = 0;  // capture groups, 0 = absent
};

const Pattern& pattern_for(TargetVariant v) {
    static const std::map<TargetVariant, Pattern> table = [] {
        auto mk = [](const std::string& s, int e, int c, int l, int i) { return Pattern{std::regex(s), e, c, l, i}; };
        std::map<TargetVariant, Pattern> t;
        t.emplace(TargetVariant::R1, mk("^" + kSubj + " feels? (.+?)[.,]?\\s+" + kReply, 1, 0, 0, 0));
        t.emplace(TargetVariant::R2, mk("^" + kSubj + " feels? (.+?) because " + kSubjLower + " says? " + kCause +
                                            "\\.?\\s+" + kReply,
                                        1, 2, 0, 0));
        const auto r2la = "^" + kSubj + " feels? (.+?) because " + kSubjLower + " says? " + kCause + "\\.?\\s+" + kListener;
        t.emplace(TargetVariant::R2la, mk(r2la, 1, 2, 3, 4));
        t.emplace(TargetVariant::T5, mk(r2la, 1, 2, 3, 4));
        t.emplace(TargetVariant::T1, mk("^Emotion: (.+?) Cause: " + kCause + "\\.?\\s+" + kListener, 1, 2, 3, 4));
        t.emplace(TargetVariant::T2, mk("^" + kSubj + " says? " + kCause + " and " + kSubjLower + " feels? (.+?)\\.?\\s+" +
                                            kListener,
                                        2, 1, 3, 4));
        t.emplace(TargetVariant::T3, mk("^" + kCause + " makes " + kObj + " feel (.+?)\\.?\\s+" + kListener, 2, 1, 3, 4));
        t.emplace(TargetVariant::T4, mk("^" + kSubj + " feels? (.+?) upon saying " + kCause + "\\.?\\s+" + kListener,
                                        1, 2, 3, 4));
        return t;
    }();
    return table.at(v);
}

}  // namespace

ParsedResponse parse_response(std::string_view raw, TargetVariant variant) {
    ParsedResponse out;
    out.response = std::string(raw);
    const auto& pat = pattern_for(variant);
    std::string text = trim(raw);
    // chat transcripts may carry a "SYS:" turn tag
    if (text.rfind("SYS:", 0) == 0) text = trim(std::string_view(text).substr(4));
    const std::string head = text.substr(0, std::min(text.size(), kMaxPrefix));
    std::smatch m;
    if (!std::regex_search(head, m, pat.re, std::regex_constants::match_continuous)) return out;
    std::string response = text.substr(static_cast<std::size_t>(m.length(0)));
    if (response.empty()) return out;

    out.emotion = m[pat.emotion].str();
    if (pat.cause) out.cause_text = m[pat.cause].str();
    if (pat.listener) out.listener_emotion = parse_listener_emotion(m[pat.listener].str());
    if (pat.intent) out.intent = parse_intent(m[pat.intent].str());
    out.response = std::move(response);
    out.parse_ok = true;
    return out;
}

json to_json(const ParsedResponse& p) {
    json j = {{"parse_ok", p.parse_ok}, {"response", p.response}};
    j["emotion"] = p.emotion ? json(*p.emotion) : json(nullptr);
    j["cause_text"] = p.cause_text ? json(*p.cause_text) : json(nullptr);
    j["listener_emotion"] = p.listener_emotion ? json(to_string(*p.listener_emotion)) : json(nullptr);
    j["intent"] = p.intent ? json(to_string(*p.intent)) : json(nullptr);
    return j;
}

ParsedResponse parsed_from_json(const json& j) {
    ParsedResponse p;
    p.parse_ok = j.at("parse_ok").get<bool>();
    p.response = j.at("response").get<std::string>();
    if (!j.at("emotion").is_null()) p.emotion = j.at("emotion").get<std::string>();
    if (!j.at("cause_text").is_null()) p.cause_text = j.at("cause_text").get<std::string>();
    if (!j.at("listener_emotion").is_null()) {
        p.listener_emotion = parse_listener_emotion(j.at("listener_emotion").get<std::string>());
    }
    if (!j.at("intent").is_null()) p.intent = parse_intent(j.at("intent").get<std::string>());
    return p;
}

}  // namespace cfeg::templates
