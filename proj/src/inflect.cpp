#include "cfeg/inflect.hpp"

#include <array>
#include <set>
#include <unordered_map>

#include "cfeg/common.hpp"

namespace cfeg {

namespace {

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

const std::unordered_map<std::string, std::string>& gerund_exceptions() {
    static const std::unordered_map<std::string, std::string> table = {
        {"be", "being"},          {"see", "seeing"},          {"flee", "fleeing"},
        {"die", "dying"},         {"lie", "lying"},           {"tie", "tying"},
        {"dye", "dyeing"},        {"age", "aging"},           {"panic", "panicking"},
        {"picnic", "picnicking"}, {"forget", "forgetting"},   {"begin", "beginning"},
        {"admit", "admitting"},   {"prefer", "preferring"},   {"commit", "committing"},
        {"regret", "regretting"}, {"occur", "occurring"},     {"refer", "referring"},
        {"permit", "permitting"}, {"upset", "upsetting"},     {"control", "controlling"},
        // inflected heads that COMET emits for xEffect
        {"gets", "getting"},      {"feels", "feeling"},       {"is", "being"},
        {"has", "having"},        {"goes", "going"},          {"does", "doing"},
        {"becomes", "becoming"},  {"makes", "making"},        {"loses", "losing"},
    };
    return table;
}

// Nouns that read as belonging to the subject when they appear bare.
const std::set<std::string>& personal_nouns() {
    static const std::set<std::string> nouns = {
        "hair", "head", "face", "hand", "hands", "arm", "arms", "leg", "legs", "feet", "teeth",
        "nails", "body", "car", "phone", "wallet", "keys", "bag", "clothes", "shirt", "job",
        "house", "room", "homework", "dog", "cat", "wife", "husband", "girlfriend", "boyfriend",
        "mom", "dad", "mother", "father", "family", "friends", "kids", "money",
    };
    return nouns;
}

const std::set<std::string>& determiners() {
    static const std::set<std::string> words = {
        "a", "an", "the", "his", "her", "their", "my", "your", "our", "its", "some", "any",
        "this", "that", "these", "those", "no", "every", "each", "all", "new", "own",
    };
    return words;
}

int vowel_groups(std::string_view w) {
    int groups = 0;
    bool prev = false;
    for (char c : w) {
        bool v = is_vowel(c);
        if (v && !prev) ++groups;
        prev = v;
    }
    return groups;
}

}  // namespace

std::optional<Pronoun> Pronoun::from_name(std::string_view name) {
    const auto n = to_lower(name);
    if (n == "he") return Pronoun{"He", "he", "him", "his", true};
    if (n == "she") return Pronoun{"She", "she", "her", "her", true};
    if (n == "they") return Pronoun{"They", "they", "them", "their", false};
    return std::nullopt;
}

std::string Pronoun::verb(std::string_view base) const {
    return singular ? third_person(base) : std::string(base);
}

std::string third_person(std::string_view verb) {
    std::string v(verb);
    if (v.empty()) return v;
    if (v == "have") return "has";
    if (v == "be") return "is";
    auto ends = [&](std::string_view s) { return v.size() >= s.size() && v.compare(v.size() - s.size(), s.size(), s) == 0; };
    if (ends("s") || ends("x") || ends("z") || ends("ch") || ends("sh") || ends("o")) return v + "es";
    if (v.size() >= 2 && v.back() == 'y' && !is_vowel(v[v.size() - 2])) return v.substr(0, v.size() - 1) + "ies";
    return v + "s";
}

std::string gerund(std::string_view verb) {
    std::string v = to_lower(verb);
    if (v.empty()) return v;
    if (auto it = gerund_exceptions().find(v); it != gerund_exceptions().end()) return it->second;
    auto ends = [&](std::string_view s) { return v.size() >= s.size() && v.compare(v.size() - s.size(), s.size(), s) == 0; };
    if (ends("ing") && vowel_groups(std::string_view(v).substr(0, v.size() - 3)) >= 1) return v;
    if (ends("ie")) return v.substr(0, v.size() - 2) + "ying";
    if (ends("ee") || ends("oe") || ends("ye")) return v + "ing";
    if (v.size() > 2 && v.back() == 'e') return v.substr(0, v.size() - 1) + "ing";
    const std::size_t n = v.size();
    if (n >= 3 && vowel_groups(v) == 1 && !is_vowel(v[n - 1]) && is_vowel(v[n - 2]) && !is_vowel(v[n - 3]) &&
        v[n - 1] != 'w' && v[n - 1] != 'x' && v[n - 1] != 'y') {
        return v + v.back() + "ing";
    }
    return v + "ing";
}

std::string gerund_phrase(std::string_view phrase) {
    auto words = split_whitespace(phrase);
    if (!words.empty() && to_lower(words.front()) == "to" && words.size() > 1) words.erase(words.begin());
    if (words.empty()) return {};
    std::string out = gerund(words.front());
    for (std::size_t i = 1; i < words.size(); ++i) out += " " + words[i];
    return out;
}

std::string personalize(std::string_view phrase, const Pronoun& p) {
    auto words = split_whitespace(phrase);
    std::string out;
    std::string prev;
    for (auto& w : words) {
        const auto lw = to_lower(w);
        std::string word = w;
        if (lw == "the" || lw == "their") {
            word = p.possessive;
        } else if (personal_nouns().count(lw) && !determiners().count(to_lower(prev)) && !prev.empty()) {
            if (!out.empty()) out += ' ';
            out += p.possessive;
        }
        if (!out.empty()) out += ' ';
        out += word;
        prev = word;
    }
    return out;
}

}  // namespace cfeg
