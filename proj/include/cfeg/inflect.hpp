#pragma once

// Small English surface-form helpers used when verbalizing knowledge and
// rendering output templates.

#include <optional>
#include <string>
#include <string_view>

namespace cfeg {

/// Third-person agreement forms for one subject pronoun.
struct Pronoun {
    std::string subject;     // "He"
    std::string lower;       // "he"
    std::string object;      // "him"
    std::string possessive;  // "his"
    bool singular = true;

    /// "feel" -> "feels" for He/She, "feel" for They.
    std::string verb(std::string_view base) const;

    static std::optional<Pronoun> from_name(std::string_view name);
    static Pronoun he() { return *from_name("He"); }
};

std::string third_person(std::string_view verb);

/// "burn" -> "burning", "make" -> "making", "get" -> "getting".
std::string gerund(std::string_view verb);

/// Rewrites a verb phrase so it can follow "ends up": drops a leading "to",
/// then puts the first word in -ing form.
std::string gerund_phrase(std::string_view phrase);

/// Replaces whole-word "the"/"their" with the possessive and inserts it before
/// bare personal nouns ("burn hair" -> "burn his hair").
std::string personalize(std::string_view phrase, const Pronoun& p);

}  // namespace cfeg
