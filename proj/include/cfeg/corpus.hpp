#pragma once

// Canonical dialogue model, corpus importers and deterministic splitting.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace cfeg::corpus {

enum class Role { speaker, listener };
enum class Split { train, valid, test, unassigned };

std::string_view to_string(Role r);
std::optional<Role> parse_role(std::string_view s);
std::string_view to_string(Split s);

struct Utterance {
    std::size_t index = 0;
    Role role = Role::speaker;
    std::string text;
};

/// The closed set of emotion category names a corpus may use.
class LabelSet {
public:
    static constexpr std::size_t kSize = 32;

    /// One lowercase name per line; blank lines and '#' comments ignored.
    /// Throws std::runtime_error unless exactly 32 distinct lowercase names.
    static LabelSet load(const std::filesystem::path& path);
    static LabelSet from_names(const std::vector<std::string>& names);

    bool contains(std::string_view name) const { return names_.count(std::string(name)) != 0; }
    const std::set<std::string>& names() const { return names_; }

private:
    std::set<std::string> names_;
};

struct Dialogue {
    std::string id;
    std::string emotion;
    std::vector<Utterance> utterances;
    std::string gold_response;
    Split split = Split::unassigned;
};

/// Collapses internal newlines to a single space and trims both ends.
std::string normalize_text(std::string_view s);

/// Empty string when the dialogue satisfies every invariant, else the reason.
std::string validate(const Dialogue& d, const LabelSet& labels);

enum class Format { canonical, edialogue_csv };
std::optional<Format> parse_format(std::string_view s);

struct Reject {
    std::size_t line = 0;  // 1-based source line
    std::string id;        // may be empty when the id could not be read
    std::string reason;
};

struct ImportResult {
    std::vector<Dialogue> dialogues;
    std::vector<Reject> rejects;
};

/// Throws std::runtime_error if the file cannot be read.
ImportResult import_corpus(const std::filesystem::path& path, Format format, const LabelSet& labels);
ImportResult import_canonical(std::istream& in, const LabelSet& labels);
ImportResult import_edialogue_csv(std::istream& in, const LabelSet& labels);

nlohmann::json to_json(const Dialogue& d);
Dialogue dialogue_from_json(const nlohmann::json& j);

/// One dialogue per line.
void write_canonical(const std::filesystem::path& path, const std::vector<Dialogue>& dialogues);
std::vector<Dialogue> read_canonical(const std::filesystem::path& path);

/// An exact non-negative rational, so split sizes are computed without
/// floating-point rounding.
struct Ratio {
    std::int64_t num = 0;
    std::int64_t den = 1;
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

/// Parses "8:1:1" (normalized by its sum) or "0.8,0.1,0.1".
std::array<Ratio, 3> parse_ratios(std::string_view s);

struct SplitResult {
    std::vector<Dialogue> train, valid, test;
};

struct SplitManifest {
    std::vector<std::string> train, valid, test;
    std::uint64_t seed = 0;
    std::array<Ratio, 3> ratios{};

    nlohmann::json to_json() const;
    static SplitManifest from_json(const nlohmann::json& j);
};

/// Sorts by id, shuffles with the seed, then gives valid and test
/// floor(N * ratio) dialogues each; train receives the remainder.
SplitResult split_corpus(const std::vector<Dialogue>& dialogues, const std::array<Ratio, 3>& ratios,
                         std::uint64_t seed);

SplitManifest make_manifest(const SplitResult& split, const std::array<Ratio, 3>& ratios,
                            std::uint64_t seed);

/// Applies a manifest to a corpus; every listed id must exist.
SplitResult apply_manifest(const std::vector<Dialogue>& dialogues, const SplitManifest& manifest);

/// `speaker: <t1>; listener: <t2>; ...`
std::string context_string(const Dialogue& d);

/// Text of the final speaker turn.
const std::string& last_speaker_text(const Dialogue& d);

}  // namespace cfeg::corpus
