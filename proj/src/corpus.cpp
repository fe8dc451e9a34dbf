#include "cfeg/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <boost/tokenizer.hpp>

#include "cfeg/common.hpp"

namespace cfeg::corpus {

using nlohmann::json;

std::string_view to_string(Role r) { return r == Role::speaker ? "speaker" : "listener"; }

std::optional<Role> parse_role(std::string_view s) {
    if (s == "speaker") return Role::speaker;
    if (s == "listener") return Role::listener;
    return std::nullopt;
}

std::string_view to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::valid: return "valid";
        case Split::test: return "test";
        case Split::unassigned: return "unassigned";
    }
    return "unassigned";
}

LabelSet LabelSet::from_names(const std::vector<std::string>& names) {
    LabelSet set;
    for (const auto& raw : names) {
        const std::string name = trim(raw);
        if (name != to_lower(name)) throw std::runtime_error("label not lowercase: " + name);
        if (!set.names_.insert(name).second) throw std::runtime_error("duplicate label: " + name);
    }
    if (set.names_.size() != kSize) {
        throw std::runtime_error("label set must contain exactly 32 names, got " +
                                 std::to_string(set.names_.size()));
    }
    return set;
}

LabelSet LabelSet::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read label set " + path.string());
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        names.push_back(t);
    }
    return from_names(names);
}

std::string normalize_text(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_break = false;
    for (char c : s) {
        if (c == '\n' || c == '\r') {
            if (!in_break) out.push_back(' ');
            in_break = true;
        } else {
            out.push_back(c);
            in_break = false;
        }
    }
    return trim(out);
}

std::string validate(const Dialogue& d, const LabelSet& labels) {
    if (d.id.empty()) return "empty id";
    if (!labels.contains(d.emotion)) return "emotion '" + d.emotion + "' not in label set";
    if (d.utterances.empty()) return "no utterances";
    for (std::size_t i = 0; i < d.utterances.size(); ++i) {
        const auto& u = d.utterances[i];
        if (u.index != i) return "utterance index out of order at " + std::to_string(i);
        const Role expected = i % 2 == 0 ? Role::speaker : Role::listener;
        if (u.role != expected) return "roles must alternate starting with speaker";
        if (u.text.empty()) return "empty utterance text at " + std::to_string(i);
        if (u.text.find('\n') != std::string::npos) return "newline in utterance " + std::to_string(i);
    }
    if (d.utterances.back().role != Role::speaker) return "last history turn must be the speaker";
    if (d.gold_response.empty()) return "empty gold_response";
    return {};
}

std::optional<Format> parse_format(std::string_view s) {
    if (s == "canonical") return Format::canonical;
    if (s == "edialogue_csv" || s == "edialogue-csv") return Format::edialogue_csv;
    return std::nullopt;
}

json to_json(const Dialogue& d) {
    json utts = json::array();
    for (const auto& u : d.utterances) {
        utts.push_back({{"role", to_string(u.role)}, {"text", u.text}});
    }
    return {{"id", d.id}, {"emotion", d.emotion}, {"utterances", utts}, {"gold_response", d.gold_response}};
}

Dialogue dialogue_from_json(const json& j) {
    Dialogue d;
    d.id = j.at("id").get<std::string>();
    d.emotion = to_lower(trim(j.at("emotion").get<std::string>()));
    std::size_t i = 0;
    for (const auto& u : j.at("utterances")) {
        auto role = parse_role(u.at("role").get<std::string>());
        if (!role) throw std::runtime_error("bad role '" + u.at("role").get<std::string>() + "'");
        d.utterances.push_back({i++, *role, normalize_text(u.at("text").get<std::string>())});
    }
    d.gold_response = normalize_text(j.at("gold_response").get<std::string>());
    return d;
}

namespace {

void accept(ImportResult& result, std::unordered_set<std::string>& seen, Dialogue d,
            std::size_t line, const LabelSet& labels) {
    if (auto why = validate(d, labels); !why.empty()) {
        result.rejects.push_back({line, d.id, why});
        return;
    }
    if (!seen.insert(d.id).second) {
        result.rejects.push_back({line, d.id, "duplicate id"});
        return;
    }
    result.dialogues.push_back(std::move(d));
}

}  // namespace

ImportResult import_canonical(std::istream& in, const LabelSet& labels) {
    ImportResult result;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        Dialogue d;
        try {
            d = dialogue_from_json(json::parse(line));
        } catch (const std::exception& e) {
            result.rejects.push_back({lineno, {}, std::string("malformed record: ") + e.what()});
            continue;
        }
        accept(result, seen, std::move(d), lineno, labels);
    }
    return result;
}

// Importer for the public EmpatheticDialogues CSV release. One row per
// utterance; columns are located by header name:
//   conv_id        -> Dialogue::id
//   utterance_idx  -> 1-based turn order within the conversation
//   context        -> emotion label
//   utterance      -> turn text, with "_comma_" standing for ','
// Odd turns are the speaker, even turns the listener. The last listener turn
// becomes gold_response and the turns before it form the history; a trailing
// unanswered speaker turn is dropped. Other columns (prompt, speaker_idx,
// selfeval, tags) are ignored.
ImportResult import_edialogue_csv(std::istream& in, const LabelSet& labels) {
    using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;
    ImportResult result;
    std::string line;
    if (!std::getline(in, line)) return result;

    std::unordered_map<std::string, std::size_t> col;
    {
        Tokenizer tok(line);
        std::size_t i = 0;
        for (const auto& name : tok) col[trim(name)] = i++;
    }
    for (const char* required : {"conv_id", "utterance_idx", "context", "utterance"}) {
        if (!col.count(required)) {
            result.rejects.push_back({1, {}, std::string("missing column ") + required});
            return result;
        }
    }

    struct Row {
        std::size_t line;
        int turn;
        std::string emotion;
        std::string text;
    };
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<Row>> convs;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::vector<std::string> fields;
        try {
            Tokenizer tok(line);
            fields.assign(tok.begin(), tok.end());
        } catch (const std::exception& e) {
            result.rejects.push_back({lineno, {}, std::string("malformed csv: ") + e.what()});
            continue;
        }
        auto field = [&](const char* name) -> const std::string* {
            auto idx = col.at(name);
            return idx < fields.size() ? &fields[idx] : nullptr;
        };
        const auto* id = field("conv_id");
        const auto* idx = field("utterance_idx");
        const auto* emo = field("context");
        const auto* utt = field("utterance");
        if (!id || !idx || !emo || !utt) {
            result.rejects.push_back({lineno, id ? *id : std::string{}, "too few columns"});
            continue;
        }
        int turn = 0;
        auto [p, ec] = std::from_chars(idx->data(), idx->data() + idx->size(), turn);
        if (ec != std::errc{} || turn < 1) {
            result.rejects.push_back({lineno, *id, "bad utterance_idx"});
            continue;
        }
        std::string text = *utt;
        for (std::size_t pos; (pos = text.find("_comma_")) != std::string::npos;) {
            text.replace(pos, 7, ",");
        }
        if (!convs.count(*id)) order.push_back(*id);
        convs[*id].push_back({lineno, turn, to_lower(trim(*emo)), normalize_text(text)});
    }

    std::unordered_set<std::string> seen;
    for (const auto& id : order) {
        auto rows = convs[id];
        std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.turn < b.turn; });
        Dialogue d;
        d.id = id;
        d.emotion = rows.front().emotion;
        bool consistent = true;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].turn != static_cast<int>(i) + 1 || rows[i].emotion != d.emotion) consistent = false;
        }
        if (!consistent) {
            result.rejects.push_back({rows.front().line, id, "gaps or mixed labels in conversation"});
            continue;
        }
        std::size_t n = rows.size();
        if (n % 2 == 1) --n;  // unanswered trailing speaker turn
        if (n < 2) {
            result.rejects.push_back({rows.front().line, id, "no listener reply"});
            continue;
        }
        for (std::size_t i = 0; i + 1 < n; ++i) {
            d.utterances.push_back({i, i % 2 == 0 ? Role::speaker : Role::listener, rows[i].text});
        }
        d.gold_response = rows[n - 1].text;
        accept(result, seen, std::move(d), rows.front().line, labels);
    }
    return result;
}

ImportResult import_corpus(const std::filesystem::path& path, Format format, const LabelSet& labels) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read corpus " + path.string());
    switch (format) {
        case Format::canonical: return import_canonical(in, labels);
        case Format::edialogue_csv: return import_edialogue_csv(in, labels);
    }
    throw std::runtime_error("unknown corpus format");
}

void write_canonical(const std::filesystem::path& path, const std::vector<Dialogue>& dialogues) {
    std::string out;
    for (const auto& d : dialogues) {
        out += to_json(d).dump();
        out += '\n';
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << out;
}

std::vector<Dialogue> read_canonical(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::vector<Dialogue> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!trim(line).empty()) out.push_back(dialogue_from_json(json::parse(line)));
    }
    return out;
}

namespace {

Ratio parse_decimal(std::string_view s) {
    auto t = trim(s);
    Ratio r{0, 1};
    bool frac = false;
    bool any = false;
    for (char c : t) {
        if (c == '.') {
            if (frac) throw std::invalid_argument("bad ratio '" + t + "'");
            frac = true;
            continue;
        }
        if (c < '0' || c > '9') throw std::invalid_argument("bad ratio '" + t + "'");
        any = true;
        r.num = r.num * 10 + (c - '0');
        if (frac) r.den *= 10;
        if (r.den > 1'000'000'000'000LL) throw std::invalid_argument("ratio too precise '" + t + "'");
    }
    if (!any) throw std::invalid_argument("empty ratio");
    return r;
}

Ratio reduce(Ratio r) {
    auto g = std::gcd(r.num, r.den);
    if (g > 1) {
        r.num /= g;
        r.den /= g;
    }
    return r;
}

}  // namespace

std::array<Ratio, 3> parse_ratios(std::string_view s) {
    const bool colon = s.find(':') != std::string_view::npos;
    const char sep = colon ? ':' : ',';
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            parts.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    if (parts.size() != 3) throw std::invalid_argument("expected three ratios");
    std::array<Ratio, 3> r{};
    for (int i = 0; i < 3; ++i) r[i] = parse_decimal(parts[i]);
    if (colon) {
        // a:b:c over a common denominator
        std::int64_t den = 1;
        for (auto& x : r) den = std::lcm(den, x.den);
        std::int64_t total = 0;
        for (auto& x : r) total += x.num * (den / x.den);
        if (total == 0) throw std::invalid_argument("ratios sum to zero");
        for (auto& x : r) x = reduce({x.num * (den / x.den), total});
    } else {
        for (auto& x : r) x = reduce(x);
    }
    return r;
}

SplitResult split_corpus(const std::vector<Dialogue>& dialogues, const std::array<Ratio, 3>& ratios,
                         std::uint64_t seed) {
    if (dialogues.empty()) throw PreconditionError("split_corpus: empty input");
    double sum = 0;
    for (const auto& r : ratios) {
        if (r.num <= 0 || r.den <= 0) throw PreconditionError("split_corpus: ratios must be positive");
        sum += r.value();
    }
    if (std::abs(sum - 1.0) > 1e-9) throw PreconditionError("split_corpus: ratios must sum to 1");

    std::vector<std::size_t> idx(dialogues.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return dialogues[a].id < dialogues[b].id; });
    Rng rng(seed);
    rng.shuffle(idx);

    const auto n = static_cast<std::int64_t>(dialogues.size());
    auto floor_share = [n](const Ratio& r) {
        // n * num / den without overflow for realistic corpus sizes
        return static_cast<std::size_t>((static_cast<__int128>(n) * r.num) / r.den);
    };
    const std::size_t n_valid = floor_share(ratios[1]);
    const std::size_t n_test = floor_share(ratios[2]);
    const std::size_t n_train = dialogues.size() - n_valid - n_test;

    SplitResult out;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        Dialogue d = dialogues[idx[k]];
        if (k < n_train) {
            d.split = Split::train;
            out.train.push_back(std::move(d));
        } else if (k < n_train + n_valid) {
            d.split = Split::valid;
            out.valid.push_back(std::move(d));
        } else {
            d.split = Split::test;
            out.test.push_back(std::move(d));
        }
    }
    return out;
}

SplitManifest make_manifest(const SplitResult& split, const std::array<Ratio, 3>& ratios, std::uint64_t seed) {
    SplitManifest m;
    for (const auto& d : split.train) m.train.push_back(d.id);
    for (const auto& d : split.valid) m.valid.push_back(d.id);
    for (const auto& d : split.test) m.test.push_back(d.id);
    m.seed = seed;
    m.ratios = ratios;
    return m;
}

json SplitManifest::to_json() const {
    json r = json::array();
    for (const auto& x : ratios) r.push_back({x.num, x.den});
    return {{"seed", seed}, {"ratios", r}, {"train", train}, {"valid", valid}, {"test", test}};
}

SplitManifest SplitManifest::from_json(const json& j) {
    SplitManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    for (int i = 0; i < 3; ++i) {
        m.ratios[i] = {j.at("ratios").at(i).at(0).get<std::int64_t>(), j.at("ratios").at(i).at(1).get<std::int64_t>()};
    }
    m.train = j.at("train").get<std::vector<std::string>>();
    m.valid = j.at("valid").get<std::vector<std::string>>();
    m.test = j.at("test").get<std::vector<std::string>>();
    return m;
}

SplitResult apply_manifest(const std::vector<Dialogue>& dialogues, const SplitManifest& manifest) {
    std::unordered_map<std::string, const Dialogue*> by_id;
    for (const auto& d : dialogues) by_id[d.id] = &d;
    SplitResult out;
    auto take = [&](const std::vector<std::string>& ids, Split s, std::vector<Dialogue>& dst) {
        for (const auto& id : ids) {
            auto it = by_id.find(id);
            if (it == by_id.end()) throw std::runtime_error("split manifest references unknown id " + id);
            Dialogue d = *it->second;
            d.split = s;
            dst.push_back(std::move(d));
        }
    };
    take(manifest.train, Split::train, out.train);
    take(manifest.valid, Split::valid, out.valid);
    take(manifest.test, Split::test, out.test);
    return out;
}

std::string context_string(const Dialogue& d) {
    std::string out;
    for (std::size_t i = 0; i < d.utterances.size(); ++i) {
        if (i) out += "; ";
        out += to_string(d.utterances[i].role);
        out += ": ";
        out += d.utterances[i].text;
    }
    return out;
}

const std::string& last_speaker_text(const Dialogue& d) {
    for (auto it = d.utterances.rbegin(); it != d.utterances.rend(); ++it) {
        if (it->role == Role::speaker) return it->text;
    }
    throw PreconditionError("dialogue " + d.id + " has no speaker turn");
}

}  // namespace cfeg::corpus
