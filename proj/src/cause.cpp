#include "cfeg/cause.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>

#include "cfeg/common.hpp"
#include "cfeg/digest.hpp"

namespace cfeg::cause {

using nlohmann::json;

std::size_t utf8_length(std::string_view s) {
    std::size_t n = 0;
    for (unsigned char c : s) {
        if ((c & 0xC0) != 0x80) ++n;
    }
    return n;
}

std::size_t utf8_byte_offset(std::string_view s, std::size_t cp) {
    std::size_t seen = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) {
            if (seen == cp) return i;
            ++seen;
        }
    }
    if (seen == cp) return s.size();
    throw std::out_of_range("code point offset past end");
}

CauseBackendResult parse_backend_payload(const json& payload) {
    CauseBackendResult out;
    out.raw = payload.dump();
    try {
        for (const auto& s : payload.at("spans")) {
            RawSpan r;
            r.utterance_index = s.at("utterance_index").get<std::size_t>();
            r.char_start = s.at("char_start").get<std::size_t>();
            r.char_end = s.at("char_end").get<std::size_t>();
            r.confidence = s.value("confidence", 1.0);
            if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) {
                throw BackendError("cause backend confidence outside [0,1]", false);
            }
            out.spans.push_back(r);
        }
    } catch (const json::exception& e) {
        throw BackendError(std::string("malformed cause backend payload: ") + e.what(), false);
    }
    return out;
}

FixtureCauseBackend::FixtureCauseBackend(const std::filesystem::path& path)
    : table_(json::parse(read_file(path))), label_(path.filename().string()) {
    if (!table_.is_object()) throw std::runtime_error("cause fixture must be a JSON object keyed by dialogue id");
}

FixtureCauseBackend::FixtureCauseBackend(json table, std::string label)
    : table_(std::move(table)), label_(std::move(label)) {}

CauseBackendResult FixtureCauseBackend::annotate(const corpus::Dialogue& d) {
    auto it = table_.find(d.id);
    if (it == table_.end()) throw BackendError("cause fixture has no entry for dialogue " + d.id, false);
    return parse_backend_payload(*it);
}

CauseBackendResult HttpCauseBackend::annotate(const corpus::Dialogue& d) {
    return parse_backend_payload(post_json(ep_, {{"dialogue", corpus::to_json(d)}}));
}

AnnotatedCause annotate_causes(const corpus::Dialogue& d, CauseBackend& backend) {
    auto result = backend.annotate(d);
    AnnotatedCause out;
    out.span.dialogue_id = d.id;
    if (result.spans.empty()) {
        std::size_t last = d.utterances.size();
        while (last > 0 && d.utterances[last - 1].role != corpus::Role::speaker) --last;
        if (last == 0) throw PreconditionError("dialogue " + d.id + " has no speaker turn");
        const auto& u = d.utterances[last - 1];
        out.span.utterance_index = u.index;
        out.span.char_start = 0;
        out.span.char_end = utf8_length(u.text);
        out.span.text = u.text;
        out.fallback = true;
        return out;
    }
    const auto best = std::min_element(result.spans.begin(), result.spans.end(), [](const RawSpan& a, const RawSpan& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        if (a.utterance_index != b.utterance_index) return a.utterance_index < b.utterance_index;
        return a.char_start < b.char_start;
    });
    if (best->utterance_index >= d.utterances.size()) {
        throw BackendError("cause span references utterance " + std::to_string(best->utterance_index) +
                               " of dialogue " + d.id + " which has " + std::to_string(d.utterances.size()),
                           false);
    }
    const auto& text = d.utterances[best->utterance_index].text;
    if (!(best->char_start < best->char_end && best->char_end <= utf8_length(text))) {
        throw BackendError("cause span offsets out of range for dialogue " + d.id, false);
    }
    const auto b0 = utf8_byte_offset(text, best->char_start);
    const auto b1 = utf8_byte_offset(text, best->char_end);
    out.span.utterance_index = best->utterance_index;
    out.span.char_start = best->char_start;
    out.span.char_end = best->char_end;
    out.span.text = text.substr(b0, b1 - b0);
    out.confidence = best->confidence;
    return out;
}

std::vector<AnnotatedCause> annotate_all(const std::vector<corpus::Dialogue>& dialogues, CauseBackend& backend,
                                         std::size_t parallelism, const RetryPolicy& retry) {
    std::vector<AnnotatedCause> out(dialogues.size());
    bounded_for(dialogues.size(), parallelism, [&](std::size_t i) {
        out[i] = with_retry(retry, [&] { return annotate_causes(dialogues[i], backend); });
    });
    return out;
}

double token_f1(const std::vector<std::string>& predicted, const std::vector<std::string>& gold) {
    if (predicted.empty() && gold.empty()) return 1.0;
    if (predicted.empty() || gold.empty()) return 0.0;
    std::map<std::string, std::size_t> counts;
    for (const auto& t : gold) ++counts[t];
    std::size_t common = 0;
    for (const auto& t : predicted) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return 0.0;
    const double p = static_cast<double>(common) / static_cast<double>(predicted.size());
    const double r = static_cast<double>(common) / static_cast<double>(gold.size());
    return 2.0 * p * r / (p + r);
}

double cause_span_f1(const std::vector<CauseSpan>& predicted, const std::vector<CauseSpan>& gold) {
    std::unordered_map<std::string, const CauseSpan*> gold_by_id;
    for (const auto& g : gold) {
        if (!gold_by_id.emplace(g.dialogue_id, &g).second) {
            throw PreconditionError("cause_span_f1: duplicate gold id " + g.dialogue_id);
        }
    }
    if (predicted.size() != gold.size()) throw PreconditionError("cause_span_f1: id sets differ");
    if (gold.empty()) throw PreconditionError("cause_span_f1: no dialogues");
    std::set<std::string> seen;
    double total = 0.0;
    for (const auto& p : predicted) {
        auto it = gold_by_id.find(p.dialogue_id);
        if (it == gold_by_id.end() || !seen.insert(p.dialogue_id).second) {
            throw PreconditionError("cause_span_f1: id sets differ at " + p.dialogue_id);
        }
        total += token_f1(split_whitespace(p.text), split_whitespace(it->second->text));
    }
    return total / static_cast<double>(gold.size());
}

json to_json(const AnnotatedCause& c) {
    return {{"dialogue_id", c.span.dialogue_id},
            {"utterance_index", c.span.utterance_index},
            {"char_start", c.span.char_start},
            {"char_end", c.span.char_end},
            {"text", c.span.text},
            {"confidence", c.confidence},
            {"fallback", c.fallback}};
}

AnnotatedCause annotated_from_json(const json& j) {
    AnnotatedCause c;
    c.span.dialogue_id = j.at("dialogue_id").get<std::string>();
    c.span.utterance_index = j.at("utterance_index").get<std::size_t>();
    c.span.char_start = j.at("char_start").get<std::size_t>();
    c.span.char_end = j.at("char_end").get<std::size_t>();
    c.span.text = j.at("text").get<std::string>();
    c.confidence = j.value("confidence", 0.0);
    c.fallback = j.value("fallback", false);
    return c;
}

}  // namespace cfeg::cause
