#pragma once

// Emotion-cause spans from a pluggable extraction backend, plus span scoring.

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfeg/concurrency.hpp"
#include "cfeg/corpus.hpp"
#include "cfeg/http_json.hpp"

namespace cfeg::cause {

/// Offsets are code points into the referenced utterance, half-open.
struct CauseSpan {
    std::string dialogue_id;
    std::size_t utterance_index = 0;
    std::size_t char_start = 0;
    std::size_t char_end = 0;
    std::string text;
};

/// A span as proposed by a backend, before it is checked against the dialogue.
struct RawSpan {
    std::size_t utterance_index = 0;
    std::size_t char_start = 0;
    std::size_t char_end = 0;
    double confidence = 0.0;
};

struct CauseBackendResult {
    std::vector<RawSpan> spans;
    std::string raw;  // backend payload, kept for audit
};

class CauseBackend {
public:
    virtual ~CauseBackend() = default;
    virtual CauseBackendResult annotate(const corpus::Dialogue& d) = 0;
    virtual std::string identity() const = 0;
};

/// Parses a `{"spans": [...]}` payload. Throws BackendError on bad shape or
/// confidence outside [0, 1].
CauseBackendResult parse_backend_payload(const nlohmann::json& payload);

/// Responses read from a JSON object keyed by dialogue id. A missing id is an
/// error; there is no fallback to a live backend.
class FixtureCauseBackend : public CauseBackend {
public:
    explicit FixtureCauseBackend(const std::filesystem::path& path);
    explicit FixtureCauseBackend(nlohmann::json table, std::string label = "inline");
    CauseBackendResult annotate(const corpus::Dialogue& d) override;
    std::string identity() const override { return "fixture:" + label_; }

private:
    nlohmann::json table_;
    std::string label_;
};

/// POSTs {"dialogue": <canonical record>} to the endpoint.
class HttpCauseBackend : public CauseBackend {
public:
    explicit HttpCauseBackend(HttpEndpoint ep) : ep_(std::move(ep)) {}
    CauseBackendResult annotate(const corpus::Dialogue& d) override;
    std::string identity() const override { return ep_.base + ep_.path; }

private:
    HttpEndpoint ep_;
};

struct AnnotatedCause {
    CauseSpan span;
    double confidence = 0.0;
    bool fallback = false;
};

/// Highest-confidence span, ties to lower utterance index then lower start.
/// With no spans the whole last speaker utterance is returned with
/// fallback=true. Spans outside the dialogue raise a non-retryable
/// BackendError; transport failures propagate as retryable ones.
AnnotatedCause annotate_causes(const corpus::Dialogue& d, CauseBackend& backend);

/// annotate_causes over a batch, at most `parallelism` calls in flight,
/// results in input order.
std::vector<AnnotatedCause> annotate_all(const std::vector<corpus::Dialogue>& dialogues, CauseBackend& backend,
                                         std::size_t parallelism, const RetryPolicy& retry);

/// Macro-averaged (over dialogues) token-overlap F1 of whitespace tokens.
/// Both lists must cover the same dialogue ids, one span per id.
double cause_span_f1(const std::vector<CauseSpan>& predicted, const std::vector<CauseSpan>& gold);

/// F1 between two token bags; two empty bags score 1.
double token_f1(const std::vector<std::string>& predicted, const std::vector<std::string>& gold);

nlohmann::json to_json(const AnnotatedCause& c);
AnnotatedCause annotated_from_json(const nlohmann::json& j);

std::size_t utf8_length(std::string_view s);
/// Byte offset of code point `cp` (cp may equal the length).
std::size_t utf8_byte_offset(std::string_view s, std::size_t cp);

}  // namespace cfeg::cause
