#pragma once

// Chat-completions style model backends: an HTTP client and a scripted mock
// that records every call.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfeg/http_json.hpp"

namespace cfeg::chat {

struct Message {
    std::string role;  // "user" | "assistant" | "system"
    std::string content;
};

struct Request {
    std::string model;
    std::vector<Message> messages;
    double temperature = 0.0;
    int max_tokens = 256;
    bool logprobs = false;

    nlohmann::json to_json() const;
};

struct Usage {
    std::size_t calls = 0;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;

    Usage& operator+=(const Usage& o) {
        calls += o.calls;
        prompt_tokens += o.prompt_tokens;
        completion_tokens += o.completion_tokens;
        return *this;
    }
};

struct Response {
    std::string text;
    std::optional<std::vector<double>> token_logprobs;
    Usage usage;
};

/// Accepts {"text", "token_logprobs"?, "usage"?} and, for compatibility, the
/// OpenAI {"choices": [{"message": {"content"}, "logprobs": {"content": [...]}}]} shape.
Response parse_response_payload(const nlohmann::json& j);

/// sha256 of the serialized message list; the key scripted mocks use.
std::string prompt_digest(const std::vector<Message>& messages);

class Backend {
public:
    virtual ~Backend() = default;
    virtual Response complete(const Request& req) = 0;
    virtual std::string identity() const = 0;
    virtual bool supports_logprobs() const = 0;
};

class HttpBackend : public Backend {
public:
    HttpBackend(HttpEndpoint ep, bool logprobs) : ep_(std::move(ep)), logprobs_(logprobs) {}
    Response complete(const Request& req) override;
    std::string identity() const override { return ep_.base + ep_.path; }
    bool supports_logprobs() const override { return logprobs_; }

private:
    HttpEndpoint ep_;
    bool logprobs_;
};

/// Replies scripted by prompt digest. Unscripted prompts go to the substring
/// rules in insertion order, then to the responder, then to the "*" default
/// entry, and otherwise fail non-retryably.
class MockBackend : public Backend {
public:
    struct Scripted {
        std::string text;
        std::optional<std::vector<double>> token_logprobs;
    };
    using Responder = std::function<std::optional<Scripted>(const Request&)>;

    struct LedgerEntry {
        std::string digest;
        std::size_t messages = 0;
    };

    MockBackend() = default;
    /// Line-delimited {"prompt_digest", "text", "token_logprobs"?}. A line
    /// with "contains" (a string or a list that must all occur) and optionally
    /// "messages" (a turn count) instead of "prompt_digest" becomes a rule.
    explicit MockBackend(const std::filesystem::path& script_path);

    void script(const std::string& digest, Scripted reply) { script_[digest] = std::move(reply); }
    void rule(std::vector<std::string> needles, std::size_t messages, Scripted reply) {
        rules_.push_back({std::move(needles), messages, std::move(reply)});
    }
    void set_default(Scripted reply) { script_["*"] = std::move(reply); }
    void set_responder(Responder r) { responder_ = std::move(r); }
    /// Each call sleeps this long while counted as in flight.
    void set_latency(std::chrono::milliseconds d) { latency_ = d; }
    /// The next `n` calls fail with a retryable error.
    void fail_next(int n) { fail_next_ = n; }
    void set_logprobs_supported(bool v) { logprobs_ = v; }

    Response complete(const Request& req) override;
    std::string identity() const override { return "mock:" + label_; }
    bool supports_logprobs() const override { return logprobs_; }

    std::vector<LedgerEntry> ledger() const;
    std::size_t calls() const;
    std::size_t high_water() const { return high_water_; }

private:
    struct Rule {
        std::vector<std::string> needles;
        std::size_t messages = 0;  // 0 matches any turn count
        Scripted reply;
    };
    std::optional<Scripted> match_rule(const Request& req) const;

    std::map<std::string, Scripted> script_;
    std::vector<Rule> rules_;
    Responder responder_;
    std::chrono::milliseconds latency_{0};
    std::atomic<int> fail_next_{0};
    bool logprobs_ = true;
    std::string label_ = "inline";

    mutable std::mutex mu_;
    std::vector<LedgerEntry> ledger_;
    std::atomic<std::size_t> in_flight_{0};
    std::atomic<std::size_t> high_water_{0};
};

}  // namespace cfeg::chat
