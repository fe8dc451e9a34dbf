#include "cfeg/chat_backend.hpp"

#include <algorithm>

#include <fstream>
#include <thread>

#include "cfeg/common.hpp"
#include "cfeg/digest.hpp"

namespace cfeg::chat {

using nlohmann::json;

json Request::to_json() const {
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    return {{"model", model}, {"messages", msgs}, {"temperature", temperature}, {"max_tokens", max_tokens},
            {"logprobs", logprobs}};
}

Response parse_response_payload(const json& j) {
    Response r;
    try {
        if (j.contains("text")) {
            r.text = j.at("text").get<std::string>();
            if (j.contains("token_logprobs") && !j.at("token_logprobs").is_null()) {
                r.token_logprobs = j.at("token_logprobs").get<std::vector<double>>();
            }
        } else if (j.contains("choices")) {
            const auto& c = j.at("choices").at(0);
            r.text = c.at("message").at("content").get<std::string>();
            if (c.contains("logprobs") && c.at("logprobs").is_object() && c.at("logprobs").contains("content")) {
                std::vector<double> lp;
                for (const auto& t : c.at("logprobs").at("content")) lp.push_back(t.at("logprob").get<double>());
                r.token_logprobs = std::move(lp);
            }
        } else {
            throw BackendError("model backend reply has neither text nor choices", false);
        }
        if (j.contains("usage") && j.at("usage").is_object()) {
            r.usage.prompt_tokens = j.at("usage").value("prompt_tokens", std::size_t{0});
            r.usage.completion_tokens = j.at("usage").value("completion_tokens", std::size_t{0});
        }
    } catch (const json::exception& e) {
        throw BackendError(std::string("malformed model backend reply: ") + e.what(), false);
    }
    r.usage.calls = 1;
    return r;
}

std::string prompt_digest(const std::vector<Message>& messages) {
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    return sha256_hex(msgs.dump());
}

Response HttpBackend::complete(const Request& req) { return parse_response_payload(post_json(ep_, req.to_json())); }

MockBackend::MockBackend(const std::filesystem::path& path) : label_(path.filename().string()) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read mock script " + path.string());
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto j = json::parse(line);
        Scripted s{j.at("text").get<std::string>(), std::nullopt};
        if (j.contains("token_logprobs")) s.token_logprobs = j.at("token_logprobs").get<std::vector<double>>();
        if (j.contains("contains")) {
            const auto& c = j.at("contains");
            auto needles = c.is_array() ? c.get<std::vector<std::string>>() : std::vector<std::string>{c.get<std::string>()};
            rule(std::move(needles), j.value("messages", std::size_t{0}), std::move(s));
        } else {
            script(j.at("prompt_digest").get<std::string>(), std::move(s));
        }
    }
}

Response MockBackend::complete(const Request& req) {
    const auto now = ++in_flight_;
    for (auto hw = high_water_.load(); now > hw && !high_water_.compare_exchange_weak(hw, now);) {
    }
    struct Leave {
        std::atomic<std::size_t>& n;
        ~Leave() { --n; }
    } leave{in_flight_};

    const auto digest = prompt_digest(req.messages);
    {
        std::lock_guard lock(mu_);
        ledger_.push_back({digest, req.messages.size()});
    }
    if (latency_.count() > 0) std::this_thread::sleep_for(latency_);
    if (fail_next_ > 0 && fail_next_.fetch_sub(1) > 0) throw BackendError("mock: injected failure", true);

    std::optional<Scripted> reply;
    if (auto it = script_.find(digest); it != script_.end()) {
        reply = it->second;
    } else if (auto r = match_rule(req)) {
        reply = std::move(r);
    } else if (responder_) {
        reply = responder_(req);
    }
    if (!reply) {
        if (auto it = script_.find("*"); it != script_.end()) reply = it->second;
    }
    if (!reply) throw BackendError("mock: no scripted reply for prompt " + digest, false);

    Response r;
    r.text = reply->text;
    if (req.logprobs && logprobs_) r.token_logprobs = reply->token_logprobs;
    r.usage.calls = 1;
    return r;
}

std::optional<MockBackend::Scripted> MockBackend::match_rule(const Request& req) const {
    std::string all;
    for (const auto& m : req.messages) {
        all += m.content;
        all += '\n';
    }
    for (const auto& r : rules_) {
        if (r.messages != 0 && r.messages != req.messages.size()) continue;
        const bool hit = std::all_of(r.needles.begin(), r.needles.end(),
                                     [&](const std::string& n) { return all.find(n) != std::string::npos; });
        if (hit) return r.reply;
    }
    return std::nullopt;
}

std::vector<MockBackend::LedgerEntry> MockBackend::ledger() const {
    std::lock_guard lock(mu_);
    return ledger_;
}

std::size_t MockBackend::calls() const {
    std::lock_guard lock(mu_);
    return ledger_.size();
}

}  // namespace cfeg::chat
