#pragma once

#include <chrono>
#include <string>

#include <json.hpp>

namespace cfeg {

struct HttpEndpoint {
    std::string base;  // scheme://host[:port]
    std::string path;  // starts with '/'
    std::string bearer_token;
    std::chrono::milliseconds timeout{30000};

    /// Splits a full URL; throws ConfigError on anything but http(s).
    static HttpEndpoint parse(const std::string& url);
};

/// POSTs a JSON body and parses the JSON reply. Connection failures, 429 and
/// 5xx are retryable BackendErrors; other non-2xx statuses are not.
nlohmann::json post_json(const HttpEndpoint& ep, const nlohmann::json& body);

}  // namespace cfeg
