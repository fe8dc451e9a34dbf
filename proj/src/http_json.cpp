#include "cfeg/http_json.hpp"

#include <httplib.h>

#include "cfeg/common.hpp"

namespace cfeg {

HttpEndpoint HttpEndpoint::parse(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("not a URL: " + url);
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw ConfigError("unsupported URL scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    HttpEndpoint ep;
    if (path_start == std::string::npos) {
        ep.base = url;
        ep.path = "/";
    } else {
        ep.base = url.substr(0, path_start);
        ep.path = url.substr(path_start);
    }
    return ep;
}

nlohmann::json post_json(const HttpEndpoint& ep, const nlohmann::json& body) {
    httplib::Client cli(ep.base);
    const auto secs = ep.timeout.count() / 1000;
    const auto usecs = (ep.timeout.count() % 1000) * 1000;
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!ep.bearer_token.empty()) headers.emplace("Authorization", "Bearer " + ep.bearer_token);

    auto res = cli.Post(ep.path, headers, body.dump(), "application/json");
    if (!res) {
        throw BackendError(ep.base + ep.path + ": " + httplib::to_string(res.error()), true);
    }
    if (res->status == 429 || res->status >= 500) {
        throw BackendError(ep.base + ep.path + ": HTTP " + std::to_string(res->status), true);
    }
    if (res->status < 200 || res->status >= 300) {
        throw BackendError(ep.base + ep.path + ": HTTP " + std::to_string(res->status) + " " + res->body, false);
    }
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(ep.base + ep.path + ": invalid JSON reply: " + e.what(), false);
    }
}

}  // namespace cfeg
