#include "cfeg/humaneval_server.hpp"

#include <httplib.h>

#include "cfeg/common.hpp"

namespace cfeg::humaneval {

using nlohmann::json;

namespace {

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void error(httplib::Response& res, int status, const std::string& msg) { reply(res, status, {{"error", msg}}); }

}  // namespace

Server::Server(Store& store, ServerOptions opts)
    : store_(store), opts_(std::move(opts)), http_(std::make_unique<httplib::Server>()) {
    routes();
}

Server::~Server() { stop(); }

void Server::routes() {
    http_->Get(R"(/api/sessions/([^/]+)/tasks)", [this](const httplib::Request& req, httplib::Response& res) {
        auto s = store_.session(req.matches[1]);
        if (!s) return error(res, 404, "unknown session");
        const auto annotator = req.get_param_value("annotator");
        if (annotator.empty()) return error(res, 400, "annotator parameter required");
        if (std::find(s->annotators.begin(), s->annotators.end(), annotator) == s->annotators.end()) {
            return error(res, 404, "unknown annotator");
        }
        reply(res, 200, blinded_tasks(*s, annotator, store_));
    });

    http_->Post(R"(/api/sessions/([^/]+)/annotations)", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            const auto sub = Submission::from_json(json::parse(req.body));
            const auto ack = store_.record(req.matches[1], sub);
            reply(res, 200, {{"ack", true}, {"task_id", ack.task_id}, {"replayed", ack.replayed}});
        } catch (const AnnotationError& e) {
            error(res, e.status(), e.what());
        } catch (const json::exception& e) {
            error(res, 400, std::string("malformed annotation: ") + e.what());
        }
    });

    http_->Get(R"(/api/sessions/([^/]+)/results)", [this](const httplib::Request& req, httplib::Response& res) {
        if (opts_.admin_token.empty() || req.get_header_value("Authorization") != "Bearer " + opts_.admin_token) {
            return error(res, 401, "admin token required");
        }
        auto s = store_.session(req.matches[1]);
        if (!s) return error(res, 404, "unknown session");
        const auto records = store_.annotations(s->id);
        json out = {{"session", s->id}, {"annotations", records.size()}, {"tasks", s->tasks.size()}};
        const auto a = req.get_param_value("a");
        const auto b = req.get_param_value("b");
        try {
            if (!a.empty() && !b.empty()) out["ab"] = {{"a", a}, {"b", b}, {"rows", to_json(ab_results(records, a, b))}};
        } catch (const PreconditionError& e) {
            return error(res, 422, e.what());
        }
        json agreement = json::object();
        try {
            for (const auto& [k, v] : session_agreement(*s, records)) agreement[k] = to_json(v);
        } catch (const PreconditionError& e) {
            agreement = {{"unavailable", e.what()}};
        }
        out["agreement"] = agreement;
        reply(res, 200, out);
    });

    if (!opts_.static_dir.empty()) http_->set_mount_point("/", opts_.static_dir.string());
}

int Server::bind_any(const std::string& host) { return http_->bind_to_any_port(host); }

bool Server::bind(const std::string& host, int port) { return http_->bind_to_port(host, port); }

void Server::serve() { http_->listen_after_bind(); }

void Server::stop() {
    if (http_) http_->stop();
}

bool Server::running() const { return http_->is_running(); }

}  // namespace cfeg::humaneval
