// cfeg: runs the generation and evaluation pipeline stage by stage.
//
// Exit codes: 0 success, 2 config error, 3 backend error, 4 digest mismatch,
// 1 anything else.

#include <CLI11.hpp>

#include <csignal>
#include <iostream>

#include "cfeg/common.hpp"
#include "cfeg/humaneval_server.hpp"
#include "cfeg/pipeline.hpp"

namespace {

cfeg::humaneval::Server* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

void print(const cfeg::pipeline::StageResult& r) {
    std::cout << r.stage << (r.skipped ? " (unchanged, skipped) " : " ") << r.summary.dump() << "\n";
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cfeg::trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cfeg::trim(cur));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cause-aware empathetic generation pipeline"};
    app.require_subcommand(1);
    std::string config_path = "cfeg.ini";
    app.add_option("-c,--config", config_path, "INI config file")->capture_default_str();

    std::vector<std::pair<CLI::App*, std::string>> stages;
    for (const auto& s : cfeg::pipeline::kStages) {
        stages.emplace_back(app.add_subcommand(s, "Run the " + s + " stage"), s);
    }
    auto* run_all = app.add_subcommand("run", "Run every stage in order, skipping unchanged ones");

    auto* serve = app.add_subcommand("serve-humaneval", "Serve the human-evaluation API and annotation client");
    std::string host_override;
    int port_override = -1;
    serve->add_option("--host", host_override, "Bind address (default from config)");
    serve->add_option("--port", port_override, "Port (default from config; 0 picks a free port)");

    auto* session = app.add_subcommand("create-session", "Create a human-evaluation session from predictions");
    cfeg::pipeline::SessionRequest req;
    std::string systems, annotators;
    session->add_option("--id", req.id, "Session id")->required();
    session->add_option("--mode", req.mode, "likert or ab_pair")->required();
    session->add_option("--systems", systems, "Comma-separated strategies (2 for ab_pair)")->required();
    session->add_option("--annotators", annotators, "Comma-separated annotator ids")->required();
    session->add_option("--items", req.items, "Number of dialogue contexts")->capture_default_str();
    session->add_option("--seed", req.seed, "Item sampling and blinding seed")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg = cfeg::config::load(config_path);
        if (*session) {
            req.systems = split_list(systems);
            req.annotators = split_list(annotators);
            std::cout << cfeg::pipeline::create_session(cfg, req).dump() << "\n";
            return 0;
        }
        if (*serve) {
            cfeg::humaneval::Store store(cfg.humaneval_dir);
            if (cfg.admin_token.empty()) std::cerr << "warning: CFEG_ADMIN_TOKEN unset; results endpoint disabled\n";
            cfeg::humaneval::Server server(store, {cfg.admin_token, cfg.static_dir});
            const auto host = host_override.empty() ? cfg.host : host_override;
            const int port = port_override >= 0 ? port_override : cfg.port;
            int bound = port;
            if (port == 0) {
                bound = server.bind_any(host);
            } else if (!server.bind(host, port)) {
                bound = -1;
            }
            if (bound < 0) throw cfeg::ConfigError("cannot bind " + host + ":" + std::to_string(port));
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cout << "listening on http://" << host << ":" << bound << std::endl;
            server.serve();
            return 0;
        }
        cfeg::pipeline::Pipeline pipeline(cfg);
        if (*run_all) {
            for (const auto& s : cfeg::pipeline::kStages) print(pipeline.run(s));
            return 0;
        }
        for (const auto& [cmd, name] : stages) {
            if (*cmd) print(pipeline.run(name));
        }
        return 0;
    } catch (const cfeg::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const cfeg::BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return 3;
    } catch (const cfeg::DigestMismatch& e) {
        std::cerr << "digest mismatch: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
