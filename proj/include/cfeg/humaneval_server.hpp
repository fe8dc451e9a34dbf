#pragma once

// HTTP front end for the human-evaluation store. Protocol: docs/humaneval_api.md.

#include <filesystem>
#include <memory>
#include <string>

#include "cfeg/humaneval.hpp"

namespace httplib {
class Server;
}

namespace cfeg::humaneval {

struct ServerOptions {
    std::string admin_token;                // required for /results
    std::filesystem::path static_dir;       // annotation client bundle; optional
};

class Server {
public:
    Server(Store& store, ServerOptions opts);
    ~Server();

    /// Binds to an ephemeral port on host and returns it.
    int bind_any(const std::string& host);
    bool bind(const std::string& host, int port);
    /// Blocks until stop().
    void serve();
    void stop();
    bool running() const;

private:
    void routes();

    Store& store_;
    ServerOptions opts_;
    std::unique_ptr<httplib::Server> http_;
};

}  // namespace cfeg::humaneval
