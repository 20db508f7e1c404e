#pragma once

#include <memory>
#include <string>

#include "bookforge/service.hpp"

namespace httplib {
class Server;
}

namespace bookforge {

/// HTTP status for an error code (404 NotFound, 409 WrongState, ...).
int http_status_for(ErrorCode code);

/// JSON over HTTP under /v1, backed by a PipelineService. Errors come back
/// as {"error": {"code": ..., "message": ...}}.
class ApiServer {
public:
    explicit ApiServer(PipelineService& service);
    ~ApiServer();

    /// Binds without serving yet. Returns false when the address is taken.
    bool bind(const std::string& host, int port);
    /// Serves until stop(); call after a successful bind().
    void serve();
    void stop();
    int port() const { return port_; }

private:
    PipelineService& service_;
    std::unique_ptr<httplib::Server> server_;
    int port_ = 0;
};

}  // namespace bookforge
