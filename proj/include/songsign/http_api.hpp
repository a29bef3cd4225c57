#pragma once

#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "songsign/error.hpp"
#include "songsign/service.hpp"

namespace songsign {

// 400 validation, 404, 409 conflicts, 423 Busy, 503 NotReady; upstream
// failures 502; everything else 500.
int http_status_for(ErrorCode code);

// {code, message, details}
nlohmann::json error_body(const Error& e);

// REST + server-sent events over a Workbench. Route table in docs/rest-api.md.
class ApiServer {
public:
    explicit ApiServer(std::shared_ptr<Workbench> workbench);
    ~ApiServer();
    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    // Binds without serving; port 0 picks a free port. Returns the port.
    int bind(const std::string& host, int port);
    // Serves until stop(); blocking.
    void run();
    // run() on a background thread.
    void start();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace songsign
