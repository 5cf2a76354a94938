#pragma once

#include "comodel/tool_protocol.hpp"

#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

namespace comodel::rpc {

// JSON-RPC 2.0 error codes.
inline constexpr int kParseError = -32700;
inline constexpr int kInvalidRequest = -32600;
inline constexpr int kMethodNotFound = -32601;
inline constexpr int kInvalidParams = -32602;

/// Dispatches "tools/list" and "tools/call" requests onto a ToolServer. Transport-agnostic.
class Endpoint {
public:
    explicit Endpoint(tools::ToolServer& tools) : tools_(tools) {}

    /// One request document in, one response document out. Notifications (no id) yield "".
    std::string handle(std::string_view request) const;

private:
    tools::ToolServer& tools_;
};

class BindError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Newline-delimited JSON-RPC over TCP: one request per line, one response per line.
class LineServer {
public:
    explicit LineServer(const Endpoint& endpoint);
    ~LineServer();

    LineServer(const LineServer&) = delete;
    LineServer& operator=(const LineServer&) = delete;

    /// Binds and starts serving on background threads. Port 0 picks a free port; returns the bound port.
    unsigned short start(const std::string& address, unsigned short port, int threads = 2);
    /// Stops accepting, lets running handlers finish, and joins the worker threads.
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace comodel::rpc
