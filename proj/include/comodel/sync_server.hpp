#pragma once

#include "comodel/rpc_server.hpp"
#include "comodel/sync_hub.hpp"

#include <memory>
#include <string>

namespace comodel::sync {

/// WebSocket listener: "/sync" speaks the SyncHub protocol, "/rpc" carries one JSON-RPC
/// request per text frame. Other paths are refused with HTTP 404.
class WsServer {
public:
    WsServer(SyncHub& hub, const rpc::Endpoint& rpc);
    ~WsServer();

    WsServer(const WsServer&) = delete;
    WsServer& operator=(const WsServer&) = delete;

    /// Port 0 picks a free port; returns the bound port. Throws rpc::BindError.
    unsigned short start(const std::string& address, unsigned short port, int threads = 2);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace comodel::sync
