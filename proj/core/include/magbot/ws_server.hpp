#pragma once

#include <memory>
#include <string>

#include "magbot/server.hpp"

namespace magbot {

/// WebSocket transport for ServerCore: one text frame per protocol message.
/// A simulation thread ticks the core every tick_period of real time; a
/// network thread accepts viewers and relays their frames.
class WebSocketServer {
public:
    /// Binds immediately; port 0 picks a free port. Throws Error when the
    /// address cannot be bound.
    WebSocketServer(ServerCore& core, const std::string& address, unsigned short port);
    ~WebSocketServer();

    unsigned short port() const;
    /// Starts the simulation and network threads.
    void start();
    /// Stops both threads and closes every connection. Idempotent.
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace magbot
