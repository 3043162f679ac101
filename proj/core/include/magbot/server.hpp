#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "magbot/io.hpp"

namespace magbot {

inline constexpr int kProtocolVersion = 1;

struct ServerOptions {
    double speedup = 1.0;           // simulated seconds per real second
    double tick_period = 0.02;      // s of real time between broadcasts
    double nav_cycle_period = 0.25; // s of simulated time per navigation cycle
    double assemble_duration = 5.0; // s, default length of the assemble preset

    /// Throws InvalidSpecError.
    void validate() const;
};

using ClientId = std::uint64_t;

/// Transport-independent protocol server. Clients submit JSON text messages;
/// tick() applies them between simulation steps, answers each with exactly
/// one ack or error, advances the world and queues a state_update for every
/// connected client. All members are thread-safe.
class ServerCore {
public:
    explicit ServerCore(Scenario scenario, ServerOptions options = {});
    ~ServerCore();

    ClientId connect();
    /// Drops the client's queue and releases the field if it held it.
    void disconnect(ClientId id);
    void submit(ClientId id, std::string message);

    /// Applies queued commands, runs `steps` simulation steps (none while
    /// paused) and queues one state_update per client.
    void tick(int steps);
    void tick() { tick(steps_per_tick()); }
    int steps_per_tick() const;

    /// Outgoing messages for a client, oldest first; the queue is emptied.
    std::vector<std::string> take(ClientId id);

    double time() const;
    bool paused() const;
    bool navigating() const;
    std::optional<ClientId> owner() const;
    CoilCommand currents() const;
    World world() const;
    const ServerOptions& options() const { return options_; }

private:
    struct State;
    const ServerOptions options_;
    mutable std::mutex mutex_;
    std::unique_ptr<State> state_;
};

}  // namespace magbot
