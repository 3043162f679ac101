#include "magbot/ws_server.hpp"

#include <atomic>
#include <chrono>
#include <deque>
#include <map>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "magbot/errors.hpp"

namespace magbot {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

class Session : public std::enable_shared_from_this<Session> {
public:
    Session(tcp::socket socket, ServerCore& core, std::map<ClientId, std::shared_ptr<Session>>& registry)
        : ws_(std::move(socket)), core_(core), registry_(registry) {}

    void start() {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
            if (ec) return;
            self->id_ = self->core_.connect();
            self->registry_[self->id_] = self;
            self->read();
        });
    }

    void flush() {
        for (auto& m : core_.take(id_)) outbox_.push_back(std::move(m));
        if (!writing_) write();
    }

    void close() {
        beast::error_code ec;
        beast::get_lowest_layer(ws_).socket().close(ec);
    }

private:
    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return self->drop();
            self->core_.submit(self->id_, beast::buffers_to_string(self->buffer_.data()));
            self->buffer_.consume(self->buffer_.size());
            self->read();
        });
    }

    void write() {
        if (outbox_.empty() || !id_) {
            writing_ = false;
            return;
        }
        writing_ = true;
        ws_.text(true);
        ws_.async_write(asio::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return self->drop();
            self->outbox_.pop_front();
            self->write();
        });
    }

    void drop() {
        if (!id_) return;
        core_.disconnect(id_);
        registry_.erase(id_);
        id_ = 0;
        outbox_.clear();
    }

    websocket::stream<beast::tcp_stream> ws_;
    ServerCore& core_;
    std::map<ClientId, std::shared_ptr<Session>>& registry_;
    beast::flat_buffer buffer_;
    std::deque<std::string> outbox_;
    ClientId id_ = 0;
    bool writing_ = false;
};

}  // namespace

struct WebSocketServer::Impl {
    ServerCore& core;
    asio::io_context io{1};
    tcp::acceptor acceptor{io};
    std::map<ClientId, std::shared_ptr<Session>> sessions;  // touched only on the network thread
    std::thread network;
    std::thread simulation;
    std::atomic<bool> running{false};

    explicit Impl(ServerCore& c) : core(c) {}

    void accept() {
        acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
            if (ec) return;
            std::make_shared<Session>(std::move(socket), core, sessions)->start();
            accept();
        });
    }

    void simulate() {
        using clock = std::chrono::steady_clock;
        const auto period = std::chrono::duration_cast<clock::duration>(
            std::chrono::duration<double>(core.options().tick_period));
        auto next = clock::now();
        while (running) {
            core.tick();
            asio::post(io, [this] {
                for (auto& [id, s] : std::map(sessions)) s->flush();
            });
            next += period;
            const auto now = clock::now();
            if (next < now) next = now;  // fall behind rather than burst
            std::this_thread::sleep_until(next);
        }
    }
};

WebSocketServer::WebSocketServer(ServerCore& core, const std::string& address, unsigned short port)
    : impl_(std::make_unique<Impl>(core)) {
    try {
        const tcp::endpoint ep(asio::ip::make_address(address), port);
        impl_->acceptor.open(ep.protocol());
        impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
        impl_->acceptor.bind(ep);
        impl_->acceptor.listen();
    } catch (const boost::system::system_error& e) {
        throw Error("cannot listen on " + address + ":" + std::to_string(port) + ": " + e.what());
    }
}

WebSocketServer::~WebSocketServer() { stop(); }

unsigned short WebSocketServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void WebSocketServer::start() {
    if (impl_->running.exchange(true)) return;
    impl_->accept();
    impl_->network = std::thread([this] { impl_->io.run(); });
    impl_->simulation = std::thread([this] { impl_->simulate(); });
}

void WebSocketServer::stop() {
    if (!impl_->running.exchange(false)) return;
    if (impl_->simulation.joinable()) impl_->simulation.join();
    asio::post(impl_->io, [this] {
        beast::error_code ec;
        impl_->acceptor.close(ec);
        for (auto& [id, s] : impl_->sessions) s->close();
        impl_->sessions.clear();
        impl_->io.stop();
    });
    if (impl_->network.joinable()) impl_->network.join();
}

}  // namespace magbot
