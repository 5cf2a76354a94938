#include "comodel/sync_server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <deque>
#include <mutex>
#include <thread>
#include <vector>

namespace comodel::sync {
namespace {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using error_code = boost::system::error_code;

using Socket = websocket::stream<beast::tcp_stream>;

class Connection : public std::enable_shared_from_this<Connection> {
public:
    Connection(tcp::socket socket, SyncHub& hub, const rpc::Endpoint& rpc)
        : ws_(std::move(socket)), hub_(hub), rpc_(rpc) {}

    ~Connection() {
        if (client_) hub_.disconnect(*client_);
    }

    void run() {
        asio::dispatch(ws_.get_executor(), [self = shared_from_this()] { self->read_request(); });
    }

    /// Detaches from the hub so no further wake-ups target this connection.
    void detach() {
        std::lock_guard lock(mutex_);
        if (client_) hub_.disconnect(*client_);
        client_.reset();
    }

    void close() {
        asio::post(ws_.get_executor(), [self = shared_from_this()] {
            error_code ec;
            beast::get_lowest_layer(self->ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
            beast::get_lowest_layer(self->ws_).socket().close(ec);
        });
    }

private:
    void read_request() {
        http::async_read(beast::get_lowest_layer(ws_), buffer_, request_,
                         [self = shared_from_this()](error_code ec, std::size_t) {
                             if (ec) return;
                             self->on_request();
                         });
    }

    void on_request() {
        if (!websocket::is_upgrade(request_) || (request_.target() != "/sync" && request_.target() != "/rpc")) {
            auto res = std::make_shared<http::response<http::string_body>>(http::status::not_found, request_.version());
            res->set(http::field::content_type, "text/plain");
            res->body() = "websocket endpoints: /sync, /rpc\n";
            res->prepare_payload();
            http::async_write(beast::get_lowest_layer(ws_), *res, [self = shared_from_this(), res](error_code, std::size_t) {
                error_code ec;
                beast::get_lowest_layer(self->ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
            });
            return;
        }
        sync_ = request_.target() == "/sync";
        ws_.text(true);
        ws_.async_accept(request_, [self = shared_from_this()](error_code ec) {
            if (ec) return;
            if (self->sync_) self->attach();
            self->read();
        });
    }

    void attach() {
        std::weak_ptr<Connection> weak = shared_from_this();
        auto executor = ws_.get_executor();
        const ClientId id = hub_.connect([weak, executor] {
            asio::post(executor, [weak] {
                if (auto self = weak.lock()) self->pump();
            });
        });
        std::lock_guard lock(mutex_);
        client_ = id;
    }

    // Sends queued hub frames one at a time.
    void pump() {
        if (writing_) return;
        std::optional<std::string> frame;
        {
            std::lock_guard lock(mutex_);
            if (client_) frame = hub_.pop(*client_);
        }
        if (!frame) return;
        writing_ = true;
        out_ = std::move(*frame);
        ws_.async_write(asio::buffer(out_), [self = shared_from_this()](error_code ec, std::size_t) {
            self->writing_ = false;
            if (ec) return self->detach();
            self->pump();
        });
    }

    void read() {
        ws_.async_read(in_, [self = shared_from_this()](error_code ec, std::size_t) {
            if (ec) return self->detach();
            const std::string text = beast::buffers_to_string(self->in_.data());
            self->in_.consume(self->in_.size());
            if (self->sync_) {
                std::optional<ClientId> id;
                {
                    std::lock_guard lock(self->mutex_);
                    id = self->client_;
                }
                if (id) self->hub_.on_client_message(*id, text);
                self->read();
            } else {
                self->answer(text);
            }
        });
    }

    void answer(const std::string& request) {
        rpc_out_.push_back(rpc_.handle(request));
        if (rpc_out_.back().empty()) {
            rpc_out_.pop_back();
            return read();
        }
        ws_.async_write(asio::buffer(rpc_out_.front()), [self = shared_from_this()](error_code ec, std::size_t) {
            self->rpc_out_.pop_front();
            if (!ec) self->read();
        });
    }

    Socket ws_;
    SyncHub& hub_;
    const rpc::Endpoint& rpc_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> request_;
    beast::flat_buffer in_;
    bool sync_ = false;
    bool writing_ = false;
    std::string out_;
    std::deque<std::string> rpc_out_;
    std::mutex mutex_;
    std::optional<ClientId> client_;
};

}  // namespace

struct WsServer::Impl {
    Impl(SyncHub& h, const rpc::Endpoint& r) : hub(h), rpc(r), acceptor(asio::make_strand(ioc)) {}

    void accept() {
        acceptor.async_accept(asio::make_strand(ioc), [this](error_code ec, tcp::socket socket) {
            if (ec) return;
            auto c = std::make_shared<Connection>(std::move(socket), hub, rpc);
            {
                std::lock_guard lock(mutex);
                connections.push_back(c);
            }
            c->run();
            accept();
        });
    }

    SyncHub& hub;
    const rpc::Endpoint& rpc;
    asio::io_context ioc;
    tcp::acceptor acceptor;
    std::vector<std::thread> threads;
    std::mutex mutex;
    std::vector<std::weak_ptr<Connection>> connections;
    bool running = false;
};

WsServer::WsServer(SyncHub& hub, const rpc::Endpoint& rpc) : impl_(std::make_unique<Impl>(hub, rpc)) {}

WsServer::~WsServer() { stop(); }

unsigned short WsServer::start(const std::string& address, unsigned short port, int threads) {
    auto& d = *impl_;
    try {
        const tcp::endpoint ep(asio::ip::make_address(address), port);
        d.acceptor.open(ep.protocol());
        d.acceptor.set_option(asio::socket_base::reuse_address(true));
        d.acceptor.bind(ep);
        d.acceptor.listen();
    } catch (const boost::system::system_error& e) {
        throw rpc::BindError("cannot bind " + address + ":" + std::to_string(port) + ": " + e.what());
    }
    d.accept();
    d.running = true;
    for (int i = 0; i < std::max(1, threads); ++i) d.threads.emplace_back([&d] { d.ioc.run(); });
    return d.acceptor.local_endpoint().port();
}

void WsServer::stop() {
    auto& d = *impl_;
    if (!d.running) return;
    d.running = false;
    asio::post(d.acceptor.get_executor(), [&d] {
        error_code ec;
        d.acceptor.close(ec);
    });
    {
        std::lock_guard lock(d.mutex);
        for (auto& w : d.connections) {
            if (auto c = w.lock()) {
                c->detach();
                c->close();
            }
        }
        d.connections.clear();
    }
    for (auto& t : d.threads) t.join();
    d.threads.clear();
}

}  // namespace comodel::sync
