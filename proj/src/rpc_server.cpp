#include "comodel/rpc_server.hpp"

#include <boost/asio.hpp>

#include <atomic>
#include <mutex>
#include <thread>
#include <vector>

namespace comodel::rpc {
namespace {

using json = nlohmann::json;
namespace asio = boost::asio;
using tcp = asio::ip::tcp;

constexpr std::size_t kMaxLine = 16 * 1024 * 1024;

json error_response(const json& id, int code, const std::string& message) {
    return {{"jsonrpc", "2.0"}, {"id", id}, {"error", {{"code", code}, {"message", message}}}};
}

std::string correlation_id(const json& id) {
    if (id.is_string()) return id.get<std::string>();
    return id.dump();
}

}  // namespace

std::string Endpoint::handle(std::string_view request) const {
    json req = json::parse(request.begin(), request.end(), nullptr, false);
    if (req.is_discarded()) return error_response(nullptr, kParseError, "Parse error").dump();

    const json id = req.is_object() ? req.value("id", json()) : json();
    if (!req.is_object() || req.value("jsonrpc", "") != "2.0" || !req.contains("method") ||
        !req["method"].is_string() || !(id.is_null() || id.is_string() || id.is_number())) {
        return error_response(id, kInvalidRequest, "Invalid Request").dump();
    }
    const bool notification = !req.contains("id");
    const std::string method = req["method"].get<std::string>();
    const json params = req.value("params", json::object());

    json response;
    if (method == "tools/list") {
        json tools = json::array();
        for (const auto& t : tools_.list()) tools.push_back(tools::to_json(t));
        response = {{"jsonrpc", "2.0"}, {"id", id}, {"result", {{"tools", std::move(tools)}}}};
    } else if (method == "tools/call") {
        if (!params.is_object() || !params.contains("name") || !params["name"].is_string()) {
            response = error_response(id, kInvalidParams, "tools/call requires params.name");
        } else {
            tools::ToolCall call;
            call.id = correlation_id(id);
            call.tool = params["name"].get<std::string>();
            call.params = params.value("arguments", json::object());
            response = {{"jsonrpc", "2.0"}, {"id", id}, {"result", tools::to_json(tools_.call(call))}};
        }
    } else {
        response = error_response(id, kMethodNotFound, "Method not found: " + method);
    }
    return notification ? std::string() : response.dump();
}

// ---------------------------------------------------------------------------------------------

namespace {

class LineSession : public std::enable_shared_from_this<LineSession> {
public:
    LineSession(tcp::socket socket, const Endpoint& endpoint) : socket_(std::move(socket)), endpoint_(endpoint) {}

    void run() { read(); }

    void close() {
        asio::post(socket_.get_executor(), [self = shared_from_this()] {
            boost::system::error_code ec;
            // Reads end; a response already being written still completes.
            self->socket_.shutdown(tcp::socket::shutdown_receive, ec);
        });
    }

private:
    void read() {
        asio::async_read_until(socket_, asio::dynamic_buffer(buffer_, kMaxLine), '\n',
                               [self = shared_from_this()](boost::system::error_code ec, std::size_t n) {
                                   if (ec) return;
                                   std::string line = self->buffer_.substr(0, n - 1);
                                   self->buffer_.erase(0, n);
                                   if (!line.empty() && line.back() == '\r') line.pop_back();
                                   self->respond(line);
                               });
    }

    void respond(const std::string& line) {
        if (line.find_first_not_of(" \t") == std::string::npos) return read();
        out_ = endpoint_.handle(line);
        if (out_.empty()) return read();
        out_ += '\n';
        asio::async_write(socket_, asio::buffer(out_), [self = shared_from_this()](boost::system::error_code ec, std::size_t) {
            if (!ec) self->read();
        });
    }

    tcp::socket socket_;
    const Endpoint& endpoint_;
    std::string buffer_;
    std::string out_;
};

}  // namespace

struct LineServer::Impl {
    explicit Impl(const Endpoint& e) : endpoint(e), acceptor(asio::make_strand(ioc)) {}

    void accept() {
        acceptor.async_accept(asio::make_strand(ioc), [this](boost::system::error_code ec, tcp::socket socket) {
            if (ec) return;
            auto session = std::make_shared<LineSession>(std::move(socket), endpoint);
            {
                std::lock_guard lock(mutex);
                sessions.push_back(session);
            }
            session->run();
            accept();
        });
    }

    const Endpoint& endpoint;
    asio::io_context ioc;
    tcp::acceptor acceptor;
    std::vector<std::thread> threads;
    std::mutex mutex;
    std::vector<std::weak_ptr<LineSession>> sessions;
    bool running = false;
};

LineServer::LineServer(const Endpoint& endpoint) : impl_(std::make_unique<Impl>(endpoint)) {}

LineServer::~LineServer() { stop(); }

unsigned short LineServer::start(const std::string& address, unsigned short port, int threads) {
    auto& d = *impl_;
    try {
        const tcp::endpoint ep(asio::ip::make_address(address), port);
        d.acceptor.open(ep.protocol());
        d.acceptor.set_option(asio::socket_base::reuse_address(true));
        d.acceptor.bind(ep);
        d.acceptor.listen();
    } catch (const boost::system::system_error& e) {
        throw BindError("cannot bind " + address + ":" + std::to_string(port) + ": " + e.what());
    }
    d.accept();
    d.running = true;
    for (int i = 0; i < std::max(1, threads); ++i) d.threads.emplace_back([&d] { d.ioc.run(); });
    return d.acceptor.local_endpoint().port();
}

void LineServer::stop() {
    auto& d = *impl_;
    if (!d.running) return;
    d.running = false;
    asio::post(d.acceptor.get_executor(), [&d] {
        boost::system::error_code ec;
        d.acceptor.close(ec);
    });
    {
        std::lock_guard lock(d.mutex);
        for (auto& w : d.sessions) {
            if (auto s = w.lock()) s->close();
        }
    }
    for (auto& t : d.threads) t.join();
    d.threads.clear();
}

}  // namespace comodel::rpc
