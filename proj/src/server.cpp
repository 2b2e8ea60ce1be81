#include "handjog/server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <openssl/evp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "handjog/error.hpp"
#include "handjog/wire.hpp"

namespace handjog {

namespace ws {

std::string accept_key(std::string_view client_key) {
    static constexpr std::string_view kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
    const std::string in = std::string(client_key) + std::string(kGuid);
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(in.data(), in.size(), md.data(), &len, EVP_sha1(), nullptr) != 1) {
        throw RuntimeFailure("sha1 failed");
    }
    std::array<unsigned char, 64> b64{};
    const int n = EVP_EncodeBlock(b64.data(), md.data(), static_cast<int>(len));
    return std::string(reinterpret_cast<const char*>(b64.data()), static_cast<std::size_t>(n));
}

namespace {

std::string frame_header(Opcode op, std::size_t n, bool masked) {
    std::string h;
    h += static_cast<char>(0x80 | static_cast<std::uint8_t>(op));
    const std::uint8_t mask_bit = masked ? 0x80 : 0x00;
    if (n < 126) {
        h += static_cast<char>(mask_bit | n);
    } else if (n <= 0xffff) {
        h += static_cast<char>(mask_bit | 126);
        h += static_cast<char>((n >> 8) & 0xff);
        h += static_cast<char>(n & 0xff);
    } else {
        h += static_cast<char>(mask_bit | 127);
        for (int i = 7; i >= 0; --i) h += static_cast<char>((static_cast<std::uint64_t>(n) >> (8 * i)) & 0xff);
    }
    return h;
}

}  // namespace

std::string encode_frame(Opcode op, std::string_view payload) {
    return frame_header(op, payload.size(), false) + std::string(payload);
}

std::string encode_masked_frame(Opcode op, std::string_view payload, std::uint32_t mask) {
    std::string out = frame_header(op, payload.size(), true);
    const std::array<std::uint8_t, 4> m{static_cast<std::uint8_t>(mask >> 24), static_cast<std::uint8_t>(mask >> 16),
                                        static_cast<std::uint8_t>(mask >> 8), static_cast<std::uint8_t>(mask)};
    for (auto b : m) out += static_cast<char>(b);
    for (std::size_t i = 0; i < payload.size(); ++i) out += static_cast<char>(payload[i] ^ m[i % 4]);
    return out;
}

std::vector<Message> Decoder::feed(std::string_view bytes) {
    buf_.append(bytes);
    std::vector<Message> out;
    for (;;) {
        if (buf_.size() < 2) break;
        const auto b0 = static_cast<std::uint8_t>(buf_[0]);
        const auto b1 = static_cast<std::uint8_t>(buf_[1]);
        if (b0 & 0x70) throw ValidationError("websocket: reserved bits set");
        const bool fin = b0 & 0x80;
        const auto op = static_cast<Opcode>(b0 & 0x0f);
        const bool masked = b1 & 0x80;
        if (require_mask_ && !masked) throw ValidationError("websocket: client frame not masked");
        std::uint64_t len = b1 & 0x7f;
        std::size_t pos = 2;
        if (len == 126) {
            if (buf_.size() < 4) break;
            len = (static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf_[2])) << 8) |
                  static_cast<std::uint8_t>(buf_[3]);
            pos = 4;
        } else if (len == 127) {
            if (buf_.size() < 10) break;
            len = 0;
            for (int i = 0; i < 8; ++i) len = (len << 8) | static_cast<std::uint8_t>(buf_[2 + i]);
            pos = 10;
        }
        if (len > max_message_) throw ValidationError("websocket: frame too large");
        std::array<std::uint8_t, 4> mask{};
        if (masked) {
            if (buf_.size() < pos + 4) break;
            for (int i = 0; i < 4; ++i) mask[i] = static_cast<std::uint8_t>(buf_[pos + i]);
            pos += 4;
        }
        if (buf_.size() < pos + len) break;
        std::string payload = buf_.substr(pos, len);
        if (masked) {
            for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<char>(payload[i] ^ mask[i % 4]);
        }
        buf_.erase(0, pos + len);

        const bool control = static_cast<std::uint8_t>(op) & 0x08;
        if (control) {
            if (!fin || len > 125) throw ValidationError("websocket: bad control frame");
            out.push_back({op, std::move(payload)});
            continue;
        }
        if (op == Opcode::continuation) {
            if (!partial_op_) throw ValidationError("websocket: continuation without a start frame");
            partial_ += payload;
        } else if (op == Opcode::text || op == Opcode::binary) {
            if (partial_op_) throw ValidationError("websocket: new message inside a fragmented one");
            partial_op_ = op;
            partial_ = std::move(payload);
        } else {
            throw ValidationError("websocket: unknown opcode");
        }
        if (partial_.size() > max_message_) throw ValidationError("websocket: message too large");
        if (fin) {
            out.push_back({*partial_op_, std::move(partial_)});
            partial_.clear();
            partial_op_.reset();
        }
    }
    return out;
}

}  // namespace ws

namespace {

bool send_all(int fd, std::string_view data) {
    while (!data.empty()) {
        const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

/// recv with a timeout; returns bytes read, 0 on EOF, -1 on timeout/error.
ssize_t recv_for(int fd, char* buf, std::size_t n, int timeout_ms) {
    pollfd p{fd, POLLIN, 0};
    const int r = ::poll(&p, 1, timeout_ms);
    if (r <= 0) return -1;
    for (;;) {
        const ssize_t got = ::recv(fd, buf, n, 0);
        if (got < 0 && errno == EINTR) continue;
        return got;
    }
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string_view content_type(const std::filesystem::path& p) {
    static const std::map<std::string, std::string_view> types = {
        {".html", "text/html; charset=utf-8"}, {".js", "text/javascript"}, {".mjs", "text/javascript"},
        {".css", "text/css"},                 {".json", "application/json"}, {".svg", "image/svg+xml"},
        {".png", "image/png"},                {".txt", "text/plain; charset=utf-8"}, {".map", "application/json"},
        {".wasm", "application/wasm"},        {".ico", "image/x-icon"}};
    const auto it = types.find(lower(p.extension().string()));
    return it == types.end() ? std::string_view("application/octet-stream") : it->second;
}

std::string http_response(int status, std::string_view reason, std::string_view type, std::string_view body) {
    std::ostringstream o;
    o << "HTTP/1.1 " << status << ' ' << reason << "\r\n"
      << "Content-Type: " << type << "\r\n"
      << "Content-Length: " << body.size() << "\r\n"
      << "Connection: close\r\n\r\n"
      << body;
    return o.str();
}

}  // namespace

struct Server::Client {
    int fd = -1;
    bool websocket = false;
    bool hello_done = false;
    std::mutex send_mu;
    std::atomic<bool> open{true};
    std::atomic<bool> finished{false};
    std::thread reader;
    std::thread writer;
    Subscription outbound;

    bool send_message(std::string_view msg) {
        std::lock_guard lock(send_mu);
        if (!open) return false;
        const bool ok = websocket ? send_all(fd, ws::encode_frame(ws::Opcode::text, msg))
                                  : send_all(fd, std::string(msg) + "\n");
        if (!ok) open = false;
        return ok;
    }
    bool send_raw(std::string_view bytes) {
        std::lock_guard lock(send_mu);
        const bool ok = send_all(fd, bytes);
        if (!ok) open = false;
        return ok;
    }
};

Server::Server(Runtime& runtime, ServerConfig config) : runtime_(runtime), config_(std::move(config)) {}

Server::~Server() { stop(); }

void Server::start() {
    if (running_) return;
    if (config_.console_dir && !std::filesystem::is_directory(*config_.console_dir)) {
        throw ValidationError("console directory not found: " + config_.console_dir->string());
    }
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw RuntimeFailure(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(config_.port);
    if (::inet_pton(AF_INET, config_.bind_address.c_str(), &addr.sin_addr) != 1) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw ValidationError("bad bind address " + config_.bind_address);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 16) != 0) {
        const std::string why = std::strerror(errno);
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw RuntimeFailure("cannot listen on port " + std::to_string(config_.port) + ": " + why);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
}

void Server::stop() {
    if (!running_.exchange(false)) return;
    if (accept_thread_.joinable()) accept_thread_.join();
    ::close(listen_fd_);
    listen_fd_ = -1;
    std::list<std::shared_ptr<Client>> clients;
    {
        std::lock_guard lock(clients_mu_);
        clients.swap(clients_);
    }
    for (auto& c : clients) {
        c->open = false;
        ::shutdown(c->fd, SHUT_RDWR);
    }
    for (auto& c : clients) {
        if (c->reader.joinable()) c->reader.join();
        ::close(c->fd);
    }
}

std::size_t Server::client_count() const {
    std::lock_guard lock(clients_mu_);
    return static_cast<std::size_t>(
        std::count_if(clients_.begin(), clients_.end(), [](const auto& c) { return !c->finished.load(); }));
}

void Server::reap() {
    std::list<std::shared_ptr<Client>> done;
    {
        std::lock_guard lock(clients_mu_);
        for (auto it = clients_.begin(); it != clients_.end();) {
            if ((*it)->finished) {
                done.push_back(*it);
                it = clients_.erase(it);
            } else {
                ++it;
            }
        }
    }
    for (auto& c : done) {
        if (c->reader.joinable()) c->reader.join();
        ::close(c->fd);
    }
}

void Server::accept_loop() {
    while (running_) {
        pollfd p{listen_fd_, POLLIN, 0};
        const int r = ::poll(&p, 1, 100);
        reap();
        if (r <= 0) continue;
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) continue;
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        auto client = std::make_shared<Client>();
        client->fd = fd;
        std::lock_guard lock(clients_mu_);
        clients_.push_back(client);
        client->reader = std::thread([this, client] { serve_client(client); });
    }
}

void Server::start_writer(const std::shared_ptr<Client>& client) {
    if (client->writer.joinable()) return;
    client->outbound = runtime_.bus().subscribe({Topic::gesture, Topic::jog, Topic::state, Topic::safety});
    client->writer = std::thread([this, client] {
        while (client->open && running_) {
            auto env = client->outbound.pop_for(std::chrono::milliseconds(100));
            if (!env) continue;
            if (auto line = wire::encode_outbound(*env)) {
                if (!client->send_message(*line)) break;
            }
        }
    });
}

void Server::serve_client(const std::shared_ptr<Client>& client) {
    std::string pending;
    std::array<char, 4096> buf{};
    // Browsers speak first (HTTP); line clients may wait for our hello.
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(200);
    while (pending.size() < 4 && pending.find('\n') == std::string::npos) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) break;
        const ssize_t n = recv_for(client->fd, buf.data(), buf.size(), static_cast<int>(left.count()));
        if (n == 0) {
            pending.clear();
            client->open = false;
            break;
        }
        if (n < 0) break;
        pending.append(buf.data(), static_cast<std::size_t>(n));
    }

    if (client->open) {
        if (pending.rfind("GET ", 0) == 0) {
            while (pending.find("\r\n\r\n") == std::string::npos && pending.size() < 16384 && running_) {
                const ssize_t n = recv_for(client->fd, buf.data(), buf.size(), 2000);
                if (n <= 0) break;
                pending.append(buf.data(), static_cast<std::size_t>(n));
            }
            const auto end = pending.find("\r\n\r\n");
            if (end == std::string::npos) {
                client->send_raw(http_response(400, "Bad Request", "text/plain", "bad request\n"));
            } else {
                std::istringstream head(pending.substr(0, end));
                std::string request_line;
                std::getline(head, request_line);
                std::istringstream rl(request_line);
                std::string method, target;
                rl >> method >> target;
                std::map<std::string, std::string> headers;
                std::string h;
                while (std::getline(head, h)) {
                    const auto colon = h.find(':');
                    if (colon == std::string::npos) continue;
                    headers[lower(trim(h.substr(0, colon)))] = trim(h.substr(colon + 1));
                }
                const bool upgrade = lower(headers["upgrade"]).find("websocket") != std::string::npos;
                if (upgrade && !headers["sec-websocket-key"].empty()) {
                    if (headers["sec-websocket-version"] != "13") {
                        client->send_raw("HTTP/1.1 426 Upgrade Required\r\nSec-WebSocket-Version: 13\r\n"
                                         "Content-Length: 0\r\nConnection: close\r\n\r\n");
                    } else {
                        run_websocket(client, pending.substr(end + 4), headers["sec-websocket-key"]);
                    }
                } else {
                    serve_static(client, target);
                }
            }
        } else {
            run_stream(client, std::move(pending));
        }
    }

    client->open = false;
    ::shutdown(client->fd, SHUT_RDWR);
    if (client->writer.joinable()) client->writer.join();
    client->finished = true;
}

bool Server::handle_line(const std::shared_ptr<Client>& client, std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) return true;
    auto reply_error = [&](std::string_view code, std::string_view detail) {
        ++errors_sent_;
        client->send_message(wire::encode_error(code, detail));
    };
    wire::Inbound in;
    try {
        in = wire::parse_inbound(line);
    } catch (const wire::WireError& e) {
        reply_error(e.code(), e.what());
        return true;
    }
    if (const auto* hello = std::get_if<wire::Hello>(&in)) {
        if (hello->proto != wire::kProtocolVersion) {
            reply_error("bad_hello", "unsupported protocol version " + std::to_string(hello->proto) +
                                         "; this server speaks " + std::to_string(wire::kProtocolVersion));
            return false;
        }
        client->hello_done = true;
        start_writer(client);
        return true;
    }
    if (!client->hello_done) {
        reply_error("bad_hello", "the first message must be hello");
        return false;
    }
    const std::int64_t now = runtime_.clock().now_ms();
    if (auto* frame = std::get_if<wire::FrameIn>(&in)) {
        runtime_.bus().publish(Topic::landmarks, FrameMsg{std::move(frame->frame)}, now);
    } else if (const auto* hold = std::get_if<wire::GestureHold>(&in)) {
        runtime_.perception().inject_hold(hold->label, now);
    }
    return true;
}

void Server::run_stream(const std::shared_ptr<Client>& client, std::string pending) {
    if (!client->send_message(wire::encode_server_hello(runtime_.config().sim.dh))) return;
    std::array<char, 4096> buf{};
    for (;;) {
        std::size_t nl;
        while ((nl = pending.find('\n')) != std::string::npos) {
            const std::string line = pending.substr(0, nl);
            pending.erase(0, nl + 1);
            if (!handle_line(client, line)) return;
        }
        if (pending.size() > config_.max_line_bytes) {
            ++errors_sent_;
            client->send_message(wire::encode_error("bad_message", "line too long"));
            return;
        }
        if (!client->open || !running_) return;
        const ssize_t n = ::recv(client->fd, buf.data(), buf.size(), 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return;
        pending.append(buf.data(), static_cast<std::size_t>(n));
    }
}

void Server::run_websocket(const std::shared_ptr<Client>& client, std::string pending, const std::string& key) {
    const std::string response = "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
                                 "Sec-WebSocket-Accept: " + ws::accept_key(key) + "\r\n\r\n";
    if (!client->send_raw(response)) return;
    client->websocket = true;
    if (!client->send_message(wire::encode_server_hello(runtime_.config().sim.dh))) return;

    ws::Decoder decoder(true, config_.max_line_bytes);
    std::array<char, 4096> buf{};
    std::string_view chunk = pending;
    for (;;) {
        std::vector<ws::Message> messages;
        try {
            messages = decoder.feed(chunk);
        } catch (const ValidationError&) {
            client->send_raw(ws::encode_frame(ws::Opcode::close, std::string("\x03\xea", 2)));  // 1002
            return;
        }
        for (auto& m : messages) {
            switch (m.opcode) {
                case ws::Opcode::close:
                    client->send_raw(ws::encode_frame(ws::Opcode::close, m.payload.substr(0, 2)));
                    return;
                case ws::Opcode::ping:
                    client->send_raw(ws::encode_frame(ws::Opcode::pong, m.payload));
                    break;
                case ws::Opcode::text:
                case ws::Opcode::binary: {
                    std::string_view rest = m.payload;
                    while (!rest.empty()) {
                        const auto nl = rest.find('\n');
                        const std::string_view line = rest.substr(0, nl);
                        if (!handle_line(client, line)) return;
                        if (nl == std::string_view::npos) break;
                        rest.remove_prefix(nl + 1);
                    }
                    break;
                }
                default:
                    break;
            }
        }
        if (!client->open || !running_) return;
        ssize_t n;
        do {
            n = ::recv(client->fd, buf.data(), buf.size(), 0);
        } while (n < 0 && errno == EINTR);
        if (n <= 0) return;
        chunk = std::string_view(buf.data(), static_cast<std::size_t>(n));
    }
}

void Server::serve_static(const std::shared_ptr<Client>& client, const std::string& target) {
    if (!config_.console_dir) {
        client->send_raw(http_response(404, "Not Found", "text/plain", "console not enabled\n"));
        return;
    }
    std::string path = target.substr(0, target.find_first_of("?#"));
    if (path.empty() || path.front() != '/') {
        client->send_raw(http_response(400, "Bad Request", "text/plain", "bad path\n"));
        return;
    }
    if (path.back() == '/') path += "index.html";
    const std::filesystem::path rel = std::filesystem::path(path.substr(1)).lexically_normal();
    for (const auto& part : rel) {
        if (part == "..") {
            client->send_raw(http_response(403, "Forbidden", "text/plain", "forbidden\n"));
            return;
        }
    }
    const std::filesystem::path file = *config_.console_dir / rel;
    std::error_code ec;
    if (!std::filesystem::is_regular_file(file, ec)) {
        client->send_raw(http_response(404, "Not Found", "text/plain", "not found\n"));
        return;
    }
    std::ifstream in(file, std::ios::binary);
    std::ostringstream body;
    body << in.rdbuf();
    client->send_raw(http_response(200, "OK", content_type(file), body.str()));
}

LineClient::LineClient(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
        throw RuntimeFailure("cannot resolve " + host);
    }
    fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    const int rc = fd_ < 0 ? -1 : ::connect(fd_, res->ai_addr, res->ai_addrlen);
    ::freeaddrinfo(res);
    if (rc != 0) {
        const std::string why = std::strerror(errno);
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
        throw RuntimeFailure("cannot connect to " + host + ":" + std::to_string(port) + ": " + why);
    }
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

LineClient::~LineClient() { close(); }

void LineClient::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void LineClient::send_raw(std::string_view bytes) {
    if (fd_ < 0 || !send_all(fd_, bytes)) throw RuntimeFailure("send failed");
}

void LineClient::send_line(std::string_view line) { send_raw(std::string(line) + "\n"); }

std::optional<std::string> LineClient::read_line(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        if (const auto nl = buf_.find('\n'); nl != std::string::npos) {
            std::string line = buf_.substr(0, nl);
            buf_.erase(0, nl + 1);
            return line;
        }
        const auto left =
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0 || fd_ < 0) return std::nullopt;
        std::array<char, 4096> tmp{};
        const ssize_t n = recv_for(fd_, tmp.data(), tmp.size(), static_cast<int>(left.count()));
        if (n == 0) return std::nullopt;
        if (n > 0) buf_.append(tmp.data(), static_cast<std::size_t>(n));
    }
}

std::string LineClient::read_some(std::chrono::milliseconds timeout) {
    std::string out = std::move(buf_);
    buf_.clear();
    if (!out.empty() || fd_ < 0) return out;
    std::array<char, 65536> tmp{};
    const ssize_t n = recv_for(fd_, tmp.data(), tmp.size(), static_cast<int>(timeout.count()));
    if (n > 0) out.assign(tmp.data(), static_cast<std::size_t>(n));
    return out;
}

}  // namespace handjog
