#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "handjog/pipeline.hpp"

namespace handjog {

namespace ws {

/// Sec-WebSocket-Accept value for a client key.
std::string accept_key(std::string_view client_key);

enum class Opcode : std::uint8_t { continuation = 0, text = 1, binary = 2, close = 8, ping = 9, pong = 10 };

/// One unmasked server frame (FIN set).
std::string encode_frame(Opcode op, std::string_view payload);
/// Masked client frame; used by tests and tools acting as a browser.
std::string encode_masked_frame(Opcode op, std::string_view payload, std::uint32_t mask);

struct Message {
    Opcode opcode = Opcode::text;
    std::string payload;
};

/// Incremental decoder for frames from one peer; reassembles fragments.
class Decoder {
public:
    explicit Decoder(bool require_mask = true, std::size_t max_message = 1 << 20)
        : require_mask_(require_mask), max_message_(max_message) {}

    /// Appends bytes and returns every message completed by them. Throws
    /// ValidationError on a protocol violation.
    std::vector<Message> feed(std::string_view bytes);

private:
    bool require_mask_;
    std::size_t max_message_;
    std::string buf_;
    std::string partial_;
    std::optional<Opcode> partial_op_;
};

}  // namespace ws

struct ServerConfig {
    std::uint16_t port = 0;  // 0 picks a free port
    std::string bind_address = "127.0.0.1";
    /// Static files served to plain HTTP GETs on the same port.
    std::optional<std::filesystem::path> console_dir;
    std::size_t max_line_bytes = 1 << 20;
};

/// Line protocol front end for a Runtime. Each client gets a reader
/// thread and a writer thread fed by its own bus subscription.
class Server {
public:
    Server(Runtime& runtime, ServerConfig config);
    ~Server();

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds and starts accepting. Throws RuntimeFailure if the port is taken.
    void start();
    void stop();

    std::uint16_t port() const { return port_; }
    std::size_t client_count() const;
    std::uint64_t errors_sent() const { return errors_sent_.load(); }

private:
    struct Client;

    void accept_loop();
    void serve_client(const std::shared_ptr<Client>& client);
    void run_stream(const std::shared_ptr<Client>& client, std::string pending);
    void run_websocket(const std::shared_ptr<Client>& client, std::string pending, const std::string& key);
    void serve_static(const std::shared_ptr<Client>& client, const std::string& path);
    /// Returns false when the connection must close.
    bool handle_line(const std::shared_ptr<Client>& client, std::string_view line);
    void start_writer(const std::shared_ptr<Client>& client);
    void reap();

    Runtime& runtime_;
    ServerConfig config_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> running_{false};
    std::thread accept_thread_;
    mutable std::mutex clients_mu_;
    std::list<std::shared_ptr<Client>> clients_;
    std::atomic<std::uint64_t> errors_sent_{0};
};

/// Blocking line client for tests and tools.
class LineClient {
public:
    LineClient(const std::string& host, std::uint16_t port);
    ~LineClient();
    LineClient(const LineClient&) = delete;
    LineClient& operator=(const LineClient&) = delete;

    void send_line(std::string_view line);
    /// Next line, or nullopt on timeout or closed connection.
    std::optional<std::string> read_line(std::chrono::milliseconds timeout);
    void send_raw(std::string_view bytes);
    /// Raw bytes as they arrive (for HTTP and WebSocket tests).
    std::string read_some(std::chrono::milliseconds timeout);
    void close();

private:
    int fd_ = -1;
    std::string buf_;
};

}  // namespace handjog
