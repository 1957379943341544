#pragma once

// Reset/step session service: newline-delimited JSON over TCP, one engine
// per session, one in-flight request per connection. Protocol version 1;
// unknown fields are ignored, unknown ops rejected.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstring>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "cellsim/json_io.hpp"

namespace cellsim {

inline constexpr int kProtocolVersion = 1;

class Service {
  public:
    Service(const std::string& bind_addr, int port, int max_sessions = 16,
            std::filesystem::path scenario_dir = ".")
        : max_sessions_(max_sessions), scenario_dir_(std::move(scenario_dir)) {
        listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (listen_fd_ < 0) throw std::runtime_error("service: socket() failed");
        int one = 1;
        ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(static_cast<std::uint16_t>(port));
        if (::inet_pton(AF_INET, bind_addr.c_str(), &addr.sin_addr) != 1) {
            ::close(listen_fd_);
            throw std::runtime_error("service: bad bind address " + bind_addr);
        }
        if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
            ::close(listen_fd_);
            throw std::runtime_error("service: cannot bind " + bind_addr + ":" +
                                     std::to_string(port));
        }
        if (::listen(listen_fd_, 16) < 0) {
            ::close(listen_fd_);
            throw std::runtime_error("service: listen() failed");
        }
    }

    ~Service() { stop(); }

    int port() const {
        sockaddr_in addr{};
        socklen_t len = sizeof(addr);
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        return ntohs(addr.sin_port);
    }

    void start() {
        running_ = true;
        accept_thread_ = std::thread([this] { accept_loop(); });
    }

    void stop() {
        if (!running_.exchange(false)) return;
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        if (accept_thread_.joinable()) accept_thread_.join();
        std::vector<std::thread> workers;
        {
            std::lock_guard lock(mutex_);
            workers.swap(workers_);
        }
        for (auto& t : workers)
            if (t.joinable()) t.join();
    }

    /// Serves until the process is interrupted. For CLI use.
    void run_blocking() {
        running_ = true;
        accept_loop();
    }

  private:
    struct Session {
        std::string id;
        std::unique_ptr<Engine> engine;
        bool episode_active = false;
    };

    void accept_loop() {
        while (running_) {
            int fd = ::accept(listen_fd_, nullptr, nullptr);
            if (fd < 0) {
                if (!running_) break;
                continue;
            }
            std::lock_guard lock(mutex_);
            workers_.emplace_back([this, fd] { handle_connection(fd); });
        }
    }

    static void send_line(int fd, const json& msg) {
        std::string line = msg.dump();
        line.push_back('\n');
        std::size_t off = 0;
        while (off < line.size()) {
            ssize_t n = ::send(fd, line.data() + off, line.size() - off, MSG_NOSIGNAL);
            if (n <= 0) return;
            off += static_cast<std::size_t>(n);
        }
    }

    static json error_msg(const std::string& code, const std::string& message,
                          const std::string& session_id = "") {
        json e{{"op", "error"}, {"error", code}, {"message", message}};
        if (!session_id.empty()) e["session_id"] = session_id;
        return e;
    }

    void handle_connection(int fd) {
        Session session;
        std::string buffer;
        char chunk[4096];
        while (running_) {
            auto nl = buffer.find('\n');
            if (nl == std::string::npos) {
                ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
                if (n <= 0) break;
                buffer.append(chunk, static_cast<std::size_t>(n));
                continue;
            }
            std::string line = buffer.substr(0, nl);
            buffer.erase(0, nl + 1);
            if (line.empty()) continue;
            send_line(fd, handle_line(session, line));
        }
        if (!session.id.empty()) release_session();
        ::close(fd);
    }

    json handle_line(Session& session, const std::string& line) {
        json req;
        try {
            req = json::parse(line);
        } catch (const json::exception& e) {
            return error_msg("bad_request", std::string("malformed JSON: ") + e.what());
        }
        if (!req.is_object() || !req.contains("op") || !req["op"].is_string())
            return error_msg("bad_request", "missing op");
        std::string op = req["op"].get<std::string>();
        try {
            if (op == "hello") return handle_hello(session);
            if (session.id.empty())
                return error_msg("no_session", "send hello first");
            if (req.value("session_id", "") != session.id)
                return error_msg("bad_session", "unknown or missing session_id",
                                 session.id);
            if (op == "reset") return handle_reset(session, req);
            if (op == "step") return handle_step(session, req);
            if (op == "close") {
                session.engine.reset();
                session.episode_active = false;
                release_session();
                std::string id = std::move(session.id);
                session.id.clear();
                return json{{"op", "close"}, {"session_id", id}};
            }
            return error_msg("unknown_op", "unknown op '" + op + "'", session.id);
        } catch (const ParseError& e) {
            return error_msg("bad_spec", e.what(), session.id);
        } catch (const ValidationError& e) {
            return error_msg("validation", e.what(), session.id);
        } catch (const std::exception& e) {
            return error_msg("internal", e.what(), session.id);
        }
    }

    json handle_hello(Session& session) {
        if (!session.id.empty())
            return error_msg("bad_request", "session already established", session.id);
        {
            std::lock_guard lock(mutex_);
            if (active_sessions_ >= max_sessions_)
                return error_msg("busy", "session limit reached");
            ++active_sessions_;
        }
        session.id = "s" + std::to_string(next_session_id_++);
        return json{{"op", "hello"},
                    {"session_id", session.id},
                    {"protocol_version", kProtocolVersion}};
    }

    json handle_reset(Session& session, const json& req) {
        if (!req.contains("spec"))
            return error_msg("bad_request", "reset requires 'spec'", session.id);
        EpisodeSpec spec = episode_spec_from_json(req["spec"], scenario_dir_);
        session.engine = std::make_unique<Engine>(std::move(spec));
        KpiFrame obs = session.engine->reset();
        session.episode_active = true;
        return json{{"op", "reset"},
                    {"session_id", session.id},
                    {"observation", frame_to_json(obs)}};
    }

    json handle_step(Session& session, const json& req) {
        if (!session.engine || !session.episode_active)
            return error_msg("no_episode", "reset before stepping", session.id);
        std::optional<Action> action;
        if (auto it = req.find("action"); it != req.end() && !it->is_null())
            action = action_from_json(*it);
        Engine::StepResult res = session.engine->step(action);
        if (res.done) session.episode_active = false;
        return json{{"op", "step"},
                    {"session_id", session.id},
                    {"observation", frame_to_json(res.frame)},
                    {"reward", res.reward},
                    {"done", res.done}};
    }

    void release_session() {
        std::lock_guard lock(mutex_);
        if (active_sessions_ > 0) --active_sessions_;
    }

    int listen_fd_ = -1;
    int max_sessions_;
    std::filesystem::path scenario_dir_;
    std::atomic<bool> running_{false};
    std::atomic<std::uint64_t> next_session_id_{1};
    std::mutex mutex_;
    int active_sessions_ = 0;
    std::vector<std::thread> workers_;
    std::thread accept_thread_;
};

/// Minimal blocking line client, used by tests and scripting examples.
class LineClient {
  public:
    LineClient(const std::string& host, int port) {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd_ < 0) throw std::runtime_error("client: socket() failed");
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(static_cast<std::uint16_t>(port));
        if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
            throw std::runtime_error("client: bad host " + host);
        if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0)
            throw std::runtime_error("client: cannot connect");
    }
    ~LineClient() {
        if (fd_ >= 0) ::close(fd_);
    }

    json request(const json& msg) {
        std::string line = msg.dump();
        line.push_back('\n');
        std::size_t off = 0;
        while (off < line.size()) {
            ssize_t n = ::send(fd_, line.data() + off, line.size() - off, MSG_NOSIGNAL);
            if (n <= 0) throw std::runtime_error("client: send failed");
            off += static_cast<std::size_t>(n);
        }
        return json::parse(read_line());
    }

    std::string read_line() {
        while (true) {
            auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return line;
            }
            char chunk[4096];
            ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
            if (n <= 0) throw std::runtime_error("client: connection closed");
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

  private:
    int fd_ = -1;
    std::string buffer_;
};

}  // namespace cellsim
