#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "shopbot/dialog.hpp"

namespace httplib {
class Server;
}

namespace shopbot::gateway {

struct GatewayConfig {
    std::string bindAddress = "127.0.0.1:8080";
    std::filesystem::path bundlePath;
    std::filesystem::path sheetPath = "orders.csv";
    std::filesystem::path uiDir;
    std::string messengerVerifyToken;
    /// "capture" keeps outbound messages in memory; anything else is an
    /// http:// URL that receives them.
    std::string outboundMessengerTarget = "capture";
    std::optional<std::uint64_t> seed;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Relative paths in the file resolve against the file's directory.
GatewayConfig load_config(const std::filesystem::path& path);
GatewayConfig parse_config(std::string_view json, const std::filesystem::path& baseDir = {});

/// SHOPBOT_BIND and SHOPBOT_MESSENGER_VERIFY_TOKEN win over the file.
using EnvLookup = std::function<std::optional<std::string>(const char*)>;
void apply_env_overrides(GatewayConfig& config, const EnvLookup& env);
void apply_env_overrides(GatewayConfig& config);

/// "host:port" -> (host, port). Throws ConfigError.
std::pair<std::string, int> split_bind(std::string_view bind);

// ---------------------------------------------------------------------------
// Outbound messenger delivery

class OutboundSink {
public:
    virtual ~OutboundSink() = default;
    /// Throws on delivery failure.
    virtual void deliver(const std::string& payloadJson) = 0;
};

/// Records payloads in memory. Safe for concurrent use.
class CaptureSink final : public OutboundSink {
public:
    void deliver(const std::string& payloadJson) override;
    std::vector<std::string> payloads() const;
    /// The next `n` deliveries throw, for retry tests.
    void fail_next(int n);

private:
    mutable std::mutex mutex_;
    std::vector<std::string> payloads_;
    int failures_ = 0;
};

class HttpSink final : public OutboundSink {
public:
    explicit HttpSink(std::string url);
    void deliver(const std::string& payloadJson) override;

private:
    std::string origin_;
    std::string path_;
};

std::shared_ptr<OutboundSink> make_sink(const std::string& target);

// ---------------------------------------------------------------------------

struct HttpResponse {
    int status = 200;
    std::string contentType = "application/json";
    std::string body;
};

std::string xml_escape(std::string_view text);

/// Channel surfaces over one engine. Route handlers are plain member
/// functions so they can be exercised without a socket.
class Gateway {
public:
    using Clock = std::function<commerce::Timestamp()>;

    Gateway(const dialog::Engine& engine, GatewayConfig config, std::shared_ptr<OutboundSink> sink,
            Clock clock = {});
    ~Gateway();

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    HttpResponse post_chat(std::string_view body);
    HttpResponse get_cart(const std::string& sessionId);
    HttpResponse messenger_verify(const std::optional<std::string>& mode,
                                  const std::optional<std::string>& token,
                                  const std::optional<std::string>& challenge) const;
    HttpResponse messenger_receive(std::string_view body);
    HttpResponse whatsapp_receive(const std::optional<std::string>& from,
                                  const std::optional<std::string>& text);
    HttpResponse healthz() const;

    /// Blocks until every queued messenger event has been handled.
    void drain();

    /// Registers every route, plus the static UI when configured.
    void mount(httplib::Server& server);

    dialog::SessionStore& sessions() { return sessions_; }
    const GatewayConfig& config() const { return config_; }
    /// One JSON line per turn goes here; null disables logging.
    void set_log(std::ostream* log) { log_ = log; }

private:
    struct Envelope {
        std::string userKey;
        std::string text;
    };

    dialog::TurnResult turn(const std::string& sessionId, std::string_view text);
    void worker();
    void send_messenger(const std::string& recipient, const dialog::BotReply& reply);

    const dialog::Engine* engine_;
    GatewayConfig config_;
    std::shared_ptr<OutboundSink> sink_;
    Clock clock_;
    dialog::SessionStore sessions_;
    std::chrono::steady_clock::time_point started_;

    std::mutex logMutex_;
    std::ostream* log_;

    std::mutex queueMutex_;
    std::condition_variable queueCv_;
    std::condition_variable idleCv_;
    std::deque<Envelope> queue_;
    bool busy_ = false;
    bool stopping_ = false;
    std::thread worker_;
};

/// Owns an httplib server bound to a gateway.
class HttpServer {
public:
    explicit HttpServer(Gateway& gateway);
    ~HttpServer();

    /// Port 0 picks a free port. Returns the bound port, or -1.
    int bind(const std::string& host, int port);
    void run();    // blocks until stop()
    void start();  // run() on a background thread
    void stop();

private:
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
};

/// Loads everything named by the config and serves until interrupted.
int serve(const GatewayConfig& config, std::ostream& out);

} // namespace shopbot::gateway
