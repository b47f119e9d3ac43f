#include "shopbot/gateway.hpp"

#include <csignal>
#include <cstdlib>
#include <pthread.h>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "utf8.hpp"

namespace shopbot::gateway {

using json = nlohmann::json;
using namespace std::chrono;

namespace {

std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

HttpResponse json_response(int status, const json& body) { return {status, "application/json", dump(body)}; }

HttpResponse error_response(int status, std::string message) {
    return json_response(status, {{"error", std::move(message)}});
}

// XML 1.0 has no encoding for most control characters or for malformed
// UTF-8, so both are replaced before escaping.
std::string xml_safe(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t pos = 0; pos < text.size();) {
        auto d = utf8::decode(text, pos);
        pos += d.length;
        char32_t c = d.cp;
        bool allowed = c == 0x9 || c == 0xA || c == 0xD || (c >= 0x20 && c <= 0xD7FF) ||
                       (c >= 0xE000 && c <= 0xFFFD) || (c >= 0x10000 && c <= 0x10FFFF);
        utf8::append(out, allowed ? c : U'�');
    }
    return out;
}

json cart_lines(const std::vector<commerce::CartLine>& lines) {
    json out = json::array();
    for (const auto& l : lines)
        out.push_back({{"product", l.product.name},
                       {"brand", l.product.brand},
                       {"category", l.product.category},
                       {"quantity", l.quantity}});
    return out;
}

} // namespace

std::string xml_escape(std::string_view text) {
    std::string out;
    for (char c : xml_safe(text)) {
        switch (c) {
        case '&':
            out += "&amp;";
            break;
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        case '"':
            out += "&quot;";
            break;
        case '\'':
            out += "&apos;";
            break;
        default:
            out.push_back(c);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Config

GatewayConfig parse_config(std::string_view text, const std::filesystem::path& baseDir) {
    json j;
    try {
        j = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object())
        throw ConfigError("config must be a JSON object");

    GatewayConfig c;
    auto str = [&](const char* key, auto apply) {
        if (auto it = j.find(key); it != j.end()) {
            if (!it->is_string())
                throw ConfigError(std::string("config field '") + key + "' must be a string");
            apply(it->template get<std::string>());
        }
    };
    auto path = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_relative() && !baseDir.empty() ? baseDir / fp : fp;
    };
    for (const auto& [key, value] : j.items())
        if (key != "bind" && key != "bundle" && key != "sheet" && key != "uiDir" &&
            key != "messengerVerifyToken" && key != "outboundMessengerTarget" && key != "seed")
            throw ConfigError("unknown config field '" + key + "'");

    str("bind", [&](std::string v) { c.bindAddress = std::move(v); });
    str("bundle", [&](std::string v) { c.bundlePath = path(v); });
    str("sheet", [&](std::string v) { c.sheetPath = path(v); });
    str("uiDir", [&](std::string v) { c.uiDir = path(v); });
    str("messengerVerifyToken", [&](std::string v) { c.messengerVerifyToken = std::move(v); });
    str("outboundMessengerTarget", [&](std::string v) { c.outboundMessengerTarget = std::move(v); });
    if (auto it = j.find("seed"); it != j.end()) {
        if (!it->is_number_unsigned())
            throw ConfigError("config field 'seed' must be a non-negative integer");
        c.seed = it->get<std::uint64_t>();
    }
    return c;
}

GatewayConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open config file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.parent_path());
}

void apply_env_overrides(GatewayConfig& config, const EnvLookup& env) {
    if (auto v = env("SHOPBOT_BIND"); v && !v->empty())
        config.bindAddress = *v;
    if (auto v = env("SHOPBOT_MESSENGER_VERIFY_TOKEN"); v && !v->empty())
        config.messengerVerifyToken = *v;
}

void apply_env_overrides(GatewayConfig& config) {
    apply_env_overrides(config, [](const char* name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name))
            return std::string(v);
        return std::nullopt;
    });
}

std::pair<std::string, int> split_bind(std::string_view bind) {
    auto colon = bind.rfind(':');
    if (colon == std::string_view::npos || colon == 0)
        throw ConfigError("bind address must look like host:port");
    std::string host(bind.substr(0, colon));
    auto port_text = bind.substr(colon + 1);
    int port = -1;
    try {
        std::size_t used = 0;
        port = std::stoi(std::string(port_text), &used);
        if (used != port_text.size())
            port = -1;
    } catch (const std::exception&) {
        port = -1;
    }
    if (port < 0 || port > 65535)
        throw ConfigError("invalid port in bind address '" + std::string(bind) + "'");
    return {host, port};
}

// ---------------------------------------------------------------------------
// Sinks

void CaptureSink::deliver(const std::string& payloadJson) {
    std::lock_guard lock(mutex_);
    if (failures_ > 0) {
        --failures_;
        throw std::runtime_error("capture sink: injected delivery failure");
    }
    payloads_.push_back(payloadJson);
}

std::vector<std::string> CaptureSink::payloads() const {
    std::lock_guard lock(mutex_);
    return payloads_;
}

void CaptureSink::fail_next(int n) {
    std::lock_guard lock(mutex_);
    failures_ = n;
}

HttpSink::HttpSink(std::string url) {
    constexpr std::string_view scheme = "http://";
    if (!url.starts_with(scheme))
        throw ConfigError("outbound messenger target must be an http:// URL or 'capture'");
    auto slash = url.find('/', scheme.size());
    origin_ = url.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : url.substr(slash);
}

void HttpSink::deliver(const std::string& payloadJson) {
    httplib::Client client(origin_);
    client.set_connection_timeout(2);
    client.set_read_timeout(5);
    auto res = client.Post(path_, payloadJson, "application/json");
    if (!res)
        throw std::runtime_error("outbound delivery failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
        throw std::runtime_error("outbound delivery got HTTP " + std::to_string(res->status));
}

std::shared_ptr<OutboundSink> make_sink(const std::string& target) {
    if (target.empty() || target == "capture")
        return std::make_shared<CaptureSink>();
    return std::make_shared<HttpSink>(target);
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(const dialog::Engine& engine, GatewayConfig config, std::shared_ptr<OutboundSink> sink,
                 Clock clock)
    : engine_(&engine), config_(std::move(config)), sink_(std::move(sink)), clock_(std::move(clock)),
      sessions_(engine), started_(steady_clock::now()), log_(&std::clog) {
    if (!clock_)
        clock_ = [] { return floor<seconds>(system_clock::now()); };
    if (!sink_)
        sink_ = std::make_shared<CaptureSink>();
    worker_ = std::thread([this] { worker(); });
}

Gateway::~Gateway() {
    {
        std::lock_guard lock(queueMutex_);
        stopping_ = true;
    }
    queueCv_.notify_all();
    worker_.join();
}

dialog::TurnResult Gateway::turn(const std::string& sessionId, std::string_view text) {
    const auto t0 = steady_clock::now();
    auto result = sessions_.process(sessionId, text, clock_());
    const auto latency = duration<double, std::milli>(steady_clock::now() - t0).count();
    if (log_) {
        json line = {{"session", sessionId},
                     {"channel", dialog::to_string(result.session.channel)},
                     {"intent", result.trace.intent},
                     {"confidence", result.trace.confidence},
                     {"latencyMs", latency}};
        std::lock_guard lock(logMutex_);
        *log_ << dump(line) << '\n';
    }
    return result;
}

HttpResponse Gateway::post_chat(std::string_view body) {
    json req;
    try {
        req = json::parse(body.begin(), body.end());
    } catch (const json::parse_error&) {
        return error_response(400, "body must be JSON");
    }
    if (!req.is_object())
        return error_response(400, "body must be a JSON object");
    auto user = req.find("user_id");
    if (user == req.end() || !user->is_string() || user->get_ref<const std::string&>().empty())
        return error_response(400, "user_id is required");
    std::string text;
    if (auto t = req.find("text"); t != req.end()) {
        if (!t->is_string())
            return error_response(400, "text must be a string");
        text = t->get<std::string>();
    }
    const auto userId = user->get<std::string>();

    std::string sessionId;
    if (auto sid = req.find("session_id"); sid != req.end() && !sid->is_null()) {
        if (!sid->is_string())
            return error_response(400, "session_id must be a string");
        sessionId = sid->get<std::string>();
        auto existing = sessions_.get(sessionId);
        if (!existing || existing->channel != dialog::Channel::Rest || existing->userKey != userId)
            return error_response(404, "unknown session");
    } else {
        sessionId = sessions_.create(dialog::Channel::Rest, userId);
    }

    auto result = turn(sessionId, text);
    json out = {{"session_id", sessionId},
                {"replies", result.reply.texts},
                {"quick_replies", result.reply.quickReplies},
                {"ended", result.reply.endOfConversation}};
    if (result.reply.cartSnapshot)
        out["cart"] = cart_lines(*result.reply.cartSnapshot);
    return json_response(200, out);
}

HttpResponse Gateway::get_cart(const std::string& sessionId) {
    auto session = sessions_.get(sessionId);
    if (!session)
        return error_response(404, "unknown session");
    const auto& c = session->customer;
    return json_response(200, {{"session_id", sessionId},
                               {"lines", cart_lines(session->cart.lines())},
                               {"customer",
                                {{"name", !c.name.empty()},
                                 {"address", !c.address.empty()},
                                 {"phone", !c.phone.empty()},
                                 {"complete", c.complete()}}}});
}

HttpResponse Gateway::messenger_verify(const std::optional<std::string>& mode,
                                       const std::optional<std::string>& token,
                                       const std::optional<std::string>& challenge) const {
    if (config_.messengerVerifyToken.empty() || mode != "subscribe" || token != config_.messengerVerifyToken ||
        !challenge)
        return {403, "text/plain", "Forbidden"};
    return {200, "text/plain", *challenge};
}

HttpResponse Gateway::messenger_receive(std::string_view body) {
    json req;
    try {
        req = json::parse(body.begin(), body.end());
    } catch (const json::parse_error&) {
        return error_response(400, "body must be JSON");
    }
    auto entries = req.is_object() ? req.find("entry") : req.end();
    if (!req.is_object() || entries == req.end() || !entries->is_array())
        return error_response(400, "body must carry an entry array");

    std::vector<Envelope> accepted;
    for (const auto& entry : *entries) {
        if (!entry.is_object())
            return error_response(400, "entry items must be objects");
        auto messaging = entry.find("messaging");
        if (messaging == entry.end())
            continue;
        if (!messaging->is_array())
            return error_response(400, "messaging must be an array");
        for (const auto& item : *messaging) {
            // Delivery receipts and postbacks carry no text; skip them.
            const json* sender = item.is_object() && item.contains("sender") ? &item["sender"] : nullptr;
            const json* message = item.is_object() && item.contains("message") ? &item["message"] : nullptr;
            if (!sender || !message || !sender->is_object() || !message->is_object())
                continue;
            auto id = sender->find("id");
            auto text = message->find("text");
            if (id == sender->end() || text == message->end() || !text->is_string())
                continue;
            std::string key = id->is_string() ? id->get<std::string>() : id->dump();
            if (key.empty())
                continue;
            accepted.push_back({std::move(key), text->get<std::string>()});
        }
    }
    {
        std::lock_guard lock(queueMutex_);
        for (auto& e : accepted)
            queue_.push_back(std::move(e));
    }
    queueCv_.notify_all();
    return {200, "text/plain", "EVENT_RECEIVED"};
}

void Gateway::worker() {
    std::unique_lock lock(queueMutex_);
    while (true) {
        queueCv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
        if (queue_.empty()) {
            if (stopping_)
                return;
            continue;
        }
        auto env = std::move(queue_.front());
        queue_.pop_front();
        busy_ = true;
        lock.unlock();
        try {
            auto id = sessions_.open(dialog::Channel::Messenger, env.userKey);
            auto result = turn(id, env.text);
            send_messenger(env.userKey, result.reply);
        } catch (const std::exception& e) {
            std::lock_guard log_lock(logMutex_);
            if (log_)
                *log_ << dump({{"error", e.what()}, {"channel", "messenger"}}) << '\n';
        }
        lock.lock();
        busy_ = false;
        idleCv_.notify_all();
    }
}

void Gateway::send_messenger(const std::string& recipient, const dialog::BotReply& reply) {
    std::string text;
    for (const auto& t : reply.texts)
        text += (text.empty() ? "" : "\n\n") + t;
    json message = {{"text", text}};
    if (!reply.quickReplies.empty()) {
        json quick = json::array();
        for (const auto& q : reply.quickReplies)
            quick.push_back({{"content_type", "text"}, {"title", q}, {"payload", q}});
        message["quick_replies"] = quick;
    }
    const auto payload = dump({{"recipient", {{"id", recipient}}}, {"message", message}});
    for (int attempt = 0; attempt < 2; ++attempt) {
        try {
            sink_->deliver(payload);
            return;
        } catch (const std::exception& e) {
            std::lock_guard lock(logMutex_);
            if (log_)
                *log_ << dump({{"error", e.what()}, {"channel", "messenger"}, {"attempt", attempt + 1}}) << '\n';
        }
    }
}

void Gateway::drain() {
    std::unique_lock lock(queueMutex_);
    idleCv_.wait(lock, [&] { return queue_.empty() && !busy_; });
}

HttpResponse Gateway::whatsapp_receive(const std::optional<std::string>& from,
                                       const std::optional<std::string>& text) {
    if (!from || from->empty() || !text)
        return {400, "text/plain", "From and Body are required"};
    auto id = sessions_.open(dialog::Channel::Whatsapp, *from);
    auto result = turn(id, *text);
    std::string xml = "<?xml version=\"1.0\" encoding=\"UTF-8\"?><Response>";
    for (const auto& t : result.reply.texts)
        xml += "<Message>" + xml_escape(t) + "</Message>";
    xml += "</Response>";
    return {200, "application/xml", std::move(xml)};
}

HttpResponse Gateway::healthz() const {
    const auto up = duration_cast<seconds>(steady_clock::now() - started_).count();
    return json_response(200, {{"status", "ok"}, {"bundle", engine_->bundle().name}, {"uptimeSeconds", up}});
}

void Gateway::mount(httplib::Server& server) {
    auto send = [](httplib::Response& res, const HttpResponse& r) {
        res.status = r.status;
        res.set_content(r.body, r.contentType);
    };
    auto param = [](const httplib::Request& req, const char* key) -> std::optional<std::string> {
        if (!req.has_param(key))
            return std::nullopt;
        return req.get_param_value(key);
    };

    server.Post("/v1/chat", [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, post_chat(req.body));
    });
    server.Get(R"(/v1/session/([^/]+)/cart)", [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, get_cart(req.matches[1]));
    });
    server.Get("/webhook/messenger", [this, send, param](const httplib::Request& req, httplib::Response& res) {
        send(res, messenger_verify(param(req, "hub.mode"), param(req, "hub.verify_token"),
                                   param(req, "hub.challenge")));
    });
    server.Post("/webhook/messenger", [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, messenger_receive(req.body));
    });
    server.Post("/webhook/whatsapp", [this, send, param](const httplib::Request& req, httplib::Response& res) {
        send(res, whatsapp_receive(param(req, "From"), param(req, "Body")));
    });
    server.Get("/healthz", [this, send](const httplib::Request&, httplib::Response& res) { send(res, healthz()); });

    if (!config_.uiDir.empty() && std::filesystem::is_directory(config_.uiDir))
        server.set_mount_point("/", config_.uiDir.string());
}

// ---------------------------------------------------------------------------

HttpServer::HttpServer(Gateway& gateway) : server_(std::make_unique<httplib::Server>()) {
    gateway.mount(*server_);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0)
        return server_->bind_to_any_port(host);
    return server_->bind_to_port(host, port) ? port : -1;
}

void HttpServer::run() { server_->listen_after_bind(); }

void HttpServer::start() {
    thread_ = std::thread([this] { run(); });
    server_->wait_until_ready();
}

void HttpServer::stop() {
    server_->stop();
    if (thread_.joinable())
        thread_.join();
}

int serve(const GatewayConfig& config, std::ostream& out) {
    // SIGINT/SIGTERM are taken synchronously by a waiter thread, which
    // stops the server; in-flight messenger work is drained afterwards.
    // Blocked before any thread starts so every thread inherits the mask.
    // A shell's background job inherits SIGINT as ignored, which would
    // discard it before sigwait sees it.
    std::signal(SIGINT, SIG_DFL);
    std::signal(SIGTERM, SIG_DFL);
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    const auto bundle = load_bundle(config.bundlePath);
    const auto shop = commerce::load_shop(commerce::commerce_path_for(config.bundlePath), &bundle);
    commerce::CsvSheetStore sheet(config.sheetPath);
    dialog::Engine engine(bundle, shop, {config.seed, &sheet});
    Gateway gateway(engine, config, make_sink(config.outboundMessengerTarget));
    HttpServer server(gateway);

    auto [host, port] = split_bind(config.bindAddress);
    int bound = server.bind(host, port);
    if (bound < 0) {
        out << "cannot bind " << config.bindAddress << '\n';
        return 2;
    }
    out << "serving " << bundle.name << " on " << host << ':' << bound << std::endl;

    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
    });
    server.run();
    if (waiter.joinable()) {
        pthread_kill(waiter.native_handle(), SIGTERM);
        waiter.join();
    }
    gateway.drain();
    out << "stopped" << std::endl;
    return 0;
}

} // namespace shopbot::gateway
