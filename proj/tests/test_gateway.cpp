#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <unistd.h>

#include "shopbot/gateway.hpp"

using namespace shopbot;
using namespace shopbot::gateway;
using namespace std::chrono;
using nlohmann::json;
namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

struct Rig {
    dialog::Engine engine{fixture_bundle(), commerce::fixture_shop(), {11, nullptr}};
    std::shared_ptr<CaptureSink> sink = std::make_shared<CaptureSink>();
    sys_seconds now = sys_days{2026y / October / 12} + 2h;
    std::ostringstream log;
    Gateway gw;

    explicit Rig(GatewayConfig cfg = make_config())
        : gw(engine, std::move(cfg), sink, [this] { return now += 10s; }) {
        gw.set_log(&log);
    }

    static GatewayConfig make_config() {
        GatewayConfig c;
        c.messengerVerifyToken = "s3cret";
        return c;
    }

    json chat(json body) {
        auto r = gw.post_chat(body.dump());
        REQUIRE(r.status == 200);
        return json::parse(r.body);
    }
};

json messenger_event(std::vector<std::pair<std::string, std::string>> items) {
    json messaging = json::array();
    for (auto& [sender, text] : items)
        messaging.push_back({{"sender", {{"id", sender}}}, {"recipient", {{"id", "page"}}},
                             {"message", {{"mid", "m"}, {"text", text}}}});
    return {{"object", "page"}, {"entry", json::array({{{"id", "page"}, {"messaging", messaging}}})}};
}

pt::ptree parse_xml(const std::string& body) {
    std::istringstream in(body);
    pt::ptree tree;
    pt::read_xml(in, tree);
    return tree;
}

std::vector<std::string> xml_messages(const pt::ptree& tree) {
    std::vector<std::string> out;
    for (const auto& [name, node] : tree.get_child("Response"))
        if (name == "Message")
            out.push_back(node.data());
    return out;
}

} // namespace

TEST_CASE("rest chat creates a session and keeps state across turns") {
    Rig rig;
    auto first = rig.chat({{"user_id", "alice"}, {"text", "i want 2 aple juice"}});
    const auto sid = first["session_id"].get<std::string>();
    CHECK_FALSE(sid.empty());
    CHECK(first["quick_replies"] == json::array({"Yes", "No"}));
    CHECK(first["ended"] == false);

    auto second = rig.chat({{"user_id", "alice"}, {"session_id", sid}, {"text", "Yes"}});
    CHECK(second["session_id"] == sid);
    REQUIRE(second.contains("cart"));
    CHECK(second["cart"][0]["product"] == "Apple Juice");
    CHECK(second["cart"][0]["quantity"] == 2);

    auto cart = rig.gw.get_cart(sid);
    CHECK(cart.status == 200);
    auto cj = json::parse(cart.body);
    CHECK(cj["lines"].size() == 1);
    CHECK(cj["lines"][0]["brand"] == "Sunrise");
    CHECK(cj["customer"]["complete"] == false);

    // Each turn leaves one structured log line.
    std::istringstream lines(rig.log.str());
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
        auto j = json::parse(line);
        CHECK(j.contains("intent"));
        CHECK(j.contains("latencyMs"));
        ++n;
    }
    CHECK(n == 2);
}

TEST_CASE("rest chat rejects bad requests without creating sessions") {
    Rig rig;
    for (std::string body : {"not json", "[1,2]", R"({"text":"hi"})", R"({"user_id":"","text":"hi"})",
                             R"({"user_id":"a","text":5})", R"({"user_id":"a","session_id":7,"text":"hi"})"}) {
        INFO(body);
        CHECK(rig.gw.post_chat(body).status == 400);
    }
    CHECK(rig.gw.post_chat(R"({"user_id":"a","session_id":"deadbeef","text":"hi"})").status == 404);
    CHECK(rig.gw.sessions().size() == 0);

    auto sid = rig.chat({{"user_id", "alice"}, {"text", "hi"}})["session_id"].get<std::string>();
    auto stolen = rig.gw.post_chat(json{{"user_id", "mallory"}, {"session_id", sid}, {"text", "hi"}}.dump());
    CHECK(stolen.status == 404);
    CHECK(rig.gw.get_cart("nope").status == 404);
}

TEST_CASE("messenger verification echoes the challenge byte for byte") {
    Rig rig;
    for (std::string challenge : {"1158201444", "hello world", "çhållenge ✓ 挑战", "  padded  "}) {
        auto r = rig.gw.messenger_verify("subscribe", "s3cret", challenge);
        CHECK(r.status == 200);
        CHECK(r.body == challenge);
        CHECK(r.contentType == "text/plain");
    }
    CHECK(rig.gw.messenger_verify("subscribe", "wrong", "x").status == 403);
    CHECK(rig.gw.messenger_verify("unsubscribe", "s3cret", "x").status == 403);
    CHECK(rig.gw.messenger_verify(std::nullopt, "s3cret", "x").status == 403);
    CHECK(rig.gw.messenger_verify("subscribe", std::nullopt, "x").status == 403);

    GatewayConfig open;
    Rig tokenless(open);
    CHECK(tokenless.gw.messenger_verify("subscribe", "", "x").status == 403);
}

TEST_CASE("messenger events become one outbound message each, in order") {
    Rig rig;
    auto r = rig.gw.messenger_receive(
        messenger_event({{"psid-1", "i want 2 apple juice"}, {"psid-1", "yes"}, {"psid-2", "hello"}}).dump());
    CHECK(r.status == 200);
    CHECK(r.body == "EVENT_RECEIVED");
    rig.gw.drain();

    auto out = rig.sink->payloads();
    REQUIRE(out.size() == 3);
    auto p0 = json::parse(out[0]), p1 = json::parse(out[1]), p2 = json::parse(out[2]);
    CHECK(p0["recipient"]["id"] == "psid-1");
    CHECK(p0["message"]["text"].get<std::string>().find("2 × Apple Juice") != std::string::npos);
    REQUIRE(p0["message"].contains("quick_replies"));
    CHECK(p0["message"]["quick_replies"][0]["title"] == "Yes");
    CHECK(p1["message"]["text"].get<std::string>().find("Added 2 × Apple Juice") != std::string::npos);
    CHECK_FALSE(p1["message"].contains("quick_replies"));
    CHECK(p2["recipient"]["id"] == "psid-2");
}

TEST_CASE("messenger delivery retries once") {
    Rig rig;
    rig.sink->fail_next(1);
    rig.gw.messenger_receive(messenger_event({{"u", "hello"}}).dump());
    rig.gw.drain();
    CHECK(rig.sink->payloads().size() == 1);

    rig.sink->fail_next(2);
    rig.gw.messenger_receive(messenger_event({{"u", "where are you"}}).dump());
    rig.gw.drain();
    CHECK(rig.sink->payloads().size() == 1);
    CHECK(rig.log.str().find("\"attempt\":2") != std::string::npos);
}

TEST_CASE("messenger ignores events it cannot use") {
    Rig rig;
    CHECK(rig.gw.messenger_receive("{}").status == 400);
    CHECK(rig.gw.messenger_receive("nope").status == 400);
    json delivery = {{"entry", json::array({{{"messaging", json::array({{{"sender", {{"id", "u"}}},
                                                                          {"delivery", {{"watermark", 1}}}}})}}})}};
    CHECK(rig.gw.messenger_receive(delivery.dump()).status == 200);
    rig.gw.drain();
    CHECK(rig.sink->payloads().empty());
}

TEST_CASE("whatsapp replies are well-formed escaped XML") {
    Rig rig;
    auto r = rig.gw.whatsapp_receive("whatsapp:+60123", "i want 2 aple juice");
    CHECK(r.status == 200);
    CHECK(r.contentType == "application/xml");
    auto msgs = xml_messages(parse_xml(r.body));
    REQUIRE_FALSE(msgs.empty());
    CHECK(msgs[0].find("2 × Apple Juice") != std::string::npos);

    // The same number continues the same conversation.
    auto yes = xml_messages(parse_xml(rig.gw.whatsapp_receive("whatsapp:+60123", "yes").body));
    CHECK(yes[0].find("Added") != std::string::npos);

    // Reply text that needs escaping survives a parser round trip.
    auto steak = rig.gw.whatsapp_receive("whatsapp:+60999", "i want <dragon> & \"steak\"");
    auto steakMsgs = xml_messages(parse_xml(steak.body));
    REQUIRE_FALSE(steakMsgs.empty());

    CHECK(rig.gw.whatsapp_receive(std::nullopt, "hi").status == 400);
    CHECK(rig.gw.whatsapp_receive("x", std::nullopt).status == 400);
}

TEST_CASE("xml escaping") {
    CHECK(xml_escape("a < b & c > \"d\" 'e'") == "a &lt; b &amp; c &gt; &quot;d&quot; &apos;e&apos;");
    for (std::string raw : {std::string("bell\x07"), std::string("bad \xff utf8"), std::string("é ✓ & <x>")}) {
        std::string doc = "<r>" + xml_escape(raw) + "</r>";
        std::istringstream in(doc);
        pt::ptree tree;
        CHECK_NOTHROW(pt::read_xml(in, tree));
    }
    std::string doc = "<r>" + xml_escape("Tom & Jerry's <shop>") + "</r>";
    std::istringstream in(doc);
    pt::ptree tree;
    pt::read_xml(in, tree);
    CHECK(tree.get<std::string>("r") == "Tom & Jerry's <shop>");
}

TEST_CASE("health check") {
    Rig rig;
    auto r = rig.gw.healthz();
    CHECK(r.status == 200);
    auto j = json::parse(r.body);
    CHECK(j["status"] == "ok");
    CHECK(j["bundle"] == fixture_bundle().name);
}

TEST_CASE("config parsing and overrides") {
    auto c = parse_config(R"({"bind":"0.0.0.0:9000","bundle":"data/shop.bundle.json","sheet":"/abs/orders.csv",
                              "messengerVerifyToken":"t","seed":5})",
                          "/etc/shopbot");
    CHECK(c.bindAddress == "0.0.0.0:9000");
    CHECK(c.bundlePath == fs::path("/etc/shopbot/data/shop.bundle.json"));
    CHECK(c.sheetPath == fs::path("/abs/orders.csv"));
    CHECK(c.seed == 5u);
    CHECK(c.outboundMessengerTarget == "capture");

    CHECK_THROWS_AS(parse_config(R"({"colour":"red"})"), ConfigError);
    CHECK_THROWS_AS(parse_config("{"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/gateway.json"), ConfigError);

    apply_env_overrides(c, [](const char* name) -> std::optional<std::string> {
        if (std::string_view(name) == "SHOPBOT_BIND")
            return "127.0.0.1:7000";
        return std::nullopt;
    });
    CHECK(c.bindAddress == "127.0.0.1:7000");
    CHECK(c.messengerVerifyToken == "t");

    CHECK(split_bind("127.0.0.1:8080") == std::pair<std::string, int>{"127.0.0.1", 8080});
    CHECK_THROWS_AS(split_bind("nohost"), ConfigError);
    CHECK_THROWS_AS(split_bind("h:99999"), ConfigError);
}

TEST_CASE("routes over a real socket") {
    const auto ui = fs::temp_directory_path() / ("shopbot-ui-" + std::to_string(::getpid()));
    fs::create_directories(ui);
    std::ofstream(ui / "index.html") << "<html>shop</html>";

    auto cfg = Rig::make_config();
    cfg.uiDir = ui;
    Rig rig(cfg);
    HttpServer server(rig.gw);
    const int port = server.bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    server.start();

    httplib::Client cli("127.0.0.1", port);
    auto page = cli.Get("/");
    REQUIRE(page);
    CHECK(page->status == 200);
    CHECK(page->body.find("shop") != std::string::npos);

    auto chat = cli.Post("/v1/chat", R"({"user_id":"web","text":"i want 1 soy milk"})", "application/json");
    REQUIRE(chat);
    CHECK(chat->status == 200);
    auto sid = json::parse(chat->body)["session_id"].get<std::string>();
    cli.Post("/v1/chat", json{{"user_id", "web"}, {"session_id", sid}, {"text", "yes"}}.dump(), "application/json");
    auto cart = cli.Get("/v1/session/" + sid + "/cart");
    REQUIRE(cart);
    CHECK(json::parse(cart->body)["lines"][0]["product"] == "Soy Milk");

    auto verify = cli.Get("/webhook/messenger?hub.mode=subscribe&hub.verify_token=s3cret&hub.challenge=a%20b%20%C3%A7");
    REQUIRE(verify);
    CHECK(verify->status == 200);
    CHECK(verify->body == "a b ç");
    auto denied = cli.Get("/webhook/messenger?hub.mode=subscribe&hub.verify_token=nope&hub.challenge=x");
    REQUIRE(denied);
    CHECK(denied->status == 403);

    httplib::Params form{{"From", "whatsapp:+601"}, {"Body", "where are you"}};
    auto wa = cli.Post("/webhook/whatsapp", form);
    REQUIRE(wa);
    CHECK(wa->status == 200);
    CHECK_NOTHROW(parse_xml(wa->body));

    auto health = cli.Get("/healthz");
    REQUIRE(health);
    CHECK(health->status == 200);

    server.stop();
    fs::remove_all(ui);
}
