#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "shopbot/agent_model.hpp"
#include "shopbot/commerce.hpp"
#include "shopbot/nlu.hpp"

namespace shopbot::dialog {

enum class Channel { Rest, Messenger, Whatsapp };

std::string_view to_string(Channel channel);
std::optional<Channel> parse_channel(std::string_view text);

inline constexpr std::string_view kAwaitingConfirmation = "awaiting-item-confirmation";
inline constexpr std::string_view kCollectingPersonalInfo = "collecting-personal-info";

/// How long a spam-terminated session stays closed.
inline constexpr std::chrono::seconds kTerminationCooldown{60};

struct PendingItem {
    commerce::Product product;
    int quantity = 1;
    bool operator==(const PendingItem&) const = default;
};

struct PendingSlot {
    std::string name;  // name, address or phone
    int reprompts = 0;
    bool operator==(const PendingSlot&) const = default;
};

struct RecentMessage {
    std::string text;  // normalized
    commerce::Timestamp at;
    bool operator==(const RecentMessage&) const = default;
};

enum class SessionState { Active, Terminated };

struct Session {
    std::string id;
    Channel channel = Channel::Rest;
    std::string userKey;

    /// Context name -> remaining lifespan in turns.
    std::map<std::string, int, std::less<>> contexts;
    commerce::Cart cart;
    std::optional<PendingItem> pendingItem;
    int confirmReprompts = 0;
    std::vector<PendingSlot> pendingSlots;
    commerce::CustomerDetails customer;

    std::deque<RecentMessage> recentMessages;
    SessionState state = SessionState::Active;
    std::optional<commerce::Timestamp> terminatedAt;

    /// Drives reply-variant choice; part of the session so turns replay.
    std::uint64_t rng = 0;

    bool has_context(std::string_view name) const { return contexts.find(name) != contexts.end(); }
    nlu::ContextSet active_contexts() const;
    bool operator==(const Session&) const = default;
};

struct BotReply {
    std::vector<std::string> texts;
    std::vector<std::string> quickReplies;
    std::optional<std::vector<commerce::CartLine>> cartSnapshot;
    bool endOfConversation = false;

    bool operator==(const BotReply&) const = default;
};

/// One line per cart entry, "2 × Apple Juice".
std::string render_cart(const std::vector<commerce::CartLine>& lines);

struct TurnTrace {
    std::string intent;  // classified intent, or the guard that handled the turn
    double confidence = 0.0;
};

struct TurnResult {
    Session session;
    BotReply reply;
    TurnTrace trace;
};

struct EngineOptions {
    /// Overrides the bundle's randomSeed. With neither set, each new
    /// session draws its seed from std::random_device.
    std::optional<std::uint64_t> seed;
    /// Receives checkout orders. Without one every checkout fails with
    /// the retry reply.
    commerce::SheetStore* sheet = nullptr;
};

class Engine {
public:
    /// Bundle and shop must outlive the engine.
    Engine(const AgentBundle& bundle, const commerce::Shop& shop, EngineOptions options = {});

    Session new_session(std::string id, Channel channel, std::string userKey) const;

    /// Runs one turn. The input session is not modified.
    TurnResult handle_message(const Session& session, std::string_view text,
                              commerce::Timestamp now) const;

    const AgentBundle& bundle() const { return *bundle_; }
    const commerce::Shop& shop() const { return *shop_; }
    const nlu::Classifier& classifier() const { return classifier_; }
    const EngineOptions& options() const { return options_; }

private:
    const AgentBundle* bundle_;
    const commerce::Shop* shop_;
    EngineOptions options_;
    nlu::Classifier classifier_;
};

/// Thread-safe session registry. Turns for one session are serialized;
/// distinct sessions run in parallel.
class SessionStore {
public:
    explicit SessionStore(const Engine& engine) : engine_(&engine) {}

    /// Always creates a new session and makes it the current one for
    /// (channel, userKey).
    std::string create(Channel channel, const std::string& userKey);
    /// Current session for (channel, userKey), created on first use.
    std::string open(Channel channel, const std::string& userKey);

    std::optional<Session> get(const std::string& id) const;
    std::size_t size() const;

    /// Throws std::out_of_range for an unknown id.
    TurnResult process(const std::string& id, std::string_view text, commerce::Timestamp now);

private:
    struct Entry {
        std::mutex turn;
        Session session;
    };

    std::shared_ptr<Entry> entry(const std::string& id) const;
    std::string create_locked(Channel channel, const std::string& userKey);

    const Engine* engine_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, std::shared_ptr<Entry>> sessions_;
    std::map<std::pair<Channel, std::string>, std::string> byUser_;
    std::uint64_t idCounter_ = 0;
    std::uint64_t idSalt_ = 0;
};

} // namespace shopbot::dialog
