#include "shopbot/dialog.hpp"

#include <algorithm>
#include <charconv>
#include <random>
#include <set>

namespace shopbot::dialog {

using namespace std::chrono;
using commerce::Timestamp;

std::string_view to_string(Channel channel) {
    switch (channel) {
    case Channel::Rest:
        return "rest";
    case Channel::Messenger:
        return "messenger";
    case Channel::Whatsapp:
        return "whatsapp";
    }
    return "rest";
}

std::optional<Channel> parse_channel(std::string_view text) {
    for (auto c : {Channel::Rest, Channel::Messenger, Channel::Whatsapp})
        if (to_string(c) == text)
            return c;
    return std::nullopt;
}

nlu::ContextSet Session::active_contexts() const {
    nlu::ContextSet out;
    for (const auto& [name, lifespan] : contexts)
        out.insert(name);
    return out;
}

std::string render_cart(const std::vector<commerce::CartLine>& lines) {
    std::string out;
    for (const auto& line : lines) {
        if (!out.empty())
            out += '\n';
        out += std::to_string(line.quantity) + " × " + line.product.name;
    }
    return out;
}

namespace {

constexpr std::string_view kTerminationNotice =
    "This conversation has been closed because of too many messages. Please try again in a minute.";
constexpr std::string_view kRepeatPrefix = "You just asked that. ";
constexpr std::string_view kLanguageNotice =
    "Sorry, I can only chat in English for now. Could you ask again in English?";

// Words that may surround a product name without being part of it.
const std::set<std::string, std::less<>> kFillerWords = {
    "a", "an", "the", "some", "of", "me", "for", "pack", "packs", "bottle", "bottles", "please",
};

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::string fill(std::string_view tmpl, const std::map<std::string, std::string>& values) {
    std::string out;
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            auto close = tmpl.find('}', i);
            if (close != std::string_view::npos) {
                auto it = values.find(std::string(tmpl.substr(i + 1, close - i - 1)));
                if (it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(tmpl[i++]);
    }
    return out;
}

std::string trim(std::string_view s) {
    const auto ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

std::string capitalized(std::string_view word) {
    std::string out(word);
    if (!out.empty() && out[0] >= 'a' && out[0] <= 'z')
        out[0] = static_cast<char>(out[0] - 'a' + 'A');
    return out;
}

std::string describe_intervals(const std::vector<commerce::Interval>& slots) {
    std::string out;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (i)
            out += i + 1 == slots.size() ? " and " : ", ";
        out += commerce::format_clock(slots[i].open) + "–" + commerce::format_clock(slots[i].close);
    }
    return out;
}

struct HandlerFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Turn {
public:
    Turn(const Engine& engine, const Session& session, std::string_view text, Timestamp now)
        : engine_(engine), bundle_(engine.bundle()), shop_(engine.shop()), s_(session), raw_(text),
          now_(now) {}

    TurnResult run();

private:
    // pipeline stages
    bool spam_guard(const std::string& normalized);
    void dispatch(const nlu::IntentMatch& match);
    void guard_pending_item(const std::string& action, bool wasPending);
    void fill_slot();
    void finish();

    // handlers
    void act_welcome();
    void act_fallback();
    void act_find_products(const nlu::IntentMatch& m);
    void act_order_taking(const nlu::IntentMatch& m, const Intent& intent);
    void act_item_confirm(const Intent& intent);
    void act_item_decline(const Intent& intent);
    void act_cart_check(const Intent& intent);
    void act_order_cancel(const nlu::IntentMatch& m, const Intent& intent);
    void act_checkout(const Intent& intent);
    void act_faq(const Intent& intent);
    void act_hours(const nlu::IntentMatch& m, const Intent& intent);
    void act_contact(const Intent& intent);
    void act_location(const Intent& intent);

    void finalize_order();
    void abandon_slots();

    // helpers
    const std::string& pick(const std::vector<std::string>& variants);
    void say(std::string text) { reply_.texts.push_back(std::move(text)); }
    void activate(std::string_view context, int lifespan);
    void deactivate(std::string_view context);
    void clear_pending_item();
    int lifespan_for(std::string_view context, int fallback) const;
    const Intent* intent_by_action(std::string_view action) const;
    std::string confirm_question() const;
    std::string slot_prompt(std::string_view slot) const;
    std::string residual_text(const nlu::IntentMatch& m, const Intent& intent) const;
    void snapshot_cart() { reply_.cartSnapshot = s_.cart.lines(); }

    const Engine& engine_;
    const AgentBundle& bundle_;
    const commerce::Shop& shop_;
    Session s_;
    std::string raw_;
    Timestamp now_;
    nlu::Utterance utt_;
    BotReply reply_;
    TurnTrace trace_;
    std::set<std::string, std::less<>> refreshed_;
};

TurnResult Turn::run() {
    if (s_.state == SessionState::Terminated) {
        if (s_.terminatedAt && now_ - *s_.terminatedAt < kTerminationCooldown) {
            BotReply notice{{std::string(kTerminationNotice)}, {}, std::nullopt, true};
            return {s_, std::move(notice), {"terminated", 0.0}};
        }
        Session fresh;
        fresh.id = s_.id;
        fresh.channel = s_.channel;
        fresh.userKey = s_.userKey;
        fresh.rng = s_.rng;
        s_ = std::move(fresh);
    }

    utt_ = nlu::normalize(raw_);
    const std::string normalized = utt_.joined();
    const bool repeated = !normalized.empty() && !s_.recentMessages.empty() &&
                          s_.recentMessages.back().text == normalized;
    if (spam_guard(normalized))
        return {std::move(s_), std::move(reply_), std::move(trace_)};

    if (!s_.pendingSlots.empty() && s_.has_context(kCollectingPersonalInfo)) {
        trace_ = {"slot:" + s_.pendingSlots.front().name, 1.0};
        fill_slot();
        finish();
        return {std::move(s_), std::move(reply_), std::move(trace_)};
    }

    if (nlu::detect_unsupported_language(raw_) == nlu::LanguageSupport::Unsupported) {
        trace_ = {"language-guard", 0.0};
        say(std::string(kLanguageNotice));
        guard_pending_item("", s_.pendingItem.has_value());
        finish();
        return {std::move(s_), std::move(reply_), std::move(trace_)};
    }

    auto match = engine_.classifier().classify(utt_, s_.active_contexts());
    trace_ = {match.intent, match.confidence};

    const Session before = s_;
    const bool wasPending = s_.pendingItem.has_value();
    std::string action;
    try {
        dispatch(match);
        if (const auto* intent = bundle_.intent(match.intent))
            action = intent->action;
    } catch (const std::exception&) {
        // Handler failures surface as the fallback reply; only guard state
        // from this turn survives.
        s_ = before;
        reply_ = {};
        refreshed_.clear();
        act_fallback();
    }
    guard_pending_item(action, wasPending);

    if (repeated && !reply_.texts.empty())
        reply_.texts.front().insert(0, kRepeatPrefix);
    finish();
    return {std::move(s_), std::move(reply_), std::move(trace_)};
}

bool Turn::spam_guard(const std::string& normalized) {
    const auto& cfg = bundle_.config;
    s_.recentMessages.push_back({normalized, now_});
    const auto keep = static_cast<std::size_t>(std::max({cfg.spamBurstCount, cfg.spamRepeatCount, 1}));
    while (s_.recentMessages.size() > keep)
        s_.recentMessages.pop_front();

    const auto window = seconds{cfg.spamBurstWindowSeconds};
    const auto burst = std::count_if(s_.recentMessages.begin(), s_.recentMessages.end(),
                                     [&](const RecentMessage& m) { return now_ - m.at < window; });

    bool repeat = false;
    const auto need = static_cast<std::size_t>(cfg.spamRepeatCount);
    if (cfg.spamRepeatCount > 0 && s_.recentMessages.size() >= need)
        repeat = std::all_of(s_.recentMessages.end() - static_cast<std::ptrdiff_t>(need),
                             s_.recentMessages.end(),
                             [&](const RecentMessage& m) { return m.text == normalized; });

    if (burst < cfg.spamBurstCount && !repeat)
        return false;

    s_.state = SessionState::Terminated;
    s_.terminatedAt = now_;
    s_.contexts.clear();
    s_.pendingItem.reset();
    s_.confirmReprompts = 0;
    s_.pendingSlots.clear();
    reply_ = {{std::string(kTerminationNotice)}, {}, std::nullopt, true};
    trace_ = {"spam-guard", 0.0};
    return true;
}

void Turn::dispatch(const nlu::IntentMatch& match) {
    if (match.is_fallback())
        return act_fallback();
    if (match.intent == kWelcomeIntent)
        return act_welcome();

    const Intent* intent = bundle_.intent(match.intent);
    if (!intent)
        throw HandlerFailure("classified an intent the bundle does not define");
    const auto& action = intent->action;
    if (action == "product.find")
        act_find_products(match);
    else if (action == "order.take")
        act_order_taking(match, *intent);
    else if (action == "order.confirm")
        act_item_confirm(*intent);
    else if (action == "order.decline")
        act_item_decline(*intent);
    else if (action == "cart.check")
        act_cart_check(*intent);
    else if (action == "order.cancel")
        act_order_cancel(match, *intent);
    else if (action == "checkout.collect")
        act_checkout(*intent);
    else if (action == "faq.answer")
        act_faq(*intent);
    else if (action == "business.hours")
        act_hours(match, *intent);
    else if (action == "business.contact")
        act_contact(*intent);
    else if (action == "business.location")
        act_location(*intent);
    else
        throw HandlerFailure("no handler for action '" + action + "'");
}

// A turn that leaves a pending confirmation unresolved costs one reprompt.
void Turn::guard_pending_item(const std::string& action, bool wasPending) {
    if (!wasPending || !s_.pendingItem || action == "order.confirm" || action == "order.decline" ||
        action == "checkout.collect")
        return;
    ++s_.confirmReprompts;
    if (s_.confirmReprompts > bundle_.config.repromptLimit) {
        clear_pending_item();
        if (trace_.intent == kFallbackIntent)
            reply_.texts.clear();
        reply_.quickReplies.clear();
        say("Let's leave that item for now. If you need a hand, call us at " + shop_.business.phone + ".");
        return;
    }
    activate(kAwaitingConfirmation, lifespan_for(kAwaitingConfirmation, 2));
    if (action != "order.take")
        say("Please answer yes or no: " + confirm_question());
    reply_.quickReplies = {"Yes", "No"};
}

void Turn::fill_slot() {
    auto& slot = s_.pendingSlots.front();
    const std::string value = trim(raw_);
    bool ok = slot.name == "phone" ? commerce::valid_phone(value) : !utt_.tokens.empty();
    if (ok) {
        if (slot.name == "name")
            s_.customer.name = value;
        else if (slot.name == "address")
            s_.customer.address = value;
        else
            s_.customer.phone = value;
        s_.pendingSlots.erase(s_.pendingSlots.begin());
        if (s_.pendingSlots.empty()) {
            deactivate(kCollectingPersonalInfo);
            finalize_order();
            return;
        }
        activate(kCollectingPersonalInfo, lifespan_for(kCollectingPersonalInfo, 5));
        say(slot_prompt(s_.pendingSlots.front().name));
        return;
    }

    ++slot.reprompts;
    if (slot.reprompts > bundle_.config.repromptLimit)
        return abandon_slots();
    activate(kCollectingPersonalInfo, lifespan_for(kCollectingPersonalInfo, 5));
    say(slot.name == "phone" ? "That doesn't look like a phone number. Please include at least 7 digits."
                             : "Sorry, I didn't catch that.");
    say(slot_prompt(slot.name));
}

void Turn::abandon_slots() {
    s_.pendingSlots.clear();
    deactivate(kCollectingPersonalInfo);
    say("Let's pause the checkout. Your cart is saved, so say \"checkout\" when you're ready, or call us at " +
        shop_.business.phone + ".");
}

void Turn::finish() {
    for (auto it = s_.contexts.begin(); it != s_.contexts.end();) {
        if (!refreshed_.contains(it->first) && --it->second <= 0)
            it = s_.contexts.erase(it);
        else
            ++it;
    }
    if (s_.pendingItem && !s_.has_context(kAwaitingConfirmation))
        clear_pending_item();
    if (!s_.pendingItem)
        s_.contexts.erase(std::string(kAwaitingConfirmation));
    if (!s_.pendingSlots.empty() && !s_.has_context(kCollectingPersonalInfo))
        s_.pendingSlots.clear();
    if (s_.pendingSlots.empty())
        s_.contexts.erase(std::string(kCollectingPersonalInfo));
    if (reply_.texts.empty())
        act_fallback();
}

void Turn::act_welcome() { say(pick(bundle_.welcome.responses)); }

void Turn::act_fallback() { say(pick(bundle_.fallback.responses)); }

void Turn::act_find_products(const nlu::IntentMatch& m) {
    std::optional<std::string_view> brand;
    std::optional<std::string_view> category;
    for (const auto& e : m.entities) {
        if (e.entityType == "Brand" && !brand)
            brand = e.canonical;
        else if (e.entityType == "Category" && !category)
            category = e.canonical;
    }
    const Intent* intent = bundle_.intent(m.intent);
    if (!brand && !category) {
        if (const auto* p = m.param("product")) {
            if (const auto* product = shop_.catalog.find(p->canonical)) {
                say("Yes, we have " + product->name + " by " + product->brand + " (" + product->category + ").");
                return;
            }
        }
        const auto* spec = intent ? intent->parameter("brand") : nullptr;
        say(spec && !spec->reprompt.empty() ? spec->reprompt : "Which brand or category are you looking for?");
        std::vector<std::string> categories;
        for (const auto& p : shop_.catalog.products)
            if (std::find(categories.begin(), categories.end(), p.category) == categories.end())
                categories.push_back(p.category);
        std::string list;
        for (std::size_t i = 0; i < categories.size(); ++i)
            list += (i ? ", " : "") + categories[i];
        say("We carry " + list + ".");
        return;
    }

    auto found = commerce::find_products(shop_.catalog, brand, category);
    if (found.empty()) {
        say("Sorry, we don't carry anything matching that right now.");
        return;
    }
    say(intent ? pick(intent->responses) : "Here's what I found:");
    std::string list;
    for (const auto& p : found)
        list += (list.empty() ? "" : "\n") + p.name + " (" + p.brand + ", " + p.category + ")";
    say(list);
}

void Turn::act_order_taking(const nlu::IntentMatch& m, const Intent& intent) {
    int quantity = 1;
    if (const auto* q = m.param("quantity")) {
        const auto& text = q->canonical;
        long long value = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc{} || ptr != text.data() + text.size() || value < 1 || value > 999) {
            say("Please order a quantity between 1 and 999.");
            return;
        }
        quantity = static_cast<int>(value);
    }

    const commerce::Product* product = nullptr;
    if (const auto* p = m.param("product")) {
        product = shop_.catalog.find(p->canonical);
        if (!product) {
            say("Sorry, " + p->canonical + " isn't available in our shop right now.");
            return;
        }
    } else {
        auto residual = residual_text(m, intent);
        if (residual.empty()) {
            const auto* spec = intent.parameter("product");
            say(spec && !spec->reprompt.empty() ? spec->reprompt : "Which product would you like to order?");
            return;
        }
        auto hit = commerce::resolve_product(shop_.catalog, residual, bundle_.config.fuzzyThreshold);
        if (!hit) {
            say("Sorry, the product you want isn't available in our shop: \"" + residual + "\".");
            return;
        }
        product = hit->product;
    }

    s_.pendingItem = PendingItem{*product, quantity};
    activate(kAwaitingConfirmation, lifespan_for(kAwaitingConfirmation, 2));
    say(fill(pick(intent.responses), {{"quantity", std::to_string(quantity)}, {"product", product->name}}));
    reply_.quickReplies = {"Yes", "No"};
}

void Turn::act_item_confirm(const Intent& intent) {
    if (!s_.pendingItem) {
        say("There's nothing waiting for confirmation. What would you like to order?");
        return;
    }
    const auto item = *s_.pendingItem;
    s_.cart.add(item.product, item.quantity);
    clear_pending_item();
    say("Added " + std::to_string(item.quantity) + " × " + item.product.name + " to your cart.");
    say(pick(intent.responses));
    snapshot_cart();
}

void Turn::act_item_decline(const Intent& intent) {
    clear_pending_item();
    say(pick(intent.responses));
}

void Turn::act_cart_check(const Intent& intent) {
    snapshot_cart();
    if (s_.cart.empty()) {
        say("Your cart is empty. Tell me what you'd like to order.");
        return;
    }
    say(pick(intent.responses));
    say(render_cart(s_.cart.lines()));
}

void Turn::act_order_cancel(const nlu::IntentMatch& m, const Intent& intent) {
    const auto* p = m.param("product");
    if (!p) {
        const auto* spec = intent.parameter("product");
        say(spec && !spec->reprompt.empty() ? spec->reprompt : "Which item should I remove from your cart?");
        return;
    }
    if (!s_.cart.remove(p->canonical)) {
        say(p->canonical + " isn't in your cart.");
        return;
    }
    say("Removed " + p->canonical + " from your cart.");
    say(pick(intent.responses));
    snapshot_cart();
}

void Turn::act_checkout(const Intent& intent) {
    clear_pending_item();
    if (s_.cart.empty()) {
        say("Your cart is empty, so there's nothing to check out yet. What would you like to order?");
        return;
    }
    s_.pendingSlots.clear();
    for (const auto& p : intent.parameters) {
        if (!p.required || !p.entityType.empty())
            continue;
        const std::string* current = p.name == "name"      ? &s_.customer.name
                                     : p.name == "address" ? &s_.customer.address
                                     : p.name == "phone"   ? &s_.customer.phone
                                                           : nullptr;
        if (current && current->empty())
            s_.pendingSlots.push_back({p.name, 0});
    }
    // The three details are mandatory whatever the bundle declares.
    for (std::string_view slot : {"name", "address", "phone"}) {
        const auto& value = slot == "name" ? s_.customer.name : slot == "address" ? s_.customer.address
                                                                                  : s_.customer.phone;
        bool listed = std::any_of(s_.pendingSlots.begin(), s_.pendingSlots.end(),
                                  [&](const PendingSlot& ps) { return ps.name == slot; });
        if (value.empty() && !listed)
            s_.pendingSlots.push_back({std::string(slot), 0});
    }
    if (s_.pendingSlots.empty()) {
        finalize_order();
        return;
    }
    activate(kCollectingPersonalInfo, lifespan_for(kCollectingPersonalInfo, 5));
    say(slot_prompt(s_.pendingSlots.front().name));
}

void Turn::finalize_order() {
    if (s_.cart.empty()) {
        say("Your cart is empty, so there's nothing to check out yet. What would you like to order?");
        return;
    }
    const Intent* intent = intent_by_action("checkout.collect");
    commerce::OrderRecord order{{}, floor<seconds>(now_), std::string(to_string(s_.channel)), s_.customer,
                                s_.cart.lines()};
    commerce::AppendReceipt receipt;
    try {
        if (!engine_.options().sheet)
            throw commerce::SheetError("no order sheet configured");
        receipt = engine_.options().sheet->append(order);
    } catch (const std::exception&) {
        say("Sorry, we couldn't save your order just now. Your cart and details are kept, so say "
            "\"checkout\" to try again.");
        return;
    }
    say(fill(intent && !intent->responses.empty() ? pick(intent->responses) : "Thank you, {name}!",
             {{"name", s_.customer.name}}));
    say("Your order number is " + receipt.orderId + ".");
    say(render_cart(s_.cart.lines()));
    s_.cart.clear();
    s_.customer = {};
    snapshot_cart();
}

void Turn::act_faq(const Intent& intent) {
    const auto* entry = shop_.faq.by_intent(intent.name);
    if (!entry)
        throw HandlerFailure("FAQ intent without an answer");
    say(pick(intent.responses));
    say(entry->answer);
}

void Turn::act_hours(const nlu::IntentMatch& m, const Intent& intent) {
    const auto& info = shop_.business;
    const auto local = info.to_local(now_);
    const weekday today{floor<days>(local)};
    const auto* when = m.param("when");
    const std::string word = when ? when->canonical : "";

    auto day_line = [&](weekday day, const std::string& label) {
        const auto& slots = info.hours_on(day);
        if (slots.empty())
            return label + " we're closed.";
        return label + " we're open " + describe_intervals(slots) + ".";
    };

    if (word == "now" || word == "tonight") {
        auto status = commerce::is_open_at(info, local);
        if (status.open) {
            const auto since = local - floor<days>(local);
            for (const auto& slot : status.today)
                if (slot.contains(since))
                    say("Yes, we're open right now until " + commerce::format_clock(slot.close) + ".");
            if (reply_.texts.empty())
                say("Yes, we're open right now.");
        } else if (status.nextTransition) {
            const auto next_day = floor<days>(*status.nextTransition);
            const auto at = duration_cast<minutes>(*status.nextTransition - next_day);
            std::string when_text = next_day == floor<days>(local)
                                        ? "today"
                                        : std::string(commerce::weekday_name(weekday{next_day}));
            say("We're closed right now. We open again " + when_text + " at " + commerce::format_clock(at) + ".");
        } else {
            say("We're closed right now.");
        }
        return;
    }
    if (word == "today") {
        say(day_line(today, "Today (" + std::string(commerce::weekday_name(today)) + ")"));
        return;
    }
    if (word == "tomorrow") {
        const auto next = today + days{1};
        say(day_line(next, "Tomorrow (" + std::string(commerce::weekday_name(next)) + ")"));
        return;
    }
    for (unsigned d = 0; d < 7; ++d) {
        auto name = nlu::to_lower(commerce::weekday_name(weekday{d}));
        if (word == name) {
            say(day_line(weekday{d}, "On " + capitalized(name)));
            return;
        }
    }

    say(pick(intent.responses));
    std::string table;
    for (unsigned i = 0; i < 7; ++i) {
        const weekday day{(i + 1) % 7};  // Monday first
        const auto& slots = info.hours_on(day);
        table += (table.empty() ? "" : "\n") + std::string(commerce::weekday_name(day)) + ": " +
                 (slots.empty() ? std::string("closed") : describe_intervals(slots));
    }
    say(table);
}

void Turn::act_contact(const Intent& intent) {
    say(pick(intent.responses));
    say("Call or message us at " + shop_.business.phone + ".");
}

void Turn::act_location(const Intent& intent) {
    say(pick(intent.responses));
    say(shop_.business.address);
    say("Directions on Waze: " + shop_.business.mapLink);
}

const std::string& Turn::pick(const std::vector<std::string>& variants) {
    if (variants.empty())
        throw HandlerFailure("intent without responses");
    return variants[splitmix64(s_.rng) % variants.size()];
}

void Turn::activate(std::string_view context, int lifespan) {
    s_.contexts.insert_or_assign(std::string(context), std::max(lifespan, 1));
    refreshed_.insert(std::string(context));
}

void Turn::deactivate(std::string_view context) {
    s_.contexts.erase(std::string(context));
    refreshed_.erase(std::string(context));
}

void Turn::clear_pending_item() {
    s_.pendingItem.reset();
    s_.confirmReprompts = 0;
    deactivate(kAwaitingConfirmation);
}

int Turn::lifespan_for(std::string_view context, int fallback) const {
    for (const auto& agent : bundle_.subAgents)
        for (const auto& intent : agent.intents)
            if (const auto* oc = intent.output_context(context))
                return oc->lifespan;
    return fallback;
}

const Intent* Turn::intent_by_action(std::string_view action) const {
    for (const auto& agent : bundle_.subAgents)
        for (const auto& intent : agent.intents)
            if (intent.action == action)
                return &intent;
    return nullptr;
}

std::string Turn::confirm_question() const {
    return "shall I add " + std::to_string(s_.pendingItem->quantity) + " × " + s_.pendingItem->product.name +
           " to your cart?";
}

std::string Turn::slot_prompt(std::string_view slot) const {
    if (const auto* intent = intent_by_action("checkout.collect"))
        if (const auto* p = intent->parameter(slot); p && !p->reprompt.empty())
            return p->reprompt;
    return "What is your " + std::string(slot) + "?";
}

// Tokens an order phrase cannot explain: not inside an entity, not part of
// the intent's own wording, not filler. A non-empty residual names a
// product the shop does not know.
std::string Turn::residual_text(const nlu::IntentMatch& m, const Intent& intent) const {
    std::set<std::string, std::less<>> literal;
    for (const auto& phrase : intent.trainingPhrases)
        for (const auto& part : phrase.parts)
            if (const auto* text = std::get_if<std::string>(&part))
                for (const auto& tok : nlu::normalize(*text).tokens)
                    literal.insert(tok.text);

    std::string out;
    for (std::size_t i = 0; i < utt_.tokens.size(); ++i) {
        bool covered = std::any_of(m.entities.begin(), m.entities.end(), [&](const nlu::EntityMatch& e) {
            return i >= e.span.first && i < e.span.last;
        });
        const auto& tok = utt_.tokens[i].text;
        if (covered || literal.contains(tok) || kFillerWords.contains(tok))
            continue;
        out += (out.empty() ? "" : " ") + tok;
    }
    return out;
}

} // namespace

Engine::Engine(const AgentBundle& bundle, const commerce::Shop& shop, EngineOptions options)
    : bundle_(&bundle), shop_(&shop), options_(options), classifier_(bundle) {}

Session Engine::new_session(std::string id, Channel channel, std::string userKey) const {
    Session s;
    s.id = std::move(id);
    s.channel = channel;
    s.userKey = std::move(userKey);
    if (options_.seed)
        s.rng = *options_.seed;
    else if (bundle_->config.randomSeed)
        s.rng = *bundle_->config.randomSeed;
    else
        s.rng = (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^ std::random_device{}();
    return s;
}

TurnResult Engine::handle_message(const Session& session, std::string_view text, Timestamp now) const {
    return Turn(*this, session, text, now).run();
}

} // namespace shopbot::dialog
