#include "shopbot/dialog.hpp"

#include <cstdio>
#include <random>
#include <stdexcept>

namespace shopbot::dialog {

std::string SessionStore::create_locked(Channel channel, const std::string& userKey) {
    if (idSalt_ == 0) {
        std::random_device rd;
        idSalt_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^ 1;
    }
    // Counter mixed with a per-store salt: unique within the store and not
    // guessable across restarts.
    std::uint64_t z = idSalt_ + 0x9e3779b97f4a7c15ULL * ++idCounter_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(z));
    std::string id = buf;

    auto e = std::make_shared<Entry>();
    e->session = engine_->new_session(id, channel, userKey);
    sessions_.emplace(id, std::move(e));
    byUser_[{channel, userKey}] = id;
    return id;
}

std::string SessionStore::create(Channel channel, const std::string& userKey) {
    std::lock_guard lock(mutex_);
    return create_locked(channel, userKey);
}

std::string SessionStore::open(Channel channel, const std::string& userKey) {
    std::lock_guard lock(mutex_);
    if (auto it = byUser_.find({channel, userKey}); it != byUser_.end())
        return it->second;
    return create_locked(channel, userKey);
}

std::shared_ptr<SessionStore::Entry> SessionStore::entry(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

std::optional<Session> SessionStore::get(const std::string& id) const {
    auto e = entry(id);
    if (!e)
        return std::nullopt;
    std::lock_guard turn(e->turn);
    return e->session;
}

std::size_t SessionStore::size() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
}

TurnResult SessionStore::process(const std::string& id, std::string_view text, commerce::Timestamp now) {
    auto e = entry(id);
    if (!e)
        throw std::out_of_range("unknown session " + id);
    std::lock_guard turn(e->turn);
    auto result = engine_->handle_message(e->session, text, now);
    e->session = result.session;
    return result;
}

} // namespace shopbot::dialog
