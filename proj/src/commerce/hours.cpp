#include "shopbot/commerce.hpp"

#include <cstdio>

namespace shopbot::commerce {

using namespace std::chrono;

local_seconds BusinessInfo::to_local(Timestamp t) const {
    return local_seconds{t.time_since_epoch() + utcOffset};
}

OpenStatus is_open_at(const BusinessInfo& info, local_seconds t) {
    const auto day = floor<days>(t);
    const auto since_midnight = t - day;
    OpenStatus status;
    status.today = info.hours_on(weekday{day});

    for (const auto& interval : status.today) {
        if (interval.contains(since_midnight)) {
            status.open = true;
            status.nextTransition = day + interval.close;
            return status;
        }
    }
    for (const auto& interval : status.today) {
        if (interval.open > since_midnight) {
            status.nextTransition = day + interval.open;
            return status;
        }
    }
    for (int ahead = 1; ahead <= 7; ++ahead) {
        const auto next_day = day + days{ahead};
        const auto& hours = info.hours_on(weekday{next_day});
        if (!hours.empty()) {
            status.nextTransition = next_day + hours.front().open;
            return status;
        }
    }
    return status;
}

std::string format_clock(minutes since_midnight) {
    char buf[8];
    auto total = since_midnight.count();
    std::snprintf(buf, sizeof buf, "%02d:%02d", static_cast<int>(total / 60), static_cast<int>(total % 60));
    return buf;
}

std::string_view weekday_name(weekday day) {
    static constexpr std::string_view names[] = {"Sunday",   "Monday", "Tuesday", "Wednesday",
                                                 "Thursday", "Friday", "Saturday"};
    return names[day.c_encoding() % 7];
}

} // namespace shopbot::commerce
