#include "mkprice/timestamps.hpp"

#include <charconv>
#include <cstdio>

#include "mkprice/errors.hpp"

namespace mkprice {

namespace {

int parse_field(std::string_view text, std::size_t pos, std::size_t len, std::string_view whole) {
    int value = 0;
    if (pos + len > text.size()) {
        throw InputError("malformed timestamp '" + std::string(whole) + "'");
    }
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, value);
    if (ec != std::errc() || ptr != text.data() + pos + len) {
        throw InputError("malformed timestamp '" + std::string(whole) + "'");
    }
    return value;
}

void expect_char(std::string_view text, std::size_t pos, char c, std::string_view whole) {
    if (pos >= text.size() || text[pos] != c) {
        throw InputError("malformed timestamp '" + std::string(whole) + "'");
    }
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
    using namespace std::chrono;
    std::string_view s = text;
    if (!s.empty() && s.back() == 'Z') {
        s.remove_suffix(1);
    }
    // YYYY-MM-DDTHH
    const int y = parse_field(s, 0, 4, text);
    expect_char(s, 4, '-', text);
    const int mo = parse_field(s, 5, 2, text);
    expect_char(s, 7, '-', text);
    const int d = parse_field(s, 8, 2, text);
    if (s.size() < 13 || (s[10] != 'T' && s[10] != ' ')) {
        throw InputError("malformed timestamp '" + std::string(text) + "'");
    }
    const int h = parse_field(s, 11, 2, text);
    std::size_t pos = 13;
    for (int field = 0; field < 2 && pos < s.size(); ++field) {
        expect_char(s, pos, ':', text);
        if (parse_field(s, pos + 1, 2, text) != 0) {
            throw InputError("timestamp '" + std::string(text) + "' is not on a whole hour");
        }
        pos += 3;
    }
    if (pos != s.size()) {
        throw InputError("malformed timestamp '" + std::string(text) + "'");
    }
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h < 0 || h > 23) {
        throw InputError("invalid calendar time '" + std::string(text) + "'");
    }
    return Timestamp{sys_days{ymd}} + hours{h};
}

std::string format_timestamp(Timestamp t) {
    using namespace std::chrono;
    const auto day_start = floor<days>(t);
    const year_month_day ymd{day_start};
    const auto h = (t - day_start).count();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:00:00Z", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(h));
    return buf;
}

std::string format_date(Timestamp t) {
    return format_timestamp(t).substr(0, 10);
}

int cycle_slot(Timestamp t, int period) {
    const auto count = t.time_since_epoch().count();
    auto slot = count % period;
    if (slot < 0) {
        slot += period;
    }
    return static_cast<int>(slot);
}

}  // namespace mkprice
