#include "shopbot/nlu.hpp"

#include <algorithm>
#include <vector>

#include "utf8.hpp"

namespace shopbot::nlu {

std::string Utterance::joined() const {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty())
            out.push_back(' ');
        out += t.text;
    }
    return out;
}

Utterance normalize(std::string_view text) {
    Utterance utt;
    utt.raw = std::string(text);

    std::string current;
    std::size_t start = 0;
    std::size_t end = 0;
    auto flush = [&] {
        if (!current.empty())
            utt.tokens.push_back({std::move(current), start, end});
        current.clear();
    };

    for (std::size_t pos = 0; pos < text.size();) {
        auto [cp, len] = utf8::decode(text, pos);
        if (utf8::is_letter(cp) || utf8::is_digit(cp)) {
            if (current.empty())
                start = pos;
            utf8::append(current, utf8::to_lower(cp));
            end = pos + len;
        } else if (!utf8::is_apostrophe(cp)) {
            flush();
        }
        pos += len;
    }
    flush();
    return utt;
}

std::string to_lower(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t pos = 0; pos < text.size();) {
        auto [cp, len] = utf8::decode(text, pos);
        utf8::append(out, utf8::to_lower(cp));
        pos += len;
    }
    return out;
}

std::size_t code_point_count(std::string_view text) {
    std::size_t n = 0;
    for (std::size_t pos = 0; pos < text.size(); ++n)
        pos += utf8::decode(text, pos).length;
    return n;
}

namespace {

std::u32string folded(std::string_view s) {
    auto cps = utf8::decode_all(s);
    for (auto& c : cps)
        c = utf8::to_lower(c);
    return cps;
}

// Lowrance-Wagner recurrence. `last_row` remembers, per character of `a`,
// the last row where it occurred; `last_col` does the same along the
// current row for `b`.
std::size_t damerau_levenshtein(const std::u32string& a, const std::u32string& b) {
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    if (n == 0)
        return m;
    if (m == 0)
        return n;

    const std::size_t inf = n + m;
    const std::size_t cols = m + 2;
    std::vector<std::size_t> h((n + 2) * cols);
    auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return h[i * cols + j]; };

    at(0, 0) = inf;
    for (std::size_t i = 0; i <= n; ++i) {
        at(i + 1, 0) = inf;
        at(i + 1, 1) = i;
    }
    for (std::size_t j = 0; j <= m; ++j) {
        at(0, j + 1) = inf;
        at(1, j + 1) = j;
    }

    // Last row in which each character of `a` was seen. Inputs are short,
    // so a flat list beats a hash map.
    std::vector<std::pair<char32_t, std::size_t>> last_row;
    auto last_seen = [&](char32_t c) -> std::size_t {
        for (const auto& [ch, row] : last_row)
            if (ch == c)
                return row;
        return 0;
    };
    for (std::size_t i = 1; i <= n; ++i) {
        std::size_t last_col = 0;
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t i1 = last_seen(b[j - 1]);
            const std::size_t j1 = last_col;
            std::size_t cost = 1;
            if (a[i - 1] == b[j - 1]) {
                cost = 0;
                last_col = j;
            }
            at(i + 1, j + 1) = std::min({
                at(i, j) + cost,
                at(i + 1, j) + 1,
                at(i, j + 1) + 1,
                at(i1, j1) + (i - i1 - 1) + 1 + (j - j1 - 1),
            });
        }
        auto it = std::find_if(last_row.begin(), last_row.end(), [&](const auto& e) { return e.first == a[i - 1]; });
        if (it == last_row.end())
            last_row.emplace_back(a[i - 1], i);
        else
            it->second = i;
    }
    return at(n + 1, m + 1);
}

} // namespace

std::size_t edit_distance(std::string_view a, std::string_view b) {
    return damerau_levenshtein(folded(a), folded(b));
}

double similarity(std::string_view a, std::string_view b) {
    auto fa = folded(a);
    auto fb = folded(b);
    const std::size_t longest = std::max(fa.size(), fb.size());
    if (longest == 0)
        return 1.0;
    return 1.0 - static_cast<double>(damerau_levenshtein(fa, fb)) / static_cast<double>(longest);
}

std::string stem(std::string_view token) {
    if (code_point_count(token) < 5)
        return std::string(token);
    auto ends_with = [&](std::string_view suffix) {
        return token.size() > suffix.size() &&
               token.substr(token.size() - suffix.size()) == suffix;
    };
    // "e" is stripped too so that "close", "closes" and "closing" all meet at "clos".
    for (std::string_view suffix : {"ing", "es", "s", "e"}) {
        if (ends_with(suffix))
            return std::string(token.substr(0, token.size() - suffix.size()));
    }
    return std::string(token);
}

LanguageSupport detect_unsupported_language(std::string_view text) {
    std::size_t letters = 0;
    std::size_t foreign = 0;
    for (std::size_t pos = 0; pos < text.size();) {
        auto [cp, len] = utf8::decode(text, pos);
        if (utf8::is_letter(cp)) {
            ++letters;
            if (cp >= 0x80)
                ++foreign;
        }
        pos += len;
    }
    if (letters == 0)
        return LanguageSupport::Supported;
    // foreign / letters >= 0.6, kept in integers
    return foreign * 10 >= letters * 6 ? LanguageSupport::Unsupported : LanguageSupport::Supported;
}

} // namespace shopbot::nlu
