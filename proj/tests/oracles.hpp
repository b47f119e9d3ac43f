// Reference implementations used only by tests. Deliberately slow and
// written from the definitions, sharing no code with the library.
#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace oracle {

inline std::string fold(std::string s) {
    for (auto& c : s)
        if (c >= 'A' && c <= 'Z')
            c = static_cast<char>(c - 'A' + 'a');
    return s;
}

// Unrestricted Damerau-Levenshtein from the Lowrance-Wagner recurrence,
// trying every transposition anchor (k, l) instead of only the last
// occurrence. ASCII input only.
inline std::size_t dl_recursive(std::string a, std::string b) {
    a = fold(std::move(a));
    b = fold(std::move(b));
    const int n = static_cast<int>(a.size());
    const int m = static_cast<int>(b.size());
    std::vector<std::vector<int>> memo(n + 1, std::vector<int>(m + 1, -1));
    auto d = [&](auto&& self, int i, int j) -> int {
        if (i == 0)
            return j;
        if (j == 0)
            return i;
        int& slot = memo[i][j];
        if (slot >= 0)
            return slot;
        int best = std::min({self(self, i - 1, j) + 1, self(self, i, j - 1) + 1,
                             self(self, i - 1, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1)});
        for (int k = 1; k < i; ++k)
            for (int l = 1; l < j; ++l)
                if (a[k - 1] == b[j - 1] && b[l - 1] == a[i - 1])
                    best = std::min(best, self(self, k - 1, l - 1) + (i - k - 1) + 1 + (j - l - 1));
        return slot = best;
    };
    return static_cast<std::size_t>(d(d, n, m));
}

// Shortest path over single edits (insert, delete, substitute, swap of
// adjacent characters). Exponential; keep inputs tiny.
inline std::size_t dl_bfs(const std::string& from, const std::string& to) {
    const std::string a = fold(from), b = fold(to);
    std::set<char> letters(a.begin(), a.end());
    letters.insert(b.begin(), b.end());
    const std::size_t cap = std::max(a.size(), b.size()) + 1;
    std::map<std::string, std::size_t> dist{{a, 0}};
    std::queue<std::string> q;
    q.push(a);
    while (!q.empty()) {
        auto s = q.front();
        q.pop();
        const auto ds = dist[s];
        if (s == b)
            return ds;
        std::vector<std::string> next;
        for (std::size_t i = 0; i < s.size(); ++i) {
            next.push_back(s.substr(0, i) + s.substr(i + 1));
            for (char c : letters)
                if (c != s[i]) {
                    auto t = s;
                    t[i] = c;
                    next.push_back(t);
                }
            if (i + 1 < s.size()) {
                auto t = s;
                std::swap(t[i], t[i + 1]);
                next.push_back(t);
            }
        }
        if (s.size() < cap)
            for (std::size_t i = 0; i <= s.size(); ++i)
                for (char c : letters)
                    next.push_back(s.substr(0, i) + c + s.substr(i));
        for (auto& t : next)
            if (dist.emplace(t, ds + 1).second)
                q.push(std::move(t));
    }
    return static_cast<std::size_t>(-1);
}

inline std::string random_string(std::mt19937_64& rng, std::size_t maxLen, const std::string& alphabet) {
    std::uniform_int_distribution<std::size_t> len(0, maxLen);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::string s(len(rng), ' ');
    for (auto& c : s)
        c = alphabet[pick(rng)];
    return s;
}

// Every string one substitution, deletion, insertion or adjacent swap away.
inline std::vector<std::string> single_edits(const std::string& s, const std::string& alphabet) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        out.push_back(s.substr(0, i) + s.substr(i + 1));
        for (char c : alphabet)
            if (c != s[i]) {
                auto t = s;
                t[i] = c;
                out.push_back(t);
            }
        if (i + 1 < s.size() && s[i] != s[i + 1]) {
            auto t = s;
            std::swap(t[i], t[i + 1]);
            out.push_back(t);
        }
    }
    for (std::size_t i = 0; i <= s.size(); ++i)
        for (char c : alphabet)
            out.push_back(s.substr(0, i) + c + s.substr(i));
    return out;
}

} // namespace oracle
