#include "shopbot/nlu.hpp"

#include <algorithm>
#include <array>
#include <charconv>

namespace shopbot::nlu {

namespace {

constexpr std::array<std::string_view, 20> kNumberWords = {
    "one",    "two",    "three",   "four",     "five",     "six",     "seven",
    "eight",  "nine",   "ten",     "eleven",   "twelve",   "thirteen", "fourteen",
    "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty",
};

constexpr std::array<std::string_view, 11> kDatetimeWords = {
    "now",    "today",   "tomorrow",  "tonight", "monday", "tuesday",
    "wednesday", "thursday", "friday", "saturday", "sunday",
};

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string number_canonical(std::string_view token) {
    if (all_digits(token)) {
        auto first = token.find_first_not_of('0');
        return first == std::string_view::npos ? "0" : std::string(token.substr(first));
    }
    for (std::size_t i = 0; i < kNumberWords.size(); ++i)
        if (token == kNumberWords[i])
            return std::to_string(i + 1);
    return {};
}

struct Candidate {
    EntityMatch match;
    std::size_t typeOrder;
};

std::size_t token_count(std::string_view s) {
    return normalize(s).tokens.size();
}

} // namespace

std::vector<EntityMatch> extract_entities(const Utterance& utt,
                                          std::span<const EntityTypeDef> entityTypes,
                                          double fuzzyThreshold) {
    const auto& toks = utt.tokens;
    const std::size_t n = toks.size();
    if (n == 0)
        return {};

    // Synonyms in the same normalized form as utterance windows.
    struct Synonym {
        std::string text;
        std::size_t length;  // code points
        const EntityEntry* entry;
    };
    struct Prepared {
        const EntityTypeDef* def;
        std::vector<Synonym> synonyms;
    };
    std::vector<Prepared> prepared;
    std::size_t max_width = 1;
    for (const auto& def : entityTypes) {
        Prepared p{&def, {}};
        for (const auto& entry : def.entries) {
            for (const auto& syn : entry.synonyms) {
                auto joined = normalize(syn).joined();
                if (joined.empty())
                    continue;
                max_width = std::max(max_width, token_count(joined));
                p.synonyms.push_back({joined, code_point_count(joined), &entry});
            }
        }
        prepared.push_back(std::move(p));
    }

    auto surface = [&](std::size_t first, std::size_t last) {
        return utt.raw.substr(toks[first].start, toks[last - 1].end - toks[first].start);
    };

    std::vector<Candidate> candidates;
    for (std::size_t first = 0; first < n; ++first) {
        std::string window;
        // One extra token: a stray space can split a word of a fuzzy synonym.
        for (std::size_t width = 1; width <= max_width + 1 && first + width <= n; ++width) {
            if (width > 1)
                window.push_back(' ');
            window += toks[first + width - 1].text;
            const std::size_t window_len = code_point_count(window);
            const TokenSpan span{first, first + width};

            for (std::size_t t = 0; t < prepared.size(); ++t) {
                const auto& def = *prepared[t].def;
                if (def.kind == EntityKind::System) {
                    if (width != 1)
                        continue;
                    const auto& tok = toks[first].text;
                    std::string canonical;
                    if (def.name == kNumberEntity)
                        canonical = number_canonical(tok);
                    else if (def.name == kDatetimeWordEntity &&
                             std::find(kDatetimeWords.begin(), kDatetimeWords.end(), tok) !=
                                 kDatetimeWords.end())
                        canonical = tok;
                    if (!canonical.empty())
                        candidates.push_back({{def.name, canonical, surface(first, first + 1), span, 1.0}, t});
                    continue;
                }

                const EntityEntry* best_entry = nullptr;
                double best = -1.0;
                for (const auto& syn : prepared[t].synonyms) {
                    double score = 0.0;
                    if (syn.text == window) {
                        score = 1.0;
                    } else if (def.fuzzyEnabled) {
                        // Length difference alone bounds the achievable similarity.
                        const auto longest = std::max(syn.length, window_len);
                        const auto diff = syn.length > window_len ? syn.length - window_len
                                                                  : window_len - syn.length;
                        if (1.0 - static_cast<double>(diff) / static_cast<double>(longest) <
                            fuzzyThreshold)
                            continue;
                        score = similarity(window, syn.text);
                    } else {
                        continue;
                    }
                    if (score >= fuzzyThreshold && score > best) {
                        best = score;
                        best_entry = syn.entry;
                    }
                }
                if (best_entry)
                    candidates.push_back(
                        {{def.name, best_entry->value, surface(first, first + width), span, best}, t});
            }
        }
    }

    std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.match.similarity != b.match.similarity)
            return a.match.similarity > b.match.similarity;
        if (a.match.span.size() != b.match.span.size())
            return a.match.span.size() > b.match.span.size();
        if (a.match.span.first != b.match.span.first)
            return a.match.span.first < b.match.span.first;
        return a.typeOrder < b.typeOrder;
    });

    std::vector<EntityMatch> accepted;
    for (auto& c : candidates) {
        bool clash = std::any_of(accepted.begin(), accepted.end(),
                                 [&](const EntityMatch& m) { return m.span.overlaps(c.match.span); });
        if (!clash)
            accepted.push_back(std::move(c.match));
    }
    std::sort(accepted.begin(), accepted.end(),
              [](const EntityMatch& a, const EntityMatch& b) { return a.span.first < b.span.first; });
    return accepted;
}

} // namespace shopbot::nlu
