#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace shopbot::utf8 {

struct Decoded {
    char32_t cp;
    std::size_t length;  // bytes consumed
};

// Malformed sequences decode as U+FFFD consuming one byte.
inline Decoded decode(std::string_view s, std::size_t pos) {
    auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
    unsigned char b0 = byte(pos);
    if (b0 < 0x80)
        return {b0, 1};
    std::size_t len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        return {0xFFFD, 1};
    }
    if (pos + len > s.size())
        return {0xFFFD, 1};
    for (std::size_t i = 1; i < len; ++i) {
        unsigned char b = byte(pos + i);
        if ((b & 0xC0) != 0x80)
            return {0xFFFD, 1};
        cp = (cp << 6) | (b & 0x3F);
    }
    return {cp, len};
}

inline void append(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

inline std::u32string decode_all(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    for (std::size_t pos = 0; pos < s.size();) {
        auto d = decode(s, pos);
        out.push_back(d.cp);
        pos += d.length;
    }
    return out;
}

// Letter blocks of the scripts we are likely to meet in chat text. Not a
// full Unicode property table.
inline bool is_letter(char32_t c) {
    if (c < 0x80)
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    struct Range { char32_t lo, hi; };
    static constexpr Range kLetters[] = {
        {0x00C0, 0x00D6}, {0x00D8, 0x00F6}, {0x00F8, 0x024F},  // Latin-1, Latin Extended
        {0x0370, 0x03FF},                                       // Greek
        {0x0400, 0x04FF},                                       // Cyrillic
        {0x0531, 0x0587},                                       // Armenian
        {0x05D0, 0x05EA},                                       // Hebrew
        {0x0620, 0x064A}, {0x066E, 0x06D3},                     // Arabic
        {0x0900, 0x0DFF},                                       // Indic scripts
        {0x0E01, 0x0E30}, {0x0E40, 0x0E46},                     // Thai
        {0x10A0, 0x10FF},                                       // Georgian
        {0x1100, 0x11FF},                                       // Hangul Jamo
        {0x1E00, 0x1FFF},                                       // Latin/Greek extended
        {0x3041, 0x3096}, {0x30A1, 0x30FA},                     // Hiragana, Katakana
        {0x3400, 0x4DBF}, {0x4E00, 0x9FFF},                     // CJK ideographs
        {0xAC00, 0xD7A3},                                       // Hangul syllables
        {0xF900, 0xFAFF},                                       // CJK compatibility
        {0xFF21, 0xFF3A}, {0xFF41, 0xFF5A},                     // fullwidth Latin
        {0x20000, 0x2FA1F},                                     // CJK extensions
    };
    for (const auto& r : kLetters)
        if (c >= r.lo && c <= r.hi)
            return true;
    return false;
}

inline bool is_digit(char32_t c) { return c >= '0' && c <= '9'; }

inline bool is_apostrophe(char32_t c) { return c == U'\'' || c == 0x2019 || c == 0x02BC; }

inline char32_t to_lower(char32_t c) {
    if (c < 0x80)
        return (c >= 'A' && c <= 'Z') ? c + 32 : c;
    if ((c >= 0x00C0 && c <= 0x00DE && c != 0x00D7) || (c >= 0x0391 && c <= 0x03AB && c != 0x03A2) ||
        (c >= 0x0410 && c <= 0x042F) || (c >= 0xFF21 && c <= 0xFF3A))
        return c + 32;
    if (c >= 0x0400 && c <= 0x040F)
        return c + 80;
    if (c >= 0x0100 && c <= 0x017F && c != 0x0130 && c != 0x0131 && c != 0x0138 && c != 0x0149 && c != 0x0178 &&
        c != 0x017F) {
        // Latin Extended-A alternates upper/lower, with the parity flipping
        // between U+0139 and U+0148.
        bool odd_upper = (c >= 0x0139 && c <= 0x0148) || (c >= 0x0179 && c <= 0x017E);
        bool is_upper = odd_upper ? (c % 2 == 1) : (c % 2 == 0);
        return is_upper ? c + 1 : c;
    }
    return c;
}

} // namespace shopbot::utf8
