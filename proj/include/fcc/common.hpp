#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace fcc {

// FNV-1a 64-bit. Used for config hashes and input digests in run manifests,
// where we need a stable hash across platforms and runs (std::hash is neither).
inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string to_hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[15 - i] = digits[(v >> (i * 4)) & 0xF];
    }
    return out;
}

// Content of the first well-formed <tag>...</tag> pair, if any.
inline std::optional<std::string> find_tag_content(std::string_view text, std::string_view tag) {
    std::string open = "<" + std::string(tag) + ">";
    std::string close = "</" + std::string(tag) + ">";
    std::size_t begin = text.find(open);
    if (begin == std::string_view::npos) return std::nullopt;
    begin += open.size();
    std::size_t end = text.find(close, begin);
    if (end == std::string_view::npos) return std::nullopt;
    return std::string(text.substr(begin, end - begin));
}

inline std::string_view trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\n' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\n' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
}

}  // namespace fcc
