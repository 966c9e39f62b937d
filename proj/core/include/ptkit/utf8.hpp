#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace ptkit::utf8 {

inline constexpr char32_t kReplacementChar = 0xFFFD;

// One decoded code point and the number of bytes it consumed. Ill-formed
// input decodes to U+FFFD covering the maximal subpart of the bad sequence
// (the same policy Python's errors="replace" and WHATWG decoders follow).
struct Decoded {
    char32_t cp;
    std::size_t length;
    bool valid;
};

Decoded decode_one(std::string_view bytes, std::size_t pos) noexcept;

std::u32string decode(std::string_view bytes);
std::string encode(std::u32string_view cps);
void append(std::string &out, char32_t cp);

// Replaces every ill-formed sequence by U+FFFD. Valid input is returned
// unchanged.
std::string sanitize(std::string_view bytes);
bool is_valid(std::string_view bytes) noexcept;

// Number of code points; ill-formed subsequences count as one each.
std::size_t length(std::string_view bytes) noexcept;

} // namespace ptkit::utf8
