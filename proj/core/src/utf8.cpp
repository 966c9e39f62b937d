#include "ptkit/utf8.hpp"

namespace ptkit::utf8 {

namespace {

constexpr bool in(unsigned char b, unsigned char lo, unsigned char hi) noexcept
{
    return b >= lo && b <= hi;
}

} // namespace

Decoded decode_one(std::string_view bytes, std::size_t pos) noexcept
{
    const auto n = bytes.size();
    const auto b0 = static_cast<unsigned char>(bytes[pos]);
    if (b0 < 0x80) {
        return {b0, 1, true};
    }

    std::size_t need = 0;
    unsigned char lo = 0x80, hi = 0xBF; // allowed range of the second byte
    char32_t cp = 0;
    if (in(b0, 0xC2, 0xDF)) {
        need = 1;
        cp = b0 & 0x1F;
    } else if (in(b0, 0xE0, 0xEF)) {
        need = 2;
        cp = b0 & 0x0F;
        if (b0 == 0xE0) lo = 0xA0;
        if (b0 == 0xED) hi = 0x9F;
    } else if (in(b0, 0xF0, 0xF4)) {
        need = 3;
        cp = b0 & 0x07;
        if (b0 == 0xF0) lo = 0x90;
        if (b0 == 0xF4) hi = 0x8F;
    } else {
        return {kReplacementChar, 1, false};
    }

    std::size_t len = 1;
    for (std::size_t i = 0; i < need; ++i) {
        if (pos + len >= n) {
            return {kReplacementChar, len, false};
        }
        const auto b = static_cast<unsigned char>(bytes[pos + len]);
        const bool ok = (i == 0) ? in(b, lo, hi) : in(b, 0x80, 0xBF);
        if (!ok) {
            return {kReplacementChar, len, false};
        }
        cp = (cp << 6) | (b & 0x3F);
        ++len;
    }
    return {cp, len, true};
}

void append(std::string &out, char32_t cp)
{
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
        cp = kReplacementChar;
    }
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

std::u32string decode(std::string_view bytes)
{
    std::u32string out;
    out.reserve(bytes.size());
    for (std::size_t pos = 0; pos < bytes.size();) {
        const auto d = decode_one(bytes, pos);
        out.push_back(d.cp);
        pos += d.length;
    }
    return out;
}

std::string encode(std::u32string_view cps)
{
    std::string out;
    out.reserve(cps.size());
    for (char32_t cp : cps) {
        append(out, cp);
    }
    return out;
}

std::string sanitize(std::string_view bytes)
{
    if (is_valid(bytes)) {
        return std::string(bytes);
    }
    std::string out;
    out.reserve(bytes.size() + 8);
    for (std::size_t pos = 0; pos < bytes.size();) {
        const auto d = decode_one(bytes, pos);
        if (d.valid) {
            out.append(bytes.substr(pos, d.length));
        } else {
            append(out, kReplacementChar);
        }
        pos += d.length;
    }
    return out;
}

bool is_valid(std::string_view bytes) noexcept
{
    for (std::size_t pos = 0; pos < bytes.size();) {
        const auto d = decode_one(bytes, pos);
        if (!d.valid) {
            return false;
        }
        pos += d.length;
    }
    return true;
}

std::size_t length(std::string_view bytes) noexcept
{
    std::size_t count = 0;
    for (std::size_t pos = 0; pos < bytes.size(); ++count) {
        pos += decode_one(bytes, pos).length;
    }
    return count;
}

} // namespace ptkit::utf8
