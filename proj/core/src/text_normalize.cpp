#include "ptkit/text_normalize.hpp"

#include "ptkit/utf8.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <array>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ptkit {

namespace {

// Windows-1252 code points for bytes 0x80..0x9F; 0 marks the five undefined
// bytes (those decode to the C1 control of the same value under Latin-1).
constexpr std::array<char32_t, 32> kCp1252High = {
    0x20AC, 0,      0x201A, 0x0192, 0x201E, 0x2026, 0x2020, 0x2021,
    0x02C6, 0x2030, 0x0160, 0x2039, 0x0152, 0,      0x017D, 0,
    0,      0x2018, 0x2019, 0x201C, 0x201D, 0x2022, 0x2013, 0x2014,
    0x02DC, 0x2122, 0x0161, 0x203A, 0x0153, 0,      0x017E, 0x0178,
};

struct MojibakeTable {
    // Keyed by the first artifact code point; candidates sorted longest first.
    std::unordered_map<char32_t, std::vector<std::pair<std::u32string, char32_t>>> by_lead;

    MojibakeTable()
    {
        std::vector<char32_t> targets;
        for (char32_t cp = 0xA0; cp <= 0xFF; ++cp) {
            targets.push_back(cp);
        }
        for (char32_t cp : kCp1252High) {
            if (cp != 0) {
                targets.push_back(cp);
            }
        }
        for (char32_t target : targets) {
            std::string bytes;
            utf8::append(bytes, target);
            // Each byte >= 0x80 may have been read as Latin-1 or as
            // Windows-1252; enumerate both readings.
            std::vector<std::u32string> variants{U""};
            for (unsigned char b : bytes) {
                std::vector<char32_t> readings{static_cast<char32_t>(b)};
                if (b >= 0x80 && b <= 0x9F && kCp1252High[b - 0x80] != 0) {
                    readings.push_back(kCp1252High[b - 0x80]);
                }
                std::vector<std::u32string> next;
                for (const auto &v : variants) {
                    for (char32_t r : readings) {
                        next.push_back(v + r);
                    }
                }
                variants = std::move(next);
            }
            for (auto &v : variants) {
                by_lead[v.front()].emplace_back(std::move(v), target);
            }
        }
        for (auto &[lead, list] : by_lead) {
            std::stable_sort(list.begin(), list.end(), [](const auto &a, const auto &b) {
                return a.first.size() > b.first.size();
            });
        }
    }
};

const MojibakeTable &mojibake_table()
{
    static const MojibakeTable table;
    return table;
}

bool repair_pass(std::u32string &text)
{
    const auto &table = mojibake_table().by_lead;
    std::u32string out;
    out.reserve(text.size());
    bool changed = false;
    for (std::size_t i = 0; i < text.size();) {
        const auto it = table.find(text[i]);
        bool matched = false;
        if (it != table.end()) {
            for (const auto &[artifact, target] : it->second) {
                if (text.compare(i, artifact.size(), artifact) == 0) {
                    out.push_back(target);
                    i += artifact.size();
                    matched = changed = true;
                    break;
                }
            }
        }
        if (!matched) {
            out.push_back(text[i++]);
        }
    }
    text = std::move(out);
    return changed;
}

const std::unordered_map<std::u32string, char32_t> &named_entities()
{
    static const std::unordered_map<std::u32string, char32_t> table = {
        {U"amp", U'&'},      {U"lt", U'<'},        {U"gt", U'>'},       {U"quot", U'"'},
        {U"apos", U'\''},    {U"nbsp", 0xA0},      {U"copy", 0xA9},     {U"reg", 0xAE},
        {U"deg", 0xB0},      {U"middot", 0xB7},    {U"laquo", 0xAB},    {U"raquo", 0xBB},
        {U"ordf", 0xAA},     {U"ordm", 0xBA},      {U"sect", 0xA7},     {U"para", 0xB6},
        {U"ndash", 0x2013},  {U"mdash", 0x2014},   {U"hellip", 0x2026}, {U"bull", 0x2022},
        {U"lsquo", 0x2018},  {U"rsquo", 0x2019},   {U"ldquo", 0x201C},  {U"rdquo", 0x201D},
        {U"euro", 0x20AC},   {U"trade", 0x2122},   {U"iexcl", 0xA1},    {U"iquest", 0xBF},
        {U"Agrave", 0xC0},   {U"Aacute", 0xC1},    {U"Acirc", 0xC2},    {U"Atilde", 0xC3},
        {U"Auml", 0xC4},     {U"Ccedil", 0xC7},    {U"Egrave", 0xC8},   {U"Eacute", 0xC9},
        {U"Ecirc", 0xCA},    {U"Iacute", 0xCD},    {U"Ntilde", 0xD1},   {U"Oacute", 0xD3},
        {U"Ocirc", 0xD4},    {U"Otilde", 0xD5},    {U"Ouml", 0xD6},     {U"Uacute", 0xDA},
        {U"Uuml", 0xDC},     {U"agrave", 0xE0},    {U"aacute", 0xE1},   {U"acirc", 0xE2},
        {U"atilde", 0xE3},   {U"auml", 0xE4},      {U"ccedil", 0xE7},   {U"egrave", 0xE8},
        {U"eacute", 0xE9},   {U"ecirc", 0xEA},     {U"iacute", 0xED},   {U"ntilde", 0xF1},
        {U"oacute", 0xF3},   {U"ocirc", 0xF4},     {U"otilde", 0xF5},   {U"ouml", 0xF6},
        {U"uacute", 0xFA},   {U"uuml", 0xFC},
    };
    return table;
}

bool is_ascii_alpha(char32_t c) { return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z'); }
bool is_ascii_digit(char32_t c) { return c >= U'0' && c <= U'9'; }
bool is_hex_digit(char32_t c)
{
    return is_ascii_digit(c) || (c >= U'a' && c <= U'f') || (c >= U'A' && c <= U'F');
}

// Length of the character reference starting at text[i] == '&' and its value,
// or 0 when there is none.
std::size_t match_entity(const std::u32string &text, std::size_t i, char32_t &value)
{
    constexpr std::size_t kMaxEntity = 12;
    const auto semi = text.find(U';', i + 1);
    if (semi == std::u32string::npos || semi - i > kMaxEntity || semi == i + 1) {
        return 0;
    }
    const std::u32string_view body(text.data() + i + 1, semi - i - 1);
    if (body.front() == U'#') {
        char32_t cp = 0;
        bool hex = body.size() > 1 && (body[1] == U'x' || body[1] == U'X');
        std::size_t start = hex ? 2 : 1;
        if (start >= body.size()) {
            return 0;
        }
        for (std::size_t k = start; k < body.size(); ++k) {
            const char32_t c = body[k];
            if (hex ? !is_hex_digit(c) : !is_ascii_digit(c)) {
                return 0;
            }
            const char32_t digit = is_ascii_digit(c) ? c - U'0' : (c | 0x20) - U'a' + 10;
            cp = cp * (hex ? 16 : 10) + digit;
            if (cp > 0x10FFFF) {
                return 0;
            }
        }
        if (cp == 0 || (cp >= 0xD800 && cp <= 0xDFFF)) {
            return 0;
        }
        value = cp;
        return semi - i + 1;
    }
    const auto it = named_entities().find(std::u32string(body));
    if (it == named_entities().end()) {
        return 0;
    }
    value = it->second;
    return semi - i + 1;
}

// "<" followed by a letter, '/', '!' or '?' and closed by '>' with no '<' in
// between.
std::size_t match_tag(const std::u32string &text, std::size_t i)
{
    if (i + 1 >= text.size()) {
        return 0;
    }
    const char32_t next = text[i + 1];
    if (!is_ascii_alpha(next) && next != U'/' && next != U'!' && next != U'?') {
        return 0;
    }
    for (std::size_t j = i + 1; j < text.size(); ++j) {
        if (text[j] == U'>') {
            return j - i + 1;
        }
        if (text[j] == U'<') {
            return 0;
        }
    }
    return 0;
}

bool is_stripped_control(char32_t c)
{
    if (c == U'\n' || c == U'\t') {
        return false;
    }
    return c < 0x20 || (c >= 0x7F && c <= 0x9F);
}

} // namespace

std::string repair_mojibake(std::string_view text)
{
    auto cps = utf8::decode(text);
    while (repair_pass(cps)) {
    }
    return utf8::encode(cps);
}

std::string strip_html(std::string_view text)
{
    const auto cps = utf8::decode(text);
    std::u32string out;
    out.reserve(cps.size());
    for (std::size_t i = 0; i < cps.size();) {
        if (cps[i] == U'<') {
            if (const auto len = match_tag(cps, i)) {
                i += len;
                continue;
            }
        } else if (cps[i] == U'&') {
            char32_t value = 0;
            if (const auto len = match_entity(cps, i, value)) {
                out.push_back(value);
                i += len;
                continue;
            }
        }
        out.push_back(cps[i++]);
    }
    return utf8::encode(out);
}

std::string strip_control_chars(std::string_view text)
{
    std::string out;
    out.reserve(text.size());
    for (std::size_t pos = 0; pos < text.size();) {
        const auto d = utf8::decode_one(text, pos);
        if (!is_stripped_control(d.cp)) {
            out.append(text.substr(pos, d.length));
        }
        pos += d.length;
    }
    return out;
}

std::string compose_nfc(std::string_view text)
{
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2 *nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) {
        return std::string(text);
    }
    const auto input = icu::UnicodeString::fromUTF8(
        icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
    if (nfc->isNormalized(input, status) && U_SUCCESS(status)) {
        return std::string(text);
    }
    status = U_ZERO_ERROR;
    const auto normalized = nfc->normalize(input, status);
    if (U_FAILURE(status)) {
        return std::string(text);
    }
    std::string out;
    normalized.toUTF8String(out);
    return out;
}

std::string normalize_text(std::string_view text)
{
    // Each step can expose work for an earlier one (an entity decoding to
    // "<", a tag removal joining a base letter and a combining mark), so
    // the chain runs until nothing changes.
    constexpr int kMaxRounds = 16;
    std::string current = utf8::sanitize(text);
    for (int round = 0; round < kMaxRounds; ++round) {
        std::string next = compose_nfc(strip_control_chars(strip_html(repair_mojibake(current))));
        if (next == current) {
            break;
        }
        current = std::move(next);
    }
    return current;
}

} // namespace ptkit
