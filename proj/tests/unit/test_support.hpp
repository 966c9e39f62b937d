#pragma once

#include "ptkit/utf8.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace test {

inline std::filesystem::path data(const std::string &rel)
{
    return std::filesystem::path(PTKIT_TEST_DATA) / rel;
}

inline std::string slurp(const std::filesystem::path &p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::filesystem::path scratch_dir(const std::string &name)
{
    auto dir = std::filesystem::temp_directory_path() / ("ptkit-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// Random valid UTF-8 mixing ASCII, Latin-1, Portuguese letters, combining
// marks, CJK, emoji and whitespace runs.
inline std::string random_utf8(std::mt19937_64 &rng, std::size_t max_cps)
{
    static const char32_t pool[] = {U'a', U'b', U'z', U'A', U'Z', U'0', U'9', U' ', U' ', U'\n',
                                    U'\t', U'\'', U'.', U',', U'!', U'?', U'-', U'#', U'ã', U'ç',
                                    U'é', U'õ', U'Á', U'́', U' ', U'’', U'…',
                                    U'日', U'本', U'한', U'ب', U'Ω', U'😀', U'🇧', U'​', U'\r'};
    std::uniform_int_distribution<std::size_t> len(0, max_cps);
    std::uniform_int_distribution<int> mode(0, 9);
    std::string out;
    const auto n = len(rng);
    for (std::size_t i = 0; i < n; ++i) {
        char32_t cp;
        const int m = mode(rng);
        if (m < 6) {
            cp = pool[std::uniform_int_distribution<std::size_t>(0, std::size(pool) - 1)(rng)];
        } else if (m < 8) {
            cp = std::uniform_int_distribution<char32_t>(0x20, 0x7E)(rng);
        } else {
            do {
                cp = std::uniform_int_distribution<char32_t>(0x80, 0x10FFFF)(rng);
            } while (cp >= 0xD800 && cp <= 0xDFFF);
        }
        ptkit::utf8::append(out, cp);
    }
    return out;
}

inline std::string random_bytes(std::mt19937_64 &rng, std::size_t max_len)
{
    std::string out(std::uniform_int_distribution<std::size_t>(0, max_len)(rng), '\0');
    for (auto &c : out) {
        c = static_cast<char>(std::uniform_int_distribution<int>(0, 255)(rng));
    }
    return out;
}

} // namespace test
