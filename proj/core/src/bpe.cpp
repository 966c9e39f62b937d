#include "ptkit/bpe.hpp"

#include "ptkit/utf8.hpp"

#include <json.hpp>
#include <unicode/uchar.h>

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace ptkit::bpe {

namespace {

std::array<char32_t, 256> build_byte_map()
{
    std::array<char32_t, 256> map{};
    std::array<bool, 256> direct{};
    auto mark = [&](int lo, int hi) {
        for (int b = lo; b <= hi; ++b) {
            direct[b] = true;
        }
    };
    mark('!', '~');
    mark(0xA1, 0xAC);
    mark(0xAE, 0xFF);
    char32_t next = 256;
    for (int b = 0; b < 256; ++b) {
        map[b] = direct[b] ? static_cast<char32_t>(b) : next++;
    }
    return map;
}

enum class CharClass { letter, number, space, other };

CharClass classify(const utf8::Decoded &d)
{
    if (!d.valid) {
        return CharClass::other;
    }
    const auto cp = static_cast<UChar32>(d.cp);
    if (u_isUWhiteSpace(cp)) {
        return CharClass::space;
    }
    const auto mask = U_GET_GC_MASK(cp);
    if (mask & U_GC_L_MASK) {
        return CharClass::letter;
    }
    if (mask & U_GC_N_MASK) {
        return CharClass::number;
    }
    return CharClass::other;
}

struct Symbol {
    std::size_t offset;
    std::size_t length;
    char32_t cp;
    CharClass cls;
};

std::uint64_t pair_key(TokenId a, TokenId b)
{
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

} // namespace

const std::array<char32_t, 256> &byte_to_unicode()
{
    static const auto map = build_byte_map();
    return map;
}

std::vector<std::string_view> pretokenize(std::string_view text)
{
    std::vector<Symbol> syms;
    syms.reserve(text.size());
    for (std::size_t pos = 0; pos < text.size();) {
        const auto d = utf8::decode_one(text, pos);
        syms.push_back({pos, d.length, d.cp, classify(d)});
        pos += d.length;
    }

    const std::size_t n = syms.size();
    auto piece = [&](std::size_t from, std::size_t to) {
        const std::size_t begin = syms[from].offset;
        const std::size_t end = to < n ? syms[to].offset : text.size();
        return text.substr(begin, end - begin);
    };
    auto run_end = [&](std::size_t from, CharClass cls) {
        while (from < n && syms[from].cls == cls) {
            ++from;
        }
        return from;
    };
    auto is_ascii = [&](std::size_t i, char c) {
        return i < n && syms[i].cp == static_cast<char32_t>(c) && syms[i].length == 1;
    };

    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < n) {
        if (is_ascii(i, '\'')) {
            std::size_t len = 0;
            if (is_ascii(i + 1, 's') || is_ascii(i + 1, 't') || is_ascii(i + 1, 'm') ||
                is_ascii(i + 1, 'd')) {
                len = 2;
            } else if ((is_ascii(i + 1, 'r') && is_ascii(i + 2, 'e')) ||
                       (is_ascii(i + 1, 'v') && is_ascii(i + 2, 'e')) ||
                       (is_ascii(i + 1, 'l') && is_ascii(i + 2, 'l'))) {
                len = 3;
            }
            if (len != 0) {
                out.push_back(piece(i, i + len));
                i += len;
                continue;
            }
        }

        const std::size_t start = is_ascii(i, ' ') ? i + 1 : i;
        if (start < n && syms[start].cls != CharClass::space) {
            const std::size_t end = run_end(start, syms[start].cls);
            out.push_back(piece(i, end));
            i = end;
            continue;
        }

        // Whitespace at i (either a lone ' ' before more whitespace / end of
        // text, or some other whitespace character).
        const std::size_t end = run_end(i, CharClass::space);
        if (end == n) {
            out.push_back(piece(i, end));
            i = end;
        } else if (end - i >= 2) {
            out.push_back(piece(i, end - 1));
            i = end - 1;
        } else {
            out.push_back(piece(i, i + 1));
            i += 1;
        }
    }
    return out;
}

struct Tokenizer::Impl {
    std::vector<std::string> id_to_token;
    std::vector<std::string> id_to_bytes;
    std::unordered_map<std::string, TokenId> token_to_id;
    std::array<TokenId, 256> byte_ids{};
    // (left id, right id) -> (rank, merged id)
    std::unordered_map<std::uint64_t, std::pair<std::uint32_t, TokenId>> merges;
    std::size_t merge_count = 0;
};

Tokenizer Tokenizer::from_parts(const std::vector<std::pair<std::string, TokenId>> &vocab,
                                const std::vector<MergeRule> &merges)
{
    auto impl = std::make_shared<Impl>();
    const std::size_t size = vocab.size();
    impl->id_to_token.assign(size, {});
    std::vector<bool> seen(size, false);
    for (const auto &[token, id] : vocab) {
        if (id >= size) {
            throw TokenizerError("vocabulary ids must be dense in [0, " + std::to_string(size) +
                                 "): token '" + token + "' has id " + std::to_string(id));
        }
        if (seen[id]) {
            throw TokenizerError("vocabulary id " + std::to_string(id) + " assigned twice");
        }
        if (!impl->token_to_id.emplace(token, id).second) {
            throw TokenizerError("vocabulary token '" + token + "' appears twice");
        }
        seen[id] = true;
        impl->id_to_token[id] = token;
    }

    std::unordered_map<char32_t, unsigned char> unicode_to_byte;
    const auto &byte_map = byte_to_unicode();
    for (int b = 0; b < 256; ++b) {
        unicode_to_byte[byte_map[b]] = static_cast<unsigned char>(b);
        std::string symbol;
        utf8::append(symbol, byte_map[b]);
        const auto it = impl->token_to_id.find(symbol);
        if (it == impl->token_to_id.end()) {
            throw TokenizerError("vocabulary lacks the symbol for byte " + std::to_string(b));
        }
        impl->byte_ids[b] = it->second;
    }

    impl->id_to_bytes.resize(size);
    for (std::size_t id = 0; id < size; ++id) {
        const auto &token = impl->id_to_token[id];
        std::string bytes;
        for (std::size_t pos = 0; pos < token.size();) {
            const auto d = utf8::decode_one(token, pos);
            const auto it = unicode_to_byte.find(d.cp);
            if (d.valid && it != unicode_to_byte.end()) {
                bytes.push_back(static_cast<char>(it->second));
            } else {
                bytes.append(token.substr(pos, d.length));
            }
            pos += d.length;
        }
        impl->id_to_bytes[id] = std::move(bytes);
    }

    impl->merges.reserve(merges.size());
    for (std::size_t rank = 0; rank < merges.size(); ++rank) {
        const auto &rule = merges[rank];
        const std::string label = "'" + rule.left + " " + rule.right + "'";
        auto lookup = [&](const std::string &token) {
            const auto it = impl->token_to_id.find(token);
            if (it == impl->token_to_id.end()) {
                throw TokenizerError("merge " + label + " (rank " + std::to_string(rank) +
                                     "): '" + token + "' is not in the vocabulary");
            }
            return it->second;
        };
        const TokenId left = lookup(rule.left);
        const TokenId right = lookup(rule.right);
        const TokenId merged = lookup(rule.left + rule.right);
        const auto inserted = impl->merges.emplace(
            pair_key(left, right), std::make_pair(static_cast<std::uint32_t>(rank), merged));
        if (!inserted.second) {
            throw TokenizerError("merge " + label + " is listed twice (rank " +
                                 std::to_string(rank) + ")");
        }
    }
    impl->merge_count = merges.size();
    return Tokenizer(std::move(impl));
}

Tokenizer Tokenizer::load(const std::filesystem::path &vocab_json,
                          const std::filesystem::path &merges_txt)
{
    std::ifstream vin(vocab_json, std::ios::binary);
    if (!vin) {
        throw TokenizerError("cannot open " + vocab_json.string());
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(vin);
    } catch (const nlohmann::json::parse_error &e) {
        throw TokenizerError(vocab_json.string() + ": " + e.what());
    }
    if (!doc.is_object()) {
        throw TokenizerError(vocab_json.string() + ": expected a JSON object of token -> id");
    }
    std::vector<std::pair<std::string, TokenId>> vocab;
    vocab.reserve(doc.size());
    for (const auto &[token, id] : doc.items()) {
        if (!id.is_number_unsigned() || id.get<std::uint64_t>() > std::numeric_limits<TokenId>::max()) {
            throw TokenizerError(vocab_json.string() + ": token '" + token +
                                 "' has a non-integer or out-of-range id");
        }
        vocab.emplace_back(token, id.get<TokenId>());
    }

    std::ifstream min(merges_txt, std::ios::binary);
    if (!min) {
        throw TokenizerError("cannot open " + merges_txt.string());
    }
    std::vector<MergeRule> merges;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(min, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line_no == 1 && line.rfind("#version", 0) == 0) {
            continue;
        }
        if (line.empty()) {
            continue;
        }
        const auto space = line.find(' ');
        if (space == std::string::npos || space == 0 || space + 1 == line.size() ||
            line.find(' ', space + 1) != std::string::npos) {
            throw TokenizerError(merges_txt.string() + ":" + std::to_string(line_no) +
                                 ": expected two space-separated symbols, got '" + line + "'");
        }
        merges.push_back({line.substr(0, space), line.substr(space + 1)});
    }

    try {
        return from_parts(vocab, merges);
    } catch (const TokenizerError &e) {
        throw TokenizerError(vocab_json.string() + " / " + merges_txt.string() + ": " + e.what());
    }
}

Tokenizer Tokenizer::byte_level()
{
    std::vector<std::pair<std::string, TokenId>> vocab;
    const auto &map = byte_to_unicode();
    for (int b = 0; b < 256; ++b) {
        std::string symbol;
        utf8::append(symbol, map[b]);
        vocab.emplace_back(symbol, static_cast<TokenId>(b));
    }
    return from_parts(vocab, {});
}

void Tokenizer::encode_segment(std::string_view segment, std::vector<TokenId> &out) const
{
    const auto &impl = *impl_;
    std::vector<TokenId> word;
    word.reserve(segment.size());
    for (unsigned char b : segment) {
        word.push_back(impl.byte_ids[b]);
    }

    while (word.size() > 1) {
        std::uint32_t best_rank = std::numeric_limits<std::uint32_t>::max();
        TokenId best_left = 0, best_right = 0, best_merged = 0;
        for (std::size_t i = 0; i + 1 < word.size(); ++i) {
            const auto it = impl.merges.find(pair_key(word[i], word[i + 1]));
            if (it != impl.merges.end() && it->second.first < best_rank) {
                best_rank = it->second.first;
                best_left = word[i];
                best_right = word[i + 1];
                best_merged = it->second.second;
            }
        }
        if (best_rank == std::numeric_limits<std::uint32_t>::max()) {
            break;
        }
        // Merge every non-overlapping occurrence, left to right.
        std::size_t w = 0;
        for (std::size_t r = 0; r < word.size();) {
            if (r + 1 < word.size() && word[r] == best_left && word[r + 1] == best_right) {
                word[w++] = best_merged;
                r += 2;
            } else {
                word[w++] = word[r++];
            }
        }
        word.resize(w);
    }
    out.insert(out.end(), word.begin(), word.end());
}

std::vector<TokenId> Tokenizer::encode(std::string_view text) const
{
    std::vector<TokenId> out;
    out.reserve(text.size() / 3 + 1);
    for (const auto segment : pretokenize(text)) {
        encode_segment(segment, out);
    }
    return out;
}

std::vector<TokenId> Tokenizer::encode(std::string_view text, EncodeCache &cache) const
{
    std::vector<TokenId> out;
    out.reserve(text.size() / 3 + 1);
    for (const auto segment : pretokenize(text)) {
        const auto it = cache.entries_.find(std::string(segment));
        if (it != cache.entries_.end()) {
            out.insert(out.end(), it->second.begin(), it->second.end());
            continue;
        }
        const std::size_t before = out.size();
        encode_segment(segment, out);
        if (cache.entries_.size() >= cache.max_entries_) {
            cache.entries_.clear();
        }
        cache.entries_.emplace(std::string(segment),
                               std::vector<TokenId>(out.begin() + before, out.end()));
    }
    return out;
}

std::string Tokenizer::decode(std::span<const TokenId> ids) const
{
    std::string bytes;
    for (TokenId id : ids) {
        if (id >= impl_->id_to_bytes.size()) {
            throw TokenizerError("unknown token id " + std::to_string(id));
        }
        bytes += impl_->id_to_bytes[id];
    }
    return utf8::sanitize(bytes);
}

std::size_t Tokenizer::count_tokens(std::string_view text) const
{
    return encode(text).size();
}

std::size_t Tokenizer::count_unique(std::string_view text) const
{
    const auto ids = encode(text);
    return std::unordered_set<TokenId>(ids.begin(), ids.end()).size();
}

std::size_t Tokenizer::vocab_size() const { return impl_->id_to_token.size(); }

std::size_t Tokenizer::merge_count() const { return impl_->merge_count; }

std::optional<TokenId> Tokenizer::token_id(std::string_view token) const
{
    const auto it = impl_->token_to_id.find(std::string(token));
    if (it == impl_->token_to_id.end()) {
        return std::nullopt;
    }
    return it->second;
}

const std::string &Tokenizer::token_string(TokenId id) const
{
    if (id >= impl_->id_to_token.size()) {
        throw TokenizerError("unknown token id " + std::to_string(id));
    }
    return impl_->id_to_token[id];
}

const std::string &Tokenizer::token_bytes(TokenId id) const
{
    if (id >= impl_->id_to_bytes.size()) {
        throw TokenizerError("unknown token id " + std::to_string(id));
    }
    return impl_->id_to_bytes[id];
}

} // namespace ptkit::bpe
