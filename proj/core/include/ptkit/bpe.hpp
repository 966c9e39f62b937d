#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ptkit::bpe {

using TokenId = std::uint32_t;

class TokenizerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MergeRule {
    std::string left;
    std::string right;
};

// GPT-2's reversible byte -> printable code point map. Printable Latin-1
// bytes map to themselves, the rest to U+0100 upward.
const std::array<char32_t, 256> &byte_to_unicode();

// Splits text into the segments BPE merges are confined to. The rule is the
// GPT-2 one, tried in this order at every position:
//   1. an apostrophe contraction: 's 't 're 've 'm 'll 'd
//   2. an optional U+0020 followed by a run of letters (general category L*)
//   3. an optional U+0020 followed by a run of numbers (category N*)
//   4. an optional U+0020 followed by a run of anything that is neither
//      whitespace, letter nor number
//   5. a whitespace run, minus its last character when a non-space follows
//   6. a single whitespace character
// Ill-formed UTF-8 bytes are classified as "anything else".
std::vector<std::string_view> pretokenize(std::string_view text);

// Caller-owned memo of segment encodings. Not thread-safe; keep one per
// thread.
class EncodeCache {
public:
    explicit EncodeCache(std::size_t max_entries = 1 << 16) : max_entries_(max_entries) {}

private:
    friend class Tokenizer;
    std::size_t max_entries_;
    std::unordered_map<std::string, std::vector<TokenId>> entries_;
};

// Byte-level BPE tokenizer compatible with the GPT-2 vocab.json/merges.txt
// pair. Immutable once built; copies share state.
class Tokenizer {
public:
    // Throws TokenizerError naming the file and line of the first problem.
    static Tokenizer load(const std::filesystem::path &vocab_json,
                          const std::filesystem::path &merges_txt);

    // vocab: token string (in byte-mapped form) -> id; ids must be dense.
    static Tokenizer from_parts(const std::vector<std::pair<std::string, TokenId>> &vocab,
                                const std::vector<MergeRule> &merges);

    // The 256 byte symbols and nothing else: one token per byte.
    static Tokenizer byte_level();

    std::vector<TokenId> encode(std::string_view text) const;
    std::vector<TokenId> encode(std::string_view text, EncodeCache &cache) const;

    // Ill-formed UTF-8 produced by an arbitrary id sequence becomes U+FFFD.
    // Throws TokenizerError on an id outside the vocabulary.
    std::string decode(std::span<const TokenId> ids) const;

    std::size_t count_tokens(std::string_view text) const;
    std::size_t count_unique(std::string_view text) const;

    std::size_t vocab_size() const;
    std::size_t merge_count() const;
    std::optional<TokenId> token_id(std::string_view token) const;
    const std::string &token_string(TokenId id) const;
    // Raw bytes a token stands for (may be a partial UTF-8 sequence).
    const std::string &token_bytes(TokenId id) const;

private:
    struct Impl;
    explicit Tokenizer(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

    void encode_segment(std::string_view segment, std::vector<TokenId> &out) const;

    std::shared_ptr<const Impl> impl_;
};

} // namespace ptkit::bpe
