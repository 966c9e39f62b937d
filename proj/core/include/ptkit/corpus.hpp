#pragma once

#include "ptkit/bpe.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ptkit::corpus {

struct RawDocument {
    std::string id;
    std::string text;
    std::optional<std::string> source;
};

// One value per filter rule, in evaluation order.
enum class RejectReason {
    none,
    length,
    mean_word_length,
    symbol_ratio,
    bullet_fraction,
    ellipsis_fraction,
    alpha_fraction,
    stopwords,
    dup_line_fraction,
    dup_para_fraction,
    top_2gram_fraction,
    top_3gram_fraction,
    top_4gram_fraction,
    unique_tokens,
};

inline constexpr std::array kRejectReasons = {
    RejectReason::length,           RejectReason::mean_word_length,
    RejectReason::symbol_ratio,     RejectReason::bullet_fraction,
    RejectReason::ellipsis_fraction, RejectReason::alpha_fraction,
    RejectReason::stopwords,        RejectReason::dup_line_fraction,
    RejectReason::dup_para_fraction, RejectReason::top_2gram_fraction,
    RejectReason::top_3gram_fraction, RejectReason::top_4gram_fraction,
    RejectReason::unique_tokens,
};

std::string_view to_string(RejectReason reason);
std::optional<RejectReason> reject_reason_from_string(std::string_view name);

struct FilterVerdict {
    bool kept = true;
    RejectReason reason = RejectReason::none;

    static FilterVerdict keep() { return {true, RejectReason::none}; }
    static FilterVerdict reject(RejectReason r) { return {false, r}; }
    friend bool operator==(const FilterVerdict &, const FilterVerdict &) = default;
};

// How the unique-token rule counts tokens.
enum class UniqueTokenMode { bpe, whitespace };

// Quality thresholds. Fractions are in [0, 1]; a document is rejected when a
// "max" value is exceeded or a "min" value is not reached.
struct FilterConfig {
    std::size_t min_words = 50;
    std::size_t max_words = 100000;
    double mean_word_len_min = 3.0;
    double mean_word_len_max = 10.0;
    double symbol_word_ratio_max = 0.1;
    double bullet_line_frac_max = 0.9;
    double ellipsis_line_frac_max = 0.3;
    double alpha_word_frac_min = 0.8;
    std::size_t min_stopword_hits = 2;
    std::vector<std::string> stopword_list = {"e", "de", "que", "o", "a",
                                              "em", "com", "para", "um", "uma"};
    double dup_line_frac_max = 0.2;
    double dup_para_frac_max = 0.3;
    // Indexed by n - 2 for n = 2, 3, 4.
    std::array<double, 3> top_ngram_char_frac_max = {0.20, 0.18, 0.16};
    std::size_t min_unique_tokens = 200;
    UniqueTokenMode unique_token_mode = UniqueTokenMode::bpe;

    // Throws ValidationError describing the first broken invariant.
    void validate() const;

    friend bool operator==(const FilterConfig &, const FilterConfig &) = default;
};

struct RepetitionStats {
    double dup_line_frac = 0.0;
    double dup_para_frac = 0.0;
    std::array<double, 3> top_ngram_char_frac{};
    // The n-gram behind each top_ngram_char_frac entry (empty if none).
    std::array<std::vector<std::string>, 3> top_ngram;

    double top_ngram_frac(std::size_t n) const { return top_ngram_char_frac.at(n - 2); }
};

RepetitionStats repetition_stats(std::string_view text);

// Surface measurements used by the non-repetition rules.
struct TextStats {
    std::size_t words = 0;
    double mean_word_length = 0.0;
    double symbol_word_ratio = 0.0;
    double bullet_line_frac = 0.0;
    double ellipsis_line_frac = 0.0;
    double alpha_word_frac = 0.0;
    std::size_t stopword_hits = 0;
};

TextStats text_stats(std::string_view text, const std::vector<std::string> &stopwords);

// First failing rule in the order length, mean word length, symbol ratio,
// bullet lines, ellipsis lines, alphabetic words, stopwords, repetition.
// The unique-token rule needs a tokenizer and is applied by the pipeline.
FilterVerdict apply_quality_filters(const RawDocument &doc, const FilterConfig &cfg);

std::size_t unique_token_count(std::string_view text, const bpe::Tokenizer &tokenizer);
std::size_t unique_word_count(std::string_view text);

// Whitespace-separated words; whitespace is the Unicode White_Space set.
std::vector<std::string_view> split_words(std::string_view text);

struct CorpusStats {
    std::uint64_t docs_in = 0;
    std::uint64_t docs_kept = 0;
    std::map<RejectReason, std::uint64_t> rejections;
    std::uint64_t tokens_emitted = 0;
    // Distinct-token counts of documents that reached the unique-token rule,
    // bucketed by upper bound (last bucket is open).
    std::map<std::uint64_t, std::uint64_t> unique_token_histogram;

    std::uint64_t total_rejected() const;
    bool balanced() const { return docs_in == docs_kept + total_rejected(); }
    friend bool operator==(const CorpusStats &, const CorpusStats &) = default;
};

struct DocumentOutcome {
    std::string id;
    std::string text; // normalized
    FilterVerdict verdict;
    std::vector<bpe::TokenId> tokens; // only for kept documents
    std::size_t unique_tokens = 0;
};

// Pull-style document source.
class DocumentSource {
public:
    virtual ~DocumentSource() = default;
    virtual std::optional<RawDocument> next() = 0;
};

// One JSON object {"id", "text", "source"?} per line. Invalid UTF-8 in the
// text is replaced at ingest. Blank lines are skipped.
class JsonlSource : public DocumentSource {
public:
    explicit JsonlSource(const std::filesystem::path &path);
    std::optional<RawDocument> next() override;

private:
    std::filesystem::path path_;
    std::unique_ptr<std::istream> in_;
    std::size_t line_no_ = 0;
};

// Every regular file below a directory, sorted by relative path; the
// relative path is the document id.
class DirectorySource : public DocumentSource {
public:
    explicit DirectorySource(const std::filesystem::path &root);
    std::optional<RawDocument> next() override;

private:
    std::filesystem::path root_;
    std::vector<std::filesystem::path> files_;
    std::size_t index_ = 0;
};

class VectorSource : public DocumentSource {
public:
    explicit VectorSource(std::vector<RawDocument> docs) : docs_(std::move(docs)) {}
    std::optional<RawDocument> next() override;

private:
    std::vector<RawDocument> docs_;
    std::size_t index_ = 0;
};

struct PipelineOptions {
    FilterConfig filter;
    bool normalize = true;
    bool apply_filters = true;
    // 0 = hardware concurrency.
    std::size_t workers = 1;
    std::size_t batch_size = 256;
};

// normalize -> quality filters -> encode -> unique-token rule. Documents are
// processed in parallel batches and handed to the callbacks strictly in
// input order, so output never depends on the worker count.
class CorpusPipeline {
public:
    // tokenizer may be null only when the unique-token rule runs in
    // whitespace mode and no packing is needed.
    CorpusPipeline(std::shared_ptr<const bpe::Tokenizer> tokenizer, PipelineOptions options);

    DocumentOutcome process(const RawDocument &doc) const;

    using Callback = std::function<void(const DocumentOutcome &)>;
    CorpusStats run(DocumentSource &source, const Callback &on_kept,
                    const Callback &on_rejected) const;

private:
    std::shared_ptr<const bpe::Tokenizer> tokenizer_;
    PipelineOptions options_;
};

struct PackResult {
    std::vector<bpe::TokenId> tokens;
    CorpusStats stats;
};

// encode(d1) ++ [eos] ++ encode(d2) ++ [eos] ++ ... for already-kept documents.
PackResult pack_corpus(const std::vector<RawDocument> &kept_docs,
                       const bpe::Tokenizer &tokenizer, bpe::TokenId eos_id,
                       std::size_t workers = 1);

// Appends ids as little-endian uint32 to a stream; throws RuntimeError on a
// failed write.
class TokenWriter {
public:
    explicit TokenWriter(const std::filesystem::path &path);
    void write(std::span<const bpe::TokenId> ids);
    void close();
    std::uint64_t written() const { return written_; }

private:
    std::filesystem::path path_;
    std::unique_ptr<std::ostream> out_;
    std::uint64_t written_ = 0;
};

std::vector<bpe::TokenId> read_token_file(const std::filesystem::path &path);

} // namespace ptkit::corpus
