#include "ptkit/corpus.hpp"

#include "ptkit/error.hpp"
#include "ptkit/parallel.hpp"
#include "ptkit/text_normalize.hpp"
#include "ptkit/utf8.hpp"

#include <json.hpp>
#include <unicode/uchar.h>

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace ptkit::corpus {

namespace {

constexpr std::array<std::string_view, 14> kReasonNames = {
    "none",
    "length",
    "mean_word_length",
    "symbol_ratio",
    "bullet_fraction",
    "ellipsis_fraction",
    "alpha_fraction",
    "stopwords",
    "dup_line_fraction",
    "dup_para_fraction",
    "top_2gram_fraction",
    "top_3gram_fraction",
    "top_4gram_fraction",
    "unique_tokens",
};

constexpr std::array<std::uint64_t, 7> kHistogramBounds = {50, 100, 200, 500, 1000, 5000,
                                                           std::numeric_limits<std::uint64_t>::max()};

bool is_space(char32_t cp) { return u_isUWhiteSpace(static_cast<UChar32>(cp)); }

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

std::string_view trim(std::string_view s)
{
    std::size_t begin = 0;
    while (begin < s.size()) {
        const auto d = utf8::decode_one(s, begin);
        if (!d.valid || !is_space(d.cp)) {
            break;
        }
        begin += d.length;
    }
    std::size_t end = s.size();
    while (end > begin) {
        // Step back to the start of the last code point.
        std::size_t start = end - 1;
        while (start > begin && (static_cast<unsigned char>(s[start]) & 0xC0) == 0x80) {
            --start;
        }
        const auto d = utf8::decode_one(s, start);
        if (!d.valid || start + d.length != end || !is_space(d.cp)) {
            break;
        }
        end = start;
    }
    return s.substr(begin, end - begin);
}

std::vector<std::string_view> split_lines(std::string_view text)
{
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto nl = text.find('\n', start);
        const auto end = nl == std::string_view::npos ? text.size() : nl;
        lines.push_back(text.substr(start, end - start));
        if (nl == std::string_view::npos) {
            break;
        }
        start = nl + 1;
    }
    return lines;
}

bool starts_with_bullet(std::string_view line)
{
    static const std::array<std::string_view, 10> bullets = {
        "•", "●", "○", "◦", "▪", "▫", "‣", "⁃", "-", "*"};
    return std::any_of(bullets.begin(), bullets.end(),
                       [&](std::string_view b) { return line.starts_with(b); });
}

bool ends_with_ellipsis(std::string_view line)
{
    return line.ends_with("…") || line.ends_with("...");
}

std::size_t count_occurrences(std::string_view text, std::string_view needle)
{
    std::size_t count = 0;
    for (auto pos = text.find(needle); pos != std::string_view::npos;
         pos = text.find(needle, pos + needle.size())) {
        ++count;
    }
    return count;
}

// Lowercased word without leading/trailing punctuation.
std::string fold_word(std::string_view word)
{
    auto cps = utf8::decode(word);
    std::size_t begin = 0, end = cps.size();
    while (begin < end && u_ispunct(static_cast<UChar32>(cps[begin]))) {
        ++begin;
    }
    while (end > begin && u_ispunct(static_cast<UChar32>(cps[end - 1]))) {
        --end;
    }
    std::string out;
    for (std::size_t i = begin; i < end; ++i) {
        utf8::append(out, static_cast<char32_t>(u_tolower(static_cast<UChar32>(cps[i]))));
    }
    return out;
}

bool has_alpha(std::string_view word)
{
    for (std::size_t pos = 0; pos < word.size();) {
        const auto d = utf8::decode_one(word, pos);
        if (d.valid && u_isalpha(static_cast<UChar32>(d.cp))) {
            return true;
        }
        pos += d.length;
    }
    return false;
}

// Fraction of characters in blocks (lines or paragraphs) that occur more
// than once.
double duplicate_char_fraction(const std::vector<std::string_view> &blocks)
{
    std::unordered_map<std::string_view, std::size_t> counts;
    for (const auto b : blocks) {
        ++counts[b];
    }
    std::size_t dup = 0, total = 0;
    for (const auto b : blocks) {
        const std::size_t len = utf8::length(b);
        total += len;
        if (counts[b] > 1) {
            dup += len;
        }
    }
    return ratio(static_cast<double>(dup), static_cast<double>(total));
}

struct NgramKeyHash {
    std::size_t operator()(const std::array<std::uint32_t, 4> &k) const noexcept
    {
        std::uint64_t h = 1469598103934665603ULL;
        for (auto v : k) {
            h = (h ^ v) * 1099511628211ULL;
        }
        return static_cast<std::size_t>(h);
    }
};

} // namespace

std::string_view to_string(RejectReason reason)
{
    return kReasonNames.at(static_cast<std::size_t>(reason));
}

std::optional<RejectReason> reject_reason_from_string(std::string_view name)
{
    for (std::size_t i = 0; i < kReasonNames.size(); ++i) {
        if (kReasonNames[i] == name) {
            return static_cast<RejectReason>(i);
        }
    }
    return std::nullopt;
}

void FilterConfig::validate() const
{
    auto fraction = [](double v, const char *name) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw ValidationError(std::string("filter.") + name + " must be in [0, 1]");
        }
    };
    fraction(symbol_word_ratio_max, "symbol_word_ratio_max");
    fraction(bullet_line_frac_max, "bullet_line_frac_max");
    fraction(ellipsis_line_frac_max, "ellipsis_line_frac_max");
    fraction(alpha_word_frac_min, "alpha_word_frac_min");
    fraction(dup_line_frac_max, "dup_line_frac_max");
    fraction(dup_para_frac_max, "dup_para_frac_max");
    fraction(top_ngram_char_frac_max[0], "top_2gram_frac_max");
    fraction(top_ngram_char_frac_max[1], "top_3gram_frac_max");
    fraction(top_ngram_char_frac_max[2], "top_4gram_frac_max");
    if (min_words > max_words) {
        throw ValidationError("filter.min_words must not exceed filter.max_words");
    }
    if (!(mean_word_len_min <= mean_word_len_max)) {
        throw ValidationError("filter.mean_word_len_min must not exceed filter.mean_word_len_max");
    }
    if (stopword_list.empty()) {
        throw ValidationError("filter.stopwords must not be empty");
    }
}

std::vector<std::string_view> split_words(std::string_view text)
{
    std::vector<std::string_view> words;
    std::size_t start = std::string_view::npos;
    for (std::size_t pos = 0; pos < text.size();) {
        const auto d = utf8::decode_one(text, pos);
        const bool space = d.valid && is_space(d.cp);
        if (space && start != std::string_view::npos) {
            words.push_back(text.substr(start, pos - start));
            start = std::string_view::npos;
        } else if (!space && start == std::string_view::npos) {
            start = pos;
        }
        pos += d.length;
    }
    if (start != std::string_view::npos) {
        words.push_back(text.substr(start));
    }
    return words;
}

TextStats text_stats(std::string_view text, const std::vector<std::string> &stopwords)
{
    TextStats s;
    const auto words = split_words(text);
    s.words = words.size();
    if (words.empty()) {
        return s;
    }

    std::size_t chars = 0, alpha = 0;
    const std::unordered_set<std::string> stopset(stopwords.begin(), stopwords.end());
    for (const auto w : words) {
        chars += utf8::length(w);
        if (has_alpha(w)) {
            ++alpha;
        }
        if (stopset.count(fold_word(w)) != 0) {
            ++s.stopword_hits;
        }
    }
    const auto n = static_cast<double>(words.size());
    s.mean_word_length = static_cast<double>(chars) / n;
    s.alpha_word_frac = static_cast<double>(alpha) / n;

    const std::size_t symbols = count_occurrences(text, "#") + count_occurrences(text, "…") +
                                count_occurrences(text, "...");
    s.symbol_word_ratio = static_cast<double>(symbols) / n;

    std::size_t lines = 0, bullets = 0, ellipses = 0;
    for (const auto raw : split_lines(text)) {
        const auto line = trim(raw);
        if (line.empty()) {
            continue;
        }
        ++lines;
        bullets += starts_with_bullet(line) ? 1 : 0;
        ellipses += ends_with_ellipsis(line) ? 1 : 0;
    }
    s.bullet_line_frac = ratio(static_cast<double>(bullets), static_cast<double>(lines));
    s.ellipsis_line_frac = ratio(static_cast<double>(ellipses), static_cast<double>(lines));
    return s;
}

RepetitionStats repetition_stats(std::string_view text)
{
    RepetitionStats r;
    if (text.empty()) {
        return r;
    }

    std::vector<std::string_view> lines;
    std::vector<std::string_view> paragraphs;
    const char *para_begin = nullptr;
    const char *para_end = nullptr;
    for (const auto line : split_lines(text)) {
        if (trim(line).empty()) {
            if (para_begin != nullptr) {
                paragraphs.emplace_back(para_begin, static_cast<std::size_t>(para_end - para_begin));
                para_begin = nullptr;
            }
            continue;
        }
        lines.push_back(line);
        if (para_begin == nullptr) {
            para_begin = line.data();
        }
        para_end = line.data() + line.size();
    }
    if (para_begin != nullptr) {
        paragraphs.emplace_back(para_begin, static_cast<std::size_t>(para_end - para_begin));
    }
    r.dup_line_frac = duplicate_char_fraction(lines);
    r.dup_para_frac = duplicate_char_fraction(paragraphs);

    const auto words = split_words(text);
    std::vector<std::uint32_t> ids;
    std::vector<std::size_t> lengths;
    std::unordered_map<std::string_view, std::uint32_t> intern;
    std::size_t total_chars = 0;
    for (const auto w : words) {
        const auto [it, inserted] = intern.emplace(w, static_cast<std::uint32_t>(intern.size()));
        ids.push_back(it->second);
        lengths.push_back(utf8::length(w));
        total_chars += lengths.back();
    }

    for (std::size_t n = 2; n <= 4; ++n) {
        if (words.size() < n || total_chars == 0) {
            continue;
        }
        std::unordered_map<std::array<std::uint32_t, 4>, std::vector<std::size_t>, NgramKeyHash>
            positions;
        std::vector<std::array<std::uint32_t, 4>> first_seen;
        for (std::size_t i = 0; i + n <= ids.size(); ++i) {
            std::array<std::uint32_t, 4> key{};
            key.fill(std::numeric_limits<std::uint32_t>::max());
            std::copy_n(ids.begin() + static_cast<std::ptrdiff_t>(i), n, key.begin());
            auto &pos = positions[key];
            if (pos.empty()) {
                first_seen.push_back(key);
            }
            pos.push_back(i);
        }

        std::size_t best_count = 0;
        for (const auto &[key, pos] : positions) {
            best_count = std::max(best_count, pos.size());
        }
        // Among the most frequent n-grams take the one covering most
        // characters; earliest first occurrence breaks remaining ties.
        std::size_t best_cover = 0;
        std::size_t best_start = 0;
        bool found = false;
        std::vector<char> covered(words.size());
        for (const auto &key : first_seen) {
            const auto &pos = positions[key];
            if (pos.size() != best_count) {
                continue;
            }
            std::fill(covered.begin(), covered.end(), 0);
            std::size_t cover = 0;
            for (const auto p : pos) {
                for (std::size_t k = p; k < p + n; ++k) {
                    if (!covered[k]) {
                        covered[k] = 1;
                        cover += lengths[k];
                    }
                }
            }
            if (!found || cover > best_cover) {
                best_cover = cover;
                best_start = pos.front();
                found = true;
            }
        }
        r.top_ngram_char_frac[n - 2] =
            static_cast<double>(best_cover) / static_cast<double>(total_chars);
        auto &gram = r.top_ngram[n - 2];
        for (std::size_t k = best_start; k < best_start + n; ++k) {
            gram.emplace_back(words[k]);
        }
    }
    return r;
}

FilterVerdict apply_quality_filters(const RawDocument &doc, const FilterConfig &cfg)
{
    const auto s = text_stats(doc.text, cfg.stopword_list);
    if (s.words == 0 || s.words < cfg.min_words || s.words > cfg.max_words) {
        return FilterVerdict::reject(RejectReason::length);
    }
    if (s.mean_word_length < cfg.mean_word_len_min || s.mean_word_length > cfg.mean_word_len_max) {
        return FilterVerdict::reject(RejectReason::mean_word_length);
    }
    if (s.symbol_word_ratio > cfg.symbol_word_ratio_max) {
        return FilterVerdict::reject(RejectReason::symbol_ratio);
    }
    if (s.bullet_line_frac > cfg.bullet_line_frac_max) {
        return FilterVerdict::reject(RejectReason::bullet_fraction);
    }
    if (s.ellipsis_line_frac > cfg.ellipsis_line_frac_max) {
        return FilterVerdict::reject(RejectReason::ellipsis_fraction);
    }
    if (s.alpha_word_frac < cfg.alpha_word_frac_min) {
        return FilterVerdict::reject(RejectReason::alpha_fraction);
    }
    if (s.stopword_hits < cfg.min_stopword_hits) {
        return FilterVerdict::reject(RejectReason::stopwords);
    }

    const auto r = repetition_stats(doc.text);
    if (r.dup_line_frac > cfg.dup_line_frac_max) {
        return FilterVerdict::reject(RejectReason::dup_line_fraction);
    }
    if (r.dup_para_frac > cfg.dup_para_frac_max) {
        return FilterVerdict::reject(RejectReason::dup_para_fraction);
    }
    constexpr std::array<RejectReason, 3> ngram_reasons = {RejectReason::top_2gram_fraction,
                                                           RejectReason::top_3gram_fraction,
                                                           RejectReason::top_4gram_fraction};
    for (std::size_t i = 0; i < 3; ++i) {
        if (r.top_ngram_char_frac[i] > cfg.top_ngram_char_frac_max[i]) {
            return FilterVerdict::reject(ngram_reasons[i]);
        }
    }
    return FilterVerdict::keep();
}

std::size_t unique_token_count(std::string_view text, const bpe::Tokenizer &tokenizer)
{
    return tokenizer.count_unique(text);
}

std::size_t unique_word_count(std::string_view text)
{
    const auto words = split_words(text);
    return std::unordered_set<std::string_view>(words.begin(), words.end()).size();
}

std::uint64_t CorpusStats::total_rejected() const
{
    std::uint64_t total = 0;
    for (const auto &[reason, count] : rejections) {
        total += count;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Sources

JsonlSource::JsonlSource(const std::filesystem::path &path)
    : path_(path), in_(std::make_unique<std::ifstream>(path, std::ios::binary))
{
    if (!*in_) {
        throw ValidationError("cannot open corpus file " + path.string());
    }
}

std::optional<RawDocument> JsonlSource::next()
{
    std::string line;
    while (std::getline(*in_, line)) {
        ++line_no_;
        if (trim(line).empty()) {
            continue;
        }
        const auto where = path_.string() + ":" + std::to_string(line_no_);
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(utf8::sanitize(line));
        } catch (const nlohmann::json::parse_error &e) {
            throw ValidationError(where + ": malformed JSON record (" + e.what() + ")");
        }
        if (!obj.is_object() || !obj.contains("text") || !obj["text"].is_string()) {
            throw ValidationError(where + ": record needs a string \"text\" field");
        }
        RawDocument doc;
        if (obj.contains("id") && obj["id"].is_string()) {
            doc.id = obj["id"].get<std::string>();
        } else if (obj.contains("id") && obj["id"].is_number_integer()) {
            doc.id = std::to_string(obj["id"].get<long long>());
        } else {
            doc.id = std::to_string(line_no_);
        }
        doc.text = obj["text"].get<std::string>();
        if (obj.contains("source") && obj["source"].is_string()) {
            doc.source = obj["source"].get<std::string>();
        }
        return doc;
    }
    return std::nullopt;
}

DirectorySource::DirectorySource(const std::filesystem::path &root) : root_(root)
{
    if (!std::filesystem::is_directory(root)) {
        throw ValidationError("corpus directory " + root.string() + " does not exist");
    }
    for (const auto &entry : std::filesystem::recursive_directory_iterator(root)) {
        if (entry.is_regular_file()) {
            files_.push_back(std::filesystem::relative(entry.path(), root));
        }
    }
    std::sort(files_.begin(), files_.end(), [](const auto &a, const auto &b) {
        return a.generic_string() < b.generic_string();
    });
}

std::optional<RawDocument> DirectorySource::next()
{
    if (index_ >= files_.size()) {
        return std::nullopt;
    }
    const auto &rel = files_[index_++];
    std::ifstream in(root_ / rel, std::ios::binary);
    if (!in) {
        throw RuntimeError("cannot read " + (root_ / rel).string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return RawDocument{rel.generic_string(), utf8::sanitize(buf.str()), (root_ / rel).string()};
}

std::optional<RawDocument> VectorSource::next()
{
    if (index_ >= docs_.size()) {
        return std::nullopt;
    }
    return docs_[index_++];
}

// ---------------------------------------------------------------------------
// Pipeline

CorpusPipeline::CorpusPipeline(std::shared_ptr<const bpe::Tokenizer> tokenizer,
                               PipelineOptions options)
    : tokenizer_(std::move(tokenizer)), options_(std::move(options))
{
    options_.filter.validate();
    if (!tokenizer_ && options_.apply_filters &&
        options_.filter.unique_token_mode == UniqueTokenMode::bpe) {
        throw ValidationError("the unique-token rule in bpe mode needs a tokenizer");
    }
    if (options_.batch_size == 0) {
        options_.batch_size = 1;
    }
}

DocumentOutcome CorpusPipeline::process(const RawDocument &doc) const
{
    DocumentOutcome out;
    out.id = doc.id;
    out.text = options_.normalize ? normalize_text(doc.text) : utf8::sanitize(doc.text);

    if (options_.apply_filters) {
        out.verdict = apply_quality_filters(RawDocument{doc.id, out.text, doc.source}, options_.filter);
        if (!out.verdict.kept) {
            return out;
        }
    }

    if (tokenizer_) {
        out.tokens = tokenizer_->encode(out.text);
    }
    if (options_.filter.unique_token_mode == UniqueTokenMode::bpe) {
        out.unique_tokens = std::unordered_set<bpe::TokenId>(out.tokens.begin(), out.tokens.end()).size();
    } else {
        out.unique_tokens = unique_word_count(out.text);
    }
    if (options_.apply_filters && out.unique_tokens < options_.filter.min_unique_tokens) {
        out.verdict = FilterVerdict::reject(RejectReason::unique_tokens);
        out.tokens.clear();
    }
    return out;
}

CorpusStats CorpusPipeline::run(DocumentSource &source, const Callback &on_kept,
                                const Callback &on_rejected) const
{
    CorpusStats stats;
    std::vector<RawDocument> batch;
    std::vector<DocumentOutcome> results;
    bool done = false;
    while (!done) {
        batch.clear();
        while (batch.size() < options_.batch_size) {
            auto doc = source.next();
            if (!doc) {
                done = true;
                break;
            }
            batch.push_back(std::move(*doc));
        }
        results.assign(batch.size(), {});
        parallel_for(batch.size(), options_.workers,
                     [&](std::size_t i) { results[i] = process(batch[i]); });

        for (const auto &outcome : results) {
            ++stats.docs_in;
            const bool reached_unique_rule =
                outcome.verdict.kept || outcome.verdict.reason == RejectReason::unique_tokens;
            if (options_.apply_filters && reached_unique_rule) {
                const auto bucket = *std::find_if(
                    kHistogramBounds.begin(), kHistogramBounds.end(),
                    [&](std::uint64_t bound) { return outcome.unique_tokens < bound; });
                ++stats.unique_token_histogram[bucket];
            }
            if (outcome.verdict.kept) {
                ++stats.docs_kept;
                if (tokenizer_) {
                    stats.tokens_emitted += outcome.tokens.size() + 1;
                }
                if (on_kept) {
                    on_kept(outcome);
                }
            } else {
                ++stats.rejections[outcome.verdict.reason];
                if (on_rejected) {
                    on_rejected(outcome);
                }
            }
        }
    }
    return stats;
}

PackResult pack_corpus(const std::vector<RawDocument> &kept_docs,
                       const bpe::Tokenizer &tokenizer, bpe::TokenId eos_id, std::size_t workers)
{
    if (eos_id >= tokenizer.vocab_size()) {
        throw ValidationError("end-of-sequence id " + std::to_string(eos_id) +
                              " is outside the vocabulary");
    }
    std::vector<std::vector<bpe::TokenId>> encoded(kept_docs.size());
    parallel_for(kept_docs.size(), workers,
                 [&](std::size_t i) { encoded[i] = tokenizer.encode(kept_docs[i].text); });

    PackResult result;
    for (const auto &ids : encoded) {
        result.tokens.insert(result.tokens.end(), ids.begin(), ids.end());
        result.tokens.push_back(eos_id);
    }
    result.stats.docs_in = kept_docs.size();
    result.stats.docs_kept = kept_docs.size();
    result.stats.tokens_emitted = result.tokens.size();
    return result;
}

// ---------------------------------------------------------------------------
// Token files

TokenWriter::TokenWriter(const std::filesystem::path &path)
    : path_(path), out_(std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc))
{
    if (!*out_) {
        throw RuntimeError("cannot open " + path.string() + " for writing");
    }
}

void TokenWriter::write(std::span<const bpe::TokenId> ids)
{
    std::string buf;
    buf.resize(ids.size() * 4);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto v = ids[i];
        buf[4 * i + 0] = static_cast<char>(v & 0xFF);
        buf[4 * i + 1] = static_cast<char>((v >> 8) & 0xFF);
        buf[4 * i + 2] = static_cast<char>((v >> 16) & 0xFF);
        buf[4 * i + 3] = static_cast<char>((v >> 24) & 0xFF);
    }
    out_->write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!*out_) {
        throw RuntimeError("write to " + path_.string() + " failed");
    }
    written_ += ids.size();
}

void TokenWriter::close()
{
    out_->flush();
    if (!*out_) {
        throw RuntimeError("flush of " + path_.string() + " failed");
    }
    static_cast<std::ofstream &>(*out_).close();
}

std::vector<bpe::TokenId> read_token_file(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw RuntimeError("cannot open " + path.string());
    }
    std::vector<bpe::TokenId> ids;
    std::array<unsigned char, 4> b{};
    while (in.read(reinterpret_cast<char *>(b.data()), 4)) {
        ids.push_back(static_cast<bpe::TokenId>(b[0]) | (static_cast<bpe::TokenId>(b[1]) << 8) |
                      (static_cast<bpe::TokenId>(b[2]) << 16) |
                      (static_cast<bpe::TokenId>(b[3]) << 24));
    }
    if (in.gcount() != 0) {
        throw RuntimeError(path.string() + " is not a whole number of 32-bit ids");
    }
    return ids;
}

} // namespace ptkit::corpus
