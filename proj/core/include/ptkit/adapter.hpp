#pragma once

#include "ptkit/bpe.hpp"

#include <array>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <vector>

namespace ptkit::adapter {

struct ScoreRequest {
    std::string prompt;
    std::string continuation;
};

struct ScoreResponse {
    std::vector<double> token_logprobs; // natural log
    std::size_t token_count = 0;

    double total() const;
};

enum class FinishReason { stop, length, error };

std::string_view to_string(FinishReason reason);

struct GenerateRequest {
    std::string prompt;
    std::size_t max_tokens = 32;
    std::vector<std::string> stop;
};

struct GenerateResponse {
    std::string text;
    FinishReason finish_reason = FinishReason::stop;
};

class AdapterError : public std::runtime_error {
public:
    AdapterError(const std::string &what, bool retriable)
        : std::runtime_error(what), retriable_(retriable)
    {
    }
    bool retriable() const noexcept { return retriable_; }

private:
    bool retriable_;
};

// The model boundary. Implementations must be safe to call concurrently.
class ModelAdapter {
public:
    virtual ~ModelAdapter() = default;
    virtual ScoreResponse score(const ScoreRequest &request) = 0;
    virtual GenerateResponse generate(const GenerateRequest &request) = 0;
};

// ---------------------------------------------------------------------------
// Mock model

struct ScoreEntry {
    std::string prompt;
    std::string continuation;
    std::vector<double> logprobs;
};

struct GenerateEntry {
    std::string prompt;
    std::string text;
};

enum class PromptMatch {
    exact,
    // The entry matches when the request prompt ends with entry.prompt; the
    // longest matching entry wins.
    suffix,
};

struct MockModelSpec {
    enum class Mode { unigram, lookup };

    Mode mode = Mode::unigram;
    std::uint64_t seed = 0;
    double smoothing = 1.0;
    PromptMatch match = PromptMatch::exact;
    std::vector<ScoreEntry> scores;
    std::vector<GenerateEntry> generations;

    void validate() const;

    // {"mode": "lookup"|"unigram", "seed", "smoothing", "match",
    //  "scores": [{"prompt", "continuation", "logprobs": [..]}],
    //  "generations": [{"prompt", "text"}]}
    static MockModelSpec load(const std::filesystem::path &path);
};

// Deterministic stand-in for a language model.
//
// unigram: every byte b has probability (w_b + smoothing) / sum, with w_b
// drawn from a seeded mt19937_64; a token's log-probability is the sum over
// its bytes. Continuations are split into tokens by the tokenizer when one is
// given, otherwise one token per byte. Generation greedily repeats the most
// likely printable ASCII byte.
//
// lookup: score and generate answer from the tables; a miss is a
// non-retriable AdapterError naming the key.
class MockModel : public ModelAdapter {
public:
    explicit MockModel(MockModelSpec spec,
                       std::shared_ptr<const bpe::Tokenizer> tokenizer = nullptr);

    ScoreResponse score(const ScoreRequest &request) override;
    GenerateResponse generate(const GenerateRequest &request) override;

    // Unigram log-probability of one byte.
    double byte_logprob(unsigned char b) const { return byte_logprobs_[b]; }

private:
    std::vector<std::string> split_tokens(const std::string &text) const;
    template <typename Entry>
    const Entry *find(const std::vector<Entry> &entries, const std::string &prompt,
                      const std::string *continuation) const;

    MockModelSpec spec_;
    std::shared_ptr<const bpe::Tokenizer> tokenizer_;
    std::array<double, 256> byte_logprobs_{};
};

// ---------------------------------------------------------------------------
// HTTP client

struct HttpConfig {
    std::string base_url; // scheme://host[:port][/prefix]
    std::string auth_header_name = "Authorization";
    std::string auth_header_value; // empty: no header
    std::chrono::milliseconds timeout{30000};
    std::size_t max_attempts = 3;
    std::chrono::milliseconds backoff_initial{200};
    double backoff_multiplier = 2.0;
    std::size_t max_inflight = 8;

    void validate() const;
};

// POST {base}/v1/score    {"prompt", "continuation"} -> {"token_logprobs", "token_count"}
// POST {base}/v1/generate {"prompt", "max_tokens", "stop"} -> {"text", "finish_reason"}
//
// Network failures, timeouts, HTTP 429 and 5xx are retried with exponential
// backoff up to max_attempts; other statuses and schema violations fail
// immediately.
class HttpModel : public ModelAdapter {
public:
    explicit HttpModel(HttpConfig config);

    ScoreResponse score(const ScoreRequest &request) override;
    GenerateResponse generate(const GenerateRequest &request) override;

    std::size_t attempts_made() const { return attempts_.load(); }

private:
    std::string post(const std::string &path, const std::string &body);

    HttpConfig config_;
    std::string scheme_host_port_;
    std::string path_prefix_;
    std::counting_semaphore<1024> inflight_;
    std::atomic<std::size_t> attempts_{0};
};

// Validates a /v1/score response body; throws a non-retriable AdapterError
// quoting the start of the payload.
ScoreResponse parse_score_response(const std::string &body);
GenerateResponse parse_generate_response(const std::string &body);

} // namespace ptkit::adapter
