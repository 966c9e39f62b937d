#include "ptkit/adapter.hpp"

#include "ptkit/error.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <random>
#include <thread>
#include <type_traits>

namespace ptkit::adapter {

using nlohmann::json;

namespace {

std::string excerpt(const std::string &body)
{
    constexpr std::size_t kMax = 200;
    return body.size() <= kMax ? body : body.substr(0, kMax) + "...";
}

[[noreturn]] void schema_error(const std::string &what, const std::string &body)
{
    throw AdapterError("malformed model response: " + what + "; payload: " + excerpt(body), false);
}

json parse_body(const std::string &body)
{
    try {
        auto j = json::parse(body);
        if (!j.is_object()) {
            schema_error("expected a JSON object", body);
        }
        return j;
    } catch (const json::parse_error &) {
        schema_error("not valid JSON", body);
    }
}

class InflightSlot {
public:
    explicit InflightSlot(std::counting_semaphore<1024> &sem) : sem_(sem) { sem_.acquire(); }
    ~InflightSlot() { sem_.release(); }
    InflightSlot(const InflightSlot &) = delete;
    InflightSlot &operator=(const InflightSlot &) = delete;

private:
    std::counting_semaphore<1024> &sem_;
};

} // namespace

double ScoreResponse::total() const
{
    double sum = 0.0;
    for (double lp : token_logprobs) {
        sum += lp;
    }
    return sum;
}

std::string_view to_string(FinishReason reason)
{
    switch (reason) {
    case FinishReason::stop:
        return "stop";
    case FinishReason::length:
        return "length";
    case FinishReason::error:
        return "error";
    }
    return "error";
}

// ---------------------------------------------------------------------------
// Mock

void MockModelSpec::validate() const
{
    if (!(smoothing > 0.0)) {
        throw ValidationError("mock smoothing must be positive");
    }
    for (const auto &e : scores) {
        for (double lp : e.logprobs) {
            if (!std::isfinite(lp) || lp > 0.0) {
                throw ValidationError("mock score table entry for continuation '" +
                                      e.continuation + "' has a log-probability outside (-inf, 0]");
            }
        }
    }
}

MockModelSpec MockModelSpec::load(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open mock model file " + path.string());
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error &e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    MockModelSpec spec;
    try {
        const auto mode = j.value("mode", std::string("lookup"));
        if (mode == "lookup") {
            spec.mode = Mode::lookup;
        } else if (mode == "unigram") {
            spec.mode = Mode::unigram;
        } else {
            throw ValidationError(path.string() + ": unknown mock mode '" + mode + "'");
        }
        spec.seed = j.value("seed", std::uint64_t{0});
        spec.smoothing = j.value("smoothing", 1.0);
        const auto match = j.value("match", std::string("exact"));
        if (match == "exact") {
            spec.match = PromptMatch::exact;
        } else if (match == "suffix") {
            spec.match = PromptMatch::suffix;
        } else {
            throw ValidationError(path.string() + ": unknown prompt match '" + match + "'");
        }
        for (const auto &e : j.value("scores", json::array())) {
            spec.scores.push_back({e.at("prompt").get<std::string>(),
                                   e.at("continuation").get<std::string>(),
                                   e.at("logprobs").get<std::vector<double>>()});
        }
        for (const auto &e : j.value("generations", json::array())) {
            spec.generations.push_back(
                {e.at("prompt").get<std::string>(), e.at("text").get<std::string>()});
        }
    } catch (const json::exception &e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    spec.validate();
    return spec;
}

MockModel::MockModel(MockModelSpec spec, std::shared_ptr<const bpe::Tokenizer> tokenizer)
    : spec_(std::move(spec)), tokenizer_(std::move(tokenizer))
{
    spec_.validate();
    std::mt19937_64 engine(spec_.seed);
    std::array<double, 256> weights{};
    double sum = 0.0;
    for (auto &w : weights) {
        w = static_cast<double>(engine() >> 11) * 0x1.0p-53 + spec_.smoothing;
        sum += w;
    }
    for (std::size_t b = 0; b < 256; ++b) {
        byte_logprobs_[b] = std::log(weights[b] / sum);
    }
}

std::vector<std::string> MockModel::split_tokens(const std::string &text) const
{
    std::vector<std::string> tokens;
    if (tokenizer_) {
        for (auto id : tokenizer_->encode(text)) {
            tokens.push_back(tokenizer_->token_bytes(id));
        }
    } else {
        for (char c : text) {
            tokens.emplace_back(1, c);
        }
    }
    return tokens;
}

template <typename Entry>
const Entry *MockModel::find(const std::vector<Entry> &entries, const std::string &prompt,
                             const std::string *continuation) const
{
    const Entry *best = nullptr;
    for (const auto &e : entries) {
        if constexpr (std::is_same_v<Entry, ScoreEntry>) {
            if (e.continuation != *continuation) {
                continue;
            }
        }
        const bool hit = spec_.match == PromptMatch::exact ? e.prompt == prompt
                                                           : prompt.ends_with(e.prompt);
        if (hit && (best == nullptr || e.prompt.size() > best->prompt.size())) {
            best = &e;
        }
    }
    return best;
}

ScoreResponse MockModel::score(const ScoreRequest &request)
{
    ScoreResponse response;
    if (spec_.mode == MockModelSpec::Mode::lookup) {
        const auto *entry = find(spec_.scores, request.prompt, &request.continuation);
        if (entry == nullptr) {
            const auto tail = request.prompt.size() > 60
                                  ? "..." + request.prompt.substr(request.prompt.size() - 60)
                                  : request.prompt;
            throw AdapterError("mock lookup miss for prompt '" + tail + "' / continuation '" +
                                   request.continuation + "'",
                               false);
        }
        response.token_logprobs = entry->logprobs;
    } else {
        for (const auto &token : split_tokens(request.continuation)) {
            double lp = 0.0;
            for (unsigned char b : token) {
                lp += byte_logprobs_[b];
            }
            response.token_logprobs.push_back(lp);
        }
    }
    response.token_count = response.token_logprobs.size();
    return response;
}

GenerateResponse MockModel::generate(const GenerateRequest &request)
{
    std::vector<std::string> tokens;
    bool natural_end = true;
    if (spec_.mode == MockModelSpec::Mode::lookup) {
        const auto *entry = find(spec_.generations, request.prompt, nullptr);
        if (entry == nullptr) {
            throw AdapterError("mock lookup miss for generation prompt ending '" +
                                   request.prompt.substr(request.prompt.size() -
                                                         std::min<std::size_t>(60, request.prompt.size())) +
                                   "'",
                               false);
        }
        tokens = split_tokens(entry->text);
    } else {
        unsigned char best = 'a';
        for (unsigned char b = 0x21; b < 0x7F; ++b) {
            if (byte_logprobs_[b] > byte_logprobs_[best]) {
                best = b;
            }
        }
        tokens.assign(request.max_tokens, std::string(1, static_cast<char>(best)));
        natural_end = false;
    }

    GenerateResponse response;
    std::size_t emitted = 0;
    for (const auto &token : tokens) {
        if (emitted == request.max_tokens) {
            response.finish_reason = FinishReason::length;
            return response;
        }
        response.text += token;
        ++emitted;
        for (const auto &stop : request.stop) {
            if (stop.empty()) {
                continue;
            }
            const auto pos = response.text.find(stop);
            if (pos != std::string::npos) {
                response.text.resize(pos);
                response.finish_reason = FinishReason::stop;
                return response;
            }
        }
    }
    response.finish_reason = natural_end ? FinishReason::stop : FinishReason::length;
    return response;
}

// ---------------------------------------------------------------------------
// HTTP

void HttpConfig::validate() const
{
    if (!(base_url.starts_with("http://") || base_url.starts_with("https://"))) {
        throw ValidationError("adapter URL must start with http:// or https://, got '" + base_url + "'");
    }
    if (max_attempts == 0) {
        throw ValidationError("adapter.max_attempts must be at least 1");
    }
    if (max_inflight == 0 || max_inflight > 1024) {
        throw ValidationError("adapter.max_inflight must be in [1, 1024]");
    }
    if (timeout.count() <= 0) {
        throw ValidationError("adapter.timeout_ms must be positive");
    }
    if (!(backoff_multiplier >= 1.0)) {
        throw ValidationError("adapter backoff multiplier must be >= 1");
    }
}

namespace {

std::ptrdiff_t checked_inflight(const HttpConfig &config)
{
    config.validate();
    return static_cast<std::ptrdiff_t>(config.max_inflight);
}

} // namespace

HttpModel::HttpModel(HttpConfig config)
    : config_(std::move(config)), inflight_(checked_inflight(config_))
{
    const auto scheme_end = config_.base_url.find("://") + 3;
    const auto slash = config_.base_url.find('/', scheme_end);
    if (slash == std::string::npos) {
        scheme_host_port_ = config_.base_url;
    } else {
        scheme_host_port_ = config_.base_url.substr(0, slash);
        path_prefix_ = config_.base_url.substr(slash);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') {
            path_prefix_.pop_back();
        }
    }
}

std::string HttpModel::post(const std::string &path, const std::string &body)
{
    InflightSlot slot(inflight_);
    httplib::Headers headers;
    if (!config_.auth_header_value.empty()) {
        headers.emplace(config_.auth_header_name, config_.auth_header_value);
    }

    auto delay = config_.backoff_initial;
    std::string last_error;
    for (std::size_t attempt = 1; attempt <= config_.max_attempts; ++attempt) {
        ++attempts_;
        httplib::Client client(scheme_host_port_);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());

        const auto res = client.Post(path_prefix_ + path, headers, body, "application/json");
        if (!res) {
            last_error = "request to " + scheme_host_port_ + path_prefix_ + path +
                         " failed: " + httplib::to_string(res.error());
        } else if (res->status == 200) {
            return res->body;
        } else if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status) + " from " + path_prefix_ + path;
        } else {
            throw AdapterError("HTTP " + std::to_string(res->status) + " from " + path_prefix_ +
                                   path + ": " + excerpt(res->body),
                               false);
        }
        if (attempt < config_.max_attempts) {
            std::this_thread::sleep_for(delay);
            delay = std::chrono::milliseconds(
                static_cast<long long>(static_cast<double>(delay.count()) * config_.backoff_multiplier));
        }
    }
    throw AdapterError(last_error + " (after " + std::to_string(config_.max_attempts) + " attempts)",
                       true);
}

ScoreResponse parse_score_response(const std::string &body)
{
    const auto j = parse_body(body);
    if (!j.contains("token_logprobs") || !j["token_logprobs"].is_array()) {
        schema_error("missing array \"token_logprobs\"", body);
    }
    ScoreResponse r;
    for (const auto &v : j["token_logprobs"]) {
        if (!v.is_number()) {
            schema_error("non-numeric log-probability", body);
        }
        const double lp = v.get<double>();
        if (!std::isfinite(lp) || lp > 0.0) {
            schema_error("log-probability outside (-inf, 0]", body);
        }
        r.token_logprobs.push_back(lp);
    }
    if (!j.contains("token_count") || !j["token_count"].is_number_unsigned()) {
        schema_error("missing non-negative integer \"token_count\"", body);
    }
    r.token_count = j["token_count"].get<std::size_t>();
    if (r.token_count != r.token_logprobs.size()) {
        schema_error("token_count does not match the number of log-probabilities", body);
    }
    return r;
}

GenerateResponse parse_generate_response(const std::string &body)
{
    const auto j = parse_body(body);
    if (!j.contains("text") || !j["text"].is_string()) {
        schema_error("missing string \"text\"", body);
    }
    GenerateResponse r;
    r.text = j["text"].get<std::string>();
    const auto reason = j.value("finish_reason", std::string());
    if (reason == "stop") {
        r.finish_reason = FinishReason::stop;
    } else if (reason == "length") {
        r.finish_reason = FinishReason::length;
    } else if (reason == "error") {
        r.finish_reason = FinishReason::error;
    } else {
        schema_error("finish_reason must be stop, length or error", body);
    }
    return r;
}

ScoreResponse HttpModel::score(const ScoreRequest &request)
{
    const json body = {{"prompt", request.prompt}, {"continuation", request.continuation}};
    return parse_score_response(post("/v1/score", body.dump()));
}

GenerateResponse HttpModel::generate(const GenerateRequest &request)
{
    const json body = {
        {"prompt", request.prompt}, {"max_tokens", request.max_tokens}, {"stop", request.stop}};
    auto response = parse_generate_response(post("/v1/generate", body.dump()));
    if (response.finish_reason == FinishReason::error) {
        throw AdapterError("model reported a generation error", false);
    }
    return response;
}

} // namespace ptkit::adapter
