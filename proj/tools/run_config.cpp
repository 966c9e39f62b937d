#include "run_config.hpp"

#include "ptkit/error.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace ptkit::cli {

namespace {

using T = RunConfig::Type;

const std::vector<RunConfig::Key> kSchema = {
    {"seed", T::integer, "", "global seed; empty means no randomness"},
    {"workers", T::integer, "0", "worker threads, 0 = logical CPUs"},

    {"corpus.input", T::text, "", "JSONL file or directory of text files"},
    {"corpus.format", T::text, "auto", "auto | jsonl | dir"},
    {"corpus.output", T::text, "", "output directory"},
    {"corpus.normalize", T::boolean, "true", ""},
    {"corpus.apply_filters", T::boolean, "true", ""},
    {"corpus.batch_size", T::integer, "256", ""},
    {"corpus.min_words", T::integer, "50", ""},
    {"corpus.max_words", T::integer, "100000", ""},
    {"corpus.mean_word_len_min", T::real, "3", ""},
    {"corpus.mean_word_len_max", T::real, "10", ""},
    {"corpus.symbol_word_ratio_max", T::real, "0.1", ""},
    {"corpus.bullet_line_frac_max", T::real, "0.9", ""},
    {"corpus.ellipsis_line_frac_max", T::real, "0.3", ""},
    {"corpus.alpha_word_frac_min", T::real, "0.8", ""},
    {"corpus.min_stopword_hits", T::integer, "2", ""},
    {"corpus.stopwords", T::list, "e,de,que,o,a,em,com,para,um,uma", ""},
    {"corpus.dup_line_frac_max", T::real, "0.2", ""},
    {"corpus.dup_para_frac_max", T::real, "0.3", ""},
    {"corpus.top_2gram_frac_max", T::real, "0.2", ""},
    {"corpus.top_3gram_frac_max", T::real, "0.18", ""},
    {"corpus.top_4gram_frac_max", T::real, "0.16", ""},
    {"corpus.min_unique_tokens", T::integer, "200", ""},
    {"corpus.unique_token_mode", T::text, "bpe", "bpe | whitespace"},
    {"corpus.eos_id", T::integer, "50256", ""},

    {"tokenizer.vocab", T::text, "", "vocab.json"},
    {"tokenizer.merges", T::text, "", "merges.txt"},

    {"eval.tasks", T::text, "", "directory of task directories"},
    {"eval.output", T::text, "", "directory for report.json and trace.jsonl"},
    {"eval.budget", T::integer, "2048", "prompt budget in reference tokens"},
    {"eval.shots", T::text, "table", "table | max-fit | <k>"},
    {"eval.cap", T::integer, "", "max test examples per task"},
    {"eval.normalize", T::text, "task", "task | none | char"},
    {"eval.max_inflight", T::integer, "8", "concurrent model requests"},
    {"eval.abort_on_error", T::boolean, "false", ""},

    {"adapter.model", T::text, "mock", "mock | mock:FILE | http:URL"},
    {"adapter.auth_header", T::text, "Authorization", ""},
    {"adapter.auth_scheme", T::text, "Bearer", "prefix for the secret"},
    {"adapter.auth_env", T::text, "PTKIT_AUTH_TOKEN", "environment variable holding the secret"},
    {"adapter.timeout_ms", T::integer, "30000", ""},
    {"adapter.max_attempts", T::integer, "3", ""},
    {"adapter.backoff_ms", T::integer, "200", ""},
    {"adapter.backoff_multiplier", T::real, "2", ""},

    {"schedule.kind", T::text, "warmup_constant", "warmup_constant | warmup_cosine_floor"},
    {"schedule.peak", T::real, "", ""},
    {"schedule.end", T::real, "", ""},
    {"schedule.warmup_steps", T::integer, "", ""},
    {"schedule.total_steps", T::integer, "", ""},
    {"schedule.decay_steps", T::integer, "", ""},

    {"hardware.name", T::text, "v2-512", "v2-512 | v3-8 | custom:FLOPS"},

    {"budget.params", T::real, "", ""},
    {"budget.tps", T::real, "", "tokens per second"},
    {"budget.steps", T::integer, "", ""},
    {"budget.batch", T::integer, "", "sequences per batch"},
    {"budget.seqlen", T::integer, "", ""},
    {"budget.corpus_tokens", T::real, "", ""},
    {"budget.usd_per_hour", T::real, "", ""},
};

const RunConfig::Key *find_key(const std::string &name)
{
    for (const auto &k : kSchema) {
        if (k.name == name) {
            return &k;
        }
    }
    return nullptr;
}

std::string trim(std::string_view s)
{
    constexpr std::string_view ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) {
        return {};
    }
    return std::string(s.substr(b, s.find_last_not_of(ws) - b + 1));
}

template <typename N>
bool parse_full(const std::string &text, N &out)
{
    const auto *end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, out);
    return res.ec == std::errc() && res.ptr == end;
}

std::optional<bool> parse_bool(const std::string &v)
{
    if (v == "true" || v == "1" || v == "yes" || v == "on") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no" || v == "off") {
        return false;
    }
    return std::nullopt;
}

bool needs_quotes(const std::string &v)
{
    return v.empty() || v != trim(v) || v.front() == '"' ||
           v.find_first_of("\n\t\\") != std::string::npos;
}

std::string quote(const std::string &v)
{
    std::string out = "\"";
    for (char c : v) {
        switch (c) {
        case '"':
            out += "\\\"";
            break;
        case '\\':
            out += "\\\\";
            break;
        case '\n':
            out += "\\n";
            break;
        case '\t':
            out += "\\t";
            break;
        default:
            out.push_back(c);
        }
    }
    return out + "\"";
}

std::string unquote(const std::string &v, const std::string &where)
{
    if (v.size() < 2 || v.front() != '"' || v.back() != '"') {
        if (!v.empty() && v.front() == '"') {
            throw ValidationError(where + ": unterminated quoted value");
        }
        return v;
    }
    std::string out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
        if (v[i] != '\\') {
            out.push_back(v[i]);
            continue;
        }
        if (i + 2 >= v.size()) {
            throw ValidationError(where + ": dangling escape");
        }
        switch (v[++i]) {
        case 'n':
            out.push_back('\n');
            break;
        case 't':
            out.push_back('\t');
            break;
        case '"':
        case '\\':
            out.push_back(v[i]);
            break;
        default:
            throw ValidationError(where + ": unknown escape \\" + std::string(1, v[i]));
        }
    }
    return out;
}

} // namespace

const std::vector<RunConfig::Key> &RunConfig::schema()
{
    return kSchema;
}

RunConfig::RunConfig()
{
    for (const auto &k : kSchema) {
        values_[k.name] = k.default_value;
    }
}

void RunConfig::set(const std::string &key, const std::string &value)
{
    const auto *spec = find_key(key);
    if (spec == nullptr) {
        throw ValidationError("unknown config key '" + key + "'");
    }
    if (!value.empty()) {
        bool ok = true;
        switch (spec->type) {
        case Type::integer: {
            long long v = 0;
            ok = parse_full(value, v) && v >= 0;
            break;
        }
        case Type::real: {
            double v = 0;
            ok = parse_full(value, v);
            break;
        }
        case Type::boolean:
            ok = parse_bool(value).has_value();
            break;
        case Type::text:
        case Type::list:
            break;
        }
        if (!ok) {
            static const char *names[] = {"a non-negative integer", "a number", "a boolean", "", ""};
            throw ValidationError("config key '" + key + "' expects " +
                                  names[static_cast<int>(spec->type)] + ", got '" + value + "'");
        }
    }
    values_[key] = value;
}

void RunConfig::set_assignment(const std::string &assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ValidationError("expected key=value, got '" + assignment + "'");
    }
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig RunConfig::parse(std::string_view text, const std::string &origin)
{
    RunConfig config;
    std::istringstream in{std::string(text)};
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    std::map<std::string, std::size_t> seen;
    while (std::getline(in, line)) {
        ++line_no;
        const auto where = origin + ":" + std::to_string(line_no);
        const auto t = trim(line);
        if (t.empty() || t.front() == '#' || t.front() == ';') {
            continue;
        }
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw ValidationError(where + ": malformed section header");
            }
            section = trim(std::string_view(t).substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ValidationError(where + ": expected key = value");
        }
        const auto key = trim(std::string_view(t).substr(0, eq));
        const auto full = section.empty() ? key : section + "." + key;
        if (auto it = seen.find(full); it != seen.end()) {
            throw ValidationError(where + ": key '" + full + "' already set on line " +
                                  std::to_string(it->second));
        }
        seen[full] = line_no;
        try {
            config.set(full, unquote(trim(std::string_view(t).substr(eq + 1)), where));
        } catch (const ValidationError &e) {
            throw ValidationError(where + ": " + e.what());
        }
    }
    return config;
}

RunConfig RunConfig::load(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open config file " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

std::string RunConfig::render() const
{
    std::string out;
    std::string section;
    for (const auto &k : kSchema) {
        const auto dot = k.name.find('.');
        const auto sec = dot == std::string::npos ? std::string() : k.name.substr(0, dot);
        const auto key = dot == std::string::npos ? k.name : k.name.substr(dot + 1);
        if (sec != section) {
            out += "\n[" + sec + "]\n";
            section = sec;
        }
        const auto &v = values_.at(k.name);
        out += key + " = " + (needs_quotes(v) ? quote(v) : v) + "\n";
    }
    return out;
}

const std::string &RunConfig::get(const std::string &key) const
{
    const auto it = values_.find(key);
    if (it == values_.end()) {
        throw ValidationError("unknown config key '" + key + "'");
    }
    return it->second;
}

long long RunConfig::get_int(const std::string &key) const
{
    long long v = 0;
    if (!parse_full(get(key), v)) {
        throw ValidationError("config key '" + key + "' is not set");
    }
    return v;
}

std::uint64_t RunConfig::get_uint(const std::string &key) const
{
    return static_cast<std::uint64_t>(get_int(key));
}

double RunConfig::get_real(const std::string &key) const
{
    double v = 0;
    if (!parse_full(get(key), v)) {
        throw ValidationError("config key '" + key + "' is not set");
    }
    return v;
}

bool RunConfig::get_bool(const std::string &key) const
{
    const auto v = parse_bool(get(key));
    if (!v) {
        throw ValidationError("config key '" + key + "' is not set");
    }
    return *v;
}

std::vector<std::string> RunConfig::get_list(const std::string &key) const
{
    std::vector<std::string> out;
    std::istringstream in(get(key));
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

corpus::PipelineOptions RunConfig::pipeline_options() const
{
    corpus::PipelineOptions o;
    auto &f = o.filter;
    f.min_words = get_uint("corpus.min_words");
    f.max_words = get_uint("corpus.max_words");
    f.mean_word_len_min = get_real("corpus.mean_word_len_min");
    f.mean_word_len_max = get_real("corpus.mean_word_len_max");
    f.symbol_word_ratio_max = get_real("corpus.symbol_word_ratio_max");
    f.bullet_line_frac_max = get_real("corpus.bullet_line_frac_max");
    f.ellipsis_line_frac_max = get_real("corpus.ellipsis_line_frac_max");
    f.alpha_word_frac_min = get_real("corpus.alpha_word_frac_min");
    f.min_stopword_hits = get_uint("corpus.min_stopword_hits");
    f.stopword_list = get_list("corpus.stopwords");
    f.dup_line_frac_max = get_real("corpus.dup_line_frac_max");
    f.dup_para_frac_max = get_real("corpus.dup_para_frac_max");
    f.top_ngram_char_frac_max = {get_real("corpus.top_2gram_frac_max"),
                                 get_real("corpus.top_3gram_frac_max"),
                                 get_real("corpus.top_4gram_frac_max")};
    f.min_unique_tokens = get_uint("corpus.min_unique_tokens");
    const auto &mode = get("corpus.unique_token_mode");
    if (mode == "bpe") {
        f.unique_token_mode = corpus::UniqueTokenMode::bpe;
    } else if (mode == "whitespace") {
        f.unique_token_mode = corpus::UniqueTokenMode::whitespace;
    } else {
        throw ValidationError("corpus.unique_token_mode must be bpe or whitespace, got '" + mode + "'");
    }
    f.validate();
    o.normalize = get_bool("corpus.normalize");
    o.apply_filters = get_bool("corpus.apply_filters");
    o.workers = get_uint("workers");
    o.batch_size = get_uint("corpus.batch_size");
    if (o.batch_size == 0) {
        throw ValidationError("corpus.batch_size must be at least 1");
    }
    return o;
}

eval::EvalConfig RunConfig::eval_config() const
{
    eval::EvalConfig c;
    c.budget = get_uint("eval.budget");
    const auto &shots = get("eval.shots");
    if (shots == "table") {
        c.shots = eval::ShotPolicy::table();
    } else if (shots == "max-fit" || shots == "max_fit") {
        c.shots = eval::ShotPolicy::max_fit();
    } else {
        std::size_t k = 0;
        if (!parse_full(shots, k)) {
            throw ValidationError("eval.shots must be table, max-fit or a count, got '" + shots + "'");
        }
        c.shots = eval::ShotPolicy::fixed(k);
    }
    if (is_set("eval.cap")) {
        c.cap = get_uint("eval.cap");
    }
    if (is_set("seed")) {
        c.seed = get_uint("seed");
    }
    const auto &norm = get("eval.normalize");
    if (norm == "none") {
        c.normalization = eval::Normalization::none;
    } else if (norm == "char") {
        c.normalization = eval::Normalization::per_char;
    } else if (norm != "task") {
        throw ValidationError("eval.normalize must be task, none or char, got '" + norm + "'");
    }
    c.workers = get_uint("workers");
    c.max_inflight = get_uint("eval.max_inflight");
    if (c.max_inflight == 0) {
        throw ValidationError("eval.max_inflight must be at least 1");
    }
    c.abort_on_error = get_bool("eval.abort_on_error");
    return c;
}

adapter::HttpConfig RunConfig::http_config(const std::string &url) const
{
    adapter::HttpConfig h;
    h.base_url = url;
    h.auth_header_name = get("adapter.auth_header");
    const auto &env = get("adapter.auth_env");
    if (!env.empty()) {
        if (const char *secret = std::getenv(env.c_str()); secret != nullptr && *secret != '\0') {
            const auto &scheme = get("adapter.auth_scheme");
            h.auth_header_value = scheme.empty() ? secret : scheme + " " + secret;
        }
    }
    h.timeout = std::chrono::milliseconds(get_int("adapter.timeout_ms"));
    h.max_attempts = get_uint("adapter.max_attempts");
    h.backoff_initial = std::chrono::milliseconds(get_int("adapter.backoff_ms"));
    h.backoff_multiplier = get_real("adapter.backoff_multiplier");
    h.max_inflight = get_uint("eval.max_inflight");
    h.validate();
    return h;
}

train::ScheduleSpec RunConfig::schedule() const
{
    const auto &kind = get("schedule.kind");
    const auto real_or = [this](const char *key, double fallback) {
        return is_set(key) ? get_real(key) : fallback;
    };
    const auto uint_or = [this](const char *key, std::uint64_t fallback) {
        return is_set(key) ? get_uint(key) : fallback;
    };
    train::ScheduleSpec spec;
    if (kind == "warmup_constant") {
        train::WarmupConstant s;
        s.peak = real_or("schedule.peak", s.peak);
        s.warmup_steps = uint_or("schedule.warmup_steps", s.warmup_steps);
        s.total_steps = uint_or("schedule.total_steps", s.total_steps);
        spec = s;
    } else if (kind == "warmup_cosine_floor") {
        train::WarmupCosineFloor s;
        s.peak = real_or("schedule.peak", s.peak);
        s.end = real_or("schedule.end", s.end);
        s.warmup_steps = uint_or("schedule.warmup_steps", s.warmup_steps);
        s.decay_steps = uint_or("schedule.decay_steps", s.decay_steps);
        spec = s;
    } else {
        throw ValidationError("schedule.kind must be warmup_constant or warmup_cosine_floor, got '" +
                              kind + "'");
    }
    train::validate(spec);
    return spec;
}

} // namespace ptkit::cli
