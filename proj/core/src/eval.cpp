#include "ptkit/eval.hpp"

#include "ptkit/parallel.hpp"
#include "ptkit/utf8.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <random>
#include <set>

namespace ptkit::eval {

namespace {

template <typename E, std::size_t N>
E enum_from(std::string_view s, const std::array<std::pair<E, std::string_view>, N> &names,
            std::string_view what)
{
    for (const auto &[value, name] : names) {
        if (name == s) {
            return value;
        }
    }
    throw ValidationError("unknown " + std::string(what) + " '" + std::string(s) + "'");
}

template <typename E, std::size_t N>
std::string_view enum_name(E v, const std::array<std::pair<E, std::string_view>, N> &names)
{
    for (const auto &[value, name] : names) {
        if (value == v) {
            return name;
        }
    }
    return "?";
}

constexpr std::array<std::pair<Origin, std::string_view>, 2> kOrigins{
    {{Origin::native, "native"}, {Origin::translated, "translated"}}};
constexpr std::array<std::pair<TaskKind, std::string_view>, 5> kKinds{{
    {TaskKind::multiclass, "multiclass"},
    {TaskKind::binary, "binary"},
    {TaskKind::multichoice, "multichoice"},
    {TaskKind::extractive_qa, "extractive_qa"},
    {TaskKind::regression, "regression"},
}};
constexpr std::array<std::pair<AnswerMode, std::string_view>, 3> kModes{{
    {AnswerMode::rank, "rank"},
    {AnswerMode::rank_char_norm, "rank_char_norm"},
    {AnswerMode::generate, "generate"},
}};

// Unbiased draw from [0, n) on a 64-bit engine; identical on every platform.
std::uint64_t uniform_below(std::mt19937_64 &engine, std::uint64_t n)
{
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
        const std::uint64_t x = engine();
        if (x >= threshold) {
            return x % n;
        }
    }
}

template <typename T>
void shuffle(std::vector<T> &items, std::uint64_t seed)
{
    std::mt19937_64 engine(seed);
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_below(engine, i));
        std::swap(items[i - 1], items[j]);
    }
}

std::vector<std::string> class_order(const std::vector<Example> &pool,
                                     const std::vector<std::string> &classes)
{
    std::vector<std::string> order = classes;
    for (const auto &e : pool) {
        if (std::find(order.begin(), order.end(), e.label) == order.end()) {
            order.push_back(e.label);
        }
    }
    return order;
}

std::string format_number(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string substitute(const std::string &tmpl, const std::string &input, const std::string *answer)
{
    std::string out;
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        if (tmpl.compare(pos, 7, "{input}") == 0) {
            out += input;
            pos += 7;
        } else if (answer != nullptr && tmpl.compare(pos, 8, "{answer}") == 0) {
            out += *answer;
            pos += 8;
        } else {
            out.push_back(tmpl[pos++]);
        }
    }
    return out;
}

std::string trim(std::string_view s)
{
    constexpr std::string_view ws = " \t\n\r\f\v";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

bool is_rank(AnswerMode m)
{
    return m == AnswerMode::rank || m == AnswerMode::rank_char_norm;
}

} // namespace

std::string_view to_string(Origin v)
{
    return enum_name(v, kOrigins);
}
std::string_view to_string(TaskKind v)
{
    return enum_name(v, kKinds);
}
std::string_view to_string(AnswerMode v)
{
    return enum_name(v, kModes);
}
Origin origin_from_string(std::string_view s)
{
    return enum_from(s, kOrigins, "origin");
}
TaskKind task_kind_from_string(std::string_view s)
{
    return enum_from(s, kKinds, "task kind");
}
AnswerMode answer_mode_from_string(std::string_view s)
{
    return enum_from(s, kModes, "answer mode");
}

const std::vector<std::string> &candidates_for(const TaskSpec &task, const Example &example)
{
    return example.candidates.empty() ? task.labels : example.candidates;
}

std::string answer_text(const TaskSpec &task, const Example &example)
{
    if (task.kind == TaskKind::extractive_qa && !example.answers.empty()) {
        return example.answers.front();
    }
    if (task.kind == TaskKind::regression && example.label.empty() && example.value) {
        return format_number(*example.value);
    }
    return example.label;
}

void TaskSpec::validate() const
{
    const auto where = [this](const std::string &msg) {
        return ValidationError("task '" + name + "': " + msg);
    };
    if (name.empty()) {
        throw ValidationError("task name is empty");
    }
    if (!(random_score < high_score)) {
        throw where("random_score must be below high_score");
    }
    if (max_new_tokens == 0) {
        throw where("max_new_tokens must be at least 1");
    }
    if (metric == MetricKind::f1_binary && !positive_label && labels.empty()) {
        throw where("f1_binary needs positive_label or labels");
    }
    std::set<std::string> shot_ids;
    for (const auto &e : shot_pool) {
        shot_ids.insert(e.id);
    }
    std::set<std::string> test_ids;
    for (const auto &e : test_set) {
        if (shot_ids.contains(e.id)) {
            throw where("example '" + e.id + "' is both a shot and a test example");
        }
        if (!test_ids.insert(e.id).second) {
            throw where("duplicate test example id '" + e.id + "'");
        }
        if (is_rank(answer_mode) && candidates_for(*this, e).empty()) {
            throw where("example '" + e.id + "' has no candidates for rank mode");
        }
        switch (kind) {
        case TaskKind::extractive_qa:
            if (e.answers.empty()) {
                throw where("example '" + e.id + "' has an empty answer set");
            }
            break;
        case TaskKind::regression:
            if (!e.value) {
                throw where("example '" + e.id + "' has no numeric value");
            }
            break;
        default:
            if (e.label.empty()) {
                throw where("example '" + e.id + "' has no label");
            }
        }
    }
}

std::vector<Example> shot_stream(const std::vector<Example> &pool, bool balanced,
                                 std::optional<std::uint64_t> seed,
                                 const std::vector<std::string> &classes)
{
    std::vector<Example> items = pool;
    if (seed) {
        shuffle(items, *seed);
    }
    if (!balanced) {
        return items;
    }
    const auto order = class_order(pool, classes);
    std::vector<std::deque<const Example *>> queues(order.size());
    for (const auto &e : items) {
        const auto c = std::find(order.begin(), order.end(), e.label) - order.begin();
        queues[static_cast<std::size_t>(c)].push_back(&e);
    }
    std::vector<Example> out;
    out.reserve(items.size());
    while (out.size() < items.size()) {
        for (auto &q : queues) {
            if (!q.empty()) {
                out.push_back(*q.front());
                q.pop_front();
            }
        }
    }
    return out;
}

std::vector<Example> select_shots(const std::vector<Example> &pool, std::size_t k, bool balanced,
                                  std::optional<std::uint64_t> seed,
                                  const std::vector<std::string> &classes)
{
    if (k == 0) {
        return {};
    }
    if (k > pool.size()) {
        throw ValidationError("requested " + std::to_string(k) + " shots but the pool has " +
                              std::to_string(pool.size()));
    }
    if (balanced) {
        const auto order = class_order(pool, classes);
        std::map<std::string, std::size_t> counts;
        for (const auto &e : pool) {
            ++counts[e.label];
        }
        for (std::size_t i = 0; i < order.size(); ++i) {
            const std::size_t quota = k / order.size() + (i < k % order.size() ? 1 : 0);
            if (counts[order[i]] < quota) {
                throw ValidationError("class '" + order[i] + "' has " +
                                      std::to_string(counts[order[i]]) + " pool examples, " +
                                      std::to_string(quota) + " needed for " + std::to_string(k) +
                                      " balanced shots");
            }
        }
    }
    auto stream = shot_stream(pool, balanced, seed, classes);
    stream.resize(k);
    return stream;
}

TokenCounter tokenizer_counter(std::shared_ptr<const bpe::Tokenizer> tokenizer)
{
    if (!tokenizer) {
        throw ValidationError("no reference tokenizer configured");
    }
    auto cache = std::make_shared<bpe::EncodeCache>();
    return [tokenizer = std::move(tokenizer), cache](std::string_view text) {
        return tokenizer->encode(text, *cache).size();
    };
}

std::string render_prompt(const TaskSpec &task, const std::vector<Example> &shots,
                          std::size_t shot_count, const Example &test_example)
{
    std::string out;
    const auto &sep = task.templates.separator;
    if (!task.instruction.empty()) {
        out += task.instruction;
        out += sep;
    }
    for (std::size_t i = 0; i < shot_count; ++i) {
        const auto answer = answer_text(task, shots[i]);
        out += substitute(task.templates.shot, shots[i].input, &answer);
        out += sep;
    }
    out += substitute(task.templates.query, test_example.input, nullptr);
    return out;
}

Prompt build_prompt(const TaskSpec &task, const Example &test_example,
                    const std::vector<Example> &shots, std::size_t budget,
                    const TokenCounter &count, ShotPolicy policy)
{
    std::size_t k = shots.size();
    if (policy.kind == ShotPolicy::Kind::table) {
        k = std::min(k, task.default_num_shots);
    } else if (policy.kind == ShotPolicy::Kind::fixed) {
        k = std::min(k, policy.k);
    }

    Prompt prompt;
    prompt.task = task.name;
    prompt.example_id = test_example.id;
    prompt.text = render_prompt(task, shots, 0, test_example);
    prompt.token_count = count(prompt.text);
    if (prompt.token_count > budget) {
        throw BudgetError("task '" + task.name + "', example '" + test_example.id +
                          "': instruction and test example take " +
                          std::to_string(prompt.token_count) + " tokens, budget is " +
                          std::to_string(budget));
    }
    for (std::size_t n = 1; n <= k; ++n) {
        auto text = render_prompt(task, shots, n, test_example);
        const auto tokens = count(text);
        if (tokens > budget) {
            break;
        }
        prompt.text = std::move(text);
        prompt.token_count = tokens;
        prompt.shot_count = n;
    }
    return prompt;
}

std::vector<ScoredCandidate> score_candidates(adapter::ModelAdapter &model, const std::string &prompt,
                                              const std::vector<std::string> &candidates,
                                              Normalization normalization,
                                              const std::string &continuation_prefix)
{
    if (candidates.empty()) {
        throw ValidationError("score_candidates needs at least one candidate");
    }
    std::vector<ScoredCandidate> out;
    out.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto response = model.score({prompt, continuation_prefix + candidates[i]});
        ScoredCandidate s{candidates[i], i, response.total(), response.total()};
        if (normalization == Normalization::per_char) {
            const auto chars = utf8::length(candidates[i]);
            if (chars == 0) {
                throw ValidationError("cannot normalize the empty candidate by length");
            }
            s.score = s.logprob / static_cast<double>(chars);
        }
        out.push_back(std::move(s));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const auto &a, const auto &b) { return a.score > b.score; });
    return out;
}

std::string generate_answer(adapter::ModelAdapter &model, const std::string &prompt,
                            std::size_t max_tokens, const std::vector<std::string> &stop_sequences)
{
    if (max_tokens == 0) {
        throw ValidationError("max_tokens must be at least 1");
    }
    auto stops = stop_sequences;
    stops.emplace_back("\n");
    auto text = model.generate({prompt, max_tokens, stops}).text;
    std::size_t cut = text.size();
    for (const auto &s : stops) {
        if (s.empty()) {
            continue;
        }
        cut = std::min(cut, text.find(s));
    }
    text.resize(cut);
    return trim(text);
}

std::optional<double> parse_number(std::string_view text)
{
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto digit = [&](std::size_t j) {
            return j < text.size() && text[j] >= '0' && text[j] <= '9';
        };
        std::size_t start = i;
        std::size_t j = i;
        if ((text[j] == '-' || text[j] == '+') && digit(j + 1)) {
            ++j;
        }
        if (!digit(j)) {
            continue;
        }
        while (digit(j)) {
            ++j;
        }
        if (j < text.size() && (text[j] == '.' || text[j] == ',') && digit(j + 1)) {
            ++j;
            while (digit(j)) {
                ++j;
            }
        }
        std::string number(text.substr(start, j - start));
        if (number.front() == '+') {
            number.erase(0, 1);
        }
        std::replace(number.begin(), number.end(), ',', '.');
        double value = 0.0;
        std::from_chars(number.data(), number.data() + number.size(), value);
        return value;
    }
    return std::nullopt;
}

TaskOutcome evaluate_task(adapter::ModelAdapter &model, const TaskSpec &task,
                          const EvalConfig &config)
{
    TaskOutcome outcome;
    outcome.task = task.name;
    try {
        task.validate();
        if (task.test_set.empty()) {
            throw ValidationError("task '" + task.name + "' has no test examples");
        }
        if (!config.counter && !config.tokenizer) {
            throw ValidationError("no reference tokenizer configured");
        }

        std::vector<std::size_t> indices(task.test_set.size());
        std::iota(indices.begin(), indices.end(), std::size_t{0});
        if (config.cap && *config.cap < indices.size()) {
            if (config.seed) {
                shuffle(indices, *config.seed);
                indices.resize(*config.cap);
                std::sort(indices.begin(), indices.end());
            } else {
                indices.resize(*config.cap);
            }
        }

        std::vector<Example> shots;
        switch (config.shots.kind) {
        case ShotPolicy::Kind::table:
            shots = select_shots(task.shot_pool, std::min(task.default_num_shots, task.shot_pool.size()),
                                 task.balanced_shots, config.seed, task.labels);
            break;
        case ShotPolicy::Kind::fixed:
            shots = select_shots(task.shot_pool, config.shots.k, task.balanced_shots, config.seed,
                                 task.labels);
            break;
        case ShotPolicy::Kind::max_fit:
            shots = shot_stream(task.shot_pool, task.balanced_shots, config.seed, task.labels);
            break;
        }

        Normalization normalization =
            task.answer_mode == AnswerMode::rank_char_norm ? Normalization::per_char : Normalization::none;
        if (config.normalization) {
            normalization = *config.normalization;
        }

        double fallback = 0.0;
        if (task.kind == TaskKind::regression) {
            if (task.fallback_value) {
                fallback = *task.fallback_value;
            } else {
                for (const auto &e : task.test_set) {
                    fallback += *e.value;
                }
                fallback /= static_cast<double>(task.test_set.size());
            }
        }

        MetricResult result;
        result.task = task.name;
        result.origin = task.origin;
        result.metric = task.metric;
        result.random_score = task.random_score;
        result.high_score = task.high_score;
        result.records.resize(indices.size());

        const auto workers = std::max<std::size_t>(
            1, std::min(resolve_workers(config.workers), config.max_inflight));
        parallel_for(indices.size(), workers, [&](std::size_t slot) {
            const auto &example = task.test_set[indices[slot]];
            auto &rec = result.records[slot];
            rec.index = indices[slot];
            rec.id = example.id;
            if (task.kind == TaskKind::extractive_qa) {
                rec.gold = example.answers;
            } else if (!example.label.empty()) {
                rec.gold = {example.label};
            }
            rec.gold_value = example.value;

            const auto counter = config.counter ? config.counter : tokenizer_counter(config.tokenizer);
            const auto prompt = build_prompt(task, example, shots, config.budget, counter, config.shots);
            rec.prompt_hash = fnv1a64(prompt.text);
            rec.shot_count = prompt.shot_count;
            rec.prompt_tokens = prompt.token_count;
            try {
                if (is_rank(task.answer_mode)) {
                    rec.scores = score_candidates(model, prompt.text, candidates_for(task, example),
                                                  normalization, task.templates.continuation_prefix);
                    rec.prediction = rec.scores.front().candidate;
                } else {
                    rec.prediction = generate_answer(model, prompt.text, task.max_new_tokens,
                                                     task.stop_sequences);
                }
            } catch (const adapter::AdapterError &e) {
                if (config.abort_on_error) {
                    throw;
                }
                rec.error = e.what();
                rec.prediction.clear();
                rec.scores.clear();
            }
            if (task.kind == TaskKind::regression) {
                rec.predicted_value = parse_number(rec.prediction).value_or(fallback);
            }
        });

        std::vector<metrics::Prediction> predictions;
        std::vector<metrics::Gold> golds;
        for (const auto &rec : result.records) {
            const auto &example = task.test_set[rec.index];
            predictions.push_back({rec.prediction, rec.predicted_value.value_or(0.0)});
            golds.push_back({example.label, example.value.value_or(0.0), example.answers});
            result.n_errors += rec.error ? 1 : 0;
        }
        result.n_examples = result.records.size();
        metrics::MetricOptions options;
        options.positive_label = task.positive_label;
        options.classes = task.labels;
        result.raw = metrics::compute_metric(task.metric, predictions, golds, options) * task.high_score;
        outcome.result = std::move(result);
    } catch (const std::exception &e) {
        if (config.abort_on_error) {
            throw;
        }
        outcome.error = e.what();
    }
    return outcome;
}

double npm_component(double raw, double random_score, double high_score)
{
    if (!(random_score < high_score)) {
        throw ValidationError("NPM needs random_score < high_score");
    }
    return 100.0 * (raw - random_score) / (high_score - random_score);
}

NpmReport compute_npm(const std::vector<MetricResult> &results)
{
    NpmReport report;
    double native = 0.0, translated = 0.0, all = 0.0;
    for (const auto &r : results) {
        NpmComponent c{r.task, r.origin, r.raw, r.random_score, r.high_score,
                       npm_component(r.raw, r.random_score, r.high_score)};
        if (r.origin == Origin::native) {
            native += c.component;
            ++report.n_native;
        } else {
            translated += c.component;
            ++report.n_translated;
        }
        all += c.component;
        ++report.n_all;
        report.components.push_back(std::move(c));
    }
    if (report.n_native > 0) {
        report.npm_native = native / static_cast<double>(report.n_native);
    }
    if (report.n_translated > 0) {
        report.npm_translated = translated / static_cast<double>(report.n_translated);
    }
    if (report.n_all > 0) {
        report.npm_all = all / static_cast<double>(report.n_all);
    }
    return report;
}

SuiteReport evaluate_suite(adapter::ModelAdapter &model, const std::vector<TaskSpec> &tasks,
                           const EvalConfig &config)
{
    if (tasks.empty()) {
        throw ValidationError("evaluation suite has no tasks");
    }
    SuiteReport report;
    std::vector<MetricResult> valid;
    for (const auto &task : tasks) {
        auto outcome = evaluate_task(model, task, config);
        if (outcome.result) {
            valid.push_back(*outcome.result);
        } else {
            report.warnings.push_back("task '" + task.name +
                                      "' is invalid and excluded from NPM: " + outcome.error);
        }
        report.tasks.push_back(std::move(outcome));
    }
    report.npm = compute_npm(valid);
    return report;
}

std::uint64_t fnv1a64(std::string_view text)
{
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

double round_significant(double value, int digits)
{
    if (value == 0.0 || !std::isfinite(value)) {
        return value;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, value);
    return std::strtod(buf, nullptr);
}

} // namespace ptkit::eval
