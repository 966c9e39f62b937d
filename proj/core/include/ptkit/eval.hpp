#pragma once

#include "ptkit/adapter.hpp"
#include "ptkit/bpe.hpp"
#include "ptkit/error.hpp"
#include "ptkit/metrics.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ptkit::eval {

using metrics::MetricKind;

enum class Origin { native, translated };
enum class TaskKind { multiclass, binary, multichoice, extractive_qa, regression };
enum class AnswerMode { rank, rank_char_norm, generate };
enum class Normalization { none, per_char };

std::string_view to_string(Origin v);
std::string_view to_string(TaskKind v);
std::string_view to_string(AnswerMode v);
Origin origin_from_string(std::string_view s);
TaskKind task_kind_from_string(std::string_view s);
AnswerMode answer_mode_from_string(std::string_view s);

struct Example {
    std::string id;
    std::string input;
    std::string label;
    std::optional<double> value;      // regression gold
    std::vector<std::string> answers; // extractive gold set
    std::vector<std::string> candidates;
};

// Placeholders: {input}, {answer}.
struct Templates {
    std::string shot = "{input}\nResposta: {answer}";
    std::string query = "{input}\nResposta:";
    std::string separator = "\n\n";
    std::string continuation_prefix = " ";

    bool operator==(const Templates &) const = default;
};

struct TaskSpec {
    std::string name;
    Origin origin = Origin::native;
    TaskKind kind = TaskKind::multiclass;
    std::size_t num_classes = 0;
    std::string instruction;
    std::vector<Example> shot_pool;
    std::vector<Example> test_set;
    MetricKind metric = MetricKind::accuracy;
    double random_score = 0.0;
    double high_score = 100.0;
    bool balanced_shots = true;
    std::size_t default_num_shots = 0;
    AnswerMode answer_mode = AnswerMode::rank;

    Templates templates;
    std::vector<std::string> labels; // shared candidates / class order
    std::optional<std::string> positive_label;
    // Regression prediction used when no number can be parsed from the
    // output; defaults to the mean gold value of the test set.
    std::optional<double> fallback_value;
    std::size_t max_new_tokens = 32;
    std::vector<std::string> stop_sequences;

    void validate() const;
};

// The text a shot shows as its answer.
std::string answer_text(const TaskSpec &task, const Example &example);
const std::vector<std::string> &candidates_for(const TaskSpec &task, const Example &example);

// ---------------------------------------------------------------------------
// Registry of benchmark metadata (no data is shipped).

struct RegistryEntry {
    std::string name;
    Origin origin;
    TaskKind kind;
    std::size_t num_classes;
    MetricKind metric;
    double random_score;
    double high_score;
    bool balanced_shots;
    double avg_length;
    std::optional<std::size_t> num_train;
    std::size_t num_test;
    std::size_t num_shots;
    AnswerMode answer_mode;
};

const std::vector<RegistryEntry> &poeta_registry();
const RegistryEntry *find_registry_entry(std::string_view name);
// Metadata-only TaskSpec (empty pools).
TaskSpec task_from_registry(const RegistryEntry &entry);

// ---------------------------------------------------------------------------
// Shots and prompts

// Whole pool in the order shots are taken. Balanced: per-class queues in pool
// order, visited round-robin in class order (`classes`, then first-seen);
// exhausted classes drop out. With a seed: a uniform random permutation.
std::vector<Example> shot_stream(const std::vector<Example> &pool, bool balanced,
                                 std::optional<std::uint64_t> seed,
                                 const std::vector<std::string> &classes = {});

std::vector<Example> select_shots(const std::vector<Example> &pool, std::size_t k, bool balanced,
                                  std::optional<std::uint64_t> seed,
                                  const std::vector<std::string> &classes = {});

using TokenCounter = std::function<std::size_t(std::string_view)>;

TokenCounter tokenizer_counter(std::shared_ptr<const bpe::Tokenizer> tokenizer);

struct ShotPolicy {
    enum class Kind { table, fixed, max_fit };
    Kind kind = Kind::table;
    std::size_t k = 0;

    static ShotPolicy table() { return {Kind::table, 0}; }
    static ShotPolicy fixed(std::size_t k) { return {Kind::fixed, k}; }
    static ShotPolicy max_fit() { return {Kind::max_fit, 0}; }
};

struct Prompt {
    std::string text;
    std::size_t shot_count = 0;
    std::size_t token_count = 0;
    std::string task;
    std::string example_id;
};

class BudgetError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

std::string render_prompt(const TaskSpec &task, const std::vector<Example> &shots,
                          std::size_t shot_count, const Example &test_example);

// `shots` is the ordered candidate list (see shot_stream). fixed/table take
// at most k of them, max_fit as many as fit; in every mode shots are dropped
// from the end until the prompt fits.
Prompt build_prompt(const TaskSpec &task, const Example &test_example,
                    const std::vector<Example> &shots, std::size_t budget,
                    const TokenCounter &count, ShotPolicy policy);

struct ScoredCandidate {
    std::string candidate;
    std::size_t index = 0;
    double logprob = 0.0;
    double score = 0.0;
};

// Best first; equal scores keep candidate order.
std::vector<ScoredCandidate> score_candidates(adapter::ModelAdapter &model, const std::string &prompt,
                                              const std::vector<std::string> &candidates,
                                              Normalization normalization,
                                              const std::string &continuation_prefix = " ");

std::string generate_answer(adapter::ModelAdapter &model, const std::string &prompt,
                            std::size_t max_tokens, const std::vector<std::string> &stop_sequences);

// First decimal number in the text ("3", "-1.5", "4,25").
std::optional<double> parse_number(std::string_view text);

// ---------------------------------------------------------------------------
// Evaluation

struct EvalConfig {
    std::size_t budget = 2048;
    ShotPolicy shots = ShotPolicy::table();
    std::optional<std::size_t> cap;
    std::optional<std::uint64_t> seed;
    std::optional<Normalization> normalization; // overrides the task's rank mode
    std::size_t workers = 1;
    std::size_t max_inflight = 8;
    bool abort_on_error = false;
    std::shared_ptr<const bpe::Tokenizer> tokenizer;
    TokenCounter counter; // used instead of `tokenizer` when set; must be thread-safe
};

struct ExampleRecord {
    std::size_t index = 0;
    std::string id;
    std::uint64_t prompt_hash = 0;
    std::size_t shot_count = 0;
    std::size_t prompt_tokens = 0;
    std::vector<ScoredCandidate> scores;
    std::string prediction;
    std::optional<double> predicted_value;
    std::vector<std::string> gold; // label, or the answer set
    std::optional<double> gold_value;
    std::optional<std::string> error;
};

struct MetricResult {
    std::string task;
    Origin origin = Origin::native;
    MetricKind metric = MetricKind::accuracy;
    double raw = 0.0;
    double random_score = 0.0;
    double high_score = 100.0;
    std::size_t n_examples = 0;
    std::size_t n_errors = 0;
    std::vector<ExampleRecord> records;
};

struct TaskOutcome {
    std::string task;
    std::optional<MetricResult> result; // empty when the task failed
    std::string error;
};

TaskOutcome evaluate_task(adapter::ModelAdapter &model, const TaskSpec &task,
                          const EvalConfig &config);

struct NpmComponent {
    std::string task;
    Origin origin = Origin::native;
    double raw = 0.0;
    double random_score = 0.0;
    double high_score = 100.0;
    double component = 0.0;
};

struct NpmReport {
    std::vector<NpmComponent> components;
    std::optional<double> npm_native;
    std::optional<double> npm_translated;
    std::optional<double> npm_all;
    std::size_t n_native = 0;
    std::size_t n_translated = 0;
    std::size_t n_all = 0;
};

double npm_component(double raw, double random_score, double high_score);
NpmReport compute_npm(const std::vector<MetricResult> &results);

struct SuiteReport {
    std::vector<TaskOutcome> tasks;
    NpmReport npm;
    std::vector<std::string> warnings;
};

SuiteReport evaluate_suite(adapter::ModelAdapter &model, const std::vector<TaskSpec> &tasks,
                           const EvalConfig &config);

// ---------------------------------------------------------------------------
// Files

// task.json + shots.jsonl + test.jsonl. task.json may name a registry entry
// ("registry": "AG News") whose metadata fills unspecified fields.
TaskSpec load_task_dir(const std::filesystem::path &dir);
// Every subdirectory holding a task.json, sorted by name.
std::vector<TaskSpec> load_task_suite(const std::filesystem::path &dir);

std::uint64_t fnv1a64(std::string_view text);
double round_significant(double value, int digits = 6);

// Sorted keys, metrics rounded to 6 significant digits, no timestamps.
std::string render_report(const SuiteReport &report, const EvalConfig &config);
// One JSON object per example, tasks in suite order, examples in index order.
std::string render_trace(const SuiteReport &report);

} // namespace ptkit::eval
