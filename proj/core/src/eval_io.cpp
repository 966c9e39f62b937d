#include "ptkit/eval.hpp"

#include "ptkit/utf8.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace ptkit::eval {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void reject_unknown(const json &obj, const std::set<std::string> &known, const std::string &where)
{
    for (const auto &[key, _] : obj.items()) {
        if (!known.contains(key)) {
            throw ValidationError(where + ": unknown key '" + key + "'");
        }
    }
}

std::vector<Example> load_examples(const std::filesystem::path &path)
{
    std::vector<Example> out;
    if (!std::filesystem::exists(path)) {
        return out;
    }
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t line_no = 0;
    static const std::set<std::string> known{"id", "input", "label", "value", "answers", "candidates"};
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const auto where = path.string() + ":" + std::to_string(line_no);
        try {
            const auto j = json::parse(line);
            if (!j.is_object()) {
                throw ValidationError(where + ": expected a JSON object");
            }
            reject_unknown(j, known, where);
            Example e;
            if (j.contains("id")) {
                e.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
            } else {
                e.id = std::to_string(line_no);
            }
            e.input = j.at("input").get<std::string>();
            e.label = j.value("label", std::string());
            if (j.contains("value")) {
                e.value = j["value"].get<double>();
            }
            e.answers = j.value("answers", std::vector<std::string>{});
            e.candidates = j.value("candidates", std::vector<std::string>{});
            out.push_back(std::move(e));
        } catch (const json::exception &ex) {
            throw ValidationError(where + ": " + ex.what());
        }
    }
    return out;
}

json number(double v)
{
    return round_significant(v);
}

json optional_number(const std::optional<double> &v)
{
    return v ? number(*v) : json(nullptr);
}

std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string shots_name(const ShotPolicy &p)
{
    switch (p.kind) {
    case ShotPolicy::Kind::table:
        return "table";
    case ShotPolicy::Kind::max_fit:
        return "max-fit";
    case ShotPolicy::Kind::fixed:
        return std::to_string(p.k);
    }
    return "table";
}

} // namespace

TaskSpec load_task_dir(const std::filesystem::path &dir)
{
    const auto task_path = dir / "task.json";
    json j;
    try {
        j = json::parse(read_file(task_path));
    } catch (const json::parse_error &e) {
        throw ValidationError(task_path.string() + ": " + e.what());
    }
    if (!j.is_object()) {
        throw ValidationError(task_path.string() + ": expected a JSON object");
    }
    static const std::set<std::string> known{
        "name", "registry", "origin", "kind", "num_classes", "instruction", "metric",
        "random_score", "high_score", "balanced_shots", "num_shots", "answer_mode", "templates",
        "labels", "positive_label", "fallback_value", "max_new_tokens", "stop"};
    const auto where = task_path.string();
    reject_unknown(j, known, where);

    TaskSpec t;
    try {
        if (j.contains("registry")) {
            const auto name = j["registry"].get<std::string>();
            const auto *entry = find_registry_entry(name);
            if (entry == nullptr) {
                throw ValidationError(where + ": no registry entry named '" + name + "'");
            }
            t = task_from_registry(*entry);
        }
        t.name = j.value("name", t.name.empty() ? dir.filename().string() : t.name);
        if (j.contains("origin")) {
            t.origin = origin_from_string(j["origin"].get<std::string>());
        }
        if (j.contains("kind")) {
            t.kind = task_kind_from_string(j["kind"].get<std::string>());
        }
        if (j.contains("metric")) {
            t.metric = metrics::metric_from_string(j["metric"].get<std::string>());
        }
        if (j.contains("answer_mode")) {
            t.answer_mode = answer_mode_from_string(j["answer_mode"].get<std::string>());
        }
        t.num_classes = j.value("num_classes", t.num_classes);
        t.instruction = j.value("instruction", t.instruction);
        t.random_score = j.value("random_score", t.random_score);
        t.high_score = j.value("high_score", t.high_score);
        t.balanced_shots = j.value("balanced_shots", t.balanced_shots);
        t.default_num_shots = j.value("num_shots", t.default_num_shots);
        t.labels = j.value("labels", t.labels);
        if (j.contains("positive_label")) {
            t.positive_label = j["positive_label"].get<std::string>();
        }
        if (j.contains("fallback_value")) {
            t.fallback_value = j["fallback_value"].get<double>();
        }
        t.max_new_tokens = j.value("max_new_tokens", t.max_new_tokens);
        t.stop_sequences = j.value("stop", t.stop_sequences);
        if (j.contains("templates")) {
            const auto &tj = j["templates"];
            reject_unknown(tj, {"shot", "query", "separator", "continuation_prefix"}, where + " templates");
            t.templates.shot = tj.value("shot", t.templates.shot);
            t.templates.query = tj.value("query", t.templates.query);
            t.templates.separator = tj.value("separator", t.templates.separator);
            t.templates.continuation_prefix =
                tj.value("continuation_prefix", t.templates.continuation_prefix);
        }
    } catch (const json::exception &e) {
        throw ValidationError(where + ": " + e.what());
    }
    t.shot_pool = load_examples(dir / "shots.jsonl");
    t.test_set = load_examples(dir / "test.jsonl");
    t.validate();
    return t;
}

std::vector<TaskSpec> load_task_suite(const std::filesystem::path &dir)
{
    if (!std::filesystem::is_directory(dir)) {
        throw ValidationError("task directory " + dir.string() + " does not exist");
    }
    std::vector<std::filesystem::path> dirs;
    if (std::filesystem::exists(dir / "task.json")) {
        dirs.push_back(dir);
    }
    for (const auto &entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "task.json")) {
            dirs.push_back(entry.path());
        }
    }
    std::sort(dirs.begin(), dirs.end());
    std::vector<TaskSpec> tasks;
    for (const auto &d : dirs) {
        tasks.push_back(load_task_dir(d));
    }
    if (tasks.empty()) {
        throw ValidationError("no task.json found under " + dir.string());
    }
    return tasks;
}

std::string render_report(const SuiteReport &report, const EvalConfig &config)
{
    json j;
    j["config"] = {
        {"budget", config.budget},
        {"shots", shots_name(config.shots)},
        {"cap", config.cap ? json(*config.cap) : json(nullptr)},
        {"seed", config.seed ? json(*config.seed) : json(nullptr)},
        {"normalization", config.normalization
                              ? json(*config.normalization == Normalization::per_char ? "char" : "none")
                              : json("task")},
    };
    json tasks = json::array();
    for (const auto &t : report.tasks) {
        json tj{{"task", t.task}, {"valid", t.result.has_value()}};
        if (t.result) {
            const auto &r = *t.result;
            tj["origin"] = to_string(r.origin);
            tj["metric"] = metrics::to_string(r.metric);
            tj["raw"] = number(r.raw);
            tj["random_score"] = number(r.random_score);
            tj["high_score"] = number(r.high_score);
            tj["n_examples"] = r.n_examples;
            tj["n_errors"] = r.n_errors;
            tj["npm_component"] = number(npm_component(r.raw, r.random_score, r.high_score));
        } else {
            tj["error"] = utf8::sanitize(t.error);
        }
        tasks.push_back(std::move(tj));
    }
    j["tasks"] = std::move(tasks);
    j["npm"] = {
        {"native", optional_number(report.npm.npm_native)},
        {"translated", optional_number(report.npm.npm_translated)},
        {"all", optional_number(report.npm.npm_all)},
        {"n_native", report.npm.n_native},
        {"n_translated", report.npm.n_translated},
        {"n_all", report.npm.n_all},
    };
    json warnings = json::array();
    for (const auto &w : report.warnings) {
        warnings.push_back(utf8::sanitize(w));
    }
    j["warnings"] = std::move(warnings);
    return j.dump(2) + "\n";
}

std::string render_trace(const SuiteReport &report)
{
    std::string out;
    for (const auto &t : report.tasks) {
        if (!t.result) {
            continue;
        }
        for (const auto &rec : t.result->records) {
            json scores = json::array();
            for (const auto &s : rec.scores) {
                scores.push_back({{"candidate", utf8::sanitize(s.candidate)},
                                  {"logprob", number(s.logprob)},
                                  {"score", number(s.score)}});
            }
            json gold = json::array();
            for (const auto &g : rec.gold) {
                gold.push_back(utf8::sanitize(g));
            }
            json j{{"task", t.task},
                   {"index", rec.index},
                   {"id", utf8::sanitize(rec.id)},
                   {"prompt_hash", hex64(rec.prompt_hash)},
                   {"shot_count", rec.shot_count},
                   {"prompt_tokens", rec.prompt_tokens},
                   {"scores", std::move(scores)},
                   {"prediction", utf8::sanitize(rec.prediction)},
                   {"predicted_value", optional_number(rec.predicted_value)},
                   {"gold", std::move(gold)},
                   {"gold_value", optional_number(rec.gold_value)},
                   {"error", rec.error ? json(utf8::sanitize(*rec.error)) : json(nullptr)}};
            out += j.dump();
            out += '\n';
        }
    }
    return out;
}

} // namespace ptkit::eval
