#include "runner.hpp"

#include "manifest.hpp"
#include "run_config.hpp"

#include "ptkit/error.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace ptkit::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Context {
    RunConfig config;
    RunManifest manifest;
    std::ostream &out;
    std::ostream &err;
    bool unique = false;
    std::string text{};
    std::string report_path{};
    std::uint64_t dump_steps = 0;
    std::string dump_out{};
};

std::string read_all(std::istream &in)
{
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void note_input(Context &ctx, const std::string &path)
{
    if (!path.empty() && path != "-") {
        ctx.manifest.inputs.push_back(digest_input(path));
    }
}

void write_file(Context &ctx, const fs::path &path, const std::string &content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    out.flush();
    if (!out) {
        throw RuntimeError("cannot write " + path.string());
    }
    ctx.manifest.outputs.push_back(path.string());
}

std::shared_ptr<const bpe::Tokenizer> load_tokenizer(Context &ctx, bool required)
{
    const auto &vocab = ctx.config.get("tokenizer.vocab");
    const auto &merges = ctx.config.get("tokenizer.merges");
    if (vocab.empty() != merges.empty()) {
        throw ValidationError("tokenizer.vocab and tokenizer.merges must be given together");
    }
    if (vocab.empty()) {
        if (required) {
            throw ValidationError("a tokenizer is required: pass --vocab and --merges");
        }
        return nullptr;
    }
    note_input(ctx, vocab);
    note_input(ctx, merges);
    try {
        return std::make_shared<const bpe::Tokenizer>(bpe::Tokenizer::load(vocab, merges));
    } catch (const bpe::TokenizerError &e) {
        throw ValidationError(e.what());
    }
}

std::unique_ptr<corpus::DocumentSource> open_source(Context &ctx)
{
    const auto &input = ctx.config.get("corpus.input");
    if (input.empty()) {
        throw ValidationError("corpus.input is not set (use --input)");
    }
    if (!fs::exists(input)) {
        throw ValidationError("corpus input " + input + " does not exist");
    }
    note_input(ctx, input);
    auto format = ctx.config.get("corpus.format");
    if (format == "auto") {
        format = fs::is_directory(input) ? "dir" : "jsonl";
    }
    if (format == "jsonl") {
        return std::make_unique<corpus::JsonlSource>(input);
    }
    if (format == "dir") {
        return std::make_unique<corpus::DirectorySource>(input);
    }
    throw ValidationError("corpus.format must be auto, jsonl or dir, got '" + format + "'");
}

fs::path output_dir(const Context &ctx, const std::string &key)
{
    const auto &dir = ctx.config.get(key);
    if (dir.empty()) {
        throw ValidationError(key + " is not set (use --out)");
    }
    fs::create_directories(dir);
    return dir;
}

json stats_json(const corpus::CorpusStats &stats)
{
    json rejected = json::object();
    for (auto reason : corpus::kRejectReasons) {
        const auto it = stats.rejections.find(reason);
        rejected[std::string(corpus::to_string(reason))] = it == stats.rejections.end() ? 0 : it->second;
    }
    json hist = json::object();
    for (const auto &[bound, count] : stats.unique_token_histogram) {
        hist[bound == std::numeric_limits<std::uint64_t>::max() ? "inf" : std::to_string(bound)] = count;
    }
    return {{"docs_in", stats.docs_in},
            {"docs_kept", stats.docs_kept},
            {"rejected", std::move(rejected)},
            {"tokens_emitted", stats.tokens_emitted},
            {"unique_token_histogram", std::move(hist)}};
}

void print_stats(std::ostream &out, const corpus::CorpusStats &stats)
{
    out << "docs_in " << stats.docs_in << "\n";
    out << "docs_kept " << stats.docs_kept << "\n";
    for (const auto &[reason, count] : stats.rejections) {
        out << "rejected." << corpus::to_string(reason) << " " << count << "\n";
    }
    out << "tokens_emitted " << stats.tokens_emitted << "\n";
}

void cmd_corpus_filter(Context &ctx)
{
    auto options = ctx.config.pipeline_options();
    const bool need_bpe = options.apply_filters &&
                          options.filter.unique_token_mode == corpus::UniqueTokenMode::bpe;
    auto tokenizer = load_tokenizer(ctx, need_bpe);
    auto source = open_source(ctx);
    const auto dir = output_dir(ctx, "corpus.output");

    corpus::CorpusPipeline pipeline(tokenizer, options);
    const auto kept_path = dir / "kept.jsonl";
    const auto rejected_path = dir / "rejected.jsonl";
    std::ofstream kept(kept_path, std::ios::binary | std::ios::trunc);
    std::ofstream rejected(rejected_path, std::ios::binary | std::ios::trunc);
    ctx.manifest.outputs.push_back(kept_path.string());
    ctx.manifest.outputs.push_back(rejected_path.string());
    const auto stats = pipeline.run(
        *source,
        [&](const corpus::DocumentOutcome &d) {
            kept << json{{"id", d.id}, {"text", d.text}}.dump() << '\n';
        },
        [&](const corpus::DocumentOutcome &d) {
            rejected << json{{"id", d.id}, {"reason", corpus::to_string(d.verdict.reason)}}.dump() << '\n';
        });
    kept.flush();
    rejected.flush();
    if (!kept || !rejected) {
        throw RuntimeError("cannot write corpus output under " + dir.string());
    }
    write_file(ctx, dir / "stats.json", stats_json(stats).dump(2) + "\n");
    print_stats(ctx.out, stats);
}

void cmd_corpus_pack(Context &ctx)
{
    auto options = ctx.config.pipeline_options();
    auto tokenizer = load_tokenizer(ctx, true);
    const auto eos = ctx.config.get_uint("corpus.eos_id");
    if (eos >= tokenizer->vocab_size()) {
        throw ValidationError("corpus.eos_id " + std::to_string(eos) + " is outside the vocabulary of " +
                              std::to_string(tokenizer->vocab_size()));
    }
    auto source = open_source(ctx);
    const auto dir = output_dir(ctx, "corpus.output");

    corpus::CorpusPipeline pipeline(tokenizer, options);
    const auto tokens_path = dir / "tokens.bin";
    corpus::TokenWriter writer(tokens_path);
    ctx.manifest.outputs.push_back(tokens_path.string());
    const bpe::TokenId eos_id = static_cast<bpe::TokenId>(eos);
    const auto stats = pipeline.run(
        *source,
        [&](const corpus::DocumentOutcome &d) {
            writer.write(d.tokens);
            writer.write(std::span<const bpe::TokenId>(&eos_id, 1));
        },
        [](const corpus::DocumentOutcome &) {});
    writer.close();
    write_file(ctx, dir / "stats.json", stats_json(stats).dump(2) + "\n");
    print_stats(ctx.out, stats);
}

void cmd_tokenize_count(Context &ctx)
{
    auto tokenizer = load_tokenizer(ctx, true);
    std::string text = ctx.text;
    if (text.empty()) {
        const auto &input = ctx.config.get("corpus.input");
        if (input.empty() || input == "-") {
            text = read_all(std::cin);
        } else {
            std::ifstream in(input, std::ios::binary);
            if (!in) {
                throw ValidationError("cannot open " + input);
            }
            note_input(ctx, input);
            text = read_all(in);
        }
    }
    ctx.out << (ctx.unique ? tokenizer->count_unique(text) : tokenizer->count_tokens(text)) << "\n";
}

std::unique_ptr<adapter::ModelAdapter> make_adapter(Context &ctx,
                                                    std::shared_ptr<const bpe::Tokenizer> tokenizer)
{
    const auto &model = ctx.config.get("adapter.model");
    if (model == "mock") {
        adapter::MockModelSpec spec;
        spec.mode = adapter::MockModelSpec::Mode::unigram;
        spec.seed = ctx.config.is_set("seed") ? ctx.config.get_uint("seed") : 0;
        return std::make_unique<adapter::MockModel>(spec, tokenizer);
    }
    if (model.starts_with("mock:")) {
        const auto path = model.substr(5);
        note_input(ctx, path);
        return std::make_unique<adapter::MockModel>(adapter::MockModelSpec::load(path), tokenizer);
    }
    if (model.starts_with("http:") && !model.starts_with("http://")) {
        return std::make_unique<adapter::HttpModel>(ctx.config.http_config(model.substr(5)));
    }
    if (model.starts_with("http://") || model.starts_with("https://")) {
        return std::make_unique<adapter::HttpModel>(ctx.config.http_config(model));
    }
    throw ValidationError("adapter must be mock, mock:FILE or http:URL, got '" + model + "'");
}

std::string fmt(double v, int precision = 6)
{
    std::ostringstream ss;
    ss << std::setprecision(precision) << v;
    return ss.str();
}

void cmd_eval_run(Context &ctx)
{
    auto config = ctx.config.eval_config();
    auto tokenizer = load_tokenizer(ctx, true);
    config.tokenizer = tokenizer;
    const auto &tasks_dir = ctx.config.get("eval.tasks");
    if (tasks_dir.empty()) {
        throw ValidationError("eval.tasks is not set (use --tasks)");
    }
    note_input(ctx, tasks_dir);
    const auto tasks = eval::load_task_suite(tasks_dir);
    auto model = make_adapter(ctx, tokenizer);
    const auto dir = output_dir(ctx, "eval.output");

    const auto report = eval::evaluate_suite(*model, tasks, config);
    write_file(ctx, dir / "report.json", eval::render_report(report, config));
    write_file(ctx, dir / "trace.jsonl", eval::render_trace(report));

    for (const auto &w : report.warnings) {
        ctx.err << "warning: " << w << "\n";
    }
    for (const auto &t : report.tasks) {
        if (t.result) {
            ctx.out << t.task << " " << metrics::to_string(t.result->metric) << " "
                    << fmt(eval::round_significant(t.result->raw)) << "\n";
        } else {
            ctx.out << t.task << " invalid\n";
        }
    }
    const auto show = [&](const char *name, const std::optional<double> &v) {
        ctx.out << name << " " << (v ? fmt(eval::round_significant(*v)) : "n/a") << "\n";
    };
    show("npm_native", report.npm.npm_native);
    show("npm_translated", report.npm.npm_translated);
    show("npm_all", report.npm.npm_all);
}

void cmd_eval_report(Context &ctx)
{
    if (ctx.report_path.empty()) {
        throw ValidationError("--report is required");
    }
    std::ifstream in(ctx.report_path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open " + ctx.report_path);
    }
    note_input(ctx, ctx.report_path);
    json j;
    try {
        j = json::parse(in);
        ctx.out << std::left << std::setw(24) << "task" << std::setw(12) << "metric" << std::setw(12)
                << "raw" << std::setw(12) << "random" << "npm\n";
        for (const auto &t : j.at("tasks")) {
            const auto name = t.at("task").get<std::string>();
            if (!t.at("valid").get<bool>()) {
                ctx.out << std::setw(24) << name << "invalid: " << t.value("error", "") << "\n";
                continue;
            }
            ctx.out << std::setw(24) << name << std::setw(12) << t.at("metric").get<std::string>()
                    << std::setw(12) << fmt(t.at("raw").get<double>()) << std::setw(12)
                    << fmt(t.at("random_score").get<double>())
                    << fmt(t.at("npm_component").get<double>()) << "\n";
        }
        for (const char *split : {"native", "translated", "all"}) {
            const auto &v = j.at("npm").at(split);
            ctx.out << "npm_" << split << " " << (v.is_null() ? std::string("n/a") : fmt(v.get<double>()))
                    << "\n";
        }
    } catch (const json::exception &e) {
        throw ValidationError(ctx.report_path + ": not a report: " + e.what());
    }
}

void cmd_budget_mfu(Context &ctx)
{
    const auto hw = train::hardware_preset(ctx.config.get("hardware.name"));
    const double value = train::mfu(ctx.config.get_real("budget.params"), ctx.config.get_real("budget.tps"), hw);
    ctx.out << "hardware " << hw.name << " peak_flops " << fmt(hw.peak_flops) << "\n";
    ctx.out << "mfu " << fmt(value) << " (" << std::fixed << std::setprecision(1) << value * 100.0
            << "%)\n"
            << std::defaultfloat;
}

void cmd_budget_tokens(Context &ctx)
{
    const auto &c = ctx.config;
    train::BudgetInputs in;
    in.steps = c.get_uint("budget.steps");
    in.batch_seqs = c.get_uint("budget.batch");
    in.seq_len = c.get_uint("budget.seqlen");
    if (c.is_set("budget.corpus_tokens")) {
        in.corpus_tokens = c.get_real("budget.corpus_tokens");
    }
    if (c.is_set("budget.tps")) {
        in.tokens_per_sec = c.get_real("budget.tps");
    }
    if (c.is_set("budget.usd_per_hour")) {
        in.usd_per_hour = c.get_real("budget.usd_per_hour");
    }
    const auto r = train::budget(in);
    ctx.out << "tokens " << r.tokens_trained << "\n";
    if (r.epochs) {
        ctx.out << "epochs " << fmt(*r.epochs) << "\n";
    }
    if (r.wallclock_seconds) {
        ctx.out << "wallclock_seconds " << fmt(*r.wallclock_seconds) << "\n";
        ctx.out << "wallclock_hours " << fmt(*r.wallclock_seconds / 3600.0) << "\n";
    }
    if (r.cost_usd) {
        ctx.out << "cost_usd " << std::fixed << std::setprecision(2) << *r.cost_usd << std::defaultfloat
                << "\n";
    }
}

void cmd_schedule_dump(Context &ctx)
{
    const auto spec = ctx.config.schedule();
    if (ctx.dump_steps == 0) {
        throw ValidationError("--steps must be at least 1");
    }
    std::ostringstream csv;
    csv << "k,lr,beta2\n" << std::setprecision(17);
    for (std::uint64_t k = 1; k <= ctx.dump_steps; ++k) {
        csv << k << ',' << train::lr_at(spec, k) << ',' << train::beta2_at(k) << '\n';
    }
    if (ctx.dump_out.empty()) {
        ctx.out << csv.str();
    } else {
        write_file(ctx, ctx.dump_out, csv.str());
    }
}

fs::path manifest_path(const Context &ctx, const std::string &explicit_path)
{
    if (!explicit_path.empty()) {
        return explicit_path;
    }
    for (const char *key : {"corpus.output", "eval.output"}) {
        const auto &subs = ctx.manifest.subcommand;
        const bool relevant = (std::string_view(key) == "corpus.output" && subs.starts_with("corpus")) ||
                              (std::string_view(key) == "eval.output" && subs == "eval run");
        if (relevant && ctx.config.is_set(key)) {
            return fs::path(ctx.config.get(key)) / "manifest.json";
        }
    }
    return "ptkit-manifest.json";
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err)
{
    CLI::App app{"Pretraining data, tokenizer, evaluation and training-math toolkit", "ptkit"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", kToolVersion);

    std::string config_path;
    std::string spec_path;
    std::vector<std::string> assignments;
    std::string manifest_override;
    bool canonical = false;
    std::vector<std::tuple<CLI::Option *, std::string, std::string>> bound;
    std::map<std::string, std::string> flag_values;

    const auto bind = [&](CLI::App *cmd, const std::string &flag, const std::string &key,
                          const std::string &help) {
        const auto slot = key + "@" + flag;
        bound.emplace_back(cmd->add_option(flag, flag_values[slot], help), key, slot);
    };

    app.add_option("--config", config_path, "key = value config file");
    app.add_option("--set", assignments, "override a config key: section.key=value");
    app.add_option("--manifest", manifest_override, "manifest path");
    app.add_flag("--canonical", canonical, "omit timestamps from the manifest");
    bind(&app, "--seed", "seed", "global seed");
    bind(&app, "--workers", "workers", "worker threads (0 = logical CPUs)");

    Context ctx{RunConfig{}, RunManifest{}, out, err};

    auto *corpus_cmd = app.add_subcommand("corpus", "clean, filter and pack a corpus");
    corpus_cmd->require_subcommand(1);
    corpus_cmd->fallthrough();
    std::vector<CLI::App *> leaves;
    for (const char *name : {"filter", "pack"}) {
        auto *c = corpus_cmd->add_subcommand(name, std::string(name) == "filter"
                                                       ? "normalize and quality-filter documents"
                                                       : "filter, tokenize and pack documents");
        bind(c, "--input", "corpus.input", "JSONL file or directory");
        bind(c, "--format", "corpus.format", "auto | jsonl | dir");
        bind(c, "--out", "corpus.output", "output directory");
        bind(c, "--vocab", "tokenizer.vocab", "vocab.json");
        bind(c, "--merges", "tokenizer.merges", "merges.txt");
        if (std::string(name) == "pack") {
            bind(c, "--eos", "corpus.eos_id", "end-of-document token id");
        }
        leaves.push_back(c);
    }

    auto *tok_cmd = app.add_subcommand("tokenize", "tokenizer utilities");
    tok_cmd->require_subcommand(1);
    tok_cmd->fallthrough();
    auto *count_cmd = tok_cmd->add_subcommand("count", "count tokens of a text");
    bind(count_cmd, "--vocab", "tokenizer.vocab", "vocab.json");
    bind(count_cmd, "--merges", "tokenizer.merges", "merges.txt");
    bind(count_cmd, "--input", "corpus.input", "text file, - for stdin");
    count_cmd->add_option("--text", ctx.text, "text to count");
    count_cmd->add_flag("--unique", ctx.unique, "count distinct token ids");
    leaves.push_back(count_cmd);

    auto *eval_cmd = app.add_subcommand("eval", "few-shot evaluation");
    eval_cmd->require_subcommand(1);
    eval_cmd->fallthrough();
    auto *eval_run = eval_cmd->add_subcommand("run", "evaluate a task suite");
    bind(eval_run, "--tasks", "eval.tasks", "directory of task directories");
    bind(eval_run, "--adapter", "adapter.model", "mock | mock:FILE | http:URL");
    bind(eval_run, "--budget", "eval.budget", "prompt token budget");
    bind(eval_run, "--shots", "eval.shots", "table | max-fit | k");
    bind(eval_run, "--cap", "eval.cap", "max test examples per task");
    bind(eval_run, "--normalize", "eval.normalize", "task | none | char");
    bind(eval_run, "--max-inflight", "eval.max_inflight", "concurrent model requests");
    bind(eval_run, "--out", "eval.output", "output directory");
    bind(eval_run, "--vocab", "tokenizer.vocab", "vocab.json");
    bind(eval_run, "--merges", "tokenizer.merges", "merges.txt");
    leaves.push_back(eval_run);
    auto *eval_report = eval_cmd->add_subcommand("report", "print a report.json");
    eval_report->add_option("--report", ctx.report_path, "report.json")->required();
    leaves.push_back(eval_report);

    auto *budget_cmd = app.add_subcommand("budget", "training budget calculators");
    budget_cmd->require_subcommand(1);
    budget_cmd->fallthrough();
    auto *mfu_cmd = budget_cmd->add_subcommand("mfu", "model FLOPs utilization");
    bind(mfu_cmd, "--params", "budget.params", "parameter count");
    bind(mfu_cmd, "--tps", "budget.tps", "tokens per second");
    bind(mfu_cmd, "--hardware", "hardware.name", "v2-512 | v3-8 | custom:FLOPS");
    leaves.push_back(mfu_cmd);
    auto *tokens_cmd = budget_cmd->add_subcommand("tokens", "tokens, epochs, time and cost");
    bind(tokens_cmd, "--steps", "budget.steps", "optimizer steps");
    bind(tokens_cmd, "--batch", "budget.batch", "sequences per batch");
    bind(tokens_cmd, "--seqlen", "budget.seqlen", "tokens per sequence");
    bind(tokens_cmd, "--corpus", "budget.corpus_tokens", "corpus size in tokens");
    bind(tokens_cmd, "--tps", "budget.tps", "tokens per second");
    bind(tokens_cmd, "--usd-per-hour", "budget.usd_per_hour", "hardware price");
    leaves.push_back(tokens_cmd);

    auto *sched_cmd = app.add_subcommand("schedule", "learning-rate schedules");
    sched_cmd->require_subcommand(1);
    sched_cmd->fallthrough();
    auto *dump_cmd = sched_cmd->add_subcommand("dump", "CSV of k, lr, beta2");
    dump_cmd->add_option("--spec", spec_path, "config file with a [schedule] section");
    dump_cmd->add_option("--steps", ctx.dump_steps, "last step")->required();
    dump_cmd->add_option("--out", ctx.dump_out, "CSV path (default stdout)");
    leaves.push_back(dump_cmd);

    std::vector<std::string> argv_store{"ptkit"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char *> argv;
    for (auto &a : argv_store) {
        argv.push_back(a.data());
    }

    ctx.manifest.tool_version = kToolVersion;
    ctx.manifest.argv = args;
    ctx.manifest.started_at = utc_timestamp();

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion &e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError &e) {
        app.exit(e, out, err);
        return 1;
    }

    CLI::App *leaf = nullptr;
    for (auto *l : leaves) {
        if (l->parsed()) {
            leaf = l;
        }
    }
    ctx.manifest.subcommand = leaf->get_parent()->get_name() + " " + leaf->get_name();

    int code = 0;
    try {
        try {
            if (!config_path.empty() && !spec_path.empty()) {
                throw ValidationError("use either --config or --spec, not both");
            }
            if (!config_path.empty() || !spec_path.empty()) {
                const auto &path = config_path.empty() ? spec_path : config_path;
                ctx.config = RunConfig::load(path);
                note_input(ctx, path);
            }
            for (const auto &a : assignments) {
                ctx.config.set_assignment(a);
            }
            for (const auto &[opt, key, slot] : bound) {
                if (opt->count() > 0) {
                    ctx.config.set(key, flag_values[slot]);
                }
            }
            if (ctx.config.is_set("seed")) {
                ctx.manifest.seed = ctx.config.get_uint("seed");
            }

            const auto &sub = ctx.manifest.subcommand;
            if (sub == "corpus filter") {
                cmd_corpus_filter(ctx);
            } else if (sub == "corpus pack") {
                cmd_corpus_pack(ctx);
            } else if (sub == "tokenize count") {
                cmd_tokenize_count(ctx);
            } else if (sub == "eval run") {
                cmd_eval_run(ctx);
            } else if (sub == "eval report") {
                cmd_eval_report(ctx);
            } else if (sub == "budget mfu") {
                cmd_budget_mfu(ctx);
            } else if (sub == "budget tokens") {
                cmd_budget_tokens(ctx);
            } else if (sub == "schedule dump") {
                cmd_schedule_dump(ctx);
            }
        } catch (const ValidationError &) {
            throw;
        } catch (const std::invalid_argument &e) {
            throw ValidationError(e.what());
        }
    } catch (const ValidationError &e) {
        code = 1;
        ctx.manifest.status = "validation_error";
        ctx.manifest.message = e.what();
        err << "error: " << e.what() << "\n";
    } catch (const std::exception &e) {
        code = 2;
        ctx.manifest.status = "runtime_error";
        ctx.manifest.message = e.what();
        err << "error: " << e.what() << "\n";
    }

    ctx.manifest.exit_code = code;
    ctx.manifest.partial_outputs = code != 0 && !ctx.manifest.outputs.empty();
    ctx.manifest.config = ctx.config.render();
    ctx.manifest.finished_at = utc_timestamp();
    try {
        ctx.manifest.write_atomic(manifest_path(ctx, manifest_override), canonical);
    } catch (const std::exception &e) {
        err << "error: cannot write run manifest: " << e.what() << "\n";
        if (code == 0) {
            code = 2;
        }
    }
    return code;
}

} // namespace ptkit::cli
