// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include "ptkit/bpe.hpp"
#include "ptkit/corpus.hpp"
#include "ptkit/eval.hpp"
#include "ptkit/train_math.hpp"
#include "ptkit/utf8.hpp"

#include "manifest.hpp"
#include "runner.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ptkit;

namespace {

const fs::path kData = PTKIT_TEST_DATA;

std::string slurp(const fs::path &p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::shared_ptr<const bpe::Tokenizer> gpt2()
{
    static const auto tok = std::make_shared<const bpe::Tokenizer>(
        bpe::Tokenizer::load(kData / "gpt2/vocab.json", kData / "gpt2/merges.txt"));
    return tok;
}

struct Check {
    bool ok = true;
    std::ostringstream detail;

    void expect(bool cond, const std::string &what)
    {
        if (!cond) {
            ok = false;
            detail << " [failed: " << what << "]";
        }
    }
};

std::string fixed(double v, int digits)
{
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(digits) << v;
    return ss.str();
}

void mfu_reproduction(Check &c)
{
    const auto v2 = train::hardware_preset("v2-512");
    const auto v3 = train::hardware_preset("v3-8");
    const struct {
        double params, tps;
        const train::HardwareSpec &hw;
        double expected;
    } cases[] = {{7.0e9, 124000, v2, 0.452}, {65e9, 14000, v2, 0.474}, {6.0e9, 5200, v3, 0.445}};
    for (const auto &k : cases) {
        const double got = train::mfu(k.params, k.tps, k.hw);
        c.detail << " " << fixed(got * 100, 2) << "%";
        c.expect(std::abs(got - k.expected) <= 0.001, "mfu " + fixed(k.expected * 100, 1) + "%");
    }
}

void budget_reproduction(Check &c)
{
    const auto small = train::budget({10000, 512, 2048, {}, 124000.0, 384.0});
    const auto large = train::budget({10000, 512, 2048, {}, 14000.0, 384.0});
    c.detail << " tokens " << small.tokens_trained << ", $" << fixed(*small.cost_usd, 0) << ", $"
             << fixed(*large.cost_usd, 0);
    c.expect(small.tokens_trained == 10'485'760'000ULL, "token count");
    c.expect(std::abs(*small.cost_usd - 9000.0) <= 0.05 * 9000.0, "7B cost");
    c.expect(std::abs(*large.cost_usd - 80000.0) <= 0.05 * 80000.0, "65B cost");

    std::ostringstream out, err;
    const auto manifest = fs::temp_directory_path() / "ptkit-acceptance-budget.json";
    const int code = cli::run({"--manifest", manifest.string(), "budget", "tokens", "--steps", "10000",
                               "--batch", "512", "--seqlen", "2048"},
                              out, err);
    c.expect(code == 0 && out.str() == "tokens 10485760000\n", "cli budget tokens");
}

void lr_schedules(Check &c)
{
    const train::ScheduleSpec constant = train::WarmupConstant{1e-3, 1000, 10000};
    c.expect(train::lr_at(constant, 0) == 0.0, "lr(0) = 0");
    for (std::uint64_t k = 1000; k <= 10000; ++k) {
        if (train::lr_at(constant, k) != 1e-3) {
            c.expect(false, "lr(" + std::to_string(k) + ") = 1e-3");
            break;
        }
    }
    const train::WarmupCosineFloor spec{1.2e-5, 2.4e-6, 13500, 135518};
    const train::ScheduleSpec cosine = spec;
    c.expect(train::lr_at(cosine, 13500) == 1.2e-5, "lr(13500) = 1.2e-5");
    c.expect(train::lr_at(cosine, 149018) == 2.4e-6, "lr(149018) = 2.4e-6");
    for (std::uint64_t k = 149018; k < 160000; k += 13) {
        if (train::lr_at(cosine, k) != 2.4e-6) {
            c.expect(false, "floor after decay");
            break;
        }
    }
    c.expect(train::lr_at(cosine, 13500 + 67759) == (spec.peak + spec.end) / 2, "cosine midpoint");
    c.detail << " midpoint " << train::lr_at(cosine, 13500 + 67759);
}

void npm_from_tables(Check &c)
{
    const auto t = json::parse(slurp(kData / "published_scores.json"));
    const auto datasets = t["datasets"].get<std::vector<std::string>>();
    for (const auto &[model, expected] : {std::pair<std::string, double>{"LLaMA-65B", 63.7}, {"Sabiá-65B", 69.4}}) {
        const auto scores = t["models"][model]["scores"].get<std::vector<double>>();
        std::vector<eval::MetricResult> results;
        for (std::size_t i = 0; i < datasets.size(); ++i) {
            const auto *entry = eval::find_registry_entry(datasets[i]);
            if (entry == nullptr) {
                c.expect(false, "registry entry " + datasets[i]);
                return;
            }
            eval::MetricResult r;
            r.task = entry->name;
            r.origin = entry->origin;
            r.raw = scores[i];
            r.random_score = entry->random_score;
            r.high_score = entry->high_score;
            results.push_back(r);
        }
        const auto npm = eval::compute_npm(results);
        c.detail << " " << model << " " << fixed(*npm.npm_all, 2);
        c.expect(std::abs(*npm.npm_all - expected) <= 1.0, model + " npm_all");
    }
}

void zloss_gradient(Check &c)
{
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20230526);
    std::uniform_real_distribution<double> value(-20.0, 20.0);
    std::uniform_int_distribution<std::size_t> length(1, 64);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> z(length(rng));
        for (auto &x : z) {
            x = value(rng);
        }
        const auto grad = train::zloss_grad(z);
        double diff = 0.0, norm = 0.0;
        for (std::size_t j = 0; j < z.size(); ++j) {
            const double h = 1e-5 * std::max(1.0, std::abs(z[j]));
            auto up = z, down = z;
            up[j] += h;
            down[j] -= h;
            const double fd = (train::zloss(up) - train::zloss(down)) / (2 * h);
            diff += (grad[j] - fd) * (grad[j] - fd);
            norm += grad[j] * grad[j];
        }
        worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(norm), 1e-300));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.detail << " max relative error " << worst << " in " << fixed(secs, 3) << " s";
    c.expect(worst <= 1e-6, "relative error");
    c.expect(secs < 5.0, "runtime");
}

std::string fuzz_string(std::mt19937_64 &rng)
{
    static const char32_t common[] = {U'a', U'e', U'o', U's', U'ã', U'ç', U'é', U'õ', U'á', U' ',
                                      U' ', U'\n', U'\t', U'\'', U'.', U',', U'!', U'1', U'9', U'€',
                                      U'日', U'😀', U'́', U'\r', U'Ω', U'ب'};
    std::string s;
    const auto n = std::uniform_int_distribution<int>(0, 60)(rng);
    for (int i = 0; i < n; ++i) {
        char32_t cp;
        if (std::uniform_int_distribution<int>(0, 3)(rng) == 0) {
            do {
                cp = std::uniform_int_distribution<char32_t>(1, 0x10FFFF)(rng);
            } while (cp >= 0xD800 && cp <= 0xDFFF);
        } else {
            cp = common[std::uniform_int_distribution<std::size_t>(0, std::size(common) - 1)(rng)];
        }
        utf8::append(s, cp);
    }
    return s;
}

void tokenizer_fidelity(Check &c)
{
    const auto &tok = *gpt2();
    std::mt19937_64 rng(6);
    std::size_t failures = 0;
    for (int i = 0; i < 10000; ++i) {
        const auto s = fuzz_string(rng);
        failures += tok.decode(tok.encode(s)) != s;
    }
    c.detail << " round-trip failures " << failures << "/10000";
    c.expect(failures == 0, "round trip");

    const auto fixture = json::parse(slurp(kData / "gpt2_reference.json"));
    std::size_t matched = 0;
    for (const auto &row : fixture) {
        matched += tok.encode(row["text"].get<std::string>()) == row["ids"].get<std::vector<bpe::TokenId>>();
    }
    c.detail << ", reference ids " << matched << "/" << fixture.size();
    c.expect(fixture.size() == 50 && matched == 50, "reference ids");
}

struct PackRun {
    corpus::CorpusStats stats;
    std::string sha;
};

PackRun pack_fixture(std::size_t workers)
{
    corpus::PipelineOptions opts;
    opts.workers = workers;
    corpus::CorpusPipeline pipeline(gpt2(), opts);
    corpus::JsonlSource src(kData / "corpus/fixture.jsonl");
    const auto path = fs::temp_directory_path() / ("ptkit-acceptance-tokens-" + std::to_string(workers) + ".bin");
    corpus::TokenWriter writer(path);
    const bpe::TokenId eos = 50256;
    PackRun run;
    run.stats = pipeline.run(
        src,
        [&](const corpus::DocumentOutcome &d) {
            writer.write(d.tokens);
            writer.write(std::span<const bpe::TokenId>(&eos, 1));
        },
        {});
    writer.close();
    run.sha = cli::sha256_hex(slurp(path));
    return run;
}

void pipeline_determinism(Check &c)
{
    const auto golden = json::parse(slurp(kData / "corpus/golden.json"));
    const auto a = pack_fixture(1);
    const auto b = pack_fixture(1);
    const auto d = pack_fixture(4);
    c.detail << " kept " << a.stats.docs_kept << "/" << a.stats.docs_in << ", tokens " << a.stats.tokens_emitted
             << ", sha256 " << a.sha.substr(0, 12);
    c.expect(a.stats.docs_in == golden["docs_in"].get<std::uint64_t>(), "docs_in");
    c.expect(a.stats.docs_kept == golden["docs_kept"].get<std::uint64_t>(), "docs_kept");
    c.expect(a.stats.tokens_emitted == golden["tokens_emitted"].get<std::uint64_t>(), "tokens_emitted");
    c.expect(a.stats.balanced(), "ledger balance");
    std::uint64_t listed = 0;
    for (const auto &[name, count] : golden["rejected"].items()) {
        const auto reason = corpus::reject_reason_from_string(name);
        const auto it = reason ? a.stats.rejections.find(*reason) : a.stats.rejections.end();
        const auto got = it == a.stats.rejections.end() ? 0 : it->second;
        c.expect(got == count.get<std::uint64_t>(), "rejections for " + name);
        listed += got;
    }
    c.expect(listed == a.stats.total_rejected(), "no unexpected rejection reasons");
    c.expect(a.sha == golden["packed_sha256"].get<std::string>(), "packed sha256");
    c.expect(a.sha == b.sha && a.stats == b.stats, "identical across runs");
    c.expect(a.sha == d.sha && a.stats == d.stats, "identical across worker counts");
}

void eval_oracle(Check &c)
{
    const auto golden = json::parse(slurp(kData / "eval/golden.json"));
    adapter::MockModel model(adapter::MockModelSpec::load(kData / "eval/mock.json"), gpt2());
    eval::EvalConfig config;
    config.tokenizer = gpt2();
    const auto report = eval::evaluate_suite(model, eval::load_task_suite(kData / "eval/tasks"), config);
    std::set<eval::AnswerMode> modes;
    for (const auto &t : eval::load_task_suite(kData / "eval/tasks")) {
        modes.insert(t.answer_mode);
    }
    c.expect(modes.size() == 3, "one task per answer mode");
    c.expect(report.tasks.size() == 3, "three tasks");
    for (const auto &t : report.tasks) {
        c.expect(t.result && t.result->raw == golden["tasks"][t.task]["raw"].get<double>(), "raw " + t.task);
    }
    c.expect(report.npm.npm_all && *report.npm.npm_all == golden["npm_all"].get<double>(), "npm_all");
    c.expect(report.npm.npm_native && *report.npm.npm_native == golden["npm_native"].get<double>(), "npm_native");
    c.expect(report.npm.npm_translated && *report.npm.npm_translated == golden["npm_translated"].get<double>(),
             "npm_translated");
    if (report.npm.npm_all) {
        c.detail << " npm_all " << std::setprecision(17) << *report.npm.npm_all;
    }

    const auto out = fs::temp_directory_path() / "ptkit-acceptance-eval";
    fs::remove_all(out);
    std::ostringstream so, se;
    const int code = cli::run({"--canonical", "eval", "run", "--tasks", (kData / "eval/tasks").string(), "--adapter",
                               "mock:" + (kData / "eval/mock.json").string(), "--out", out.string(), "--vocab",
                               (kData / "gpt2/vocab.json").string(), "--merges",
                               (kData / "gpt2/merges.txt").string()},
                              so, se);
    c.expect(code == 0, "cli exit code");
    if (code == 0) {
        const auto j = json::parse(slurp(out / "report.json"));
        c.expect(j["npm"]["all"].get<double>() == eval::round_significant(golden["npm_all"].get<double>()),
                 "report.json npm_all");
        for (const auto &t : j["tasks"]) {
            const auto name = t["task"].get<std::string>();
            c.expect(t["raw"].get<double>() == eval::round_significant(golden["tasks"][name]["raw"].get<double>()),
                     "report.json raw " + name);
        }
    }
}

std::string random_words(std::mt19937_64 &rng, std::size_t max_words)
{
    static const std::vector<std::string> words = {
        "o", "a", "de", "que", "gato", "casa", "resposta", "pergunta", "educação", "não", "sim",
        "1984", "3,14", "—", "!", "?", "São", "Paulo", "ﬁ", "😀", "日本", "informação", "\n"};
    std::string s;
    const auto n = std::uniform_int_distribution<std::size_t>(0, max_words)(rng);
    for (std::size_t i = 0; i < n; ++i) {
        if (std::uniform_int_distribution<int>(0, 9)(rng) == 0) {
            s += words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)];
        } else {
            s += " " + words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)];
        }
    }
    return s;
}

void prompt_budget(Check &c)
{
    const std::size_t budget = 2048;
    std::mt19937_64 rng(9);
    const auto count = eval::tokenizer_counter(gpt2());
    std::size_t prompts = 0, over = 0, not_maximal = 0, rejected = 0, max_fit = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        eval::TaskSpec task;
        task.name = "fixture-" + std::to_string(trial);
        task.instruction = random_words(rng, 40);
        if (trial % 3 == 0) {
            task.templates.shot = "Texto: {input}\nClasse: {answer}";
            task.templates.query = "Texto: {input}\nClasse:";
            task.templates.separator = "\n###\n";
        }
        const auto labels = std::vector<std::string>{"positivo", "negativo", "neutro"};
        const auto pool_size = std::uniform_int_distribution<std::size_t>(0, 60)(rng);
        const auto shot_len = std::uniform_int_distribution<std::size_t>(5, 300)(rng);
        for (std::size_t i = 0; i < pool_size; ++i) {
            eval::Example e;
            e.id = "s" + std::to_string(i);
            e.input = random_words(rng, shot_len);
            e.label = labels[i % labels.size()];
            task.shot_pool.push_back(e);
        }
        eval::Example test;
        test.id = "t";
        test.input = random_words(rng, trial % 50 == 0 ? 2500 : 200);
        const bool balanced = trial % 2 == 0;
        const auto stream = eval::shot_stream(task.shot_pool, balanced,
                                              trial % 4 == 0 ? std::optional<std::uint64_t>(trial) : std::nullopt,
                                              labels);
        const auto policy = trial % 5 == 0 ? eval::ShotPolicy::fixed(std::uniform_int_distribution<std::size_t>(0, 30)(rng))
                                           : eval::ShotPolicy::max_fit();
        eval::Prompt p;
        try {
            p = eval::build_prompt(task, test, stream, budget, count, policy);
        } catch (const eval::BudgetError &) {
            ++rejected;
            if (count(eval::render_prompt(task, stream, 0, test)) <= budget) {
                ++over;
            }
            continue;
        }
        ++prompts;
        if (p.token_count > budget || gpt2()->count_tokens(p.text) != p.token_count) {
            ++over;
        }
        if (policy.kind == eval::ShotPolicy::Kind::max_fit) {
            ++max_fit;
            if (p.shot_count < stream.size() &&
                gpt2()->count_tokens(eval::render_prompt(task, stream, p.shot_count + 1, test)) <= budget) {
                ++not_maximal;
            }
            if (p.shot_count == stream.size() && stream.size() > 0 &&
                gpt2()->count_tokens(p.text) > budget) {
                ++over;
            }
        }
    }
    c.detail << " " << prompts << " prompts (" << max_fit << " max_fit), " << rejected
             << " over-budget rejections, violations " << over << "/" << not_maximal;
    c.expect(prompts + rejected == 1000, "fixture count");
    c.expect(over == 0, "prompt within budget");
    c.expect(not_maximal == 0, "max_fit is maximal");
}

void optimizer_behaviour(Check &c)
{
    const train::OptimizerConfig cfg;
    train::TensorList theta = {{5.0}};
    auto state = train::OptimizerState::zeros_like(theta);
    int steps = 0;
    bool v_nonnegative = true;
    while (std::abs(theta[0][0]) >= 0.01 && steps < 5000) {
        auto r = train::adafactor_step(theta, {{theta[0][0]}}, state, 1e-2, cfg);
        v_nonnegative = v_nonnegative && r.state.second_moment[0][0] >= 0.0;
        theta = std::move(r.params);
        state = std::move(r.state);
        ++steps;
    }
    c.detail << " |theta| < 0.01 after " << steps << " steps";
    c.expect(std::abs(theta[0][0]) < 0.01, "convergence within 5000 steps");
    c.expect(v_nonnegative, "v >= 0");

    // k = 1, g = 2 (clipped to 1), m = 0, theta = 1, lr = 1e-3.
    const auto r = train::adafactor_step({{1.0}}, {{2.0}}, train::OptimizerState::zeros_like({{1.0}}), 1e-3, cfg);
    const double expected_theta = 1.0 * (1.0 - 1e-6) - 1e-3 * 0.1;
    c.expect(std::abs(r.state.second_moment[0][0] - 1.0) <= 1e-12, "hand trace v");
    c.expect(std::abs(r.state.momentum[0][0] - 0.1) <= 1e-12, "hand trace m");
    c.expect(std::abs(r.params[0][0] - expected_theta) <= 1e-12, "hand trace theta");
}

} // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<void(Check &)>>> criteria = {
        {"MFU reproduction", mfu_reproduction},
        {"token budget and cost", budget_reproduction},
        {"learning-rate schedules", lr_schedules},
        {"NPM from published per-dataset scores", npm_from_tables},
        {"z-loss gradient check", zloss_gradient},
        {"tokenizer fidelity", tokenizer_fidelity},
        {"pipeline determinism and ledger", pipeline_determinism},
        {"end-to-end eval oracle", eval_oracle},
        {"prompt budget property", prompt_budget},
        {"optimizer behaviour", optimizer_behaviour},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Check c;
        try {
            criteria[i].second(c);
        } catch (const std::exception &e) {
            c.expect(false, std::string("exception: ") + e.what());
        }
        std::cout << (c.ok ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << criteria[i].first << " -"
                  << c.detail.str() << "\n";
        failed += c.ok ? 0 : 1;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
    return failed == 0 ? 0 : 1;
}
