#include "ptkit/train_math.hpp"

#include "ptkit/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>

namespace ptkit::train {

double beta2_at(std::uint64_t k, double exponent)
{
    if (k == 0) {
        throw ValidationError("beta2_at: step numbering starts at 1");
    }
    return 1.0 - std::pow(static_cast<double>(k), -exponent);
}

namespace {

struct ScheduleValidator {
    void operator()(const WarmupConstant &s) const
    {
        if (!(s.peak > 0.0)) {
            throw ValidationError("schedule.peak must be positive");
        }
    }
    void operator()(const WarmupCosineFloor &s) const
    {
        if (!(s.end > 0.0 && s.end <= s.peak)) {
            throw ValidationError("schedule needs 0 < end <= peak");
        }
        if (s.decay_steps == 0) {
            throw ValidationError("schedule.decay_steps must be positive");
        }
    }
};

double warmup(double peak, std::uint64_t k, std::uint64_t warmup_steps)
{
    if (warmup_steps == 0 || k >= warmup_steps) {
        return peak;
    }
    return peak * (static_cast<double>(k) / static_cast<double>(warmup_steps));
}

struct ScheduleEval {
    std::uint64_t k;

    double operator()(const WarmupConstant &s) const { return warmup(s.peak, k, s.warmup_steps); }

    double operator()(const WarmupCosineFloor &s) const
    {
        if (k <= s.warmup_steps) {
            return warmup(s.peak, k, s.warmup_steps);
        }
        const std::uint64_t into = k - s.warmup_steps;
        if (into >= s.decay_steps) {
            return s.end;
        }
        const double p = static_cast<double>(into) / static_cast<double>(s.decay_steps);
        // Written around the midpoint so lr is exactly (peak + end) / 2 at
        // p = 0.5, where cos(pi p) is only approximately zero.
        const double mid = 0.5 * (s.peak + s.end);
        const double half = 0.5 * (s.peak - s.end);
        return mid + half * std::cos(std::numbers::pi * p);
    }
};

void check_shapes(const TensorList &a, const TensorList &b, const char *what)
{
    if (a.size() != b.size()) {
        throw ValidationError(std::string("adafactor_step: ") + what + " has " +
                              std::to_string(b.size()) + " tensors, params has " +
                              std::to_string(a.size()));
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size()) {
            throw ValidationError(std::string("adafactor_step: ") + what + " tensor " +
                                  std::to_string(i) + " has " + std::to_string(b[i].size()) +
                                  " elements, expected " + std::to_string(a[i].size()));
        }
    }
}

} // namespace

void validate(const ScheduleSpec &spec) { std::visit(ScheduleValidator{}, spec); }

double lr_at(const ScheduleSpec &spec, std::uint64_t k) { return std::visit(ScheduleEval{k}, spec); }

double log_sum_exp(const std::vector<double> &logits)
{
    if (logits.empty()) {
        throw ValidationError("log_sum_exp: empty logits");
    }
    const double max = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) {
        sum += std::exp(z - max);
    }
    return max + std::log(sum);
}

double zloss(const std::vector<double> &logits, double coefficient)
{
    const double log_z = log_sum_exp(logits);
    return coefficient * log_z * log_z;
}

std::vector<double> zloss_grad(const std::vector<double> &logits, double coefficient)
{
    const double log_z = log_sum_exp(logits);
    std::vector<double> grad(logits.size());
    for (std::size_t j = 0; j < logits.size(); ++j) {
        grad[j] = 2.0 * coefficient * log_z * std::exp(logits[j] - log_z);
    }
    return grad;
}

double global_norm(const TensorList &tensors)
{
    double sum = 0.0;
    for (const auto &t : tensors) {
        for (double x : t) {
            sum += x * x;
        }
    }
    return std::sqrt(sum);
}

TensorList clip_global_norm(TensorList grads, double max_norm)
{
    const double norm = global_norm(grads);
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (auto &t : grads) {
            for (double &x : t) {
                x *= scale;
            }
        }
    }
    return grads;
}

void OptimizerConfig::validate() const
{
    if (!(beta1 >= 0.0 && beta1 < 1.0)) {
        throw ValidationError("optimizer beta1 must be in [0, 1)");
    }
    if (!(beta2_exponent > 0.0)) {
        throw ValidationError("optimizer beta2 exponent must be positive");
    }
    if (!(epsilon >= 0.0)) {
        throw ValidationError("optimizer epsilon must be non-negative");
    }
}

OptimizerState OptimizerState::zeros_like(const TensorList &params)
{
    OptimizerState s;
    for (const auto &p : params) {
        s.momentum.emplace_back(p.size(), 0.0);
        s.second_moment.emplace_back(p.size(), 0.0);
    }
    return s;
}

StepResult adafactor_step(const TensorList &params, const TensorList &grads,
                          const OptimizerState &state, double lr, const OptimizerConfig &cfg)
{
    cfg.validate();
    check_shapes(params, grads, "grads");
    check_shapes(params, state.momentum, "momentum");
    check_shapes(params, state.second_moment, "second moment");

    const TensorList g = cfg.clip_norm > 0.0 ? clip_global_norm(grads, cfg.clip_norm) : grads;
    const double b2 = beta2_at(state.step, cfg.beta2_exponent);
    const double decay = cfg.lr_squared_decay ? 1.0 - lr * lr : 1.0;

    StepResult out{params, state};
    out.state.step = state.step + 1;
    for (std::size_t t = 0; t < params.size(); ++t) {
        auto &p = out.params[t];
        auto &m = out.state.momentum[t];
        auto &v = out.state.second_moment[t];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g[t][i];
            v[i] = b2 * v[i] + (1.0 - b2) * (gi * gi + cfg.epsilon);
            const double u = v[i] > 0.0 ? gi / std::sqrt(v[i]) : 0.0;
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * u;
            p[i] = p[i] * decay - lr * m[i];
        }
    }
    return out;
}

HardwareSpec hardware_preset(std::string_view name)
{
    if (name == "v2-512") {
        return {"v2-512", 256 * 45e12};
    }
    if (name == "v3-8") {
        return {"v3-8", 4 * 105e12};
    }
    constexpr std::string_view prefix = "custom:";
    if (name.starts_with(prefix)) {
        const auto value = name.substr(prefix.size());
        double flops = 0.0;
        const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), flops);
        if (ec != std::errc{} || ptr != value.data() + value.size() || !(flops > 0.0) ||
            !std::isfinite(flops)) {
            throw ValidationError("hardware '" + std::string(name) +
                                  "': expected custom:<positive FLOP/s>");
        }
        return {std::string(name), flops};
    }
    throw ValidationError("unknown hardware '" + std::string(name) +
                          "' (expected v2-512, v3-8 or custom:FLOPS)");
}

double mfu(double n_params, double tokens_per_sec, const HardwareSpec &hw)
{
    if (!(n_params > 0.0) || !(tokens_per_sec > 0.0) || !(hw.peak_flops > 0.0)) {
        throw ValidationError("mfu: parameters, throughput and peak FLOP/s must be positive");
    }
    return 6.0 * n_params * tokens_per_sec / hw.peak_flops;
}

BudgetReport budget(const BudgetInputs &in)
{
    if (in.steps == 0 || in.batch_seqs == 0 || in.seq_len == 0) {
        throw ValidationError("budget: steps, batch and sequence length must be positive");
    }
    constexpr auto max = std::numeric_limits<std::uint64_t>::max();
    if (in.batch_seqs > max / in.seq_len || in.steps > max / (in.batch_seqs * in.seq_len)) {
        throw ValidationError("budget: token count overflows 64 bits");
    }
    auto positive = [](const std::optional<double> &v, const char *name) {
        if (v && !(*v > 0.0)) {
            throw ValidationError(std::string("budget: ") + name + " must be positive");
        }
    };
    positive(in.corpus_tokens, "corpus tokens");
    positive(in.tokens_per_sec, "tokens/sec");
    positive(in.usd_per_hour, "USD/hour");

    BudgetReport r;
    r.tokens_trained = in.steps * in.batch_seqs * in.seq_len;
    const auto tokens = static_cast<double>(r.tokens_trained);
    if (in.corpus_tokens) {
        r.epochs = tokens / *in.corpus_tokens;
    }
    if (in.tokens_per_sec) {
        r.wallclock_seconds = tokens / *in.tokens_per_sec;
        if (in.usd_per_hour) {
            r.cost_usd = *r.wallclock_seconds / 3600.0 * *in.usd_per_hour;
        }
    }
    return r;
}

} // namespace ptkit::train
