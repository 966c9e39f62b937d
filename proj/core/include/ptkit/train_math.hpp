#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

// Double-precision training arithmetic: the non-factored AdaFactor update,
// the step-dependent second-moment decay, learning-rate schedules, the
// partition-function auxiliary loss, global-norm clipping, and throughput
// accounting. Everything here is a pure function.
namespace ptkit::train {

using Tensor = std::vector<double>;
using TensorList = std::vector<Tensor>;

// 1 - k^(-exponent). Throws ValidationError for k == 0.
double beta2_at(std::uint64_t k, double exponent = 0.8);

struct WarmupConstant {
    double peak = 1e-3;
    std::uint64_t warmup_steps = 1000;
    std::uint64_t total_steps = 10000;
};

// Linear warmup to peak, cosine decay to end over decay_steps, then end.
struct WarmupCosineFloor {
    double peak = 1.2e-5;
    double end = 2.4e-6;
    std::uint64_t warmup_steps = 13500;
    std::uint64_t decay_steps = 135518;
};

using ScheduleSpec = std::variant<WarmupConstant, WarmupCosineFloor>;

void validate(const ScheduleSpec &spec);
double lr_at(const ScheduleSpec &spec, std::uint64_t k);

// 1e-4 * log(sum_i exp(z_i))^2 and its gradient 2e-4 * log Z * softmax(z).
inline constexpr double kZLossCoefficient = 1e-4;
double log_sum_exp(const std::vector<double> &logits);
double zloss(const std::vector<double> &logits, double coefficient = kZLossCoefficient);
std::vector<double> zloss_grad(const std::vector<double> &logits,
                               double coefficient = kZLossCoefficient);

double global_norm(const TensorList &tensors);
// Scales every element by max_norm / norm when the global norm exceeds
// max_norm; identity otherwise.
TensorList clip_global_norm(TensorList grads, double max_norm = 1.0);

struct OptimizerConfig {
    double beta1 = 0.9;
    double beta2_exponent = 0.8;
    double epsilon = 1e-30;
    // <= 0 disables clipping.
    double clip_norm = 1.0;
    // Multiplicative decay params * (1 - lr^2).
    bool lr_squared_decay = true;

    void validate() const;
};

struct OptimizerState {
    std::uint64_t step = 1;
    TensorList momentum;
    TensorList second_moment;

    // Zeroed buffers shaped like params, step 1.
    static OptimizerState zeros_like(const TensorList &params);
};

struct StepResult {
    TensorList params;
    OptimizerState state;
};

// One update:
//   g   = clip(grads)
//   b2  = beta2_at(k)
//   v'  = b2 v + (1 - b2)(g^2 + eps)
//   m'  = b1 m + (1 - b1) g / sqrt(v')
//   p'  = p (1 - lr^2) - lr m'
//   k'  = k + 1
// Throws ValidationError on mismatched shapes or k == 0.
StepResult adafactor_step(const TensorList &params, const TensorList &grads,
                          const OptimizerState &state, double lr, const OptimizerConfig &cfg);

struct HardwareSpec {
    std::string name;
    double peak_flops = 0.0; // FLOP/s
};

// "v2-512" (256 TPU v2 chips x 45 TFLOP/s), "v3-8" (4 TPU v3 chips x
// 105 TFLOP/s) or "custom:<FLOP/s>". Throws ValidationError otherwise.
HardwareSpec hardware_preset(std::string_view name);

// 6 * n_params * tokens_per_sec / peak_flops (attention FLOPs excluded).
double mfu(double n_params, double tokens_per_sec, const HardwareSpec &hw);

struct BudgetReport {
    std::uint64_t tokens_trained = 0;
    std::optional<double> epochs;
    std::optional<double> wallclock_seconds;
    std::optional<double> cost_usd;
};

struct BudgetInputs {
    std::uint64_t steps = 0;
    std::uint64_t batch_seqs = 0;
    std::uint64_t seq_len = 0;
    std::optional<double> corpus_tokens;
    std::optional<double> tokens_per_sec;
    std::optional<double> usd_per_hour;
};

// Throws ValidationError on non-positive inputs or a token count that
// overflows 64 bits.
BudgetReport budget(const BudgetInputs &in);

} // namespace ptkit::train
