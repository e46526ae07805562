#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "basinvol/datasets.hpp"
#include "basinvol/nn.hpp"

namespace basinvol {

enum class OptimizerKind { sgd, adamw, sam_adamw };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_kind_from_string(const std::string& s);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adamw;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
    double rho = 0.05;

    // PyTorch defaults for AdamW; plain SGD uses lr 0.01 and no decay.
    static OptimizerConfig defaults(OptimizerKind kind);
    void validate() const;
};

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    std::uint64_t shuffle_seed = 0;
    std::vector<std::size_t> checkpoint_epochs;
    std::optional<double> target_loss;

    void validate() const;
};

struct Checkpoint {
    std::size_t epoch = 0;
    ParameterVector params;
};

struct TrainResult {
    ParameterVector final_params;
    std::vector<double> train_loss_curve;
    std::vector<double> test_loss_curve;
    std::vector<double> test_accuracy_curve;
    std::vector<Checkpoint> checkpoints;
    std::size_t epochs_completed = 0;
    bool reached_target = false;  // only meaningful with a target loss
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::size_t t = 0;  // number of updates applied so far
};

// In-place updates used by the trainer.
void sgd_update(std::span<double> params, std::span<const double> grad, double lr);
// Increments state.t, then applies decoupled decay and a bias-corrected Adam step.
void adamw_update(AdamState& state, std::span<double> params, std::span<const double> grad, const OptimizerConfig& cfg);

ParameterVector step_sgd(const ParameterVector& params, const ParameterVector& grad, double lr);

struct AdamwStep {
    AdamState state;
    ParameterVector params;
};
// `t` is the 1-based index of this update.
AdamwStep step_adamw(AdamState state, const ParameterVector& params, const ParameterVector& grad,
                     const OptimizerConfig& cfg, std::size_t t);

using GradientFn = std::function<std::vector<double>(std::span<const double>)>;
using BaseStepFn = std::function<void(std::span<double> params, std::span<const double> grad)>;

// Sharpness-aware step: ascend to params + rho g/|g|, take the gradient there,
// and apply `base_step` at the original params. A zero gradient falls through
// to the base step with that zero gradient.
std::vector<double> step_sam(std::span<const double> params, const GradientFn& gradient, double rho,
                             const BaseStepFn& base_step);

// Fraction of rows whose argmax output equals the label; ties go to the
// lowest class index.
double evaluate_accuracy(const NetworkSpec& spec, const ParameterVector& params, const Dataset& data);

TrainResult train(const NetworkSpec& spec, const Dataset& train_set, const Dataset& test_set, const ParameterVector& init,
                  const OptimizerConfig& opt, const TrainConfig& tc);

}  // namespace basinvol
