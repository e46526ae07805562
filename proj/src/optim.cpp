#include "basinvol/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "basinvol/error.hpp"
#include "basinvol/rng.hpp"

namespace basinvol {

std::string to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::sgd: return "sgd";
        case OptimizerKind::adamw: return "adamw";
        case OptimizerKind::sam_adamw: return "sam_adamw";
    }
    return "?";
}

OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adamw") return OptimizerKind::adamw;
    if (s == "sam_adamw" || s == "sam") return OptimizerKind::sam_adamw;
    throw DomainError("unknown optimizer kind '" + s + "'");
}

OptimizerConfig OptimizerConfig::defaults(OptimizerKind kind) {
    OptimizerConfig c;
    c.kind = kind;
    if (kind == OptimizerKind::sgd) {
        c.learning_rate = 0.01;
        c.weight_decay = 0.0;
    }
    return c;
}

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0.0)) throw DomainError("optimizer learning_rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw DomainError("optimizer beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw DomainError("optimizer beta2 must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw DomainError("optimizer epsilon must be positive");
    if (!(weight_decay >= 0.0)) throw DomainError("optimizer weight_decay must be non-negative");
    if (kind == OptimizerKind::sam_adamw && !(rho > 0.0)) throw DomainError("optimizer rho must be positive for SAM");
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw DomainError("train batch_size must be positive");
    if (!std::is_sorted(checkpoint_epochs.begin(), checkpoint_epochs.end())) {
        throw DomainError("train checkpoint_epochs must be sorted");
    }
    if (!checkpoint_epochs.empty() && checkpoint_epochs.back() > epochs) {
        throw DomainError("train checkpoint epoch " + std::to_string(checkpoint_epochs.back()) + " exceeds epochs");
    }
}

void sgd_update(std::span<double> params, std::span<const double> grad, double lr) {
    if (params.size() != grad.size()) throw DimensionError("sgd: gradient size mismatch");
    for (std::size_t j = 0; j < params.size(); ++j) params[j] -= lr * grad[j];
}

void adamw_update(AdamState& state, std::span<double> params, std::span<const double> grad, const OptimizerConfig& cfg) {
    if (params.size() != grad.size()) throw DimensionError("adamw: gradient size mismatch");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size()) throw DimensionError("adamw: state size mismatch");
    ++state.t;
    const double t = static_cast<double>(state.t);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    const double decay = 1.0 - cfg.learning_rate * cfg.weight_decay;
    for (std::size_t j = 0; j < params.size(); ++j) {
        const double g = grad[j];
        state.m[j] = cfg.beta1 * state.m[j] + (1.0 - cfg.beta1) * g;
        state.v[j] = cfg.beta2 * state.v[j] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = state.m[j] / bc1;
        const double v_hat = state.v[j] / bc2;
        params[j] = params[j] * decay - cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
}

ParameterVector step_sgd(const ParameterVector& params, const ParameterVector& grad, double lr) {
    ParameterVector out = params;
    sgd_update(out.values, grad.values, lr);
    return out;
}

AdamwStep step_adamw(AdamState state, const ParameterVector& params, const ParameterVector& grad,
                     const OptimizerConfig& cfg, std::size_t t) {
    if (t == 0) throw DomainError("step_adamw: step index starts at 1");
    state.t = t - 1;
    ParameterVector out = params;
    adamw_update(state, out.values, grad.values, cfg);
    return {std::move(state), std::move(out)};
}

std::vector<double> step_sam(std::span<const double> params, const GradientFn& gradient, double rho,
                             const BaseStepFn& base_step) {
    std::vector<double> g = gradient(params);
    double norm2 = 0.0;
    for (double x : g) norm2 += x * x;
    std::vector<double> out(params.begin(), params.end());
    if (norm2 > 0.0 && rho > 0.0) {
        const double scale = rho / std::sqrt(norm2);
        std::vector<double> perturbed(params.begin(), params.end());
        for (std::size_t j = 0; j < g.size(); ++j) perturbed[j] += scale * g[j];
        g = gradient(perturbed);
    }
    base_step(out, g);
    return out;
}

double evaluate_accuracy(const NetworkSpec& spec, const ParameterVector& params, const Dataset& data) {
    if (data.empty()) throw DomainError("evaluate_accuracy: empty dataset");
    const Matrix out = forward(spec, params, data.features);
    std::size_t correct = 0;
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        Eigen::Index best = 0;
        for (Eigen::Index k = 1; k < out.cols(); ++k) {
            if (out(r, k) > out(r, best)) best = k;
        }
        if (best == data.labels[static_cast<std::size_t>(r)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainResult train(const NetworkSpec& spec, const Dataset& train_set, const Dataset& test_set, const ParameterVector& init,
                  const OptimizerConfig& opt, const TrainConfig& tc) {
    spec.validate();
    opt.validate();
    tc.validate();
    if (train_set.width() != spec.input_dim) throw DimensionError("training features do not match the network input_dim");
    if (!test_set.empty() && test_set.width() != spec.input_dim) throw DimensionError("test features do not match the network input_dim");
    if (init.size() != spec.param_count()) throw DimensionError("initial parameters do not match the network");
    if (train_set.empty() && tc.epochs > 0) throw DomainError("train: empty training set");

    TrainResult result;
    result.final_params = init;
    std::vector<double>& params = result.final_params.values;
    const std::size_t n = train_set.size();
    const std::size_t batch = std::min(tc.batch_size, std::max<std::size_t>(n, 1));

    AdamState adam;
    std::vector<double> g;
    std::vector<std::size_t> order(n);
    Matrix xb;
    std::vector<int> yb;
    auto gradient_on_batch = [&](std::span<const double> p) {
        std::vector<double> out;
        loss_and_grad(spec, p, xb, yb, out);
        return out;
    };
    auto adamw_base = [&](std::span<double> p, std::span<const double> grad) { adamw_update(adam, p, grad, opt); };

    std::size_t next_ckpt = 0;
    while (next_ckpt < tc.checkpoint_epochs.size() && tc.checkpoint_epochs[next_ckpt] == 0) {
        result.checkpoints.push_back({0, init});
        ++next_ckpt;
    }
    for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        CounterRng rng(mix_seed(tc.shuffle_seed, epoch), Stream::shuffle);
        for (std::size_t i = 0; i + 1 < n; ++i) std::swap(order[i], order[i + static_cast<std::size_t>(rng.below(n - i))]);

        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t rows = std::min(batch, n - start);
            xb.resize(static_cast<Eigen::Index>(rows), train_set.features.cols());
            yb.resize(rows);
            for (std::size_t r = 0; r < rows; ++r) {
                xb.row(static_cast<Eigen::Index>(r)) = train_set.features.row(static_cast<Eigen::Index>(order[start + r]));
                yb[r] = train_set.labels[order[start + r]];
            }
            switch (opt.kind) {
                case OptimizerKind::sgd:
                    loss_and_grad(spec, params, xb, yb, g);
                    sgd_update(params, g, opt.learning_rate);
                    break;
                case OptimizerKind::adamw:
                    loss_and_grad(spec, params, xb, yb, g);
                    adamw_update(adam, params, g, opt);
                    break;
                case OptimizerKind::sam_adamw:
                    params = step_sam(params, gradient_on_batch, opt.rho, adamw_base);
                    break;
            }
        }

        const double train_loss = loss_mean(spec, result.final_params, train_set);
        if (!std::isfinite(train_loss)) throw DivergenceError(epoch, "non-finite training loss");
        result.train_loss_curve.push_back(train_loss);
        if (test_set.empty()) {
            result.test_loss_curve.push_back(std::numeric_limits<double>::quiet_NaN());
            result.test_accuracy_curve.push_back(std::numeric_limits<double>::quiet_NaN());
        } else {
            result.test_loss_curve.push_back(loss_mean(spec, result.final_params, test_set));
            result.test_accuracy_curve.push_back(evaluate_accuracy(spec, result.final_params, test_set));
        }
        result.epochs_completed = epoch;

        while (next_ckpt < tc.checkpoint_epochs.size() && tc.checkpoint_epochs[next_ckpt] <= epoch) {
            if (tc.checkpoint_epochs[next_ckpt] == epoch) result.checkpoints.push_back({epoch, result.final_params});
            ++next_ckpt;
        }
        if (tc.target_loss && train_loss <= *tc.target_loss) {
            result.reached_target = true;
            break;
        }
    }
    return result;
}

}  // namespace basinvol
