#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "basinvol/datasets.hpp"

namespace basinvol {

enum class Activation { relu };
enum class LossKind { cross_entropy, mse_onehot };

std::string to_string(Activation a);
std::string to_string(LossKind k);
Activation activation_from_string(const std::string& s);
LossKind loss_kind_from_string(const std::string& s);

// Fully connected network: input -> hidden... -> output, activation between
// layers, linear output head.
struct NetworkSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_dims;
    std::size_t output_dim = 0;
    Activation activation = Activation::relu;
    LossKind loss_kind = LossKind::cross_entropy;

    void validate() const;
    std::size_t num_layers() const noexcept { return hidden_dims.size() + 1; }
    std::size_t fan_in(std::size_t layer) const;
    std::size_t fan_out(std::size_t layer) const;
    std::size_t param_count() const;

    bool operator==(const NetworkSpec&) const = default;
};

enum class GroupKind { weight, bias };

// One contiguous block of the flat parameter vector. Weight groups are stored
// row-major with shape (fan_in, fan_out); bias groups have shape (1, fan_out).
struct ParamGroup {
    std::size_t group_id = 0;
    GroupKind kind = GroupKind::weight;
    std::size_t layer = 0;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t size() const noexcept { return rows * cols; }
    bool operator==(const ParamGroup&) const = default;
};

struct ParameterVector {
    std::vector<double> values;
    std::vector<ParamGroup> layout;

    std::size_t size() const noexcept { return values.size(); }
    std::span<double> group(std::size_t g) { return {values.data() + layout[g].offset, layout[g].size()}; }
    std::span<const double> group(std::size_t g) const { return {values.data() + layout[g].offset, layout[g].size()}; }

    // Throws DimensionError unless the layout tiles [0, size()) exactly.
    void validate() const;
    bool same_layout(const ParameterVector& other) const { return layout == other.layout; }
};

// Zero-valued parameters with the layout implied by `spec`.
ParameterVector zero_params(const NetworkSpec& spec);

// Parameters with the same layout as `like` and the given values.
ParameterVector with_values(const ParameterVector& like, std::vector<double> values);

// Weights uniform in +-1/sqrt(fan_in), biases zero; deterministic in seed.
ParameterVector init_params(const NetworkSpec& spec, std::uint64_t seed);

Matrix forward(const NetworkSpec& spec, const ParameterVector& params, const Matrix& inputs);

// Per-sample losses, in row order.
std::vector<double> sample_losses(const NetworkSpec& spec, std::span<const double> params, const Matrix& inputs,
                                  std::span<const int> labels);

// Mean loss over rows. The reduction is a midpoint-split pairwise sum, so the
// result is bit-identical when the dataset is concatenated with itself.
double loss_mean(const NetworkSpec& spec, std::span<const double> params, const Matrix& inputs, std::span<const int> labels);
double loss_mean(const NetworkSpec& spec, const ParameterVector& params, const Dataset& data);

// Gradient of loss_mean with respect to every parameter; writes into `out`
// (resized to params.size()) and returns the loss on the batch.
double loss_and_grad(const NetworkSpec& spec, std::span<const double> params, const Matrix& inputs,
                     std::span<const int> labels, std::vector<double>& out);
ParameterVector grad(const NetworkSpec& spec, const ParameterVector& params, const Dataset& batch);

// Scales layer `layer_index` (weights and bias) by alpha and the weights of
// the next layer by 1/alpha. Leaves the network function unchanged for relu.
ParameterVector rescale_layer_pair(const NetworkSpec& spec, const ParameterVector& params, std::size_t layer_index,
                                   double alpha);

// Per-coordinate Euclidean norm of the group that owns the coordinate.
ParameterVector filter_norms(const ParameterVector& params);

// Pairwise sum with midpoint splits; exact doubling when the input is a
// concatenation of two identical halves.
double pairwise_sum(std::span<const double> xs) noexcept;

}  // namespace basinvol
