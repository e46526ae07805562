#include "basinvol/nn.hpp"

#include <algorithm>
#include <cmath>

#include "basinvol/error.hpp"
#include "basinvol/rng.hpp"

namespace basinvol {

namespace {

using ConstMatrixMap = Eigen::Map<const Matrix>;
using ConstRowMap = Eigen::Map<const Eigen::RowVectorXd>;
using MatrixMap = Eigen::Map<Matrix>;
using RowMap = Eigen::Map<Eigen::RowVectorXd>;

// Rows evaluated per forward block when computing losses over a dataset.
constexpr Eigen::Index kLossBlockRows = 2048;

struct LayerOffsets {
    std::size_t weight;
    std::size_t bias;
};

std::vector<LayerOffsets> layer_offsets(const NetworkSpec& spec) {
    std::vector<LayerOffsets> out;
    std::size_t off = 0;
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        const std::size_t w = spec.fan_in(l) * spec.fan_out(l);
        out.push_back({off, off + w});
        off += w + spec.fan_out(l);
    }
    return out;
}

void check_params(const NetworkSpec& spec, std::span<const double> params) {
    if (params.size() != spec.param_count()) {
        throw DimensionError("parameter vector has " + std::to_string(params.size()) + " entries, network needs " +
                             std::to_string(spec.param_count()));
    }
}

void check_inputs(const NetworkSpec& spec, const Matrix& inputs, std::span<const int> labels, bool with_labels) {
    if (static_cast<std::size_t>(inputs.cols()) != spec.input_dim) {
        throw DimensionError("input width " + std::to_string(inputs.cols()) + " does not match input_dim " +
                             std::to_string(spec.input_dim));
    }
    if (with_labels && static_cast<std::size_t>(inputs.rows()) != labels.size()) {
        throw DimensionError("feature rows and labels differ in count");
    }
}

// Logits for `x`; hidden activations are appended to `hidden` when given.
Matrix forward_block(const NetworkSpec& spec, const std::vector<LayerOffsets>& offs, const double* p,
                     const Eigen::Ref<const Matrix>& x, std::vector<Matrix>* hidden) {
    Matrix a = x;
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        const auto fi = static_cast<Eigen::Index>(spec.fan_in(l));
        const auto fo = static_cast<Eigen::Index>(spec.fan_out(l));
        ConstMatrixMap w(p + offs[l].weight, fi, fo);
        ConstRowMap b(p + offs[l].bias, fo);
        Matrix z = a * w;
        z.rowwise() += b;
        if (l + 1 < spec.num_layers()) {
            z = z.cwiseMax(0.0);
            if (hidden) hidden->push_back(z);
        }
        a = std::move(z);
    }
    return a;
}

double sample_loss(LossKind kind, const Eigen::Ref<const Eigen::RowVectorXd>& z, int label) {
    const auto c = z.size();
    if (kind == LossKind::cross_entropy) {
        const double m = z.maxCoeff();
        double s = 0.0;
        for (Eigen::Index k = 0; k < c; ++k) s += std::exp(z[k] - m);
        return m + std::log(s) - z[label];
    }
    double s = 0.0;
    for (Eigen::Index k = 0; k < c; ++k) {
        const double d = z[k] - (k == label ? 1.0 : 0.0);
        s += d * d;
    }
    return s / static_cast<double>(c);
}

double pairwise_sum_impl(const double* xs, std::size_t n) noexcept {
    if (n == 0) return 0.0;
    if (n == 1) return xs[0];
    if (n == 2) return xs[0] + xs[1];
    const std::size_t half = n / 2;
    return pairwise_sum_impl(xs, half) + pairwise_sum_impl(xs + half, n - half);
}

}  // namespace

std::string to_string(Activation) { return "relu"; }

std::string to_string(LossKind k) { return k == LossKind::cross_entropy ? "cross_entropy" : "mse_onehot"; }

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    throw DomainError("unknown activation '" + s + "'");
}

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "cross_entropy") return LossKind::cross_entropy;
    if (s == "mse_onehot") return LossKind::mse_onehot;
    throw DomainError("unknown loss kind '" + s + "'");
}

void NetworkSpec::validate() const {
    if (input_dim == 0) throw DomainError("network input_dim must be positive");
    if (output_dim == 0) throw DomainError("network output_dim must be positive");
    if (hidden_dims.empty()) throw DomainError("network needs at least one hidden layer");
    for (std::size_t d : hidden_dims) {
        if (d == 0) throw DomainError("hidden layer widths must be positive");
    }
}

std::size_t NetworkSpec::fan_in(std::size_t layer) const {
    if (layer >= num_layers()) throw DomainError("layer index out of range");
    return layer == 0 ? input_dim : hidden_dims[layer - 1];
}

std::size_t NetworkSpec::fan_out(std::size_t layer) const {
    if (layer >= num_layers()) throw DomainError("layer index out of range");
    return layer + 1 == num_layers() ? output_dim : hidden_dims[layer];
}

std::size_t NetworkSpec::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < num_layers(); ++l) n += fan_in(l) * fan_out(l) + fan_out(l);
    return n;
}

void ParameterVector::validate() const {
    std::size_t expected = 0;
    for (std::size_t g = 0; g < layout.size(); ++g) {
        if (layout[g].offset != expected) throw DimensionError("parameter layout has a gap or overlap at group " + std::to_string(g));
        expected += layout[g].size();
    }
    if (expected != values.size()) throw DimensionError("parameter layout does not cover the value array");
}

ParameterVector zero_params(const NetworkSpec& spec) {
    spec.validate();
    ParameterVector p;
    std::size_t off = 0;
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        const std::size_t fi = spec.fan_in(l);
        const std::size_t fo = spec.fan_out(l);
        p.layout.push_back({p.layout.size(), GroupKind::weight, l, off, fi, fo});
        off += fi * fo;
        p.layout.push_back({p.layout.size(), GroupKind::bias, l, off, 1, fo});
        off += fo;
    }
    p.values.assign(off, 0.0);
    return p;
}

ParameterVector with_values(const ParameterVector& like, std::vector<double> values) {
    if (values.size() != like.size()) throw DimensionError("with_values: size mismatch");
    ParameterVector p;
    p.layout = like.layout;
    p.values = std::move(values);
    return p;
}

ParameterVector init_params(const NetworkSpec& spec, std::uint64_t seed) {
    ParameterVector p = zero_params(spec);
    CounterRng rng(seed, Stream::init);
    for (const auto& g : p.layout) {
        if (g.kind != GroupKind::weight) continue;
        const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in(g.layer)));
        for (std::size_t j = 0; j < g.size(); ++j) p.values[g.offset + j] = rng.uniform(-bound, bound);
    }
    return p;
}

Matrix forward(const NetworkSpec& spec, const ParameterVector& params, const Matrix& inputs) {
    spec.validate();
    check_params(spec, params.values);
    check_inputs(spec, inputs, {}, false);
    return forward_block(spec, layer_offsets(spec), params.values.data(), inputs, nullptr);
}

std::vector<double> sample_losses(const NetworkSpec& spec, std::span<const double> params, const Matrix& inputs,
                                  std::span<const int> labels) {
    check_params(spec, params);
    check_inputs(spec, inputs, labels, true);
    const auto offs = layer_offsets(spec);
    std::vector<double> out(labels.size());
    for (Eigen::Index start = 0; start < inputs.rows(); start += kLossBlockRows) {
        const Eigen::Index rows = std::min(kLossBlockRows, inputs.rows() - start);
        const Matrix z = forward_block(spec, offs, params.data(), inputs.middleRows(start, rows), nullptr);
        for (Eigen::Index r = 0; r < rows; ++r) {
            const auto i = static_cast<std::size_t>(start + r);
            out[i] = sample_loss(spec.loss_kind, z.row(r), labels[i]);
        }
    }
    return out;
}

double pairwise_sum(std::span<const double> xs) noexcept { return pairwise_sum_impl(xs.data(), xs.size()); }

double loss_mean(const NetworkSpec& spec, std::span<const double> params, const Matrix& inputs, std::span<const int> labels) {
    if (labels.empty()) throw DomainError("loss_mean: empty dataset");
    const auto losses = sample_losses(spec, params, inputs, labels);
    return pairwise_sum(losses) / static_cast<double>(losses.size());
}

double loss_mean(const NetworkSpec& spec, const ParameterVector& params, const Dataset& data) {
    return loss_mean(spec, params.values, data.features, data.labels);
}

double loss_and_grad(const NetworkSpec& spec, std::span<const double> params, const Matrix& inputs,
                     std::span<const int> labels, std::vector<double>& out) {
    if (labels.empty()) throw DomainError("grad: empty batch");
    check_params(spec, params);
    check_inputs(spec, inputs, labels, true);
    const auto offs = layer_offsets(spec);
    const std::size_t L = spec.num_layers();
    const auto n = static_cast<Eigen::Index>(labels.size());
    const double inv_n = 1.0 / static_cast<double>(n);

    std::vector<Matrix> hidden;
    hidden.reserve(L - 1);
    const Matrix z = forward_block(spec, offs, params.data(), inputs, &hidden);
    const auto c = z.cols();

    std::vector<double> losses(labels.size());
    Matrix dz(n, c);
    for (Eigen::Index r = 0; r < n; ++r) {
        const int y = labels[static_cast<std::size_t>(r)];
        losses[static_cast<std::size_t>(r)] = sample_loss(spec.loss_kind, z.row(r), y);
        if (spec.loss_kind == LossKind::cross_entropy) {
            const double m = z.row(r).maxCoeff();
            double s = 0.0;
            for (Eigen::Index k = 0; k < c; ++k) s += std::exp(z(r, k) - m);
            for (Eigen::Index k = 0; k < c; ++k) dz(r, k) = (std::exp(z(r, k) - m) / s - (k == y ? 1.0 : 0.0)) * inv_n;
        } else {
            const double scale = 2.0 * inv_n / static_cast<double>(c);
            for (Eigen::Index k = 0; k < c; ++k) dz(r, k) = (z(r, k) - (k == y ? 1.0 : 0.0)) * scale;
        }
    }

    out.assign(params.size(), 0.0);
    for (std::size_t l = L; l-- > 0;) {
        const auto fi = static_cast<Eigen::Index>(spec.fan_in(l));
        const auto fo = static_cast<Eigen::Index>(spec.fan_out(l));
        const Matrix& a = l == 0 ? inputs : hidden[l - 1];
        MatrixMap gw(out.data() + offs[l].weight, fi, fo);
        RowMap gb(out.data() + offs[l].bias, fo);
        gw.noalias() = a.transpose() * dz;
        gb = dz.colwise().sum();
        if (l > 0) {
            ConstMatrixMap w(params.data() + offs[l].weight, fi, fo);
            Matrix da = dz * w.transpose();
            dz = da.cwiseProduct((a.array() > 0.0).cast<double>().matrix());
        }
    }
    return pairwise_sum(losses) * inv_n;
}

ParameterVector grad(const NetworkSpec& spec, const ParameterVector& params, const Dataset& batch) {
    std::vector<double> g;
    loss_and_grad(spec, params.values, batch.features, batch.labels, g);
    return with_values(params, std::move(g));
}

ParameterVector rescale_layer_pair(const NetworkSpec& spec, const ParameterVector& params, std::size_t layer_index,
                                   double alpha) {
    if (!(alpha > 0.0)) throw DomainError("rescale_layer_pair: alpha must be positive");
    if (layer_index + 1 >= spec.num_layers()) {
        throw DomainError("rescale_layer_pair: layer " + std::to_string(layer_index) + " has no following layer");
    }
    check_params(spec, params.values);
    ParameterVector out = params;
    for (std::size_t g = 0; g < out.layout.size(); ++g) {
        const auto& grp = out.layout[g];
        double factor = 1.0;
        if (grp.layer == layer_index) factor = alpha;
        if (grp.layer == layer_index + 1 && grp.kind == GroupKind::weight) factor = 1.0 / alpha;
        if (factor != 1.0) {
            for (double& v : out.group(g)) v *= factor;
        }
    }
    return out;
}

ParameterVector filter_norms(const ParameterVector& params) {
    ParameterVector f = params;
    for (std::size_t g = 0; g < f.layout.size(); ++g) {
        double ss = 0.0;
        for (double v : params.group(g)) ss += v * v;
        const double norm = std::sqrt(ss);
        for (double& v : f.group(g)) v = norm;
    }
    return f;
}

}  // namespace basinvol
