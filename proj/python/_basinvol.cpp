// Python bindings. Config documents and results cross the boundary as JSON
// text; the package wrapper converts them to and from dicts.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>
#include <vector>

#include "basinvol/analysis.hpp"
#include "basinvol/config.hpp"
#include "basinvol/datasets.hpp"
#include "basinvol/error.hpp"
#include "basinvol/experiments.hpp"
#include "basinvol/nn.hpp"
#include "basinvol/oracle.hpp"
#include "basinvol/persist.hpp"
#include "basinvol/volume.hpp"

namespace py = pybind11;
using namespace basinvol;

namespace {

ExperimentConfig config_from(const std::string& doc, const std::optional<std::string>& kind) {
    std::optional<ExperimentKind> k;
    if (kind) k = experiment_kind_from_string(*kind);
    return parse_config(Json::parse(doc), k);
}

std::string execute_json(const std::string& doc, const std::optional<std::string>& kind) {
    ExperimentResult res;
    {
        py::gil_scoped_release release;
        res = execute(resolve_config(config_from(doc, kind)));
    }
    return Json{{"payload", res.payload}, {"files", res.files}, {"flagged", res.flagged}}.dump();
}

std::string run_json(const std::string& doc, const std::optional<std::string>& kind, const std::string& output_root) {
    RunOutcome out;
    {
        py::gil_scoped_release release;
        out = run_experiment(config_from(doc, kind), output_root);
    }
    return Json{{"dir", out.dir.string()}, {"result", out.result}, {"partial", out.partial}}.dump();
}

Dataset dataset_from(const Matrix& features, const std::vector<int>& labels, std::size_t classes) {
    Dataset d;
    d.features = features;
    d.labels = labels;
    d.num_classes = classes;
    d.meta.id = "python";
    d.meta.row_ids.resize(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) d.meta.row_ids[i] = i;
    d.validate();
    return d;
}

std::string volume_json(const std::filesystem::path& checkpoint, const Matrix& features, const std::vector<int>& labels,
                        std::size_t directions, double threshold, double c_max, std::uint64_t seed, bool filter_normalize,
                        std::size_t workers) {
    const auto ckpt = read_checkpoint(checkpoint);
    const Dataset landscape = dataset_from(features, labels, ckpt.spec.output_dim);
    McConfig mc;
    mc.directions = directions;
    mc.threshold = threshold;
    mc.search.c_max = c_max;
    mc.seed = seed;
    mc.filter_normalize = filter_normalize;
    mc.workers = workers;
    VolumeEstimate est;
    {
        py::gil_scoped_release release;
        est = volume_of_minimum(ckpt.spec, ckpt.params, landscape, mc);
    }
    return to_json(est, true).dump();
}

}  // namespace

PYBIND11_MODULE(_basinvol, m) {
    m.doc() = "Star-convex basin volumes of small MLP minima";
    m.attr("__version__") = BASINVOL_VERSION;

    auto base = py::register_exception<Error>(m, "BasinvolError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
    py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());

    m.def("execute_json", &execute_json, py::arg("config"), py::arg("kind") = std::nullopt);
    m.def("run_json", &run_json, py::arg("config"), py::arg("kind") = std::nullopt, py::arg("output_root") = ".");
    m.def("resolved_config_json", [](const std::string& doc, const std::optional<std::string>& kind) {
        const auto cfg = resolve_config(config_from(doc, kind));
        return Json{{"config", to_json(cfg)}, {"hash", config_hash(cfg)}}.dump();
    }, py::arg("config"), py::arg("kind") = std::nullopt);
    m.def("volume_json", &volume_json, py::arg("checkpoint"), py::arg("features"), py::arg("labels"),
          py::arg("directions") = 500, py::arg("threshold") = 0.1, py::arg("c_max") = 0.1, py::arg("seed") = 0,
          py::arg("filter_normalize") = true, py::arg("workers") = 1);

    m.def("log_unit_ball", &log_unit_ball, py::arg("n"));
    m.def("estimate_log_volume", [](const std::vector<double>& radii, std::size_t n) { return estimate_log_volume(radii, n); },
          py::arg("radii"), py::arg("n"));
    m.def("toy_volume_closed_form", &toy_volume_closed_form, py::arg("s"));
    m.def("toy_oracle", [](double s, double b, std::size_t directions, std::uint64_t seed, std::size_t grid_resolution) {
        OracleConfig cfg;
        cfg.directions = directions;
        cfg.seed = seed;
        cfg.grid_resolution = grid_resolution;
        const auto r = run_toy_oracle({s, b}, cfg);
        return py::dict(py::arg("s") = r.s, py::arg("b") = r.b, py::arg("closed_form") = r.closed_form,
                        py::arg("grid") = r.grid, py::arg("mc") = r.mc, py::arg("grid_rel_error") = r.grid_rel_error,
                        py::arg("mc_rel_error") = r.mc_rel_error, py::arg("censored") = r.estimate.censored_count());
    }, py::arg("s") = 0.2, py::arg("b") = 1.0, py::arg("directions") = 10000, py::arg("seed") = 0,
       py::arg("grid_resolution") = 2000);

    m.def("fit_power_law", [](const std::vector<double>& sizes, const std::vector<double>& log_volumes, std::size_t n_params) {
        if (sizes.size() != log_volumes.size()) throw DimensionError("sizes and log_volumes differ in length");
        std::vector<ScalingPoint> pts;
        for (std::size_t i = 0; i < sizes.size(); ++i) pts.push_back({sizes[i], log_volumes[i]});
        const auto f = fit_power_law(pts, n_params);
        return py::dict(py::arg("alpha") = f.alpha, py::arg("slope") = f.slope, py::arg("intercept") = f.intercept,
                        py::arg("r_squared") = f.r_squared, py::arg("excluded") = f.excluded);
    }, py::arg("sizes"), py::arg("log_volumes"), py::arg("n_params"));

    m.def("swiss_roll", [](std::size_t n, double noise, std::uint64_t seed) {
        const auto d = gen_swiss_roll(n, noise, seed);
        return py::make_tuple(d.features, d.labels);
    }, py::arg("n"), py::arg("noise") = 0.1, py::arg("seed") = 0);

    m.def("forward", [](const std::filesystem::path& checkpoint, const Matrix& inputs) {
        const auto ckpt = read_checkpoint(checkpoint);
        return forward(ckpt.spec, ckpt.params, inputs);
    }, py::arg("checkpoint"), py::arg("inputs"));
    m.def("loss", [](const std::filesystem::path& checkpoint, const Matrix& features, const std::vector<int>& labels) {
        const auto ckpt = read_checkpoint(checkpoint);
        return loss_mean(ckpt.spec, ckpt.params, dataset_from(features, labels, ckpt.spec.output_dim));
    }, py::arg("checkpoint"), py::arg("features"), py::arg("labels"));
}
