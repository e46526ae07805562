#include "basinvol/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <set>

#include "basinvol/analysis.hpp"
#include "basinvol/error.hpp"
#include "basinvol/optim.hpp"
#include "basinvol/oracle.hpp"
#include "basinvol/parallel.hpp"
#include "basinvol/persist.hpp"
#include "basinvol/rng.hpp"
#include "basinvol/volume.hpp"

#ifndef BASINVOL_VERSION
#define BASINVOL_VERSION "dev"
#endif

namespace basinvol {

namespace {

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::string cell_tag(const SeedCell& c) {
    return "m" + std::to_string(c.model_seed) + "_s" + std::to_string(c.split_seed);
}

Json cell_json(const SeedCell& c) { return Json{{"model_seed", c.model_seed}, {"split_seed", c.split_seed}}; }

Dataset rows_of(const Dataset& pool, const std::vector<std::size_t>& perm, std::size_t begin, std::size_t end,
                const std::string& what) {
    const std::span<const std::size_t> idx(perm.data() + begin, end - begin);
    return take_rows(pool, idx, what);
}

TrainConfig cell_train_config(const ExperimentConfig& cfg, const SeedCell& cell) {
    TrainConfig tc = cfg.train;
    tc.shuffle_seed = mix_seed(cell.model_seed, cell.split_seed);
    return tc;
}

struct Trained {
    TrainResult result;
    double train_loss = 0.0;
    double test_accuracy = std::numeric_limits<double>::quiet_NaN();
};

// Test accuracy is taken at the end; per-epoch test curves only when asked.
Trained train_model(const ExperimentConfig& cfg, const NetworkSpec& spec, const Dataset& train_set, const Dataset& test,
                    const SeedCell& cell, const TrainConfig& tc, bool test_curves = false) {
    Trained t;
    t.result = train(spec, train_set, test_curves ? test : Dataset{}, init_params(spec, cell.model_seed), cfg.optimizer, tc);
    t.train_loss = loss_mean(spec, t.result.final_params, train_set);
    if (!test.empty()) t.test_accuracy = evaluate_accuracy(spec, t.result.final_params, test);
    return t;
}

Json train_summary(const Trained& t) {
    return Json{{"epochs_completed", t.result.epochs_completed},
                {"reached_target", t.result.reached_target},
                {"train_loss", t.train_loss},
                {"test_accuracy", number_or_null(t.test_accuracy)}};
}

std::string curves_csv(const TrainResult& r) {
    std::string out = "epoch,train_loss,test_loss,test_accuracy\n";
    for (std::size_t e = 0; e < r.train_loss_curve.size(); ++e) {
        out += std::to_string(e + 1) + "," + format_double(r.train_loss_curve[e]) + "," +
               format_double(r.test_loss_curve[e]) + "," + format_double(r.test_accuracy_curve[e]) + "\n";
    }
    return out;
}

McConfig mc_of(const ExperimentConfig& cfg) {
    McConfig mc = cfg.mc;
    mc.seed = cfg.seeds.mc_seed;
    return mc;
}

// Outcome of one seed-grid cell.
struct CellOutput {
    Json payload;
    std::map<std::string, std::string> files;
    std::size_t flagged = 0;
};

template <class Fn>
std::vector<CellOutput> run_cells(const ExperimentConfig& cfg, Fn&& body) {
    const auto cells = seed_grid(cfg.seeds);
    return parallel_map(cells.size(), cfg.workers, [&](std::size_t i) {
        const SeedCell& cell = cells[i];
        CellOutput out;
        try {
            out = body(cell);
        } catch (const DivergenceError& e) {
            out.payload = Json::object();
            out.payload["flagged"] = true;
            out.payload["reason"] = e.what();
            out.flagged = 1;
        }
        out.payload["model_seed"] = cell.model_seed;
        out.payload["split_seed"] = cell.split_seed;
        return out;
    });
}

void collect(ExperimentResult& res, std::vector<CellOutput>& cells) {
    res.payload["cells"] = Json::array();
    for (auto& c : cells) {
        res.payload["cells"].push_back(std::move(c.payload));
        for (auto& [name, text] : c.files) res.files[name] = std::move(text);
        res.flagged += c.flagged;
    }
}

// --- train -----------------------------------------------------------------

ExperimentResult run_train(const ExperimentConfig& cfg) {
    auto cells = run_cells(cfg, [&](const SeedCell& cell) {
        const DataPlan plan = make_data_plan(cfg, cell.split_seed);
        const Trained t = train_model(cfg, cfg.model, plan.train, plan.test, cell, cell_train_config(cfg, cell), true);
        CellOutput out;
        out.payload = train_summary(t);
        out.payload["train_rows"] = plan.train.size();
        out.payload["dataset"] = plan.train.meta.id;
        const std::string tag = cell_tag(cell);
        const Json seeds = cell_json(cell);
        Json ckpts = Json::array();
        for (const auto& c : t.result.checkpoints) {
            const std::string name = "checkpoints/" + tag + "_epoch" + std::to_string(c.epoch) + ".txt";
            out.files[name] = checkpoint_text({cfg.model, seeds, c.epoch, c.params});
            ckpts.push_back(name);
        }
        const std::string final_name = "checkpoints/" + tag + "_final.txt";
        out.files[final_name] = checkpoint_text({cfg.model, seeds, t.result.epochs_completed, t.result.final_params});
        out.payload["checkpoints"] = ckpts;
        out.payload["final_checkpoint"] = final_name;
        out.files["curves_" + tag + ".csv"] = curves_csv(t.result);
        if (cfg.train.target_loss && !t.result.reached_target) {
            out.payload["flagged"] = true;
            out.payload["reason"] = "target loss not reached within the epoch budget";
            out.flagged = 1;
        }
        return out;
    });
    ExperimentResult res;
    collect(res, cells);
    return res;
}

// --- volume ----------------------------------------------------------------

ExperimentResult run_volume(const ExperimentConfig& cfg) {
    std::optional<CheckpointFile> loaded;
    if (!cfg.volume.checkpoint.empty()) loaded = read_checkpoint(cfg.volume.checkpoint);

    auto cells = run_cells(cfg, [&](const SeedCell& cell) {
        const DataPlan plan = make_data_plan(cfg, cell.split_seed);
        CellOutput out;
        NetworkSpec spec = cfg.model;
        ParameterVector params;
        if (loaded) {
            spec = loaded->spec;
            params = loaded->params;
            out.payload["checkpoint"] = cfg.volume.checkpoint;
            if (!plan.test.empty()) out.payload["test_accuracy"] = evaluate_accuracy(spec, params, plan.test);
        } else {
            const Trained t = train_model(cfg, spec, plan.train, plan.test, cell, cell_train_config(cfg, cell));
            params = t.result.final_params;
            out.payload = train_summary(t);
        }
        const Dataset& landscape = cfg.volume.landscape == "train" ? plan.train
                                   : cfg.volume.landscape == "test" ? plan.test
                                                                    : plan.pool;
        if (landscape.empty()) throw ConfigError("volume.landscape", "the selected landscape has no rows");
        const VolumeEstimate est = volume_of_minimum(spec, params, landscape, mc_of(cfg));
        out.payload["volume"] = to_json(est, false);
        const std::string tag = cell_tag(cell);
        out.files["radii_" + tag + ".csv"] = radii_csv(est);
        out.files["histogram_" + tag + ".csv"] = histogram_csv(radii_histogram(est, cfg.volume.histogram_bins));
        return out;
    });
    ExperimentResult res;
    collect(res, cells);
    return res;
}

// --- poison_scan -------------------------------------------------------------

std::vector<std::size_t> poison_counts(const ExperimentConfig& cfg) {
    std::set<std::size_t> s(cfg.poison.counts.begin(), cfg.poison.counts.end());
    s.insert(0);
    return {s.begin(), s.end()};
}

ExperimentResult run_poison_scan(const ExperimentConfig& cfg) {
    const auto counts = poison_counts(cfg);
    auto cells = run_cells(cfg, [&](const SeedCell& cell) {
        const DataPlan plan = make_data_plan(cfg, cell.split_seed);
        const Dataset& base = plan.train;
        const TrainConfig tc = cell_train_config(cfg, cell);
        CellOutput out;
        out.payload["arms"] = Json::array();
        for (std::size_t count : counts) {
            Json arm{{"count", count}};
            try {
                const Dataset data = poison(base, plan.poison_source, count, mix_seed(cell.split_seed, static_cast<std::uint64_t>(Stream::poison)));
                const Trained t = train_model(cfg, cfg.model, data, plan.test, cell, tc);
                const VolumeEstimate est = volume_of_minimum(cfg.model, t.result.final_params, base, mc_of(cfg));
                arm.update(train_summary(t));
                arm["base_loss"] = number_or_null(est.base_loss);
                arm["log_volume"] = log_volume_json(est.log_volume);
                arm["collapsed"] = est.collapsed();
                arm["censored"] = est.censored_count();
                const bool fits_base = est.base_loss <= cfg.mc.threshold;
                arm["flagged"] = !fits_base;
                if (!fits_base) {
                    arm["reason"] = "loss on the base data stays above the threshold";
                    ++out.flagged;
                }
            } catch (const DivergenceError& e) {
                arm["flagged"] = true;
                arm["reason"] = e.what();
                arm["log_volume"] = nullptr;
                ++out.flagged;
            }
            out.payload["arms"].push_back(std::move(arm));
        }
        return out;
    });

    ExperimentResult res;
    std::string csv = "model_seed,split_seed,count,log_volume,test_accuracy,flagged\n";
    for (const auto& c : cells) {
        if (!c.payload.contains("arms")) continue;
        for (const auto& arm : c.payload["arms"]) {
            const double lv = log_volume_from_json(arm["log_volume"]);
            const double acc = arm.contains("test_accuracy") && !arm["test_accuracy"].is_null() ? arm["test_accuracy"].get<double>()
                                                                                                : std::nan("");
            csv += std::to_string(c.payload["model_seed"].get<std::uint64_t>()) + "," +
                   std::to_string(c.payload["split_seed"].get<std::uint64_t>()) + "," +
                   std::to_string(arm["count"].get<std::size_t>()) + "," + format_double(lv) + "," + format_double(acc) + "," +
                   (arm["flagged"].get<bool>() ? "1" : "0") + "\n";
        }
    }

    // Per count: median over seeds whose arm fits the base data; ordering
    // counts a seed only when both its clean and poisoned arms are usable.
    Json summary = Json::array();
    for (std::size_t k = 0; k < counts.size(); ++k) {
        std::vector<double> vols;
        std::size_t flagged = 0, ordered = 0, compared = 0;
        for (const auto& c : cells) {
            if (!c.payload.contains("arms")) {
                ++flagged;
                continue;
            }
            const Json& arm = c.payload["arms"][k];
            const Json& clean = c.payload["arms"][0];
            if (arm["flagged"].get<bool>()) {
                ++flagged;
                continue;
            }
            const double lv = log_volume_from_json(arm["log_volume"]);
            vols.push_back(lv);
            if (k > 0 && !clean["flagged"].get<bool>()) {
                ++compared;
                if (lv < log_volume_from_json(clean["log_volume"])) ++ordered;
            }
        }
        Json row{{"count", counts[k]}, {"seeds_used", vols.size()}, {"seeds_flagged", flagged}};
        row["median_log_volume"] = vols.empty() ? Json(nullptr) : log_volume_json(median(vols));
        if (k > 0) {
            row["seeds_compared"] = compared;
            row["seeds_below_clean"] = ordered;
        }
        summary.push_back(row);
    }
    collect(res, cells);
    res.payload["summary"] = summary;
    res.files["poison_volumes.csv"] = csv;
    return res;
}

// --- data_scan -------------------------------------------------------------

ExperimentResult run_data_scan(const ExperimentConfig& cfg) {
    std::vector<std::size_t> sizes = cfg.data_scan.sizes;
    std::sort(sizes.begin(), sizes.end());
    sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());

    auto cells = run_cells(cfg, [&](const SeedCell& cell) {
        const DataPlan plan = make_data_plan(cfg, cell.split_seed);
        const TrainConfig tc = cell_train_config(cfg, cell);
        std::vector<Dataset> landscapes;
        std::vector<ParameterVector> models;
        CellOutput out;
        out.payload["models"] = Json::array();
        for (std::size_t s : sizes) {
            landscapes.push_back(plan.train_prefix(s));
            const Trained t = train_model(cfg, cfg.model, landscapes.back(), plan.test, cell, tc);
            models.push_back(t.result.final_params);
            Json m = train_summary(t);
            m["size"] = s;
            out.payload["models"].push_back(m);
        }
        const CrossLandscapeMatrix mat = cross_landscape_matrix(cfg.model, models, landscapes, mc_of(cfg), 1);
        Json lv = Json::array(), collapsed = Json::array();
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            Json r1 = Json::array(), r2 = Json::array();
            for (std::size_t j = 0; j < sizes.size(); ++j) {
                r1.push_back(log_volume_json(mat.log_volume(i, j)));
                r2.push_back(mat.collapsed(i, j));
            }
            lv.push_back(r1);
            collapsed.push_back(r2);
            // radii of every model in the smallest landscape
            out.files["radii_" + cell_tag(cell) + "_model" + std::to_string(sizes[i]) + "_landscape" +
                      std::to_string(sizes[0]) + ".csv"] = radii_csv(mat.cells[i][0]);
        }
        out.payload["log_volume"] = lv;
        out.payload["collapsed"] = collapsed;
        return out;
    });

    ExperimentResult res;
    std::string csv = "model_seed,split_seed,model_size,landscape_size,log_volume,collapsed\n";
    std::vector<std::vector<double>> own(sizes.size());
    for (const auto& c : cells) {
        if (!c.payload.contains("log_volume")) continue;
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            for (std::size_t j = 0; j < sizes.size(); ++j) {
                const double v = log_volume_from_json(c.payload["log_volume"][i][j]);
                csv += std::to_string(c.payload["model_seed"].get<std::uint64_t>()) + "," +
                       std::to_string(c.payload["split_seed"].get<std::uint64_t>()) + "," + std::to_string(sizes[i]) + "," +
                       std::to_string(sizes[j]) + "," + format_double(v) + "," + (std::isfinite(v) ? "0" : "1") + "\n";
            }
            own[i].push_back(log_volume_from_json(c.payload["log_volume"][i][i]));
        }
    }
    Json per_size = Json::array();
    std::vector<ScalingPoint> points;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        std::size_t finite = 0;
        const double mean = mean_finite(own[i], &finite);
        Json seeds_json = Json::array();
        for (double v : own[i]) seeds_json.push_back(log_volume_json(v));
        per_size.push_back({{"size", sizes[i]}, {"mean_log_volume", log_volume_json(mean)}, {"finite_seeds", finite},
                            {"log_volumes", seeds_json}});
        if (cfg.data_scan.fit_mode == "mean") {
            points.push_back({static_cast<double>(sizes[i]), mean});
        } else {
            for (double v : own[i]) points.push_back({static_cast<double>(sizes[i]), v});
        }
    }
    collect(res, cells);
    res.payload["sizes"] = sizes;
    res.payload["per_size"] = per_size;
    res.payload["n_params"] = cfg.model.param_count();
    try {
        const ScalingFit fit = fit_power_law(points, cfg.model.param_count());
        res.payload["fit"] = {{"alpha", fit.alpha}, {"slope", fit.slope}, {"intercept", fit.intercept},
                              {"r_squared", fit.r_squared}, {"excluded", fit.excluded}, {"mode", cfg.data_scan.fit_mode}};
    } catch (const DomainError& e) {
        res.payload["fit"] = {{"error", e.what()}};
    }
    res.files["matrix.csv"] = csv;
    return res;
}

// --- grok ------------------------------------------------------------------

ExperimentResult run_grok(const ExperimentConfig& cfg) {
    if (cfg.train.checkpoint_epochs.empty()) throw ConfigError("train.checkpoint_epochs", "grok needs at least one checkpoint");
    auto cells = run_cells(cfg, [&](const SeedCell& cell) {
        const DataPlan plan = make_data_plan(cfg, cell.split_seed);
        // Test metrics are only needed at checkpoints; skip the per-epoch pass.
        const TrainResult r = train(cfg.model, plan.train, Dataset{}, init_params(cfg.model, cell.model_seed), cfg.optimizer,
                                    cell_train_config(cfg, cell));
        CellOutput out;
        out.payload["series"] = Json::array();
        std::string csv = "epoch,train_loss,test_accuracy,log_volume\n";
        for (const auto& c : r.checkpoints) {
            const double tl = loss_mean(cfg.model, c.params, plan.train);
            const double acc = plan.test.empty() ? std::nan("") : evaluate_accuracy(cfg.model, c.params, plan.test);
            const VolumeEstimate est = volume_of_minimum(cfg.model, c.params, plan.train, mc_of(cfg));
            out.payload["series"].push_back({{"epoch", c.epoch},
                                             {"train_loss", tl},
                                             {"test_accuracy", number_or_null(acc)},
                                             {"log_volume", log_volume_json(est.log_volume)},
                                             {"collapsed", est.collapsed()},
                                             {"censored", est.censored_count()}});
            csv += std::to_string(c.epoch) + "," + format_double(tl) + "," + format_double(acc) + "," +
                   format_double(est.log_volume) + "\n";
        }
        out.files["grok_" + cell_tag(cell) + ".csv"] = csv;
        out.files["curves_" + cell_tag(cell) + ".csv"] = curves_csv(r);
        return out;
    });
    ExperimentResult res;
    collect(res, cells);
    return res;
}

// --- oracle ----------------------------------------------------------------

ExperimentResult run_oracle(const ExperimentConfig& cfg) {
    ExperimentResult res;
    OracleConfig oc;
    oc.directions = cfg.oracle.directions;
    oc.seed = cfg.seeds.mc_seed;
    oc.grid_resolution = cfg.oracle.grid_resolution;
    oc.search = cfg.oracle.search;
    oc.workers = cfg.mc.workers;
    std::string csv = "s,b,closed_form,grid,mc,grid_rel_error,mc_rel_error\n";
    res.payload["reports"] = Json::array();
    for (double s : cfg.oracle.s) {
        for (double b : cfg.oracle.b) {
            const OracleReport r = run_toy_oracle({s, b}, oc);
            res.payload["reports"].push_back({{"s", s},
                                              {"b", b},
                                              {"closed_form", r.closed_form},
                                              {"grid", r.grid},
                                              {"mc", r.mc},
                                              {"grid_rel_error", r.grid_rel_error},
                                              {"mc_rel_error", r.mc_rel_error},
                                              {"censored", r.estimate.censored_count()}});
            csv += format_double(s) + "," + format_double(b) + "," + format_double(r.closed_form) + "," + format_double(r.grid) +
                   "," + format_double(r.mc) + "," + format_double(r.grid_rel_error) + "," + format_double(r.mc_rel_error) + "\n";
        }
    }
    res.files["oracle.csv"] = csv;
    return res;
}

// --- fit -------------------------------------------------------------------

ExperimentResult run_fit(const ExperimentConfig& cfg) {
    std::vector<ScalingPoint> points = cfg.fit.points;
    std::size_t n_params = cfg.fit.n_params;
    if (!cfg.fit.result.empty()) {
        const Json doc = load_json_file(cfg.fit.result);
        const Json& payload = doc.contains("payload") ? doc["payload"] : doc;
        if (!payload.contains("per_size")) throw ConfigError("fit.result", "not a data_scan result");
        if (n_params == 0) n_params = payload.at("n_params").get<std::size_t>();
        for (const auto& row : payload["per_size"]) {
            const double size = row.at("size").get<double>();
            if (cfg.fit.mode == "mean") {
                points.push_back({size, log_volume_from_json(row.at("mean_log_volume"))});
            } else {
                for (const auto& v : row.at("log_volumes")) points.push_back({size, log_volume_from_json(v)});
            }
        }
    }
    ScalingFit fit;
    try {
        fit = fit_power_law(points, n_params);
    } catch (const DomainError& e) {
        throw ConfigError("fit.points", e.what());
    }
    ExperimentResult res;
    Json pts = Json::array();
    std::string csv = "dataset_size,log_volume\n";
    for (const auto& p : fit.points) {
        pts.push_back({{"dataset_size", p.dataset_size}, {"log_volume", p.log_volume}});
        csv += format_double(p.dataset_size) + "," + format_double(p.log_volume) + "\n";
    }
    res.payload = {{"alpha", fit.alpha},         {"slope", fit.slope}, {"intercept", fit.intercept},
                   {"r_squared", fit.r_squared}, {"n_params", n_params}, {"excluded", fit.excluded},
                   {"points", pts}};
    res.files["fit_points.csv"] = csv;
    return res;
}

// --- slice -----------------------------------------------------------------

std::string grid_csv(const Matrix& m, std::span<const double> xs, std::span<const double> ys) {
    std::string out = "x,y,loss\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index k = 0; k < m.cols(); ++k) {
            out += format_double(xs[static_cast<std::size_t>(i)]) + "," + format_double(ys[static_cast<std::size_t>(k)]) + "," +
                   format_double(m(i, k)) + "\n";
        }
    }
    return out;
}

std::vector<double> linspace(double lo, double hi, std::size_t points) {
    std::vector<double> out(points);
    for (std::size_t i = 0; i < points; ++i) {
        out[i] = points == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    }
    return out;
}

ExperimentResult run_slice(const ExperimentConfig& cfg) {
    ExperimentResult res;
    if (cfg.slice.mode == "random") {
        auto cells = run_cells(cfg, [&](const SeedCell& cell) {
            const DataPlan plan = make_data_plan(cfg, cell.split_seed);
            const Trained t = train_model(cfg, cfg.model, plan.train, plan.test, cell, cell_train_config(cfg, cell));
            const ParameterVector& p = t.result.final_params;
            const Direction a = sample_direction(p, cfg.seeds.mc_seed, 0, cfg.mc.filter_normalize);
            const Direction b = sample_direction(p, cfg.seeds.mc_seed, 1, cfg.mc.filter_normalize);
            MlpObjective obj(cfg.model, plan.train);
            const Matrix m = landscape_slice(obj, p, a.scaled, b.scaled, {cfg.slice.half_width, cfg.slice.steps});
            const auto axis = linspace(-cfg.slice.half_width, cfg.slice.half_width, static_cast<std::size_t>(m.rows()));
            CellOutput out;
            out.payload = train_summary(t);
            out.payload["center_loss"] = m(m.rows() / 2, m.cols() / 2);
            out.files["slice_" + cell_tag(cell) + ".csv"] = grid_csv(m, axis, axis);
            return out;
        });
        collect(res, cells);
        return res;
    }

    // Plane through three minima trained with the first three model seeds on
    // the first split; the grid extends half_width times the span beyond them.
    const std::uint64_t split = cfg.seeds.split_seeds[0];
    const DataPlan plan = make_data_plan(cfg, split);
    std::vector<SeedCell> cells;
    for (std::size_t i = 0; i < 3; ++i) cells.push_back({cfg.seeds.model_seeds[i], split});
    auto trained = parallel_map(3, cfg.workers, [&](std::size_t i) {
        return train_model(cfg, cfg.model, plan.train, plan.test, cells[i], cell_train_config(cfg, cells[i]));
    });
    const Plane plane = plane_through(trained[0].result.final_params.values, trained[1].result.final_params.values,
                                      trained[2].result.final_params.values);
    const double xs_lo = std::min({0.0, plane.coord_b[0], plane.coord_c[0]});
    const double xs_hi = std::max({0.0, plane.coord_b[0], plane.coord_c[0]});
    const double ys_hi = plane.coord_c[1];
    const double pad_x = cfg.slice.half_width * (xs_hi - xs_lo);
    const double pad_y = cfg.slice.half_width * ys_hi;
    const std::size_t points = 2 * cfg.slice.steps + 1;
    const auto xs = linspace(xs_lo - pad_x, xs_hi + pad_x, points);
    const auto ys = linspace(-pad_y, ys_hi + pad_y, points);
    MlpObjective obj(cfg.model, plan.train);
    const Matrix m = plane_slice(obj, plane, xs, ys);

    auto nearest = [](const std::vector<double>& axis, double v) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < axis.size(); ++i) {
            if (std::abs(axis[i] - v) < std::abs(axis[best] - v)) best = i;
        }
        return static_cast<Eigen::Index>(best);
    };
    const std::array<std::array<double, 2>, 3> coords{{{0.0, 0.0}, plane.coord_b, plane.coord_c}};
    res.payload["minima"] = Json::array();
    for (std::size_t i = 0; i < 3; ++i) {
        Json mj = train_summary(trained[i]);
        mj["model_seed"] = cells[i].model_seed;
        mj["coords"] = {coords[i][0], coords[i][1]};
        mj["grid_nearest_loss"] = m(nearest(xs, coords[i][0]), nearest(ys, coords[i][1]));
        res.payload["minima"].push_back(mj);
    }
    res.payload["split_seed"] = split;
    res.files["plane_slice.csv"] = grid_csv(m, xs, ys);
    return res;
}

// --- imbalance -------------------------------------------------------------

ExperimentResult run_imbalance(const ExperimentConfig& cfg) {
    auto cells = run_cells(cfg, [&](const SeedCell& cell) {
        const DataPlan plan = make_data_plan(cfg, cell.split_seed);
        const Dataset candidates = plan.candidates();
        const TrainConfig tc = cell_train_config(cfg, cell);
        CellOutput out;
        out.payload["arms"] = Json::array();
        for (std::size_t k = 0; k < cfg.imbalance.proportions.size(); ++k) {
            SubsetSpec spec;
            spec.count = cfg.imbalance.count;
            spec.split_seed = cell.split_seed;
            spec.class_proportions = cfg.imbalance.proportions[k];
            Dataset data;
            try {
                data = subset(candidates, spec);
            } catch (const DomainError& e) {
                throw ConfigError("imbalance.proportions[" + std::to_string(k) + "]", e.what());
            }
            const Trained t = train_model(cfg, cfg.model, data, plan.test, cell, tc);
            const VolumeEstimate est = volume_of_minimum(cfg.model, t.result.final_params, data, mc_of(cfg));
            Json arm = train_summary(t);
            arm["proportions"] = cfg.imbalance.proportions[k];
            arm["class_counts"] = data.class_counts();
            arm["log_volume"] = log_volume_json(est.log_volume);
            arm["collapsed"] = est.collapsed();
            out.payload["arms"].push_back(arm);
        }
        return out;
    });
    ExperimentResult res;
    std::string csv = "model_seed,split_seed,arm,log_volume,test_accuracy\n";
    for (const auto& c : cells) {
        if (!c.payload.contains("arms")) continue;
        for (std::size_t k = 0; k < c.payload["arms"].size(); ++k) {
            const Json& a = c.payload["arms"][k];
            csv += std::to_string(c.payload["model_seed"].get<std::uint64_t>()) + "," +
                   std::to_string(c.payload["split_seed"].get<std::uint64_t>()) + "," + std::to_string(k) + "," +
                   format_double(log_volume_from_json(a["log_volume"])) + "," +
                   format_double(a["test_accuracy"].is_null() ? std::nan("") : a["test_accuracy"].get<double>()) + "\n";
        }
    }
    collect(res, cells);
    res.files["imbalance.csv"] = csv;
    return res;
}

bool needs_data(ExperimentKind k) { return k != ExperimentKind::oracle && k != ExperimentKind::fit; }

}  // namespace

Dataset DataPlan::train_prefix(std::size_t count) const {
    if (count > train.size()) throw DomainError("train_prefix: only " + std::to_string(train.size()) + " training rows");
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return take_rows(train, idx, "prefix(count=" + std::to_string(count) + ")");
}

Dataset DataPlan::candidates() const {
    const std::size_t tail = test.meta.parent_id == pool.meta.id ? test.size() : 0;
    return rows_of(pool, permutation, 0, pool.size() - tail, "candidates(count=" + std::to_string(pool.size() - tail) + ")");
}

Dataset load_pool(const DataConfig& data, std::uint64_t split_seed) {
    if (data.source == "swiss_roll") {
        const std::uint64_t seed = data.resample_per_split ? mix_seed(data.data_seed, split_seed) : data.data_seed;
        return gen_swiss_roll(data.pool_size, data.noise, seed);
    }
    if (data.source == "modulo") return gen_modulo(data.modulus);
    if (data.source == "idx") return load_idx(data.train_images, data.train_labels);
    if (data.source == "cache") return read_dataset_cache(data.cache);
    throw ConfigError("data.source", "unknown source '" + data.source + "'");
}

std::size_t train_region_rows(const ExperimentConfig& cfg, std::size_t pool_rows) {
    if (cfg.kind == ExperimentKind::data_scan) {
        return *std::max_element(cfg.data_scan.sizes.begin(), cfg.data_scan.sizes.end());
    }
    if (cfg.kind == ExperimentKind::imbalance) return 0;
    SubsetSpec s;
    s.count = cfg.data.train_count;
    s.fraction = cfg.data.train_fraction;
    if (!s.count && !s.fraction) return pool_rows;
    try {
        return s.resolve_count(pool_rows);
    } catch (const DomainError& e) {
        throw ConfigError(s.count ? "data.train_count" : "data.train_fraction", e.what());
    }
}

std::size_t poison_region_rows(const ExperimentConfig& cfg) {
    if (cfg.kind != ExperimentKind::poison_scan || cfg.poison.counts.empty()) return 0;
    return *std::max_element(cfg.poison.counts.begin(), cfg.poison.counts.end());
}

DataPlan make_data_plan(const ExperimentConfig& cfg, std::uint64_t split_seed) {
    DataPlan plan;
    plan.split_seed = split_seed;
    plan.pool = load_pool(cfg.data, split_seed);
    const std::size_t n = plan.pool.size();
    plan.permutation = split_permutation(n, split_seed);

    const std::size_t train_rows = train_region_rows(cfg, n);
    const std::size_t poison_rows = poison_region_rows(cfg);
    if (train_rows + poison_rows > n) {
        throw ConfigError("data", "train region (" + std::to_string(train_rows) + ") plus poison region (" +
                                      std::to_string(poison_rows) + ") exceed the " + std::to_string(n) + " pool rows");
    }
    plan.train = rows_of(plan.pool, plan.permutation, 0, train_rows, "train(count=" + std::to_string(train_rows) +
                                                                          ",seed=" + std::to_string(split_seed) + ")");
    plan.poison_source = rows_of(plan.pool, plan.permutation, train_rows, train_rows + poison_rows,
                                 "poison_source(count=" + std::to_string(poison_rows) + ")");

    if (!cfg.data.test_images.empty()) {
        Dataset test = load_idx(cfg.data.test_images, cfg.data.test_labels);
        if (cfg.data.test_count && *cfg.data.test_count < test.size()) {
            SubsetSpec s;
            s.count = *cfg.data.test_count;
            s.split_seed = split_seed;
            test = subset(test, s);
        }
        plan.test = std::move(test);
    } else {
        const std::size_t rest = n - train_rows - poison_rows;
        const std::size_t test_rows = cfg.data.test_count ? *cfg.data.test_count : rest;
        if (test_rows > rest) {
            throw ConfigError("data.test_count", std::to_string(test_rows) + " test rows requested, " + std::to_string(rest) +
                                                     " left after the train and poison regions");
        }
        if (test_rows > 0) {
            plan.test = rows_of(plan.pool, plan.permutation, n - test_rows, n, "test(count=" + std::to_string(test_rows) + ")");
        }
    }
    if (!plan.test.empty() && plan.test.width() != plan.pool.width()) {
        throw DataError("test features have width " + std::to_string(plan.test.width()) + ", training data " +
                        std::to_string(plan.pool.width()));
    }
    return plan;
}

NetworkSpec resolve_spec(const NetworkSpec& model, const Dataset& pool) {
    NetworkSpec spec = model;
    if (spec.input_dim == 0) spec.input_dim = pool.width();
    if (spec.output_dim == 0) spec.output_dim = pool.num_classes;
    if (spec.input_dim != pool.width()) {
        throw ConfigError("model.input_dim", std::to_string(spec.input_dim) + " does not match data width " +
                                                 std::to_string(pool.width()));
    }
    if (spec.output_dim < pool.num_classes) {
        throw ConfigError("model.output_dim", "smaller than the " + std::to_string(pool.num_classes) + " classes in the data");
    }
    return spec;
}

std::vector<SeedCell> seed_grid(const SeedsConfig& seeds) {
    std::vector<SeedCell> out;
    if (seeds.pairing == "zip") {
        for (std::size_t i = 0; i < seeds.model_seeds.size(); ++i) out.push_back({seeds.model_seeds[i], seeds.split_seeds[i]});
        return out;
    }
    for (auto m : seeds.model_seeds) {
        for (auto s : seeds.split_seeds) out.push_back({m, s});
    }
    return out;
}

ExperimentConfig resolve_config(ExperimentConfig cfg) {
    cfg.validate();
    cfg.mc.seed = cfg.seeds.mc_seed;
    if (needs_data(cfg.kind)) {
        if (cfg.kind == ExperimentKind::volume && !cfg.volume.checkpoint.empty()) {
            cfg.model = read_checkpoint(cfg.volume.checkpoint).spec;
        } else {
            cfg.model = resolve_spec(cfg.model, load_pool(cfg.data, cfg.seeds.split_seeds[0]));
        }
    }
    return cfg;
}

ExperimentResult execute(const ExperimentConfig& cfg) {
    switch (cfg.kind) {
        case ExperimentKind::train: return run_train(cfg);
        case ExperimentKind::volume: return run_volume(cfg);
        case ExperimentKind::poison_scan: return run_poison_scan(cfg);
        case ExperimentKind::data_scan: return run_data_scan(cfg);
        case ExperimentKind::grok: return run_grok(cfg);
        case ExperimentKind::oracle: return run_oracle(cfg);
        case ExperimentKind::fit: return run_fit(cfg);
        case ExperimentKind::slice: return run_slice(cfg);
        case ExperimentKind::imbalance: return run_imbalance(cfg);
    }
    throw ConfigError("kind", "unhandled experiment kind");
}

RunOutcome run_experiment(const ExperimentConfig& input, const std::filesystem::path& output_root) {
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentConfig cfg = resolve_config(input);
    const std::string hash = config_hash(cfg);
    RunOutcome outcome;
    outcome.dir = cfg.output.dir.empty() ? output_root / (to_string(cfg.kind) + "-" + hash) : std::filesystem::path(cfg.output.dir);
    if (std::filesystem::exists(outcome.dir / "result.json") && !cfg.output.force) {
        throw ConfigError("output.force", "a result already exists in " + outcome.dir.string() + "; pass --force to overwrite");
    }

    ExperimentResult res = execute(cfg);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    outcome.partial = res.flagged > 0;
    outcome.result = {{"format", "basinvol-result/1"},
                      {"kind", to_string(cfg.kind)},
                      {"config_hash", hash},
                      {"version", BASINVOL_VERSION},
                      {"flagged", res.flagged},
                      {"payload", std::move(res.payload)},
                      {"timing", {{"wall_seconds", wall}}}};

    write_text(outcome.dir / "resolved_config.json", to_json(cfg).dump(2) + "\n");
    for (const auto& [name, text] : res.files) write_text(outcome.dir / name, text);
    write_text(outcome.dir / "result.json", outcome.result.dump(2) + "\n");
    return outcome;
}

std::filesystem::path output_root_from_env() {
    const char* env = std::getenv("BASINVOL_OUTPUT_ROOT");
    return env && *env ? std::filesystem::path(env) : std::filesystem::path("runs");
}

}  // namespace basinvol
