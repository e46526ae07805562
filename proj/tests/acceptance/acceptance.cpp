// Acceptance checks, one line per criterion:
//   basinvol_acceptance [N ...]     run the listed criteria (default: all)
// Exit status is 0 only if every requested criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "basinvol/analysis.hpp"
#include "basinvol/config.hpp"
#include "basinvol/datasets.hpp"
#include "basinvol/experiments.hpp"
#include "basinvol/nn.hpp"
#include "basinvol/optim.hpp"
#include "basinvol/oracle.hpp"
#include "basinvol/persist.hpp"
#include "basinvol/rng.hpp"
#include "basinvol/volume.hpp"

using namespace basinvol;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Json zip_seeds(std::size_t n) {
    Json seeds = Json::array();
    for (std::size_t i = 0; i < n; ++i) seeds.push_back(i);
    return {{"model_seeds", seeds}, {"split_seeds", seeds}, {"pairing", "zip"}};
}

ExperimentResult run(ExperimentKind kind, const Json& doc) { return execute(resolve_config(parse_config(doc, kind))); }

const char* mnist_dir() {
    const char* d = std::getenv("BASINVOL_MNIST_DIR");
    return d && *d ? d : nullptr;
}

Json mnist_data_block(const char* dir) {
    const std::string root(dir);
    return {{"source", "idx"},
            {"train_images", root + "/train-images-idx3-ubyte"},
            {"train_labels", root + "/train-labels-idx1-ubyte"},
            {"test_images", root + "/t10k-images-idx3-ubyte"},
            {"test_labels", root + "/t10k-labels-idx1-ubyte"}};
}

// Extent column (distance travelled in normalized coordinates) of a radii CSV.
std::vector<double> extent_column(const std::string& csv) {
    std::vector<double> out;
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        const auto a = line.find(',', line.find(',') + 1);
        const auto b = line.find(',', a + 1);
        out.push_back(std::stod(line.substr(a + 1, b - a - 1)));
    }
    return out;
}

// A swiss roll minimum trained to the 0.01 target on 400 points.
struct SwissMinimum {
    NetworkSpec spec{2, {32, 32, 32, 32, 32}, 2};
    Dataset data;
    ParameterVector params;
    double loss = 0.0;
};

SwissMinimum swiss_minimum(std::size_t rows, std::uint64_t seed) {
    SwissMinimum m;
    m.data = gen_swiss_roll(rows, 0.1, seed);
    TrainConfig tc;
    tc.epochs = 3000;
    tc.batch_size = 32;
    tc.target_loss = 0.01;
    tc.shuffle_seed = seed;
    m.params = train(m.spec, m.data, Dataset{}, init_params(m.spec, seed), OptimizerConfig::defaults(OptimizerKind::adamw), tc)
                   .final_params;
    m.loss = loss_mean(m.spec, m.params, m.data);
    return m;
}

// --- 1: oracle equivalence -------------------------------------------------

Outcome oracle_equivalence() {
    OracleConfig cfg;
    cfg.directions = 10000;
    cfg.grid_resolution = 2000;
    const auto r = run_toy_oracle({0.2, 1.0}, cfg);
    const bool cf_ok = std::abs(r.closed_form - 0.67891) / 0.67891 < 1e-4;
    const bool pass = cf_ok && r.mc_rel_error < 0.02 && r.grid_rel_error < 0.01;
    return {pass, fmt("closed form %.6f, MC %.6f (err %.2f%% < 2%%), grid %.6f (err %.3f%% < 1%%)", r.closed_form, r.mc,
                      100 * r.mc_rel_error, r.grid, 100 * r.grid_rel_error)};
}

// --- 2: scale invariance ---------------------------------------------------

Outcome scale_invariance() {
    OracleConfig cfg;
    cfg.directions = 10000;
    const double v1 = std::exp(toy_monte_carlo({0.2, 1.0}, cfg).log_volume);
    const double v3 = std::exp(toy_monte_carlo({0.2, 3.0}, cfg).log_volume);
    const double rel = std::abs(v1 - v3) / toy_volume_closed_form(0.2);

    const NetworkSpec spec{2, {4, 4}, 2};
    const auto p = init_params(spec, 3);
    Matrix x(100, 2);
    CounterRng rng(17, 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) x.row(i) << 2 * rng.normal(), 2 * rng.normal();
    const Matrix base = forward(spec, p, x);
    double worst = 0.0;
    for (std::size_t layer : {0u, 1u})
        for (double alpha : {0.1, 2.0, 10.0})
            worst = std::max(worst, (forward(spec, rescale_layer_pair(spec, p, layer, alpha), x) - base).cwiseAbs().maxCoeff());
    return {rel < 0.01 && worst < 1e-9,
            fmt("MC b=1 %.6f vs b=3 %.6f (diff %.4f%% of closed form < 1%%); relu rescale max |dy| %.2e < 1e-9", v1, v3, 100 * rel,
                worst)};
}

// --- 3: unit-ball identities -----------------------------------------------

Outcome unit_ball() {
    double worst = 0.0;
    for (std::size_t n = 2; n <= 100; ++n) {
        const double ratio = log_unit_ball(n) - log_unit_ball(n - 2) - std::log(2 * std::numbers::pi / static_cast<double>(n));
        worst = std::max(worst, std::abs(std::expm1(ratio)));
    }
    const double d2 = std::abs(log_unit_ball(2) - std::log(std::numbers::pi));
    return {worst < 1e-12 && d2 <= 1e-15, fmt("recurrence worst rel %.2e < 1e-12 (n <= 100); |ln V_2 - ln pi| = %.1e", worst, d2)};
}

// --- 4: estimator hygiene --------------------------------------------------

Outcome estimator_hygiene() {
    const auto m = swiss_minimum(400, 0);
    if (m.loss > 0.01) return {false, fmt("minimum did not reach 0.01 (loss %.4f)", m.loss)};
    const MlpObjective obj(m.spec, m.data);
    McConfig mc;
    mc.directions = 500;
    mc.search.c_max = 0.1;
    mc.threshold = 0.01;
    const auto lo = volume_of_minimum(obj, m.params, mc);
    mc.threshold = 0.1;
    const auto hi = volume_of_minimum(obj, m.params, mc);
    std::size_t violations = 0;
    for (std::size_t i = 0; i < lo.radii.size(); ++i) violations += lo.radii[i].radius > hi.radii[i].radius;

    McConfig mc50 = mc;
    mc50.directions = 50;
    const auto prefix = volume_of_minimum(obj, m.params, mc50);
    std::size_t mismatched = 0;
    std::vector<double> first50;
    for (std::size_t i = 0; i < 50; ++i) {
        mismatched += prefix.radii[i].radius != hi.radii[i].radius;
        first50.push_back(hi.radii[i].extent());
    }
    const bool prefix_ok = mismatched == 0 && prefix.log_volume == estimate_log_volume(first50, prefix.n_params);

    const std::size_t n = 1000000;
    std::vector<double> big(n);
    CounterRng rng(2, 2);
    for (auto& r : big) r = rng.uniform(0.5, 2.0);
    const double lv = estimate_log_volume(big, n);

    return {violations == 0 && prefix_ok && std::isfinite(lv),
            fmt("radii(t=0.01) <= radii(t=0.1) in %zu/500 directions; 50-direction prefix %s; n=1e6 log-volume %.6g", 500 - violations,
                prefix_ok ? "identical" : "differs", lv)};
}

// --- 5: poisoning sign test ------------------------------------------------

Outcome poisoning() {
    const Json doc{{"seeds", zip_seeds(10)}, {"poison", {{"counts", {8, 40, 80}}}}};
    const auto res = run(ExperimentKind::poison_scan, doc);
    const Json& summary = res.payload["summary"];
    const double clean = log_volume_from_json(summary[0]["median_log_volume"]);
    bool medians = true;
    std::string detail = fmt("clean median %.1f", clean);
    std::size_t ordered80 = 0;
    for (std::size_t k = 1; k < summary.size(); ++k) {
        const double med = log_volume_from_json(summary[k]["median_log_volume"]);
        medians = medians && med < clean;
        detail += fmt("; %zu poisoned: median %.1f, %zu/10 below clean", summary[k]["count"].get<std::size_t>(), med,
                      summary[k]["seeds_below_clean"].get<std::size_t>());
        if (summary[k]["count"] == 80) ordered80 = summary[k]["seeds_below_clean"].get<std::size_t>();
    }
    detail += fmt("; %zu arms flagged", res.flagged);
    return {medians && ordered80 >= 8, detail};
}

// --- 6: low-data landscape inversion ----------------------------------------

Outcome low_data_inversion() {
    const Json doc{{"seeds", zip_seeds(10)}, {"data_scan", {{"sizes", {20, 400}}}}};
    const auto res = run(ExperimentKind::data_scan, doc);
    std::size_t larger = 0, better = 0, cells = 0;
    for (const auto& c : res.payload["cells"]) {
        if (!c.contains("log_volume")) continue;
        ++cells;
        const double small_here = log_volume_from_json(c["log_volume"][0][0]);
        const double large_here = log_volume_from_json(c["log_volume"][1][0]);
        larger += small_here > large_here;
        const auto& models = c["models"];
        better += models[1]["test_accuracy"].get<double>() > models[0]["test_accuracy"].get<double>();
    }
    std::string detail = fmt("in the 20-point landscape the 20-point minimum is larger in %zu/10 seeds; "
                             "the 400-point minimum has higher test accuracy in %zu/10 seeds",
                             larger, better);
    if (cells < 10) detail += fmt(" (%zu cells diverged)", 10 - cells);
    return {larger >= 8 && better >= 8, detail};
}

// --- 7: radii separation ----------------------------------------------------

Outcome radii_separation() {
    const Json doc{{"seeds", zip_seeds(3)}, {"data_scan", {{"sizes", {20, 800}}}}};
    const auto res = run(ExperimentKind::data_scan, doc);
    std::size_t ok = 0;
    std::string detail = "swiss roll median distance in the 20-point landscape (800 vs 20):";
    for (std::size_t s = 0; s < 3; ++s) {
        const std::string tag = "m" + std::to_string(s) + "_s" + std::to_string(s);
        const double large = median(extent_column(res.files.at("radii_" + tag + "_model800_landscape20.csv")));
        const double small = median(extent_column(res.files.at("radii_" + tag + "_model20_landscape20.csv")));
        ok += large < small;
        detail += fmt(" %.4g < %.4g%s", large, small, s < 2 ? ";" : "");
    }
    bool pass = ok == 3;
    if (const char* dir = mnist_dir()) {
        Json mdoc{{"data", mnist_data_block(dir)},
                  {"model", {{"hidden_dims", {256, 128}}}},
                  {"mc", {{"c_max", 1.0}}},
                  {"data_scan", {{"sizes", {60, 60000}}}}};
        const auto mres = run(ExperimentKind::data_scan, mdoc);
        const auto large = extent_column(mres.files.at("radii_m0_s0_model60000_landscape60.csv"));
        const auto small = extent_column(mres.files.at("radii_m0_s0_model60_landscape60.csv"));
        const double mx = *std::max_element(large.begin(), large.end());
        const double mn = *std::min_element(small.begin(), small.end());
        pass = pass && mx < mn;
        detail += fmt("; MNIST max(60000) %.4g < min(60) %.4g", mx, mn);
    } else {
        detail += "; MNIST 60 vs 60000 not run (BASINVOL_MNIST_DIR unset)";
    }
    return {pass, detail};
}

// --- 8: scaling law --------------------------------------------------------

Outcome scaling_law() {
    const std::size_t n = 235146;
    std::vector<ScalingPoint> pts;
    for (double d : {60.0, 180.0, 600.0, 1800.0, 6000.0}) pts.push_back({d, static_cast<double>(n) * (-0.1835 * std::log(d) + 2.0)});
    const auto fit = fit_power_law(pts, n);
    const double err = std::max(std::abs(fit.alpha + 0.1835) / 0.1835, std::abs(fit.r_squared - 1.0));
    bool pass = err < 1e-12;
    std::string detail = fmt("synthetic collinear fit: alpha %.15g, r^2 %.15g", fit.alpha, fit.r_squared);
    if (const char* dir = mnist_dir()) {
        Json mdoc{{"data", mnist_data_block(dir)},
                  {"model", {{"hidden_dims", {256, 128}}}},
                  {"mc", {{"c_max", 1.0}}},
                  {"seeds", zip_seeds(3)},
                  {"data_scan", {{"sizes", {60, 180, 600, 1800, 6000}}}}};
        const auto mres = run(ExperimentKind::data_scan, mdoc);
        const Json& f = mres.payload["fit"];
        const double alpha = f.value("alpha", std::nan("")), r2 = f.value("r_squared", std::nan(""));
        pass = pass && alpha < 0 && r2 > 0.9 && std::abs(alpha + 0.1835) < 0.08;
        detail += fmt("; MNIST alpha %.4f (target -0.1835 +- 0.08), r^2 %.3f", alpha, r2);
    } else {
        detail += "; MNIST fractions not run (BASINVOL_MNIST_DIR unset)";
    }
    return {pass, detail};
}

// --- 9: grokking volume decay ----------------------------------------------

Outcome grokking() {
    const Json doc{{"train", {{"checkpoint_epochs", {500, 5000}}}}, {"mc", {{"directions", 50}}}};
    const auto res = run(ExperimentKind::grok, doc);
    const Json& cell = res.payload["cells"][0];
    if (!cell.contains("series")) return {false, "training diverged: " + cell.value("reason", std::string{})};
    const Json& a = cell["series"][0];
    const Json& b = cell["series"][1];
    const double l0 = a["train_loss"].get<double>(), l1 = b["train_loss"].get<double>();
    const double acc0 = a["test_accuracy"].get<double>(), acc1 = b["test_accuracy"].get<double>();
    const double v0 = log_volume_from_json(a["log_volume"]), v1 = log_volume_from_json(b["log_volume"]);
    const bool pass = l0 <= 0.01 && l1 <= 0.01 && acc1 > acc0 && v1 < v0;
    return {pass, fmt("p=97: train loss %.4g / %.4g (<= 0.01), test accuracy %.3f -> %.3f, log-volume %.6g -> %.6g", l0, l1,
                      acc0, acc1, v0, v1)};
}

// --- 10: determinism -------------------------------------------------------

Outcome determinism() {
    const Json small_model{{"hidden_dims", {16, 16}}};
    const Json small_mc{{"directions", 20}};
    const std::vector<std::pair<ExperimentKind, Json>> corpus{
        {ExperimentKind::oracle, {{"oracle", {{"directions", 2000}, {"grid_resolution", 300}}}}},
        {ExperimentKind::train, {{"model", small_model}, {"train", {{"epochs", 200}}}, {"seeds", {{"model_seeds", {0, 1}}}}}},
        {ExperimentKind::poison_scan,
         {{"model", small_model}, {"mc", small_mc}, {"train", {{"epochs", 200}}}, {"poison", {{"counts", {8}}}}, {"workers", 2}}},
        {ExperimentKind::data_scan, {{"model", small_model}, {"mc", small_mc}, {"train", {{"epochs", 200}}},
                                     {"data_scan", {{"sizes", {20, 80}}}}, {"seeds", zip_seeds(2)}}},
        {ExperimentKind::slice, {{"model", small_model}, {"train", {{"epochs", 200}}}, {"slice", {{"steps", 4}}}}},
    };
    std::size_t same = 0;
    for (const auto& [kind, doc] : corpus) {
        const std::string a = run(kind, doc).payload.dump();
        const std::string b = run(kind, doc).payload.dump();
        same += a == b;
    }
    return {same == corpus.size(), fmt("%zu/%zu configs reproduced bit-identical payloads", same, corpus.size())};
}

// --- 11: collapse semantics ------------------------------------------------

Outcome collapse() {
    const NetworkSpec spec{2, {32, 32, 32, 32, 32}, 2};
    const auto pool = gen_swiss_roll(2000, 0.1, 11);
    SubsetSpec a;
    a.count = 20;
    SubsetSpec b;
    b.count = 400;
    b.offset = 20;
    const Dataset small = subset(pool, a), disjoint = subset(pool, b);
    TrainConfig tc;
    tc.epochs = 3000;
    tc.target_loss = 0.01;
    const auto params =
        train(spec, small, Dataset{}, init_params(spec, 0), OptimizerConfig::defaults(OptimizerKind::adamw), tc).final_params;
    McConfig mc;
    mc.directions = 100;
    mc.search.c_max = 0.1;
    const double far_loss = loss_mean(spec, params, disjoint);
    const std::vector<ParameterVector> models{params};
    const std::vector<Dataset> landscapes{small, disjoint};
    const auto mat = cross_landscape_matrix(spec, models, landscapes, mc);
    const Json cell = to_json(mat.cells[0][1], false);
    const bool above = far_loss > mc.threshold;
    const bool pass = above && mat.collapsed(0, 1) && mat.log_volume(0, 1) == -std::numeric_limits<double>::infinity() &&
                      cell["log_volume"].is_null() && cell["collapsed"] == true && std::isfinite(mat.log_volume(0, 0));
    return {pass, fmt("20-point minimum: loss %.3f on the disjoint 400 points (threshold 0.1); cell %s, serialized %s; own landscape %.6g",
                      far_loss, mat.collapsed(0, 1) ? "collapsed" : "finite", cell["log_volume"].dump().c_str(),
                      mat.log_volume(0, 0))};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"oracle equivalence", oracle_equivalence},
        {"scale invariance", scale_invariance},
        {"unit-ball identities", unit_ball},
        {"estimator hygiene", estimator_hygiene},
        {"poisoning sign test", poisoning},
        {"low-data landscape inversion", low_data_inversion},
        {"radii separation", radii_separation},
        {"scaling law", scaling_law},
        {"grokking volume decay", grokking},
        {"determinism", determinism},
        {"collapse semantics", collapse},
    };
    std::vector<std::size_t> selected;
    for (int i = 1; i < argc; ++i) {
        const long k = std::strtol(argv[i], nullptr, 10);
        if (k < 1 || k > static_cast<long>(criteria.size())) {
            std::fprintf(stderr, "unknown criterion '%s'\n", argv[i]);
            return 2;
        }
        selected.push_back(static_cast<std::size_t>(k));
    }
    if (selected.empty())
        for (std::size_t k = 1; k <= criteria.size(); ++k) selected.push_back(k);

    bool all = true;
    for (std::size_t k : selected) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k - 1].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %zu %s: %s (%s) [%.0f s]\n", k, o.pass ? "PASS" : "FAIL", criteria[k - 1].first, o.detail.c_str(), secs);
        std::fflush(stdout);
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
