#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "basinvol/analysis.hpp"
#include "basinvol/nn.hpp"
#include "basinvol/optim.hpp"
#include "basinvol/volume.hpp"

namespace basinvol {

using Json = nlohmann::json;

enum class ExperimentKind { train, volume, poison_scan, data_scan, grok, oracle, fit, slice, imbalance };

std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);

struct DataConfig {
    std::string source = "swiss_roll";  // swiss_roll | modulo | idx | cache
    std::size_t pool_size = 2000;
    double noise = 0.1;
    std::uint64_t data_seed = 0;
    bool resample_per_split = true;  // swiss roll: fresh pool per split seed
    std::size_t modulus = 97;
    std::string train_images;
    std::string train_labels;
    std::string test_images;   // optional for idx; else the test rows come from the pool
    std::string test_labels;
    std::string cache;         // dataset cache file for source "cache"
    std::optional<std::size_t> train_count;
    std::optional<double> train_fraction;
    std::optional<std::size_t> test_count;  // unset: every pool row outside the train and poison regions
};

struct SeedsConfig {
    std::vector<std::uint64_t> model_seeds{0};
    std::vector<std::uint64_t> split_seeds{0};
    std::uint64_t mc_seed = 0;
    std::string pairing = "grid";  // grid: model_seeds x split_seeds; zip: i-th with i-th
};

struct OutputConfig {
    std::string dir;     // empty: <output root>/<kind>-<hash>
    bool force = false;  // overwrite an existing result
};

struct VolumeBlock {
    std::string checkpoint;          // measure this file instead of training
    std::string landscape = "train"; // train | test | pool
    std::size_t histogram_bins = 20;
};

struct PoisonBlock {
    std::vector<std::size_t> counts{0, 8, 40, 80};
};

struct DataScanBlock {
    std::vector<std::size_t> sizes{20, 80, 400};
    std::string fit_mode = "mean";  // mean | per_seed
};

struct OracleBlock {
    std::vector<double> s{0.2};
    std::vector<double> b{1.0, 3.0};
    std::size_t directions = 10000;
    std::size_t grid_resolution = 2000;
    RadiusSearch search{100.0, 20000, 30};
};

struct FitBlock {
    std::string result;               // a data_scan result.json to fit
    std::vector<ScalingPoint> points; // or explicit points
    std::size_t n_params = 0;         // required with explicit points
    std::string mode = "mean";        // mean | per_seed
};

struct SliceBlock {
    std::string mode = "random";  // random | plane
    double half_width = 1.0;
    std::size_t steps = 10;
};

struct ImbalanceBlock {
    std::size_t count = 400;
    std::vector<std::vector<double>> proportions{{1.0, 1.0}, {3.0, 1.0}, {9.0, 1.0}};
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::train;
    DataConfig data;
    NetworkSpec model;  // input_dim/output_dim 0 until resolved against the data
    OptimizerConfig optimizer;
    TrainConfig train;
    McConfig mc;
    SeedsConfig seeds;
    std::size_t workers = 1;  // concurrent seed-grid cells; 0 = hardware concurrency
    OutputConfig output;

    VolumeBlock volume;
    PoisonBlock poison;
    DataScanBlock data_scan;
    OracleBlock oracle;
    FitBlock fit;
    SliceBlock slice;
    ImbalanceBlock imbalance;

    void validate() const;
};

// Defaults for one experiment kind, before any user fields are applied.
ExperimentConfig default_config(ExperimentKind kind);

// Overlays a config document on default_config(kind). The kind comes from the
// document's "kind" field unless `kind` is given. Unknown keys and wrong types
// raise ConfigError naming the field path.
ExperimentConfig parse_config(const Json& doc, std::optional<ExperimentKind> kind = std::nullopt);

Json load_json_file(const std::filesystem::path& path);

// Applies "a.b.c=value"; value is parsed as JSON when possible, else taken as
// a string. Intermediate objects are created as needed.
void apply_override(Json& doc, const std::string& assignment);

// Resolved echo: every effective value, including defaults.
Json to_json(const ExperimentConfig& cfg);

// Stable hex digest of the echo without the output block.
std::string config_hash(const ExperimentConfig& cfg);

Json to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const Json& j);

}  // namespace basinvol
