#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "basinvol/config.hpp"
#include "basinvol/datasets.hpp"
#include "basinvol/nn.hpp"

namespace basinvol {

// Rows available to one split seed. The permutation of the pool is laid out
// as [train region | poison region | ... | test region], so training subsets
// are nested prefixes and never meet poison or test rows.
struct DataPlan {
    std::uint64_t split_seed = 0;
    Dataset pool;
    Dataset train;          // the whole train region
    Dataset poison_source;  // rows reserved for poisoning (may be empty)
    Dataset test;           // held-out rows or the test files (may be empty)
    std::vector<std::size_t> permutation;

    // First `count` rows of the train region.
    Dataset train_prefix(std::size_t count) const;
    // Rows outside the test region, for class-quota sampling.
    Dataset candidates() const;
};

// Root dataset for a split seed (swiss roll pools are redrawn per split seed
// when resample_per_split is set).
Dataset load_pool(const DataConfig& data, std::uint64_t split_seed);

// Rows of the train region for this experiment: the largest data_scan size,
// the imbalance count, or the configured train_count / train_fraction.
std::size_t train_region_rows(const ExperimentConfig& cfg, std::size_t pool_rows);
std::size_t poison_region_rows(const ExperimentConfig& cfg);

DataPlan make_data_plan(const ExperimentConfig& cfg, std::uint64_t split_seed);

// Fills model.input_dim / output_dim from the data when they are 0 and checks
// them otherwise.
NetworkSpec resolve_spec(const NetworkSpec& model, const Dataset& pool);

struct SeedCell {
    std::uint64_t model_seed = 0;
    std::uint64_t split_seed = 0;
};

// model_seeds x split_seeds, model-seed major; with zip pairing, element-wise.
std::vector<SeedCell> seed_grid(const SeedsConfig& seeds);

// Files and payload produced by one experiment; nothing touches the disk.
struct ExperimentResult {
    Json payload = Json::object();
    std::map<std::string, std::string> files;  // relative path -> contents
    std::size_t flagged = 0;
};

// Runs the experiment in memory. `cfg` must already be resolved against the
// data (see resolve_config).
ExperimentResult execute(const ExperimentConfig& cfg);

// Loads the data once to fill in network dimensions.
ExperimentConfig resolve_config(ExperimentConfig cfg);

struct RunOutcome {
    std::filesystem::path dir;
    Json result;
    bool partial = false;
};

// Resolves, executes and writes resolved_config.json, result.json and every
// tabular file under the output directory. Refuses to overwrite an existing
// result unless cfg.output.force is set.
RunOutcome run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& output_root);

// BASINVOL_OUTPUT_ROOT, or "runs" when unset.
std::filesystem::path output_root_from_env();

}  // namespace basinvol
