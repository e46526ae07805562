#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "basinvol/analysis.hpp"
#include "basinvol/config.hpp"
#include "basinvol/datasets.hpp"
#include "basinvol/nn.hpp"
#include "basinvol/volume.hpp"

namespace basinvol {

struct CheckpointFile {
    NetworkSpec spec;
    Json seeds = Json::object();
    std::size_t epoch = 0;
    ParameterVector params;
};

// One header line {format, spec, seeds, epoch, n}, then n values, one per
// line, printed with 17 significant digits (exact round trip).
std::string checkpoint_text(const CheckpointFile& ckpt);
void write_checkpoint(const std::filesystem::path& path, const CheckpointFile& ckpt);
CheckpointFile read_checkpoint(const std::filesystem::path& path);

// One header line {format, rows, cols, num_classes, meta}, then rows*cols
// little-endian doubles (row-major) and rows little-endian int32 labels.
void write_dataset_cache(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset_cache(const std::filesystem::path& path);

// log-volume as JSON: -inf becomes null (the estimate carries collapsed=true).
Json log_volume_json(double v);
double log_volume_from_json(const Json& j);

// Summary of an estimate; with_radii adds the per-direction arrays.
Json to_json(const VolumeEstimate& est, bool with_radii);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string format_double(double v);

// index,radius,extent,censored,crossing_step
std::string radii_csv(const VolumeEstimate& est);
// lo,hi,count,censored
std::string histogram_csv(const std::vector<HistogramBin>& bins);

}  // namespace basinvol
