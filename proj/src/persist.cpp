#include "basinvol/persist.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "basinvol/error.hpp"

namespace basinvol {

namespace {

constexpr const char* kCheckpointFormat = "basinvol-checkpoint/1";
constexpr const char* kDatasetFormat = "basinvol-dataset/1";

static_assert(std::endian::native == std::endian::little, "dataset cache assumes a little-endian host");

Json meta_json(const DatasetMeta& m) {
    return Json{{"id", m.id},
                {"source", m.source},
                {"seed", m.seed},
                {"parent_id", m.parent_id},
                {"transform", m.transform},
                {"row_ids", m.row_ids},
                {"poisoned", m.poisoned},
                {"feature_shift", m.feature_shift},
                {"feature_scale", m.feature_scale}};
}

DatasetMeta meta_from_json(const Json& j) {
    DatasetMeta m;
    m.id = j.at("id").get<std::string>();
    m.source = j.at("source").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.parent_id = j.at("parent_id").get<std::string>();
    m.transform = j.at("transform").get<std::string>();
    m.row_ids = j.at("row_ids").get<std::vector<std::size_t>>();
    m.poisoned = j.at("poisoned").get<std::vector<std::uint8_t>>();
    m.feature_shift = j.at("feature_shift").get<std::vector<double>>();
    m.feature_scale = j.at("feature_scale").get<std::vector<double>>();
    return m;
}

Json parse_header(const std::string& line, const std::filesystem::path& path) {
    Json h = Json::parse(line, nullptr, false);
    if (h.is_discarded() || !h.is_object()) throw DataError(path.string() + ": malformed header line");
    return h;
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed for " + path.string());
}

std::string checkpoint_text(const CheckpointFile& ckpt) {
    if (ckpt.params.size() != ckpt.spec.param_count()) throw DimensionError("checkpoint: parameters do not match the spec");
    Json header{{"format", kCheckpointFormat},
                {"spec", to_json(ckpt.spec)},
                {"seeds", ckpt.seeds},
                {"epoch", ckpt.epoch},
                {"n", ckpt.params.size()}};
    std::string text = header.dump() + "\n";
    for (double v : ckpt.params.values) {
        text += format_double(v);
        text += '\n';
    }
    return text;
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointFile& ckpt) { write_text(path, checkpoint_text(ckpt)); }

CheckpointFile read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": empty checkpoint");
    const Json h = parse_header(line, path);
    if (h.value("format", "") != kCheckpointFormat) throw DataError(path.string() + ": not a checkpoint file");

    CheckpointFile ckpt;
    try {
        ckpt.spec = network_spec_from_json(h.at("spec"));
        ckpt.spec.validate();
        ckpt.seeds = h.value("seeds", Json::object());
        ckpt.epoch = h.at("epoch").get<std::size_t>();
    } catch (const Json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    } catch (const ConfigError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    const std::size_t n = h.at("n").get<std::size_t>();
    if (n != ckpt.spec.param_count()) throw DataError(path.string() + ": value count does not match the spec");

    std::vector<double> values;
    values.reserve(n);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        char* end = nullptr;
        const double v = std::strtod(line.c_str(), &end);
        if (end == line.c_str()) throw DataError(path.string() + ": bad value on line " + std::to_string(values.size() + 2));
        values.push_back(v);
    }
    if (values.size() != n) {
        throw DataError(path.string() + ": expected " + std::to_string(n) + " values, found " + std::to_string(values.size()));
    }
    ckpt.params = with_values(zero_params(ckpt.spec), std::move(values));
    return ckpt;
}

void write_dataset_cache(const std::filesystem::path& path, const Dataset& data) {
    data.validate();
    const Json header{{"format", kDatasetFormat},
                      {"rows", data.size()},
                      {"cols", data.width()},
                      {"num_classes", data.num_classes},
                      {"meta", meta_json(data.meta)}};
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << header.dump() << '\n';
    out.write(reinterpret_cast<const char*>(data.features.data()),
              static_cast<std::streamsize>(sizeof(double) * data.features.size()));
    for (int label : data.labels) {
        const auto v = static_cast<std::int32_t>(label);
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    if (!out) throw DataError("write failed for " + path.string());
}

Dataset read_dataset_cache(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset cache " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": empty dataset cache");
    const Json h = parse_header(line, path);
    if (h.value("format", "") != kDatasetFormat) throw DataError(path.string() + ": not a dataset cache");

    Dataset d;
    std::size_t rows = 0, cols = 0;
    try {
        rows = h.at("rows").get<std::size_t>();
        cols = h.at("cols").get<std::size_t>();
        d.num_classes = h.at("num_classes").get<std::size_t>();
        d.meta = meta_from_json(h.at("meta"));
    } catch (const Json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    d.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(d.features.data()), static_cast<std::streamsize>(sizeof(double) * rows * cols));
    d.labels.resize(rows);
    for (auto& label : d.labels) {
        std::int32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof v);
        label = v;
    }
    if (!in) throw DataError(path.string() + ": truncated payload");
    if (in.peek() != std::char_traits<char>::eof()) throw DataError(path.string() + ": trailing bytes after payload");
    d.validate();
    return d;
}

Json log_volume_json(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double log_volume_from_json(const Json& j) {
    return j.is_null() ? -std::numeric_limits<double>::infinity() : j.get<double>();
}

Json to_json(const VolumeEstimate& est, bool with_radii) {
    Json j{{"n_params", est.n_params},
           {"threshold", est.threshold},
           {"directions", est.directions},
           {"log_volume", log_volume_json(est.log_volume)},
           {"collapsed", est.collapsed()},
           {"base_loss", std::isfinite(est.base_loss) ? Json(est.base_loss) : Json(nullptr)},
           {"censored", est.censored_count()},
           {"censored_fraction", est.censored_fraction()},
           {"landscape", est.landscape_dataset_id}};
    if (!est.radii.empty()) {
        const RadiiSummary s = summarize_radii(est);
        j["radii_summary"] = {{"min", s.min}, {"max", s.max}, {"mean", s.mean}, {"median", s.median}};
    }
    if (with_radii) {
        std::vector<double> r, ext;
        std::vector<bool> cens;
        for (const auto& x : est.radii) {
            r.push_back(x.radius);
            ext.push_back(x.extent());
            cens.push_back(x.censored);
        }
        j["radii"] = r;
        j["extents"] = ext;
        j["censored_flags"] = cens;
    }
    return j;
}

std::string radii_csv(const VolumeEstimate& est) {
    std::string out = "index,radius,extent,censored,crossing_step\n";
    for (const auto& r : est.radii) {
        out += std::to_string(r.direction_index) + "," + format_double(r.radius) + "," + format_double(r.extent()) + "," +
               (r.censored ? "1" : "0") + "," + std::to_string(r.crossing_step) + "\n";
    }
    return out;
}

std::string histogram_csv(const std::vector<HistogramBin>& bins) {
    std::string out = "lo,hi,count,censored\n";
    for (const auto& b : bins) {
        out += format_double(b.lo) + "," + format_double(b.hi) + "," + std::to_string(b.count) + "," +
               std::to_string(b.censored) + "\n";
    }
    return out;
}

}  // namespace basinvol
