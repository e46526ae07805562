#include "basinvol/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <unordered_set>

#include "basinvol/error.hpp"
#include "basinvol/rng.hpp"

namespace basinvol {

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void standardize(Dataset& ds) {
    const auto rows = ds.features.rows();
    const auto cols = ds.features.cols();
    ds.meta.feature_shift.assign(cols, 0.0);
    ds.meta.feature_scale.assign(cols, 1.0);
    for (Eigen::Index c = 0; c < cols; ++c) {
        double mean = 0.0;
        for (Eigen::Index r = 0; r < rows; ++r) mean += ds.features(r, c);
        mean /= static_cast<double>(rows);
        double var = 0.0;
        for (Eigen::Index r = 0; r < rows; ++r) {
            const double d = ds.features(r, c) - mean;
            var += d * d;
        }
        var /= static_cast<double>(rows);
        const double scale = var > 0.0 ? std::sqrt(var) : 1.0;
        for (Eigen::Index r = 0; r < rows; ++r) ds.features(r, c) = (ds.features(r, c) - mean) / scale;
        ds.meta.feature_shift[c] = mean;
        ds.meta.feature_scale[c] = scale;
    }
}

std::uint32_t read_be32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError(what + ": truncated header");
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

struct IdxPayload {
    std::vector<std::uint32_t> dims;
    std::vector<unsigned char> bytes;
};

IdxPayload read_idx(const std::filesystem::path& path, std::uint32_t expected_magic) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open IDX file '" + path.string() + "'");
    const std::string what = "IDX file '" + path.string() + "'";
    const std::uint32_t magic = read_be32(in, what);
    if (magic != expected_magic) {
        throw DataError(what + ": bad magic " + std::to_string(magic) + ", expected " + std::to_string(expected_magic));
    }
    // Magic 0x00000803 / 0x00000801: unsigned byte data, 3 or 1 dimensions.
    const std::uint32_t ndims = magic & 0xFFu;
    IdxPayload out;
    std::size_t total = 1;
    for (std::uint32_t d = 0; d < ndims; ++d) {
        out.dims.push_back(read_be32(in, what));
        total *= out.dims.back();
    }
    out.bytes.resize(total);
    if (total > 0 && !in.read(reinterpret_cast<char*>(out.bytes.data()), static_cast<std::streamsize>(total))) {
        throw DataError(what + ": truncated payload (expected " + std::to_string(total) + " bytes)");
    }
    return out;
}

}  // namespace

void Dataset::validate() const {
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw DataError("dataset '" + meta.id + "': " + std::to_string(features.rows()) + " feature rows but " +
                        std::to_string(labels.size()) + " labels");
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
            throw DataError("dataset '" + meta.id + "': label " + std::to_string(y) + " outside [0, " +
                            std::to_string(num_classes) + ")");
        }
    }
    if (!meta.row_ids.empty() && meta.row_ids.size() != labels.size()) throw DataError("dataset '" + meta.id + "': row_ids size mismatch");
    if (!meta.poisoned.empty() && meta.poisoned.size() != labels.size()) throw DataError("dataset '" + meta.id + "': poison flags size mismatch");
}

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(num_classes, 0);
    for (int y : labels) ++counts[static_cast<std::size_t>(y)];
    return counts;
}

std::size_t Dataset::poisoned_count() const {
    return static_cast<std::size_t>(std::count(meta.poisoned.begin(), meta.poisoned.end(), std::uint8_t{1}));
}

std::array<double, 2> swiss_roll_point(double t, int cls) {
    const double phase = t + cls * std::numbers::pi;
    return {t * std::cos(phase), t * std::sin(phase)};
}

Dataset gen_swiss_roll(std::size_t n, double noise, std::uint64_t seed) {
    if (n < 2) throw DomainError("gen_swiss_roll: need at least 2 samples");
    if (!(noise >= 0.0)) throw DomainError("gen_swiss_roll: noise must be non-negative");
    CounterRng rng(seed, Stream::swiss_roll);
    Dataset ds;
    ds.features.resize(static_cast<Eigen::Index>(n), 2);
    ds.labels.resize(n);
    ds.num_classes = 2;
    for (std::size_t i = 0; i < n; ++i) {
        const int cls = static_cast<int>(i % 2);
        const double t = rng.uniform(kSwissRollTMin, kSwissRollTMax);
        auto p = swiss_roll_point(t, cls);
        if (noise > 0.0) {
            p[0] += noise * rng.normal();
            p[1] += noise * rng.normal();
        }
        ds.features(static_cast<Eigen::Index>(i), 0) = p[0];
        ds.features(static_cast<Eigen::Index>(i), 1) = p[1];
        ds.labels[i] = cls;
    }
    standardize(ds);
    ds.meta.source = "swiss_roll";
    ds.meta.seed = seed;
    ds.meta.transform = "generate";
    ds.meta.id = "swiss_roll(n=" + std::to_string(n) + ",noise=" + fmt_double(noise) + ",seed=" + std::to_string(seed) + ")";
    ds.meta.row_ids.resize(n);
    std::iota(ds.meta.row_ids.begin(), ds.meta.row_ids.end(), std::size_t{0});
    ds.meta.poisoned.assign(n, 0);
    return ds;
}

Dataset gen_modulo(std::size_t p) {
    if (p < 2) throw DomainError("gen_modulo: modulus must be at least 2");
    Dataset ds;
    const std::size_t n = p * p;
    ds.features = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(2 * p));
    ds.labels.resize(n);
    ds.num_classes = p;
    for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = 0; b < p; ++b) {
            const auto row = static_cast<Eigen::Index>(a * p + b);
            ds.features(row, static_cast<Eigen::Index>(a)) = 1.0;
            ds.features(row, static_cast<Eigen::Index>(p + b)) = 1.0;
            ds.labels[a * p + b] = static_cast<int>((a + b) % p);
        }
    }
    ds.meta.source = "modulo";
    ds.meta.seed = 0;
    ds.meta.transform = "generate";
    ds.meta.id = "modulo(p=" + std::to_string(p) + ")";
    ds.meta.row_ids.resize(n);
    std::iota(ds.meta.row_ids.begin(), ds.meta.row_ids.end(), std::size_t{0});
    ds.meta.poisoned.assign(n, 0);
    return ds;
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    const IdxPayload images = read_idx(images_path, 2051);
    const IdxPayload labels = read_idx(labels_path, 2049);
    if (images.dims.size() != 3) throw DataError("IDX images must have 3 dimensions");
    if (labels.dims.size() != 1) throw DataError("IDX labels must have 1 dimension");
    const std::size_t n = images.dims[0];
    if (labels.dims[0] != n) {
        throw DataError("IDX count mismatch: " + std::to_string(n) + " images vs " + std::to_string(labels.dims[0]) + " labels");
    }
    const std::size_t width = std::size_t{images.dims[1]} * images.dims[2];
    Dataset ds;
    ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < width; ++j) {
            ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = images.bytes[i * width + j] / 255.0;
        }
    }
    ds.labels.assign(labels.bytes.begin(), labels.bytes.end());
    int max_label = 0;
    for (int y : ds.labels) max_label = std::max(max_label, y);
    ds.num_classes = n == 0 ? 0 : static_cast<std::size_t>(max_label) + 1;
    ds.meta.source = "idx:" + images_path.filename().string();
    ds.meta.transform = "load";
    ds.meta.id = "idx(" + images_path.filename().string() + ")";
    ds.meta.row_ids.resize(n);
    std::iota(ds.meta.row_ids.begin(), ds.meta.row_ids.end(), std::size_t{0});
    ds.meta.poisoned.assign(n, 0);
    return ds;
}

std::size_t SubsetSpec::resolve_count(std::size_t parent_size) const {
    if (count && fraction) throw DomainError("subset: give either count or fraction, not both");
    std::size_t n = parent_size - std::min(offset, parent_size);
    if (count) {
        n = *count;
    } else if (fraction) {
        if (!(*fraction >= 0.0 && *fraction <= 1.0)) throw DomainError("subset: fraction must lie in [0, 1]");
        n = static_cast<std::size_t>(std::llround(*fraction * static_cast<double>(parent_size)));
    }
    if (offset + n > parent_size) {
        throw DomainError("subset: requested " + std::to_string(n) + " rows at offset " + std::to_string(offset) +
                          " from a parent of " + std::to_string(parent_size));
    }
    return n;
}

std::vector<std::size_t> split_permutation(std::size_t n, std::uint64_t split_seed) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    CounterRng rng(split_seed, Stream::subset);
    // Forward Fisher-Yates: position i is fixed once visited.
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(perm[i], perm[j]);
    }
    return perm;
}

Dataset take_rows(const Dataset& parent, std::span<const std::size_t> indices, const std::string& transform) {
    Dataset out;
    out.num_classes = parent.num_classes;
    out.features.resize(static_cast<Eigen::Index>(indices.size()), parent.features.cols());
    out.labels.resize(indices.size());
    out.meta.row_ids.resize(indices.size());
    out.meta.poisoned.resize(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const std::size_t i = indices[k];
        if (i >= parent.size()) throw DimensionError("take_rows: index out of range");
        out.features.row(static_cast<Eigen::Index>(k)) = parent.features.row(static_cast<Eigen::Index>(i));
        out.labels[k] = parent.labels[i];
        out.meta.row_ids[k] = parent.meta.row_ids.empty() ? i : parent.meta.row_ids[i];
        out.meta.poisoned[k] = parent.meta.poisoned.empty() ? 0 : parent.meta.poisoned[i];
    }
    out.meta.source = parent.meta.source;
    out.meta.seed = parent.meta.seed;
    out.meta.parent_id = parent.meta.id;
    out.meta.transform = transform;
    out.meta.id = parent.meta.id + "/" + transform;
    out.meta.feature_shift = parent.meta.feature_shift;
    out.meta.feature_scale = parent.meta.feature_scale;
    return out;
}

Dataset subset(const Dataset& parent, const SubsetSpec& spec) {
    const std::size_t count = spec.resolve_count(parent.size());
    const auto perm = split_permutation(parent.size(), spec.split_seed);
    std::string transform = "subset(count=" + std::to_string(count) + ",offset=" + std::to_string(spec.offset) +
                            ",seed=" + std::to_string(spec.split_seed);

    std::vector<std::size_t> chosen;
    chosen.reserve(count);
    if (!spec.class_proportions) {
        chosen.assign(perm.begin() + static_cast<std::ptrdiff_t>(spec.offset),
                      perm.begin() + static_cast<std::ptrdiff_t>(spec.offset + count));
    } else {
        const auto& w = *spec.class_proportions;
        if (w.size() != parent.num_classes) {
            throw DomainError("subset: class_proportions has " + std::to_string(w.size()) + " entries for " +
                              std::to_string(parent.num_classes) + " classes");
        }
        double total = 0.0;
        for (double x : w) {
            if (!(x >= 0.0)) throw DomainError("subset: class proportions must be non-negative");
            total += x;
        }
        if (!(total > 0.0)) throw DomainError("subset: class proportions sum to zero");

        // Largest-remainder apportionment; ties go to the lower class index.
        std::vector<std::size_t> quota(w.size());
        std::vector<std::pair<double, std::size_t>> remainders;
        std::size_t assigned = 0;
        for (std::size_t c = 0; c < w.size(); ++c) {
            const double exact = static_cast<double>(count) * w[c] / total;
            quota[c] = static_cast<std::size_t>(std::floor(exact));
            assigned += quota[c];
            remainders.emplace_back(exact - static_cast<double>(quota[c]), c);
        }
        std::stable_sort(remainders.begin(), remainders.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        for (std::size_t k = 0; assigned < count; ++k, ++assigned) ++quota[remainders[k % remainders.size()].second];

        for (std::size_t k = spec.offset; k < perm.size() && chosen.size() < count; ++k) {
            const auto c = static_cast<std::size_t>(parent.labels[perm[k]]);
            if (quota[c] > 0) {
                --quota[c];
                chosen.push_back(perm[k]);
            }
        }
        for (std::size_t c = 0; c < quota.size(); ++c) {
            if (quota[c] > 0) {
                throw DomainError("subset: class " + std::to_string(c) + " exhausted with " + std::to_string(quota[c]) +
                                  " rows of its quota unfilled");
            }
        }
        transform += ",proportions=[";
        for (std::size_t c = 0; c < w.size(); ++c) transform += (c ? "," : "") + fmt_double(w[c]);
        transform += "]";
    }
    transform += ")";
    return take_rows(parent, chosen, transform);
}

Dataset poison(const Dataset& base, const Dataset& source, std::size_t n_poison, std::uint64_t seed) {
    if (n_poison > source.size()) {
        throw DomainError("poison: " + std::to_string(n_poison) + " poisoned rows requested but source has " +
                          std::to_string(source.size()));
    }
    if (base.width() != source.width() && n_poison > 0) throw DimensionError("poison: base and source widths differ");
    if (base.num_classes < 2) throw DomainError("poison: need at least two classes");
    if (base.meta.source == source.meta.source && base.meta.seed == source.meta.seed) {
        std::unordered_set<std::size_t> base_rows(base.meta.row_ids.begin(), base.meta.row_ids.end());
        for (std::size_t r : source.meta.row_ids) {
            if (base_rows.count(r)) throw DomainError("poison: source shares root row " + std::to_string(r) + " with base");
        }
    }
    if (n_poison == 0) return base;

    const auto perm = split_permutation(source.size(), mix_seed(seed, 0x9015011ull));
    CounterRng rng(seed, Stream::poison);
    Dataset out;
    out.num_classes = base.num_classes;
    out.features.resize(static_cast<Eigen::Index>(base.size() + n_poison), base.features.cols());
    out.features.topRows(static_cast<Eigen::Index>(base.size())) = base.features;
    out.labels = base.labels;
    out.meta = base.meta;
    if (out.meta.poisoned.empty()) out.meta.poisoned.assign(base.size(), 0);
    for (std::size_t k = 0; k < n_poison; ++k) {
        const std::size_t i = perm[k];
        out.features.row(static_cast<Eigen::Index>(base.size() + k)) = source.features.row(static_cast<Eigen::Index>(i));
        const auto shift = 1 + rng.below(base.num_classes - 1);
        out.labels.push_back(static_cast<int>((static_cast<std::size_t>(source.labels[i]) + shift) % base.num_classes));
        out.meta.row_ids.push_back(source.meta.row_ids.empty() ? i : source.meta.row_ids[i]);
        out.meta.poisoned.push_back(1);
    }
    out.meta.parent_id = base.meta.id;
    out.meta.transform = "poison(n=" + std::to_string(n_poison) + ",seed=" + std::to_string(seed) + ",source=" + source.meta.id + ")";
    out.meta.id = base.meta.id + "/" + out.meta.transform;
    return out;
}

}  // namespace basinvol
