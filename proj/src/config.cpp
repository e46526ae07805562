#include "basinvol/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "basinvol/error.hpp"

namespace basinvol {

namespace {

constexpr std::pair<ExperimentKind, const char*> kKinds[] = {
    {ExperimentKind::train, "train"},         {ExperimentKind::volume, "volume"},
    {ExperimentKind::poison_scan, "poison_scan"}, {ExperimentKind::data_scan, "data_scan"},
    {ExperimentKind::grok, "grok"},           {ExperimentKind::oracle, "oracle"},
    {ExperimentKind::fit, "fit"},             {ExperimentKind::slice, "slice"},
    {ExperimentKind::imbalance, "imbalance"},
};

void convert(const Json& j, const std::string& path, double& out) {
    if (!j.is_number()) throw ConfigError(path, "expected a number");
    out = j.get<double>();
}

void convert(const Json& j, const std::string& path, bool& out) {
    if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
    out = j.get<bool>();
}

void convert(const Json& j, const std::string& path, std::string& out) {
    if (!j.is_string()) throw ConfigError(path, "expected a string");
    out = j.get<std::string>();
}

void convert(const Json& j, const std::string& path, std::uint64_t& out) {
    if (j.is_number_unsigned()) {
        out = j.get<std::uint64_t>();
    } else if (j.is_number_integer() && j.get<std::int64_t>() >= 0) {
        out = static_cast<std::uint64_t>(j.get<std::int64_t>());
    } else {
        throw ConfigError(path, "expected a non-negative integer");
    }
}

void convert(const Json& j, const std::string& path, ScalingPoint& out) {
    if (!j.is_object()) throw ConfigError(path, "expected {dataset_size, log_volume}");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() == "dataset_size") {
            convert(it.value(), path + ".dataset_size", out.dataset_size);
        } else if (it.key() == "log_volume") {
            convert(it.value(), path + ".log_volume", out.log_volume);
        } else {
            throw ConfigError(path + "." + it.key(), "unknown field");
        }
    }
}

template <class T>
void convert(const Json& j, const std::string& path, std::vector<T>& out) {
    if (!j.is_array()) throw ConfigError(path, "expected a list");
    out.clear();
    for (std::size_t i = 0; i < j.size(); ++i) {
        T v{};
        convert(j[i], path + "[" + std::to_string(i) + "]", v);
        out.push_back(std::move(v));
    }
}

template <class T>
void convert(const Json& j, const std::string& path, std::optional<T>& out) {
    if (j.is_null()) {
        out.reset();
        return;
    }
    T v{};
    convert(j, path, v);
    out = std::move(v);
}

// Reads fields of one object and rejects keys nobody asked for.
class Block {
public:
    Block(const Json& doc, std::string path) : path_(std::move(path)) {
        if (!doc.is_null() && !doc.is_object()) throw ConfigError(path_, "expected an object");
        if (doc.is_object()) doc_ = &doc;
    }

    template <class T>
    bool get(const std::string& key, T& out) {
        seen_.insert(key);
        if (!doc_ || !doc_->contains(key)) return false;
        convert(doc_->at(key), sub(key), out);
        return true;
    }

    bool has(const std::string& key) const { return doc_ && doc_->contains(key); }

    const Json& child(const std::string& key) {
        seen_.insert(key);
        static const Json null_json;
        return has(key) ? doc_->at(key) : null_json;
    }

    std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        if (!doc_) return;
        for (auto it = doc_->begin(); it != doc_->end(); ++it) {
            if (!seen_.count(it.key())) throw ConfigError(sub(it.key()), "unknown field");
        }
    }

private:
    const Json* doc_ = nullptr;
    std::string path_;
    std::set<std::string> seen_;
};

// Runs `check` and re-raises library validation errors as field errors.
template <class Fn>
void checked(const std::string& field, Fn&& check) {
    try {
        check();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(field, e.what());
    }
}

void read_model(Block b, NetworkSpec& spec) {
    b.get("input_dim", spec.input_dim);
    b.get("hidden_dims", spec.hidden_dims);
    b.get("output_dim", spec.output_dim);
    std::string s;
    if (b.get("activation", s)) checked(b.sub("activation"), [&] { spec.activation = activation_from_string(s); });
    if (b.get("loss", s)) checked(b.sub("loss"), [&] { spec.loss_kind = loss_kind_from_string(s); });
    b.finish();
}

void read_optimizer(Block b, OptimizerConfig& opt) {
    std::string s;
    if (b.get("kind", s)) {
        OptimizerKind k{};
        checked(b.sub("kind"), [&] { k = optimizer_kind_from_string(s); });
        opt = OptimizerConfig::defaults(k);
    }
    b.get("learning_rate", opt.learning_rate);
    b.get("beta1", opt.beta1);
    b.get("beta2", opt.beta2);
    b.get("epsilon", opt.epsilon);
    b.get("weight_decay", opt.weight_decay);
    b.get("rho", opt.rho);
    b.finish();
}

void read_search(Block& b, RadiusSearch& search) {
    b.get("c_max", search.c_max);
    b.get("scan_steps", search.scan_steps);
    b.get("bisect_iters", search.bisect_iters);
}

}  // namespace

std::string to_string(ExperimentKind k) {
    for (const auto& [kind, name] : kKinds) {
        if (kind == k) return name;
    }
    return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
    std::string norm = s;
    for (char& c : norm) {
        if (c == '-') c = '_';
    }
    for (const auto& [kind, name] : kKinds) {
        if (norm == name) return kind;
    }
    throw ConfigError("kind", "unknown experiment kind '" + s + "'");
}

ExperimentConfig default_config(ExperimentKind kind) {
    ExperimentConfig cfg;
    cfg.kind = kind;
    cfg.model.hidden_dims = {32, 32, 32, 32, 32};
    cfg.train.epochs = 3000;
    cfg.train.batch_size = 32;
    cfg.train.target_loss = 0.01;
    cfg.mc.search.c_max = 0.1;
    cfg.data.train_count = 400;

    switch (kind) {
        case ExperimentKind::poison_scan:
            cfg.data.noise = 0.3;
            cfg.train.target_loss = 0.02;
            cfg.train.epochs = 4000;  // 80 mislabeled points need this long to fit the base data
            break;
        case ExperimentKind::data_scan:
            cfg.data.train_count.reset();
            break;
        case ExperimentKind::grok:
            cfg.data.source = "modulo";
            cfg.data.train_count.reset();
            cfg.data.train_fraction = 0.33;
            cfg.model.hidden_dims = {128};
            cfg.model.loss_kind = LossKind::mse_onehot;
            cfg.train.epochs = 5000;
            cfg.train.batch_size = 64;
            cfg.train.target_loss.reset();
            cfg.train.checkpoint_epochs = {500, 1000, 2000, 5000};
            cfg.mc.search.c_max = 1.0;
            break;
        case ExperimentKind::imbalance:
            cfg.data.train_count.reset();
            cfg.data.test_count = 1000;
            break;
        default:
            break;
    }
    cfg.mc.threshold = cfg.model.loss_kind == LossKind::mse_onehot ? 0.01 : 0.1;
    return cfg;
}

ExperimentConfig parse_config(const Json& doc, std::optional<ExperimentKind> kind) {
    Block root(doc, "");
    std::string kind_name;
    if (root.get("kind", kind_name) && !kind) kind = experiment_kind_from_string(kind_name);
    if (!kind) throw ConfigError("kind", "missing experiment kind");
    ExperimentConfig cfg = default_config(*kind);

    {
        Block b(root.child("data"), "data");
        auto& d = cfg.data;
        b.get("source", d.source);
        b.get("pool_size", d.pool_size);
        b.get("noise", d.noise);
        b.get("data_seed", d.data_seed);
        b.get("resample_per_split", d.resample_per_split);
        b.get("modulus", d.modulus);
        b.get("train_images", d.train_images);
        b.get("train_labels", d.train_labels);
        b.get("test_images", d.test_images);
        b.get("test_labels", d.test_labels);
        b.get("cache", d.cache);
        // Setting one of count/fraction replaces the other's default.
        const bool has_count = b.get("train_count", d.train_count);
        const bool has_fraction = b.get("train_fraction", d.train_fraction);
        if (has_count && !has_fraction) d.train_fraction.reset();
        if (has_fraction && !has_count) d.train_count.reset();
        b.get("test_count", d.test_count);
        b.finish();
    }
    read_model(Block(root.child("model"), "model"), cfg.model);
    read_optimizer(Block(root.child("optimizer"), "optimizer"), cfg.optimizer);
    {
        Block b(root.child("train"), "train");
        b.get("epochs", cfg.train.epochs);
        b.get("batch_size", cfg.train.batch_size);
        b.get("target_loss", cfg.train.target_loss);
        b.get("checkpoint_epochs", cfg.train.checkpoint_epochs);
        b.finish();
    }
    {
        Block b(root.child("mc"), "mc");
        cfg.mc.threshold = cfg.model.loss_kind == LossKind::mse_onehot ? 0.01 : 0.1;
        b.get("directions", cfg.mc.directions);
        b.get("threshold", cfg.mc.threshold);
        read_search(b, cfg.mc.search);
        b.get("workers", cfg.mc.workers);
        b.get("filter_normalize", cfg.mc.filter_normalize);
        b.finish();
    }
    {
        Block b(root.child("seeds"), "seeds");
        b.get("model_seeds", cfg.seeds.model_seeds);
        b.get("split_seeds", cfg.seeds.split_seeds);
        b.get("mc_seed", cfg.seeds.mc_seed);
        b.get("pairing", cfg.seeds.pairing);
        cfg.mc.seed = cfg.seeds.mc_seed;
        b.finish();
    }
    root.get("workers", cfg.workers);
    {
        Block b(root.child("output"), "output");
        b.get("dir", cfg.output.dir);
        b.get("force", cfg.output.force);
        b.finish();
    }
    {
        Block b(root.child("volume"), "volume");
        b.get("checkpoint", cfg.volume.checkpoint);
        b.get("landscape", cfg.volume.landscape);
        b.get("histogram_bins", cfg.volume.histogram_bins);
        b.finish();
    }
    {
        Block b(root.child("poison"), "poison");
        b.get("counts", cfg.poison.counts);
        b.finish();
    }
    {
        Block b(root.child("data_scan"), "data_scan");
        b.get("sizes", cfg.data_scan.sizes);
        b.get("fit_mode", cfg.data_scan.fit_mode);
        b.finish();
    }
    {
        Block b(root.child("oracle"), "oracle");
        b.get("s", cfg.oracle.s);
        b.get("b", cfg.oracle.b);
        b.get("directions", cfg.oracle.directions);
        b.get("grid_resolution", cfg.oracle.grid_resolution);
        read_search(b, cfg.oracle.search);
        b.finish();
    }
    {
        Block b(root.child("fit"), "fit");
        b.get("result", cfg.fit.result);
        b.get("points", cfg.fit.points);
        b.get("n_params", cfg.fit.n_params);
        b.get("mode", cfg.fit.mode);
        b.finish();
    }
    {
        Block b(root.child("slice"), "slice");
        b.get("mode", cfg.slice.mode);
        b.get("half_width", cfg.slice.half_width);
        b.get("steps", cfg.slice.steps);
        b.finish();
    }
    {
        Block b(root.child("imbalance"), "imbalance");
        b.get("count", cfg.imbalance.count);
        b.get("proportions", cfg.imbalance.proportions);
        b.finish();
    }
    root.finish();
    cfg.validate();
    return cfg;
}

void ExperimentConfig::validate() const {
    static const std::set<std::string> sources{"swiss_roll", "modulo", "idx", "cache"};
    if (!sources.count(data.source)) throw ConfigError("data.source", "expected swiss_roll, modulo, idx or cache");
    if (data.source == "swiss_roll") {
        if (data.pool_size < 2) throw ConfigError("data.pool_size", "need at least 2 rows");
        if (!(data.noise >= 0.0)) throw ConfigError("data.noise", "must be non-negative");
    }
    if (data.source == "modulo" && data.modulus < 2) throw ConfigError("data.modulus", "must be at least 2");
    if (data.source == "idx" && (data.train_images.empty() || data.train_labels.empty())) {
        throw ConfigError("data.train_images", "idx source needs train_images and train_labels");
    }
    if (data.test_images.empty() != data.test_labels.empty()) {
        throw ConfigError("data.test_images", "give both test_images and test_labels or neither");
    }
    if (data.source == "cache" && data.cache.empty()) throw ConfigError("data.cache", "cache source needs a file path");
    if (data.train_count && data.train_fraction) throw ConfigError("data.train_count", "give train_count or train_fraction, not both");
    if (data.train_fraction && !(*data.train_fraction > 0.0 && *data.train_fraction <= 1.0)) {
        throw ConfigError("data.train_fraction", "must lie in (0, 1]");
    }
    if (data.train_count && *data.train_count == 0) throw ConfigError("data.train_count", "must be positive");

    for (std::size_t d : model.hidden_dims) {
        if (d == 0) throw ConfigError("model.hidden_dims", "widths must be positive");
    }
    if (model.hidden_dims.empty()) throw ConfigError("model.hidden_dims", "need at least one hidden layer");
    checked("optimizer", [&] { optimizer.validate(); });
    checked("train", [&] { train.validate(); });
    if (mc.directions == 0) throw ConfigError("mc.directions", "must be positive");
    if (!(mc.threshold > 0.0)) throw ConfigError("mc.threshold", "must be positive");
    checked("mc", [&] { mc.search.validate(); });
    if (seeds.model_seeds.empty()) throw ConfigError("seeds.model_seeds", "must not be empty");
    if (seeds.split_seeds.empty()) throw ConfigError("seeds.split_seeds", "must not be empty");
    if (seeds.pairing != "grid" && seeds.pairing != "zip") throw ConfigError("seeds.pairing", "expected grid or zip");
    if (seeds.pairing == "zip" && seeds.model_seeds.size() != seeds.split_seeds.size()) {
        throw ConfigError("seeds.pairing", "zip needs model_seeds and split_seeds of equal length");
    }

    static const std::set<std::string> landscapes{"train", "test", "pool"};
    if (!landscapes.count(volume.landscape)) throw ConfigError("volume.landscape", "expected train, test or pool");
    if (volume.histogram_bins == 0) throw ConfigError("volume.histogram_bins", "must be positive");
    if (kind == ExperimentKind::poison_scan && poison.counts.empty()) throw ConfigError("poison.counts", "must not be empty");
    if (kind == ExperimentKind::data_scan) {
        if (data_scan.sizes.empty()) throw ConfigError("data_scan.sizes", "must not be empty");
        for (std::size_t s : data_scan.sizes) {
            if (s == 0) throw ConfigError("data_scan.sizes", "sizes must be positive");
        }
    }
    if (data_scan.fit_mode != "mean" && data_scan.fit_mode != "per_seed") throw ConfigError("data_scan.fit_mode", "expected mean or per_seed");
    if (kind == ExperimentKind::oracle) {
        if (oracle.s.empty()) throw ConfigError("oracle.s", "must not be empty");
        if (oracle.b.empty()) throw ConfigError("oracle.b", "must not be empty");
        for (double s : oracle.s) {
            if (!(s > 0.0 && s < 1.0)) throw ConfigError("oracle.s", "values must lie in (0, 1)");
        }
        for (double b : oracle.b) {
            if (!(b > 0.0)) throw ConfigError("oracle.b", "values must be positive");
        }
        if (oracle.directions == 0) throw ConfigError("oracle.directions", "must be positive");
        if (oracle.grid_resolution < 10) throw ConfigError("oracle.grid_resolution", "must be at least 10");
        checked("oracle", [&] { oracle.search.validate(); });
    }
    if (kind == ExperimentKind::fit) {
        if (fit.result.empty() == fit.points.empty()) throw ConfigError("fit.result", "give either a result file or explicit points");
        if (!fit.points.empty() && fit.n_params == 0) throw ConfigError("fit.n_params", "required with explicit points");
    }
    if (fit.mode != "mean" && fit.mode != "per_seed") throw ConfigError("fit.mode", "expected mean or per_seed");
    if (slice.mode != "random" && slice.mode != "plane") throw ConfigError("slice.mode", "expected random or plane");
    if (!(slice.half_width >= 0.0)) throw ConfigError("slice.half_width", "must be non-negative");
    if (slice.steps == 0) throw ConfigError("slice.steps", "must be positive");
    if (kind == ExperimentKind::slice && slice.mode == "plane" && seeds.model_seeds.size() < 3) {
        throw ConfigError("seeds.model_seeds", "plane slices need three model seeds");
    }
    if (kind == ExperimentKind::imbalance) {
        if (imbalance.count == 0) throw ConfigError("imbalance.count", "must be positive");
        if (imbalance.proportions.empty()) throw ConfigError("imbalance.proportions", "must not be empty");
    }
}

Json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file " + path.string());
    try {
        return Json::parse(in, nullptr, true, true);
    } catch (const Json::parse_error& e) {
        throw ConfigError("", path.string() + ": " + e.what());
    }
}

void apply_override(Json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "override must look like key.path=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    Json* node = &doc;
    std::size_t start = 0;
    for (;;) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError(key, "empty path component");
        if (!node->is_object()) {
            if (!node->is_null()) throw ConfigError(key, "'" + part + "' is inside a non-object value");
            *node = Json::object();
        }
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    *node = std::move(value);
}

Json to_json(const NetworkSpec& spec) {
    return Json{{"input_dim", spec.input_dim},
                {"hidden_dims", spec.hidden_dims},
                {"output_dim", spec.output_dim},
                {"activation", to_string(spec.activation)},
                {"loss", to_string(spec.loss_kind)}};
}

NetworkSpec network_spec_from_json(const Json& j) {
    NetworkSpec spec;
    read_model(Block(j, "spec"), spec);
    return spec;
}

namespace {

Json optional_json(const auto& v) { return v ? Json(*v) : Json(nullptr); }

Json search_json(Json j, const RadiusSearch& s) {
    j["c_max"] = s.c_max;
    j["scan_steps"] = s.scan_steps;
    j["bisect_iters"] = s.bisect_iters;
    return j;
}

}  // namespace

Json to_json(const ExperimentConfig& cfg) {
    Json j;
    j["kind"] = to_string(cfg.kind);
    const auto& d = cfg.data;
    j["data"] = {{"source", d.source},
                 {"pool_size", d.pool_size},
                 {"noise", d.noise},
                 {"data_seed", d.data_seed},
                 {"resample_per_split", d.resample_per_split},
                 {"modulus", d.modulus},
                 {"train_images", d.train_images},
                 {"train_labels", d.train_labels},
                 {"test_images", d.test_images},
                 {"test_labels", d.test_labels},
                 {"cache", d.cache},
                 {"train_count", optional_json(d.train_count)},
                 {"train_fraction", optional_json(d.train_fraction)},
                 {"test_count", optional_json(d.test_count)}};
    j["model"] = to_json(cfg.model);
    const auto& o = cfg.optimizer;
    j["optimizer"] = {{"kind", to_string(o.kind)},   {"learning_rate", o.learning_rate}, {"beta1", o.beta1},
                      {"beta2", o.beta2},            {"epsilon", o.epsilon},             {"weight_decay", o.weight_decay},
                      {"rho", o.rho}};
    j["train"] = {{"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"target_loss", optional_json(cfg.train.target_loss)},
                  {"checkpoint_epochs", cfg.train.checkpoint_epochs}};
    j["mc"] = search_json({{"directions", cfg.mc.directions},
                           {"threshold", cfg.mc.threshold},
                           {"workers", cfg.mc.workers},
                           {"filter_normalize", cfg.mc.filter_normalize}},
                          cfg.mc.search);
    j["seeds"] = {{"model_seeds", cfg.seeds.model_seeds},
                  {"split_seeds", cfg.seeds.split_seeds},
                  {"mc_seed", cfg.seeds.mc_seed},
                  {"pairing", cfg.seeds.pairing}};
    j["workers"] = cfg.workers;
    j["output"] = {{"dir", cfg.output.dir}, {"force", cfg.output.force}};
    j["volume"] = {{"checkpoint", cfg.volume.checkpoint},
                   {"landscape", cfg.volume.landscape},
                   {"histogram_bins", cfg.volume.histogram_bins}};
    j["poison"] = {{"counts", cfg.poison.counts}};
    j["data_scan"] = {{"sizes", cfg.data_scan.sizes}, {"fit_mode", cfg.data_scan.fit_mode}};
    j["oracle"] = search_json({{"s", cfg.oracle.s},
                               {"b", cfg.oracle.b},
                               {"directions", cfg.oracle.directions},
                               {"grid_resolution", cfg.oracle.grid_resolution}},
                              cfg.oracle.search);
    Json pts = Json::array();
    for (const auto& p : cfg.fit.points) pts.push_back({{"dataset_size", p.dataset_size}, {"log_volume", p.log_volume}});
    j["fit"] = {{"result", cfg.fit.result}, {"points", pts}, {"n_params", cfg.fit.n_params}, {"mode", cfg.fit.mode}};
    j["slice"] = {{"mode", cfg.slice.mode}, {"half_width", cfg.slice.half_width}, {"steps", cfg.slice.steps}};
    j["imbalance"] = {{"count", cfg.imbalance.count}, {"proportions", cfg.imbalance.proportions}};
    return j;
}

std::string config_hash(const ExperimentConfig& cfg) {
    Json j = to_json(cfg);
    j.erase("output");
    // Worker counts change scheduling only, never results.
    j.erase("workers");
    j["mc"].erase("workers");
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace basinvol
