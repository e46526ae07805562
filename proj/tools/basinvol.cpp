#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "basinvol/config.hpp"
#include "basinvol/datasets.hpp"
#include "basinvol/error.hpp"
#include "basinvol/experiments.hpp"
#include "basinvol/persist.hpp"

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kPartial = 4 };

struct ExperimentArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string output_dir;
    bool force = false;
    bool print_config = false;
};

void add_experiment_options(CLI::App* cmd, ExperimentArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "JSON experiment config")->check(CLI::ExistingFile);
    cmd->add_option("--set", args.overrides, "Override a field, e.g. --set mc.directions=50")->take_all();
    cmd->add_option("-o,--output", args.output_dir, "Output directory (default: $BASINVOL_OUTPUT_ROOT/<kind>-<hash>)");
    cmd->add_flag("--force", args.force, "Overwrite an existing result");
    cmd->add_flag("--print-config", args.print_config, "Print the resolved config and exit");
}

int run_kind(std::optional<basinvol::ExperimentKind> kind, const ExperimentArgs& args) {
    using namespace basinvol;
    Json doc = args.config_path.empty() ? Json::object() : load_json_file(args.config_path);
    for (const auto& o : args.overrides) apply_override(doc, o);
    if (!args.output_dir.empty()) doc["output"]["dir"] = args.output_dir;
    if (args.force) doc["output"]["force"] = true;
    const ExperimentConfig cfg = parse_config(doc, kind);
    if (args.print_config) {
        std::cout << to_json(resolve_config(cfg)).dump(2) << "\n";
        return kOk;
    }
    const RunOutcome out = run_experiment(cfg, output_root_from_env());
    const auto flagged = out.result["flagged"].get<std::size_t>();
    std::cout << to_string(cfg.kind) << ": wrote " << out.dir.string() << " (" << flagged << " flagged, "
              << out.result["timing"]["wall_seconds"].get<double>() << " s)\n";
    return out.partial ? kPartial : kOk;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace basinvol;
    CLI::App app{"Monte Carlo basin volumes of small MLP minima"};
    app.require_subcommand(1);
    app.set_version_flag("--version", BASINVOL_VERSION);

    std::vector<std::pair<CLI::App*, ExperimentKind>> kinds;
    std::vector<ExperimentArgs> kind_args(9);
    const std::pair<const char*, ExperimentKind> names[] = {
        {"train", ExperimentKind::train},
        {"volume", ExperimentKind::volume},
        {"poison-scan", ExperimentKind::poison_scan},
        {"data-scan", ExperimentKind::data_scan},
        {"grok", ExperimentKind::grok},
        {"oracle", ExperimentKind::oracle},
        {"fit", ExperimentKind::fit},
        {"slice", ExperimentKind::slice},
        {"imbalance", ExperimentKind::imbalance},
    };
    for (std::size_t i = 0; i < 9; ++i) {
        auto* cmd = app.add_subcommand(names[i].first, "Run a " + to_string(names[i].second) + " experiment");
        add_experiment_options(cmd, kind_args[i]);
        kinds.emplace_back(cmd, names[i].second);
    }

    ExperimentArgs run_args;
    auto* run_cmd = app.add_subcommand("run", "Run the experiment kind named in the config");
    add_experiment_options(run_cmd, run_args);
    run_cmd->get_option("--config")->required();

    std::string source = "swiss_roll", out_path, images, labels;
    std::size_t n = 2000, modulus = 97;
    double noise = 0.1;
    std::uint64_t seed = 0;
    auto* gen = app.add_subcommand("gen-data", "Write a dataset cache file");
    gen->add_option("--source", source, "swiss_roll, modulo or idx")->check(CLI::IsMember({"swiss_roll", "modulo", "idx"}));
    gen->add_option("-n,--rows", n, "Swiss roll rows");
    gen->add_option("--noise", noise, "Swiss roll noise scale");
    gen->add_option("--seed", seed, "Generation seed");
    gen->add_option("--modulus", modulus, "Modulus for the modulo task");
    gen->add_option("--images", images, "IDX image file")->check(CLI::ExistingFile);
    gen->add_option("--labels", labels, "IDX label file")->check(CLI::ExistingFile);
    gen->add_option("--out", out_path, "Cache file to write")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            Dataset d;
            if (source == "swiss_roll") {
                d = gen_swiss_roll(n, noise, seed);
            } else if (source == "modulo") {
                d = gen_modulo(modulus);
            } else {
                if (images.empty() || labels.empty()) throw ConfigError("--images", "idx source needs --images and --labels");
                d = load_idx(images, labels);
            }
            write_dataset_cache(out_path, d);
            std::cout << "gen-data: wrote " << d.size() << " rows x " << d.width() << " to " << out_path << "\n";
            return kOk;
        }
        if (*run_cmd) return run_kind(std::nullopt, run_args);
        for (std::size_t i = 0; i < kinds.size(); ++i) {
            if (*kinds[i].first) return run_kind(kinds[i].second, kind_args[i]);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kFailure;
}
