// Command-line front end: validate configs and run preset experiments.
//
//   additive_lab run <config.json> [overrides]
//   additive_lab run --preset figure1 --seed 7 --out-dir runs/f1
//   additive_lab validate <config.json>
//
// Exit codes: 0 success, 2 config error, 3 numeric failure, 4 acceptance
// thresholds failed.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "additive/runner.hpp"
#include "json.hpp"

namespace {

struct Overrides {
    std::optional<std::string> preset;
    std::optional<long> seed;
    std::optional<std::string> out_dir;
    std::optional<int> d, M, J, p, q, r;
    std::optional<std::string> activation;
    std::optional<double> eta0, lambda;
    std::optional<long> T1, T2, snapshot_every;
};

void add_override_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--preset", o.preset, "preset name (when no config file is given)");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--out-dir", o.out_dir, "output directory");
    cmd->add_option("--d", o.d, "input dimension");
    cmd->add_option("--M", o.M, "number of additive tasks");
    cmd->add_option("--J", o.J, "network width");
    cmd->add_option("--p", o.p, "link information exponent");
    cmd->add_option("--q", o.q, "link degree");
    cmd->add_option("--activation", o.activation, "relu | randomized_poly");
    cmd->add_option("--eta0", o.eta0, "initial step size");
    cmd->add_option("--T1", o.T1, "first-phase steps");
    cmd->add_option("--T2", o.T2, "second-phase sample count");
    cmd->add_option("--r", o.r, "regularizer order (1 or 2)");
    cmd->add_option("--lambda", o.lambda, "regularization strength (negative = grid)");
    cmd->add_option("--snapshot-every", o.snapshot_every, "alignment trace cadence");
}

nlohmann::json apply_overrides(nlohmann::json base, const Overrides& o) {
    if (o.preset) base["preset"] = *o.preset;
    if (o.seed) base["seed"] = *o.seed;
    if (o.out_dir) base["out_dir"] = *o.out_dir;
    if (o.d) base["target"]["d"] = *o.d;
    if (o.M) base["target"]["M"] = *o.M;
    if (o.p) base["target"]["p"] = *o.p;
    if (o.q) base["target"]["q"] = *o.q;
    if (o.J) base["network"]["J"] = *o.J;
    if (o.activation) base["network"]["activation"] = *o.activation;
    if (o.eta0) base["train"]["eta0"] = *o.eta0;
    if (o.T1) base["train"]["T1"] = *o.T1;
    if (o.T2) base["train"]["T2"] = *o.T2;
    if (o.r) base["train"]["r"] = *o.r;
    if (o.lambda) base["train"]["lambda"] = *o.lambda;
    if (o.snapshot_every) base["train"]["snapshot_every"] = *o.snapshot_every;
    return base;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"additive-model learning lab"};
    app.require_subcommand(1);

    std::string run_config, validate_config_path;
    bool dry_run = false;
    Overrides overrides;

    CLI::App* run_cmd = app.add_subcommand("run", "execute a preset experiment");
    run_cmd->add_option("config", run_config, "config JSON path");
    run_cmd->add_flag("--dry-run", dry_run, "print the resolved config and exit");
    add_override_flags(run_cmd, overrides);

    CLI::App* validate_cmd = app.add_subcommand("validate", "check a config file");
    validate_cmd->add_option("config", validate_config_path, "config JSON path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate_cmd->parsed()) {
            const auto resolved = additive::validate_config_file(validate_config_path);
            std::cout << resolved.dump(2) << "\n";
            return additive::kExitOk;
        }
        nlohmann::json base;
        if (!run_config.empty()) {
            std::ifstream in(run_config);
            if (!in) throw additive::ConfigError("cannot open config file: " + run_config);
            try {
                base = nlohmann::json::parse(in);
            } catch (const nlohmann::json::parse_error& e) {
                throw additive::ConfigError(std::string("config parse error: ") + e.what());
            }
        } else if (!overrides.preset) {
            throw additive::ConfigError("either a config file or --preset is required");
        }
        const auto resolved = additive::validate_config(apply_overrides(base, overrides));
        if (dry_run) {
            std::cout << resolved.dump(2) << "\n";
            return additive::kExitOk;
        }
        const int rc = additive::run_preset(resolved);
        const std::string dir = resolved.at("out_dir").get<std::string>();
        std::cout << "preset " << resolved.at("preset").get<std::string>()
                  << " finished with exit code " << rc << "; artifacts in " << dir << "\n";
        return rc;
    } catch (const additive::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return additive::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return additive::kExitNumeric;
    }
}
