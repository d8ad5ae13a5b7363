#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "slowlab/optim.hpp"

namespace slowlab {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ModelSpec {
    std::string name = "valley";
    std::string noise = "isotropic";
    double noise_param = 1.0;
    std::vector<double> theta0;  // empty = model default start
};

struct RunSpec {
    ModelSpec model;
    std::string algorithm = "local";  // local | parallel | postlocal
    RunConfig cfg;
    std::vector<double> eta_list;     // sweep grid
    bool project = true;
};

struct SdeSpec {
    std::string kind = "sgd";
    double B = 1.0;
    double K = 1.0;
    double eta_h = 0.0;
    double kappa = 1.0;
    double kappa1 = 0.0;
    double kappa2 = 0.0;
    double dt = -1.0;  // negative = min(1e-3, T/1000)
    double T = 1.0;
    std::uint64_t seed = 0;
    long record_every = 1;
    std::vector<double> zeta0;
};

struct HarnessSpec {
    std::string experiment = "tracking";
    int seeds = 100;
    std::uint64_t master_seed = 2024;
    double q_delta = 0.9;
    double beta = 0.25;
    std::string file_stamp;
};

struct AppConfig {
    RunSpec run;
    SdeSpec sde;
    HarnessSpec harness;
    bool seed_set_explicitly = false;  // run.seed or harness.master_seed via file/override
};

/// Parses a flat sectioned key=value file ([run], [sde], [harness]; keys before
/// any header belong to [run]) and applies dotted-key overrides. Unknown keys
/// are hard errors listing the valid keys for the section.
AppConfig parse_config(const std::string& path, const std::vector<std::string>& overrides);

/// Same resolution from overrides only (no file).
AppConfig parse_overrides(const std::vector<std::string>& overrides);

/// Deterministic serialization of every effective value.
std::string resolved_config_text(const AppConfig& cfg);

}  // namespace slowlab
