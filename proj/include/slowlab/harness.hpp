#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "slowlab/models.hpp"
#include "slowlab/optim.hpp"
#include "slowlab/sde.hpp"

namespace slowlab {

struct Assertion {
    std::string name;
    double observed = 0.0;
    double target = 0.0;   // nominal value the observation is compared to
    double lo = 0.0;       // accepted interval for observed
    double hi = 0.0;
    bool pass = false;
};

struct Report {
    std::string experiment;
    std::vector<Assertion> assertions;
    std::map<std::string, double> stats;
    std::vector<std::string> files;

    bool all_pass() const;
    /// One line per assertion: name, observed, target, interval, verdict.
    std::string summary() const;
};

/// Shared experiment knobs. out_dir empty suppresses file output; file_stamp
/// replaces the timestamp in emitted file names when set (reproducible runs).
struct HarnessConfig {
    std::uint64_t master_seed = 2024;
    int seeds = 100;
    int threads = 1;
    double q_delta = 0.9;
    double beta = 0.25;
    std::string out_dir;
    std::string file_stamp;
};

Assertion make_interval_assertion(const std::string& name, double observed, double target,
                                  double lo, double hi);

/// Parallel map over seed indices; slot-indexed results keep aggregation
/// independent of scheduling.
void for_each_seed(int seeds, int threads, const std::function<void(int)>& body);

/// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

double quantile(std::vector<double> v, double q);
double median(std::vector<double> v);

/// Projection probe backed by gf_project.
TrajectoryProbe make_probe(const LossModel& model);

/// Tracking error between Local SGD rounds and parallel SGD across an eta
/// grid at fixed alpha: fits the sqrt(eta) scaling of the Q_delta quantile.
Report tracking_experiment(const HarnessConfig& hc);

/// Post burn-in distance to the manifold projection: eta scaling at fixed
/// alpha plus the alpha-doubling ratio.
Report closeness_experiment(const HarnessConfig& hc);

/// E[g] curves of projected Local SGD vs the Local slow SDE on the matched
/// time grid; asserts the max gap shrinks with eta.
Report weak_approx_experiment(const HarnessConfig& hc);

/// One-group moment test: BlockQuadratic null drift + tangent variance,
/// QuadraticValley analytic drift target.
Report moment_experiment(const HarnessConfig& hc);

/// Exponential decay rate of E[y] for Local SGD vs SGD under hessian-aligned
/// noise across an etaH grid.
Report drift_ratio_experiment(const HarnessConfig& hc);

/// Linear scaling rule: deterministic (b, A) invariances plus a two-sample
/// distributional check of the rescaled integration.
Report lsr_experiment(const HarnessConfig& hc);

}  // namespace slowlab
