#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "slowlab/config.hpp"
#include "slowlab/csv.hpp"
#include "slowlab/harness.hpp"
#include "slowlab/manifold.hpp"
#include "slowlab/svg.hpp"
#include "slowlab/verify.hpp"

namespace {

using namespace slowlab;

std::unique_ptr<LossModel> build_model(const ModelSpec& spec) {
    NoiseKind kind;
    if (spec.noise == "isotropic")
        kind = NoiseKind::Isotropic;
    else if (spec.noise == "hessian_aligned")
        kind = NoiseKind::HessianAligned;
    else
        throw ConfigError("run.noise: expected isotropic or hessian_aligned, got '" + spec.noise +
                          "'");
    return make_model(spec.name, kind, spec.noise_param);
}

Vector start_point(const LossModel& model, const std::vector<double>& theta0) {
    if (!theta0.empty()) {
        if (static_cast<int>(theta0.size()) != model.dim())
            throw ConfigError("theta0/zeta0 has wrong dimension for model " + model.name());
        Vector v(model.dim());
        for (int i = 0; i < model.dim(); ++i) v[i] = theta0[static_cast<std::size_t>(i)];
        return v;
    }
    Vector v = Vector::Zero(model.dim());
    if (model.name() == "valley") v[1] = 1.0;  // on the manifold, away from the origin
    return v;
}

SdeKind build_kind(const SdeSpec& s) {
    if (s.kind == "sgd") return SdeKind::sgd(s.B);
    if (s.kind == "local") return SdeKind::local(s.B, s.K, s.eta_h);
    if (s.kind == "kappa") return SdeKind::kappa_form(s.kappa1, s.kappa2);
    if (s.kind == "local_lsr") return SdeKind::local_lsr(s.B, s.K, s.kappa, s.eta_h);
    if (s.kind == "local_inf") return SdeKind::local_inf(s.B, s.K);
    if (s.kind == "label_noise_sgd") return SdeKind::label_noise_sgd(s.B);
    if (s.kind == "label_noise_local") return SdeKind::label_noise_local(s.B, s.K, s.eta_h);
    if (s.kind == "label_noise_local_inf") return SdeKind::label_noise_local_inf(s.B, s.K);
    throw ConfigError("sde.kind: unknown kind '" + s.kind + "'");
}

void write_resolved_config(const AppConfig& cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(out_dir + "/config_resolved.txt", std::ios::binary);
    out << resolved_config_text(cfg);
}

void emit_trajectory_svg(const TrajectoryRecord& rec, int dim, const std::string& path,
                         const std::string& title) {
    std::vector<Series> series(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) series[static_cast<std::size_t>(i)].name = "theta_" + std::to_string(i);
    for (const auto& p : rec.points) {
        for (int i = 0; i < dim; ++i) {
            series[static_cast<std::size_t>(i)].x.push_back(p.t);
            series[static_cast<std::size_t>(i)].y.push_back(p.theta[i]);
        }
    }
    PlotSpec spec;
    spec.title = title;
    spec.xlabel = "t";
    spec.ylabel = "coordinate";
    emit_svg(series, spec, path);
}

int cmd_run(const AppConfig& cfg, const std::string& out_dir, bool quiet, bool sweep) {
    const auto model = build_model(cfg.run.model);
    const Vector theta0 = start_point(*model, cfg.run.model.theta0);
    TrajectoryProbe probe;
    if (cfg.run.project) probe = make_probe(*model);

    write_resolved_config(cfg, out_dir);
    std::vector<double> etas = sweep ? cfg.run.eta_list : std::vector<double>{cfg.run.cfg.eta};
    if (etas.empty())
        throw ConfigError("sweep requires run.eta_list");
    for (double eta : etas) {
        RunConfig rc = cfg.run.cfg;
        rc.eta = eta;
        TrajectoryRecord rec;
        if (cfg.run.algorithm == "local")
            rec = run_local_sgd(*model, rc, theta0, probe);
        else if (cfg.run.algorithm == "parallel")
            rec = run_parallel_sgd(*model, rc, theta0, probe);
        else if (cfg.run.algorithm == "postlocal")
            rec = run_post_local_sgd(*model, rc, theta0, probe);
        else
            throw ConfigError("run.algorithm: expected local, parallel or postlocal, got '" +
                              cfg.run.algorithm + "'");
        std::string base = out_dir + "/trajectory";
        if (sweep) {
            char tag[32];
            std::snprintf(tag, sizeof(tag), "%g", eta);
            base += std::string("_eta") + tag;
        }
        emit_csv(rec, model->dim(), base + ".csv");
        emit_trajectory_svg(rec, model->dim(), base + ".svg",
                            cfg.run.algorithm + " " + model->name());
        if (!quiet) {
            std::cout << "wrote " << base << ".csv (" << rec.points.size() << " records"
                      << (rec.diverged ? ", diverged" : "") << ")\n";
        }
    }
    return 0;
}

int cmd_sde(const AppConfig& cfg, const std::string& out_dir, bool quiet) {
    const auto model = build_model(cfg.run.model);
    const Vector zeta0 = start_point(*model, cfg.sde.zeta0.empty() ? cfg.run.model.theta0
                                                                   : cfg.sde.zeta0);
    const SdeKind kind = build_kind(cfg.sde);
    const double dt = cfg.sde.dt > 0.0 ? cfg.sde.dt : std::min(1e-3, cfg.sde.T / 1000.0);
    const TrajectoryRecord rec = integrate_slow_sde(*model, kind, zeta0, cfg.sde.T, dt,
                                                    cfg.sde.seed, cfg.sde.record_every);
    write_resolved_config(cfg, out_dir);
    emit_csv(rec, model->dim(), out_dir + "/sde_trajectory.csv");
    emit_trajectory_svg(rec, model->dim(), out_dir + "/sde_trajectory.svg",
                        "slow SDE " + cfg.sde.kind + " on " + model->name());
    if (!quiet)
        std::cout << "wrote " << out_dir << "/sde_trajectory.csv (" << rec.points.size()
                  << " records)\n";
    return 0;
}

int cmd_experiment(const AppConfig& cfg, const std::string& out_dir, int threads, bool quiet,
                   const std::string& forced_experiment) {
    HarnessConfig hc;
    hc.master_seed = cfg.harness.master_seed;
    hc.seeds = cfg.harness.seeds;
    hc.threads = threads;
    hc.q_delta = cfg.harness.q_delta;
    hc.beta = cfg.harness.beta;
    hc.out_dir = out_dir;
    hc.file_stamp = cfg.harness.file_stamp;
    write_resolved_config(cfg, out_dir);

    const std::string exp =
        forced_experiment.empty() ? cfg.harness.experiment : forced_experiment;
    Report rep;
    if (exp == "tracking")
        rep = tracking_experiment(hc);
    else if (exp == "closeness")
        rep = closeness_experiment(hc);
    else if (exp == "weak_approx")
        rep = weak_approx_experiment(hc);
    else if (exp == "moments")
        rep = moment_experiment(hc);
    else if (exp == "drift_ratio")
        rep = drift_ratio_experiment(hc);
    else if (exp == "lsr")
        rep = lsr_experiment(hc);
    else
        throw ConfigError("harness.experiment: expected tracking, closeness, weak_approx, "
                          "moments, drift_ratio or lsr, got '" + exp + "'");
    if (!quiet) std::cout << rep.summary();
    return rep.all_pass() ? 0 : 1;
}

int cmd_verify(const AppConfig& cfg, const std::string& out_dir, int threads) {
    write_resolved_config(cfg, out_dir);
    const auto results = run_acceptance(std::cout, out_dir, threads, cfg.harness.master_seed);
    return count_failures(results) == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale laboratory for local SGD dynamics and slow SDEs"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may appear after the subcommand

    std::string config_path, out_dir = "out";
    std::vector<std::string> overrides;
    int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    bool quiet = false;
    app.add_option("--config", config_path, "config file path");
    app.add_option("--set", overrides, "override key=value (section.key or run key)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--threads", threads, "worker thread cap");
    app.add_flag("--quiet", quiet, "suppress progress output");

    auto* run = app.add_subcommand("run", "run a discrete optimizer");
    auto* sde = app.add_subcommand("sde", "integrate a slow SDE");
    auto* compare = app.add_subcommand("compare", "run a comparison experiment");
    auto* moments = app.add_subcommand("moments", "run the one-group moment experiment");
    auto* verify = app.add_subcommand("verify", "run the acceptance suite");
    auto* sweep = app.add_subcommand("sweep", "run the optimizer over run.eta_list");

    CLI11_PARSE(app, argc, argv);

    try {
        AppConfig cfg = config_path.empty() ? parse_overrides(overrides)
                                            : parse_config(config_path, overrides);
        // precedence: --set beats the environment beats the file
        const bool seed_overridden = std::any_of(
            overrides.begin(), overrides.end(), [](const std::string& o) {
                return o.rfind("run.seed", 0) == 0 || o.rfind("sde.seed", 0) == 0 ||
                       o.rfind("harness.master_seed", 0) == 0 || o.rfind("seed", 0) == 0;
            });
        if (const char* env = std::getenv("SLOWSDE_SEED"); env && !seed_overridden) {
            try {
                const std::uint64_t s = std::stoull(env);
                cfg.run.cfg.seed = s;
                cfg.sde.seed = s;
                cfg.harness.master_seed = s;
            } catch (const std::exception&) {
                throw ConfigError("SLOWSDE_SEED: not an unsigned integer");
            }
        }

        if (run->parsed()) return cmd_run(cfg, out_dir, quiet, false);
        if (sweep->parsed()) return cmd_run(cfg, out_dir, quiet, true);
        if (sde->parsed()) return cmd_sde(cfg, out_dir, quiet);
        if (compare->parsed()) return cmd_experiment(cfg, out_dir, threads, quiet, "");
        if (moments->parsed()) return cmd_experiment(cfg, out_dir, threads, quiet, "moments");
        if (verify->parsed()) return cmd_verify(cfg, out_dir, threads);
        return 2;
    } catch (const slowlab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return 3;
    }
}
