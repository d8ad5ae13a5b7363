#include "slowlab/verify.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "slowlab/manifold.hpp"

namespace slowlab {

namespace {

Assertion near(const std::string& name, double observed, double target, double tol) {
    return make_interval_assertion(name, observed, target, target - tol, target + tol);
}

Assertion at_most(const std::string& name, double observed, double bound) {
    return make_interval_assertion(name, observed, 0.0, 0.0, bound);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// C1: psi/F special function facts
std::vector<Assertion> criterion_special_functions() {
    std::vector<Assertion> out;
    out.push_back(near("psi_at_zero", psi(0.0), 0.0, 1e-15));
    out.push_back(near("psi_at_one", psi(1.0), std::exp(-1.0), 1e-12));
    double prev = psi(0.0);
    bool monotone = true;
    for (double x = 0.1; x <= 100.0 + 1e-9; x += 0.1) {
        const double v = psi(x);
        if (v < prev) monotone = false;
        prev = v;
    }
    out.push_back(make_interval_assertion("psi_monotone_0_100", monotone ? 1.0 : 0.0, 1.0, 1.0,
                                          1.0));
    const double h = 1e-3;
    for (double x : {0.1, 1.0, 5.0, 20.0}) {
        const double fd = (big_f(x + h) - big_f(x - h)) / (2.0 * h);
        out.push_back(near("F_prime_equals_psi_at_" + std::to_string(x), fd, psi(x), 1e-6));
    }
    out.push_back(
        make_interval_assertion("F50_over_50", big_f(50.0) / 50.0, 0.92, 0.85, 1.0));
    return out;
}

// C2: manifold geometry on the valley
std::vector<Assertion> criterion_geometry() {
    std::vector<Assertion> out;
    const QuadraticValley model = QuadraticValley::isotropic(1.0);
    double idem = 0.0, annihilate = 0.0, phi_idem = 0.0;
    for (int i = 0; i < 10; ++i) {
        const double y = -2.0 + 4.0 * i / 9.0;
        Vector zeta(2);
        zeta << 0.0, y;
        const ManifoldFrame f = make_frame(model, zeta);
        idem = std::max(idem, (f.p_par * f.p_par - f.p_par).norm());
        annihilate = std::max(annihilate, (f.p_par * model.eval_hessian(zeta)).norm());
        Vector off(2);
        off << 0.1, y;
        const auto p1 = gf_project(model, off);
        const auto p2 = gf_project(model, *p1);
        phi_idem = std::max(phi_idem, (*p2 - *p1).norm());
    }
    out.push_back(at_most("projector_idempotence", idem, 1e-8));
    out.push_back(at_most("projector_annihilates_hessian", annihilate, 1e-6));
    out.push_back(at_most("phi_idempotence", phi_idem, 2e-8));

    Vector zeta(2);
    zeta << 0.0, 1.0;
    const ManifoldFrame f = make_frame(model, zeta);
    Matrix M = Matrix::Zero(2, 2);
    M(0, 0) = 1.0;
    const Vector d2 = second_diff_phi(model, f, M);
    out.push_back(near("second_diff_phi_x", d2[0], 0.0, 1e-6));
    out.push_back(near("second_diff_phi_y", d2[1], -0.5, 1e-6));

    // central second difference of the projection along the normal direction
    const double eps = 1e-3;
    OdeOptions tight;
    tight.tol = 1e-12;
    tight.initial_step = 1e-4;
    Vector ep(2), em(2);
    ep << eps, 1.0;
    em << -eps, 1.0;
    const auto pp = gf_project(model, ep, 1e-8, tight);
    const auto pm = gf_project(model, em, 1e-8, tight);
    const Vector fd = (*pp + *pm - 2.0 * zeta) / (eps * eps);
    out.push_back(make_interval_assertion("second_diff_phi_fd_relative",
                                          std::abs(fd[1] - d2[1]) / std::abs(d2[1]), 0.0, 0.0,
                                          1e-3));
    return out;
}

// C3: discrete algorithm equivalences, bit-exact
std::vector<Assertion> criterion_equivalences(std::uint64_t master_seed) {
    std::vector<Assertion> out;
    const QuadraticValley model = QuadraticValley::isotropic(1.0);
    Vector theta0(2);
    theta0 << 0.3, 1.0;

    const auto max_gap = [](const TrajectoryRecord& a, const TrajectoryRecord& b) {
        if (a.points.size() != b.points.size()) return 1e300;
        double m = 0.0;
        for (std::size_t i = 0; i < a.points.size(); ++i)
            m = std::max(m, (a.points[i].theta - b.points[i].theta).cwiseAbs().maxCoeff());
        return m;
    };

    RunConfig cfg;
    cfg.eta = 0.05;
    cfg.K = 4;
    cfg.B_loc = 2;
    cfg.H = 1;
    cfg.rounds = 50;
    cfg.seed = master_seed;
    out.push_back(at_most("local_h1_equals_parallel",
                          max_gap(run_local_sgd(model, cfg, theta0),
                                  run_parallel_sgd(model, cfg, theta0)),
                          0.0));

    RunConfig pcfg = cfg;
    pcfg.H = 4;
    pcfg.rounds = 12;
    pcfg.t0 = 0;
    out.push_back(at_most("postlocal_t0_zero_equals_local",
                          max_gap(run_post_local_sgd(model, pcfg, theta0),
                                  run_local_sgd(model, pcfg, theta0)),
                          0.0));
    RunConfig pcfg2 = cfg;
    pcfg2.H = 1;
    pcfg2.rounds = 48;
    pcfg2.t0 = 48;
    out.push_back(at_most("postlocal_t0_total_equals_parallel",
                          max_gap(run_post_local_sgd(model, pcfg2, theta0),
                                  run_parallel_sgd(model, pcfg2, theta0)),
                          0.0));

    const QuadraticValley noiseless = QuadraticValley::isotropic(0.0);
    RunConfig zcfg = cfg;
    zcfg.H = 5;
    zcfg.rounds = 20;
    const TrajectoryRecord zero = run_local_sgd(noiseless, zcfg, theta0);
    Vector gd = theta0;
    double gd_gap = 0.0;
    std::size_t rec = 1;
    for (long t = 1; t <= zcfg.total_steps(); ++t) {
        gd -= zcfg.eta * noiseless.eval_grad(gd);
        if (t % zcfg.H == 0) {
            gd_gap = std::max(gd_gap,
                              (zero.points.at(rec).theta - gd).cwiseAbs().maxCoeff());
            ++rec;
        }
    }
    out.push_back(at_most("zero_noise_equals_gd", gd_gap, 0.0));
    return out;
}

// C10: label-noise covariance equals the Hessian at an interpolating point
std::vector<Assertion> criterion_label_noise(std::uint64_t master_seed) {
    std::vector<Assertion> out;
    const SoftmaxLabelNoise model = SoftmaxLabelNoise::standard();
    const Vector theta = model.find_interpolating_point(Vector::Zero(model.dim()));
    const Matrix hess = model.eval_hessian(theta);

    const int n = 100000;
    StreamRng rng(master_seed, StreamRng::kTagNoise, 10, 0);
    Vector mean = Vector::Zero(model.dim());
    Matrix second = Matrix::Zero(model.dim(), model.dim());
    for (int i = 0; i < n; ++i) {
        const Vector z = model.sample_noise(theta, rng);
        mean += z;
        second += z * z.transpose();
    }
    mean /= n;
    second /= n;
    const Matrix cov = second - mean * mean.transpose();
    out.push_back(at_most("label_noise_cov_matches_hessian",
                          (cov - hess).norm() / hess.norm(), 0.1));
    out.push_back(at_most("interpolating_grad_norm",
                          model.eval_grad(theta).norm(), 1e-7));
    return out;
}

// C11: byte-identical experiment output across thread counts
std::vector<Assertion> criterion_determinism(const std::string& out_dir,
                                             std::uint64_t master_seed) {
    std::vector<Assertion> out;
    HarnessConfig a;
    a.master_seed = master_seed;
    a.seeds = 40;
    a.threads = 1;
    a.out_dir = out_dir;
    a.file_stamp = "det_a";
    HarnessConfig b = a;
    b.threads = 3;
    b.file_stamp = "det_b";
    const Report ra = tracking_experiment(a);
    const Report rb = tracking_experiment(b);
    if (ra.files.empty() || rb.files.empty())
        throw std::runtime_error("determinism: experiment produced no files");
    const bool identical = read_file(ra.files.front()) == read_file(rb.files.front());
    out.push_back(make_interval_assertion("csv_bytes_thread_invariant", identical ? 1.0 : 0.0,
                                          1.0, 1.0, 1.0));
    return out;
}

}  // namespace

std::vector<CriterionResult> run_acceptance(std::ostream& os, const std::string& out_dir,
                                            int threads, std::uint64_t master_seed) {
    std::filesystem::create_directories(out_dir);

    const auto harness_criterion = [&](const std::function<Report(const HarnessConfig&)>& exp,
                                       int seeds) {
        return [&, exp, seeds]() {
            HarnessConfig hc;
            hc.master_seed = master_seed;
            hc.seeds = seeds;
            hc.threads = threads;
            hc.out_dir = out_dir;
            hc.file_stamp = "acceptance";
            return exp(hc).assertions;
        };
    };

    struct Entry {
        int index;
        std::string name;
        std::function<std::vector<Assertion>()> body;
    };
    const std::vector<Entry> entries = {
        {1, "special_functions", [] { return criterion_special_functions(); }},
        {2, "geometry", [] { return criterion_geometry(); }},
        {3, "algorithm_equivalences", [&] { return criterion_equivalences(master_seed); }},
        {4, "tracking_scaling", harness_criterion(tracking_experiment, 100)},
        {5, "manifold_closeness", harness_criterion(closeness_experiment, 100)},
        {6, "weak_approximation", harness_criterion(weak_approx_experiment, 200)},
        {7, "drift_amplification", harness_criterion(drift_ratio_experiment, 64)},
        {8, "one_group_moments", harness_criterion(moment_experiment, 10000)},
        {9, "linear_scaling_rule", harness_criterion(lsr_experiment, 100)},
        {10, "label_noise_covariance", [&] { return criterion_label_noise(master_seed); }},
        {11, "determinism", [&] { return criterion_determinism(out_dir, master_seed); }},
    };

    std::vector<CriterionResult> results;
    for (const auto& entry : entries) {
        CriterionResult res;
        res.index = entry.index;
        res.name = entry.name;
        const auto start = std::chrono::steady_clock::now();
        try {
            res.assertions = entry.body();
            res.pass = true;
            for (const auto& a : res.assertions)
                if (!a.pass) res.pass = false;
        } catch (const std::exception& e) {
            res.pass = false;
            res.error = e.what();
        }
        res.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        for (const auto& a : res.assertions) {
            os << "  " << (a.pass ? "pass" : "FAIL") << "  " << a.name
               << "  observed=" << a.observed << "  target=" << a.target << "  accepted=["
               << a.lo << ", " << a.hi << "]\n";
        }
        if (!res.error.empty()) os << "  ERROR  " << res.error << '\n';
        os << "criterion " << res.index << " (" << res.name << "): "
           << (res.pass ? "PASS" : "FAIL") << "  [" << res.seconds << " s]\n";
        results.push_back(std::move(res));
    }
    const int failures = count_failures(results);
    os << (failures == 0 ? "acceptance: all criteria passed\n"
                         : "acceptance: " + std::to_string(failures) + " criteria failed\n");
    return results;
}

int count_failures(const std::vector<CriterionResult>& results) {
    int n = 0;
    for (const auto& r : results)
        if (!r.pass) ++n;
    return n;
}

}  // namespace slowlab
