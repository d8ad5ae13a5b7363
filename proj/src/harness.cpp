#include "slowlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "slowlab/csv.hpp"
#include "slowlab/manifold.hpp"

namespace slowlab {

bool Report::all_pass() const {
    for (const auto& a : assertions)
        if (!a.pass) return false;
    return true;
}

std::string Report::summary() const {
    std::ostringstream os;
    os << "experiment: " << experiment << '\n';
    for (const auto& a : assertions) {
        os << (a.pass ? "  PASS  " : "  FAIL  ") << a.name << ": observed=" << a.observed
           << " target=" << a.target << " accepted=[" << a.lo << ", " << a.hi << "]\n";
    }
    for (const auto& [k, v] : stats) os << "  stat  " << k << " = " << v << '\n';
    for (const auto& f : files) os << "  file  " << f << '\n';
    return os.str();
}

Assertion make_interval_assertion(const std::string& name, double observed, double target,
                                  double lo, double hi) {
    Assertion a;
    a.name = name;
    a.observed = observed;
    a.target = target;
    a.lo = lo;
    a.hi = hi;
    a.pass = std::isfinite(observed) && observed >= lo && observed <= hi;
    return a;
}

void for_each_seed(int seeds, int threads, const std::function<void(int)>& body) {
    threads = std::max(1, std::min(threads, seeds));
    if (threads == 1) {
        for (int i = 0; i < seeds; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= seeds) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_slope: need at least two points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-300)
        throw std::invalid_argument("fit_slope: degenerate abscissae");
    return (n * sxy - sx * sy) / denom;
}

double quantile(std::vector<double> v, double q) {
    if (v.empty())
        throw std::invalid_argument("quantile: empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double w = pos - std::floor(pos);
    return v[lo] * (1.0 - w) + v[hi] * w;
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

TrajectoryProbe make_probe(const LossModel& model) {
    TrajectoryProbe probe;
    probe.project = [&model](const Vector& theta) { return gf_project(model, theta); };
    probe.tr_hess = [&model](const Vector& phi) { return model.eval_hessian(phi).trace(); };
    return probe;
}

namespace {

std::uint64_t sub_seed(std::uint64_t master, std::uint64_t exp_id, std::uint64_t a,
                       std::uint64_t b, std::uint64_t c = 0) {
    return StreamRng(master, exp_id, a, b, c).next_u64();
}

constexpr std::uint64_t kExpTracking = 1;
constexpr std::uint64_t kExpCloseness = 2;
constexpr std::uint64_t kExpWeak = 3;
constexpr std::uint64_t kExpMoment = 4;
constexpr std::uint64_t kExpDrift = 5;
constexpr std::uint64_t kExpLsr = 6;
constexpr std::uint64_t kExpBootstrap = 99;

std::string stamp_or_now(const HarnessConfig& hc) {
    if (!hc.file_stamp.empty()) return hc.file_stamp;
    char buf[32];
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%S", &tm);
    return buf;
}

std::string report_path(const HarnessConfig& hc, const std::string& experiment,
                        const std::string& model) {
    return hc.out_dir + "/" + experiment + "_" + model + "_" + stamp_or_now(hc) + ".csv";
}

void maybe_write(Report& rep, const HarnessConfig& hc, const std::string& model,
                 const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows) {
    if (hc.out_dir.empty()) return;
    const std::string path = report_path(hc, rep.experiment, model);
    write_table(path, header, rows);
    rep.files.push_back(path);
    std::ofstream txt(hc.out_dir + "/" + rep.experiment + "_summary.txt", std::ios::binary);
    txt << rep.summary();
}

double mean_of(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double std_err(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    const double n = static_cast<double>(v.size());
    return std::sqrt(s / (n - 1.0) / n);
}

// Bootstrap CI for the slope of log(stat) vs log(eta), resampling seeds.
std::pair<double, double> bootstrap_slope_ci(
    const std::vector<double>& log_etas, const std::vector<std::vector<double>>& samples,
    const std::function<double(std::vector<double>)>& reduce, std::uint64_t master) {
    const int n_boot = 1000;
    const std::size_t n_seeds = samples[0].size();
    std::vector<double> slopes;
    slopes.reserve(n_boot);
    StreamRng rng(master, kExpBootstrap, 0, 0);
    for (int b = 0; b < n_boot; ++b) {
        std::vector<double> ys;
        std::vector<std::size_t> pick(n_seeds);
        for (auto& p : pick) p = rng.next_below(n_seeds);
        for (const auto& cell : samples) {
            std::vector<double> res(n_seeds);
            for (std::size_t i = 0; i < n_seeds; ++i) res[i] = cell[pick[i]];
            ys.push_back(std::log(reduce(std::move(res))));
        }
        slopes.push_back(fit_slope(log_etas, ys));
    }
    return {quantile(slopes, 0.025), quantile(slopes, 0.975)};
}

}  // namespace

// ---------------------------------------------------------------------------
// tracking

Report tracking_experiment(const HarnessConfig& hc) {
    Report rep;
    rep.experiment = "tracking";
    const QuadraticValley model = QuadraticValley::isotropic(1.0);
    const std::vector<double> etas = {0.04, 0.02, 0.01, 0.005};
    const double alpha = 0.5, T = 4.0;
    Vector theta0(2);
    theta0 << 0.0, 1.0;

    std::vector<std::vector<double>> errs(etas.size());
    std::vector<std::vector<double>> rows;
    long diverged = 0;
    for (std::size_t e = 0; e < etas.size(); ++e) {
        const double eta = etas[e];
        RunConfig base;
        base.eta = eta;
        base.K = 2;
        base.B_loc = 1;
        base.H = static_cast<int>(std::max<long>(1, std::llround(alpha / eta)));
        base.rounds = std::llround(T / (eta * base.H));
        base.record_every = 1;
        errs[e].assign(static_cast<std::size_t>(hc.seeds), 0.0);
        std::atomic<long> bad{0};
        for_each_seed(hc.seeds, hc.threads, [&](int s) {
            RunConfig local_cfg = base;
            local_cfg.seed = sub_seed(hc.master_seed, kExpTracking, e, s, 0);
            RunConfig sgd_cfg = base;
            sgd_cfg.seed = sub_seed(hc.master_seed, kExpTracking, e, s, 1);
            const TrajectoryRecord loc = run_local_sgd(model, local_cfg, theta0);
            const TrajectoryRecord sgd = run_parallel_sgd(model, sgd_cfg, theta0);
            if (loc.diverged || sgd.diverged ||
                loc.points.size() != sgd.points.size()) {
                bad.fetch_add(1);
                errs[e][static_cast<std::size_t>(s)] = std::nan("");
                return;
            }
            double err = 0.0;
            for (std::size_t i = 0; i < loc.points.size(); ++i)
                err = std::max(err, (loc.points[i].theta - sgd.points[i].theta).norm());
            errs[e][static_cast<std::size_t>(s)] = err;
        });
        diverged += bad.load();
        errs[e].erase(std::remove_if(errs[e].begin(), errs[e].end(),
                                     [](double v) { return std::isnan(v); }),
                      errs[e].end());
        for (std::size_t s = 0; s < errs[e].size(); ++s)
            rows.push_back({eta, static_cast<double>(s), errs[e][s]});
    }

    std::vector<double> lx, ly;
    for (std::size_t e = 0; e < etas.size(); ++e) {
        lx.push_back(std::log(etas[e]));
        ly.push_back(std::log(quantile(errs[e], hc.q_delta)));
        rep.stats["q" + std::to_string(static_cast<int>(hc.q_delta * 100)) + "_eta_" +
                  std::to_string(e)] = std::exp(ly.back());
    }
    const double slope = fit_slope(lx, ly);
    rep.assertions.push_back(make_interval_assertion("tracking_eta_slope", slope, 0.5, 0.35, 0.65));
    const double q = hc.q_delta;
    const auto ci = bootstrap_slope_ci(
        lx, errs, [q](std::vector<double> v) { return quantile(std::move(v), q); },
        hc.master_seed);
    rep.stats["slope_ci_lo"] = ci.first;
    rep.stats["slope_ci_hi"] = ci.second;
    rep.stats["diverged_runs"] = static_cast<double>(diverged);
    maybe_write(rep, hc, model.name(), {"eta", "seed", "max_tracking_error"}, rows);
    return rep;
}

// ---------------------------------------------------------------------------
// closeness

Report closeness_experiment(const HarnessConfig& hc) {
    Report rep;
    rep.experiment = "closeness";
    const QuadraticValley model = QuadraticValley::isotropic(1.0);
    Vector theta0(2);
    theta0 << 0.0, 1.0;
    const ManifoldFrame f0 = make_frame(model, theta0);
    double mu = 1e300;
    for (Eigen::Index i = 0; i < f0.eig.eigenvalues.size(); ++i)
        if (!f0.eig.is_zero(i)) mu = std::min(mu, std::abs(f0.eig.eigenvalues[i]));

    struct Cell {
        double eta, alpha;
    };
    const std::vector<Cell> cells = {
        {0.02, 0.5}, {0.01, 0.5}, {0.005, 0.5}, {0.01, 0.4}, {0.01, 0.8}};

    std::vector<std::vector<double>> med_samples(cells.size());
    std::vector<double> cell_median(cells.size());
    std::vector<double> clean_fraction(cells.size());
    std::vector<std::vector<double>> rows;
    const TrajectoryProbe probe = make_probe(model);
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto [eta, alpha] = cells[c];
        RunConfig cfg;
        cfg.eta = eta;
        cfg.K = 2;
        cfg.B_loc = 1;
        cfg.H = static_cast<int>(std::max<long>(1, std::llround(alpha / eta)));
        const long burn = static_cast<long>(
            std::ceil(20.0 / (alpha * mu) * std::log(1.0 / eta)));
        cfg.rounds = burn + 100;
        cfg.record_every = 5;
        med_samples[c].assign(static_cast<std::size_t>(hc.seeds), 0.0);
        std::atomic<long> clean{0};
        for_each_seed(hc.seeds, hc.threads, [&](int s) {
            RunConfig run_cfg = cfg;
            run_cfg.seed = sub_seed(hc.master_seed, kExpCloseness, c, s, 0);
            const TrajectoryRecord rec = run_local_sgd(model, run_cfg, theta0, probe);
            std::vector<double> dists;
            bool ok = !rec.diverged;
            for (const auto& p : rec.points) {
                if (p.s <= burn) continue;
                if (!p.phi) {
                    ok = false;
                    continue;
                }
                dists.push_back(p.dist_manifold);
            }
            if (ok) clean.fetch_add(1);
            med_samples[c][static_cast<std::size_t>(s)] =
                dists.empty() ? std::nan("") : median(dists);
        });
        clean_fraction[c] = static_cast<double>(clean.load()) / hc.seeds;
        auto& ms = med_samples[c];
        ms.erase(std::remove_if(ms.begin(), ms.end(), [](double v) { return std::isnan(v); }),
                 ms.end());
        cell_median[c] = median(ms);
        rep.stats["median_cell_" + std::to_string(c)] = cell_median[c];
        for (std::size_t s = 0; s < ms.size(); ++s)
            rows.push_back({eta, alpha, static_cast<double>(s), ms[s]});
    }

    std::vector<double> lx, ly;
    std::vector<std::vector<double>> eta_samples;
    for (std::size_t c = 0; c < 3; ++c) {
        lx.push_back(std::log(cells[c].eta));
        ly.push_back(std::log(cell_median[c]));
        eta_samples.push_back(med_samples[c]);
    }
    const double slope = fit_slope(lx, ly);
    rep.assertions.push_back(
        make_interval_assertion("closeness_eta_slope", slope, 0.5, 0.35, 0.65));
    const double ratio = cell_median[4] / cell_median[3];
    rep.assertions.push_back(make_interval_assertion("closeness_alpha_doubling_ratio", ratio,
                                                     std::sqrt(2.0), 1.2, 1.7));
    const double min_clean = *std::min_element(clean_fraction.begin(), clean_fraction.end());
    rep.assertions.push_back(
        make_interval_assertion("closeness_projection_success", min_clean, 1.0, hc.q_delta, 1.0));
    // the resampled seed counts may differ per cell; use the smallest
    std::size_t n_min = eta_samples[0].size();
    for (const auto& v : eta_samples) n_min = std::min(n_min, v.size());
    for (auto& v : eta_samples) v.resize(n_min);
    const auto ci = bootstrap_slope_ci(
        lx, eta_samples, [](std::vector<double> v) { return median(std::move(v)); },
        hc.master_seed);
    rep.stats["slope_ci_lo"] = ci.first;
    rep.stats["slope_ci_hi"] = ci.second;
    maybe_write(rep, hc, model.name(), {"eta", "alpha", "seed", "median_dist"}, rows);
    return rep;
}

// ---------------------------------------------------------------------------
// weak approximation

Report weak_approx_experiment(const HarnessConfig& hc) {
    Report rep;
    rep.experiment = "weak_approx";
    const QuadraticValley model = QuadraticValley::isotropic(1.0);
    Vector zeta0(2);
    zeta0 << 0.0, 1.0;
    const double alpha = 0.5, T = 0.4;
    const int K = 4, B_loc = 1;
    const std::vector<double> etas = {0.02, 0.01, 0.005};
    const double dt = T / 1000.0;
    const int sde_seeds = std::max(hc.seeds, 200);

    // SDE reference ensemble, shared across the eta grid
    const SdeKind kind = SdeKind::local(static_cast<double>(K * B_loc), K, alpha);
    std::vector<std::vector<double>> sde_y(static_cast<std::size_t>(sde_seeds));
    std::atomic<long> sde_failures{0};
    for_each_seed(sde_seeds, hc.threads, [&](int s) {
        try {
            const TrajectoryRecord rec = integrate_slow_sde(
                model, kind, zeta0, T, dt, sub_seed(hc.master_seed, kExpWeak, 100, s, 0), 1);
            std::vector<double>& ys = sde_y[static_cast<std::size_t>(s)];
            ys.reserve(rec.points.size());
            for (const auto& p : rec.points) ys.push_back(p.theta[1]);
        } catch (const std::runtime_error&) {
            sde_failures.fetch_add(1);
        }
    });
    sde_y.erase(std::remove_if(sde_y.begin(), sde_y.end(),
                               [](const std::vector<double>& v) { return v.empty(); }),
                sde_y.end());
    if (sde_y.size() < 30)
        throw std::runtime_error("weak_approx: too many SDE basin exits");

    const TrajectoryProbe probe = make_probe(model);
    struct GapCell {
        double gap_y, se_y, gap_y2, se_y2;
    };
    std::vector<GapCell> gaps;
    std::vector<std::vector<double>> rows;
    for (std::size_t e = 0; e < etas.size(); ++e) {
        const double eta = etas[e];
        RunConfig cfg;
        cfg.eta = eta;
        cfg.K = K;
        cfg.B_loc = B_loc;
        cfg.H = static_cast<int>(std::llround(alpha / eta));
        cfg.rounds = std::llround(T / (eta * eta * cfg.H));
        cfg.record_every = std::max<long>(1, cfg.rounds / 20);
        const double round_dt = cfg.H * eta * eta;

        std::vector<std::vector<double>> disc_y(static_cast<std::size_t>(hc.seeds));
        std::vector<long> s_grid;
        for_each_seed(hc.seeds, hc.threads, [&](int s) {
            RunConfig run_cfg = cfg;
            run_cfg.seed = sub_seed(hc.master_seed, kExpWeak, e, s, 0);
            const TrajectoryRecord rec = run_local_sgd(model, run_cfg, zeta0, probe);
            if (rec.diverged) return;
            std::vector<double>& ys = disc_y[static_cast<std::size_t>(s)];
            for (const auto& p : rec.points) {
                if (!p.phi) {
                    ys.clear();
                    return;
                }
                ys.push_back((*p.phi)[1]);
            }
            if (s == 0) {
                for (const auto& p : rec.points) s_grid.push_back(p.s);
            }
        });
        // seed 0 must have survived to define the grid
        if (s_grid.empty())
            throw std::runtime_error("weak_approx: reference seed failed projection");
        disc_y.erase(std::remove_if(disc_y.begin(), disc_y.end(),
                                    [&](const std::vector<double>& v) {
                                        return v.size() != s_grid.size();
                                    }),
                     disc_y.end());
        if (disc_y.size() < 30)
            throw std::runtime_error("weak_approx: too many projection failures");

        GapCell cell{0, 0, 0, 0};
        for (std::size_t gi = 1; gi < s_grid.size(); ++gi) {
            const double t = static_cast<double>(s_grid[gi]) * round_dt;
            const std::size_t sde_idx = static_cast<std::size_t>(std::llround(t / dt));
            std::vector<double> dy, dy2, sy, sy2;
            for (const auto& ys : disc_y) {
                dy.push_back(ys[gi]);
                dy2.push_back(ys[gi] * ys[gi]);
            }
            for (const auto& ys : sde_y) {
                const double v = ys.at(sde_idx);
                sy.push_back(v);
                sy2.push_back(v * v);
            }
            const double gap_y = std::abs(mean_of(dy) - mean_of(sy));
            const double gap_y2 = std::abs(mean_of(dy2) - mean_of(sy2));
            const double se_y = std::hypot(std_err(dy), std_err(sy));
            const double se_y2 = std::hypot(std_err(dy2), std_err(sy2));
            if (gap_y > cell.gap_y) {
                cell.gap_y = gap_y;
                cell.se_y = se_y;
            }
            if (gap_y2 > cell.gap_y2) {
                cell.gap_y2 = gap_y2;
                cell.se_y2 = se_y2;
            }
            rows.push_back({eta, t, mean_of(dy), mean_of(sy), mean_of(dy2), mean_of(sy2)});
        }
        gaps.push_back(cell);
        rep.stats["gap_y_eta_" + std::to_string(e)] = cell.gap_y;
        rep.stats["gap_y2_eta_" + std::to_string(e)] = cell.gap_y2;
    }

    for (std::size_t e = 0; e + 1 < gaps.size(); ++e) {
        const double slack_y = 2.0 * std::hypot(gaps[e].se_y, gaps[e + 1].se_y);
        rep.assertions.push_back(make_interval_assertion(
            "weak_gap_y_decrease_" + std::to_string(e), gaps[e + 1].gap_y - gaps[e].gap_y, 0.0,
            -1e300, slack_y));
        const double slack_y2 = 2.0 * std::hypot(gaps[e].se_y2, gaps[e + 1].se_y2);
        rep.assertions.push_back(make_interval_assertion(
            "weak_gap_y2_decrease_" + std::to_string(e), gaps[e + 1].gap_y2 - gaps[e].gap_y2, 0.0,
            -1e300, slack_y2));
    }
    rep.assertions.push_back(make_interval_assertion("weak_final_gap_y", gaps.back().gap_y, 0.0,
                                                     0.0, 3.0 * gaps.back().se_y));
    rep.assertions.push_back(make_interval_assertion("weak_final_gap_y2", gaps.back().gap_y2, 0.0,
                                                     0.0, 3.0 * gaps.back().se_y2));
    rep.stats["sde_basin_exits"] = static_cast<double>(sde_failures.load());
    maybe_write(rep, hc, model.name(),
                {"eta", "t", "mean_y_discrete", "mean_y_sde", "mean_y2_discrete", "mean_y2_sde"},
                rows);
    return rep;
}

// ---------------------------------------------------------------------------
// moments

Report moment_experiment(const HarnessConfig& hc) {
    Report rep;
    rep.experiment = "moments";
    const double eta = 1.0 / 256.0;
    const double eta_pow = std::pow(eta, 1.0 - hc.beta);  // = 1/64 for beta = 0.25
    const int K = 4, B_loc = 1;
    const double B = K * B_loc;
    std::vector<std::vector<double>> rows;

    {  // BlockQuadratic: zero drift, exact tangent variance
        Vector h(4);
        h << 3.0, 1.0, 0.0, 0.0;
        const BlockQuadratic model(h, Matrix::Identity(4, 4));
        const double alpha = 0.5;
        RunConfig cfg;
        cfg.eta = eta;
        cfg.K = K;
        cfg.B_loc = B_loc;
        cfg.H = static_cast<int>(std::llround(alpha / eta));        // 128
        cfg.rounds = static_cast<long>(1.0 / (alpha * std::pow(eta, hc.beta)));  // R_grp = 8
        cfg.record_every = cfg.rounds;
        const Vector theta0 = Vector::Zero(4);
        const ManifoldFrame frame = make_frame(model, theta0);

        std::vector<Vector> dphi(static_cast<std::size_t>(hc.seeds));
        for_each_seed(hc.seeds, hc.threads, [&](int s) {
            RunConfig run_cfg = cfg;
            run_cfg.seed = sub_seed(hc.master_seed, kExpMoment, 0, s, 0);
            const TrajectoryRecord rec = run_local_sgd(model, run_cfg, theta0);
            dphi[static_cast<std::size_t>(s)] =
                frame.p_par * (rec.points.back().theta - theta0);
        });

        for (int i = 0; i < 4; ++i) {
            std::vector<double> comp;
            comp.reserve(dphi.size());
            for (const auto& v : dphi) comp.push_back(v[i]);
            const double m = mean_of(comp);
            const double se = std_err(comp);
            rep.assertions.push_back(make_interval_assertion(
                "block_first_moment_" + std::to_string(i), m, 0.0, -3.0 * se, 3.0 * se));
            rows.push_back({0.0, static_cast<double>(i), m, se});
        }
        const Matrix target = (eta_pow / B) * frame.sigma_par;
        for (int i = 2; i < 4; ++i) {
            for (int j = i; j < 4; ++j) {
                std::vector<double> prod;
                prod.reserve(dphi.size());
                for (const auto& v : dphi) prod.push_back(v[i] * v[j]);
                const double m = mean_of(prod);
                const double se = std_err(prod);
                rep.assertions.push_back(make_interval_assertion(
                    "block_second_moment_" + std::to_string(i) + std::to_string(j), m,
                    target(i, j), target(i, j) - 3.0 * se, target(i, j) + 3.0 * se));
                rows.push_back({1.0, static_cast<double>(10 * i + j), m, se});
            }
        }
    }

    {  // QuadraticValley: analytic drift target with the psi-rescaled covariance
        const QuadraticValley model = QuadraticValley::hessian_aligned(1.0);
        const double alpha = 1.0;
        RunConfig cfg;
        cfg.eta = eta;
        cfg.K = K;
        cfg.B_loc = B_loc;
        cfg.H = static_cast<int>(std::llround(alpha / eta));  // 256
        const long r_grp = static_cast<long>(1.0 / (alpha * std::pow(eta, hc.beta)));  // 4
        const long burn = 2;  // lets the fast coordinate reach stationarity
        cfg.rounds = burn + r_grp;
        cfg.record_every = burn;
        Vector theta0(2);
        theta0 << 0.0, 1.0;
        const TrajectoryProbe probe = make_probe(model);

        std::vector<double> dy(static_cast<std::size_t>(hc.seeds), std::nan(""));
        std::vector<double> dx(static_cast<std::size_t>(hc.seeds), std::nan(""));
        std::vector<double> y_start(static_cast<std::size_t>(hc.seeds), std::nan(""));
        for_each_seed(hc.seeds, hc.threads, [&](int s) {
            RunConfig run_cfg = cfg;
            run_cfg.seed = sub_seed(hc.master_seed, kExpMoment, 1, s, 0);
            const TrajectoryRecord rec = run_local_sgd(model, run_cfg, theta0, probe);
            const TrajectoryPoint* start = nullptr;
            const TrajectoryPoint* stop = nullptr;
            for (const auto& p : rec.points) {
                if (p.s == burn) start = &p;
                if (p.s == burn + r_grp) stop = &p;
            }
            if (!start || !stop || !start->phi || !stop->phi) return;
            const std::size_t i = static_cast<std::size_t>(s);
            dx[i] = (*stop->phi)[0] - (*start->phi)[0];
            dy[i] = (*stop->phi)[1] - (*start->phi)[1];
            y_start[i] = (*start->phi)[1];
        });
        const auto strip = [](std::vector<double>& v) {
            v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }),
                    v.end());
        };
        strip(dx);
        strip(dy);
        strip(y_start);
        if (dy.size() < 30)
            throw std::runtime_error("moments: too many valley projection failures");

        Vector zeta(2);
        zeta << 0.0, mean_of(y_start);
        const ManifoldFrame frame = make_frame(model, zeta);
        const Matrix drift_arg =
            frame.sigma + (K - 1.0) * psi_matrix(frame, alpha);
        const Vector target = (eta_pow / (2.0 * B)) * second_diff_phi(model, frame, drift_arg);

        const double my = mean_of(dy), sy = std_err(dy);
        const double mx = mean_of(dx), sx = std_err(dx);
        rep.assertions.push_back(make_interval_assertion("valley_first_moment_y", my, target[1],
                                                         target[1] - 3.0 * sy,
                                                         target[1] + 3.0 * sy));
        rep.assertions.push_back(make_interval_assertion("valley_first_moment_x", mx, target[0],
                                                         target[0] - 3.0 * sx,
                                                         target[0] + 3.0 * sx));
        rep.stats["valley_target_y"] = target[1];
        rep.stats["valley_mean_dy"] = my;
        rep.stats["valley_se_dy"] = sy;
        rows.push_back({2.0, 0.0, mx, sx});
        rows.push_back({2.0, 1.0, my, sy});
    }

    maybe_write(rep, hc, "block_valley", {"part", "component", "mean", "se"}, rows);
    return rep;
}

// ---------------------------------------------------------------------------
// drift ratio

namespace {

struct DecayFit {
    double rate;
    double y_sq_mean;  // mean of (mean y)^2 over the fit window
};

DecayFit fit_decay(const std::vector<double>& times, const std::vector<double>& mean_y) {
    std::vector<double> ts, ls, ys;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (mean_y[i] < 0.2) break;
        ts.push_back(times[i]);
        ls.push_back(std::log(mean_y[i]));
        ys.push_back(mean_y[i] * mean_y[i]);
    }
    if (ts.size() < 3)
        throw std::runtime_error("fit_decay: too few points above the cutoff");
    return {-fit_slope(ts, ls), mean_of(ys)};
}

}  // namespace

Report drift_ratio_experiment(const HarnessConfig& hc) {
    Report rep;
    rep.experiment = "drift_ratio";
    const QuadraticValley model = QuadraticValley::hessian_aligned(1.0);
    Vector theta0(2);
    theta0 << 0.0, 1.0;
    const double eta = 0.02;
    const int K = 8, B_loc = 1;
    const double B = K * B_loc;

    struct Cell {
        std::string name;
        bool parallel;
        int H;
        long rounds;
        long record_every;
    };
    // slow time spans: SGD 8.0, H=1 8.0, etaH=1 2.0, etaH=20 3.2
    const std::vector<Cell> cells = {
        {"sgd", true, 1, 20000, 1000},
        {"local_h1", false, 1, 20000, 1000},
        {"local_etah1", false, 50, 100, 5},
        {"local_etah20", false, 1000, 8, 1},
    };

    std::vector<DecayFit> fits;
    std::vector<std::vector<double>> rows;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const Cell& cell = cells[c];
        RunConfig cfg;
        cfg.eta = eta;
        cfg.K = K;
        cfg.B_loc = B_loc;
        cfg.H = cell.H;
        cfg.rounds = cell.rounds;
        cfg.record_every = cell.record_every;

        std::vector<std::vector<double>> ys(static_cast<std::size_t>(hc.seeds));
        for_each_seed(hc.seeds, hc.threads, [&](int s) {
            RunConfig run_cfg = cfg;
            run_cfg.seed = sub_seed(hc.master_seed, kExpDrift, c, s, 0);
            const TrajectoryRecord rec = cell.parallel
                                             ? run_parallel_sgd(model, run_cfg, theta0)
                                             : run_local_sgd(model, run_cfg, theta0);
            std::vector<double>& out = ys[static_cast<std::size_t>(s)];
            out.reserve(rec.points.size());
            for (const auto& p : rec.points) out.push_back(p.theta[1]);
        });
        const std::size_t n_pts = ys[0].size();
        std::vector<double> times, mean_y;
        for (std::size_t i = 0; i < n_pts; ++i) {
            std::vector<double> vals;
            vals.reserve(ys.size());
            for (const auto& v : ys) vals.push_back(v.at(i));
            const double t = static_cast<double>(i) * cell.record_every * cell.H * eta * eta;
            times.push_back(t);
            mean_y.push_back(mean_of(vals));
            rows.push_back({static_cast<double>(c), t, mean_y.back()});
        }
        fits.push_back(fit_decay(times, mean_y));
        rep.stats["rate_" + cell.name] = fits.back().rate;
    }

    const double rate_sgd = fits[0].rate;
    rep.stats["rate_sgd_theory"] = 1.0 / (2.0 * B);
    rep.assertions.push_back(make_interval_assertion(
        "drift_ratio_h1", fits[1].rate / rate_sgd, 1.0, 0.9, 1.1));
    rep.assertions.push_back(make_interval_assertion(
        "drift_ratio_etah20", fits[3].rate / rate_sgd, static_cast<double>(K), 0.85 * K,
        1.15 * K));
    const double formula =
        1.0 + (K - 1.0) * psi(2.0 * 1.0 * (1.0 + fits[2].y_sq_mean));
    rep.assertions.push_back(make_interval_assertion(
        "drift_ratio_etah1_vs_psi", fits[2].rate / rate_sgd / formula, 1.0, 0.85, 1.15));
    rep.stats["psi_formula_etah1"] = formula;
    maybe_write(rep, hc, model.name(), {"cell", "t", "mean_y"}, rows);
    return rep;
}

// ---------------------------------------------------------------------------
// linear scaling rule

Report lsr_experiment(const HarnessConfig& hc) {
    Report rep;
    rep.experiment = "lsr";
    const QuadraticValley model = QuadraticValley::isotropic(1.0);
    Vector zeta0(2);
    zeta0 << 0.0, 1.0;
    const ManifoldFrame frame = make_frame(model, zeta0);
    const double B = 2.0, K = 4.0, kappa = 2.0, eta_h = 1.0;

    const DriftDiffusion sgd = drift_and_diffusion(model, frame, SdeKind::sgd(B));
    const DriftDiffusion sgd_scaled = drift_and_diffusion(model, frame, SdeKind::sgd(kappa * B));
    const double drift_dev = (kappa * sgd_scaled.b - sgd.b).norm();
    const double diff_dev = (std::sqrt(kappa) * sgd_scaled.A - sgd.A).norm();
    rep.assertions.push_back(
        make_interval_assertion("lsr_sgd_drift_invariance", drift_dev, 0.0, 0.0, 1e-12));
    rep.assertions.push_back(
        make_interval_assertion("lsr_sgd_diffusion_invariance", diff_dev, 0.0, 0.0, 1e-12));

    const DriftDiffusion lsr =
        drift_and_diffusion(model, frame, SdeKind::local_lsr(B, K, kappa, eta_h));
    const Vector drift2_expected =
        sgd.b - (kappa * K - 1.0) / (2.0 * B) *
                    model.third_contract(frame.zeta, hat_psi(frame, eta_h));
    rep.assertions.push_back(make_interval_assertion(
        "lsr_local_drift2_coefficient", (lsr.b - drift2_expected).norm(), 0.0, 0.0, 1e-12));
    rep.stats["drift2_coefficient"] = (kappa * K - 1.0) / (2.0 * B);

    const DriftDiffusion kap1 =
        drift_and_diffusion(model, frame, SdeKind::kappa_form(1.0 / B, 1.0 / (2.0 * B)));
    rep.assertions.push_back(make_interval_assertion(
        "kappa_form_reduces_to_sgd",
        (kap1.b - sgd.b).norm() + (kap1.A - sgd.A).norm(), 0.0, 0.0, 1e-12));
    const DriftDiffusion inf = drift_and_diffusion(model, frame, SdeKind::local_inf(B, K));
    const DriftDiffusion kap2 =
        drift_and_diffusion(model, frame, SdeKind::kappa_form(1.0 / B, K / (2.0 * B)));
    rep.assertions.push_back(make_interval_assertion(
        "kappa_form_reduces_to_local_inf",
        (kap2.b - inf.b).norm() + (kap2.A - inf.A).norm(), 0.0, 0.0, 1e-12));
    const DriftDiffusion local_k1 =
        drift_and_diffusion(model, frame, SdeKind::local(B, 1.0, eta_h));
    rep.assertions.push_back(make_interval_assertion(
        "local_k1_reduces_to_sgd", (local_k1.b - sgd.b).norm() + (local_k1.A - sgd.A).norm(),
        0.0, 0.0, 1e-12));
    rep.assertions.push_back(make_interval_assertion(
        "local_inf_k_times_drift", (inf.b - K * sgd.b).norm(), 0.0, 0.0, 1e-12));

    {
        RunConfig cfg;
        cfg.eta = 0.1;
        cfg.K = 4;
        cfg.H = 10;
        const RunConfig scaled = apply_lsr(cfg, 2.0);
        const double dev = std::abs(scaled.eta - 0.2) + std::abs(scaled.K - 8.0) +
                           std::abs(scaled.H - 5.0) + std::abs(scaled.alpha() - cfg.alpha());
        rep.assertions.push_back(
            make_interval_assertion("apply_lsr_example", dev, 0.0, 0.0, 1e-12));
    }

    // statistical part: Sgd{B0} over T against Sgd{kappa*B0} over kappa*T
    const double B0 = 1.0, T = 0.5, dt = 1e-3;
    const int seeds = std::max(30, hc.seeds);
    std::vector<double> g_base(static_cast<std::size_t>(seeds));
    std::vector<double> g_scaled(static_cast<std::size_t>(seeds));
    for_each_seed(seeds, hc.threads, [&](int s) {
        const TrajectoryRecord a =
            integrate_slow_sde(model, SdeKind::sgd(B0), zeta0, T, dt,
                               sub_seed(hc.master_seed, kExpLsr, 0, s, 0), 1000000);
        g_base[static_cast<std::size_t>(s)] = a.points.back().theta[1];
        const TrajectoryRecord b =
            integrate_slow_sde(model, SdeKind::sgd(kappa * B0), zeta0, kappa * T, dt,
                               sub_seed(hc.master_seed, kExpLsr, 1, s, 0), 1000000);
        g_scaled[static_cast<std::size_t>(s)] = b.points.back().theta[1];
    });
    const double diff = mean_of(g_base) - mean_of(g_scaled);
    const double se = std::hypot(std_err(g_base), std_err(g_scaled));
    rep.assertions.push_back(make_interval_assertion("lsr_two_sample_mean", diff, 0.0, -3.0 * se,
                                                     3.0 * se));
    rep.stats["two_sample_se"] = se;

    std::vector<std::vector<double>> rows;
    for (int s = 0; s < seeds; ++s)
        rows.push_back({static_cast<double>(s), g_base[static_cast<std::size_t>(s)],
                        g_scaled[static_cast<std::size_t>(s)]});
    maybe_write(rep, hc, model.name(), {"seed", "g_base", "g_scaled"}, rows);
    return rep;
}

}  // namespace slowlab
