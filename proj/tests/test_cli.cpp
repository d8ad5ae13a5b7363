#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "slowlab/config.hpp"
#include "slowlab/csv.hpp"
#include "slowlab/svg.hpp"

using namespace slowlab;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("slowlab_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string write_file(const TempDir& dir, const std::string& name, const std::string& body) {
    const std::string p = dir.file(name);
    std::ofstream out(p, std::ios::binary);
    out << body;
    return p;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("config file parsing and overrides") {
    TempDir dir;
    const std::string p = write_file(dir, "a.cfg",
                                     "# comment line\n"
                                     "eta = 0.01\n"
                                     "K = 2\n"
                                     "H = 50\n"
                                     "[sde]\n"
                                     "kind = local  # trailing comment\n"
                                     "T = 0.4\n"
                                     "[harness]\n"
                                     "seeds = 25\n");
    const AppConfig cfg = parse_config(p, {});
    CHECK(cfg.run.cfg.eta == doctest::Approx(0.01));
    CHECK(cfg.run.cfg.K == 2);
    CHECK(cfg.run.cfg.H == 50);
    CHECK(cfg.run.cfg.alpha() == doctest::Approx(0.5));
    CHECK(cfg.sde.kind == "local");
    CHECK(cfg.sde.T == doctest::Approx(0.4));
    CHECK(cfg.harness.seeds == 25);
    CHECK_FALSE(cfg.seed_set_explicitly);

    // dotted and bare overrides; bare keys land in [run]
    const AppConfig ov = parse_config(p, {"eta=0.02", "sde.T=1.5", "harness.master_seed=7"});
    CHECK(ov.run.cfg.eta == doctest::Approx(0.02));
    CHECK(ov.run.cfg.alpha() == doctest::Approx(1.0));
    CHECK(ov.sde.T == doctest::Approx(1.5));
    CHECK(ov.harness.master_seed == 7);
    CHECK(ov.seed_set_explicitly);
}

TEST_CASE("config rejects unknown keys and bad values") {
    TempDir dir;
    const std::string p = write_file(dir, "bad.cfg", "momentum = 0.9\n");
    try {
        parse_config(p, {});
        FAIL("expected rejection");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("momentum") != std::string::npos);
        CHECK(msg.find("valid keys") != std::string::npos);
        CHECK(msg.find("eta") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_overrides({"run.eta=fast"}), ConfigError);
    CHECK_THROWS_AS(parse_overrides({"run.rounds=2.5"}), ConfigError);
    CHECK_THROWS_AS(parse_overrides({"run.project=maybe"}), ConfigError);
    CHECK_THROWS_AS(parse_overrides({"gpu.count=1"}), ConfigError);
    CHECK_THROWS_AS(parse_overrides({"run.eta"}), ConfigError);
    CHECK_THROWS_AS(parse_overrides({"run.sampler=shuffled"}), ConfigError);
    CHECK_THROWS_AS(parse_config(dir.file("missing.cfg"), {}), ConfigError);
}

TEST_CASE("resolved config text reports every effective value") {
    const AppConfig cfg = parse_overrides({"eta=0.005", "H=100", "run.theta0=0,1"});
    const std::string text = resolved_config_text(cfg);
    CHECK(text.find("[run]") != std::string::npos);
    CHECK(text.find("eta = 0.005") != std::string::npos);
    CHECK(text.find("# alpha = 0.5") != std::string::npos);
    CHECK(text.find("theta0 = 0,1") != std::string::npos);
    CHECK(text.find("[sde]") != std::string::npos);
    CHECK(text.find("[harness]") != std::string::npos);
    CHECK(text.find("master_seed = 2024") != std::string::npos);
}

TEST_CASE("csv round trip is bit exact") {
    TempDir dir;
    TrajectoryRecord rec;
    for (int i = 0; i < 3; ++i) {
        TrajectoryPoint p;
        p.s = i;
        p.t = 0.1 * i + 1e-17;
        p.theta = Vector(2);
        p.theta << std::sqrt(2.0) * i, -1.0 / 3.0;
        if (i != 1) {
            p.phi = Vector(2);
            *p.phi << 0.0, 0.12345678901234567;
            p.dist_manifold = 0.25;
        }
        p.loss = 1e-30 * i;
        p.tr_hess = 2.0 + i;
        rec.points.push_back(std::move(p));
    }
    const std::string path = dir.file("t.csv");
    emit_csv(rec, 2, path);

    const std::string raw = slurp(path);
    CHECK(raw.rfind("s,t,theta_0,theta_1,phi_0,phi_1,dist_manifold,loss,tr_hess\n", 0) == 0);
    CHECK(raw.find("\r") == std::string::npos);
    // header + 3 rows
    CHECK(std::count(raw.begin(), raw.end(), '\n') == 4);

    const TrajectoryRecord back = parse_csv(path, 2);
    REQUIRE(back.points.size() == rec.points.size());
    for (std::size_t i = 0; i < rec.points.size(); ++i) {
        const auto& a = rec.points[i];
        const auto& b = back.points[i];
        CHECK(a.s == b.s);
        CHECK(a.t == b.t);
        CHECK((a.theta - b.theta).norm() == 0.0);
        CHECK(a.phi.has_value() == b.phi.has_value());
        if (a.phi) CHECK((*a.phi - *b.phi).norm() == 0.0);
        CHECK(a.loss == b.loss);
        CHECK(a.tr_hess == b.tr_hess);
    }
}

TEST_CASE("empty trajectory serializes as a bare header") {
    TempDir dir;
    const std::string path = dir.file("empty.csv");
    emit_csv(TrajectoryRecord{}, 2, path);
    CHECK(slurp(path) == "s,t,theta_0,theta_1,phi_0,phi_1,dist_manifold,loss,tr_hess\n");
    CHECK(parse_csv(path, 2).points.empty());
}

TEST_CASE("numeric tables share the formatting contract") {
    TempDir dir;
    const std::string path = dir.file("table.csv");
    write_table(path, {"a", "b"}, {{1.0, 0.1}, {2.0, 0.2}});
    const std::string raw = slurp(path);
    CHECK(raw.rfind("a,b\n", 0) == 0);
    CHECK(raw.find("0.1") != std::string::npos);
    CHECK(std::count(raw.begin(), raw.end(), '\n') == 3);
}

TEST_CASE("svg output is deterministic and validates input") {
    TempDir dir;
    Series s;
    s.name = "psi";
    for (int i = 1; i <= 50; ++i) {
        const double x = 0.2 * i;
        s.x.push_back(x);
        s.y.push_back((std::exp(-x) - 1.0 + x) / x);
    }
    PlotSpec spec;
    spec.title = "psi curve";
    spec.xlabel = "x";
    spec.ylabel = "psi";
    emit_svg({s}, spec, dir.file("a.svg"));
    emit_svg({s}, spec, dir.file("b.svg"));
    const std::string a = slurp(dir.file("a.svg"));
    CHECK(a == slurp(dir.file("b.svg")));
    CHECK(a.find("<svg") != std::string::npos);
    CHECK(a.find("psi curve") != std::string::npos);
    CHECK(a.find("</svg>") != std::string::npos);

    CHECK_THROWS_AS(emit_svg({}, spec, dir.file("c.svg")), std::invalid_argument);
    Series ragged = s;
    ragged.y.pop_back();
    CHECK_THROWS_AS(emit_svg({ragged}, spec, dir.file("c.svg")), std::invalid_argument);
    Series negative = s;
    negative.y[0] = -1.0;
    PlotSpec logspec = spec;
    logspec.log_y = true;
    CHECK_THROWS_AS(emit_svg({negative}, logspec, dir.file("c.svg")), std::invalid_argument);
    // log axes accept positive data
    emit_svg({s}, logspec, dir.file("d.svg"));
    CHECK(!slurp(dir.file("d.svg")).empty());
}
