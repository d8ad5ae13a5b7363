#include "slowlab/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "slowlab/csv.hpp"

namespace slowlab {

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s = {
        {"run",
         {"model", "noise", "noise_param", "theta0", "algorithm", "eta", "K", "B_loc", "H",
          "rounds", "t0", "sampler", "seed", "record_every", "project", "eta_list"}},
        {"sde",
         {"kind", "B", "K", "etaH", "kappa", "kappa1", "kappa2", "dt", "T", "seed",
          "record_every", "zeta0"}},
        {"harness", {"experiment", "seeds", "master_seed", "q_delta", "beta", "file_stamp"}},
    };
    return s;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

void check_key(const std::string& section, const std::string& key) {
    const auto it = schema().find(section);
    if (it == schema().end())
        throw ConfigError("unknown section: [" + section + "] (valid: run, sde, harness)");
    if (it->second.count(key))
        return;
    std::string valid;
    for (const auto& k : it->second) valid += (valid.empty() ? "" : ", ") + k;
    throw ConfigError("unknown key: " + section + "." + key + " (valid keys: " + valid + ")");
}

using KvMap = std::map<std::pair<std::string, std::string>, std::string>;

void insert_kv(KvMap& kv, const std::string& section, const std::string& key,
               const std::string& value) {
    check_key(section, key);
    kv[{section, key}] = value;
}

double as_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("key " + key + ": expected a number, got '" + v + "'");
    }
}

long as_long(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long d = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("key " + key + ": expected an integer, got '" + v + "'");
    }
}

std::uint64_t as_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const std::uint64_t d = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("key " + key + ": expected an unsigned integer, got '" + v + "'");
    }
}

bool as_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("key " + key + ": expected true/false, got '" + v + "'");
}

std::vector<double> as_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(as_double(key, item));
    }
    if (out.empty())
        throw ConfigError("key " + key + ": expected a comma-separated number list");
    return out;
}

std::string strip_quotes(std::string v) {
    if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') ||
                          (v.front() == '\'' && v.back() == '\'')))
        return v.substr(1, v.size() - 2);
    return v;
}

AppConfig resolve(const KvMap& kv) {
    AppConfig cfg;
    const auto get = [&](const std::string& sec, const std::string& key) -> const std::string* {
        const auto it = kv.find({sec, key});
        return it == kv.end() ? nullptr : &it->second;
    };

    if (const auto* v = get("run", "model")) cfg.run.model.name = strip_quotes(*v);
    if (const auto* v = get("run", "noise")) cfg.run.model.noise = strip_quotes(*v);
    if (const auto* v = get("run", "noise_param"))
        cfg.run.model.noise_param = as_double("run.noise_param", *v);
    if (const auto* v = get("run", "theta0")) cfg.run.model.theta0 = as_list("run.theta0", *v);
    if (const auto* v = get("run", "algorithm")) cfg.run.algorithm = strip_quotes(*v);
    if (const auto* v = get("run", "eta")) cfg.run.cfg.eta = as_double("run.eta", *v);
    if (const auto* v = get("run", "K")) cfg.run.cfg.K = static_cast<int>(as_long("run.K", *v));
    if (const auto* v = get("run", "B_loc"))
        cfg.run.cfg.B_loc = static_cast<int>(as_long("run.B_loc", *v));
    if (const auto* v = get("run", "H")) cfg.run.cfg.H = static_cast<int>(as_long("run.H", *v));
    if (const auto* v = get("run", "rounds")) cfg.run.cfg.rounds = as_long("run.rounds", *v);
    if (const auto* v = get("run", "t0")) cfg.run.cfg.t0 = as_long("run.t0", *v);
    if (const auto* v = get("run", "record_every"))
        cfg.run.cfg.record_every = as_long("run.record_every", *v);
    if (const auto* v = get("run", "seed")) {
        cfg.run.cfg.seed = as_u64("run.seed", *v);
        cfg.seed_set_explicitly = true;
    }
    if (const auto* v = get("run", "sampler")) {
        const std::string s = strip_quotes(*v);
        if (s == "with")
            cfg.run.cfg.sampler = SamplerKind::WithReplacement;
        else if (s == "without")
            cfg.run.cfg.sampler = SamplerKind::WithoutReplacement;
        else
            throw ConfigError("key run.sampler: expected 'with' or 'without', got '" + s + "'");
    }
    if (const auto* v = get("run", "project")) cfg.run.project = as_bool("run.project", *v);
    if (const auto* v = get("run", "eta_list")) cfg.run.eta_list = as_list("run.eta_list", *v);

    if (const auto* v = get("sde", "kind")) cfg.sde.kind = strip_quotes(*v);
    if (const auto* v = get("sde", "B")) cfg.sde.B = as_double("sde.B", *v);
    if (const auto* v = get("sde", "K")) cfg.sde.K = as_double("sde.K", *v);
    if (const auto* v = get("sde", "etaH")) cfg.sde.eta_h = as_double("sde.etaH", *v);
    if (const auto* v = get("sde", "kappa")) cfg.sde.kappa = as_double("sde.kappa", *v);
    if (const auto* v = get("sde", "kappa1")) cfg.sde.kappa1 = as_double("sde.kappa1", *v);
    if (const auto* v = get("sde", "kappa2")) cfg.sde.kappa2 = as_double("sde.kappa2", *v);
    if (const auto* v = get("sde", "dt")) cfg.sde.dt = as_double("sde.dt", *v);
    if (const auto* v = get("sde", "T")) cfg.sde.T = as_double("sde.T", *v);
    if (const auto* v = get("sde", "seed")) {
        cfg.sde.seed = as_u64("sde.seed", *v);
        cfg.seed_set_explicitly = true;
    }
    if (const auto* v = get("sde", "record_every"))
        cfg.sde.record_every = as_long("sde.record_every", *v);
    if (const auto* v = get("sde", "zeta0")) cfg.sde.zeta0 = as_list("sde.zeta0", *v);

    if (const auto* v = get("harness", "experiment")) cfg.harness.experiment = strip_quotes(*v);
    if (const auto* v = get("harness", "seeds"))
        cfg.harness.seeds = static_cast<int>(as_long("harness.seeds", *v));
    if (const auto* v = get("harness", "master_seed")) {
        cfg.harness.master_seed = as_u64("harness.master_seed", *v);
        cfg.seed_set_explicitly = true;
    }
    if (const auto* v = get("harness", "q_delta"))
        cfg.harness.q_delta = as_double("harness.q_delta", *v);
    if (const auto* v = get("harness", "beta")) cfg.harness.beta = as_double("harness.beta", *v);
    if (const auto* v = get("harness", "file_stamp"))
        cfg.harness.file_stamp = strip_quotes(*v);
    return cfg;
}

void apply_override(KvMap& kv, const std::string& item) {
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override '" + item + "' is not key=value");
    std::string key = trim(item.substr(0, eq));
    const std::string value = trim(item.substr(eq + 1));
    std::string section = "run";
    const std::size_t dot = key.find('.');
    if (dot != std::string::npos) {
        section = key.substr(0, dot);
        key = key.substr(dot + 1);
    }
    insert_kv(kv, section, key, value);
}

KvMap parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config file " + path);
    KvMap kv;
    std::string section = "run";
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed section");
            section = trim(line.substr(1, line.size() - 2));
            if (!schema().count(section))
                throw ConfigError("unknown section: [" + section + "] (valid: run, sde, harness)");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        insert_kv(kv, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return kv;
}

}  // namespace

AppConfig parse_config(const std::string& path, const std::vector<std::string>& overrides) {
    KvMap kv = parse_file(path);
    for (const auto& o : overrides) apply_override(kv, o);
    return resolve(kv);
}

AppConfig parse_overrides(const std::vector<std::string>& overrides) {
    KvMap kv;
    for (const auto& o : overrides) apply_override(kv, o);
    return resolve(kv);
}

std::string resolved_config_text(const AppConfig& cfg) {
    std::ostringstream os;
    os << "[run]\n"
       << "model = " << cfg.run.model.name << '\n'
       << "noise = " << cfg.run.model.noise << '\n'
       << "noise_param = " << format_double(cfg.run.model.noise_param) << '\n';
    if (!cfg.run.model.theta0.empty()) {
        os << "theta0 = ";
        for (std::size_t i = 0; i < cfg.run.model.theta0.size(); ++i)
            os << (i ? "," : "") << format_double(cfg.run.model.theta0[i]);
        os << '\n';
    }
    os << "algorithm = " << cfg.run.algorithm << '\n'
       << "eta = " << format_double(cfg.run.cfg.eta) << '\n'
       << "K = " << cfg.run.cfg.K << '\n'
       << "B_loc = " << cfg.run.cfg.B_loc << '\n'
       << "H = " << cfg.run.cfg.H << '\n'
       << "rounds = " << cfg.run.cfg.rounds << '\n'
       << "t0 = " << cfg.run.cfg.t0 << '\n'
       << "sampler = "
       << (cfg.run.cfg.sampler == SamplerKind::WithReplacement ? "with" : "without") << '\n'
       << "seed = " << cfg.run.cfg.seed << '\n'
       << "record_every = " << cfg.run.cfg.record_every << '\n'
       << "project = " << (cfg.run.project ? "true" : "false") << '\n'
       << "# alpha = " << format_double(cfg.run.cfg.alpha()) << '\n';
    if (!cfg.run.eta_list.empty()) {
        os << "eta_list = ";
        for (std::size_t i = 0; i < cfg.run.eta_list.size(); ++i)
            os << (i ? "," : "") << format_double(cfg.run.eta_list[i]);
        os << '\n';
    }
    os << "\n[sde]\n"
       << "kind = " << cfg.sde.kind << '\n'
       << "B = " << format_double(cfg.sde.B) << '\n'
       << "K = " << format_double(cfg.sde.K) << '\n'
       << "etaH = " << format_double(cfg.sde.eta_h) << '\n'
       << "kappa = " << format_double(cfg.sde.kappa) << '\n'
       << "kappa1 = " << format_double(cfg.sde.kappa1) << '\n'
       << "kappa2 = " << format_double(cfg.sde.kappa2) << '\n'
       << "dt = " << format_double(cfg.sde.dt) << '\n'
       << "T = " << format_double(cfg.sde.T) << '\n'
       << "seed = " << cfg.sde.seed << '\n'
       << "record_every = " << cfg.sde.record_every << '\n';
    if (!cfg.sde.zeta0.empty()) {
        os << "zeta0 = ";
        for (std::size_t i = 0; i < cfg.sde.zeta0.size(); ++i)
            os << (i ? "," : "") << format_double(cfg.sde.zeta0[i]);
        os << '\n';
    }
    os << "\n[harness]\n"
       << "experiment = " << cfg.harness.experiment << '\n'
       << "seeds = " << cfg.harness.seeds << '\n'
       << "master_seed = " << cfg.harness.master_seed << '\n'
       << "q_delta = " << format_double(cfg.harness.q_delta) << '\n'
       << "beta = " << format_double(cfg.harness.beta) << '\n';
    if (!cfg.harness.file_stamp.empty()) os << "file_stamp = " << cfg.harness.file_stamp << '\n';
    return os.str();
}

}  // namespace slowlab
