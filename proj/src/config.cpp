#include "grokxor/config.hpp"

#include <cmath>
#include <charconv>
#include <cstdio>
#include <set>
#include <sstream>
#include <vector>

namespace grokxor {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing junk");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("unparsable value for key '" + key + "': '" + value + "'");
    }
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size())
        throw ConfigError("unparsable value for key '" + key + "': '" + value + "'");
    return v;
}

std::string fmt_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

const std::set<std::string> kRequiredKeys = {
    "n", "p", "mu_norm", "eta", "m", "omega_init", "alpha", "steps", "seed"};
const std::set<std::string> kOptionalKeys = {"n_test", "epsilon", "c_const"};

void assign(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "n") cfg.n = parse_int(key, value);
    else if (key == "p") cfg.p = parse_int(key, value);
    else if (key == "mu_norm") cfg.mu_norm = parse_real(key, value);
    else if (key == "eta") cfg.eta = parse_real(key, value);
    else if (key == "m") cfg.m = parse_int(key, value);
    else if (key == "omega_init") cfg.omega_init = parse_real(key, value);
    else if (key == "alpha") cfg.alpha = parse_real(key, value);
    else if (key == "steps") cfg.steps = parse_int(key, value);
    else if (key == "seed") cfg.seed = parse_int(key, value);
    else if (key == "n_test") cfg.n_test = parse_int(key, value);
    else if (key == "epsilon") cfg.epsilon = parse_real(key, value);
    else if (key == "c_const") cfg.c_const = parse_real(key, value);
    else throw ConfigError("unknown key '" + key + "'");
}

}  // namespace

void RunConfig::validate() const {
    if (n <= 0) throw ConfigError("n must be a positive integer");
    if (p <= 0) throw ConfigError("p must be a positive integer");
    if (!(mu_norm > 0.0) || !std::isfinite(mu_norm))
        throw ConfigError("mu_norm must be a positive real");
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw ConfigError("eta must be >= 0");
    if (!(eta < 0.5)) throw ConfigError("eta must be < 0.5");
    if (m <= 0) throw ConfigError("m must be a positive integer");
    if (!(omega_init >= 0.0) || !std::isfinite(omega_init))
        throw ConfigError("omega_init must be a nonnegative real");
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw ConfigError("alpha must be a positive real");
    if (steps < 0) throw ConfigError("steps must be a nonnegative integer");
    if (n_test <= 0) throw ConfigError("n_test must be a positive integer");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    if (!(epsilon < 0.25e-3)) throw ConfigError("epsilon must be < 0.00025");
    if (!(c_const > 0.0) || !std::isfinite(c_const))
        throw ConfigError("c_const must be a positive real");
    if (!(mu_sq() < static_cast<double>(p)))
        throw ConfigError("mu_norm must satisfy mu_norm^2 < p");
}

RunConfig RunConfig::paper(std::int64_t seed) {
    RunConfig cfg;
    cfg.n = 200;
    cfg.p = 40000;
    cfg.mu_norm = 2.5 * std::sqrt(static_cast<double>(cfg.p) / static_cast<double>(cfg.n));
    cfg.eta = 0.05;
    cfg.m = 1000;
    cfg.omega_init = 1e-15;
    cfg.alpha = 1e-12;
    cfg.steps = 15;
    cfg.seed = seed;
    return cfg;
}

RunConfig load_config(const std::string& text) {
    RunConfig cfg;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        if (seen.count(key)) throw ConfigError("duplicate key '" + key + "'");
        seen.insert(key);
        assign(cfg, key, value);
    }
    for (const auto& key : kRequiredKeys)
        if (!seen.count(key)) throw ConfigError("missing required key '" + key + "'");
    cfg.validate();
    return cfg;
}

std::string dump_config(const RunConfig& cfg) {
    std::ostringstream out;
    out << "n = " << cfg.n << "\n";
    out << "p = " << cfg.p << "\n";
    out << "mu_norm = " << fmt_real(cfg.mu_norm) << "\n";
    out << "eta = " << fmt_real(cfg.eta) << "\n";
    out << "m = " << cfg.m << "\n";
    out << "omega_init = " << fmt_real(cfg.omega_init) << "\n";
    out << "alpha = " << fmt_real(cfg.alpha) << "\n";
    out << "steps = " << cfg.steps << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "n_test = " << cfg.n_test << "\n";
    out << "epsilon = " << fmt_real(cfg.epsilon) << "\n";
    out << "c_const = " << fmt_real(cfg.c_const) << "\n";
    return out.str();
}

RunConfig apply_overrides(RunConfig cfg, const std::map<std::string, std::string>& overrides) {
    for (const auto& [key, value] : overrides) assign(cfg, key, value);
    cfg.validate();
    return cfg;
}

AssumptionReport check_assumptions(const RunConfig& cfg) {
    const double n = static_cast<double>(cfg.n);
    const double p = static_cast<double>(cfg.p);
    const double m = static_cast<double>(cfg.m);
    const double mu2 = cfg.mu_sq();
    const double C = cfg.c_const;

    AssumptionReport report;
    auto set = [](AssumptionEntry& e, const char* name, const char* cond, double lhs, double rhs) {
        e.name = name;
        e.condition = cond;
        e.lhs = lhs;
        e.rhs = rhs;
        e.ratio = lhs / rhs;
        e.satisfied = lhs >= rhs;
    };
    set(report.entries[0], "A1", "|mu|^2 >= C n^0.51 sqrt(p)",
        mu2, C * std::pow(n, 0.51) * std::sqrt(p));
    set(report.entries[1], "A2", "p >= C n^2 |mu|^2",
        p, C * n * n * mu2);
    set(report.entries[2], "A3", "1/C >= eta",
        1.0 / C, cfg.eta);
    set(report.entries[3], "A4", "1/(C n p) >= alpha",
        1.0 / (C * n * p), cfg.alpha);
    set(report.entries[4], "A5", "alpha |mu|^2 >= omega_init n m^1.5 p",
        cfg.alpha * mu2, cfg.omega_init * n * std::pow(m, 1.5) * p);
    set(report.entries[5], "A6", "m >= C n^0.02",
        m, C * std::pow(n, 0.02));
    report.t_max = 1.0 / (std::sqrt(n) * p * cfg.alpha) - 2.0;
    return report;
}

}  // namespace grokxor
