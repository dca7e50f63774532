#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <map>
#include <stdexcept>

namespace grokxor {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// All scalar hyperparameters of one experiment.
struct RunConfig {
    std::int64_t n = 0;          // sample count
    std::int64_t p = 0;          // ambient dimension
    double mu_norm = 0.0;        // cluster-mean norm |mu|
    double eta = 0.0;            // label-flip probability, in [0, 1/2)
    std::int64_t m = 0;          // neuron count
    double omega_init = 0.0;     // init std
    double alpha = 0.0;          // step size
    std::int64_t steps = 0;      // training horizon T
    std::int64_t seed = 0;       // master RNG seed
    std::int64_t n_test = 1000;  // clean test samples for error estimates
    double epsilon = 2e-4;       // universal eps for condition thresholds
    double c_const = 1.0;        // universal constant C in the assumptions

    double mu_sq() const { return mu_norm * mu_norm; }
    void validate() const;  // throws ConfigError naming the offending key

    // The paper's experimental configuration (alpha = 1e-12 variant).
    static RunConfig paper(std::int64_t seed = 0);
};

// Parse a `key = value` document (# comments, blank lines allowed). Every
// required key exactly once; unknown or duplicate keys rejected. Defaults
// apply only to n_test, epsilon, c_const.
RunConfig load_config(const std::string& text);

// Serialize in the same key=value form; load_config(dump_config(c)) == c.
std::string dump_config(const RunConfig& cfg);

// Apply `key=value` overrides on top of a config (same keys as the file).
RunConfig apply_overrides(RunConfig cfg, const std::map<std::string, std::string>& overrides);

struct AssumptionEntry {
    std::string name;       // "A1".."A6"
    std::string condition;  // human-readable, in normalized lhs >= rhs form
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;     // lhs / rhs; > 1 means satisfied with margin
    bool satisfied = false;
};

struct AssumptionReport {
    std::array<AssumptionEntry, 6> entries;
    double t_max = 0.0;  // 1/(sqrt(n) p alpha) - 2, reported even if negative
    bool all_satisfied() const {
        for (const auto& e : entries)
            if (!e.satisfied) return false;
        return true;
    }
};

// Evaluate assumptions A1..A6 with C = cfg.c_const. Pure report, no gating.
// Every entry is normalized so that satisfied <=> lhs >= rhs.
AssumptionReport check_assumptions(const RunConfig& cfg);

}  // namespace grokxor
