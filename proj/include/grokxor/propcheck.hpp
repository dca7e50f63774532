#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "grokxor/config.hpp"
#include "grokxor/dataset.hpp"
#include "grokxor/rng.hpp"
#include "grokxor/trainer.hpp"

namespace grokxor {

// Good-run condition suites. Gated suites have strong (Hoeffding-type)
// probability guarantees at the paper's scale; the rest are reported only,
// because their 1 - O(n^-eps) guarantees are numerically vacuous at n = 200.
const std::vector<std::string>& all_suite_ids();
bool suite_is_gated(const std::string& id);

struct SuiteResult {
    std::string suite;
    std::int64_t seeds_run = 0;
    std::int64_t pass_count = 0;
    double pass_rate = 0.0;
    // measured/threshold at its worst across seeds: max for <=-style
    // conditions, min for >=-style. ratio <= 1 resp. >= 1 means pass.
    double worst_margin = 0.0;
    bool gated = false;
    double wall_seconds = 0.0;
    std::map<std::string, double> notes;  // extra diagnostics (e_nu, rates, ...)
};

// Effective config for one seed index of a multi-seed study: the per-seed
// master seed is derived from (cfg.seed, index).
RunConfig per_seed_config(const RunConfig& cfg, std::int64_t seed_index);

// Fresh dataset + init per seed; evaluates the requested suites
// (B1..B4, C1, C2, D1..D4, or "all") and aggregates.
std::vector<SuiteResult> run_condition_suite(const RunConfig& cfg,
                                             const std::vector<std::int64_t>& seeds,
                                             const std::vector<std::string>& suites);

struct OraclePairResult {
    std::string pair;            // "mu1" or "mu2"
    double threshold = 0.0;      // sqrt(n) by default
    double estimate = 0.0;       // MC frequency of |Delta| > threshold
    double std_error = 0.0;      // binomial SE of the estimate
    double normal_approx = 0.0;  // two-sided normal tail with the exact
                                 // mean shift and variance of Delta
};

// Monte-Carlo estimate of P(|D_{nu,j}^(0)| > sqrt(n)) under the independent
// sign reduction Delta = Binomial(|A1|, 1/2) - Binomial(|A2|, 1/2) with
// A1 = C_nu union N_{-nu}, A2 = C_{-nu} union N_nu. Used to contextualize
// the measured D2 rates. threshold <= 0 means sqrt(total count).
std::vector<OraclePairResult> anti_concentration_oracle(const ClusterCounts& counts,
                                                        std::int64_t trials, Rng& stream,
                                                        double threshold = 0.0);

struct AggregateCurves {
    std::vector<std::int64_t> t;
    std::vector<std::string> columns;
    // values[column][t-index] -> {mean, q10, q90}
    struct Stat {
        double mean = 0.0, q10 = 0.0, q90 = 0.0;
    };
    std::vector<std::vector<Stat>> stats;
};

// Full training per seed, aligned by t; mean and 10/90% quantiles per
// StepMetrics column. Optional hooks are applied to every run (recording
// stride etc.); per-seed traces are returned through on_trace if set.
AggregateCurves aggregate_runs(const RunConfig& cfg, const std::vector<std::int64_t>& seeds,
                               std::int64_t steps, const RunHooks& hooks = {},
                               const std::function<void(std::int64_t, const TrainTrace&)>&
                                   on_trace = {});

std::string curves_to_csv(const AggregateCurves& curves);

}  // namespace grokxor
