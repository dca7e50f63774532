#include "grokxor/propcheck.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "grokxor/instrument.hpp"
#include "grokxor/network.hpp"
#include "grokxor/parallel.hpp"

namespace grokxor {

namespace {

const std::vector<std::string> kSuiteIds = {"B1", "B2", "B3", "B4", "C1",
                                            "C2", "D1", "D2", "D3", "D4"};
const std::set<std::string> kGated = {"B1", "B2", "B3", "C1", "C2", "D1"};

double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

// Worst-margin accumulator: ratios measured/threshold, worst depends on the
// comparison direction.
struct MarginTracker {
    double worst = 0.0;
    bool first = true;
    void add(double measured, double threshold, Direction dir) {
        double ratio;
        if (threshold == 0.0)
            ratio = measured == 0.0 ? 1.0 : (dir == Direction::LessEq ? HUGE_VAL : 0.0);
        else
            ratio = measured / threshold;
        if (first) {
            worst = ratio;
            first = false;
            return;
        }
        worst = dir == Direction::LessEq ? std::max(worst, ratio) : std::min(worst, ratio);
    }
};

struct SeedOutcome {
    std::map<std::string, bool> pass;
    std::map<std::string, std::vector<std::array<double, 3>>> margins;  // measured, threshold, dir
    std::map<std::string, double> notes;
};

std::string condition_suite(const std::string& name) {
    // "B1.center" -> "B1"
    const auto dotpos = name.find('.');
    return dotpos == std::string::npos ? name : name.substr(0, dotpos);
}

SeedOutcome evaluate_seed(const RunConfig& cfg, std::int64_t seed_index,
                          const std::set<std::string>& wanted) {
    const RunConfig seed_cfg = per_seed_config(cfg, seed_index);
    SeedOutcome out;

    const bool want_b = wanted.count("B1") || wanted.count("B2") || wanted.count("B3") ||
                        wanted.count("B4");
    const bool want_c = wanted.count("C1") || wanted.count("C2");
    const bool want_d = wanted.count("D1") || wanted.count("D2") || wanted.count("D3") ||
                        wanted.count("D4");

    Dataset ds;
    if (want_b || want_d) {
        Rng stream = substream(static_cast<std::uint64_t>(seed_cfg.seed), StreamId::dataset);
        ds = sample_dataset(seed_cfg, stream);
    }

    if (want_b) {
        const ConditionReport report = check_data_conditions(ds, seed_cfg.epsilon);
        for (const auto& entry : report.entries) {
            const std::string suite = condition_suite(entry.name);
            if (!wanted.count(suite)) continue;
            auto it = out.pass.find(suite);
            if (it == out.pass.end()) out.pass[suite] = entry.pass;
            else it->second = it->second && entry.pass;
            out.margins[suite].push_back({entry.measured, entry.threshold,
                                          entry.direction == Direction::LessEq ? 0.0 : 1.0});
        }
    }

    Network net;
    if (want_c || want_d) {
        Rng stream = substream(static_cast<std::uint64_t>(seed_cfg.seed), StreamId::init);
        net = init_network(seed_cfg, stream);
    }

    if (want_c) {
        const double mp = static_cast<double>(seed_cfg.m) * static_cast<double>(seed_cfg.p);
        if (wanted.count("C1")) {
            const double fro_sq = dot(net.w.data(), net.w.data(), net.w.size());
            const double threshold =
                1.5 * seed_cfg.omega_init * seed_cfg.omega_init * mp;
            const bool pass = fro_sq <= threshold;
            out.pass["C1"] = pass;
            // A zero-init threshold of 0 is handled by the tracker.
            out.margins["C1"].push_back({fro_sq, threshold, 0.0});
        }
        if (wanted.count("C2")) {
            std::int64_t pos = 0;
            for (const auto s : net.signs) pos += s > 0 ? 1 : 0;
            const std::int64_t neg = seed_cfg.m - pos;
            const double threshold = static_cast<double>(seed_cfg.m) / 3.0;
            const double measured = static_cast<double>(std::min(pos, neg));
            out.pass["C2"] = measured >= threshold;
            out.margins["C2"].push_back({measured, threshold, 1.0});
        }
    }

    if (want_d) {
        const AlignStats stats = activation_stats(net, ds);
        const ClusterCounts counts = cluster_counts(ds);
        const double kappa = 20.0 * seed_cfg.epsilon;
        const AlignedSets sets = aligned_sets(stats, counts, kappa, net.signs, seed_cfg.epsilon);
        for (const auto& entry : sets.conditions.entries) {
            if (!wanted.count(entry.name)) continue;
            out.pass[entry.name] = entry.pass;
            out.margins[entry.name].push_back({entry.measured, entry.threshold,
                                               entry.direction == Direction::LessEq ? 0.0 : 1.0});
        }
        for (const ClusterId nu : {ClusterId::PlusMu1, ClusterId::PlusMu2}) {
            out.notes[std::string("e_") + cluster_name(nu)] = sets.e[static_cast<int>(nu)];
        }
        // Empirical per-neuron rate of |D| > sqrt(n); context for the oracle.
        const double sqrt_n = std::sqrt(static_cast<double>(seed_cfg.n));
        for (const ClusterId nu : {ClusterId::PlusMu1, ClusterId::PlusMu2}) {
            std::int64_t exceed = 0;
            for (std::int64_t j = 0; j < stats.m; ++j)
                if (std::abs(static_cast<double>(stats.D(nu, j))) > sqrt_n) ++exceed;
            out.notes[std::string("exceed_") + cluster_name(nu)] =
                static_cast<double>(exceed) / static_cast<double>(stats.m);
        }
    }
    return out;
}

}  // namespace

const std::vector<std::string>& all_suite_ids() { return kSuiteIds; }

bool suite_is_gated(const std::string& id) { return kGated.count(id) > 0; }

RunConfig per_seed_config(const RunConfig& cfg, std::int64_t seed_index) {
    RunConfig seed_cfg = cfg;
    seed_cfg.seed = static_cast<std::int64_t>(derive_seed(
        static_cast<std::uint64_t>(cfg.seed), StreamId::seed_index,
        static_cast<std::uint64_t>(seed_index)));
    return seed_cfg;
}

std::vector<SuiteResult> run_condition_suite(const RunConfig& cfg,
                                             const std::vector<std::int64_t>& seeds,
                                             const std::vector<std::string>& suites) {
    std::set<std::string> wanted;
    for (const auto& s : suites) {
        if (s == "all") {
            wanted.insert(kSuiteIds.begin(), kSuiteIds.end());
            continue;
        }
        if (std::find(kSuiteIds.begin(), kSuiteIds.end(), s) == kSuiteIds.end())
            throw std::invalid_argument("unknown suite id '" + s + "'");
        wanted.insert(s);
    }

    const auto start = std::chrono::steady_clock::now();
    std::vector<SeedOutcome> outcomes(seeds.size());
    parallel_for(0, static_cast<std::int64_t>(seeds.size()),
                 [&](std::int64_t lo, std::int64_t hi) {
                     for (std::int64_t k = lo; k < hi; ++k)
                         outcomes[k] = evaluate_seed(cfg, seeds[k], wanted);
                 });
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::vector<SuiteResult> results;
    for (const auto& id : kSuiteIds) {
        if (!wanted.count(id)) continue;
        SuiteResult r;
        r.suite = id;
        r.gated = suite_is_gated(id);
        r.wall_seconds = elapsed;
        MarginTracker tracker;
        std::map<std::string, double> note_sums;
        std::int64_t note_count = 0;
        for (const auto& outcome : outcomes) {
            const auto it = outcome.pass.find(id);
            if (it == outcome.pass.end()) continue;
            ++r.seeds_run;
            if (it->second) ++r.pass_count;
            const auto mit = outcome.margins.find(id);
            if (mit != outcome.margins.end())
                for (const auto& m : mit->second)
                    tracker.add(m[0], m[1], m[2] == 0.0 ? Direction::LessEq : Direction::GreaterEq);
        }
        if (id == "D2") {
            for (const auto& outcome : outcomes) {
                if (outcome.notes.empty()) continue;
                ++note_count;
                for (const auto& [k, v] : outcome.notes) note_sums[k] += v;
            }
            for (const auto& [k, v] : note_sums)
                r.notes[k] = v / static_cast<double>(note_count);
        }
        r.pass_rate = r.seeds_run > 0
                          ? static_cast<double>(r.pass_count) / static_cast<double>(r.seeds_run)
                          : 0.0;
        r.worst_margin = tracker.first ? 0.0 : tracker.worst;
        results.push_back(std::move(r));
    }
    return results;
}

std::vector<OraclePairResult> anti_concentration_oracle(const ClusterCounts& counts,
                                                        std::int64_t trials, Rng& stream,
                                                        double threshold) {
    if (trials < 1) throw std::invalid_argument("anti_concentration_oracle: trials must be >= 1");
    const double n = static_cast<double>(counts.total());
    if (threshold <= 0.0) threshold = std::sqrt(n);

    std::vector<OraclePairResult> results;
    for (const ClusterId nu : {ClusterId::PlusMu1, ClusterId::PlusMu2}) {
        const ClusterId neg = negate(nu);
        const std::int64_t a1 = counts.clean_of(nu) + counts.noisy_of(neg);
        const std::int64_t a2 = counts.clean_of(neg) + counts.noisy_of(nu);
        std::int64_t exceed = 0;
        for (std::int64_t trial = 0; trial < trials; ++trial) {
            std::int64_t delta = 0;
            for (std::int64_t i = 0; i < a1; ++i) delta += (stream.next_u64() >> 63);
            for (std::int64_t i = 0; i < a2; ++i) delta -= (stream.next_u64() >> 63);
            if (std::abs(static_cast<double>(delta)) > threshold) ++exceed;
        }
        OraclePairResult r;
        r.pair = nu == ClusterId::PlusMu1 ? "mu1" : "mu2";
        r.threshold = threshold;
        r.estimate = static_cast<double>(exceed) / static_cast<double>(trials);
        r.std_error = std::sqrt(std::max(r.estimate * (1.0 - r.estimate), 1e-12) /
                                static_cast<double>(trials));
        if (a1 + a2 == 0) {
            r.normal_approx = 0.0;
        } else {
            const double mean = 0.5 * static_cast<double>(a1 - a2);
            const double sd = 0.5 * std::sqrt(static_cast<double>(a1 + a2));
            r.normal_approx = normal_upper_tail((threshold - mean) / sd) +
                              normal_upper_tail((threshold + mean) / sd);
        }
        results.push_back(r);
    }
    return results;
}

namespace {

const std::vector<std::string> kCurveColumns = {
    "train_acc", "test_err", "risk",     "r",        "max_abs_h",    "w_fro",
    "al_p_mu1",  "al_p_mu2", "al_n_mu1", "al_n_mu2", "j1_mean_proj", "j2_mean_absproj"};

double metric_column(const StepMetrics& sm, std::size_t col) {
    switch (col) {
        case 0: return sm.train_accuracy;
        case 1: return sm.test_error;
        case 2: return sm.risk;
        case 3: return sm.loss_ratio;
        case 4: return sm.max_abs_h;
        case 5: return sm.w_fro;
        case 6: return static_cast<double>(sm.aligned_pos_mu1);
        case 7: return static_cast<double>(sm.aligned_pos_mu2);
        case 8: return static_cast<double>(sm.aligned_neg_mu1);
        case 9: return static_cast<double>(sm.aligned_neg_mu2);
        case 10: return sm.j1_mean_proj;
        default: return sm.j2_mean_absproj;
    }
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double idx = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(idx);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = idx - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

AggregateCurves aggregate_runs(const RunConfig& cfg, const std::vector<std::int64_t>& seeds,
                               std::int64_t steps, const RunHooks& hooks,
                               const std::function<void(std::int64_t, const TrainTrace&)>&
                                   on_trace) {
    std::vector<TrainTrace> traces(seeds.size());
    // Seeds run sequentially; each run parallelizes internally.
    for (std::size_t k = 0; k < seeds.size(); ++k) {
        RunConfig seed_cfg = per_seed_config(cfg, seeds[k]);
        seed_cfg.steps = steps;
        Rng data_stream = substream(static_cast<std::uint64_t>(seed_cfg.seed), StreamId::dataset);
        const Dataset ds = sample_dataset(seed_cfg, data_stream);
        Rng init_stream = substream(static_cast<std::uint64_t>(seed_cfg.seed), StreamId::init);
        const Network net0 = init_network(seed_cfg, init_stream);
        traces[k] = run_training(seed_cfg, ds, net0, hooks);
        if (on_trace) on_trace(seeds[k], traces[k]);
    }

    // Align by t: keep steps recorded in every trace.
    std::map<std::int64_t, std::int64_t> step_counts;
    for (const auto& trace : traces)
        for (const auto& sm : trace.metrics) ++step_counts[sm.t];
    AggregateCurves curves;
    curves.columns = kCurveColumns;
    for (const auto& [t, count] : step_counts)
        if (count == static_cast<std::int64_t>(traces.size())) curves.t.push_back(t);

    curves.stats.assign(kCurveColumns.size(), {});
    for (std::size_t col = 0; col < kCurveColumns.size(); ++col) {
        curves.stats[col].resize(curves.t.size());
        for (std::size_t ti = 0; ti < curves.t.size(); ++ti) {
            std::vector<double> values;
            values.reserve(traces.size());
            for (const auto& trace : traces)
                for (const auto& sm : trace.metrics)
                    if (sm.t == curves.t[ti]) values.push_back(metric_column(sm, col));
            std::sort(values.begin(), values.end());
            double mean = 0.0;
            for (const double v : values) mean += v;
            mean /= static_cast<double>(values.size());
            curves.stats[col][ti] = {mean, quantile_sorted(values, 0.1),
                                     quantile_sorted(values, 0.9)};
        }
    }
    return curves;
}

std::string curves_to_csv(const AggregateCurves& curves) {
    std::string out = "t,col,mean,q10,q90\n";
    char buf[256];
    for (std::size_t ti = 0; ti < curves.t.size(); ++ti) {
        for (std::size_t col = 0; col < curves.columns.size(); ++col) {
            const auto& stat = curves.stats[col][ti];
            std::snprintf(buf, sizeof(buf), "%lld,%s,%.17g,%.17g,%.17g\n",
                          static_cast<long long>(curves.t[ti]), curves.columns[col].c_str(),
                          stat.mean, stat.q10, stat.q90);
            out += buf;
        }
    }
    return out;
}

}  // namespace grokxor
