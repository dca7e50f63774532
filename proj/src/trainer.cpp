#include "grokxor/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "grokxor/instrument.hpp"
#include "grokxor/kernel.hpp"
#include "grokxor/parallel.hpp"

namespace grokxor {

double GVector::max_abs_h() const {
    double worst = 0.0;
    for (const double v : h) worst = std::max(worst, std::abs(v));
    return worst;
}

double GVector::loss_ratio() const {
    double lo = 1.0, hi = 0.0;
    for (const double v : g) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return g.empty() ? 1.0 : hi / lo;
}

double GVector::risk() const {
    double total = 0.0;
    for (const double zi : z)
        total += zi < 0.0 ? -zi + std::log1p(std::exp(zi)) : std::log1p(std::exp(-zi));
    return z.empty() ? 0.0 : total / static_cast<double>(z.size());
}

GVector g_from_margins(const std::vector<double>& z) {
    GVector gv;
    gv.z = z;
    gv.g.resize(z.size());
    gv.h.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        gv.g[i] = 1.0 / (1.0 + std::exp(z[i]));
        gv.h[i] = gv.g[i] - 0.5;
    }
    return gv;
}

namespace {

// Pre-step inner products <w_j, x_i>, row-major m x n.
std::vector<double> inner_products(const Network& net, const Dataset& ds) {
    std::vector<double> inner(net.m * ds.n);
    pairwise_rows(net.w.data(), net.m, ds.x.data(), ds.n, ds.p, inner.data());
    return inner;
}

std::vector<double> margins_from_inner(const std::vector<double>& inner, const Network& net,
                                       const Dataset& ds) {
    std::vector<double> f(ds.n, 0.0);
    const double s = net.scale();
    for (std::int64_t j = 0; j < net.m; ++j) {
        const double aj = net.signs[j] * s;
        const double* row = inner.data() + j * ds.n;
        for (std::int64_t i = 0; i < ds.n; ++i) f[i] += aj * relu(row[i]);
    }
    for (std::int64_t i = 0; i < ds.n; ++i) f[i] *= static_cast<double>(ds.y[i]);
    return f;
}

// Shared phase-2 body for the true and unhinged updates.
void apply_update(Network& net, const Dataset& ds, double alpha,
                  const std::vector<double>& inner, const std::vector<double>& g) {
    const double base = alpha / static_cast<double>(ds.n);
    const double s = net.scale();
    parallel_for(0, net.m, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t j = lo; j < hi; ++j) {
            const double coef = base * net.signs[j] * s;
            const double* row = inner.data() + j * ds.n;
            double* wj = net.row(j);
            for (std::int64_t i = 0; i < ds.n; ++i)
                if (row[i] > 0.0)
                    axpy(coef * g[i] * static_cast<double>(ds.y[i]), ds.row(i), wj, ds.p);
            for (std::int64_t k = 0; k < net.p; ++k)
                if (!std::isfinite(wj[k]))
                    throw NumericAbort("non-finite weight in neuron " + std::to_string(j) +
                                       " after step " + std::to_string(net.step_index + 1));
        }
    });
    ++net.step_index;
}

}  // namespace

GVector compute_g(const Network& net, const Dataset& ds) {
    const std::vector<double> inner = inner_products(net, ds);
    return g_from_margins(margins_from_inner(inner, net, ds));
}

Network gd_step(Network net, const Dataset& ds, double alpha) {
    const std::vector<double> inner = inner_products(net, ds);
    const GVector gv = g_from_margins(margins_from_inner(inner, net, ds));
    apply_update(net, ds, alpha, inner, gv.g);
    return net;
}

Network linearized_first_step(const Network& net0, const Dataset& ds, double alpha) {
    if (net0.step_index != 0)
        throw std::invalid_argument("linearized_first_step requires step_index == 0");
    Network net = net0;
    const std::vector<double> inner = inner_products(net, ds);
    const std::vector<double> half(ds.n, 0.5);
    apply_update(net, ds, alpha, inner, half);
    return net;
}

TrainTrace run_training(const RunConfig& cfg, const Dataset& ds, const Network& net0,
                        const RunHooks& hooks) {
    TrainTrace trace;
    const double n = static_cast<double>(cfg.n);
    const double kappa = 20.0 * cfg.epsilon;
    trace.kappa = kappa;
    trace.pair_checks_enabled = hooks.pair_checks;
    const double horizon =
        std::min(std::sqrt(n), 1.0 / (std::sqrt(n) * static_cast<double>(cfg.p) * cfg.alpha) - 2.0);

    KernelRun run(net0, ds);
    const std::int64_t test_points = hooks.test_points > 0 ? hooks.test_points : cfg.n_test;
    {
        Rng test_stream = substream(static_cast<std::uint64_t>(cfg.seed), StreamId::test);
        run.attach_test_panel(sample_clean(ds, test_points, test_stream));
    }

    const ClusterCounts counts = cluster_counts(ds);
    const AlignStats stats0 =
        activation_stats_from_inner(run.inner(), net0.signs, net0.m, ds);
    const AlignedSets sets0 = aligned_sets(stats0, counts, kappa, net0.signs, cfg.epsilon);
    std::vector<std::int64_t> j1 = sets0.of(ClusterId::PlusMu1, true);
    std::vector<std::int64_t> j2 = sets0.of(ClusterId::PlusMu1, false);
    {
        const auto& minus = sets0.of(ClusterId::MinusMu1, false);
        j2.insert(j2.end(), minus.begin(), minus.end());
        std::sort(j2.begin(), j2.end());
        j2.erase(std::unique(j2.begin(), j2.end()), j2.end());
    }
    std::vector<std::int64_t> j1_mu2 = sets0.of(ClusterId::PlusMu2, false);
    std::vector<std::int64_t> j2_mu2 = sets0.of(ClusterId::PlusMu2, true);
    {
        const auto& minus = sets0.of(ClusterId::MinusMu2, true);
        j2_mu2.insert(j2_mu2.end(), minus.begin(), minus.end());
        std::sort(j2_mu2.begin(), j2_mu2.end());
        j2_mu2.erase(std::unique(j2_mu2.begin(), j2_mu2.end()), j2_mu2.end());
    }
    trace.j1_size = static_cast<std::int64_t>(j1.size());
    trace.j2_size = static_cast<std::int64_t>(j2.size());

    const double e2_bound = cfg.alpha / std::sqrt(static_cast<double>(cfg.m)) * cfg.mu_sq();
    std::vector<std::uint8_t> wrong_active;  // m x n, wrong-sign pairs active at t
    if (hooks.pair_checks) wrong_active.assign(net0.m * ds.n, 0);

    auto pair_scan = [&](bool first) {
        const std::vector<double>& inner = run.inner();
        for (std::int64_t j = 0; j < net0.m; ++j) {
            const double* row = inner.data() + j * ds.n;
            for (std::int64_t i = 0; i < ds.n; ++i) {
                if (net0.signs[j] * ds.y[i] >= 0) continue;
                if (row[i] > e2_bound) ++trace.e2_violations;
                const std::size_t idx = static_cast<std::size_t>(j * ds.n + i);
                if (!first && wrong_active[idx] && !(row[i] < 0.0)) ++trace.e3_violations;
                wrong_active[idx] = row[i] > 0.0 ? 1 : 0;
            }
        }
    };

    auto record = [&](std::int64_t t) {
        StepMetrics sm;
        sm.t = t;
        const GVector gv = g_from_margins(run.margins());
        sm.train_accuracy = run.train_accuracy();
        sm.test_error = run.test_error();
        sm.risk = gv.risk();
        sm.loss_ratio = gv.loss_ratio();
        sm.max_abs_h = gv.max_abs_h();
        sm.w_fro = std::sqrt(run.w_fro_sq());
        // Per-step alignment counts use the directional clause only
        // (D_{nu,j}^(t) > n^(1/2-kappa)); the Eq-5 ceiling is a step-0
        // technical condition and is meaningless along the trajectory.
        const AlignStats stats =
            t == 0 ? stats0 : activation_stats_from_inner(run.inner(), net0.signs, net0.m, ds);
        const double d_threshold = std::pow(n, 0.5 - kappa);
        for (std::int64_t j = 0; j < net0.m; ++j) {
            const bool mu1_aligned =
                static_cast<double>(std::abs(stats.D(ClusterId::PlusMu1, j))) > d_threshold;
            const bool mu2_aligned =
                static_cast<double>(std::abs(stats.D(ClusterId::PlusMu2, j))) > d_threshold;
            if (net0.signs[j] > 0) {
                sm.aligned_pos_mu1 += mu1_aligned;
                sm.aligned_pos_mu2 += mu2_aligned;
            } else {
                sm.aligned_neg_mu1 += mu1_aligned;
                sm.aligned_neg_mu2 += mu2_aligned;
            }
        }
        auto mean_proj = [&](const std::vector<std::int64_t>& set, bool mu1, bool absolute) {
            if (set.empty()) return 0.0;
            double sum = 0.0;
            for (const std::int64_t j : set) {
                const double v = mu1 ? run.proj_mu1(j) : run.proj_mu2(j);
                sum += absolute ? std::abs(v) : v;
            }
            return sum / static_cast<double>(set.size());
        };
        sm.j1_mean_proj = mean_proj(j1, true, false);
        sm.j2_mean_absproj = mean_proj(j2, true, true);
        sm.j1_mu2_mean_proj = mean_proj(j1_mu2, false, false);
        sm.j2_mu2_mean_absproj = mean_proj(j2_mu2, false, true);
        trace.metrics.push_back(sm);
        return sm;
    };

    auto want_record = [&hooks](std::int64_t t) {
        return hooks.record_at ? hooks.record_at(t) : true;
    };
    auto want_snapshot = [&hooks](std::int64_t t) {
        return std::find(hooks.snapshot_steps.begin(), hooks.snapshot_steps.end(), t) !=
               hooks.snapshot_steps.end();
    };

    if (hooks.pair_checks) pair_scan(true);
    bool warned = false;
    bool stop = false;
    if (want_record(0)) {
        const StepMetrics sm = record(0);
        if (hooks.stop_when && hooks.stop_when(sm)) stop = true;
    }
    if (hooks.on_snapshot && want_snapshot(0)) hooks.on_snapshot(0, run.materialize());

    for (std::int64_t t = 1; t <= cfg.steps && !stop; ++t) {
        run.step(cfg.alpha);
        if (!warned && static_cast<double>(t) > horizon) {
            char buf[160];
            std::snprintf(buf, sizeof(buf),
                          "step %lld exceeds the analysis horizon %.6g; metrics beyond this "
                          "point carry no trajectory guarantees",
                          static_cast<long long>(t), horizon);
            trace.warnings.emplace_back(buf);
            warned = true;
        }
        if (hooks.pair_checks) pair_scan(false);
        if (want_record(t)) {
            const StepMetrics sm = record(t);
            if (hooks.stop_when && hooks.stop_when(sm)) stop = true;
        }
        if (hooks.on_snapshot && want_snapshot(t)) hooks.on_snapshot(t, run.materialize());
    }
    return trace;
}

std::string trace_to_csv(const TrainTrace& trace) {
    std::string out =
        "t,train_acc,test_err,risk,r,max_abs_h,w_fro,al_p_mu1,al_p_mu2,al_n_mu1,al_n_mu2,"
        "j1_mean_proj,j2_mean_absproj\n";
    char buf[512];
    for (const auto& sm : trace.metrics) {
        std::snprintf(buf, sizeof(buf),
                      "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%lld,%lld,%lld,%lld,%.17g,%.17g\n",
                      static_cast<long long>(sm.t), sm.train_accuracy, sm.test_error, sm.risk,
                      sm.loss_ratio, sm.max_abs_h, sm.w_fro,
                      static_cast<long long>(sm.aligned_pos_mu1),
                      static_cast<long long>(sm.aligned_pos_mu2),
                      static_cast<long long>(sm.aligned_neg_mu1),
                      static_cast<long long>(sm.aligned_neg_mu2), sm.j1_mean_proj,
                      sm.j2_mean_absproj);
        out += buf;
    }
    return out;
}

ResidualStats step_residuals(const Network& net_before, const Network& net_after,
                             const Dataset& ds, double alpha, double c_const) {
    const double n = static_cast<double>(ds.n);
    const double m = static_cast<double>(net_before.m);
    const double p = static_cast<double>(ds.p);
    const double mu2 = ds.mu_sq();
    const double cn = 10.0 * std::sqrt(std::log(n));
    const double scale = net_before.scale();

    const std::vector<double> inner = inner_products(net_before, ds);
    const AlignStats stats =
        activation_stats_from_inner(inner, net_before.signs, net_before.m, ds);

    const double bound_mu = 5.0 * alpha * mu2 / (std::pow(n, 1.5) * std::sqrt(m));
    const double bound_x_base = 4.0 * alpha / (std::pow(n, 2.5) * std::sqrt(m));
    const double bound_x_tail = cn * std::pow(n, 1.99) * mu2 / (3.0 * c_const);

    struct Partial {
        double max_ratio_x = 0.0, sum_ratio_x = 0.0, max_res_x = 0.0;
        double max_ratio_mu = 0.0, sum_ratio_mu = 0.0, max_res_mu = 0.0;
    };
    std::vector<Partial> partials(net_before.m);

    parallel_for(0, net_before.m, [&](std::int64_t lo, std::int64_t hi) {
        std::vector<double> delta(ds.p);
        for (std::int64_t j = lo; j < hi; ++j) {
            Partial& acc = partials[j];
            const double* wb = net_before.row(j);
            const double* wa = net_after.row(j);
            for (std::int64_t k = 0; k < ds.p; ++k) delta[k] = wa[k] - wb[k];
            const double aj = net_before.signs[j] * scale;
            const double* row = inner.data() + j * ds.n;
            for (std::int64_t k = 0; k < ds.n; ++k) {
                const double actual = dot(delta.data(), ds.row(k), ds.p);
                const double indicator = row[k] > 0.0 ? 1.0 : 0.0;
                const ClusterId bar = ds.cluster[k];
                const double approx =
                    (alpha * aj / (2.0 * n)) *
                    (static_cast<double>(ds.y[k]) * indicator * p +
                     static_cast<double>(clean_label(bar)) *
                         static_cast<double>(stats.D(bar, j)) * mu2);
                const double residual = std::abs(actual - approx);
                const double bound = bound_x_base * (indicator * p + bound_x_tail);
                acc.max_res_x = std::max(acc.max_res_x, residual);
                acc.max_ratio_x = std::max(acc.max_ratio_x, residual / bound);
                acc.sum_ratio_x += residual / bound;
            }
            for (const ClusterId nu : kAllClusters) {
                const std::vector<double>& mu = ds.center(nu);
                const double s = ds.center_sign(nu);
                const double actual = s * dot(delta.data(), mu.data(), ds.p);
                const double approx = (alpha * aj / (2.0 * n)) *
                                      static_cast<double>(clean_label(nu)) *
                                      static_cast<double>(stats.D(nu, j)) * mu2;
                const double residual = std::abs(actual - approx);
                acc.max_res_mu = std::max(acc.max_res_mu, residual);
                acc.max_ratio_mu = std::max(acc.max_ratio_mu, residual / bound_mu);
                acc.sum_ratio_mu += residual / bound_mu;
            }
        }
    });

    ResidualStats out;
    double sum_x = 0.0, sum_mu = 0.0;
    for (const auto& acc : partials) {
        out.max_ratio_x = std::max(out.max_ratio_x, acc.max_ratio_x);
        out.max_residual_x = std::max(out.max_residual_x, acc.max_res_x);
        out.max_ratio_mu = std::max(out.max_ratio_mu, acc.max_ratio_mu);
        out.max_residual_mu = std::max(out.max_residual_mu, acc.max_res_mu);
        sum_x += acc.sum_ratio_x;
        sum_mu += acc.sum_ratio_mu;
    }
    out.mean_ratio_x = sum_x / (m * n);
    out.mean_ratio_mu = sum_mu / (m * 4.0);
    return out;
}

}  // namespace grokxor
