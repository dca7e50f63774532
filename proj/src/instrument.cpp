#include "grokxor/instrument.hpp"

#include <algorithm>
#include <cmath>

#include "grokxor/parallel.hpp"

namespace grokxor {

AlignStats activation_stats_from_inner(const std::vector<double>& inner,
                                       const std::vector<std::int8_t>& signs, std::int64_t m,
                                       const Dataset& ds) {
    AlignStats stats;
    stats.m = m;
    for (int c = 0; c < 4; ++c) {
        stats.countC[c].assign(m, 0);
        stats.countN[c].assign(m, 0);
    }
    stats.act_pos.assign(ds.n, 0);
    stats.act_neg.assign(ds.n, 0);
    for (std::int64_t j = 0; j < m; ++j) {
        const double* row = inner.data() + j * ds.n;
        for (std::int64_t i = 0; i < ds.n; ++i) {
            if (row[i] > 0.0) {
                const int c = static_cast<int>(ds.cluster[i]);
                if (ds.noisy(i)) ++stats.countN[c][j];
                else ++stats.countC[c][j];
                if (signs[j] > 0) ++stats.act_pos[i];
                else ++stats.act_neg[i];
            }
        }
    }
    const ClusterCounts counts = cluster_counts(ds);
    const double sqrt_n = std::sqrt(static_cast<double>(ds.n));
    for (const ClusterId nu : kAllClusters) {
        const double imbalance = std::abs(static_cast<double>(counts.noisy_of(nu)) -
                                          static_cast<double>(counts.noisy_of(negate(nu))));
        stats.delta[static_cast<int>(nu)] = imbalance + sqrt_n;
    }
    return stats;
}

AlignStats activation_stats(const Network& net, const Dataset& ds) {
    std::vector<double> inner(net.m * ds.n);
    pairwise_rows(net.w.data(), net.m, ds.x.data(), ds.n, ds.p, inner.data());
    return activation_stats_from_inner(inner, net.signs, net.m, ds);
}

bool is_aligned(const AlignStats& stats, const ClusterCounts& counts, ClusterId nu,
                std::int64_t j, double kappa) {
    const double n = static_cast<double>(counts.total());
    const std::int64_t d_nu = stats.d(nu, j);
    const std::int64_t d_neg = stats.d(negate(nu), j);
    if (!(static_cast<double>(d_nu - d_neg) > std::pow(n, 0.5 - kappa))) return false;
    const double ceiling = static_cast<double>(std::min(counts.clean_of(nu),
                                                        counts.clean_of(negate(nu)))) -
                           2.0 * static_cast<double>(counts.noisy_of(nu) +
                                                     counts.noisy_of(negate(nu))) -
                           std::sqrt(n);
    return static_cast<double>(std::max(d_nu, d_neg)) < ceiling;
}

AlignedSets aligned_sets(const AlignStats& stats0, const ClusterCounts& counts, double kappa,
                         const std::vector<std::int8_t>& signs, double eps) {
    AlignedSets sets;
    sets.kappa = kappa;
    const std::int64_t m = stats0.m;
    const double n = static_cast<double>(counts.total());

    for (const ClusterId nu : kAllClusters) {
        const int c = static_cast<int>(nu);
        sets.e[c] = 0.5 * static_cast<double>(counts.clean_of(nu) - counts.noisy_of(nu) -
                                              counts.clean_of(negate(nu)) +
                                              counts.noisy_of(negate(nu)));
        for (std::int64_t j = 0; j < m; ++j)
            if (is_aligned(stats0, counts, nu, j, kappa))
                sets.members[c][signs[j] > 0 ? 0 : 1].push_back(j);
    }

    auto add = [&sets](std::string name, double measured, double threshold, Direction dir) {
        ConditionEntry e;
        e.name = std::move(name);
        e.measured = measured;
        e.threshold = threshold;
        e.direction = dir;
        e.pass = dir == Direction::LessEq ? measured <= threshold : measured >= threshold;
        sets.conditions.entries.push_back(e);
    };

    // D1: every sample activates at least m/7 of each sign class.
    std::int64_t min_pos = m, min_neg = m;
    for (std::size_t i = 0; i < stats0.act_pos.size(); ++i) {
        min_pos = std::min(min_pos, stats0.act_pos[i]);
        min_neg = std::min(min_neg, stats0.act_neg[i]);
    }
    add("D1", static_cast<double>(std::min(min_pos, min_neg)),
        static_cast<double>(m) / 7.0, Direction::GreaterEq);

    // D2: per (nu, sign class) aligned count >= m n^(-kappa/2)
    // (at kappa = 20 eps the exponent is the paper's 10 eps).
    double min_aligned = static_cast<double>(m);
    for (int c = 0; c < 4; ++c)
        for (int s = 0; s < 2; ++s)
            min_aligned = std::min(min_aligned,
                                   static_cast<double>(sets.members[c][s].size()));
    add("D2", min_aligned, static_cast<double>(m) * std::pow(n, -kappa / 2.0),
        Direction::GreaterEq);

    // D3: (+/-nu)-aligned neurons cover (1 - 10 n^-kappa) of each sign class.
    std::int64_t pos_total = 0;
    for (const auto s : signs) pos_total += s > 0 ? 1 : 0;
    const std::int64_t neg_total = static_cast<std::int64_t>(signs.size()) - pos_total;
    double min_cover_ratio = 1.0;
    for (const ClusterId nu : {ClusterId::PlusMu1, ClusterId::PlusMu2}) {
        const int c = static_cast<int>(nu);
        const int cn = static_cast<int>(negate(nu));
        for (int s = 0; s < 2; ++s) {
            std::vector<std::int64_t> joint = sets.members[c][s];
            joint.insert(joint.end(), sets.members[cn][s].begin(), sets.members[cn][s].end());
            std::sort(joint.begin(), joint.end());
            joint.erase(std::unique(joint.begin(), joint.end()), joint.end());
            const std::int64_t total = s == 0 ? pos_total : neg_total;
            if (total > 0)
                min_cover_ratio = std::min(min_cover_ratio,
                                           static_cast<double>(joint.size()) /
                                               static_cast<double>(total));
        }
    }
    add("D3", min_cover_ratio, 1.0 - 10.0 * std::pow(n, -kappa), Direction::GreaterEq);

    // D4: sum over aligned j of (c_nu - n_nu - d_{-nu,j}) >= (n/10)|J|,
    // per (nu, sign class); the minimum slack ratio is reported.
    double min_d4_ratio = std::numeric_limits<double>::infinity();
    bool any_d4 = false;
    for (const ClusterId nu : kAllClusters) {
        const int c = static_cast<int>(nu);
        for (int s = 0; s < 2; ++s) {
            const auto& members = sets.members[c][s];
            if (members.empty()) continue;
            any_d4 = true;
            double sum = 0.0;
            for (const std::int64_t j : members)
                sum += static_cast<double>(counts.clean_of(nu) - counts.noisy_of(nu) -
                                           stats0.d(negate(nu), j));
            min_d4_ratio = std::min(min_d4_ratio,
                                    sum / ((n / 10.0) * static_cast<double>(members.size())));
        }
    }
    if (!any_d4) min_d4_ratio = 1.0;  // vacuous when every set is empty
    add("D4", min_d4_ratio, 1.0, Direction::GreaterEq);

    return sets;
}

std::vector<double> neuron_projections(const Network& net, const std::vector<double>& direction,
                                       std::optional<int> sign_filter) {
    std::vector<double> out;
    out.reserve(net.m);
    for (std::int64_t j = 0; j < net.m; ++j) {
        if (sign_filter && *sign_filter != net.signs[j]) continue;
        out.push_back(dot(net.row(j), direction.data(), net.p));
    }
    return out;
}

LinearComparator::LinearComparator(const Dataset& ds) : v_(ds.p, 0.0) {
    for (std::int64_t i = 0; i < ds.n; ++i)
        axpy(static_cast<double>(ds.y[i]), ds.row(i), v_.data(), ds.p);
}

int LinearComparator::predict(const double* x, std::int64_t p) const {
    const double f = dot(v_.data(), x, p);
    return f < 0.0 ? -1 : 1;
}

double LinearComparator::train_accuracy(const Dataset& ds) const {
    if (ds.n == 0) return 0.0;
    std::int64_t correct = 0;
    for (std::int64_t i = 0; i < ds.n; ++i)
        if (predict(ds.row(i), ds.p) == ds.y[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(ds.n);
}

double LinearComparator::test_error(const Dataset& like, std::int64_t n_samples,
                                    Rng& stream) const {
    const Dataset fresh = sample_clean(like, n_samples, stream);
    std::int64_t wrong = 0;
    for (std::int64_t i = 0; i < n_samples; ++i)
        if (predict(fresh.row(i), fresh.p) != fresh.y_clean[i]) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(n_samples);
}

LinearComparator linear_comparator(const Dataset& ds) { return LinearComparator(ds); }

double agreement(const Network& net, const LinearComparator& comparator, const Dataset& points) {
    if (points.n == 0) return 1.0;
    std::int64_t match = 0;
    for (std::int64_t i = 0; i < points.n; ++i)
        if (predict(net, points.row(i), points.p) == comparator.predict(points.row(i), points.p))
            ++match;
    return static_cast<double>(match) / static_cast<double>(points.n);
}

std::vector<LlnResult> relu_lln_check(const std::vector<std::int64_t>& m_values,
                                      std::int64_t trials, const LlnDistribution& b_spec,
                                      std::uint64_t master_seed) {
    std::vector<LlnResult> results;
    results.reserve(m_values.size());
    const double target = b_spec.mean() / 2.0;
    for (std::size_t mi = 0; mi < m_values.size(); ++mi) {
        const std::int64_t m = m_values[mi];
        const double scale = 1.0 / std::sqrt(static_cast<double>(m));
        std::vector<double> devs(trials);
        parallel_for(0, trials, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t trial = lo; trial < hi; ++trial) {
                Rng rng = substream(master_seed, StreamId::lln,
                                    static_cast<std::uint64_t>(mi) * 1000003ULL +
                                        static_cast<std::uint64_t>(trial));
                double sum = 0.0;
                for (std::int64_t j = 0; j < m; ++j) {
                    const double a = rng.sign() * scale;
                    double b = b_spec.value;
                    if (b_spec.kind == LlnDistribution::Kind::Normal)
                        b += b_spec.sd * rng.normal();
                    sum += a * relu(a * b);
                }
                devs[trial] = sum - target;
            }
        });
        LlnResult r;
        r.m = m;
        double mean_abs = 0.0, mean = 0.0;
        for (const double d : devs) {
            mean_abs += std::abs(d);
            mean += d;
        }
        mean_abs /= static_cast<double>(trials);
        mean /= static_cast<double>(trials);
        double var = 0.0;
        for (const double d : devs) var += (d - mean) * (d - mean);
        var /= static_cast<double>(trials);
        r.mean_abs_dev = mean_abs;
        r.std_dev = std::sqrt(var);
        std::vector<double> abs_devs(devs.size());
        for (std::size_t i = 0; i < devs.size(); ++i) abs_devs[i] = std::abs(devs[i]);
        std::sort(abs_devs.begin(), abs_devs.end());
        auto quantile = [&abs_devs](double q) {
            const double idx = q * static_cast<double>(abs_devs.size() - 1);
            const std::size_t lo = static_cast<std::size_t>(idx);
            const std::size_t hi = std::min(lo + 1, abs_devs.size() - 1);
            const double frac = idx - static_cast<double>(lo);
            return abs_devs[lo] * (1.0 - frac) + abs_devs[hi] * frac;
        };
        r.q50 = quantile(0.5);
        r.q90 = quantile(0.9);
        results.push_back(r);
    }
    return results;
}

}  // namespace grokxor
