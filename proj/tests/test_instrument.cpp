#include <doctest.h>

#include <cmath>
#include <vector>

#include "grokxor/instrument.hpp"
#include "grokxor/parallel.hpp"

using namespace grokxor;

namespace {

RunConfig small_config(std::uint64_t seed = 2) {
    RunConfig cfg;
    cfg.n = 40;
    cfg.p = 512;
    cfg.mu_norm = 12.0;
    cfg.eta = 0.1;
    cfg.m = 24;
    cfg.omega_init = 1e-3;
    cfg.alpha = 1e-3;
    cfg.steps = 1;
    cfg.seed = static_cast<std::int64_t>(seed);
    cfg.validate();
    return cfg;
}

struct Instance {
    Dataset ds;
    Network net;
};

Instance make_instance(const RunConfig& cfg, std::uint64_t seed) {
    Instance inst;
    Rng data_stream = substream(seed, StreamId::dataset);
    inst.ds = sample_dataset(cfg, data_stream);
    Rng init_stream = substream(seed, StreamId::init);
    inst.net = init_network(cfg, init_stream);
    return inst;
}

}  // namespace

TEST_CASE("activation stats on the spec's hand enumeration") {
    // 1 neuron; 4 points: +mu1 clean (active), +mu1 clean (inactive),
    // -mu1 clean (active), -mu1 noisy (active)
    //   -> |C_{+mu1}| = 1, d_{+mu1} = 1, d_{-mu1} = 1 - 1 = 0, D_{+mu1} = 1.
    Dataset ds;
    ds.n = 4;
    ds.p = 2;
    ds.eta = 0.25;
    ds.mu1 = {3.0, 0.0};
    ds.mu2 = {0.0, 3.0};
    ds.cluster = {ClusterId::PlusMu1, ClusterId::PlusMu1, ClusterId::MinusMu1,
                  ClusterId::MinusMu1};
    ds.y_clean = {1, 1, 1, 1};
    ds.y = {1, 1, 1, -1};  // last one noisy
    // neuron w = (1, 0): actives need positive first coordinate
    ds.x = {3.0, 0.0, -3.0, 0.5, 2.0, -1.0, 1.0, 1.0};
    Network net;
    net.m = 1;
    net.p = 2;
    net.signs = {1};
    net.w = {1.0, 0.0};

    const AlignStats stats = activation_stats(net, ds);
    CHECK(stats.countC[static_cast<int>(ClusterId::PlusMu1)][0] == 1);
    CHECK(stats.d(ClusterId::PlusMu1, 0) == 1);
    CHECK(stats.d(ClusterId::MinusMu1, 0) == 0);
    CHECK(stats.D(ClusterId::PlusMu1, 0) == 1);
    // per-sample class activation counts (sample 1 is inactive)
    CHECK(stats.act_pos[0] == 1);
    CHECK(stats.act_pos[1] == 0);
    // Delta_nu = |n_nu - n_{-nu}| + sqrt(n) = 1 + 2
    CHECK(stats.delta[static_cast<int>(ClusterId::PlusMu1)] == doctest::Approx(3.0));
}

TEST_CASE("D antisymmetry and count bounds hold on random instances") {
    const RunConfig cfg = small_config();
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const Instance inst = make_instance(cfg, 10 + seed);
        const AlignStats stats = activation_stats(inst.net, inst.ds);
        const ClusterCounts counts = cluster_counts(inst.ds);
        for (const ClusterId nu : kAllClusters)
            for (std::int64_t j = 0; j < cfg.m; ++j) {
                CHECK(stats.D(nu, j) + stats.D(negate(nu), j) == 0);
                const int c = static_cast<int>(nu);
                CHECK(stats.countC[c][j] >= 0);
                CHECK(stats.countC[c][j] <= counts.clean_of(nu));
                CHECK(stats.countN[c][j] <= counts.noisy_of(nu));
                CHECK(stats.countC[c][j] + stats.countN[c][j] <=
                      counts.clean_of(nu) + counts.noisy_of(nu));
            }
    }
}

TEST_CASE("aligned sets are empty for all-zero statistics") {
    const RunConfig cfg = small_config();
    const Instance inst = make_instance(cfg, 15);
    Network zero = inst.net;
    for (auto& v : zero.w) v = 0.0;
    const AlignStats stats = activation_stats(zero, inst.ds);
    const ClusterCounts counts = cluster_counts(inst.ds);
    const AlignedSets sets = aligned_sets(stats, counts, 20.0 * cfg.epsilon, zero.signs,
                                          cfg.epsilon);
    for (int c = 0; c < 4; ++c)
        for (int s = 0; s < 2; ++s) CHECK(sets.members[c][s].empty());
    // e_nu diagnostics still defined
    CHECK(std::isfinite(sets.e[0]));
}

TEST_CASE("alignment membership is monotone in kappa") {
    const RunConfig cfg = small_config();
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const Instance inst = make_instance(cfg, 20 + seed);
        const AlignStats stats = activation_stats(inst.net, inst.ds);
        const ClusterCounts counts = cluster_counts(inst.ds);
        for (const double k1 : {0.0, 0.1, 0.25}) {
            const double k2 = k1 + 0.2;
            for (const ClusterId nu : kAllClusters)
                for (std::int64_t j = 0; j < cfg.m; ++j)
                    if (is_aligned(stats, counts, nu, j, k1))
                        CHECK(is_aligned(stats, counts, nu, j, k2));
        }
    }
}

TEST_CASE("aligned_sets reports the D-condition measurements") {
    const RunConfig cfg = small_config();
    const Instance inst = make_instance(cfg, 25);
    const AlignStats stats = activation_stats(inst.net, inst.ds);
    const ClusterCounts counts = cluster_counts(inst.ds);
    const AlignedSets sets = aligned_sets(stats, counts, 0.45, inst.net.signs, cfg.epsilon);
    REQUIRE(sets.conditions.entries.size() == 4);
    CHECK(sets.conditions.entries[0].name == "D1");
    CHECK(sets.conditions.entries[0].threshold ==
          doctest::Approx(static_cast<double>(cfg.m) / 7.0));
    // e_nu matches its definition
    for (const ClusterId nu : kAllClusters) {
        const double expected = 0.5 * static_cast<double>(
            counts.clean_of(nu) - counts.noisy_of(nu) - counts.clean_of(negate(nu)) +
            counts.noisy_of(negate(nu)));
        CHECK(sets.e[static_cast<int>(nu)] == expected);
    }
    // D1 measured equals the true minimum class activation count
    std::int64_t min_act = cfg.m;
    for (std::int64_t i = 0; i < cfg.n; ++i)
        min_act = std::min({min_act, stats.act_pos[i], stats.act_neg[i]});
    CHECK(sets.conditions.entries[0].measured == static_cast<double>(min_act));
}

TEST_CASE("neuron projections preserve order and honor the sign filter") {
    const RunConfig cfg = small_config();
    const Instance inst = make_instance(cfg, 30);
    const auto all = neuron_projections(inst.net, inst.ds.mu1);
    REQUIRE(all.size() == static_cast<std::size_t>(cfg.m));
    for (std::int64_t j = 0; j < cfg.m; ++j)
        CHECK(all[j] == dot(inst.net.row(j), inst.ds.mu1.data(), cfg.p));
    const auto pos = neuron_projections(inst.net, inst.ds.mu1, 1);
    const auto neg = neuron_projections(inst.net, inst.ds.mu1, -1);
    CHECK(pos.size() + neg.size() == all.size());

    Network zero = inst.net;
    for (auto& v : zero.w) v = 0.0;
    for (const double v : neuron_projections(zero, inst.ds.mu1)) CHECK(v == 0.0);
}

TEST_CASE("initial projections are sign-symmetric (two-sided test at 1%)") {
    RunConfig cfg = small_config();
    cfg.m = 500;
    cfg.p = 64;
    cfg.mu_norm = 6.0;
    std::int64_t positive = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const Instance inst = make_instance(cfg, 300 + seed);
        for (const double v : neuron_projections(inst.net, inst.ds.mu1)) {
            positive += v > 0.0 ? 1 : 0;
            ++total;
        }
    }
    const double z = (static_cast<double>(positive) - 0.5 * static_cast<double>(total)) /
                     std::sqrt(0.25 * static_cast<double>(total));
    CHECK(std::abs(z) < 2.5758);  // two-sided 1% critical value
}

TEST_CASE("linear comparator on orthogonal data and its scaling invariance") {
    Dataset ds;
    ds.n = 2;
    ds.p = 4;
    ds.eta = 0.0;
    ds.mu1 = {2, 0, 0, 0};
    ds.mu2 = {0, 2, 0, 0};
    ds.x = {1, 0, 0, 0, 0, 3, 0, 0};
    ds.y = {1, -1};
    ds.y_clean = {1, -1};
    ds.cluster = {ClusterId::PlusMu1, ClusterId::PlusMu2};
    const LinearComparator comp = linear_comparator(ds);
    CHECK(comp.weights() == std::vector<double>{1, -3, 0, 0});
    CHECK(comp.train_accuracy(ds) == 1.0);

    // agreement is invariant under positive input rescaling
    const RunConfig cfg = small_config();
    const Instance inst = make_instance(cfg, 41);
    const LinearComparator comp2 = linear_comparator(inst.ds);
    Rng stream = substream(42, StreamId::test);
    Dataset points = sample_clean(inst.ds, 64, stream);
    const double base = agreement(inst.net, comp2, points);
    for (auto& v : points.x) v *= 7.5;
    CHECK(agreement(inst.net, comp2, points) == base);
}

TEST_CASE("comparator train accuracy is perfect on near-orthogonal data") {
    // high-dimensional config: rows are near orthogonal
    RunConfig cfg;
    cfg.n = 32;
    cfg.p = 16384;
    cfg.mu_norm = 40.0;
    cfg.eta = 0.15;
    cfg.m = 4;
    cfg.omega_init = 0.0;
    cfg.alpha = 1e-3;
    cfg.steps = 0;
    cfg.seed = 0;
    cfg.validate();
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        Rng stream = substream(50 + seed, StreamId::dataset);
        const Dataset ds = sample_dataset(cfg, stream);
        CHECK(linear_comparator(ds).train_accuracy(ds) == 1.0);
    }
}

TEST_CASE("relu lln: constant b reduces to a scaled binomial (oracle first)") {
    // For b = 1: sum_j a_j phi(a_j) = #{a_j > 0}/m, so the signed deviation
    // from 1/2 has standard deviation exactly 1/(2 sqrt(m)).
    const auto results = relu_lln_check({10000}, 1000, {LlnDistribution::Kind::Constant, 1.0, 0.0},
                                        12345);
    REQUIRE(results.size() == 1);
    const double expected_sd = 1.0 / (2.0 * std::sqrt(10000.0));
    CHECK(std::abs(results[0].std_dev / expected_sd - 1.0) <= 0.10);
}

TEST_CASE("relu lln: b = 0 gives exactly zero sums") {
    const auto results = relu_lln_check({64, 256}, 50, {LlnDistribution::Kind::Constant, 0.0, 0.0},
                                        5);
    for (const auto& r : results) {
        CHECK(r.mean_abs_dev == 0.0);
        CHECK(r.std_dev == 0.0);
    }
}

TEST_CASE("relu lln: standard normal b shrinks like 1/sqrt(m)") {
    const auto results = relu_lln_check({100, 1000, 10000}, 400,
                                        {LlnDistribution::Kind::Normal, 0.0, 1.0}, 777);
    REQUIRE(results.size() == 3);
    // least-squares slope of log deviation vs log m
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& r : results) {
        const double x = std::log(static_cast<double>(r.m));
        const double y = std::log(r.mean_abs_dev);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double slope = (3.0 * sxy - sx * sy) / (3.0 * sxx - sx * sx);
    CHECK(slope >= -0.6);
    CHECK(slope <= -0.4);
}
