#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "grokxor/dataset.hpp"
#include "grokxor/network.hpp"
#include "grokxor/rng.hpp"

namespace grokxor {

// Activation-set statistics per (center nu, neuron j):
//   countC = |C_{nu,j}|, countN = |N_{nu,j}|, d = countC - countN,
//   D_{nu,j} = d_{nu,j} - d_{-nu,j}.
// Plus per-sample activation counts over the positive/negative neuron
// classes (needed by condition D1) and the per-pair noisy imbalance
// Delta_nu = |n_nu - n_{-nu}| + sqrt(n).
struct AlignStats {
    std::int64_t m = 0;
    std::array<std::vector<std::int64_t>, 4> countC;  // [cluster][j]
    std::array<std::vector<std::int64_t>, 4> countN;
    std::vector<std::int64_t> act_pos;  // [i] neurons with a_j > 0 activated by x_i
    std::vector<std::int64_t> act_neg;
    std::array<double, 4> delta{};  // Delta_nu, same value for nu and -nu

    std::int64_t d(ClusterId nu, std::int64_t j) const {
        const int c = static_cast<int>(nu);
        return countC[c][j] - countN[c][j];
    }
    std::int64_t D(ClusterId nu, std::int64_t j) const {
        return d(nu, j) - d(negate(nu), j);
    }
};

// Exact counts from strict-positivity activations <w_j, x_i> > 0.
AlignStats activation_stats(const Network& net, const Dataset& ds);
// Same, from a precomputed inner-product matrix inner[j*n + i] = <w_j, x_i>.
AlignStats activation_stats_from_inner(const std::vector<double>& inner,
                                       const std::vector<std::int8_t>& signs, std::int64_t m,
                                       const Dataset& ds);

// A neuron j is (nu,kappa)-aligned when D_{nu,j} > n^(1/2-kappa) and
// max{d_{-nu,j}, d_{nu,j}} < min{c_nu, c_{-nu}} - 2(n_{+nu} + n_{-nu}) - sqrt(n).
bool is_aligned(const AlignStats& stats, const ClusterCounts& counts, ClusterId nu,
                std::int64_t j, double kappa);

struct AlignedSets {
    double kappa = 0.0;
    // members[cluster][sign] with sign 0 = positive a_j, 1 = negative a_j.
    std::array<std::array<std::vector<std::int64_t>, 2>, 4> members;
    // D-condition measurements (thresholds use the kappa this was built with;
    // at kappa = 20 eps they are the paper's D1-D4).
    ConditionReport conditions;
    // e_nu = (c_nu - n_nu - c_{-nu} + n_{-nu}) / 2, the initialization
    // expectation of D_{nu,j}; diagnostic only.
    std::array<double, 4> e{};

    const std::vector<std::int64_t>& of(ClusterId nu, bool positive) const {
        return members[static_cast<int>(nu)][positive ? 0 : 1];
    }
};

// Membership and the D1-D4 measured quantities from step-0 statistics.
AlignedSets aligned_sets(const AlignStats& stats0, const ClusterCounts& counts, double kappa,
                         const std::vector<std::int8_t>& signs, double eps);

// <w_j, direction> for every neuron passing the filter (nullopt = all,
// +1 = positive a_j only, -1 = negative only). Neuron order preserved.
std::vector<double> neuron_projections(const Network& net, const std::vector<double>& direction,
                                       std::optional<int> sign_filter = std::nullopt);

// The one-step comparator x -> sgn(<sum_i y_i x_i, x>).
class LinearComparator {
public:
    explicit LinearComparator(const Dataset& ds);
    int predict(const double* x, std::int64_t p) const;
    double train_accuracy(const Dataset& ds) const;
    double test_error(const Dataset& like, std::int64_t n_samples, Rng& stream) const;
    const std::vector<double>& weights() const { return v_; }

private:
    std::vector<double> v_;
};

LinearComparator linear_comparator(const Dataset& ds);

// Fraction of the given points on which the network and comparator agree.
double agreement(const Network& net, const LinearComparator& comparator, const Dataset& points);

struct LlnDistribution {
    // b_j are constant, or i.i.d. normal(mean, sd).
    enum class Kind { Constant, Normal } kind = Kind::Constant;
    double value = 0.0;  // constant value, or normal mean
    double sd = 1.0;
    double mean() const { return value; }
};

struct LlnResult {
    std::int64_t m = 0;
    double mean_abs_dev = 0.0;  // mean over trials of |sum_j a_j phi(a_j b_j) - b/2|
    double std_dev = 0.0;       // std of the signed deviation
    double q50 = 0.0, q90 = 0.0;
};

// Monte-Carlo check of the ReLU law of large numbers
// sum_j a_j phi(a_j b_j) -> E[b]/2; one independent substream per trial.
std::vector<LlnResult> relu_lln_check(const std::vector<std::int64_t>& m_values,
                                      std::int64_t trials, const LlnDistribution& b_spec,
                                      std::uint64_t master_seed);

}  // namespace grokxor
