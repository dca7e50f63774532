#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "grokxor/config.hpp"
#include "grokxor/dataset.hpp"
#include "grokxor/network.hpp"

namespace grokxor {

struct NumericAbort : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-sample loss state: z_i = y_i f(x_i), g_i = -l'(z_i) = 1/(1+exp(z_i)),
// h_i = g_i - 1/2.
struct GVector {
    std::vector<double> z, g, h;
    double max_abs_h() const;
    double loss_ratio() const;  // max g / min g
    double risk() const;        // mean log(1 + exp(-z))
};

GVector compute_g(const Network& net, const Dataset& ds);
GVector g_from_margins(const std::vector<double>& z);

// One full-batch GD step on the logistic loss. Two phases: (1) g and the
// activation indicators from the pre-step W; (2) w_j += (alpha a_j / n) *
// sum_i g_i [<w_j,x_i)> 0] y_i x_i. Active means strictly positive
// (phi'(0) = 0). Takes the network by value; update happens in place.
Network gd_step(Network net, const Dataset& ds, double alpha);

// First step with g_i frozen at 1/2 (the unhinged comparator W_T^(1)).
// Requires net0.step_index == 0.
Network linearized_first_step(const Network& net0, const Dataset& ds, double alpha);

struct StepMetrics {
    std::int64_t t = 0;
    double train_accuracy = 0.0;
    double test_error = 0.0;
    double risk = 0.0;
    double loss_ratio = 1.0;   // r(t)
    double max_abs_h = 0.0;
    double w_fro = 0.0;
    // Neurons currently nu-aligned (the alignment predicate evaluated on the
    // step-t activation statistics; at t = 0 this is the paper's definition),
    // counted per sign class and center pair at kappa = 20 eps.
    std::int64_t aligned_pos_mu1 = 0;
    std::int64_t aligned_pos_mu2 = 0;
    std::int64_t aligned_neg_mu1 = 0;
    std::int64_t aligned_neg_mu2 = 0;
    double j1_mean_proj = 0.0;     // mean over J1 of <w_j, +mu1>
    double j2_mean_absproj = 0.0;  // mean over J2 of |<w_j, mu1>|
    // mu2 mirrors (not part of the trace CSV contract).
    double j1_mu2_mean_proj = 0.0;
    double j2_mu2_mean_absproj = 0.0;
};

struct TrainTrace {
    std::vector<StepMetrics> metrics;
    std::vector<std::string> warnings;
    std::int64_t j1_size = 0;  // (+mu1, 20eps)-aligned positive neurons at t=0
    std::int64_t j2_size = 0;  // (+/-mu1, 20eps)-aligned negative neurons at t=0
    double kappa = 0.0;
    // Pair-property accounting over the recorded horizon (when enabled):
    // E2 violations (<w_j,x_k> > (alpha/sqrt(m))|mu|^2 with a_j y_k < 0) and
    // E3 violations (active wrong-sign pair not flipped negative next step).
    std::int64_t e2_violations = 0;
    std::int64_t e3_violations = 0;
    bool pair_checks_enabled = false;
};

struct RunHooks {
    // Record metrics at step t? Default: every step (the trace contract).
    std::function<bool(std::int64_t)> record_at;
    // Steps at which to materialize the full network and hand it out.
    std::vector<std::int64_t> snapshot_steps;
    std::function<void(std::int64_t, const Network&)> on_snapshot;
    // Optional early stop, consulted after each recorded step.
    std::function<bool(const StepMetrics&)> stop_when;
    // Track E2/E3 pair properties along the trajectory (costs O(mn)/step).
    bool pair_checks = false;
    // Evaluate test error on this many fresh points per recorded step
    // (0 = use cfg.n_test).
    std::int64_t test_points = 0;
};

// Full training loop. Metrics at every recorded step (t = 0 included);
// emits a warning record when t exceeds the smaller of the two analysis
// horizons (sqrt(n) and 1/(sqrt(n) p alpha) - 2) but keeps going.
TrainTrace run_training(const RunConfig& cfg, const Dataset& ds, const Network& net0,
                        const RunHooks& hooks = {});

// Trace CSV, columns pinned:
// t,train_acc,test_err,risk,r,max_abs_h,w_fro,al_p_mu1,al_p_mu2,al_n_mu1,al_n_mu2,j1_mean_proj,j2_mean_absproj
std::string trace_to_csv(const TrainTrace& trace);

struct ResidualStats {
    // Sample-direction residuals of the Lemma step decomposition vs bound.
    double max_ratio_x = 0.0;
    double mean_ratio_x = 0.0;
    double max_residual_x = 0.0;
    // Center-direction residuals vs 5 alpha |mu|^2 / (n^1.5 sqrt(m)).
    double max_ratio_mu = 0.0;
    double mean_ratio_mu = 0.0;
    double max_residual_mu = 0.0;
};

// Residuals of the one-step decomposition
//   <w^(t+1)-w^(t), x_k> ~ (alpha a_j / 2n)[y_k phi'(<w_j,x_k>) p
//                                           + y_{cluster(k)} D_{cluster(k),j} |mu|^2]
// against the analysis bound with C_n = 10 sqrt(log n), plus the
// center-direction analogue. net_after must be gd_step(net_before).
ResidualStats step_residuals(const Network& net_before, const Network& net_after,
                             const Dataset& ds, double alpha, double c_const = 1.0);

}  // namespace grokxor
