#pragma once

#include <cstdint>
#include <vector>

#include "grokxor/dataset.hpp"
#include "grokxor/network.hpp"

namespace grokxor {

// Span-space GD engine. Every GD iterate satisfies
//   w_j^(t) = w_j^(0) + sum_i beta_ji x_i,
// so the whole trajectory can be advanced through the n x n Gram matrix
// without touching the m x p weight matrix: one step costs O(m n^2) instead
// of O(m n p). This is an exact reformulation of gd_step (same two phases,
// same fixed summation orders), cross-checked against it in the tests.
class KernelRun {
public:
    // Keeps references to net0 and ds; both must outlive the run.
    KernelRun(const Network& net0, const Dataset& ds);

    // Attach a fixed panel of clean test points (consumed; only the O(n_test
    // x n) Gram slices and labels are retained).
    void attach_test_panel(const Dataset& panel);

    // One full-batch GD step (phase 1: g from the current inner products,
    // phase 2: beta update, then inner-product refresh). Throws NumericAbort
    // on a non-finite update.
    void step(double alpha);

    // Rewind to step 0 (keeps the precomputed Grams and the test panel).
    void reset();

    std::int64_t step_index() const { return step_index_; }
    std::int64_t m() const { return m_; }
    std::int64_t n() const { return n_; }

    // <w_j^(t), x_i>, row-major m x n; valid until the next step().
    const std::vector<double>& inner() const { return inner_; }

    // Margins z_i = y_i f(x_i) under the current weights.
    std::vector<double> margins() const;

    double train_accuracy() const;
    double w_fro_sq() const;

    // <w_j^(t), mu1> and <w_j^(t), mu2>.
    double proj_mu1(std::int64_t j) const;
    double proj_mu2(std::int64_t j) const;

    // Misclassification rate on the attached test panel.
    double test_error() const;
    // Network predictions on the attached panel, in panel order.
    std::vector<int> test_predictions() const;
    // <sum_i y_i x_i, panel_l> for the one-step linear comparator.
    std::vector<double> comparator_scores() const;
    const std::vector<std::int8_t>& test_labels() const { return test_labels_; }

    // Materialize the explicit weight matrix W^(t) = W^(0) + beta^T X.
    Network materialize() const;

private:
    void refresh_inner();

    const Network& net0_;
    const Dataset& ds_;
    std::int64_t m_ = 0, n_ = 0, p_ = 0;
    std::int64_t step_index_ = 0;
    double scale_ = 0.0;

    std::vector<double> gram_;        // n x n
    std::vector<double> inner0_;      // m x n, <w_j^(0), x_i>
    std::vector<double> inner_;       // m x n, current step
    std::vector<double> beta_;        // m x n
    std::vector<double> w0_sq_;       // m, |w_j^(0)|^2
    std::vector<double> proj0_mu_;    // m x 2, <w_j^(0), mu_d>
    std::vector<double> x_mu_;        // n x 2, <x_i, mu_d>

    std::int64_t n_test_ = 0;
    std::vector<double> test_gram_;   // n_test x n, <x_i, panel_l>
    std::vector<double> test_inner0_; // n_test x m, <w_j^(0), panel_l>
    std::vector<std::int8_t> test_labels_;
};

}  // namespace grokxor
