#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "grokxor/config.hpp"
#include "grokxor/dataset.hpp"
#include "grokxor/rng.hpp"

namespace grokxor {

inline double relu(double v) { return v > 0.0 ? v : 0.0; }

// Two-layer ReLU network f(x) = sum_j a_j relu(<w_j, x>). Second-layer
// weights are sign bits times the shared scale 1/sqrt(m), frozen after init.
struct Network {
    std::int64_t m = 0;
    std::int64_t p = 0;
    std::int64_t step_index = 0;
    std::vector<double> w;           // m x p, row j = w_j
    std::vector<std::int8_t> signs;  // sign of a_j

    Network() = default;
    Network(const Network& other)
        : m(other.m), p(other.p), step_index(other.step_index), w(other.w), signs(other.signs),
          tie_count(other.tie_count.load()) {}
    Network& operator=(const Network& other) {
        m = other.m;
        p = other.p;
        step_index = other.step_index;
        w = other.w;
        signs = other.signs;
        tie_count.store(other.tie_count.load());
        return *this;
    }
    Network(Network&& other) noexcept
        : m(other.m), p(other.p), step_index(other.step_index), w(std::move(other.w)),
          signs(std::move(other.signs)), tie_count(other.tie_count.load()) {}
    Network& operator=(Network&& other) noexcept {
        m = other.m;
        p = other.p;
        step_index = other.step_index;
        w = std::move(other.w);
        signs = std::move(other.signs);
        tie_count.store(other.tie_count.load());
        return *this;
    }

    double scale() const;  // 1/sqrt(m)
    double a(std::int64_t j) const { return signs[j] * scale(); }
    const double* row(std::int64_t j) const { return w.data() + j * p; }
    double* row(std::int64_t j) { return w.data() + j * p; }

    // sign(0) predictions are deterministic (+1) but counted.
    mutable std::atomic<std::uint64_t> tie_count{0};
};

// a_j i.i.d. uniform on {+/-1/sqrt(m)} then W entries i.i.d. N(0, omega^2),
// drawn in that order (all of a, then W row-major).
Network init_network(const RunConfig& cfg, Rng& stream);

// Exact Eq-of-network evaluation, neurons summed in ascending index order.
double forward(const Network& net, const double* x, std::int64_t p);
double forward(const Network& net, const std::vector<double>& x);

// sign(forward); sign(0) := +1 and the network's tie counter increments.
int predict(const Network& net, const double* x, std::int64_t p);

// Fraction of training points with predict == observed label.
double train_accuracy(const Network& net, const Dataset& ds);

// Misclassification rate on n_test fresh P_clean samples (same means).
double estimate_test_error(const Network& net, const Dataset& ds, std::int64_t n_test,
                           Rng& stream);

struct GridCell {
    double a = 0.0;  // coefficient on mu1
    double b = 0.0;  // coefficient on mu2
    double f = 0.0;
    int sign = 1;
};

// forward at x = a mu1 + b mu2 on a uniform (resolution x resolution) grid
// over [-half_width, half_width]^2, emitted row-major (a outer, b inner).
std::vector<GridCell> decision_grid(const Network& net, const Dataset& ds, double half_width,
                                    std::int64_t resolution);

std::string grid_to_csv(const std::vector<GridCell>& grid);

// Binary snapshot (header m, p, t; sign bytes; W row-major); bit-exact.
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

}  // namespace grokxor
