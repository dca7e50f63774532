#include "grokxor/kernel.hpp"

#include <cmath>
#include <stdexcept>

#include "grokxor/parallel.hpp"
#include "grokxor/trainer.hpp"

namespace grokxor {

KernelRun::KernelRun(const Network& net0, const Dataset& ds)
    : net0_(net0), ds_(ds), m_(net0.m), n_(ds.n), p_(ds.p), scale_(net0.scale()) {
    if (net0.p != ds.p) throw std::invalid_argument("KernelRun: dimension mismatch");

    gram_.resize(n_ * n_);
    pairwise_rows(ds.x.data(), n_, ds.x.data(), n_, p_, gram_.data());

    inner0_.resize(m_ * n_);
    pairwise_rows(net0.w.data(), m_, ds.x.data(), n_, p_, inner0_.data());
    w0_sq_.resize(m_);
    proj0_mu_.resize(m_ * 2);
    parallel_for(0, m_, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t j = lo; j < hi; ++j) {
            const double* wj = net0.row(j);
            w0_sq_[j] = dot(wj, wj, p_);
            proj0_mu_[j * 2] = dot(wj, ds.mu1.data(), p_);
            proj0_mu_[j * 2 + 1] = dot(wj, ds.mu2.data(), p_);
        }
    });

    x_mu_.resize(n_ * 2);
    for (std::int64_t i = 0; i < n_; ++i) {
        x_mu_[i * 2] = dot(ds.row(i), ds.mu1.data(), p_);
        x_mu_[i * 2 + 1] = dot(ds.row(i), ds.mu2.data(), p_);
    }

    beta_.assign(m_ * n_, 0.0);
    inner_ = inner0_;
}

void KernelRun::attach_test_panel(const Dataset& panel) {
    n_test_ = panel.n;
    test_labels_.assign(panel.y_clean.begin(), panel.y_clean.end());
    test_gram_.resize(n_test_ * n_);
    pairwise_rows(panel.x.data(), n_test_, ds_.x.data(), n_, p_, test_gram_.data());
    test_inner0_.resize(n_test_ * m_);
    pairwise_rows(panel.x.data(), n_test_, net0_.w.data(), m_, p_, test_inner0_.data());
}

std::vector<double> KernelRun::margins() const {
    std::vector<double> f(n_, 0.0);
    for (std::int64_t j = 0; j < m_; ++j) {
        const double aj = net0_.signs[j] * scale_;
        const double* row = inner_.data() + j * n_;
        for (std::int64_t i = 0; i < n_; ++i) f[i] += aj * relu(row[i]);
    }
    for (std::int64_t i = 0; i < n_; ++i) f[i] *= static_cast<double>(ds_.y[i]);
    return f;
}

void KernelRun::step(double alpha) {
    // Phase 1: margins and g from the pre-step inner products.
    std::vector<double> z = margins();
    const GVector gv = g_from_margins(z);

    // Phase 2: beta update from pre-step activations, then refresh.
    const double base = alpha / static_cast<double>(n_);
    parallel_for(0, m_, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t j = lo; j < hi; ++j) {
            const double coef = base * net0_.signs[j] * scale_;
            const double* row = inner_.data() + j * n_;
            double* bj = beta_.data() + j * n_;
            for (std::int64_t i = 0; i < n_; ++i)
                if (row[i] > 0.0) bj[i] += coef * gv.g[i] * static_cast<double>(ds_.y[i]);
        }
    });
    refresh_inner();
    for (const double v : inner_)
        if (!std::isfinite(v))
            throw NumericAbort("non-finite inner product at step " +
                               std::to_string(step_index_ + 1));
    ++step_index_;
}

void KernelRun::reset() {
    beta_.assign(m_ * n_, 0.0);
    inner_ = inner0_;
    step_index_ = 0;
}

void KernelRun::refresh_inner() {
    parallel_for(0, m_, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t j = lo; j < hi; ++j) {
            const double* bj = beta_.data() + j * n_;
            double* row = inner_.data() + j * n_;
            const double* row0 = inner0_.data() + j * n_;
            for (std::int64_t i = 0; i < n_; ++i)
                row[i] = row0[i] + dot(bj, gram_.data() + i * n_, n_);
        }
    });
}

double KernelRun::train_accuracy() const {
    const std::vector<double> z = margins();
    std::int64_t correct = 0;
    // z_i = y_i f_i; f = 0 predicts +1, so a tie is correct iff y_i = +1.
    for (std::int64_t i = 0; i < n_; ++i)
        if (z[i] > 0.0 || (z[i] == 0.0 && ds_.y[i] == 1)) ++correct;
    return static_cast<double>(correct) / static_cast<double>(n_);
}

double KernelRun::w_fro_sq() const {
    std::vector<double> partial(m_);
    parallel_for(0, m_, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t j = lo; j < hi; ++j) {
            const double* bj = beta_.data() + j * n_;
            double q = w0_sq_[j];
            for (std::int64_t i = 0; i < n_; ++i) {
                if (bj[i] == 0.0) continue;
                q += 2.0 * bj[i] * inner0_[j * n_ + i] +
                     bj[i] * dot(bj, gram_.data() + i * n_, n_);
            }
            partial[j] = q;
        }
    });
    double total = 0.0;
    for (const double q : partial) total += q;
    return total;
}

double KernelRun::proj_mu1(std::int64_t j) const {
    double v = proj0_mu_[j * 2];
    const double* bj = beta_.data() + j * n_;
    for (std::int64_t i = 0; i < n_; ++i) v += bj[i] * x_mu_[i * 2];
    return v;
}

double KernelRun::proj_mu2(std::int64_t j) const {
    double v = proj0_mu_[j * 2 + 1];
    const double* bj = beta_.data() + j * n_;
    for (std::int64_t i = 0; i < n_; ++i) v += bj[i] * x_mu_[i * 2 + 1];
    return v;
}

std::vector<int> KernelRun::test_predictions() const {
    std::vector<int> pred(n_test_);
    parallel_for(0, n_test_, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t l = lo; l < hi; ++l) {
            double f = 0.0;
            const double* g_l = test_gram_.data() + l * n_;
            const double* p0_l = test_inner0_.data() + l * m_;
            for (std::int64_t j = 0; j < m_; ++j) {
                const double pre = p0_l[j] + dot(beta_.data() + j * n_, g_l, n_);
                f += net0_.signs[j] * scale_ * relu(pre);
            }
            pred[l] = f < 0.0 ? -1 : 1;
        }
    });
    return pred;
}

double KernelRun::test_error() const {
    if (n_test_ == 0) return 0.0;
    const std::vector<int> pred = test_predictions();
    std::int64_t wrong = 0;
    for (std::int64_t l = 0; l < n_test_; ++l)
        if (pred[l] != test_labels_[l]) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(n_test_);
}

std::vector<double> KernelRun::comparator_scores() const {
    std::vector<double> scores(n_test_, 0.0);
    for (std::int64_t l = 0; l < n_test_; ++l) {
        const double* g_l = test_gram_.data() + l * n_;
        double s = 0.0;
        for (std::int64_t i = 0; i < n_; ++i) s += static_cast<double>(ds_.y[i]) * g_l[i];
        scores[l] = s;
    }
    return scores;
}

Network KernelRun::materialize() const {
    Network net;
    net.m = m_;
    net.p = p_;
    net.step_index = step_index_;
    net.signs = net0_.signs;
    net.w.resize(m_ * p_);
    parallel_for(0, m_, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t j = lo; j < hi; ++j) {
            double* wj = net.w.data() + j * p_;
            const double* w0j = net0_.row(j);
            for (std::int64_t k = 0; k < p_; ++k) wj[k] = w0j[k];
            const double* bj = beta_.data() + j * n_;
            for (std::int64_t i = 0; i < n_; ++i)
                if (bj[i] != 0.0) axpy(bj[i], ds_.row(i), wj, p_);
        }
    });
    return net;
}

}  // namespace grokxor
