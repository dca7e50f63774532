#include "grokxor/dataset.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "grokxor/parallel.hpp"

namespace grokxor {

namespace {

constexpr std::uint64_t kDatasetMagic = 0x47584f5244415431ULL;  // "GXORDAT1"

void write_u64(std::ofstream& out, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::ifstream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

void write_f64(std::ofstream& out, const double* data, std::size_t count) {
    // Little-endian hosts only; static-assert the assumption instead of
    // byte-swapping on a platform this never targets.
    static_assert(std::endian::native == std::endian::little);
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 8));
}

void read_f64(std::ifstream& in, double* data, std::size_t count) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * 8));
}

ClusterId pick_center(int y_clean, int coin) {
    if (y_clean == 1) return coin == 1 ? ClusterId::PlusMu1 : ClusterId::MinusMu1;
    return coin == 1 ? ClusterId::PlusMu2 : ClusterId::MinusMu2;
}

void sample_points(Dataset& ds, std::int64_t count, double eta, Rng& stream) {
    const std::int64_t p = ds.p;
    ds.x.resize(count * p);
    ds.y.resize(count);
    ds.y_clean.resize(count);
    ds.cluster.resize(count);
    for (std::int64_t i = 0; i < count; ++i) {
        const int y_clean = stream.sign();
        const ClusterId c = pick_center(y_clean, stream.sign());
        const std::vector<double>& mu = ds.center(c);
        const double s = ds.center_sign(c);
        double* xi = ds.row(i);
        for (std::int64_t k = 0; k < p; ++k) xi[k] = s * mu[k] + stream.normal();
        int y = y_clean;
        if (eta > 0.0 && stream.bernoulli(eta)) y = -y;
        ds.y_clean[i] = static_cast<std::int8_t>(y_clean);
        ds.y[i] = static_cast<std::int8_t>(y);
        ds.cluster[i] = c;
    }
}

}  // namespace

double Dataset::mu_sq() const {
    return dot(mu1.data(), mu1.data(), mu1.size());
}

Dataset sample_dataset(const RunConfig& cfg, Rng& stream, bool rotate_means, Rng* rotate_stream) {
    Dataset ds;
    ds.n = cfg.n;
    ds.p = cfg.p;
    ds.eta = cfg.eta;
    ds.mu1.assign(cfg.p, 0.0);
    ds.mu2.assign(cfg.p, 0.0);
    if (!rotate_means) {
        ds.mu1[0] = cfg.mu_norm;
        ds.mu2[1] = cfg.mu_norm;
    } else {
        Rng local(0);
        Rng& rs = rotate_stream ? *rotate_stream : local;
        if (!rotate_stream) local = Rng(derive_seed(cfg.seed, StreamId::rotate));
        // Gram-Schmidt on two Gaussian directions.
        for (auto& v : ds.mu1) v = rs.normal();
        for (auto& v : ds.mu2) v = rs.normal();
        const double n1 = std::sqrt(dot(ds.mu1.data(), ds.mu1.data(), cfg.p));
        for (auto& v : ds.mu1) v /= n1;
        const double proj = dot(ds.mu1.data(), ds.mu2.data(), cfg.p);
        for (std::int64_t k = 0; k < cfg.p; ++k) ds.mu2[k] -= proj * ds.mu1[k];
        const double n2 = std::sqrt(dot(ds.mu2.data(), ds.mu2.data(), cfg.p));
        for (auto& v : ds.mu2) v /= n2;
        for (auto& v : ds.mu1) v *= cfg.mu_norm;
        for (auto& v : ds.mu2) v *= cfg.mu_norm;
    }
    sample_points(ds, cfg.n, cfg.eta, stream);
    return ds;
}

Dataset sample_clean(const Dataset& like, std::int64_t n_samples, Rng& stream) {
    Dataset ds;
    ds.n = n_samples;
    ds.p = like.p;
    ds.eta = 0.0;
    ds.mu1 = like.mu1;
    ds.mu2 = like.mu2;
    sample_points(ds, n_samples, 0.0, stream);
    return ds;
}

ClusterCounts cluster_counts(const Dataset& ds) {
    ClusterCounts counts;
    for (std::int64_t i = 0; i < ds.n; ++i) {
        const int c = static_cast<int>(ds.cluster[i]);
        if (ds.noisy(i)) ++counts.noisy[c];
        else ++counts.clean[c];
    }
    return counts;
}

std::int64_t ClusterCounts::total() const {
    std::int64_t t = 0;
    for (int c = 0; c < 4; ++c) t += clean[c] + noisy[c];
    return t;
}

ConditionReport check_data_conditions(const Dataset& ds, double eps) {
    const double n = static_cast<double>(ds.n);
    const double p = static_cast<double>(ds.p);
    const double mu2 = ds.mu_sq();
    const double logn = std::log(n);
    const double eta = ds.eta;

    // B1: per-sample center alignment and squared-norm concentration.
    double b1_center = 0.0;
    double b1_norm = 0.0;
    std::vector<double> sqnorm(ds.n);
    for (std::int64_t k = 0; k < ds.n; ++k) {
        const double* xk = ds.row(k);
        sqnorm[k] = dot(xk, xk, ds.p);
        const double pm1 = dot(xk, ds.mu1.data(), ds.p);
        const double pm2 = dot(xk, ds.mu2.data(), ds.p);
        const double bm1 = ds.center_sign(ds.cluster[k]) *
                           (clean_label(ds.cluster[k]) == 1 ? mu2 : 0.0);
        const double bm2 = ds.center_sign(ds.cluster[k]) *
                           (clean_label(ds.cluster[k]) == 1 ? 0.0 : mu2);
        // <x_k - xbar_k, nu> over nu in centers; xbar projections are exact.
        for (const double v : {pm1 - bm1, -(pm1 - bm1), pm2 - bm2, -(pm2 - bm2)})
            b1_center = std::max(b1_center, v);
        b1_norm = std::max(b1_norm, std::abs(sqnorm[k] - p - mu2));
    }

    // B2: pairwise inner products vs center inner products.
    double b2 = 0.0;
    if (ds.n > 1) {
        std::vector<double> worst(static_cast<std::size_t>(ds.n), 0.0);
        parallel_for(0, ds.n, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t i = lo; i < hi; ++i) {
                double w = 0.0;
                for (std::int64_t k = i + 1; k < ds.n; ++k) {
                    const double g = dot(ds.row(i), ds.row(k), ds.p);
                    double centers = 0.0;
                    if (clean_label(ds.cluster[i]) == clean_label(ds.cluster[k])) {
                        centers = (ds.cluster[i] == ds.cluster[k]) ? mu2 : -mu2;
                    }
                    w = std::max(w, std::abs(g - centers));
                }
                worst[static_cast<std::size_t>(i)] = w;
            }
        });
        for (const double w : worst) b2 = std::max(b2, w);
    }

    // B3/B4: cluster count concentration and anti-concentration.
    const ClusterCounts counts = cluster_counts(ds);
    double b3_size = 0.0, b3_noise = 0.0;
    for (const ClusterId c : kAllClusters) {
        const double sz = static_cast<double>(counts.size_of(c));
        b3_size = std::max(b3_size, std::abs(sz - n / 4.0));
        b3_noise = std::max(b3_noise,
                            std::abs(static_cast<double>(counts.noisy_of(c)) - eta * sz));
    }
    double b4_size = std::numeric_limits<double>::infinity();
    double b4_noise = std::numeric_limits<double>::infinity();
    for (const ClusterId c : {ClusterId::PlusMu1, ClusterId::PlusMu2}) {
        const ClusterId nc = negate(c);
        b4_size = std::min(b4_size, std::abs(static_cast<double>(counts.size_of(c)) -
                                             static_cast<double>(counts.size_of(nc))));
        b4_noise = std::min(b4_noise, std::abs(static_cast<double>(counts.noisy_of(c)) -
                                               static_cast<double>(counts.noisy_of(nc))));
    }

    ConditionReport report;
    auto add = [&report](const char* name, double measured, double threshold, Direction dir) {
        ConditionEntry e;
        e.name = name;
        e.measured = measured;
        e.threshold = threshold;
        e.direction = dir;
        e.pass = dir == Direction::LessEq ? measured <= threshold : measured >= threshold;
        report.entries.push_back(e);
    };
    add("B1.center", b1_center, 10.0 * std::sqrt(logn) * std::sqrt(mu2), Direction::LessEq);
    add("B1.norm", b1_norm, 10.0 * std::sqrt(p * logn), Direction::LessEq);
    add("B2", b2, 10.0 * std::sqrt(p * logn), Direction::LessEq);
    add("B3.size", b3_size, std::sqrt(eps * n * logn), Direction::LessEq);
    add("B3.noise", b3_noise, std::sqrt(eps * eta * n * logn), Direction::LessEq);
    add("B4.size", b4_size, std::pow(n, 0.5 - eps), Direction::GreaterEq);
    add("B4.noise", b4_noise, eta * std::pow(n, 0.5 - eps), Direction::GreaterEq);
    return report;
}

double max_abs_cossim(const Dataset& ds) {
    if (ds.n < 2) throw std::invalid_argument("max_abs_cossim requires n >= 2");
    std::vector<double> norms(ds.n);
    for (std::int64_t i = 0; i < ds.n; ++i) {
        norms[i] = std::sqrt(dot(ds.row(i), ds.row(i), ds.p));
        if (norms[i] == 0.0) throw std::invalid_argument("max_abs_cossim: zero-norm row");
    }
    std::vector<double> worst(static_cast<std::size_t>(ds.n), 0.0);
    parallel_for(0, ds.n, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            double w = 0.0;
            for (std::int64_t k = i + 1; k < ds.n; ++k) {
                const double g = dot(ds.row(i), ds.row(k), ds.p);
                w = std::max(w, std::abs(g) / (norms[i] * norms[k]));
            }
            worst[static_cast<std::size_t>(i)] = w;
        }
    });
    double result = 0.0;
    for (const double w : worst) result = std::max(result, w);
    return result;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_u64(out, kDatasetMagic);
    write_u64(out, static_cast<std::uint64_t>(ds.n));
    write_u64(out, static_cast<std::uint64_t>(ds.p));
    write_f64(out, &ds.eta, 1);
    write_f64(out, ds.mu1.data(), ds.mu1.size());
    write_f64(out, ds.mu2.data(), ds.mu2.size());
    write_f64(out, ds.x.data(), ds.x.size());
    out.write(reinterpret_cast<const char*>(ds.y.data()), ds.n);
    out.write(reinterpret_cast<const char*>(ds.y_clean.data()), ds.n);
    for (std::int64_t i = 0; i < ds.n; ++i) {
        const std::uint8_t c = static_cast<std::uint8_t>(ds.cluster[i]);
        out.write(reinterpret_cast<const char*>(&c), 1);
    }
    if (!out) throw std::runtime_error("write failed for '" + path + "'");

    const ClusterCounts counts = cluster_counts(ds);
    std::ofstream side(path + ".txt");
    side << "n = " << ds.n << "\np = " << ds.p << "\neta = " << ds.eta << "\n";
    for (const ClusterId c : kAllClusters)
        side << cluster_name(c) << ": clean=" << counts.clean_of(c)
             << " noisy=" << counts.noisy_of(c) << "\n";
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    if (read_u64(in) != kDatasetMagic) throw std::runtime_error("bad dataset magic in '" + path + "'");
    Dataset ds;
    ds.n = static_cast<std::int64_t>(read_u64(in));
    ds.p = static_cast<std::int64_t>(read_u64(in));
    read_f64(in, &ds.eta, 1);
    ds.mu1.resize(ds.p);
    ds.mu2.resize(ds.p);
    ds.x.resize(ds.n * ds.p);
    read_f64(in, ds.mu1.data(), ds.mu1.size());
    read_f64(in, ds.mu2.data(), ds.mu2.size());
    read_f64(in, ds.x.data(), ds.x.size());
    ds.y.resize(ds.n);
    ds.y_clean.resize(ds.n);
    ds.cluster.resize(ds.n);
    in.read(reinterpret_cast<char*>(ds.y.data()), ds.n);
    in.read(reinterpret_cast<char*>(ds.y_clean.data()), ds.n);
    for (std::int64_t i = 0; i < ds.n; ++i) {
        std::uint8_t c = 0;
        in.read(reinterpret_cast<char*>(&c), 1);
        ds.cluster[i] = static_cast<ClusterId>(c);
    }
    if (!in) throw std::runtime_error("truncated dataset file '" + path + "'");
    return ds;
}

}  // namespace grokxor
