#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "grokxor/config.hpp"
#include "grokxor/rng.hpp"

namespace grokxor {

// The four cluster centers {+mu1, -mu1, +mu2, -mu2}.
enum class ClusterId : std::uint8_t { PlusMu1 = 0, MinusMu1 = 1, PlusMu2 = 2, MinusMu2 = 3 };

constexpr std::array<ClusterId, 4> kAllClusters = {
    ClusterId::PlusMu1, ClusterId::MinusMu1, ClusterId::PlusMu2, ClusterId::MinusMu2};

constexpr ClusterId negate(ClusterId c) {
    switch (c) {
        case ClusterId::PlusMu1: return ClusterId::MinusMu1;
        case ClusterId::MinusMu1: return ClusterId::PlusMu1;
        case ClusterId::PlusMu2: return ClusterId::MinusMu2;
        default: return ClusterId::PlusMu2;
    }
}

// Clean label: +1 for the +/-mu1 pair, -1 for the +/-mu2 pair.
constexpr int clean_label(ClusterId c) {
    return (c == ClusterId::PlusMu1 || c == ClusterId::MinusMu1) ? 1 : -1;
}

constexpr const char* cluster_name(ClusterId c) {
    switch (c) {
        case ClusterId::PlusMu1: return "+mu1";
        case ClusterId::MinusMu1: return "-mu1";
        case ClusterId::PlusMu2: return "+mu2";
        default: return "-mu2";
    }
}

// One sampled training set; immutable after creation.
struct Dataset {
    std::int64_t n = 0;
    std::int64_t p = 0;
    double eta = 0.0;                  // generating flip probability (metadata)
    std::vector<double> x;             // n x p, row-major
    std::vector<std::int8_t> y;        // observed labels, +/-1
    std::vector<std::int8_t> y_clean;  // clean labels
    std::vector<ClusterId> cluster;    // per-sample center
    std::vector<double> mu1, mu2;      // p-vectors, orthogonal, equal norm

    const double* row(std::int64_t i) const { return x.data() + i * p; }
    double* row(std::int64_t i) { return x.data() + i * p; }
    bool noisy(std::int64_t i) const { return y[i] != y_clean[i]; }
    double mu_sq() const;
    const std::vector<double>& center(ClusterId c) const {
        return (c == ClusterId::PlusMu1 || c == ClusterId::MinusMu1) ? mu1 : mu2;
    }
    double center_sign(ClusterId c) const {
        return (c == ClusterId::PlusMu1 || c == ClusterId::PlusMu2) ? 1.0 : -1.0;
    }
};

struct ClusterCounts {
    std::array<std::int64_t, 4> clean{};  // c_nu, indexed by ClusterId
    std::array<std::int64_t, 4> noisy{};  // n_nu
    std::int64_t total() const;
    std::int64_t clean_of(ClusterId c) const { return clean[static_cast<int>(c)]; }
    std::int64_t noisy_of(ClusterId c) const { return noisy[static_cast<int>(c)]; }
    std::int64_t size_of(ClusterId c) const { return clean_of(c) + noisy_of(c); }
};

enum class Direction { LessEq, GreaterEq };

struct ConditionEntry {
    std::string name;
    double measured = 0.0;
    double threshold = 0.0;
    Direction direction = Direction::LessEq;
    bool pass = false;
};

struct ConditionReport {
    std::vector<ConditionEntry> entries;
    bool overall() const {
        for (const auto& e : entries)
            if (!e.pass) return false;
        return true;
    }
    const ConditionEntry* find(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return &e;
        return nullptr;
    }
};

// Sample n points of noisy XOR cluster data. Draw order per sample i:
// clean-label coin, center coin, xi coordinates 1..p, flip coin. Means are
// mu1 = |mu| e1, mu2 = |mu| e2 unless rotate_means, which draws a seeded
// random orthonormal pair first (from its own substream).
Dataset sample_dataset(const RunConfig& cfg, Rng& stream, bool rotate_means = false,
                       Rng* rotate_stream = nullptr);

// Draw n_samples from P_clean (no label flipping) with the same means.
// Used for test-error estimation; same per-sample draw order minus the flip.
Dataset sample_clean(const Dataset& like, std::int64_t n_samples, Rng& stream);

ClusterCounts cluster_counts(const Dataset& ds);

// Evaluate data conditions B1..B4 with measured extremal values.
// Entries: B1.center, B1.norm, B2, B3.size, B3.noise, B4.size, B4.noise.
ConditionReport check_data_conditions(const Dataset& ds, double eps);

// max over i != k of |<x_i,x_k>| / (|x_i| |x_k|); throws on a zero-norm row.
double max_abs_cossim(const Dataset& ds);

// Binary export/import; loader round-trips bit-exactly. A human-readable
// sidecar (counts summary) is written next to the file as <path>.txt.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace grokxor
