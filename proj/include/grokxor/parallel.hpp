#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace grokxor {

inline int default_thread_count() {
    if (const char* env = std::getenv("GROKXOR_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

// Static partition of [begin, end) over worker threads. Each worker writes to
// disjoint output ranges, so results are identical for any thread count.
inline void parallel_for(std::int64_t begin, std::int64_t end,
                         const std::function<void(std::int64_t, std::int64_t)>& body,
                         int threads = 0) {
    const std::int64_t count = end - begin;
    if (count <= 0) return;
    if (threads <= 0) threads = default_thread_count();
    threads = static_cast<int>(std::min<std::int64_t>(threads, count));
    if (threads <= 1) {
        body(begin, end);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    const std::int64_t chunk = (count + threads - 1) / threads;
    for (int w = 0; w < threads; ++w) {
        const std::int64_t lo = begin + w * chunk;
        const std::int64_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, &errors, w, lo, hi] {
            try {
                body(lo, hi);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);
}

// Inner product with eight independent fma lanes. The fma is written out
// explicitly (the build disables compiler contraction) so every call site
// rounds identically; the summation order is fixed and deterministic.
inline double dot(const double* a, const double* b, std::size_t n) {
    double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    const std::size_t limit = n & ~std::size_t{7};
    std::size_t i = 0;
    for (; i < limit; i += 8)
        for (std::size_t l = 0; l < 8; ++l) acc[l] = std::fma(a[i + l], b[i + l], acc[l]);
    for (; i < n; ++i) acc[i % 8] = std::fma(a[i], b[i], acc[i % 8]);
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

inline void axpy(double coef, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += coef * x[i];
}

// All pairwise inner products between rows of A (ra x p) and rows of B
// (rb x p) into C (ra x rb, row-major). Rows are processed in 8 x 8 blocks
// for cache reuse; each element is exactly dot(A_r, B_c, p).
inline void pairwise_rows(const double* A, std::int64_t ra, const double* B, std::int64_t rb,
                          std::int64_t p, double* C, int threads = 0) {
    constexpr std::int64_t kBlock = 8;
    parallel_for(0, (ra + kBlock - 1) / kBlock, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t rb0 = lo; rb0 < hi; ++rb0) {
            const std::int64_t r0 = rb0 * kBlock;
            const std::int64_t r1 = std::min(ra, r0 + kBlock);
            for (std::int64_t c0 = 0; c0 < rb; c0 += kBlock) {
                const std::int64_t c1 = std::min(rb, c0 + kBlock);
                for (std::int64_t r = r0; r < r1; ++r)
                    for (std::int64_t c = c0; c < c1; ++c)
                        C[r * rb + c] = dot(A + r * p, B + c * p, p);
            }
        }
    }, threads);
}

}  // namespace grokxor
