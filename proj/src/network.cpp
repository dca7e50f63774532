#include "grokxor/network.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "grokxor/parallel.hpp"

namespace grokxor {

namespace {

constexpr std::uint64_t kNetworkMagic = 0x47584f524e455431ULL;  // "GXORNET1"

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

}  // namespace

double Network::scale() const { return 1.0 / std::sqrt(static_cast<double>(m)); }

Network init_network(const RunConfig& cfg, Rng& stream) {
    Network net;
    net.m = cfg.m;
    net.p = cfg.p;
    net.step_index = 0;
    net.signs.resize(cfg.m);
    for (std::int64_t j = 0; j < cfg.m; ++j) net.signs[j] = static_cast<std::int8_t>(stream.sign());
    net.w.resize(cfg.m * cfg.p);
    for (double& v : net.w) v = cfg.omega_init * stream.normal();
    return net;
}

double forward(const Network& net, const double* x, std::int64_t p) {
    if (p != net.p) throw std::invalid_argument("forward: dimension mismatch");
    const double s = net.scale();
    double f = 0.0;
    for (std::int64_t j = 0; j < net.m; ++j)
        f += net.signs[j] * s * relu(dot(net.row(j), x, net.p));
    return f;
}

double forward(const Network& net, const std::vector<double>& x) {
    return forward(net, x.data(), static_cast<std::int64_t>(x.size()));
}

int predict(const Network& net, const double* x, std::int64_t p) {
    const double f = forward(net, x, p);
    if (f == 0.0) {
        net.tie_count.fetch_add(1, std::memory_order_relaxed);
        return 1;
    }
    return f > 0.0 ? 1 : -1;
}

double train_accuracy(const Network& net, const Dataset& ds) {
    if (ds.n == 0) return 0.0;
    std::int64_t correct = 0;
    for (std::int64_t i = 0; i < ds.n; ++i)
        if (predict(net, ds.row(i), ds.p) == ds.y[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(ds.n);
}

double estimate_test_error(const Network& net, const Dataset& ds, std::int64_t n_test,
                           Rng& stream) {
    if (n_test < 1) throw std::invalid_argument("estimate_test_error: n_test must be >= 1");
    const Dataset fresh = sample_clean(ds, n_test, stream);
    std::int64_t wrong = 0;
    for (std::int64_t i = 0; i < n_test; ++i)
        if (predict(net, fresh.row(i), fresh.p) != fresh.y_clean[i]) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(n_test);
}

std::vector<GridCell> decision_grid(const Network& net, const Dataset& ds, double half_width,
                                    std::int64_t resolution) {
    if (resolution < 2) throw std::invalid_argument("decision_grid: resolution must be >= 2");
    std::vector<GridCell> grid(resolution * resolution);
    const double step = 2.0 * half_width / static_cast<double>(resolution - 1);
    parallel_for(0, resolution, [&](std::int64_t lo, std::int64_t hi) {
        std::vector<double> x(net.p);
        for (std::int64_t ia = lo; ia < hi; ++ia) {
            const double a = -half_width + step * static_cast<double>(ia);
            for (std::int64_t ib = 0; ib < resolution; ++ib) {
                const double b = -half_width + step * static_cast<double>(ib);
                for (std::int64_t k = 0; k < net.p; ++k)
                    x[k] = a * ds.mu1[k] + b * ds.mu2[k];
                GridCell& cell = grid[ia * resolution + ib];
                cell.a = a;
                cell.b = b;
                cell.f = forward(net, x);
                cell.sign = cell.f > 0.0 ? 1 : (cell.f < 0.0 ? -1 : 1);
                if (cell.f == 0.0) net.tie_count.fetch_add(1, std::memory_order_relaxed);
            }
        }
    });
    return grid;
}

std::string grid_to_csv(const std::vector<GridCell>& grid) {
    std::string out = "a,b,f,sign\n";
    char buf[128];
    for (const auto& cell : grid) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%d\n", cell.a, cell.b, cell.f,
                      cell.sign);
        out += buf;
    }
    return out;
}

void save_network(const Network& net, const std::string& path) {
    static_assert(std::endian::native == std::endian::little);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_u64(out, kNetworkMagic);
    write_u64(out, static_cast<std::uint64_t>(net.m));
    write_u64(out, static_cast<std::uint64_t>(net.p));
    write_u64(out, static_cast<std::uint64_t>(net.step_index));
    out.write(reinterpret_cast<const char*>(net.signs.data()), net.m);
    out.write(reinterpret_cast<const char*>(net.w.data()),
              static_cast<std::streamsize>(net.w.size() * 8));
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

Network load_network(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    if (read_u64(in) != kNetworkMagic)
        throw std::runtime_error("bad network magic in '" + path + "'");
    Network net;
    net.m = static_cast<std::int64_t>(read_u64(in));
    net.p = static_cast<std::int64_t>(read_u64(in));
    net.step_index = static_cast<std::int64_t>(read_u64(in));
    net.signs.resize(net.m);
    net.w.resize(net.m * net.p);
    in.read(reinterpret_cast<char*>(net.signs.data()), net.m);
    in.read(reinterpret_cast<char*>(net.w.data()),
            static_cast<std::streamsize>(net.w.size() * 8));
    if (!in) throw std::runtime_error("truncated network file '" + path + "'");
    return net;
}

}  // namespace grokxor
