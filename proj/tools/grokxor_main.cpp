#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "grokxor/config.hpp"
#include "grokxor/dataset.hpp"
#include "grokxor/instrument.hpp"
#include "grokxor/kernel.hpp"
#include "grokxor/manifest.hpp"
#include "grokxor/network.hpp"
#include "grokxor/parallel.hpp"
#include "grokxor/propcheck.hpp"
#include "grokxor/trainer.hpp"

namespace fs = std::filesystem;
using namespace grokxor;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitIo = 3;
constexpr int kExitGate = 4;

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::map<std::string, std::string> overrides;
    bool rotate_means = false;
    bool timestamps = false;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_out = true) {
    cmd->add_option("--config", opts.config_path, "config file (key = value lines)");
    if (with_out) cmd->add_option("--out", opts.out_dir, "output directory");
    static const std::vector<std::string> keys = {"n",     "p",      "mu_norm", "eta",
                                                  "m",     "omega_init", "alpha", "steps",
                                                  "seed",  "n_test", "epsilon", "c_const"};
    for (const auto& key : keys) {
        cmd->add_option_function<std::string>(
            "--" + key, [&opts, key](const std::string& v) { opts.overrides[key] = v; },
            "override config key " + key);
    }
    cmd->add_flag("--rotate-means", opts.rotate_means,
                  "rotate the cluster means by a seeded random orthogonal pair");
    cmd->add_flag("--timestamps", opts.timestamps,
                  "record wall-clock timestamps in the manifest (breaks byte determinism)");
    cmd->add_option("--threads", opts.threads, "worker threads (default: GROKXOR_THREADS or all)");
}

RunConfig resolve_config(const CommonOpts& opts) {
    RunConfig cfg;
    if (!opts.config_path.empty()) {
        std::ifstream in(opts.config_path);
        if (!in) throw ConfigError("cannot open config file '" + opts.config_path + "'");
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        cfg = load_config(text);
    } else {
        cfg = RunConfig::paper();
    }
    cfg = apply_overrides(cfg, opts.overrides);
    if (opts.threads > 0)
        setenv("GROKXOR_THREADS", std::to_string(opts.threads).c_str(), 1);
    return cfg;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

// Dense early steps, then geometric spacing; always records 0 and `steps`.
std::function<bool(std::int64_t)> geometric_recorder(std::int64_t steps) {
    auto recorded = std::make_shared<std::set<std::int64_t>>();
    recorded->insert(0);
    double next = 1.0;
    while (next <= static_cast<double>(steps)) {
        recorded->insert(static_cast<std::int64_t>(next));
        next = std::max(next + 1.0, next * 1.0625);
    }
    recorded->insert(steps);
    return [recorded](std::int64_t t) { return recorded->count(t) > 0; };
}

std::string trace_svg(const TrainTrace& trace) {
    // Minimal unstyled line chart: train accuracy and test error vs t+1 (log x).
    const double width = 640.0, height = 400.0, margin = 45.0;
    double tmax = 1.0;
    for (const auto& sm : trace.metrics) tmax = std::max(tmax, static_cast<double>(sm.t + 1));
    const double lx_max = std::log10(tmax);
    auto px = [&](double t_plus_1) {
        const double lx = std::log10(t_plus_1);
        return margin + (width - 2 * margin) * (lx_max > 0 ? lx / lx_max : 0.0);
    };
    auto py = [&](double v) { return height - margin - (height - 2 * margin) * v; };
    std::string svg = "<svg xmlns='http://www.w3.org/2000/svg' width='640' height='400'>\n";
    char buf[128];
    auto polyline = [&](const char* color, auto value) {
        svg += "<polyline fill='none' stroke='";
        svg += color;
        svg += "' points='";
        for (const auto& sm : trace.metrics) {
            std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(static_cast<double>(sm.t + 1)),
                          py(value(sm)));
            svg += buf;
        }
        svg += "'/>\n";
    };
    polyline("#1f77b4", [](const StepMetrics& sm) { return sm.train_accuracy; });
    polyline("#d62728", [](const StepMetrics& sm) { return sm.test_error; });
    svg += "<line stroke='#000' x1='45' y1='355' x2='595' y2='355'/>\n";
    svg += "<line stroke='#000' x1='45' y1='45' x2='45' y2='355'/>\n";
    svg += "<text x='250' y='390'>t + 1 (log scale)</text>\n";
    svg += "<text x='470' y='30' fill='#1f77b4'>train accuracy</text>\n";
    svg += "<text x='470' y='58' fill='#d62728'>test error</text>\n";
    svg += "</svg>\n";
    return svg;
}

int cmd_run(const CommonOpts& opts, std::int64_t record_stride,
            const std::vector<std::int64_t>& snapshot_steps, bool emit_svg) {
    const RunConfig cfg = resolve_config(opts);
    fs::create_directories(opts.out_dir);

    RunManifest manifest;
    manifest.command = "run";
    manifest.config_text = dump_config(cfg);
    manifest.master_seed = cfg.seed;
    manifest.build_id = build_identifier();
    const bool stamps = opts.timestamps || (std::getenv("GROKXOR_TIMESTAMPS") &&
                                            std::string(std::getenv("GROKXOR_TIMESTAMPS")) == "1");
    if (stamps) manifest.start_time = timestamp_now();

    Rng data_stream = substream(static_cast<std::uint64_t>(cfg.seed), StreamId::dataset);
    const Dataset ds = sample_dataset(cfg, data_stream, opts.rotate_means);
    Rng init_stream = substream(static_cast<std::uint64_t>(cfg.seed), StreamId::init);
    const Network net0 = init_network(cfg, init_stream);

    RunHooks hooks;
    if (record_stride > 1) {
        const std::int64_t steps = cfg.steps;
        hooks.record_at = [record_stride, steps](std::int64_t t) {
            return t == 0 || t == steps || t % record_stride == 0;
        };
    }
    hooks.snapshot_steps = snapshot_steps;
    std::vector<std::string> written;
    hooks.on_snapshot = [&](std::int64_t t, const Network& net) {
        const std::string name = "snap_t" + std::to_string(t) + ".bin";
        save_network(net, opts.out_dir + "/" + name);
        written.push_back(name);
    };

    const TrainTrace trace = run_training(cfg, ds, net0, hooks);

    write_text(opts.out_dir + "/trace.csv", trace_to_csv(trace));
    written.insert(written.begin(), "trace.csv");

    nlohmann::ordered_json meta;
    meta["warnings"] = trace.warnings;
    meta["j1_size"] = trace.j1_size;
    meta["j2_size"] = trace.j2_size;
    meta["kappa"] = trace.kappa;
    meta["rotate_means"] = opts.rotate_means;
    meta["time_axis_note"] = "plots use t + 1 so t = 0 is visible on a log axis";
    write_text(opts.out_dir + "/run_meta.json", meta.dump(2) + "\n");
    written.push_back("run_meta.json");

    if (emit_svg) {
        write_text(opts.out_dir + "/trace.svg", trace_svg(trace));
        written.push_back("trace.svg");
    }

    for (const auto& name : written) manifest.add_file(opts.out_dir, name);
    if (stamps) manifest.end_time = timestamp_now();
    write_text(opts.out_dir + "/manifest.json", manifest.to_json());
    return kExitOk;
}

int cmd_check(const CommonOpts& opts, const std::string& suites_arg, std::int64_t seed_count,
              double gate, std::int64_t oracle_trials) {
    const RunConfig cfg = resolve_config(opts);
    fs::create_directories(opts.out_dir);

    std::vector<std::string> suites;
    {
        std::string token;
        std::istringstream ss(suites_arg);
        while (std::getline(ss, token, ',')) {
            if (!token.empty()) suites.push_back(token);
        }
    }
    if (suites.empty()) throw ConfigError("no suites requested");

    std::vector<std::int64_t> seeds(seed_count);
    for (std::int64_t k = 0; k < seed_count; ++k) seeds[k] = k;
    const std::vector<SuiteResult> results = run_condition_suite(cfg, seeds, suites);

    nlohmann::ordered_json j;
    auto arr = nlohmann::ordered_json::array();
    bool gate_failed = false;
    for (const auto& r : results) {
        nlohmann::ordered_json entry;
        entry["suite"] = r.suite;
        entry["seeds"] = r.seeds_run;
        entry["pass_rate"] = r.pass_rate;
        entry["worst_margin"] = r.worst_margin;
        entry["gated"] = r.gated;
        if (!r.notes.empty()) {
            nlohmann::ordered_json notes;
            for (const auto& [k, v] : r.notes) notes[k] = v;
            entry["notes"] = notes;
        }
        arr.push_back(entry);
        if (r.gated && r.pass_rate < gate) gate_failed = true;
    }
    j["suites"] = arr;
    j["gate"] = gate;

    // Anti-concentration oracle on the seed-0 cluster counts.
    {
        const RunConfig seed_cfg = per_seed_config(cfg, 0);
        Rng stream = substream(static_cast<std::uint64_t>(seed_cfg.seed), StreamId::dataset);
        const Dataset ds = sample_dataset(seed_cfg, stream);
        Rng oracle_stream = substream(static_cast<std::uint64_t>(cfg.seed), StreamId::oracle);
        const auto oracle =
            anti_concentration_oracle(cluster_counts(ds), oracle_trials, oracle_stream);
        auto oracle_json = nlohmann::ordered_json::array();
        for (const auto& r : oracle) {
            nlohmann::ordered_json entry;
            entry["pair"] = r.pair;
            entry["threshold"] = r.threshold;
            entry["estimate"] = r.estimate;
            entry["std_error"] = r.std_error;
            entry["normal_approx"] = r.normal_approx;
            entry["agrees_3se"] = std::abs(r.estimate - r.normal_approx) <= 3.0 * r.std_error;
            oracle_json.push_back(entry);
        }
        j["anti_concentration_oracle"] = oracle_json;
    }

    write_text(opts.out_dir + "/check.json", j.dump(2) + "\n");

    RunManifest manifest;
    manifest.command = "check";
    manifest.config_text = dump_config(cfg);
    manifest.master_seed = cfg.seed;
    manifest.build_id = build_identifier();
    manifest.add_file(opts.out_dir, "check.json");
    write_text(opts.out_dir + "/manifest.json", manifest.to_json());

    std::cout << j.dump(2) << "\n";
    return gate_failed ? kExitGate : kExitOk;
}

int cmd_figures(const CommonOpts& opts, const std::string& which, std::int64_t seed_count,
                double half_width, std::int64_t resolution) {
    const RunConfig cfg = resolve_config(opts);
    fs::create_directories(opts.out_dir);
    std::vector<std::int64_t> seeds(seed_count);
    for (std::int64_t k = 0; k < seed_count; ++k) seeds[k] = k;

    RunManifest manifest;
    manifest.command = "figures:" + which;
    manifest.config_text = dump_config(cfg);
    manifest.master_seed = cfg.seed;
    manifest.build_id = build_identifier();
    std::vector<std::string> written;

    nlohmann::ordered_json meta;
    meta["time_axis_note"] = "plots use t + 1 so t = 0 is visible on a log axis";
    meta["kappa"] = 20.0 * cfg.epsilon;

    if (which == "curves") {
        RunHooks hooks;
        if (cfg.steps > 64) hooks.record_at = geometric_recorder(cfg.steps);
        const AggregateCurves curves = aggregate_runs(cfg, seeds, cfg.steps, hooks);
        write_text(opts.out_dir + "/curves.csv", curves_to_csv(curves));
        written.push_back("curves.csv");
    } else if (which == "boundary" || which == "histograms") {
        const std::vector<std::int64_t> fig_steps = {0, 1, cfg.steps};
        struct Snapshot {
            std::int64_t seed, t;
            std::vector<std::int8_t> signs;
            std::vector<double> p1, p2;  // <w_j, mu1>, <w_j, mu2>
        };
        std::vector<Snapshot> snaps;
        for (const std::int64_t k : seeds) {
            RunConfig seed_cfg = per_seed_config(cfg, k);
            Rng data_stream =
                substream(static_cast<std::uint64_t>(seed_cfg.seed), StreamId::dataset);
            const Dataset ds = sample_dataset(seed_cfg, data_stream, opts.rotate_means);
            Rng init_stream =
                substream(static_cast<std::uint64_t>(seed_cfg.seed), StreamId::init);
            const Network net0 = init_network(seed_cfg, init_stream);
            KernelRun run(net0, ds);
            for (std::int64_t t = 0; t <= cfg.steps; ++t) {
                if (t > 0) run.step(seed_cfg.alpha);
                if (std::find(fig_steps.begin(), fig_steps.end(), t) == fig_steps.end())
                    continue;
                Snapshot snap;
                snap.seed = k;
                snap.t = t;
                snap.signs = net0.signs;
                snap.p1.resize(net0.m);
                snap.p2.resize(net0.m);
                for (std::int64_t jn = 0; jn < net0.m; ++jn) {
                    snap.p1[jn] = run.proj_mu1(jn);
                    snap.p2[jn] = run.proj_mu2(jn);
                }
                snaps.push_back(std::move(snap));
            }
            if (which == "boundary") {
                // Grid points live in span{mu1, mu2}, so f(a mu1 + b mu2)
                // needs only the per-neuron mu-plane projections.
                for (auto& snap : snaps) {
                    const double scale = 1.0 / std::sqrt(static_cast<double>(net0.m));
                    std::string csv = "a,b,f,sign\n";
                    char buf[160];
                    const double step = 2.0 * half_width / static_cast<double>(resolution - 1);
                    for (std::int64_t ia = 0; ia < resolution; ++ia) {
                        const double a = -half_width + step * static_cast<double>(ia);
                        for (std::int64_t ib = 0; ib < resolution; ++ib) {
                            const double b = -half_width + step * static_cast<double>(ib);
                            double f = 0.0;
                            for (std::int64_t jn = 0; jn < net0.m; ++jn)
                                f += snap.signs[jn] * scale *
                                     relu(a * snap.p1[jn] + b * snap.p2[jn]);
                            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%d\n", a, b, f,
                                          f < 0.0 ? -1 : 1);
                            csv += buf;
                        }
                    }
                    const std::string name = "grid_s" + std::to_string(snap.seed) + "_t" +
                                             std::to_string(snap.t) + ".csv";
                    write_text(opts.out_dir + "/" + name, csv);
                    written.push_back(name);
                }
                snaps.clear();
            }
        }
        if (which == "histograms") {
            for (const std::int64_t t : fig_steps) {
                std::string csv = "run,t,j,sign,proj_mu1,proj_mu2\n";
                char buf[160];
                for (const auto& snap : snaps) {
                    if (snap.t != t) continue;
                    for (std::size_t jn = 0; jn < snap.p1.size(); ++jn) {
                        std::snprintf(buf, sizeof(buf), "%lld,%lld,%zu,%d,%.17g,%.17g\n",
                                      static_cast<long long>(snap.seed),
                                      static_cast<long long>(snap.t), jn,
                                      static_cast<int>(snap.signs[jn]), snap.p1[jn],
                                      snap.p2[jn]);
                        csv += buf;
                    }
                }
                const std::string name = "proj_t" + std::to_string(t) + ".csv";
                write_text(opts.out_dir + "/" + name, csv);
                written.push_back(name);
            }
            // Pooled positive-neuron statistics per recorded step: skewness of
            // the mu1 projections and the mu1/mu2 spread ratio (the paper's
            // alignment signal is two-sided, so the ratio carries the story).
            auto moments = nlohmann::ordered_json::array();
            for (const std::int64_t t : fig_steps) {
                std::vector<double> v1, v2;
                for (const auto& snap : snaps) {
                    if (snap.t != t) continue;
                    for (std::size_t jn = 0; jn < snap.p1.size(); ++jn)
                        if (snap.signs[jn] > 0) {
                            v1.push_back(snap.p1[jn]);
                            v2.push_back(snap.p2[jn]);
                        }
                }
                auto sd_of = [](const std::vector<double>& v) {
                    double mean = 0.0;
                    for (const double x : v) mean += x;
                    mean /= static_cast<double>(v.size());
                    double m2 = 0.0;
                    for (const double x : v) m2 += (x - mean) * (x - mean);
                    return std::sqrt(m2 / static_cast<double>(v.size()));
                };
                double mean = 0.0;
                for (const double x : v1) mean += x;
                mean /= static_cast<double>(v1.size());
                double m2 = 0.0, m3 = 0.0;
                for (const double x : v1) {
                    m2 += (x - mean) * (x - mean);
                    m3 += (x - mean) * (x - mean) * (x - mean);
                }
                m2 /= static_cast<double>(v1.size());
                m3 /= static_cast<double>(v1.size());
                nlohmann::ordered_json entry;
                entry["t"] = t;
                entry["skewness_mu1"] = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
                entry["sd_mu1"] = sd_of(v1);
                entry["sd_mu2"] = sd_of(v2);
                moments.push_back(entry);
            }
            meta["positive_neuron_projection_stats"] = moments;
        }
    } else {
        throw ConfigError("unknown figures kind '" + which + "'");
    }

    write_text(opts.out_dir + "/figures_meta.json", meta.dump(2) + "\n");
    written.push_back("figures_meta.json");
    for (const auto& name : written) manifest.add_file(opts.out_dir, name);
    write_text(opts.out_dir + "/manifest.json", manifest.to_json());
    return kExitOk;
}

int cmd_sweep(const CommonOpts& opts, const std::vector<std::string>& sets) {
    const RunConfig base = resolve_config(opts);
    if (sets.empty()) throw ConfigError("sweep requires at least one --set key=v1,v2 grid");

    std::vector<std::pair<std::string, std::vector<std::string>>> grid;
    for (const auto& spec : sets) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw ConfigError("bad --set '" + spec + "'");
        const std::string key = spec.substr(0, eq);
        std::vector<std::string> values;
        std::istringstream ss(spec.substr(eq + 1));
        std::string token;
        while (std::getline(ss, token, ','))
            if (!token.empty()) values.push_back(token);
        if (values.empty()) throw ConfigError("empty value list in --set '" + spec + "'");
        grid.emplace_back(key, values);
    }

    std::vector<std::map<std::string, std::string>> cells = {{}};
    for (const auto& [key, values] : grid) {
        std::vector<std::map<std::string, std::string>> next;
        for (const auto& cell : cells)
            for (const auto& v : values) {
                auto expanded = cell;
                expanded[key] = v;
                next.push_back(std::move(expanded));
            }
        cells = std::move(next);
    }

    fs::create_directories(opts.out_dir);
    nlohmann::ordered_json index;
    auto cells_json = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < cells.size(); ++c) {
        std::string label = "cell_" + std::to_string(c);
        for (const auto& [key, v] : cells[c]) label += "__" + key + "-" + v;
        CommonOpts cell_opts = opts;
        cell_opts.out_dir = opts.out_dir + "/" + label;
        for (const auto& [key, v] : cells[c]) cell_opts.overrides[key] = v;
        const int rc = cmd_run(cell_opts, 1, {}, false);
        if (rc != kExitOk) return rc;
        nlohmann::ordered_json entry;
        entry["cell"] = label;
        nlohmann::ordered_json ov;
        for (const auto& [key, v] : cells[c]) ov[key] = v;
        entry["overrides"] = ov;
        entry["manifest_hash"] = hash_file(cell_opts.out_dir + "/manifest.json");
        cells_json.push_back(entry);
    }
    index["config"] = dump_config(base);
    index["cells"] = cells_json;
    write_text(opts.out_dir + "/sweep_index.json", index.dump(2) + "\n");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-layer ReLU network XOR-cluster training laboratory"};
    app.require_subcommand(1);

    CommonOpts run_opts, check_opts, fig_opts, sweep_opts, dump_opts;

    auto* run = app.add_subcommand("run", "one full training run");
    add_common(run, run_opts);
    std::int64_t record_stride = 1;
    std::string snapshot_list;
    bool emit_svg = false;
    run->add_option("--record-stride", record_stride, "record metrics every k-th step");
    run->add_option("--snapshots", snapshot_list, "comma list of steps to snapshot");
    run->add_flag("--emit-svg", emit_svg, "render a simple line chart from the trace");

    auto* check = app.add_subcommand("check", "multi-seed good-run condition suites");
    add_common(check, check_opts);
    std::string suites = "all";
    std::int64_t check_seeds = 20;
    double gate = 0.9;
    std::int64_t oracle_trials = 2000;
    check->add_option("--suites", suites, "comma list of suite ids, or 'all'");
    check->add_option("--seeds", check_seeds, "number of seeds");
    check->add_option("--gate", gate, "pass-rate gate for gated suites");
    check->add_option("--oracle-trials", oracle_trials, "anti-concentration oracle trials");

    auto* figures = app.add_subcommand("figures", "export figure data (curves/boundary/histograms)");
    add_common(figures, fig_opts);
    std::string which = "curves";
    std::int64_t fig_seeds = 1;
    double half_width = 2.0;
    std::int64_t resolution = 101;
    figures->add_option("--which", which, "curves | boundary | histograms");
    figures->add_option("--seeds", fig_seeds, "number of seeds");
    figures->add_option("--half-width", half_width, "grid half width in units of |mu|");
    figures->add_option("--resolution", resolution, "grid resolution per axis");

    auto* sweep = app.add_subcommand("sweep", "cross-product of config overrides");
    add_common(sweep, sweep_opts);
    std::vector<std::string> sets;
    sweep->add_option("--set", sets, "key=v1,v2,... (repeatable; cross product)");

    auto* dump = app.add_subcommand("dump-config", "print the effective config");
    add_common(dump, dump_opts, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (run->parsed()) {
            std::vector<std::int64_t> snapshot_steps;
            std::istringstream ss(snapshot_list);
            std::string token;
            while (std::getline(ss, token, ','))
                if (!token.empty()) snapshot_steps.push_back(std::stoll(token));
            return cmd_run(run_opts, record_stride, snapshot_steps, emit_svg);
        }
        if (check->parsed())
            return cmd_check(check_opts, suites, check_seeds, gate, oracle_trials);
        if (figures->parsed())
            return cmd_figures(fig_opts, which, fig_seeds, half_width, resolution);
        if (sweep->parsed()) return cmd_sweep(sweep_opts, sets);
        if (dump->parsed()) {
            std::cout << dump_config(resolve_config(dump_opts));
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NumericAbort& e) {
        std::cerr << "numeric abort: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitConfig;
}
