// nvsim: command-line front end.
//
//   nvsim <levels|spectrum|fid|echo|nuclear-echo|fft|fit> --config cfg.json --out DIR
//
// Exit codes: 0 ok, 2 configuration error, 3 numerical failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <omp.h>

#include "nvsim/analysis.hpp"
#include "nvsim/config.hpp"
#include "nvsim/dynamics.hpp"
#include "nvsim/fitting.hpp"
#include "nvsim/spectra.hpp"

namespace fs = std::filesystem;
using namespace nvsim;

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string spin_projection(int two_s, int k) {
    const int two_m = two_s - 2 * k;
    if (two_m == 0) return "0";
    std::string sign = two_m > 0 ? "+" : "-";
    const int a = std::abs(two_m);
    return a % 2 == 0 ? sign + std::to_string(a / 2) : sign + std::to_string(a) + "/2";
}

std::string basis_ket(const SpinSystem &sys, std::size_t index) {
    const auto dims = sys.dims();
    const auto digits = basis_digits(index, dims);
    std::string s = "|" + spin_projection(sys.electron.two_s, digits[0]);
    for (std::size_t k = 0; k < sys.nuclei.size(); ++k) s += "," + spin_projection(sys.nuclei[k].spin.two_s, digits[k + 1]);
    return s + ">";
}

void write_file(const fs::path &p, const std::string &text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << text;
}

void write_meta(const fs::path &out, const RunConfig &cfg, Command c) {
    write_file(out / "run_meta.json", run_metadata(cfg, c).dump(2) + "\n");
}

EigenSystem solve(const SpinSystem &sys) { return eigensolve(build_hamiltonian(sys)); }

void cmd_levels(const RunConfig &cfg, const fs::path &out) {
    const auto es = solve(cfg.system);
    std::ostringstream csv;
    csv << "label,energy_mhz,composition\n";
    for (std::size_t k = 0; k < es.size(); ++k) {
        const auto w = level_composition(es, es.labels[k]);
        std::vector<std::size_t> idx(w.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return w[a] > w[b]; });
        std::string comp;
        for (auto i : idx) {
            if (w[i] < 0.01) break;
            if (!comp.empty()) comp += " ";
            comp += basis_ket(cfg.system, i) + ":" + num(w[i]);
        }
        csv << es.labels[k] << "," << num(es.energies[k]) << "," << comp << "\n";
    }
    write_file(out / "levels.csv", csv.str());
}

void cmd_spectrum(const RunConfig &cfg, const fs::path &out) {
    const auto &s = *cfg.spectrum;
    const auto es = solve(cfg.system);
    const CMatrix drive = s.drive == DriveChannel::mw ? spin_component(cfg.system, 0, 0)
                                                      : spin_component(cfg.system, s.rf_nucleus + 1, 0);
    const auto lines = s.ms0_populations
                           ? transition_spectrum(es, drive, manifold_populations(es, electron_projector(cfg.system, 0.0)), s.lines)
                           : matrix_element_spectrum(es, drive, s.lines);
    std::ostringstream sticks;
    sticks << "freq_mhz,strength,from,to\n";
    for (const auto &l : lines) sticks << num(l.freq_mhz) << "," << num(l.strength) << "," << l.from_level << "," << l.to_level << "\n";
    write_file(out / "sticks.csv", sticks.str());

    std::ostringstream broad;
    broad << "freq_mhz,amplitude\n";
    if (!lines.empty()) {
        const double lo = lines.front().freq_mhz - 5.0 * s.width_mhz;
        const double hi = lines.back().freq_mhz + 5.0 * s.width_mhz;
        const auto grid = uniform_grid(lo, hi, s.step_mhz);
        const auto b = broaden(lines, s.shape, s.width_mhz, grid);
        for (std::size_t k = 0; k < grid.size(); ++k) broad << num(b.freq_mhz[k]) << "," << num(b.amplitude[k]) << "\n";
    }
    write_file(out / "spectrum.csv", broad.str());
}

void cmd_trace(const RunConfig &cfg, const fs::path &out, const std::string &file) {
    const auto &t = *cfg.trace;
    RunOptions opt;
    opt.seed = cfg.seed;
    opt.lab = t.lab;
    const TimeTrace trace = t.ensemble_samples > 0
                                ? ensemble_average(cfg.system, t.sequence, t.sweep, t.ensemble, t.ensemble_samples,
                                                   t.polarization, opt)
                                : run_sequence(cfg.system, t.sequence, t.sweep, t.polarization, opt);
    std::ostringstream csv;
    csv << "tau_us,signal\n";
    for (std::size_t k = 0; k < trace.size(); ++k) csv << num(trace.t[k]) << "," << num(trace.signal[k]) << "\n";
    write_file(out / file, csv.str());
}

TimeTrace read_trace_csv(const fs::path &p) {
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot open trace: " + p.string());
    TimeTrace tr;
    std::string line;
    std::getline(in, line);
    if (line.rfind("tau_us,signal", 0) != 0) throw ConfigError(p.string() + ": expected header tau_us,signal");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ConfigError(p.string() + ": malformed row '" + line + "'");
        try {
            tr.t.push_back(std::stod(line.substr(0, comma)));
            tr.signal.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception &) {
            throw ConfigError(p.string() + ": malformed row '" + line + "'");
        }
    }
    return tr;
}

void cmd_fft(const RunConfig &cfg, const fs::path &out, const fs::path &input) {
    const auto &s = *cfg.fft;
    const auto ps = fft_spectrum(read_trace_csv(input), s.options);
    std::ostringstream csv;
    csv << "freq_mhz,power\n";
    for (std::size_t k = 0; k < ps.freq_mhz.size(); ++k) csv << num(ps.freq_mhz[k]) << "," << num(ps.power[k]) << "\n";
    write_file(out / "power.csv", csv.str());
    const double top = ps.power.empty() ? 0.0 : *std::max_element(ps.power.begin(), ps.power.end());
    json peaks = json::array();
    for (const auto &p : find_peaks(ps, s.min_prominence_rel * top))
        peaks.push_back({{"freq_mhz", p.freq_mhz}, {"power", p.power}, {"prominence", p.prominence}});
    json doc;
    doc["resolution_mhz"] = ps.resolution_mhz;
    doc["peaks"] = peaks;
    write_file(out / "peaks.json", doc.dump(2) + "\n");
}

void cmd_fit(const RunConfig &cfg, const fs::path &out) {
    const auto r = fit_field(*cfg.fit);
    json doc;
    doc["success"] = r.success;
    json params = json::array();
    for (std::size_t k = 0; k < r.free.size(); ++k)
        params.push_back({{"name", parameter_name(r.free[k])}, {"value", r.params[k]}, {"unit", parameter_unit(r.free[k])}});
    doc["params"] = params;
    doc["rms_mhz"] = r.rms_mhz;
    doc["phi_unconstrained"] = r.phi_unconstrained;
    json table = json::array();
    for (const auto &a : r.assignment)
        table.push_back({{"observed_mhz", a.observed_mhz},
                         {"predicted_mhz", a.predicted_mhz},
                         {"residual_mhz", a.observed_mhz - a.predicted_mhz},
                         {"from", a.from_level},
                         {"to", a.to_level}});
    doc["assignment"] = table;
    json alts = json::array();
    for (const auto &c : r.alternatives) alts.push_back({{"params", c.params}, {"rms_mhz", c.rms_mhz}});
    doc["alternatives"] = alts;
    doc["evaluations"] = r.evaluations;
    write_file(out / "fit.json", doc.dump(2) + "\n");
    if (!r.success) std::cerr << "nvsim fit: no assignment within max_rms_mhz (best rms " << num(r.rms_mhz) << " MHz)\n";
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"N-V centre spin simulator"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::int64_t> seed;
    int threads = 0;
    app.add_option("--config", config_path, "JSON configuration")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "random seed (overrides config)");
    app.add_option("--threads", threads, "OpenMP threads (0 = runtime default)");

    double tau_max = -1.0, tau_step = -1.0;
    auto add_tau = [&](CLI::App *sub) {
        sub->add_option("--tau-max", tau_max, "largest delay, us");
        sub->add_option("--tau-step", tau_step, "delay increment, us");
    };
    std::map<std::string, CLI::App *> subs;
    for (const char *name : {"levels", "spectrum", "fid", "echo", "nuclear-echo", "fft", "fit"})
        subs[name] = app.add_subcommand(name);
    for (const char *name : {"fid", "echo", "nuclear-echo"}) add_tau(subs[name]);
    std::string range, input;
    subs["fft"]->add_option("--range", range, "time window a:b in us");
    subs["fft"]->add_option("--input", input, "trace CSV (default <out>/fid.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        const Command cmd = parse_command(name);
        if (threads > 0) omp_set_num_threads(threads);
        RunConfig cfg = load_config_file(config_path, cmd);
        if (seed) {
            if (*seed < 0) throw ConfigError("--seed must be >= 0");
            cfg.seed = static_cast<std::uint64_t>(*seed);
            cfg.resolved["seed"] = cfg.seed;
        }
        if (cfg.trace && (tau_max >= 0.0 || tau_step > 0.0)) {
            auto &v = cfg.trace->sweep.values;
            const double lo = v.empty() ? 0.0 : v.front();
            const double hi = tau_max >= 0.0 ? tau_max : (v.empty() ? 0.0 : v.back());
            const double step = tau_step > 0.0 ? tau_step : (v.size() > 1 ? v[1] - v[0] : 1.0);
            if (hi < lo) throw ConfigError("--tau-max below tau_min_us");
            v = uniform_grid(lo, hi, step);
            const std::string key = cmd == Command::nuclear_echo ? "nuclear_echo" : name;
            cfg.resolved[key]["tau_max_us"] = hi;
            cfg.resolved[key]["tau_step_us"] = step;
        }
        if (cmd == Command::fft && !range.empty()) {
            const auto colon = range.find(':');
            if (colon == std::string::npos) throw ConfigError("--range expects a:b");
            try {
                cfg.fft->options.t_min_us = std::stod(range.substr(0, colon));
                cfg.fft->options.t_max_us = std::stod(range.substr(colon + 1));
            } catch (const std::exception &) {
                throw ConfigError("--range expects a:b");
            }
            cfg.resolved["fft"]["t_min_us"] = cfg.fft->options.t_min_us;
            cfg.resolved["fft"]["t_max_us"] = cfg.fft->options.t_max_us;
        }

        const fs::path out(out_dir);
        fs::create_directories(out);
        switch (cmd) {
        case Command::levels: cmd_levels(cfg, out); break;
        case Command::spectrum: cmd_spectrum(cfg, out); break;
        case Command::fid: cmd_trace(cfg, out, "fid.csv"); break;
        case Command::echo: cmd_trace(cfg, out, "echo.csv"); break;
        case Command::nuclear_echo: cmd_trace(cfg, out, "nuclear_echo.csv"); break;
        case Command::fft: cmd_fft(cfg, out, input.empty() ? out / "fid.csv" : fs::path(input)); break;
        case Command::fit: cmd_fit(cfg, out); break;
        }
        write_meta(out, cfg, cmd);
        return 0;
    } catch (const ConfigError &e) {
        std::cerr << "nvsim " << name << ": " << e.what() << "\n";
        return 2;
    } catch (const NumericalError &e) {
        std::cerr << "nvsim " << name << ": numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument &e) {
        std::cerr << "nvsim " << name << ": " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error &e) {
        std::cerr << "nvsim " << name << ": " << e.what() << "\n";
        return 2;
    }
}
