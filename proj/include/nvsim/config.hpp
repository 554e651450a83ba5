#pragma once

// JSON run configuration. Keys carry their unit as a suffix (field_gauss,
// d_ghz, rate_per_us, ...). Unknown keys are rejected; every value that was
// filled from a default is recorded so it can be echoed into run metadata.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>
#include "nvsim/analysis.hpp"
#include "nvsim/dynamics.hpp"
#include "nvsim/fitting.hpp"
#include "nvsim/hamiltonian.hpp"
#include "nvsim/spectra.hpp"

namespace nvsim {

using json = nlohmann::ordered_json;

enum class Command { levels, spectrum, fid, echo, nuclear_echo, fft, fit };

Command parse_command(const std::string &name);
std::string command_name(Command c);

struct SpectrumSettings {
    DriveChannel drive = DriveChannel::mw;
    std::size_t rf_nucleus = 0;
    /// "ms0": m_s = 0 populations; "equal": every pair weighted by matrix element only.
    bool ms0_populations = true;
    SpectrumOptions lines;
    Lineshape shape = Lineshape::lorentzian;
    double width_mhz = 1.0;
    double step_mhz = 0.05;
};

struct TraceSettings {
    Sequence sequence;
    SweepSpec sweep;
    PolarizationSpec polarization;
    DetuningDistribution ensemble;
    int ensemble_samples = 0; ///< 0 runs the nominal system only
    LabFrameOptions lab;
};

struct FftSettings {
    FftOptions options;
    double min_prominence_rel = 0.01; ///< relative to the largest bin
};

struct RunConfig {
    std::uint64_t seed = 1;
    SpinSystem system;
    std::optional<SpectrumSettings> spectrum;
    std::optional<TraceSettings> trace; ///< for fid / echo / nuclear-echo
    std::optional<FftSettings> fft;
    std::optional<FitProblem> fit;

    json resolved;                      ///< input with defaults filled in
    std::vector<std::string> defaulted; ///< JSON pointers of defaulted values
};

/// Parses `doc` for `command`. Sections not needed by the command are still
/// checked for unknown keys when present. Throws ConfigError naming the path.
RunConfig load_config(const json &doc, Command command);
RunConfig load_config_file(const std::string &path, Command command);

/// Built-in sequences used when the config gives none.
Sequence default_fid_sequence(const EigenSystem &es);
Sequence default_echo_sequence(const EigenSystem &es);
Sequence default_nuclear_echo_sequence(const EigenSystem &es, std::size_t nucleus);

/// Metadata written next to every output.
json run_metadata(const RunConfig &cfg, Command command);

} // namespace nvsim
