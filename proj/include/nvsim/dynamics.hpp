#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nvsim/hamiltonian.hpp"
#include "nvsim/spectra.hpp"
#include "nvsim/trace.hpp"
#include "nvsim/types.hpp"

namespace nvsim {

/// Density matrix in the product basis.
struct DensityMatrix {
    CMatrix rho;

    double trace() const { return rho.trace().real(); }
    double purity() const { return (rho * rho).trace().real(); }
    double min_eigenvalue() const;
    /// Throws NumericalError if trace, Hermiticity or positivity is off by more than tol.
    void check(double tol = 1e-9) const;
};

enum class DriveChannel { mw, rf };

/// A rectangular pulse. Either `transition` (level labels, lower first) or
/// `carrier_mhz` must be given. With a transition, the amplitude is scaled so
/// that transition nutates at `rabi_mhz`; without one, the drive operator is
/// used as-is (a spin-1/2 then nutates at `rabi_mhz`).
struct Pulse {
    DriveChannel channel = DriveChannel::mw;
    std::optional<std::pair<int, int>> transition;
    std::optional<double> carrier_mhz;
    double rabi_mhz = 31.25;
    double phase_rad = 0.0;
    std::optional<double> duration_us;
    std::optional<double> angle_rad; ///< used when duration_us is absent
    /// Instantaneous rotation. Only transitions within +-rabi_mhz of the carrier
    /// are rotated; the rest of the system is untouched.
    bool ideal = false;
    std::size_t nucleus = 0;         ///< rf target (index into SpinSystem::nuclei)
};

struct Delay {
    std::string name;
    double duration_us = 0.0;
};

using SequenceElement = std::variant<Pulse, Delay>;

enum class DecoherenceKind { dephasing, depolarizing };

/// Phenomenological channel. target_slot 0 is the electron, k+1 is nucleus k.
struct DecoherenceChannel {
    DecoherenceKind kind = DecoherenceKind::dephasing;
    std::size_t target_slot = 0;
    double rate_per_us = 0.0;
};

struct ReadoutModel {
    /// Bright levels by label; empty means the electron m_s = 0 manifold.
    std::vector<int> bright_levels;
    double contrast = 1.0;
    /// Report S(phase) - S(phase + pi) of the last pulse.
    bool phase_cycle = false;
    /// Poisson shot noise with this many counts per point; 0 disables.
    int photon_counts = 0;
};

enum class Propagation { rwa, lab_frame };

struct Sequence {
    std::vector<SequenceElement> elements;
    ReadoutModel readout;
    std::vector<DecoherenceChannel> channels;
    Propagation mode = Propagation::rwa;
};

/// Weight `level1_weight` on level 1, the rest spread evenly over
/// `remainder_levels` (all other levels when empty). With `ms0_manifold`
/// the state is the normalized electron m_s = 0 projector instead.
struct PolarizationSpec {
    double level1_weight = 1.0;
    std::vector<int> remainder_levels;
    bool ms0_manifold = false;
};

struct LabFrameOptions {
    /// Steps per period of the fastest frequency in the problem.
    double steps_per_period = 50.0;
    double tolerance = 1e-6;
    int max_refinements = 6;
};

struct SweepSpec {
    std::string name;
    std::vector<double> values;
};

struct RunOptions {
    std::uint64_t seed = 1;
    LabFrameOptions lab;
};

/// Pulse with carrier, amplitude and duration fixed against a reference system.
struct ResolvedPulse {
    CMatrix drive; ///< product basis
    double carrier_mhz = 0.0;
    double amplitude_mhz = 0.0; ///< H_drive(t) = 2 a cos(2 pi f t + phase) D
    double phase_rad = 0.0;
    double duration_us = 0.0;
    int reference_level = 1;
    bool ideal = false;
    double bandwidth_mhz = 0.0; ///< selectivity of an ideal pulse
};

ResolvedPulse resolve_pulse(const Pulse &pulse, const SpinSystem &sys, const EigenSystem &es);

DensityMatrix polarize(const EigenSystem &es, const SpinSystem &sys, const PolarizationSpec &spec = {});

/// Applies a pulse starting at absolute time t0_us (the carrier phase is
/// referenced to t = 0).
DensityMatrix apply_pulse(const DensityMatrix &rho, const ResolvedPulse &pulse, const EigenSystem &es,
                          double t0_us, Propagation mode = Propagation::rwa, const LabFrameOptions &lab = {});

/// Free evolution under the Hamiltonian of `es` plus decoherence channels.
DensityMatrix evolve(const DensityMatrix &rho, double duration_us, const EigenSystem &es,
                     std::span<const DecoherenceChannel> channels = {});

/// Sweep of one named delay (every delay with that name takes the value).
/// Sweep points run in parallel; output order follows `sweep.values`.
TimeTrace run_sequence(const SpinSystem &sys, const Sequence &seq, const SweepSpec &sweep,
                       const PolarizationSpec &pol = {}, const RunOptions &opt = {});

/// Single-threaded reference for run_sequence.
TimeTrace run_sequence_serial(const SpinSystem &sys, const Sequence &seq, const SweepSpec &sweep,
                              const PolarizationSpec &pol = {}, const RunOptions &opt = {});

/// Static electron detuning distribution: Gaussian(sigma) when `values` is
/// empty, otherwise the listed detunings with equal weight.
struct DetuningDistribution {
    double sigma_mhz = 0.0;
    std::vector<double> values;
};

/// Mean of run_sequence over Hamiltonians H + delta * S_z. Pulses keep the
/// carriers and amplitudes of the unshifted system.
TimeTrace ensemble_average(const SpinSystem &sys, const Sequence &seq, const SweepSpec &sweep,
                           const DetuningDistribution &dist, int n_samples, const PolarizationSpec &pol = {},
                           const RunOptions &opt = {});

TimeTrace ensemble_average_serial(const SpinSystem &sys, const Sequence &seq, const SweepSpec &sweep,
                                  const DetuningDistribution &dist, int n_samples,
                                  const PolarizationSpec &pol = {}, const RunOptions &opt = {});

/// Detunings drawn by ensemble_average for the given seed.
std::vector<double> sample_detunings(const DetuningDistribution &dist, int n_samples, std::uint64_t seed);

/// Pulse duration implied by angle and Rabi frequency: angle / (2 pi rabi).
double pulse_duration_us(const Pulse &pulse);

/// First level above level 1 whose dominant electron projection differs from level 1's.
int first_excited_electron_level(const EigenSystem &es);

} // namespace nvsim
