#pragma once

#include <span>
#include <utility>
#include <vector>

#include "nvsim/hamiltonian.hpp"
#include "nvsim/types.hpp"

namespace nvsim {

/// Eigen-decomposition with levels labelled 1..N in ascending energy.
struct EigenSystem {
    std::vector<double> energies; ///< MHz, ascending
    CMatrix states;               ///< column k is level k+1
    std::vector<int> labels;
    std::vector<int> dims;

    std::size_t size() const { return energies.size(); }
    double energy(int label) const { return energies.at(static_cast<std::size_t>(label - 1)); }
    /// Operator in the product basis expressed in this eigenbasis.
    CMatrix to_eigenbasis(const CMatrix &op) const { return states.adjoint() * op * states; }
    CMatrix to_product_basis(const CMatrix &op) const { return states * op * states.adjoint(); }
};

/// Rejects input whose Hermiticity defect exceeds `hermitian_tol` (MHz).
/// Degenerate subspaces are rotated onto the product basis (lowest index first)
/// and each vector's largest component made real-positive, so output is
/// deterministic for identical input.
EigenSystem eigensolve(const HamiltonianMatrix &h, double hermitian_tol = 1e-9);

/// Probability of every product-basis state in level `label`.
std::vector<double> level_composition(const EigenSystem &es, int label);

/// Most probable basis index of spin `slot` for each level (marginal argmax).
std::vector<int> dominant_slot_index(const EigenSystem &es, std::size_t slot);

struct SpectrumLine {
    double freq_mhz = 0.0;
    double strength = 0.0;
    int from_level = 0;
    int to_level = 0;
};

struct SpectrumOptions {
    double freq_min_mhz = 0.0;
    double freq_max_mhz = 1e9;
    /// Lines below this fraction of the strongest line are dropped.
    double threshold_rel = 1e-6;
    /// Lines closer than this are merged into one (strengths summed).
    double merge_tol_mhz = 1e-6;
};

/// Stick spectrum: strength = |<i|drive|j>|^2 |p_i - p_j| per level pair,
/// sorted by frequency. `drive` is in the product basis.
std::vector<SpectrumLine> transition_spectrum(const EigenSystem &es, const CMatrix &drive,
                                              std::span<const double> populations,
                                              const SpectrumOptions &opt = {});

/// Same, weighted by |<i|drive|j>|^2 alone (every level pair counts once).
std::vector<SpectrumLine> matrix_element_spectrum(const EigenSystem &es, const CMatrix &drive,
                                                  const SpectrumOptions &opt = {});

/// Level populations of the normalized state projector/trace(projector).
std::vector<double> manifold_populations(const EigenSystem &es, const CMatrix &projector);

/// Projector onto electron m_s = `m` (times identity on the nuclei).
CMatrix electron_projector(const SpinSystem &sys, double m);

enum class Lineshape { gaussian, lorentzian };

struct SampledSpectrum {
    std::vector<double> freq_mhz;
    std::vector<double> amplitude;
};

/// Sum of unit-area kernels (FWHM = width) scaled by line strengths.
SampledSpectrum broaden(std::span<const SpectrumLine> lines, Lineshape shape, double width_mhz,
                        std::span<const double> grid_mhz);

std::vector<double> uniform_grid(double lo, double hi, double step);

} // namespace nvsim
