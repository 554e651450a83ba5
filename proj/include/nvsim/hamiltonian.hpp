#pragma once

#include <string>
#include <vector>

#include "nvsim/spinops.hpp"
#include "nvsim/types.hpp"

namespace nvsim {

/// Bohr magneton over Planck's constant, MHz per Gauss.
inline constexpr double kBohrMhzPerGauss = 1.39962449361;
inline constexpr double kDefaultGe = 2.0028;
inline constexpr double kGammaC13MhzPerGauss = 1.0705e-3;
inline constexpr double kGammaN14MhzPerGauss = 3.077e-4;
inline constexpr double kZeroFieldSplittingMhz = 2880.0;

/// Field magnitude in Gauss with polar angle measured from the N-V (z) axis.
struct FieldSpec {
    double magnitude_gauss = 0.0;
    double theta_deg = 0.0;
    double phi_deg = 0.0;
};

RVector3 field_vector(double magnitude_gauss, double theta_deg, double phi_deg);
inline RVector3 field_vector(const FieldSpec &f) {
    return field_vector(f.magnitude_gauss, f.theta_deg, f.phi_deg);
}

/// Unit vector from polar/azimuth angles in degrees.
RVector3 unit_vector(double theta_deg, double phi_deg);

/// Tensor with eigenvalue `parallel` along `axis` and `perpendicular` across it.
RMatrix3 axial_tensor(double parallel, double perpendicular, const RVector3 &axis = RVector3::UnitZ());

struct Nucleus {
    std::string label;
    SpinQuantum spin{1};
    RMatrix3 hyperfine_mhz = RMatrix3::Zero();
    double quadrupole_mhz = 0.0;
    RVector3 quadrupole_axis = RVector3::UnitZ();
    double gyromagnetic_mhz_per_gauss = 0.0;
    bool nuclear_zeeman = true;
};

/// First-shell 13C with an axial tensor along the N-V axis. The perpendicular
/// component is set so the m_s = 0 doublet splits by 28 MHz at 140 G / 26 deg.
inline constexpr double kC13ParallelMhz = 130.0;
inline constexpr double kC13PerpendicularMhz = 228.0;
Nucleus carbon13_first_shell();

inline constexpr double kN14HyperfineMhz = 2.0;
inline constexpr double kN14QuadrupoleMhz = 5.0;
Nucleus nitrogen14();

struct SpinSystem {
    SpinQuantum electron{2};
    double d_mhz = kZeroFieldSplittingMhz;
    RMatrix3 g_tensor = RMatrix3::Identity() * kDefaultGe;
    FieldSpec field;
    std::vector<Nucleus> nuclei;

    /// Slot dimensions, electron first, nuclei in list order.
    std::vector<int> dims() const;
    std::size_t dim() const;
    /// Throws ConfigError if an invariant is broken.
    void validate() const;
};

struct HamiltonianMatrix {
    CMatrix mhz;
    std::vector<int> dims;

    std::size_t dim() const { return static_cast<std::size_t>(mhz.rows()); }
};

/// Zero-field splitting, electron Zeeman, hyperfine, quadrupole and nuclear Zeeman
/// terms, all in MHz on the product basis |m_s, m_I1, m_I2, ...>.
HamiltonianMatrix build_hamiltonian(const SpinSystem &sys);

/// Electron S_z on the full space of `sys`.
CMatrix electron_sz(const SpinSystem &sys);

/// Component `axis` (0=x,1=y,2=z) of the spin in `slot` (0 = electron).
CMatrix spin_component(const SpinSystem &sys, std::size_t slot, int axis);

/// Copy of `sys` with every hyperfine tensor zeroed.
SpinSystem without_hyperfine(SpinSystem sys);

} // namespace nvsim
