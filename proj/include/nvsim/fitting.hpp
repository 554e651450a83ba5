#pragma once

#include <span>
#include <string>
#include <vector>

#include "nvsim/dynamics.hpp"
#include "nvsim/hamiltonian.hpp"
#include "nvsim/spectra.hpp"

namespace nvsim {

enum class FitParam { b_magnitude, theta, phi, a_parallel, a_perpendicular };

struct FreeParameter {
    FitParam kind = FitParam::b_magnitude;
    std::size_t nucleus = 0; ///< for hyperfine scalars
    double lower = 0.0;
    double upper = 0.0;
    double grid_step = 5.0; ///< coarse-grid spacing in the parameter's own unit
};

std::string parameter_name(const FreeParameter &p);
std::string parameter_unit(const FreeParameter &p);

struct FitProblem {
    SpinSystem base;
    std::vector<double> observed_mhz;
    std::vector<FreeParameter> free;
    DriveChannel drive = DriveChannel::mw;
    std::size_t rf_nucleus = 0;
    /// Predicted lines are weighted by m_s = 0 populations when true, by
    /// matrix element alone otherwise.
    bool weight_by_population = true;
    SpectrumOptions lines{0.0, 1e9, 1e-3, 1e-6};
    double max_rms_mhz = 1.0;
    double degeneracy_tol_mhz = 1e-3;
    int n_starts = 8;

    void validate() const;
};

struct LineAssignment {
    double observed_mhz = 0.0;
    double predicted_mhz = 0.0;
    int from_level = 0;
    int to_level = 0;
};

struct FitCandidate {
    std::vector<double> params;
    double rms_mhz = 0.0;
};

struct FitResult {
    std::vector<FreeParameter> free;
    std::vector<double> params;
    double rms_mhz = 0.0;
    std::vector<LineAssignment> assignment;
    bool success = false;
    /// Azimuth was free but every tensor is axial about z, so it was not fitted.
    bool phi_unconstrained = false;
    /// Other minima whose rms is within degeneracy_tol_mhz of the best one.
    std::vector<FitCandidate> alternatives;
    long evaluations = 0;
};

/// The system described by `params` (same order as problem.free).
SpinSystem apply_parameters(const FitProblem &problem, std::span<const double> params);

/// Predicted lines that the fit matches against.
std::vector<SpectrumLine> predicted_lines(const FitProblem &problem, const SpinSystem &sys);

/// Matched RMS (MHz) between observed and predicted lines.
double objective(std::span<const double> params, const FitProblem &problem);

/// Coarse grid over the bounds, then compass search from the best grid points.
FitResult fit_field(const FitProblem &problem);

/// Minimum-cost assignment of each row to a distinct column (rows <= cols).
/// Returns the column chosen for each row.
std::vector<int> optimal_assignment(const Eigen::MatrixXd &cost);

/// True when g, every hyperfine tensor and every quadrupole axis are symmetric about z.
bool is_axial(const SpinSystem &sys, double tol = 1e-12);

} // namespace nvsim
