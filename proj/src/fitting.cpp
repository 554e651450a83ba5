#include "nvsim/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace nvsim {

namespace {

constexpr double kUnmatchedPenalty = 1e6;

struct Matched {
    double rms = 0.0;
    std::vector<LineAssignment> table;
};

Matched match_lines(std::span<const double> observed, const std::vector<SpectrumLine> &predicted) {
    Matched m;
    if (predicted.size() < observed.size()) {
        m.rms = kUnmatchedPenalty;
        return m;
    }
    Eigen::MatrixXd cost(static_cast<Eigen::Index>(observed.size()), static_cast<Eigen::Index>(predicted.size()));
    for (std::size_t i = 0; i < observed.size(); ++i)
        for (std::size_t j = 0; j < predicted.size(); ++j) {
            const double d = observed[i] - predicted[j].freq_mhz;
            cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d * d;
        }
    const auto cols = optimal_assignment(cost);
    double sum = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const auto &line = predicted[static_cast<std::size_t>(cols[i])];
        sum += cost(static_cast<Eigen::Index>(i), cols[i]);
        m.table.push_back({observed[i], line.freq_mhz, line.from_level, line.to_level});
    }
    m.rms = std::sqrt(sum / static_cast<double>(observed.size()));
    return m;
}

struct SearchSpace {
    std::vector<std::size_t> active; // indices into problem.free that are searched
    std::vector<double> fixed;       // values for inactive parameters
};

double normalized_distance(const FitProblem &p, std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double range = std::max(p.free[k].upper - p.free[k].lower, 1e-12);
        d = std::max(d, std::abs(a[k] - b[k]) / range);
    }
    return d;
}

} // namespace

std::string parameter_name(const FreeParameter &p) {
    switch (p.kind) {
    case FitParam::b_magnitude: return "field_gauss";
    case FitParam::theta: return "theta_deg";
    case FitParam::phi: return "phi_deg";
    case FitParam::a_parallel: return "nucleus" + std::to_string(p.nucleus) + "_a_parallel_mhz";
    case FitParam::a_perpendicular: return "nucleus" + std::to_string(p.nucleus) + "_a_perpendicular_mhz";
    }
    return "?";
}

std::string parameter_unit(const FreeParameter &p) {
    switch (p.kind) {
    case FitParam::b_magnitude: return "G";
    case FitParam::theta:
    case FitParam::phi: return "deg";
    default: return "MHz";
    }
}

void FitProblem::validate() const {
    base.validate();
    if (observed_mhz.empty()) throw ConfigError("fit: no observed lines");
    if (observed_mhz.size() < free.size()) throw ConfigError("fit: fewer observed lines than free parameters");
    for (const auto &p : free) {
        if (!std::isfinite(p.lower) || !std::isfinite(p.upper) || p.upper < p.lower)
            throw ConfigError("fit: bounds of " + parameter_name(p) + " must be finite with lower <= upper");
        if (!(p.grid_step > 0.0)) throw ConfigError("fit: grid step of " + parameter_name(p) + " must be > 0");
        if ((p.kind == FitParam::a_parallel || p.kind == FitParam::a_perpendicular) && p.nucleus >= base.nuclei.size())
            throw ConfigError("fit: " + parameter_name(p) + " refers to a missing nucleus");
        if (p.kind == FitParam::b_magnitude && p.lower < 0.0) throw ConfigError("fit: field bound must be >= 0");
    }
    if (drive == DriveChannel::rf && rf_nucleus >= base.nuclei.size()) throw ConfigError("fit: rf drive needs a nucleus");
    if (n_starts < 1) throw ConfigError("fit: need at least one start");
}

bool is_axial(const SpinSystem &sys, double tol) {
    auto axial = [tol](const RMatrix3 &m) {
        return std::abs(m(0, 0) - m(1, 1)) < tol && std::abs(m(0, 1)) < tol && std::abs(m(1, 0)) < tol &&
               std::abs(m(0, 2)) < tol && std::abs(m(2, 0)) < tol && std::abs(m(1, 2)) < tol && std::abs(m(2, 1)) < tol;
    };
    if (!axial(sys.g_tensor)) return false;
    for (const auto &n : sys.nuclei) {
        if (!axial(n.hyperfine_mhz)) return false;
        if (n.quadrupole_mhz != 0.0) {
            const RVector3 u = n.quadrupole_axis.normalized();
            if (std::abs(u[0]) > tol || std::abs(u[1]) > tol) return false;
        }
    }
    return true;
}

SpinSystem apply_parameters(const FitProblem &problem, std::span<const double> params) {
    if (params.size() != problem.free.size()) throw ConfigError("fit: parameter count mismatch");
    SpinSystem sys = problem.base;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const auto &p = problem.free[k];
        const double v = params[k];
        if (v < p.lower - 1e-9 || v > p.upper + 1e-9)
            throw ConfigError("fit: " + parameter_name(p) + " outside its bounds");
        switch (p.kind) {
        case FitParam::b_magnitude: sys.field.magnitude_gauss = v; break;
        case FitParam::theta: sys.field.theta_deg = v; break;
        case FitParam::phi: sys.field.phi_deg = v; break;
        case FitParam::a_parallel:
        case FitParam::a_perpendicular: {
            auto &tensor = sys.nuclei[p.nucleus].hyperfine_mhz;
            const double par = p.kind == FitParam::a_parallel ? v : tensor(2, 2);
            const double perp = p.kind == FitParam::a_perpendicular ? v : tensor(0, 0);
            tensor = axial_tensor(par, perp);
            break;
        }
        }
    }
    return sys;
}

std::vector<SpectrumLine> predicted_lines(const FitProblem &problem, const SpinSystem &sys) {
    const auto es = eigensolve(build_hamiltonian(sys));
    const CMatrix drive = problem.drive == DriveChannel::mw ? spin_component(sys, 0, 0)
                                                            : spin_component(sys, problem.rf_nucleus + 1, 0);
    if (problem.weight_by_population)
        return transition_spectrum(es, drive, manifold_populations(es, electron_projector(sys, 0.0)), problem.lines);
    return matrix_element_spectrum(es, drive, problem.lines);
}

double objective(std::span<const double> params, const FitProblem &problem) {
    const auto sys = apply_parameters(problem, params);
    return match_lines(problem.observed_mhz, predicted_lines(problem, sys)).rms;
}

std::vector<int> optimal_assignment(const Eigen::MatrixXd &cost) {
    // Hungarian method with potentials, rows <= cols.
    const int n = static_cast<int>(cost.rows());
    const int m = static_cast<int>(cost.cols());
    if (n > m) throw std::invalid_argument("optimal_assignment: more rows than columns");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= m; ++j)
        if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

FitResult fit_field(const FitProblem &problem) {
    problem.validate();
    FitResult result;
    result.free = problem.free;

    SearchSpace space;
    space.fixed.resize(problem.free.size());
    for (std::size_t k = 0; k < problem.free.size(); ++k) {
        const auto &p = problem.free[k];
        if (p.kind == FitParam::phi && is_axial(problem.base)) {
            result.phi_unconstrained = true;
            space.fixed[k] = std::clamp(problem.base.field.phi_deg, p.lower, p.upper);
            continue;
        }
        space.active.push_back(k);
        space.fixed[k] = p.lower;
    }

    auto full = [&](std::span<const double> active_values) {
        std::vector<double> x = space.fixed;
        for (std::size_t a = 0; a < space.active.size(); ++a) x[space.active[a]] = active_values[a];
        return x;
    };

    // coarse grid
    std::vector<std::vector<double>> axes;
    for (auto k : space.active) {
        const auto &p = problem.free[k];
        std::vector<double> axis;
        const auto n = static_cast<long>(std::floor((p.upper - p.lower) / p.grid_step + 1e-9));
        for (long i = 0; i <= n; ++i) axis.push_back(p.lower + p.grid_step * static_cast<double>(i));
        if (axis.back() < p.upper - 1e-9) axis.push_back(p.upper);
        axes.push_back(std::move(axis));
    }
    std::size_t n_grid = 1;
    for (const auto &a : axes) n_grid *= a.size();
    std::vector<std::vector<double>> grid(n_grid);
    for (std::size_t g = 0; g < n_grid; ++g) {
        std::size_t rest = g;
        std::vector<double> pt(axes.size());
        for (std::size_t a = axes.size(); a-- > 0;) {
            pt[a] = axes[a][rest % axes[a].size()];
            rest /= axes[a].size();
        }
        grid[g] = std::move(pt);
    }
    std::vector<double> grid_rms(n_grid);
    const auto n_grid_l = static_cast<long>(n_grid);
#pragma omp parallel for schedule(dynamic)
    for (long g = 0; g < n_grid_l; ++g)
        grid_rms[static_cast<std::size_t>(g)] = objective(full(grid[static_cast<std::size_t>(g)]), problem);
    result.evaluations += n_grid_l;

    std::vector<std::size_t> order(n_grid);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return grid_rms[a] < grid_rms[b]; });
    const std::size_t n_starts = std::min<std::size_t>(static_cast<std::size_t>(problem.n_starts), n_grid);

    // compass search from each start
    std::vector<FitCandidate> local(n_starts);
    std::vector<long> evals(n_starts, 0);
    const auto n_starts_l = static_cast<long>(n_starts);
#pragma omp parallel for schedule(dynamic)
    for (long s = 0; s < n_starts_l; ++s) {
        std::vector<double> x = grid[order[static_cast<std::size_t>(s)]];
        double fx = grid_rms[order[static_cast<std::size_t>(s)]];
        std::vector<double> step(space.active.size()), floor_step(space.active.size());
        for (std::size_t a = 0; a < space.active.size(); ++a) {
            const auto &p = problem.free[space.active[a]];
            step[a] = 0.5 * p.grid_step;
            floor_step[a] = 1e-9 * std::max(p.upper - p.lower, 1.0);
        }
        long count = 0;
        while (count < 20000) {
            bool improved = false;
            for (std::size_t a = 0; a < x.size() && !improved; ++a) {
                const auto &p = problem.free[space.active[a]];
                for (double dir : {+1.0, -1.0}) {
                    std::vector<double> trial = x;
                    trial[a] = std::clamp(x[a] + dir * step[a], p.lower, p.upper);
                    if (trial[a] == x[a]) continue;
                    const double ft = objective(full(trial), problem);
                    ++count;
                    if (ft < fx) {
                        x = std::move(trial);
                        fx = ft;
                        improved = true;
                        break;
                    }
                }
            }
            if (improved) continue;
            bool any = false;
            for (std::size_t a = 0; a < step.size(); ++a)
                if (step[a] > floor_step[a]) {
                    step[a] *= 0.5;
                    any = true;
                }
            if (!any) break;
        }
        local[static_cast<std::size_t>(s)] = {full(x), fx};
        evals[static_cast<std::size_t>(s)] = count;
    }
    for (long e : evals) result.evaluations += e;

    std::stable_sort(local.begin(), local.end(), [](const auto &a, const auto &b) { return a.rms_mhz < b.rms_mhz; });
    const FitCandidate &best = local.front();
    result.params = best.params;
    result.rms_mhz = best.rms_mhz;
    std::vector<FitCandidate> distinct{best};
    for (std::size_t k = 1; k < local.size(); ++k) {
        if (local[k].rms_mhz - best.rms_mhz >= problem.degeneracy_tol_mhz) continue;
        const bool seen = std::any_of(distinct.begin(), distinct.end(), [&](const FitCandidate &c) {
            return normalized_distance(problem, c.params, local[k].params) < 1e-3;
        });
        if (!seen) {
            distinct.push_back(local[k]);
            result.alternatives.push_back(local[k]);
        }
    }
    const auto sys = apply_parameters(problem, result.params);
    result.assignment = match_lines(problem.observed_mhz, predicted_lines(problem, sys)).table;
    result.success = result.rms_mhz <= problem.max_rms_mhz;
    return result;
}

} // namespace nvsim
