#include "nvsim/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace nvsim {

namespace {

void canonicalize_block(CMatrix &states, Eigen::Index first, Eigen::Index count) {
    const Eigen::Index n = states.rows();
    const CMatrix q = states.middleCols(first, count);
    CMatrix chosen(n, count);
    Eigen::Index found = 0;
    for (Eigen::Index i = 0; i < n && found < count; ++i) {
        CVector v = q * q.row(i).adjoint(); // projection of |i> onto the subspace
        for (Eigen::Index k = 0; k < found; ++k) v -= chosen.col(k) * chosen.col(k).dot(v);
        const double norm = v.norm();
        if (norm > 1e-6) chosen.col(found++) = v / norm;
    }
    if (found == count) states.middleCols(first, count) = chosen;
}

void fix_phase(CVector &v) {
    Eigen::Index best = 0;
    double big = -1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double a = std::abs(v[i]);
        if (a > big * (1.0 + 1e-12) + 1e-14) {
            big = a;
            best = i;
        }
    }
    if (big > 0.0) v *= std::conj(v[best]) / std::abs(v[best]);
}

} // namespace

EigenSystem eigensolve(const HamiltonianMatrix &h, double hermitian_tol) {
    const double defect = hermiticity_defect(h.mhz);
    if (defect > hermitian_tol) {
        std::ostringstream msg;
        msg << "eigensolve: matrix is not Hermitian (max |H - H^dagger| = " << defect << " MHz)";
        throw NumericalError(msg.str());
    }
    const CMatrix sym = 0.5 * (h.mhz + h.mhz.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(sym);
    if (solver.info() != Eigen::Success) throw NumericalError("eigensolve: diagonalization failed");

    EigenSystem es;
    es.dims = h.dims;
    const auto n = static_cast<std::size_t>(sym.rows());
    es.energies.resize(n);
    for (std::size_t k = 0; k < n; ++k) es.energies[k] = solver.eigenvalues()[static_cast<Eigen::Index>(k)];
    es.states = solver.eigenvectors();

    double scale = 1.0;
    for (double e : es.energies) scale = std::max(scale, std::abs(e));
    const double degenerate_tol = 1e-9 * scale;
    for (std::size_t first = 0; first < n;) {
        std::size_t last = first + 1;
        while (last < n && es.energies[last] - es.energies[last - 1] < degenerate_tol) ++last;
        if (last - first > 1)
            canonicalize_block(es.states, static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(last - first));
        first = last;
    }
    for (Eigen::Index k = 0; k < es.states.cols(); ++k) {
        CVector v = es.states.col(k);
        fix_phase(v);
        es.states.col(k) = v;
    }
    es.labels.resize(n);
    for (std::size_t k = 0; k < n; ++k) es.labels[k] = static_cast<int>(k + 1);
    return es;
}

std::vector<double> level_composition(const EigenSystem &es, int label) {
    const auto col = es.states.col(label - 1);
    std::vector<double> w(static_cast<std::size_t>(col.size()));
    for (Eigen::Index i = 0; i < col.size(); ++i) w[static_cast<std::size_t>(i)] = std::norm(col[i]);
    return w;
}

std::vector<int> dominant_slot_index(const EigenSystem &es, std::size_t slot) {
    if (slot >= es.dims.size()) throw std::invalid_argument("dominant_slot_index: slot out of range");
    std::vector<int> out(es.size());
    const int d = es.dims[slot];
    for (std::size_t level = 0; level < es.size(); ++level) {
        std::vector<double> marginal(static_cast<std::size_t>(d), 0.0);
        for (Eigen::Index i = 0; i < es.states.rows(); ++i) {
            const auto digits = basis_digits(static_cast<std::size_t>(i), es.dims);
            marginal[static_cast<std::size_t>(digits[slot])] += std::norm(es.states(i, static_cast<Eigen::Index>(level)));
        }
        out[level] = static_cast<int>(std::max_element(marginal.begin(), marginal.end()) - marginal.begin());
    }
    return out;
}

namespace {

template <class Weight>
std::vector<SpectrumLine> collect_lines(const EigenSystem &es, const CMatrix &drive, const SpectrumOptions &opt,
                                        Weight weight) {
    const CMatrix d = es.to_eigenbasis(drive);
    std::vector<SpectrumLine> lines;
    for (std::size_t i = 0; i < es.size(); ++i) {
        for (std::size_t j = i + 1; j < es.size(); ++j) {
            const double f = es.energies[j] - es.energies[i];
            if (f < opt.freq_min_mhz || f > opt.freq_max_mhz) continue;
            const double s = std::norm(d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) * weight(i, j);
            lines.push_back({f, s, es.labels[i], es.labels[j]});
        }
    }
    std::stable_sort(lines.begin(), lines.end(),
                     [](const SpectrumLine &a, const SpectrumLine &b) { return a.freq_mhz < b.freq_mhz; });

    std::vector<SpectrumLine> merged;
    for (const auto &l : lines) {
        if (!merged.empty() && l.freq_mhz - merged.back().freq_mhz < opt.merge_tol_mhz)
            merged.back().strength += l.strength;
        else
            merged.push_back(l);
    }
    double strongest = 0.0;
    for (const auto &l : merged) strongest = std::max(strongest, l.strength);
    std::vector<SpectrumLine> out;
    for (const auto &l : merged)
        if (strongest > 0.0 && l.strength > opt.threshold_rel * strongest) out.push_back(l);
    return out;
}

} // namespace

std::vector<SpectrumLine> transition_spectrum(const EigenSystem &es, const CMatrix &drive,
                                              std::span<const double> populations,
                                              const SpectrumOptions &opt) {
    if (populations.size() != es.size())
        throw std::invalid_argument("transition_spectrum: population vector does not match level count");
    return collect_lines(es, drive, opt,
                         [&](std::size_t i, std::size_t j) { return std::abs(populations[i] - populations[j]); });
}

std::vector<SpectrumLine> matrix_element_spectrum(const EigenSystem &es, const CMatrix &drive,
                                                  const SpectrumOptions &opt) {
    return collect_lines(es, drive, opt, [](std::size_t, std::size_t) { return 1.0; });
}

std::vector<double> manifold_populations(const EigenSystem &es, const CMatrix &projector) {
    const CMatrix p = es.to_eigenbasis(projector);
    const double tr = projector.trace().real();
    if (tr <= 0.0) throw std::invalid_argument("manifold_populations: empty projector");
    std::vector<double> pop(es.size());
    for (std::size_t k = 0; k < es.size(); ++k) pop[k] = p(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)).real() / tr;
    return pop;
}

CMatrix electron_projector(const SpinSystem &sys, double m) {
    const int d = sys.electron.dim();
    CMatrix local = CMatrix::Zero(d, d);
    for (int k = 0; k < d; ++k)
        if (std::abs(sys.electron.m(k) - m) < 1e-9) local(k, k) = 1.0;
    const auto dims = sys.dims();
    return embed(local, 0, dims);
}

SampledSpectrum broaden(std::span<const SpectrumLine> lines, Lineshape shape, double width_mhz,
                        std::span<const double> grid_mhz) {
    if (!(width_mhz > 0.0)) throw std::invalid_argument("broaden: width must be > 0 MHz");
    SampledSpectrum out;
    out.freq_mhz.assign(grid_mhz.begin(), grid_mhz.end());
    out.amplitude.assign(grid_mhz.size(), 0.0);
    const double sigma = width_mhz / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
    const double gamma = 0.5 * width_mhz;
    for (std::size_t k = 0; k < grid_mhz.size(); ++k) {
        double acc = 0.0;
        for (const auto &l : lines) {
            const double x = grid_mhz[k] - l.freq_mhz;
            if (shape == Lineshape::gaussian)
                acc += l.strength * std::exp(-0.5 * x * x / (sigma * sigma)) / (sigma * std::sqrt(2.0 * std::numbers::pi));
            else
                acc += l.strength * gamma / (std::numbers::pi * (x * x + gamma * gamma));
        }
        out.amplitude[k] = acc;
    }
    return out;
}

std::vector<double> uniform_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || hi < lo) throw std::invalid_argument("uniform_grid: need step > 0 and hi >= lo");
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> g(n);
    for (std::size_t k = 0; k < n; ++k) g[k] = lo + step * static_cast<double>(k);
    return g;
}

} // namespace nvsim
