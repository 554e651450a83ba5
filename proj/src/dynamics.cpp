#include "nvsim/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

namespace nvsim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

using Index = Eigen::Index;

CMatrix hermitian_expm(const CMatrix &h, double scale) {
    // exp(-i * scale * h) for Hermitian h
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(0.5 * (h + h.adjoint()));
    if (solver.info() != Eigen::Success) throw NumericalError("propagator: eigen-decomposition failed");
    const auto &w = solver.eigenvalues();
    CVector phases(w.size());
    for (Index k = 0; k < w.size(); ++k) phases[k] = std::polar(1.0, -scale * w[k]);
    return solver.eigenvectors() * phases.asDiagonal() * solver.eigenvectors().adjoint();
}

CMatrix conjugate_by(const CMatrix &u, const CMatrix &rho) { return u * rho * u.adjoint(); }

std::size_t slot_stride(const std::vector<int> &dims, std::size_t slot) {
    std::size_t stride = 1;
    for (std::size_t k = slot + 1; k < dims.size(); ++k) stride *= static_cast<std::size_t>(dims[k]);
    return stride;
}

// Tr_slot(rho) (x) 1/d on the product basis.
CMatrix depolarize_slot(const CMatrix &rho, const std::vector<int> &dims, std::size_t slot) {
    const auto n = static_cast<std::size_t>(rho.rows());
    const std::size_t stride = slot_stride(dims, slot);
    const int d = dims[slot];
    CMatrix out = CMatrix::Zero(rho.rows(), rho.cols());
    for (std::size_t i = 0; i < n; ++i) {
        const int di = static_cast<int>((i / stride) % static_cast<std::size_t>(d));
        const std::size_t i0 = i - static_cast<std::size_t>(di) * stride;
        for (std::size_t j = 0; j < n; ++j) {
            const int dj = static_cast<int>((j / stride) % static_cast<std::size_t>(d));
            if (di != dj) continue;
            const std::size_t j0 = j - static_cast<std::size_t>(dj) * stride;
            cplx acc = 0.0;
            for (int a = 0; a < d; ++a)
                acc += rho(static_cast<Index>(i0 + a * stride), static_cast<Index>(j0 + a * stride));
            out(static_cast<Index>(i), static_cast<Index>(j)) = acc / static_cast<double>(d);
        }
    }
    return out;
}

// Coordinates of a Hermitian matrix in the orthonormal basis
// {E_ii, (E_ij + E_ji)/sqrt2, i(E_ij - E_ji)/sqrt2 : i < j}. Any
// Hermiticity-preserving superoperator is a real matrix in this basis.
struct HermitianCoords {
    Index n;

    Index size() const { return n * n; }

    Eigen::VectorXd encode(const CMatrix &m) const {
        Eigen::VectorXd x(size());
        Index k = 0;
        for (Index i = 0; i < n; ++i) x[k++] = m(i, i).real();
        for (Index i = 0; i < n; ++i)
            for (Index j = i + 1; j < n; ++j) {
                const cplx v = 0.5 * (m(i, j) + std::conj(m(j, i)));
                x[k++] = std::numbers::sqrt2 * v.real();
                x[k++] = std::numbers::sqrt2 * v.imag();
            }
        return x;
    }

    CMatrix decode(const Eigen::VectorXd &x) const {
        CMatrix m(n, n);
        Index k = 0;
        for (Index i = 0; i < n; ++i) m(i, i) = x[k++];
        for (Index i = 0; i < n; ++i)
            for (Index j = i + 1; j < n; ++j) {
                const cplx v(x[k], x[k + 1]);
                k += 2;
                m(i, j) = v / std::numbers::sqrt2;
                m(j, i) = std::conj(m(i, j));
            }
        return m;
    }

    CMatrix basis(Index b) const {
        CMatrix m = CMatrix::Zero(n, n);
        if (b < n) {
            m(b, b) = 1.0;
            return m;
        }
        Index k = n;
        for (Index i = 0; i < n; ++i)
            for (Index j = i + 1; j < n; ++j, k += 2) {
                if (b == k) {
                    m(i, j) = m(j, i) = 1.0 / std::numbers::sqrt2;
                    return m;
                }
                if (b == k + 1) {
                    m(i, j) = cplx(0.0, 1.0 / std::numbers::sqrt2);
                    m(j, i) = cplx(0.0, -1.0 / std::numbers::sqrt2);
                    return m;
                }
            }
        return m;
    }
};

// Free evolution in the eigenbasis. Dephasing-only evolution is closed form;
// depolarizing channels go through the (real) Liouvillian.
class FreeEvolver {
public:
    FreeEvolver(const EigenSystem &es, std::span<const DecoherenceChannel> channels)
        : energies_(es.energies), n_(static_cast<Index>(es.size())) {
        gamma_ = Eigen::MatrixXd::Zero(n_, n_);
        std::vector<std::pair<std::size_t, double>> depol;
        for (const auto &ch : channels) {
            if (ch.rate_per_us < 0.0) throw ConfigError("decoherence rate must be >= 0");
            if (ch.target_slot >= es.dims.size()) throw ConfigError("decoherence channel targets a missing spin");
            if (ch.rate_per_us == 0.0) continue;
            if (ch.kind == DecoherenceKind::dephasing) {
                const auto m = dominant_slot_index(es, ch.target_slot);
                for (Index i = 0; i < n_; ++i)
                    for (Index j = 0; j < n_; ++j)
                        if (m[static_cast<std::size_t>(i)] != m[static_cast<std::size_t>(j)]) gamma_(i, j) += ch.rate_per_us;
            } else {
                depol.emplace_back(ch.target_slot, ch.rate_per_us);
            }
        }
        if (!depol.empty()) build_liouvillian(es, depol);
    }

    CMatrix apply(const CMatrix &rho, double t) const {
        if (t < 0.0) throw ConfigError("evolve: negative duration");
        if (t == 0.0) return rho;
        if (!liouvillian_) {
            CMatrix out(n_, n_);
            for (Index j = 0; j < n_; ++j)
                for (Index i = 0; i < n_; ++i) {
                    const double dphi = -kTwoPi * (energies_[static_cast<std::size_t>(i)] - energies_[static_cast<std::size_t>(j)]) * t;
                    out(i, j) = rho(i, j) * std::exp(cplx(-gamma_(i, j) * t, dphi));
                }
            return out;
        }
        const Eigen::VectorXd x = coords_.encode(rho);
        Eigen::VectorXd y;
        if (diagonalized_) {
            CVector c = w_inv_ * x.cast<cplx>();
            for (Index k = 0; k < c.size(); ++k) c[k] *= std::exp(lambda_[k] * t);
            y = (w_ * c).real();
        } else {
            y = (l_ * t).exp() * x;
        }
        return coords_.decode(y);
    }

private:
    void build_liouvillian(const EigenSystem &es, const std::vector<std::pair<std::size_t, double>> &depol) {
        liouvillian_ = true;
        coords_ = {n_};
        const Index nn = coords_.size();
        l_.resize(nn, nn);
        for (Index b = 0; b < nn; ++b) {
            const CMatrix in = coords_.basis(b);
            CMatrix out(n_, n_);
            for (Index j = 0; j < n_; ++j)
                for (Index i = 0; i < n_; ++i)
                    out(i, j) = in(i, j) * cplx(-gamma_(i, j), -kTwoPi * (energies_[static_cast<std::size_t>(i)] -
                                                                          energies_[static_cast<std::size_t>(j)]));
            if (!depol.empty()) {
                const CMatrix prod = es.to_product_basis(in);
                for (const auto &[slot, rate] : depol)
                    out += rate * (es.to_eigenbasis(depolarize_slot(prod, es.dims, slot)) - in);
            }
            l_.col(b) = coords_.encode(out);
        }
        Eigen::EigenSolver<Eigen::MatrixXd> solver(l_);
        if (solver.info() == Eigen::Success) {
            w_ = solver.eigenvectors();
            lambda_ = solver.eigenvalues();
            Eigen::PartialPivLU<CMatrix> lu(w_);
            w_inv_ = lu.inverse();
            const CMatrix rebuilt = w_ * lambda_.asDiagonal() * w_inv_;
            const double err = (rebuilt - l_.cast<cplx>()).cwiseAbs().maxCoeff() / std::max(1.0, l_.cwiseAbs().maxCoeff());
            diagonalized_ = std::isfinite(err) && err < 1e-10;
        }
    }

    std::vector<double> energies_;
    Index n_;
    Eigen::MatrixXd gamma_;
    bool liouvillian_ = false;
    bool diagonalized_ = false;
    HermitianCoords coords_{0};
    Eigen::MatrixXd l_;
    CMatrix w_, w_inv_;
    CVector lambda_;
};

// Rotating-frame pulse propagator for one eigensystem. Every level gets an
// integer grading n_k = round((E_k - E_ref) / f_c); drive elements with
// |n_k - n_l| = 1 are kept at their co-rotating amplitude.
struct PulseKernel {
    std::vector<double> frame_mhz; // f_c * n_k
    CMatrix u_rot;
    double duration_us = 0.0;
    bool ideal = false;
};

PulseKernel build_kernel(const ResolvedPulse &p, const EigenSystem &es, double extra_phase) {
    const Index n = static_cast<Index>(es.size());
    const double e_ref = es.energy(p.reference_level);
    std::vector<long long> grade(es.size());
    for (std::size_t k = 0; k < es.size(); ++k) grade[k] = std::llround((es.energies[k] - e_ref) / p.carrier_mhz);

    const CMatrix d = es.to_eigenbasis(p.drive);
    const cplx up = std::polar(p.amplitude_mhz, -(p.phase_rad + extra_phase));
    CMatrix h = CMatrix::Zero(n, n);
    for (Index k = 0; k < n; ++k) {
        for (Index l = 0; l < n; ++l) {
            const long long dn = grade[static_cast<std::size_t>(k)] - grade[static_cast<std::size_t>(l)];
            if (p.ideal && std::abs(dn) == 1) {
                const double residual = es.energies[static_cast<std::size_t>(k)] - es.energies[static_cast<std::size_t>(l)] -
                                        p.carrier_mhz * static_cast<double>(dn);
                if (std::abs(residual) > p.bandwidth_mhz) continue;
            }
            if (dn == 1)
                h(k, l) = up * d(k, l);
            else if (dn == -1)
                h(k, l) = std::conj(up) * d(k, l);
        }
        if (!p.ideal)
            h(k, k) += es.energies[static_cast<std::size_t>(k)] - e_ref - p.carrier_mhz * static_cast<double>(grade[static_cast<std::size_t>(k)]);
    }
    PulseKernel kern;
    kern.frame_mhz.resize(es.size());
    for (std::size_t k = 0; k < es.size(); ++k) kern.frame_mhz[k] = p.carrier_mhz * static_cast<double>(grade[k]);
    kern.u_rot = hermitian_expm(h, kTwoPi * p.duration_us);
    kern.duration_us = p.duration_us;
    kern.ideal = p.ideal;
    return kern;
}

CMatrix kernel_unitary(const PulseKernel &k, double t0) {
    const double t1 = k.ideal ? t0 : t0 + k.duration_us;
    const Index n = k.u_rot.rows();
    CMatrix u(n, n);
    for (Index c = 0; c < n; ++c) {
        const cplx right = std::polar(1.0, kTwoPi * std::fmod(k.frame_mhz[static_cast<std::size_t>(c)] * t0, 1.0));
        for (Index r = 0; r < n; ++r) {
            const cplx left = std::polar(1.0, -kTwoPi * std::fmod(k.frame_mhz[static_cast<std::size_t>(r)] * t1, 1.0));
            u(r, c) = left * k.u_rot(r, c) * right;
        }
    }
    return u;
}

CMatrix lab_frame_unitary(const ResolvedPulse &p, const EigenSystem &es, double t0, double extra_phase,
                          const LabFrameOptions &opt) {
    const Index n = static_cast<Index>(es.size());
    double mean = 0.0;
    for (double e : es.energies) mean += e;
    mean /= static_cast<double>(es.size());
    Eigen::VectorXd e0(n);
    for (Index k = 0; k < n; ++k) e0[k] = es.energies[static_cast<std::size_t>(k)] - mean;
    const CMatrix d = es.to_eigenbasis(p.drive);
    const double f_max = std::max({es.energies.back() - es.energies.front(), p.carrier_mhz, 2.0 * p.amplitude_mhz});
    if (p.duration_us == 0.0) return CMatrix::Identity(n, n);

    auto integrate = [&](long steps) {
        const double dt = p.duration_us / static_cast<double>(steps);
        CMatrix u = CMatrix::Identity(n, n);
        for (long s = 0; s < steps; ++s) {
            const double tm = t0 + (static_cast<double>(s) + 0.5) * dt;
            const double drive = 2.0 * p.amplitude_mhz * std::cos(kTwoPi * p.carrier_mhz * tm + p.phase_rad + extra_phase);
            CMatrix h = drive * d;
            h.diagonal() += e0.cast<cplx>();
            u = hermitian_expm(h, kTwoPi * dt) * u;
        }
        return u;
    };
    long steps = std::max(1L, static_cast<long>(std::ceil(p.duration_us * f_max * opt.steps_per_period)));
    CMatrix coarse = integrate(steps);
    double diff = 0.0;
    for (int r = 0; r <= opt.max_refinements; ++r) {
        steps *= 2;
        CMatrix fine = integrate(steps);
        diff = (fine - coarse).cwiseAbs().maxCoeff();
        if (diff < opt.tolerance) return fine;
        coarse = std::move(fine);
    }
    std::ostringstream msg;
    msg << "lab-frame pulse integration did not converge: " << steps << " steps, last change " << diff
        << " > tolerance " << opt.tolerance;
    throw NumericalError(msg.str());
}

CMatrix initial_state_eigenbasis(const EigenSystem &es, const SpinSystem &sys, const PolarizationSpec &spec) {
    const auto n = es.size();
    std::vector<double> w(n, 0.0);
    if (spec.ms0_manifold) {
        w = manifold_populations(es, electron_projector(sys, 0.0));
    } else {
        if (spec.level1_weight < 0.0 || spec.level1_weight > 1.0)
            throw ConfigError("polarization: level-1 weight must lie in [0, 1]");
        w[0] = spec.level1_weight;
        std::vector<int> rest = spec.remainder_levels;
        if (rest.empty())
            for (std::size_t k = 2; k <= n; ++k) rest.push_back(static_cast<int>(k));
        const double rem = 1.0 - spec.level1_weight;
        if (rem > 0.0) {
            if (rest.empty()) throw ConfigError("polarization: no levels left for the remainder weight");
            for (int label : rest) {
                if (label < 2 || label > static_cast<int>(n))
                    throw ConfigError("polarization: remainder level " + std::to_string(label) + " out of range");
                w[static_cast<std::size_t>(label - 1)] += rem / static_cast<double>(rest.size());
            }
        }
    }
    CMatrix rho = CMatrix::Zero(static_cast<Index>(n), static_cast<Index>(n));
    for (std::size_t k = 0; k < n; ++k) rho(static_cast<Index>(k), static_cast<Index>(k)) = w[k];
    return rho;
}

std::vector<ResolvedPulse> resolve_all(const Sequence &seq, const SpinSystem &sys, const EigenSystem &es) {
    std::vector<ResolvedPulse> out;
    for (const auto &el : seq.elements)
        if (const auto *p = std::get_if<Pulse>(&el)) out.push_back(resolve_pulse(*p, sys, es));
    return out;
}

void check_sweep(const Sequence &seq, const SweepSpec &sweep) {
    const bool found = std::any_of(seq.elements.begin(), seq.elements.end(), [&](const SequenceElement &el) {
        const auto *d = std::get_if<Delay>(&el);
        return d && d->name == sweep.name;
    });
    if (!found) throw ConfigError("sweep target '" + sweep.name + "' does not name any delay in the sequence");
    for (double v : sweep.values)
        if (v < 0.0) throw ConfigError("sweep values must be >= 0 us");
}

// Everything needed to evaluate one sweep point for one Hamiltonian.
class PointSimulator {
public:
    PointSimulator(const SpinSystem &sys, const Sequence &seq, const PolarizationSpec &pol,
                   const std::vector<ResolvedPulse> &pulses, const HamiltonianMatrix &h, const RunOptions &opt)
        : seq_(seq), pulses_(pulses), opt_(opt), es_(eigensolve(h)), evolver_(es_, seq.channels) {
        rho0_ = initial_state_eigenbasis(es_, sys, pol);
        last_pulse_ = pulses.empty() ? -1 : static_cast<int>(pulses.size()) - 1;
        for (std::size_t k = 0; k < pulses.size(); ++k) kernels_.push_back(build_kernel(pulses[k], es_, 0.0));
        if (seq.readout.phase_cycle && last_pulse_ >= 0)
            flipped_ = build_kernel(pulses.back(), es_, std::numbers::pi);
        if (seq.readout.bright_levels.empty()) {
            bright_ = es_.to_eigenbasis(electron_projector(sys, 0.0));
        } else {
            bright_ = CMatrix::Zero(static_cast<Index>(es_.size()), static_cast<Index>(es_.size()));
            for (int label : seq.readout.bright_levels) {
                if (label < 1 || label > static_cast<int>(es_.size()))
                    throw ConfigError("readout: bright level " + std::to_string(label) + " out of range");
                bright_(label - 1, label - 1) = 1.0;
            }
        }
        if (seq.readout.contrast < 0.0 || seq.readout.contrast > 1.0)
            throw ConfigError("readout: contrast must lie in [0, 1]");
    }

    double signal(const SweepSpec &sweep, double value, std::uint64_t point, std::uint64_t sample) const {
        std::mt19937_64 rng;
        if (seq_.readout.photon_counts > 0) {
            std::seed_seq seq{static_cast<std::uint32_t>(opt_.seed), static_cast<std::uint32_t>(opt_.seed >> 32),
                              static_cast<std::uint32_t>(point), static_cast<std::uint32_t>(sample)};
            rng.seed(seq);
        }
        const double s = readout(run(sweep, value, false), rng);
        if (!seq_.readout.phase_cycle || last_pulse_ < 0) return s;
        return s - readout(run(sweep, value, true), rng);
    }

    CMatrix run(const SweepSpec &sweep, double value, bool flip_last) const {
        CMatrix rho = rho0_;
        double t = 0.0;
        int pulse_index = 0;
        for (const auto &el : seq_.elements) {
            if (const auto *d = std::get_if<Delay>(&el)) {
                const double dur = d->name == sweep.name ? value : d->duration_us;
                rho = evolver_.apply(rho, dur);
                t += dur;
                continue;
            }
            const auto &rp = pulses_[static_cast<std::size_t>(pulse_index)];
            const bool flip = flip_last && pulse_index == last_pulse_;
            const PulseKernel &kern = flip ? *flipped_ : kernels_[static_cast<std::size_t>(pulse_index)];
            CMatrix u;
            if (seq_.mode == Propagation::lab_frame && !rp.ideal)
                u = lab_frame_unitary(rp, es_, t, flip ? std::numbers::pi : 0.0, opt_.lab);
            else
                u = kernel_unitary(kern, t);
            rho = conjugate_by(u, rho);
            if (!rp.ideal) t += rp.duration_us;
            ++pulse_index;
        }
        return rho;
    }

private:
    double readout(const CMatrix &rho, std::mt19937_64 &rng) const {
        const double p = (bright_ * rho).trace().real();
        double s = 1.0 - seq_.readout.contrast * (1.0 - p);
        if (seq_.readout.photon_counts > 0) {
            const double n = static_cast<double>(seq_.readout.photon_counts);
            std::poisson_distribution<long> counts(std::max(0.0, s) * n);
            s = static_cast<double>(counts(rng)) / n;
        }
        return s;
    }

    const Sequence &seq_;
    const std::vector<ResolvedPulse> &pulses_;
    const RunOptions &opt_;
    EigenSystem es_;
    FreeEvolver evolver_;
    CMatrix rho0_;
    CMatrix bright_;
    std::vector<PulseKernel> kernels_;
    std::optional<PulseKernel> flipped_;
    int last_pulse_ = -1;
};

TimeTrace sweep_impl(const SpinSystem &sys, const Sequence &seq, const SweepSpec &sweep,
                     const PolarizationSpec &pol, const RunOptions &opt, bool parallel) {
    check_sweep(seq, sweep);
    const auto h = build_hamiltonian(sys);
    const auto es = eigensolve(h);
    const auto pulses = resolve_all(seq, sys, es);
    const PointSimulator sim(sys, seq, pol, pulses, h, opt);

    const auto n = static_cast<long>(sweep.values.size());
    TimeTrace out;
    out.t = sweep.values;
    out.signal.assign(sweep.values.size(), 0.0);
    if (parallel) {
#pragma omp parallel for schedule(dynamic)
        for (long k = 0; k < n; ++k)
            out.signal[static_cast<std::size_t>(k)] = sim.signal(sweep, sweep.values[static_cast<std::size_t>(k)], static_cast<std::uint64_t>(k), 0);
    } else {
        for (long k = 0; k < n; ++k)
            out.signal[static_cast<std::size_t>(k)] = sim.signal(sweep, sweep.values[static_cast<std::size_t>(k)], static_cast<std::uint64_t>(k), 0);
    }
    return out;
}

TimeTrace ensemble_impl(const SpinSystem &sys, const Sequence &seq, const SweepSpec &sweep,
                        const DetuningDistribution &dist, int n_samples, const PolarizationSpec &pol,
                        const RunOptions &opt, bool parallel) {
    check_sweep(seq, sweep);
    const auto h = build_hamiltonian(sys);
    const auto es = eigensolve(h);
    const auto pulses = resolve_all(seq, sys, es);
    const auto deltas = sample_detunings(dist, n_samples, opt.seed);
    const CMatrix sz = electron_sz(sys);

    const auto n_pts = sweep.values.size();
    std::vector<std::vector<double>> per_sample(deltas.size(), std::vector<double>(n_pts, 0.0));
    auto run_sample = [&](std::size_t s) {
        HamiltonianMatrix hs = h;
        if (deltas[s] != 0.0) hs.mhz += deltas[s] * sz;
        const PointSimulator sim(sys, seq, pol, pulses, hs, opt);
        for (std::size_t k = 0; k < n_pts; ++k) per_sample[s][k] = sim.signal(sweep, sweep.values[k], k, s);
    };
    const auto n_s = static_cast<long>(deltas.size());
    if (parallel) {
#pragma omp parallel for schedule(dynamic)
        for (long s = 0; s < n_s; ++s) run_sample(static_cast<std::size_t>(s));
    } else {
        for (long s = 0; s < n_s; ++s) run_sample(static_cast<std::size_t>(s));
    }

    TimeTrace out;
    out.t = sweep.values;
    out.signal.assign(n_pts, 0.0);
    for (const auto &trace : per_sample)
        for (std::size_t k = 0; k < n_pts; ++k) out.signal[k] += trace[k];
    for (auto &v : out.signal) v /= static_cast<double>(per_sample.size());
    return out;
}

} // namespace

double DensityMatrix::min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

void DensityMatrix::check(double tol) const {
    std::ostringstream msg;
    if (std::abs(trace() - 1.0) > tol) msg << "trace " << trace() << " != 1; ";
    if (hermiticity_defect(rho) > tol) msg << "not Hermitian (" << hermiticity_defect(rho) << "); ";
    if (min_eigenvalue() < -tol) msg << "negative eigenvalue " << min_eigenvalue() << "; ";
    if (!msg.str().empty()) throw NumericalError("density matrix invalid: " + msg.str());
}

double pulse_duration_us(const Pulse &pulse) {
    if (pulse.duration_us) {
        if (*pulse.duration_us < 0.0) throw ConfigError("pulse duration must be >= 0");
        return *pulse.duration_us;
    }
    if (!pulse.angle_rad) throw ConfigError("pulse needs either a duration or a rotation angle");
    if (!(pulse.rabi_mhz > 0.0)) throw ConfigError("pulse Rabi frequency must be > 0");
    return *pulse.angle_rad / (2.0 * std::numbers::pi * pulse.rabi_mhz);
}

int first_excited_electron_level(const EigenSystem &es) {
    const auto ms = dominant_slot_index(es, 0);
    for (std::size_t k = 1; k < es.size(); ++k)
        if (ms[k] != ms[0]) return static_cast<int>(k + 1);
    throw ConfigError("no level with a different electron projection than level 1");
}

ResolvedPulse resolve_pulse(const Pulse &pulse, const SpinSystem &sys, const EigenSystem &es) {
    if (!(pulse.rabi_mhz > 0.0)) throw ConfigError("pulse Rabi frequency must be > 0");
    ResolvedPulse rp;
    if (pulse.channel == DriveChannel::mw) {
        rp.drive = spin_component(sys, 0, 0);
    } else {
        if (pulse.nucleus >= sys.nuclei.size()) throw ConfigError("rf pulse targets a missing nucleus");
        rp.drive = spin_component(sys, pulse.nucleus + 1, 0);
    }
    rp.phase_rad = pulse.phase_rad;
    rp.duration_us = pulse_duration_us(pulse);
    rp.ideal = pulse.ideal;
    rp.bandwidth_mhz = pulse.rabi_mhz;
    if (pulse.transition) {
        auto [from, to] = *pulse.transition;
        const int n = static_cast<int>(es.size());
        if (from < 1 || to < 1 || from > n || to > n || from == to)
            throw ConfigError("pulse transition levels out of range");
        if (es.energy(from) > es.energy(to)) std::swap(from, to);
        rp.reference_level = from;
        rp.carrier_mhz = pulse.carrier_mhz.value_or(es.energy(to) - es.energy(from));
        const CMatrix d = es.to_eigenbasis(rp.drive);
        double coupling = 0.0;
        for (int k = 1; k <= n; ++k)
            if (std::abs(es.energy(k) - es.energy(to)) < 1e-6) coupling += std::norm(d(from - 1, k - 1));
        coupling = std::sqrt(coupling);
        if (coupling < 1e-9) throw ConfigError("pulse addresses a transition the drive cannot excite");
        rp.amplitude_mhz = pulse.rabi_mhz / (2.0 * coupling);
    } else {
        if (!pulse.carrier_mhz) throw ConfigError("pulse needs either a transition or a carrier frequency");
        rp.carrier_mhz = *pulse.carrier_mhz;
        rp.reference_level = 1;
        rp.amplitude_mhz = pulse.rabi_mhz;
    }
    if (!(rp.carrier_mhz > 0.0)) throw ConfigError("pulse carrier frequency must be > 0");
    return rp;
}

DensityMatrix polarize(const EigenSystem &es, const SpinSystem &sys, const PolarizationSpec &spec) {
    return {es.to_product_basis(initial_state_eigenbasis(es, sys, spec))};
}

DensityMatrix apply_pulse(const DensityMatrix &rho, const ResolvedPulse &pulse, const EigenSystem &es,
                          double t0_us, Propagation mode, const LabFrameOptions &lab) {
    CMatrix u;
    if (mode == Propagation::lab_frame && !pulse.ideal)
        u = lab_frame_unitary(pulse, es, t0_us, 0.0, lab);
    else
        u = kernel_unitary(build_kernel(pulse, es, 0.0), t0_us);
    const CMatrix r = es.to_eigenbasis(rho.rho);
    return {es.to_product_basis(conjugate_by(u, r))};
}

DensityMatrix evolve(const DensityMatrix &rho, double duration_us, const EigenSystem &es,
                     std::span<const DecoherenceChannel> channels) {
    if (duration_us < 0.0) throw ConfigError("evolve: negative duration");
    const FreeEvolver ev(es, channels);
    if (duration_us == 0.0) return rho;
    return {es.to_product_basis(ev.apply(es.to_eigenbasis(rho.rho), duration_us))};
}

TimeTrace run_sequence(const SpinSystem &sys, const Sequence &seq, const SweepSpec &sweep,
                       const PolarizationSpec &pol, const RunOptions &opt) {
    return sweep_impl(sys, seq, sweep, pol, opt, true);
}

TimeTrace run_sequence_serial(const SpinSystem &sys, const Sequence &seq, const SweepSpec &sweep,
                              const PolarizationSpec &pol, const RunOptions &opt) {
    return sweep_impl(sys, seq, sweep, pol, opt, false);
}

std::vector<double> sample_detunings(const DetuningDistribution &dist, int n_samples, std::uint64_t seed) {
    if (!dist.values.empty()) return dist.values;
    if (n_samples < 1) throw ConfigError("ensemble needs at least one sample");
    if (dist.sigma_mhz < 0.0) throw ConfigError("detuning sigma must be >= 0");
    std::vector<double> out(static_cast<std::size_t>(n_samples), 0.0);
    if (dist.sigma_mhz == 0.0) return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, dist.sigma_mhz);
    for (auto &v : out) v = normal(rng);
    return out;
}

TimeTrace ensemble_average(const SpinSystem &sys, const Sequence &seq, const SweepSpec &sweep,
                           const DetuningDistribution &dist, int n_samples, const PolarizationSpec &pol,
                           const RunOptions &opt) {
    return ensemble_impl(sys, seq, sweep, dist, n_samples, pol, opt, true);
}

TimeTrace ensemble_average_serial(const SpinSystem &sys, const Sequence &seq, const SweepSpec &sweep,
                                  const DetuningDistribution &dist, int n_samples, const PolarizationSpec &pol,
                                  const RunOptions &opt) {
    return ensemble_impl(sys, seq, sweep, dist, n_samples, pol, opt, false);
}

} // namespace nvsim
