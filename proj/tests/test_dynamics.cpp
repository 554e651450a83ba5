#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nvsim/dynamics.hpp"
#include "oracle.hpp"

using namespace nvsim;

namespace {

constexpr double kPi = std::numbers::pi;

EigenSystem solve(const SpinSystem &s) { return eigensolve(build_hamiltonian(s)); }

// spin-1/2 "electron" along z: an isolated two-level pair at ~280 MHz
SpinSystem qubit(double field = 100.0) {
    SpinSystem s;
    s.electron = SpinQuantum{1};
    s.field = {field, 0.0, 0.0};
    return s;
}

SpinSystem c13_140g() {
    SpinSystem s;
    s.field = {140.0, 26.0, 0.0};
    s.nuclei = {carbon13_first_shell()};
    return s;
}

Pulse pulse(int from, int to, double angle_deg, double rabi = 10.0, double phase_deg = 0.0) {
    Pulse p;
    p.transition = std::make_pair(from, to);
    p.angle_rad = angle_deg * kPi / 180.0;
    p.rabi_mhz = rabi;
    p.phase_rad = phase_deg * kPi / 180.0;
    return p;
}

CMatrix eig_rho(const EigenSystem &es, const DensityMatrix &r) { return es.to_eigenbasis(r.rho); }

DensityMatrix apply(const DensityMatrix &r, const Pulse &p, const SpinSystem &s, const EigenSystem &es, double t0 = 0.0) {
    return apply_pulse(r, resolve_pulse(p, s, es), es, t0);
}

} // namespace

TEST_CASE("polarization") {
    const auto s = c13_140g();
    const auto es = solve(s);
    const auto r = polarize(es, s);
    const CMatrix e = eig_rho(es, r);
    CHECK(std::abs(e(0, 0) - 1.0) < 1e-12);
    CHECK(r.purity() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.trace() == doctest::Approx(1.0).epsilon(1e-12));

    PolarizationSpec spec;
    spec.level1_weight = 0.8;
    spec.remainder_levels = {2};
    const CMatrix m = eig_rho(es, polarize(es, s, spec));
    CHECK(m(0, 0).real() == doctest::Approx(0.8));
    CHECK(m(1, 1).real() == doctest::Approx(0.2));
    for (int k = 2; k < 6; ++k) CHECK(std::abs(m(k, k)) < 1e-12);

    spec.ms0_manifold = true;
    const CMatrix ms0 = eig_rho(es, polarize(es, s, spec));
    CHECK(ms0(0, 0).real() + ms0(1, 1).real() > 0.99);

    spec = {};
    spec.level1_weight = 1.5;
    CHECK_THROWS_AS(polarize(es, s, spec), ConfigError);
}

TEST_CASE("pulse timing: 8 ns pi/2 at 31.25 MHz") {
    Pulse p;
    p.angle_rad = kPi / 2;
    p.rabi_mhz = 31.25;
    CHECK(pulse_duration_us(p) == doctest::Approx(0.008).epsilon(1e-14));
    p.duration_us = 0.02;
    CHECK(pulse_duration_us(p) == 0.02);
    p.rabi_mhz = 0.0;
    p.duration_us.reset();
    CHECK_THROWS_AS(pulse_duration_us(p), ConfigError);
}

TEST_CASE("Rabi rotations on an isolated pair") {
    const auto s = qubit();
    const auto es = solve(s);
    const auto r0 = polarize(es, s);

    const auto pi = apply(r0, pulse(1, 2, 180), s, es);
    CHECK(std::abs(eig_rho(es, pi)(1, 1).real() - 1.0) < 1e-6);

    const auto half = apply(apply(r0, pulse(1, 2, 90), s, es), pulse(1, 2, 90), s, es, 0.025);
    CHECK(std::abs(eig_rho(es, half)(1, 1).real() - 1.0) < 1e-6);

    const auto back = apply(pi, pulse(1, 2, 180), s, es, 0.05);
    CHECK(std::abs(eig_rho(es, back)(0, 0).real() - 1.0) < 1e-6);

    // nutation: population after angle theta is sin^2(theta/2)
    for (double deg : {30.0, 60.0, 123.0}) {
        const auto r = apply(r0, pulse(1, 2, deg), s, es);
        const double expect = std::pow(std::sin(deg * kPi / 360.0), 2);
        CHECK(eig_rho(es, r)(1, 1).real() == doctest::Approx(expect).epsilon(1e-6));
    }
}

TEST_CASE("ideal pulses rotate instantly and only within their bandwidth") {
    const auto s = c13_140g();
    const auto es = solve(s);
    const auto r0 = polarize(es, s);
    Pulse p = pulse(1, 3, 180, 5.0);
    p.ideal = true;
    const auto rp = resolve_pulse(p, s, es);
    CHECK(rp.ideal);
    CHECK(rp.bandwidth_mhz == 5.0);
    const CMatrix e = eig_rho(es, apply_pulse(r0, rp, es, 0.0));
    CHECK(e(2, 2).real() == doctest::Approx(1.0).epsilon(1e-9));
    // level 2 -> 3 is 28 MHz away and untouched
    PolarizationSpec pol;
    pol.level1_weight = 0.0;
    pol.remainder_levels = {2};
    const CMatrix e2 = eig_rho(es, apply_pulse(polarize(es, s, pol), rp, es, 0.0));
    CHECK(e2(1, 1).real() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("free evolution") {
    const auto s = c13_140g();
    const auto es = solve(s);
    const auto r0 = apply(polarize(es, s), pulse(1, 3, 90, 31.25), s, es);

    CHECK((evolve(r0, 0.0, es).rho - r0.rho).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(evolve(r0, -1.0, es), ConfigError);

    SUBCASE("diagonal states are stationary") {
        const auto d = polarize(es, s);
        CHECK((evolve(d, 3.7, es).rho - d.rho).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("unitary part against an independent matrix exponential") {
        const double t = 0.0137;
        const auto u = oracle::propagator(oracle::from_eigen(build_hamiltonian(s).mhz), t);
        const auto expect = u * oracle::from_eigen(r0.rho) * oracle::dagger(u);
        const auto got = evolve(r0, t, es);
        CHECK(oracle::max_diff(expect, got.rho) < 1e-9);
        CHECK(got.purity() == doctest::Approx(r0.purity()).epsilon(1e-12));
    }
    SUBCASE("electron dephasing damps the 1-3 coherence as exp(-gamma t)") {
        const double gamma = 0.7, t = 1.3;
        const DecoherenceChannel ch{DecoherenceKind::dephasing, 0, gamma};
        const CMatrix before = eig_rho(es, r0);
        const CMatrix after = eig_rho(es, evolve(r0, t, es, std::span(&ch, 1)));
        CHECK(std::abs(after(0, 2)) == doctest::Approx(std::abs(before(0, 2)) * std::exp(-gamma * t)).epsilon(1e-9));
        CHECK(after(0, 0).real() == doctest::Approx(before(0, 0).real()).epsilon(1e-12));
    }
    SUBCASE("channels reject bad input") {
        DecoherenceChannel ch{DecoherenceKind::dephasing, 5, 1.0};
        CHECK_THROWS_AS(evolve(r0, 1.0, es, std::span(&ch, 1)), ConfigError);
        ch = {DecoherenceKind::depolarizing, 0, -1.0};
        CHECK_THROWS_AS(evolve(r0, 1.0, es, std::span(&ch, 1)), ConfigError);
    }
}

TEST_CASE("depolarizing channel against a Runge-Kutta master equation") {
    // slow system so the reference integrator converges cheaply
    SpinSystem s;
    s.d_mhz = 5.0;
    s.field = {1.0, 30.0, 0.0};
    auto c = carbon13_first_shell();
    c.hyperfine_mhz = axial_tensor(3.0, 2.0);
    s.nuclei = {c};
    const auto es = solve(s);
    const auto r0 = apply(polarize(es, s), pulse(1, 3, 70, 1.0), s, es);

    const std::vector<DecoherenceChannel> channels{{DecoherenceKind::depolarizing, 1, 0.7},
                                                   {DecoherenceKind::depolarizing, 0, 0.2}};
    const double t = 0.5;
    const auto got = evolve(r0, t, es, channels);
    const auto expect = oracle::master_equation(oracle::from_eigen(r0.rho), oracle::from_eigen(build_hamiltonian(s).mhz),
                                                {{1, 0.7L}, {0, 0.2L}}, s.dims(), t, 20000);
    CHECK(oracle::max_diff(expect, got.rho) < 1e-9);
    CHECK(got.purity() < r0.purity());
    CHECK_NOTHROW(got.check());
}

TEST_CASE("density matrix stays physical through a sequence") {
    const auto s = c13_140g();
    const auto es = solve(s);
    const std::vector<DecoherenceChannel> channels{{DecoherenceKind::dephasing, 0, 0.5},
                                                   {DecoherenceKind::depolarizing, 1, 0.3}};
    auto r = polarize(es, s);
    double purity = r.purity();
    double t0 = 0.0;
    for (int k = 0; k < 4; ++k) {
        r = apply(r, pulse(1 + k % 2, 3, 90, 31.25), s, es, t0);
        t0 += 0.008;
        CHECK(std::abs(r.purity() - purity) < 1e-9);
        r = evolve(r, 0.3, es, channels);
        t0 += 0.3;
        CHECK(r.purity() <= purity + 1e-12);
        purity = r.purity();
        CHECK(std::abs(r.trace() - 1.0) < 1e-9);
        CHECK(hermiticity_defect(r.rho) < 1e-9);
        CHECK(r.min_eigenvalue() > -1e-9);
    }
    DensityMatrix bad{CMatrix::Identity(6, 6)};
    CHECK_THROWS_AS(bad.check(), NumericalError);
}

TEST_CASE("rotating-frame and lab-frame propagation agree for a weak pulse") {
    const auto s = qubit(17.8); // ~50 MHz transition
    const auto es = solve(s);
    const auto r0 = polarize(es, s);
    const auto rp = resolve_pulse(pulse(1, 2, 90, 1.0), s, es);
    const auto rwa = apply_pulse(r0, rp, es, 0.0, Propagation::rwa);
    const auto lab = apply_pulse(r0, rp, es, 0.0, Propagation::lab_frame);
    CHECK(std::abs(eig_rho(es, rwa)(1, 1).real() - eig_rho(es, lab)(1, 1).real()) < 0.02);
    CHECK(std::abs(lab.trace() - 1.0) < 1e-9);
}

TEST_CASE("sequence sweeps") {
    const auto s = c13_140g();
    Sequence seq;
    seq.elements = {pulse(1, 3, 90, 31.25), Delay{"tau", 0.0}, pulse(1, 3, 90, 31.25)};
    seq.channels = {{DecoherenceKind::dephasing, 0, 0.2}};
    const SweepSpec sweep{"tau", {0.3, 0.0, 0.7, 0.1, 1.2, 0.05}};

    const auto par = run_sequence(s, seq, sweep);
    const auto ser = run_sequence_serial(s, seq, sweep);
    CHECK(par.t == sweep.values);
    CHECK(par.signal == ser.signal);

    CHECK_THROWS_AS(run_sequence(s, seq, SweepSpec{"nope", {0.1}}), ConfigError);

    SUBCASE("constant FID for an isolated resonant transition") {
        SpinSystem bare;
        bare.field = {500.0, 0.0, 0.0};
        Sequence fid;
        fid.elements = {pulse(1, 2, 90, 31.25), Delay{"tau", 0.0}, pulse(1, 2, 90, 31.25)};
        const auto tr = run_sequence(bare, fid, SweepSpec{"tau", uniform_grid(0, 2, 0.01)});
        for (double v : tr.signal) CHECK(std::abs(v - tr.signal.front()) < 1e-6);
    }
    SUBCASE("shot noise is seeded") {
        Sequence noisy = seq;
        noisy.readout.photon_counts = 1000;
        RunOptions a, b;
        a.seed = b.seed = 11;
        const auto x = run_sequence(s, noisy, sweep, {}, a), y = run_sequence(s, noisy, sweep, {}, b);
        CHECK(x.signal == y.signal);
        b.seed = 12;
        CHECK(run_sequence(s, noisy, sweep, {}, b).signal != x.signal);
        for (std::size_t k = 0; k < x.size(); ++k) CHECK(std::abs(x.signal[k] - par.signal[k]) < 0.1);
    }
}

TEST_CASE("ensemble averaging") {
    SpinSystem s;
    s.field = {100.0, 0.0, 0.0};
    Sequence echo;
    auto ideal = [](double deg) {
        Pulse p = pulse(1, 2, deg, 31.25);
        p.ideal = true;
        return p;
    };
    echo.elements = {ideal(90), Delay{"tau", 0.0}, ideal(180), Delay{"tau", 0.0}, ideal(90)};
    echo.readout.phase_cycle = true;
    const SweepSpec sweep{"tau", uniform_grid(0, 2, 0.1)};

    const auto nominal = run_sequence(s, echo, sweep);
    const auto zero = ensemble_average(s, echo, sweep, DetuningDistribution{}, 16);
    for (std::size_t k = 0; k < nominal.size(); ++k) CHECK(zero.signal[k] == doctest::Approx(nominal.signal[k]).epsilon(1e-12));

    DetuningDistribution listed;
    listed.values = {-3.0, -1.0, 0.0, 2.0, 5.0};
    const auto refocused = ensemble_average(s, echo, sweep, listed, 5);
    for (std::size_t k = 0; k < nominal.size(); ++k) CHECK(std::abs(refocused.signal[k] - nominal.signal[k]) < 1e-6);

    DetuningDistribution gauss{2.0, {}};
    const auto par = ensemble_average(s, echo, sweep, gauss, 40);
    const auto ser = ensemble_average_serial(s, echo, sweep, gauss, 40);
    CHECK(par.signal == ser.signal);
    CHECK(sample_detunings(gauss, 40, 1) == sample_detunings(gauss, 40, 1));
    CHECK(sample_detunings(gauss, 40, 1) != sample_detunings(gauss, 40, 2));
    CHECK_THROWS_AS(ensemble_average(s, echo, sweep, gauss, 0), ConfigError);

    // without the refocusing pulse the spread dephases the FID
    Sequence fid;
    fid.elements = {ideal(90), Delay{"tau", 0.0}, ideal(90)};
    fid.readout.phase_cycle = true;
    const auto decayed = ensemble_average(s, fid, sweep, gauss, 256);
    CHECK(std::abs(decayed.signal.back()) < 0.3 * std::abs(decayed.signal.front()));
}

TEST_CASE("first excited electron level") {
    CHECK(first_excited_electron_level(solve(c13_140g())) == 3);
    CHECK(first_excited_electron_level(solve(qubit())) == 2);
}
