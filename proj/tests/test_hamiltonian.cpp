#include <doctest.h>

#include <cmath>
#include <random>

#include "nvsim/hamiltonian.hpp"
#include "nvsim/spectra.hpp"
#include "oracle.hpp"
#include "reference_values.hpp"

using namespace nvsim;

namespace {

std::vector<double> eigenvalues(const CMatrix &h) {
    Eigen::SelfAdjointEigenSolver<CMatrix> s(h);
    return {s.eigenvalues().data(), s.eigenvalues().data() + s.eigenvalues().size()};
}

SpinSystem c13_140g() {
    SpinSystem s;
    s.field = {140.0, 26.0, 0.0};
    s.nuclei = {carbon13_first_shell()};
    return s;
}

} // namespace

TEST_CASE("zero-field splitting alone") {
    const auto ev = eigenvalues(build_hamiltonian(SpinSystem{}).mhz);
    REQUIRE(ev.size() == 3);
    CHECK(ev[0] == doctest::Approx(-1920.0).epsilon(1e-12));
    CHECK(ev[1] == doctest::Approx(960.0).epsilon(1e-12));
    CHECK(ev[2] == doctest::Approx(960.0).epsilon(1e-12));
}

TEST_CASE("pure electron Zeeman along z") {
    SpinSystem s;
    s.d_mhz = 0.0;
    s.field = {100.0, 0.0, 0.0};
    const double ge = kBohrMhzPerGauss * kDefaultGe;
    const auto ev = eigenvalues(build_hamiltonian(s).mhz);
    CHECK(ev[0] == doctest::Approx(-ge * 100.0).epsilon(1e-12));
    CHECK(std::abs(ev[1]) < 1e-9);
    CHECK(ev[2] == doctest::Approx(ge * 100.0).epsilon(1e-12));
    CHECK(ge == doctest::Approx(2.8032).epsilon(1e-4));
}

TEST_CASE("field vector from polar angles") {
    auto close = [](const RVector3 &a, const RVector3 &b) { return (a - b).norm() < 1e-12; };
    CHECK(close(field_vector(140, 0, 0), {0, 0, 140}));
    CHECK(close(field_vector(140, 90, 0), {140, 0, 0}));
    const double t = 26.0 * std::numbers::pi / 180.0;
    CHECK(close(field_vector(140, 26, 0), {140 * std::sin(t), 0, 140 * std::cos(t)}));
    CHECK_THROWS_AS(field_vector(-1, 0, 0), ConfigError);
}

TEST_CASE("matches an independent Kronecker-product construction") {
    SUBCASE("13C at 140 G") {
        const auto h = build_hamiltonian(c13_140g());
        const auto ref = oracle::nv_hamiltonian(140, 26, 0, {{1, 130, 228, 0, 1.0705e-3L}});
        CHECK(oracle::max_diff(ref, h.mhz) < 1e-9);
    }
    SUBCASE("13C + 14N, oblique field with azimuth") {
        SpinSystem s;
        s.field = {80.0, 20.0, 35.0};
        s.nuclei = {carbon13_first_shell(), nitrogen14()};
        const auto h = build_hamiltonian(s);
        const auto ref = oracle::nv_hamiltonian(80, 20, 35, {{1, 130, 228, 0, 1.0705e-3L}, {2, 2, 2, 5, 3.077e-4L}});
        CHECK(h.dims == std::vector<int>{3, 2, 3});
        CHECK(oracle::max_diff(ref, h.mhz) < 1e-9);
    }
}

TEST_CASE("energy levels against the high-precision reference") {
    const auto ev = eigenvalues(build_hamiltonian(c13_140g()).mhz);
    for (int k = 0; k < 6; ++k) CHECK(ev[static_cast<std::size_t>(k)] == doctest::Approx(ref::c13_140g_levels[k]).epsilon(1e-10));
    CHECK(ev[1] - ev[0] == doctest::Approx(28.0).epsilon(3.0 / 28.0));
}

TEST_CASE("pseudo-nuclear Zeeman splitting dwarfs the bare one") {
    const auto on = eigenvalues(build_hamiltonian(c13_140g()).mhz);
    const auto off = eigenvalues(build_hamiltonian(without_hyperfine(c13_140g())).mhz);
    const double bare = ref::bare_140g_levels[1] - ref::bare_140g_levels[0];
    CHECK(off[1] - off[0] == doctest::Approx(bare).epsilon(1e-8));
    CHECK(bare == doctest::Approx(kGammaC13MhzPerGauss * 140.0).epsilon(1e-9));
    CHECK((on[1] - on[0]) > 10.0 * (off[1] - off[0]));
}

TEST_CASE("Hermitian, traceless D and P, linear in B, symmetric about z") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        SpinSystem s;
        s.field = {200.0 * std::abs(u(rng)), 90.0 + 90.0 * u(rng), 180.0 * u(rng)};
        auto n = nitrogen14();
        n.quadrupole_axis = RVector3(u(rng), u(rng), 1.0);
        RMatrix3 a;
        for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = u(rng);
        a = 25.0 * (a + a.transpose()).eval();
        auto c = carbon13_first_shell();
        c.hyperfine_mhz = a;
        s.nuclei = {c, n};
        CHECK(hermiticity_defect(build_hamiltonian(s).mhz) < 1e-12);
    }

    SpinSystem dp;
    dp.nuclei = {nitrogen14()};
    dp.nuclei[0].hyperfine_mhz.setZero();
    CHECK(std::abs(build_hamiltonian(dp).mhz.trace()) < 1e-9);

    // linearity in B with D = A = P = 0 (nuclear Zeeman kept: it is also linear)
    SpinSystem lin;
    lin.d_mhz = 0.0;
    lin.nuclei = {carbon13_first_shell()};
    lin.nuclei[0].hyperfine_mhz.setZero();
    auto with_field = [&](const RVector3 &b) {
        SpinSystem s = lin;
        const double mag = b.norm();
        s.field = {mag, std::acos(b.z() / mag) * 180.0 / std::numbers::pi, std::atan2(b.y(), b.x()) * 180.0 / std::numbers::pi};
        return build_hamiltonian(s).mhz;
    };
    const RVector3 b1(10, -20, 30), b2(-5, 40, 15);
    CHECK((with_field(b1 + b2) - with_field(b1) - with_field(b2)).cwiseAbs().maxCoeff() < 1e-9);

    // rotation of B about z leaves the spectrum of an axial system unchanged
    SpinSystem rot = c13_140g();
    rot.nuclei.push_back(nitrogen14());
    const auto base = eigenvalues(build_hamiltonian(rot).mhz);
    for (double phi : {30.0, 77.0, 200.0}) {
        rot.field.phi_deg = phi;
        const auto ev = eigenvalues(build_hamiltonian(rot).mhz);
        for (std::size_t k = 0; k < ev.size(); ++k) CHECK(ev[k] == doctest::Approx(base[k]).epsilon(1e-11));
    }
}

TEST_CASE("system validation") {
    SpinSystem s = c13_140g();
    s.nuclei[0].hyperfine_mhz(0, 1) = 1.0;
    CHECK_THROWS_AS(build_hamiltonian(s), ConfigError);

    s = c13_140g();
    s.nuclei[0].quadrupole_mhz = 1.0;
    CHECK_THROWS_AS(build_hamiltonian(s), ConfigError);

    s = c13_140g();
    s.field.magnitude_gauss = -3.0;
    CHECK_THROWS_AS(build_hamiltonian(s), ConfigError);

    s = c13_140g();
    s.nuclei[0].nuclear_zeeman = false;
    const auto a = build_hamiltonian(s).mhz;
    const auto b = build_hamiltonian(c13_140g()).mhz;
    CHECK((a - b).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("axial tensor and presets") {
    const RMatrix3 t = axial_tensor(130, 228, unit_vector(90, 0));
    CHECK(t(0, 0) == doctest::Approx(130));
    CHECK(t(1, 1) == doctest::Approx(228));
    CHECK(t(2, 2) == doctest::Approx(228));
    CHECK(nitrogen14().spin.dim() == 3);
    CHECK(carbon13_first_shell().spin.dim() == 2);
    CHECK(electron_sz(c13_140g()).rows() == 6);
}
