#include "nvsim/hamiltonian.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace nvsim {

namespace {

constexpr double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

const CMatrix &component(const SpinMatrices &s, int axis) {
    switch (axis) {
    case 0: return s.x;
    case 1: return s.y;
    default: return s.z;
    }
}

} // namespace

RVector3 unit_vector(double theta_deg, double phi_deg) {
    const double th = deg2rad(theta_deg);
    const double ph = deg2rad(phi_deg);
    return {std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
}

RVector3 field_vector(double magnitude_gauss, double theta_deg, double phi_deg) {
    if (magnitude_gauss < 0.0) throw ConfigError("field magnitude must be >= 0 Gauss");
    return magnitude_gauss * unit_vector(theta_deg, phi_deg);
}

RMatrix3 axial_tensor(double parallel, double perpendicular, const RVector3 &axis) {
    const RVector3 u = axis.normalized();
    return perpendicular * RMatrix3::Identity() + (parallel - perpendicular) * (u * u.transpose());
}

Nucleus carbon13_first_shell() {
    Nucleus n;
    n.label = "13C";
    n.spin = SpinQuantum{1};
    n.hyperfine_mhz = axial_tensor(kC13ParallelMhz, kC13PerpendicularMhz);
    n.gyromagnetic_mhz_per_gauss = kGammaC13MhzPerGauss;
    return n;
}

Nucleus nitrogen14() {
    Nucleus n;
    n.label = "14N";
    n.spin = SpinQuantum{2};
    n.hyperfine_mhz = RMatrix3::Identity() * kN14HyperfineMhz;
    n.quadrupole_mhz = kN14QuadrupoleMhz;
    n.gyromagnetic_mhz_per_gauss = kGammaN14MhzPerGauss;
    return n;
}

std::vector<int> SpinSystem::dims() const {
    std::vector<int> d{electron.dim()};
    for (const auto &n : nuclei) d.push_back(n.spin.dim());
    return d;
}

std::size_t SpinSystem::dim() const {
    const auto d = dims();
    return product_dim(d);
}

void SpinSystem::validate() const {
    if (electron.two_s < 1) throw ConfigError("electron spin must be >= 1/2");
    if (field.magnitude_gauss < 0.0 || !std::isfinite(field.magnitude_gauss))
        throw ConfigError("field magnitude must be a finite value >= 0 Gauss");
    for (std::size_t k = 0; k < nuclei.size(); ++k) {
        const auto &n = nuclei[k];
        std::ostringstream where;
        where << "nucleus " << k << " (" << n.label << ")";
        if (n.spin.two_s < 1) throw ConfigError(where.str() + ": spin must be >= 1/2");
        if ((n.hyperfine_mhz - n.hyperfine_mhz.transpose()).cwiseAbs().maxCoeff() > 1e-9)
            throw ConfigError(where.str() + ": hyperfine tensor must be symmetric");
        if (n.spin.two_s < 2 && n.quadrupole_mhz != 0.0)
            throw ConfigError(where.str() + ": quadrupole coupling requires I >= 1");
        if (n.quadrupole_axis.norm() == 0.0)
            throw ConfigError(where.str() + ": quadrupole axis must be non-zero");
    }
}

HamiltonianMatrix build_hamiltonian(const SpinSystem &sys) {
    sys.validate();
    const auto dims = sys.dims();
    const std::size_t n = product_dim(dims);
    const RVector3 b = field_vector(sys.field);
    const auto s = spin_matrices(sys.electron);
    const CMatrix id = CMatrix::Identity(n, n);

    const double ss = sys.electron.value() * (sys.electron.value() + 1.0);
    CMatrix h = sys.d_mhz * (embed(s.z * s.z, 0, dims) - id * (ss / 3.0));

    // electron Zeeman: mu_B B . g . S
    const RVector3 bg = kBohrMhzPerGauss * (b.transpose() * sys.g_tensor).transpose();
    for (int a = 0; a < 3; ++a)
        if (bg[a] != 0.0) h += bg[a] * embed(component(s, a), 0, dims);

    for (std::size_t k = 0; k < sys.nuclei.size(); ++k) {
        const auto &nuc = sys.nuclei[k];
        const std::size_t slot = k + 1;
        const auto in = spin_matrices(nuc.spin);
        for (int a = 0; a < 3; ++a)
            for (int c = 0; c < 3; ++c)
                if (nuc.hyperfine_mhz(a, c) != 0.0)
                    h += nuc.hyperfine_mhz(a, c) * embed_pair(component(s, a), 0, component(in, c), slot, dims);
        if (nuc.quadrupole_mhz != 0.0) {
            const RVector3 u = nuc.quadrupole_axis.normalized();
            const CMatrix iu = u[0] * in.x + u[1] * in.y + u[2] * in.z;
            const double ii = nuc.spin.value() * (nuc.spin.value() + 1.0);
            const CMatrix term = iu * iu - CMatrix::Identity(nuc.spin.dim(), nuc.spin.dim()) * (ii / 3.0);
            h += nuc.quadrupole_mhz * embed(term, slot, dims);
        }
        if (nuc.nuclear_zeeman && nuc.gyromagnetic_mhz_per_gauss != 0.0)
            for (int a = 0; a < 3; ++a)
                if (b[a] != 0.0)
                    h -= nuc.gyromagnetic_mhz_per_gauss * b[a] * embed(component(in, a), slot, dims);
    }
    // symmetrize away rounding so downstream Hermitian solvers see exact symmetry
    h = 0.5 * (h + h.adjoint()).eval();
    return {h, dims};
}

CMatrix electron_sz(const SpinSystem &sys) { return spin_component(sys, 0, 2); }

CMatrix spin_component(const SpinSystem &sys, std::size_t slot, int axis) {
    const auto dims = sys.dims();
    if (slot >= dims.size()) throw ConfigError("spin_component: slot out of range");
    const SpinQuantum q = slot == 0 ? sys.electron : sys.nuclei[slot - 1].spin;
    return embed(component(spin_matrices(q), axis), slot, dims);
}

SpinSystem without_hyperfine(SpinSystem sys) {
    for (auto &n : sys.nuclei) n.hyperfine_mhz.setZero();
    return sys;
}

} // namespace nvsim
