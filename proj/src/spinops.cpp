#include "nvsim/spinops.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace nvsim {

SpinMatrices spin_matrices(SpinQuantum s) {
    if (s.two_s < 0) throw std::invalid_argument("spin_matrices: negative 2S");
    const int d = s.dim();
    const double sv = s.value();
    CMatrix plus = CMatrix::Zero(d, d);
    CMatrix z = CMatrix::Zero(d, d);
    for (int k = 0; k < d; ++k) {
        z(k, k) = s.m(k);
        // <m+1| S+ |m> sits one row above the diagonal
        if (k > 0) {
            const double m = s.m(k);
            plus(k - 1, k) = std::sqrt(sv * (sv + 1.0) - m * (m + 1.0));
        }
    }
    const CMatrix minus = plus.adjoint();
    SpinMatrices out;
    out.x = 0.5 * (plus + minus);
    out.y = cplx(0.0, -0.5) * (plus - minus);
    out.z = z;
    out.squared = CMatrix::Identity(d, d) * (sv * (sv + 1.0));
    return out;
}

std::size_t product_dim(std::span<const int> dims) {
    std::size_t n = 1;
    for (int d : dims) n *= static_cast<std::size_t>(d);
    return n;
}

std::vector<int> basis_digits(std::size_t index, std::span<const int> dims) {
    std::vector<int> digits(dims.size());
    for (std::size_t k = dims.size(); k-- > 0;) {
        digits[k] = static_cast<int>(index % dims[k]);
        index /= dims[k];
    }
    return digits;
}

namespace {

void check_slot(const CMatrix &op, std::size_t slot, std::span<const int> dims) {
    if (slot >= dims.size() || op.rows() != dims[slot] || op.cols() != dims[slot]) {
        std::ostringstream msg;
        msg << "embed: operator " << op.rows() << "x" << op.cols() << " does not fit slot " << slot
            << " of dims [";
        for (std::size_t k = 0; k < dims.size(); ++k) msg << (k ? "," : "") << dims[k];
        msg << "]";
        throw std::invalid_argument(msg.str());
    }
}

// Kronecker structure: index = (outer * d + local) * inner + rest
CMatrix embed_impl(std::span<const CMatrix *const> ops, std::span<const int> dims) {
    const std::size_t n = product_dim(dims);
    CMatrix out = CMatrix::Zero(n, n);
    for (std::size_t row = 0; row < n; ++row) {
        const auto rd = basis_digits(row, dims);
        for (std::size_t col = 0; col < n; ++col) {
            const auto cd = basis_digits(col, dims);
            cplx v = 1.0;
            for (std::size_t k = 0; k < dims.size() && v != cplx(0.0); ++k) {
                if (ops[k])
                    v *= (*ops[k])(rd[k], cd[k]);
                else if (rd[k] != cd[k])
                    v = 0.0;
            }
            out(row, col) = v;
        }
    }
    return out;
}

} // namespace

CMatrix embed(const CMatrix &op, std::size_t slot, std::span<const int> dims) {
    check_slot(op, slot, dims);
    std::vector<const CMatrix *> ops(dims.size(), nullptr);
    ops[slot] = &op;
    return embed_impl(ops, dims);
}

CMatrix embed_pair(const CMatrix &a, std::size_t slot_a, const CMatrix &b, std::size_t slot_b,
                   std::span<const int> dims) {
    check_slot(a, slot_a, dims);
    check_slot(b, slot_b, dims);
    if (slot_a == slot_b) return embed(a * b, slot_a, dims);
    std::vector<const CMatrix *> ops(dims.size(), nullptr);
    ops[slot_a] = &a;
    ops[slot_b] = &b;
    return embed_impl(ops, dims);
}

} // namespace nvsim
