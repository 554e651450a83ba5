#pragma once

#include <span>
#include <vector>

#include "nvsim/types.hpp"

namespace nvsim {

/// Spin quantum number stored as 2S so half-integer spins stay exact.
struct SpinQuantum {
    int two_s = 1;

    int dim() const { return two_s + 1; }
    double value() const { return 0.5 * two_s; }
    /// m value of basis index k (basis ordered m = +S ... -S).
    double m(int k) const { return value() - k; }
};

struct SpinMatrices {
    CMatrix x, y, z, squared;
};

/// Angular-momentum matrices in the |S, m> basis, m descending.
SpinMatrices spin_matrices(SpinQuantum s);

/// Tensor-product embedding op -> 1 x ... x op x ... x 1, with `op` acting on `slot`.
/// Throws std::invalid_argument when op does not match dims[slot].
CMatrix embed(const CMatrix &op, std::size_t slot, std::span<const int> dims);

/// Product of two operators on different slots, embedded in one pass.
CMatrix embed_pair(const CMatrix &a, std::size_t slot_a, const CMatrix &b, std::size_t slot_b,
                   std::span<const int> dims);

inline CMatrix commutator(const CMatrix &a, const CMatrix &b) { return a * b - b * a; }

std::size_t product_dim(std::span<const int> dims);

/// Mixed-radix digits of a product-basis index (slot 0 most significant).
std::vector<int> basis_digits(std::size_t index, std::span<const int> dims);

} // namespace nvsim
