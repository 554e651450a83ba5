#pragma once

#include <vector>

namespace nvsim {

/// Uniformly sampled (time in us, signal) pairs.
struct TimeTrace {
    std::vector<double> t;
    std::vector<double> signal;

    std::size_t size() const { return t.size(); }
};

} // namespace nvsim
