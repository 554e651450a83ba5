#pragma once

#include <limits>
#include <span>
#include <vector>

#include "nvsim/trace.hpp"
#include "nvsim/types.hpp"

namespace nvsim {

struct PowerSpectrum {
    std::vector<double> freq_mhz;
    std::vector<double> power;
    double resolution_mhz = 0.0; ///< 1 / (N dt) of the unpadded record
};

enum class Window { none, hann };

struct FftOptions {
    Window window = Window::hann;
    double t_min_us = -std::numeric_limits<double>::infinity();
    double t_max_us = std::numeric_limits<double>::infinity();
    int zero_pad = 4; ///< transform length = zero_pad * N
};

/// One-sided power spectrum of the mean-subtracted (and windowed) samples in
/// [t_min, t_max]. Normalized so the bins sum to the energy of the windowed record.
PowerSpectrum fft_spectrum(const TimeTrace &trace, const FftOptions &opt = {});

struct Peak {
    double freq_mhz = 0.0;
    double power = 0.0;
    double prominence = 0.0;
};

/// Local maxima with prominence >= min_prominence, strongest first; positions
/// refined by a parabola through the three highest bins.
std::vector<Peak> find_peaks(const PowerSpectrum &ps, double min_prominence);

struct ExponentialFit {
    double amplitude0 = 0.0;
    double rate = 0.0;
    double rms_residual = 0.0;
};

/// Least-squares fit of a * exp(-r t): log-linear start, then Gauss-Newton.
ExponentialFit fit_exponential(std::span<const double> t, std::span<const double> amplitude);

} // namespace nvsim
