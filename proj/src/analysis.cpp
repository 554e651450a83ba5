#include "nvsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "nvsim/types.hpp"

namespace nvsim {

PowerSpectrum fft_spectrum(const TimeTrace &trace, const FftOptions &opt) {
    if (trace.t.size() != trace.signal.size()) throw ConfigError("fft: time and signal lengths differ");
    std::vector<double> t, x;
    for (std::size_t k = 0; k < trace.size(); ++k) {
        if (trace.t[k] >= opt.t_min_us - 1e-12 && trace.t[k] <= opt.t_max_us + 1e-12) {
            t.push_back(trace.t[k]);
            x.push_back(trace.signal[k]);
        }
    }
    if (x.size() < 8) throw ConfigError("fft: need at least 8 samples in the selected range");
    const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    if (!(dt > 0.0)) throw ConfigError("fft: time axis must be strictly increasing");
    for (std::size_t k = 1; k < t.size(); ++k)
        if (std::abs(t[k] - t[k - 1] - dt) > 1e-9) throw ConfigError("fft: samples are not uniformly spaced");
    if (opt.zero_pad < 1) throw ConfigError("fft: zero padding factor must be >= 1");

    const std::size_t n = x.size();
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
        double w = 1.0;
        if (opt.window == Window::hann)
            w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n - 1));
        x[k] = (x[k] - mean) * w;
    }
    const std::size_t m = n * static_cast<std::size_t>(opt.zero_pad);
    x.resize(m, 0.0);

    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, x);

    PowerSpectrum ps;
    ps.resolution_mhz = 1.0 / (static_cast<double>(n) * dt);
    const std::size_t half = m / 2;
    for (std::size_t k = 0; k <= half; ++k) {
        double p = std::norm(spec[k]) / static_cast<double>(m);
        const bool unpaired = k == 0 || (m % 2 == 0 && k == half);
        if (!unpaired) p *= 2.0;
        ps.freq_mhz.push_back(static_cast<double>(k) / (static_cast<double>(m) * dt));
        ps.power.push_back(p);
    }
    return ps;
}

std::vector<Peak> find_peaks(const PowerSpectrum &ps, double min_prominence) {
    if (min_prominence < 0.0) throw ConfigError("find_peaks: prominence must be >= 0");
    const auto &p = ps.power;
    const std::size_t n = p.size();
    std::vector<Peak> peaks;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!(p[i] > p[i - 1] && p[i] >= p[i + 1])) continue;
        // walk outwards until a higher sample; the lowest point on each side sets the base
        double left_min = p[i];
        for (std::size_t j = i; j-- > 0;) {
            if (p[j] > p[i]) break;
            left_min = std::min(left_min, p[j]);
        }
        double right_min = p[i];
        for (std::size_t j = i + 1; j < n; ++j) {
            if (p[j] > p[i]) break;
            right_min = std::min(right_min, p[j]);
        }
        const double prominence = p[i] - std::max(left_min, right_min);
        if (prominence < min_prominence) continue;

        const double a = p[i - 1], b = p[i], c = p[i + 1];
        const double denom = a - 2.0 * b + c;
        double shift = 0.0;
        if (denom < 0.0) shift = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
        const double df = ps.freq_mhz[i + 1] - ps.freq_mhz[i];
        peaks.push_back({ps.freq_mhz[i] + shift * df, b - 0.25 * (a - c) * shift, prominence});
    }
    std::stable_sort(peaks.begin(), peaks.end(), [](const Peak &l, const Peak &r) { return l.power > r.power; });
    return peaks;
}

ExponentialFit fit_exponential(std::span<const double> t, std::span<const double> amplitude) {
    if (t.size() != amplitude.size()) throw ConfigError("fit_exponential: length mismatch");
    if (t.size() < 3) throw ConfigError("fit_exponential: need at least 3 points");
    for (double a : amplitude)
        if (!(a > 0.0)) throw ConfigError("fit_exponential: amplitudes must be positive");

    const auto n = static_cast<double>(t.size());
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        const double y = std::log(amplitude[k]);
        st += t[k];
        sy += y;
        stt += t[k] * t[k];
        sty += t[k] * y;
    }
    const double det = n * stt - st * st;
    if (std::abs(det) < 1e-300) throw ConfigError("fit_exponential: time values are all equal");
    double rate = -(n * sty - st * sy) / det;
    double a0 = std::exp((sy + rate * st) / n);

    auto sse = [&](double a, double r) {
        double s = 0.0;
        for (std::size_t k = 0; k < t.size(); ++k) {
            const double e = a * std::exp(-r * t[k]) - amplitude[k];
            s += e * e;
        }
        return s;
    };
    double best = sse(a0, rate);
    for (int iter = 0; iter < 50; ++iter) {
        Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
        Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
        for (std::size_t k = 0; k < t.size(); ++k) {
            const double e = std::exp(-rate * t[k]);
            const Eigen::Vector2d g(e, -a0 * t[k] * e);
            jtj += g * g.transpose();
            jtr += g * (amplitude[k] - a0 * e);
        }
        const Eigen::Vector2d step = jtj.ldlt().solve(jtr);
        if (!step.allFinite()) break;
        double lambda = 1.0;
        bool improved = false;
        for (int half = 0; half < 30; ++half, lambda *= 0.5) {
            const double trial = sse(a0 + lambda * step[0], rate + lambda * step[1]);
            if (trial < best) {
                a0 += lambda * step[0];
                rate += lambda * step[1];
                best = trial;
                improved = true;
                break;
            }
        }
        if (!improved || step.norm() < 1e-15 * (1.0 + std::abs(a0) + std::abs(rate))) break;
    }
    return {a0, rate, std::sqrt(best / n)};
}

} // namespace nvsim
