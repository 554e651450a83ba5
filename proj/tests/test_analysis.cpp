#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nvsim/analysis.hpp"

using namespace nvsim;

namespace {

TimeTrace tone(double f_mhz, double dt, int n, double amp = 1.0, double offset = 0.0, double phase = 0.0) {
    TimeTrace tr;
    for (int k = 0; k < n; ++k) {
        tr.t.push_back(k * dt);
        tr.signal.push_back(offset + amp * std::cos(2 * std::numbers::pi * f_mhz * k * dt + phase));
    }
    return tr;
}

double energy(const TimeTrace &tr) {
    double mean = 0.0;
    for (double v : tr.signal) mean += v;
    mean /= static_cast<double>(tr.size());
    double e = 0.0;
    for (double v : tr.signal) e += (v - mean) * (v - mean);
    return e;
}

double total(const PowerSpectrum &ps) {
    double s = 0.0;
    for (double p : ps.power) s += p;
    return s;
}

} // namespace

TEST_CASE("a 12 MHz tone sampled every 4 ns") {
    const auto tr = tone(12.0, 0.004, 500);
    const auto ps = fft_spectrum(tr);
    CHECK(ps.resolution_mhz == doctest::Approx(0.5));
    CHECK(ps.freq_mhz.back() <= 1.0 / (2 * 0.004) + 1e-9);
    const auto peaks = find_peaks(ps, 0.01 * *std::max_element(ps.power.begin(), ps.power.end()));
    REQUIRE(peaks.size() == 1);
    CHECK(std::abs(peaks[0].freq_mhz - 12.0) <= ps.resolution_mhz);
}

TEST_CASE("Parseval and offset invariance") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    TimeTrace tr;
    for (int k = 0; k < 301; ++k) {
        tr.t.push_back(0.01 * k);
        tr.signal.push_back(g(rng));
    }
    for (int pad : {1, 4}) {
        FftOptions opt;
        opt.window = Window::none;
        opt.zero_pad = pad;
        CHECK(total(fft_spectrum(tr, opt)) == doctest::Approx(energy(tr)).epsilon(1e-6));
    }
    TimeTrace shifted = tr;
    for (auto &v : shifted.signal) v += 17.0;
    const auto a = fft_spectrum(tr), b = fft_spectrum(shifted);
    for (std::size_t k = 0; k < a.power.size(); ++k) CHECK(a.power[k] == doctest::Approx(b.power[k]).epsilon(1e-9).scale(1e-12));
}

TEST_CASE("record selection and input checks") {
    const auto tr = tone(12.0, 0.004, 1000);
    FftOptions opt;
    opt.t_max_us = 1.5;
    CHECK(fft_spectrum(tr, opt).resolution_mhz == doctest::Approx(1.0 / (376 * 0.004)));
    opt.t_min_us = 1.0;
    opt.t_max_us = 1.02;
    CHECK_THROWS_AS(fft_spectrum(tr, opt), ConfigError);
    TimeTrace uneven = tone(1.0, 0.01, 20);
    uneven.t[5] += 0.003;
    CHECK_THROWS_AS(fft_spectrum(uneven), ConfigError);
}

TEST_CASE("peak finding") {
    SUBCASE("two tones five bins apart") {
        const double dt = 0.004;
        const int n = 1000; // 0.25 MHz bins
        TimeTrace tr = tone(10.0, dt, n);
        const auto other = tone(11.25, dt, n);
        for (int k = 0; k < n; ++k) tr.signal[static_cast<std::size_t>(k)] += other.signal[static_cast<std::size_t>(k)];
        const auto ps = fft_spectrum(tr);
        const auto peaks = find_peaks(ps, 0.05 * *std::max_element(ps.power.begin(), ps.power.end()));
        REQUIRE(peaks.size() == 2);
        CHECK(peaks[0].power == doctest::Approx(peaks[1].power).epsilon(0.05));
        CHECK(peaks[0].power >= peaks[1].power);
    }
    SUBCASE("off-bin tones recovered to a fifth of a bin") {
        std::mt19937_64 rng(99);
        std::uniform_real_distribution<double> f(2.0, 100.0), ph(0.0, 6.28);
        int good = 0;
        for (int trial = 0; trial < 100; ++trial) {
            const double freq = f(rng);
            const auto ps = fft_spectrum(tone(freq, 0.004, 375, 1.0, 0.0, ph(rng)));
            const auto peaks = find_peaks(ps, 0.0);
            if (!peaks.empty() && std::abs(peaks[0].freq_mhz - freq) < 0.2 * ps.resolution_mhz) ++good;
        }
        CHECK(good == 100);
    }
    CHECK_THROWS_AS(find_peaks(PowerSpectrum{}, -1.0), ConfigError);
}

TEST_CASE("exponential fit") {
    std::vector<double> t, a, flat;
    for (int k = 0; k < 20; ++k) {
        t.push_back(0.25 * k);
        a.push_back(0.8 * std::exp(-1.7 * 0.25 * k));
        flat.push_back(0.5);
    }
    const auto f = fit_exponential(t, a);
    CHECK(f.amplitude0 == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(f.rate == doctest::Approx(1.7).epsilon(1e-12));
    CHECK(f.rms_residual < 1e-9);

    const auto z = fit_exponential(t, flat);
    CHECK(std::abs(z.rate) < 1e-9);

    a[3] = 0.0;
    CHECK_THROWS_AS(fit_exponential(t, a), ConfigError);
    CHECK_THROWS_AS(fit_exponential(std::span(t).first(2), std::span(flat).first(2)), ConfigError);
}
