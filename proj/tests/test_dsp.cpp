#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "homodyne/dsp.hpp"
#include "homodyne/rng.hpp"

using namespace homodyne;
using Catch::Approx;

namespace {

TimeTrace white_trace(double fs, std::size_t n, double sigma, std::uint64_t seed) {
    NormalSampler gauss(seed);
    std::vector<double> x(n);
    for (double& v : x) v = sigma * gauss();
    return TimeTrace(std::move(x), 1.0 / fs, TraceUnits::volts, seed);
}

Spectrum flat_spectrum(double level, std::size_t bins = 101, double df = 1e5) {
    Spectrum s;
    for (std::size_t i = 0; i < bins; ++i) {
        s.freqs.push_back(df * static_cast<double>(i));
        s.psd.push_back(level);
    }
    s.rbw = 2.0 * df;
    s.vbw = 2.0 * df;
    return s;
}

}  // namespace

TEST_CASE("white noise reads back its density") {
    const double fs = 50e6;
    const double sigma = 2.5e-4;
    const double density = 2.0 * sigma * sigma / fs;  // single-sided V^2/Hz
    const TimeTrace trace = white_trace(fs, 1 << 17, sigma, 42);
    const Spectrum spec = estimate_psd(trace, 400e3, 400e3, 100);
    const double mean = band_average(spec, spec.f_min(), spec.f_max());
    CHECK(mean == Approx(density).epsilon(0.02));
}

TEST_CASE("estimator is unbiased on white noise across seeds") {
    const double fs = 50e6;
    const double sigma = 1e-4;
    const double density = 2.0 * sigma * sigma / fs;
    double acc = 0.0;
    const int n_seeds = 20;
    for (int s = 0; s < n_seeds; ++s) {
        const TimeTrace trace = white_trace(fs, 1 << 16, sigma, 1000 + s);
        const Spectrum spec = estimate_psd(trace, 400e3, 400e3, 50);
        acc += band_average(spec, spec.f_min(), spec.f_max()) / density - 1.0;
    }
    CHECK(std::abs(acc / n_seeds) < 0.01);
}

TEST_CASE("tone integrates to its mean-square power") {
    const double fs = 100e6;
    const std::size_t n = 1 << 17;
    const double amp = 1e-3;
    // rbw 200 kHz -> 1024-point segments, 97.65625 kHz bins; put the tone
    // exactly on bin 100 so the windowed lobe sits symmetrically.
    const double df = fs / 1024.0;
    const double f0 = 100.0 * df;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = amp * std::sin(2.0 * kPi * f0 * static_cast<double>(i) / fs);
    const Spectrum spec =
        estimate_psd(TimeTrace(std::move(x), 1.0 / fs, TraceUnits::volts, 0), 200e3, 200e3, 100);
    const double power = band_power(spec, f0 - 5.0 * df, f0 + 5.0 * df);
    CHECK(power == Approx(amp * amp / 2.0).epsilon(0.02));
}

TEST_CASE("estimate_psd rejects too-short traces") {
    const TimeTrace trace = white_trace(10e6, 4096, 1e-4, 7);
    CHECK_THROWS_AS(estimate_psd(trace, 40e3, 40e3, 100), InsufficientData);
}

TEST_CASE("estimate_psd is deterministic") {
    const TimeTrace trace = white_trace(50e6, 1 << 15, 1e-4, 99);
    const Spectrum a = estimate_psd(trace, 400e3, 400e3, 30);
    const Spectrum b = estimate_psd(trace, 400e3, 400e3, 30);
    REQUIRE(a.psd.size() == b.psd.size());
    for (std::size_t i = 0; i < a.psd.size(); ++i) CHECK(a.psd[i] == b.psd[i]);
}

TEST_CASE("doubling averages shrinks per-bin scatter by about sqrt(2)") {
    const double fs = 50e6;
    const double sigma = 1e-4;
    const int n_trials = 20;
    auto per_bin_std = [&](int navg, std::size_t n, std::uint64_t base) {
        std::vector<Spectrum> specs;
        for (int t = 0; t < n_trials; ++t)
            specs.push_back(
                estimate_psd(white_trace(fs, n, sigma, base + t), 400e3, 400e3, navg));
        const std::size_t bins = specs.front().psd.size();
        double acc = 0.0;
        for (std::size_t k = 0; k < bins; ++k) {
            double mean = 0.0, var = 0.0;
            for (const auto& s : specs) mean += s.psd[k];
            mean /= n_trials;
            for (const auto& s : specs) var += (s.psd[k] - mean) * (s.psd[k] - mean);
            acc += std::sqrt(var / (n_trials - 1));
        }
        return acc / static_cast<double>(bins);
    };
    // navg=50 needs 6528 samples, navg=100 needs 12928; give each headroom.
    const double ratio = per_bin_std(50, 6656, 5000) / per_bin_std(100, 13056, 9000);
    CHECK(ratio == Approx(std::sqrt(2.0)).epsilon(0.15));
}

TEST_CASE("video bandwidth smoothing preserves flat spectra and cuts scatter") {
    const double fs = 50e6;
    const TimeTrace trace = white_trace(fs, 1 << 16, 1e-4, 31);
    const Spectrum raw = estimate_psd(trace, 400e3, 400e3, 50);
    const Spectrum smoothed = estimate_psd(trace, 400e3, 10e3, 50);
    REQUIRE(raw.psd.size() == smoothed.psd.size());

    auto scatter = [](const Spectrum& s) {
        double mean = 0.0, var = 0.0;
        for (double v : s.psd) mean += v;
        mean /= static_cast<double>(s.psd.size());
        for (double v : s.psd) var += (v - mean) * (v - mean);
        return std::sqrt(var / static_cast<double>(s.psd.size())) / mean;
    };
    CHECK(scatter(smoothed) < 0.4 * scatter(raw));
    CHECK(band_average(smoothed, 1e6, 24e6) ==
          Approx(band_average(raw, 1e6, 24e6)).epsilon(0.01));
    CHECK(smoothed.vbw == 10e3);
}

TEST_CASE("gaussian_smooth basics") {
    SECTION("identity on constants") {
        const Spectrum flat = flat_spectrum(4.2e-15);
        const Spectrum out = gaussian_smooth(flat, 5e5);
        for (std::size_t i = 0; i < out.psd.size(); ++i)
            CHECK(out.psd[i] == Approx(4.2e-15).epsilon(1e-12));
    }

    SECTION("delta bin becomes a Gaussian of the requested width") {
        Spectrum spike = flat_spectrum(0.0);
        spike.psd[50] = 1.0;
        const double df = spike.freqs[1] - spike.freqs[0];
        const double fwhm = 5.0 * df;
        const Spectrum out = gaussian_smooth(spike, fwhm);
        const double half = out.psd[50] / 2.0;
        int above = 0;
        for (double v : out.psd) above += v >= half ? 1 : 0;
        CHECK(above == 5);  // fwhm/df = 5 bins, +/- one bin
    }

    SECTION("commutes with scalar multiplication, preserves nonnegativity") {
        NormalSampler gauss(4);
        Spectrum ragged = flat_spectrum(1e-15);
        for (double& v : ragged.psd) v *= 1.0 + 0.5 * std::abs(gauss());
        const Spectrum s1 = gaussian_smooth(ragged, 4e5);
        Spectrum scaled = ragged;
        for (double& v : scaled.psd) v *= 7.25;
        const Spectrum s2 = gaussian_smooth(scaled, 4e5);
        for (std::size_t i = 0; i < s1.psd.size(); ++i) {
            CHECK(s2.psd[i] == Approx(7.25 * s1.psd[i]).epsilon(1e-12));
            CHECK(s1.psd[i] >= 0.0);
        }
    }

    SECTION("integrated power preserved away from the edges") {
        Spectrum bump = flat_spectrum(0.0, 201);
        const double df = bump.freqs[1] - bump.freqs[0];
        for (std::size_t i = 0; i < bump.psd.size(); ++i) {
            const double u = (static_cast<double>(i) - 100.0) / 15.0;
            bump.psd[i] = std::exp(-0.5 * u * u);
        }
        const Spectrum out = gaussian_smooth(bump, 1.5e6 / 3.0);
        const double before = band_power(bump, 20.0 * df, 180.0 * df);
        const double after = band_power(out, 20.0 * df, 180.0 * df);
        CHECK(after == Approx(before).epsilon(0.005));
    }

    SECTION("paper-style kernel width on a 300 kHz-RBW grid") {
        Spectrum s = flat_spectrum(2e-15, 512, 1.35e5);
        const Spectrum out = gaussian_smooth(s, 1.5e6);
        CHECK(out.psd[200] == Approx(2e-15).epsilon(1e-12));
    }

    SECTION("rejects sub-bin kernels") {
        const Spectrum flat = flat_spectrum(1e-15);
        CHECK_THROWS_AS(gaussian_smooth(flat, 1e4), DomainError);
    }
}

TEST_CASE("band_average behavior") {
    const Spectrum flat = flat_spectrum(3.3e-16);

    SECTION("constant spectrum returns the constant") {
        CHECK(band_average(flat, 1e6, 9e6) == Approx(3.3e-16).epsilon(1e-12));
    }

    SECTION("single-bin band returns that bin") {
        Spectrum s = flat;
        s.psd[37] = 9.9e-16;
        CHECK(band_average(s, s.freqs[37], s.freqs[37]) == Approx(9.9e-16));
    }

    SECTION("stable under bin refinement for smooth spectra") {
        auto shape = [](double f) { return 1e-15 / (1.0 + f / 5e6); };
        Spectrum coarse, fine;
        for (int i = 0; i <= 100; ++i) {
            coarse.freqs.push_back(1e5 * i);
            coarse.psd.push_back(shape(1e5 * i));
        }
        for (int i = 0; i <= 200; ++i) {
            fine.freqs.push_back(5e4 * i);
            fine.psd.push_back(shape(5e4 * i));
        }
        coarse.rbw = fine.rbw = 2e5;
        coarse.vbw = fine.vbw = 2e5;
        const double a = band_average(coarse, 1e6, 9e6);
        const double b = band_average(fine, 1e6, 9e6);
        CHECK(std::abs(a - b) / a < 0.005);
    }

    SECTION("band outside support raises") {
        CHECK_THROWS_AS(band_average(flat, 9e6, 20e6), BandOutOfRange);
    }
}

TEST_CASE("decibel conversions") {
    CHECK(to_db(2.0) == Approx(3.0102999566398120).epsilon(1e-12));
    CHECK(to_db(1.0) == 0.0);
    CHECK(to_db(std::pow(10.0, 0.9)) == Approx(9.0).epsilon(1e-12));
    CHECK_THROWS_AS(to_db(0.0), DomainError);
    CHECK_THROWS_AS(to_db(-1.0), DomainError);

    const Spectrum a = flat_spectrum(2e-15);
    const Spectrum b = flat_spectrum(1e-15);
    CHECK(db_diff(a, b, 4.85e6) == Approx(3.0102999566398120).epsilon(1e-12));
}

TEST_CASE("dBm conversion round trip") {
    NormalSampler gauss(11);
    Spectrum s = flat_spectrum(1e-15);
    for (double& v : s.psd) v *= 1.0 + 0.3 * std::abs(gauss());
    const Spectrum dbm = to_dbm_in_rbw(s, 50.0);
    CHECK(dbm.units == SpectrumUnits::dbm_in_rbw);
    const Spectrum back = from_dbm_in_rbw(dbm, 50.0);
    for (std::size_t i = 0; i < s.psd.size(); ++i)
        CHECK(back.psd[i] == Approx(s.psd[i]).epsilon(1e-12));
}
