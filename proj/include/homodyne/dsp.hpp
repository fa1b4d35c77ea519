#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "homodyne/constants.hpp"
#include "homodyne/errors.hpp"
#include "homodyne/fft.hpp"
#include "homodyne/spectrum.hpp"
#include "homodyne/trace.hpp"

namespace homodyne {

/// 10*log10 of a power ratio.
inline double to_db(double ratio) {
    if (!(ratio > 0)) throw DomainError("to_db: ratio must be positive");
    return 10.0 * std::log10(ratio);
}

inline double from_db(double db) { return std::pow(10.0, db / 10.0); }

/// dB difference of two spectra interpolated at f.
inline double db_diff(const Spectrum& a, const Spectrum& b, double f) {
    const double va = psd_at(a, f);
    const double vb = psd_at(b, f);
    if (!(va > 0) || !(vb > 0)) throw DomainError("db_diff: nonpositive PSD at f");
    return to_db(va / vb);
}

/// Unit-area Gaussian smoothing along frequency. Kernel is truncated at
/// 4 sigma and renormalized per output bin over the in-support weights, so
/// constants pass through exactly everywhere including the edges.
inline Spectrum gaussian_smooth(const Spectrum& spec, double fwhm) {
    spec.validate();
    if (spec.freqs.size() < 2) return spec;
    const double df = spec.freqs[1] - spec.freqs[0];
    if (!(fwhm >= df)) throw DomainError("gaussian_smooth: fwhm below bin spacing");

    const double sigma = fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    const int half = std::max(1, static_cast<int>(std::ceil(4.0 * sigma / df)));
    std::vector<double> kernel(2 * half + 1);
    for (int k = -half; k <= half; ++k) {
        const double u = static_cast<double>(k) * df / sigma;
        kernel[static_cast<std::size_t>(k + half)] = std::exp(-0.5 * u * u);
    }

    Spectrum out = spec;
    const std::size_t n = spec.psd.size();
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        double wsum = 0.0;
        const int lo = std::max<int>(0, static_cast<int>(i) - half);
        const int hi = std::min<int>(static_cast<int>(n) - 1, static_cast<int>(i) + half);
        for (int j = lo; j <= hi; ++j) {
            const double w = kernel[static_cast<std::size_t>(j - static_cast<int>(i) + half)];
            acc += w * spec.psd[static_cast<std::size_t>(j)];
            wsum += w;
        }
        out.psd[i] = acc / wsum;
    }
    return out;
}

/// Averaged-periodogram PSD estimate with spectrum-analyzer semantics:
/// Hann-windowed Welch segments sized so the bin spacing is at most rbw/2,
/// 50% overlap, window-power (ENBW) normalization so a white input of known
/// density reads back its density. The video bandwidth is emulated as a
/// post-detection Gaussian smoothing over sweep bins when vbw < rbw.
inline Spectrum estimate_psd(const TimeTrace& trace, double rbw, double vbw,
                             int n_averages) {
    if (!(rbw > 0)) throw DomainError("estimate_psd: rbw must be positive");
    if (!(vbw > 0)) throw DomainError("estimate_psd: vbw must be positive");
    if (n_averages < 1) throw DomainError("estimate_psd: n_averages must be >= 1");
    const double fs = trace.sample_rate();

    std::size_t nseg = 1;
    while (fs / static_cast<double>(nseg) > rbw / 2.0) nseg <<= 1;
    const std::size_t hop = nseg / 2;
    const std::size_t n = trace.size();
    if (n < nseg + (static_cast<std::size_t>(n_averages) - 1) * hop)
        throw InsufficientData("estimate_psd: trace too short for requested averages");
    const std::size_t n_segments = (n - nseg) / hop + 1;

    // Periodic Hann window.
    std::vector<double> window(nseg);
    double wpow = 0.0;
    for (std::size_t i = 0; i < nseg; ++i) {
        window[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) /
                                          static_cast<double>(nseg)));
        wpow += window[i] * window[i];
    }
    const double scale = 1.0 / (fs * wpow);

    RfftPlan plan(nseg);
    const std::size_t nbins = plan.bins();
    std::vector<double> acc(nbins, 0.0);
    const auto& x = trace.samples();
    for (std::size_t s = 0; s < n_segments; ++s) {
        const std::size_t off = s * hop;
        double* in = plan.input();
        for (std::size_t i = 0; i < nseg; ++i) in[i] = x[off + i] * window[i];
        const auto& bins = plan.execute();
        for (std::size_t k = 0; k < nbins; ++k) acc[k] += std::norm(bins[k]);
    }

    Spectrum out;
    out.freqs.resize(nbins);
    out.psd.resize(nbins);
    const double df = fs / static_cast<double>(nseg);
    for (std::size_t k = 0; k < nbins; ++k) {
        out.freqs[k] = df * static_cast<double>(k);
        const bool interior = (k != 0) && (k != nbins - 1 || nseg % 2 != 0);
        const double sided = interior ? 2.0 : 1.0;
        out.psd[k] = sided * scale * acc[k] / static_cast<double>(n_segments);
    }
    out.rbw = rbw;
    out.vbw = vbw;
    out.n_averages = static_cast<int>(n_segments);
    out.units = SpectrumUnits::v2_per_hz;

    if (vbw < rbw) {
        const double fwhm = rbw * std::sqrt(rbw / vbw);
        if (fwhm >= df) out = gaussian_smooth(out, fwhm);
        out.vbw = vbw;
        out.rbw = rbw;
    }
    return out;
}

/// Mean PSD across the bins inside the closed band [f_lo, f_hi].
inline double band_average(const Spectrum& spec, double f_lo, double f_hi) {
    spec.validate();
    if (!(f_lo <= f_hi)) throw DomainError("band_average: inverted band");
    if (f_lo < spec.f_min() || f_hi > spec.f_max())
        throw BandOutOfRange("band_average: band outside spectrum support");
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < spec.freqs.size(); ++i) {
        if (spec.freqs[i] < f_lo || spec.freqs[i] > f_hi) continue;
        acc += spec.psd[i];
        ++count;
    }
    if (count == 0) throw BandOutOfRange("band_average: no bins in band");
    return acc / static_cast<double>(count);
}

/// Integrated PSD over [f_lo, f_hi] (trapezoid, interpolated edges). For a
/// tone this recovers A^2/2 when the band covers the windowed lobe.
inline double band_power(const Spectrum& spec, double f_lo, double f_hi) {
    spec.validate();
    if (!(f_lo < f_hi)) throw DomainError("band_power: empty band");
    if (f_lo < spec.f_min() || f_hi > spec.f_max())
        throw BandOutOfRange("band_power: band outside spectrum support");
    double integral = 0.0;
    double f_prev = f_lo;
    double v_prev = psd_at(spec, f_lo);
    for (std::size_t i = 0; i < spec.freqs.size(); ++i) {
        const double f = spec.freqs[i];
        if (f <= f_lo) continue;
        if (f >= f_hi) break;
        integral += 0.5 * (v_prev + spec.psd[i]) * (f - f_prev);
        f_prev = f;
        v_prev = spec.psd[i];
    }
    integral += 0.5 * (v_prev + psd_at(spec, f_hi)) * (f_hi - f_prev);
    return integral;
}

/// v2_per_hz -> dBm referred to the power captured in one RBW (Eq.-2 style
/// reading into the given input impedance).
inline Spectrum to_dbm_in_rbw(const Spectrum& spec, double impedance) {
    spec.validate();
    if (spec.units != SpectrumUnits::v2_per_hz)
        throw DomainError("to_dbm_in_rbw: input must be v2_per_hz");
    if (!(impedance > 0)) throw DomainError("to_dbm_in_rbw: impedance must be positive");
    Spectrum out = spec;
    for (std::size_t i = 0; i < out.psd.size(); ++i) {
        const double watts = 2.0 * spec.psd[i] * spec.rbw / impedance;
        if (!(watts > 0)) throw DomainError("to_dbm_in_rbw: nonpositive PSD");
        out.psd[i] = 10.0 * std::log10(watts / 1e-3);
    }
    out.units = SpectrumUnits::dbm_in_rbw;
    return out;
}

inline Spectrum from_dbm_in_rbw(const Spectrum& spec, double impedance) {
    spec.validate();
    if (spec.units != SpectrumUnits::dbm_in_rbw)
        throw DomainError("from_dbm_in_rbw: input must be dbm_in_rbw");
    Spectrum out = spec;
    for (std::size_t i = 0; i < out.psd.size(); ++i) {
        const double watts = 1e-3 * std::pow(10.0, spec.psd[i] / 10.0);
        out.psd[i] = watts * impedance / (2.0 * spec.rbw);
    }
    out.units = SpectrumUnits::v2_per_hz;
    return out;
}

}  // namespace homodyne
