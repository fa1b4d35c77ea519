#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "homodyne/errors.hpp"

namespace homodyne {

enum class SpectrumUnits { v2_per_hz, dbm_in_rbw };

inline const char* to_string(SpectrumUnits u) {
    return u == SpectrumUnits::v2_per_hz ? "v2_per_hz" : "dbm_in_rbw";
}

inline SpectrumUnits spectrum_units_from_string(const std::string& s) {
    if (s == "v2_per_hz") return SpectrumUnits::v2_per_hz;
    if (s == "dbm_in_rbw") return SpectrumUnits::dbm_in_rbw;
    throw ParseError("unknown spectrum units: " + s);
}

/// Single-sided spectrum on a strictly increasing frequency grid, with the
/// acquisition settings it was produced under.
struct Spectrum {
    std::vector<double> freqs;  // Hz
    std::vector<double> psd;    // value per units tag
    double rbw = 0.0;           // Hz
    double vbw = 0.0;           // Hz
    int n_averages = 1;
    SpectrumUnits units = SpectrumUnits::v2_per_hz;

    void validate() const {
        if (freqs.size() != psd.size())
            throw ConfigError("Spectrum: freqs/psd length mismatch");
        if (freqs.empty()) throw ConfigError("Spectrum: empty");
        if (!(rbw > 0.0)) throw ConfigError("Spectrum: rbw must be positive");
        for (std::size_t i = 1; i < freqs.size(); ++i)
            if (!(freqs[i] > freqs[i - 1]))
                throw ConfigError("Spectrum: freqs must be strictly increasing");
    }

    double f_min() const { return freqs.front(); }
    double f_max() const { return freqs.back(); }
    bool covers(double f) const { return f >= f_min() && f <= f_max(); }
};

/// Linear interpolation of the spectrum at frequency f.
inline double psd_at(const Spectrum& s, double f) {
    if (!s.covers(f)) throw BandOutOfRange("psd_at: frequency outside support");
    auto it = std::lower_bound(s.freqs.begin(), s.freqs.end(), f);
    std::size_t hi = static_cast<std::size_t>(it - s.freqs.begin());
    if (hi == 0) return s.psd.front();
    if (hi >= s.freqs.size()) return s.psd.back();
    const std::size_t lo = hi - 1;
    const double t = (f - s.freqs[lo]) / (s.freqs[hi] - s.freqs[lo]);
    return s.psd[lo] + t * (s.psd[hi] - s.psd[lo]);
}

/// Largest PSD value within [f_center - half_width, f_center + half_width].
inline double peak_psd_in_band(const Spectrum& s, double f_center, double half_width) {
    const double lo = f_center - half_width;
    const double hi = f_center + half_width;
    if (hi < s.f_min() || lo > s.f_max())
        throw BandOutOfRange("peak_psd_in_band: band outside support");
    double best = -1.0;
    bool any = false;
    for (std::size_t i = 0; i < s.freqs.size(); ++i) {
        if (s.freqs[i] < lo || s.freqs[i] > hi) continue;
        best = any ? std::max(best, s.psd[i]) : s.psd[i];
        any = true;
    }
    if (!any) throw BandOutOfRange("peak_psd_in_band: no bins in band");
    return best;
}

}  // namespace homodyne
