#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <unsupported/Eigen/NonLinearOptimization>

#include "homodyne/constants.hpp"
#include "homodyne/detector.hpp"
#include "homodyne/dsp.hpp"
#include "homodyne/errors.hpp"
#include "homodyne/synth.hpp"

namespace homodyne {

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double slope_stderr = 0.0;
    std::vector<std::size_t> excluded_points;  // indices into the input arrays
};

/// Ordinary least squares y = intercept + slope * x.
inline LinearFit ols_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw DegenerateInput("ols_fit: size mismatch");
    const std::size_t n = x.size();
    if (n < 2) throw DegenerateInput("ols_fit: need at least two points");
    const double xm = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double ym = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - xm) * (x[i] - xm);
        sxy += (x[i] - xm) * (y[i] - ym);
        syy += (y[i] - ym) * (y[i] - ym);
    }
    if (!(sxx > 0)) throw DegenerateInput("ols_fit: no variation in x");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = ym - fit.slope * xm;
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        ssr += r * r;
    }
    fit.r_squared = (syy > 0) ? std::clamp(1.0 - ssr / syy, 0.0, 1.0) : 1.0;
    fit.slope_stderr = (n > 2) ? std::sqrt(ssr / static_cast<double>(n - 2) / sxx) : 0.0;
    return fit;
}

struct EfficiencyFit {
    double eta = 0.0;
    double stderr_eta = 0.0;
    LinearFit fit;
};

/// Total conversion efficiency from a DC response sweep: |slope| divided by
/// the unity-QE transimpedance slope lambda*q/hc * R_f.
inline EfficiencyFit fit_dc_efficiency(const std::vector<double>& powers,
                                       const std::vector<double>& dc_volts,
                                       const DetectorModel& model, double wavelength) {
    if (powers.size() < 3) throw DegenerateInput("fit_dc_efficiency: need >= 3 points");
    const auto [mn, mx] = std::minmax_element(powers.begin(), powers.end());
    if (*mn < 0) throw DegenerateInput("fit_dc_efficiency: negative power");
    if (*mn > 0 && *mx < 2.0 * *mn)
        throw DegenerateInput("fit_dc_efficiency: powers must span a factor of 2");
    const double slope_ideal = ideal_responsivity(wavelength) * model.feedback.gain_resistor;
    EfficiencyFit out;
    out.fit = ols_fit(powers, dc_volts);
    out.eta = std::abs(out.fit.slope) / slope_ideal;
    out.stderr_eta = out.fit.slope_stderr / slope_ideal;
    return out;
}

/// eta_coup = eta_total / eta_QE.
inline double decouple_coupling(double eta_total, double eta_qe) {
    if (!(eta_qe > 0) || eta_qe > 1.0)
        throw DomainError("decouple_coupling: eta_qe outside (0,1]");
    if (eta_total < 0) throw DomainError("decouple_coupling: negative eta_total");
    if (eta_total > eta_qe)
        throw InconsistentEfficiencies("decouple_coupling: eta_total exceeds eta_qe");
    return eta_total / eta_qe;
}

struct ButterworthFit {
    ButterworthShape shape;
    double scale = 0.0;
    double r_squared = 0.0;
    std::vector<double> residuals;
};

namespace detail {

struct ButterworthResidual {
    using Scalar = double;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    const std::vector<double>& f;
    const std::vector<double>& y;
    double f_ref;
    double s_ref;

    int inputs() const { return 3; }
    int values() const { return static_cast<int>(f.size()); }

    // theta = (p, f_star/f_ref, scale/s_ref)
    int operator()(const Eigen::VectorXd& th, Eigen::VectorXd& fvec) const {
        const double p = th[0];
        const double fstar = th[1] * f_ref;
        const double s = th[2] * s_ref;
        for (int i = 0; i < values(); ++i) {
            const double x2 = (f[static_cast<std::size_t>(i)] / fstar) *
                              (f[static_cast<std::size_t>(i)] / fstar);
            const double d = 1.0 + (p * p - 2.0) * x2 + x2 * x2;
            fvec[i] = s / d - y[static_cast<std::size_t>(i)];
        }
        return 0;
    }

    int df(const Eigen::VectorXd& th, Eigen::MatrixXd& jac) const {
        const double p = th[0];
        const double fstar = th[1] * f_ref;
        const double s = th[2] * s_ref;
        for (int i = 0; i < values(); ++i) {
            const double x2 = (f[static_cast<std::size_t>(i)] / fstar) *
                              (f[static_cast<std::size_t>(i)] / fstar);
            const double d = 1.0 + (p * p - 2.0) * x2 + x2 * x2;
            jac(i, 0) = -s * 2.0 * p * x2 / (d * d);
            jac(i, 1) = s * (2.0 * (p * p - 2.0) * x2 + 4.0 * x2 * x2) / (d * d * th[1]);
            jac(i, 2) = s_ref / d;
        }
        return 0;
    }
};

}  // namespace detail

/// Least-squares fit of the second-order shape over (p, f_star, scale).
/// Input is an electronic-noise-corrected gain spectrum normalized near its
/// low-frequency plateau. Multi-start over p with f_star seeded from the
/// half-power crossing of the data.
inline ButterworthFit fit_butterworth(const Spectrum& corrected_gain) {
    corrected_gain.validate();
    const auto& f = corrected_gain.freqs;
    const auto& y = corrected_gain.psd;
    const std::size_t n = f.size();
    if (n < 8) throw FitDiverged("fit_butterworth: too few points");

    const std::size_t head = std::max<std::size_t>(3, n / 20);
    double plateau = 0.0;
    for (std::size_t i = 0; i < head; ++i) plateau += y[i];
    plateau /= static_cast<double>(head);
    if (!(plateau > 0)) throw FitDiverged("fit_butterworth: nonpositive low-frequency plateau");

    double f_half = f.back() / 2.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (y[i] < 0.5 * plateau && f[i] > 0) {
            f_half = f[i];
            break;
        }
    }

    const double f_ref = f_half;
    const double s_ref = plateau;
    const double p_starts[] = {0.8, std::sqrt(2.0), 1.8};

    double best_ssr = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_theta;
    for (double p0 : p_starts) {
        Eigen::VectorXd theta(3);
        theta << p0, 1.0, 1.0;
        detail::ButterworthResidual functor{f, y, f_ref, s_ref};
        Eigen::LevenbergMarquardt<detail::ButterworthResidual> lm(functor);
        lm.parameters.maxfev = 4000;
        lm.parameters.xtol = 1e-12;
        lm.parameters.ftol = 1e-12;
        lm.minimize(theta);
        Eigen::VectorXd fvec(static_cast<int>(n));
        functor(theta, fvec);
        const double ssr = fvec.squaredNorm();
        if (std::isfinite(ssr) && ssr < best_ssr && theta[0] != 0.0 && theta[1] > 0 &&
            theta[2] * s_ref > 0) {
            best_ssr = ssr;
            best_theta = theta;
        }
    }
    if (!std::isfinite(best_ssr))
        throw FitDiverged("fit_butterworth: no start converged to a finite fit");

    ButterworthFit out;
    out.shape.p = std::abs(best_theta[0]);
    out.shape.f_star = best_theta[1] * f_ref;
    out.scale = best_theta[2] * s_ref;
    const double ym = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sst = 0.0;
    for (double v : y) sst += (v - ym) * (v - ym);
    out.r_squared = (sst > 0) ? std::clamp(1.0 - best_ssr / sst, 0.0, 1.0) : 1.0;
    out.residuals.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x2 = (f[i] / out.shape.f_star) * (f[i] / out.shape.f_star);
        const double d = 1.0 + (out.shape.p * out.shape.p - 2.0) * x2 + x2 * x2;
        out.residuals[i] = out.scale / d - y[i];
    }
    return out;
}

namespace detail {
/// Bisection for the smallest x > x_lo with r2(x) = target (r2 decreasing
/// past the peak). Relative precision well below the 0.1% contract.
inline double bisect_gain_crossing(const ButterworthShape& shape, double x_lo,
                                   double target) {
    double hi = std::max(1.0, x_lo * 2.0);
    int guard = 0;
    while (gain_value(shape, hi * shape.f_star) > target) {
        hi *= 2.0;
        if (++guard > 80) throw NoCrossing("bandwidth_3db: response never falls to target");
    }
    double lo = x_lo;
    for (int i = 0; i < 200 && (hi - lo) > 1e-12 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (gain_value(shape, mid * shape.f_star) > target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi) * shape.f_star;
}
}  // namespace detail

/// Smallest f > 0 where the fitted |r(f)|^2 falls to half its f->0 value.
inline double bandwidth_3db(const ButterworthShape& shape) {
    shape.validate();
    return detail::bisect_gain_crossing(shape, 0.0, 0.5);
}

inline double bandwidth_3db(const ButterworthFit& fit) { return bandwidth_3db(fit.shape); }

/// For peaking responses (p < sqrt(2)): the crossing at half the peak value.
inline std::optional<double> bandwidth_3db_peak_relative(const ButterworthShape& shape) {
    shape.validate();
    if (shape.p * shape.p >= 2.0) return std::nullopt;
    const double x_pk = std::sqrt((2.0 - shape.p * shape.p) / 2.0);
    const double peak = gain_value(shape, x_pk * shape.f_star);
    return detail::bisect_gain_crossing(shape, x_pk, peak / 2.0);
}

struct SaturationPolicy {
    double rel_threshold = 0.05;  // allowed deviation from the low-power fit
};

/// Iterative linear fit: anchor on the lowest-power half, extend upward while
/// each added point stays within the policy threshold of the prediction.
/// Points beyond the first violation are excluded and reported.
inline LinearFit fit_linearity(const std::vector<double>& powers,
                               const std::vector<double>& band_variances,
                               const SaturationPolicy& policy = {}) {
    if (powers.size() != band_variances.size())
        throw DegenerateInput("fit_linearity: size mismatch");
    const std::size_t n = powers.size();
    if (n < 5) throw DegenerateInput("fit_linearity: need >= 5 points");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return powers[a] < powers[b]; });

    const std::size_t k0 = std::max<std::size_t>(3, (n + 1) / 2);
    std::vector<double> xs, ys;
    xs.reserve(n);
    ys.reserve(n);
    for (std::size_t i = 0; i < k0; ++i) {
        xs.push_back(powers[order[i]]);
        ys.push_back(band_variances[order[i]]);
    }
    LinearFit fit = ols_fit(xs, ys);

    std::size_t included = k0;
    for (std::size_t i = k0; i < n; ++i) {
        const double x = powers[order[i]];
        const double y = band_variances[order[i]];
        const double pred = fit.intercept + fit.slope * x;
        const double denom = std::max(std::abs(pred), 1e-300);
        if (std::abs(y - pred) / denom >= policy.rel_threshold) break;
        xs.push_back(x);
        ys.push_back(y);
        fit = ols_fit(xs, ys);
        included = i + 1;
    }

    for (std::size_t i = included; i < n; ++i) fit.excluded_points.push_back(order[i]);
    std::sort(fit.excluded_points.begin(), fit.excluded_points.end());
    return fit;
}

/// A fit this clean is the shot-noise-limited signature; quadratic
/// (classical-noise dominated) sweeps fall well below it.
inline bool shot_noise_limited(const LinearFit& fit) { return fit.r_squared >= 0.99; }

/// Smallest power excluded by the linearity policy; +inf when every point is
/// consistent with the linear model.
inline double detect_saturation(const std::vector<double>& powers,
                                const std::vector<double>& band_variances,
                                const SaturationPolicy& policy = {}) {
    const LinearFit fit = fit_linearity(powers, band_variances, policy);
    double onset = std::numeric_limits<double>::infinity();
    for (std::size_t idx : fit.excluded_points) onset = std::min(onset, powers[idx]);
    return onset;
}

inline constexpr double kAdditionCorrectionDb = 6.020599913279624;  // 10*log10(4)

struct CmrrEstimate {
    double cmrr_db = 0.0;
    double raw_db = 0.0;
    bool degenerate = false;
};

/// CMRR from the rep-rate tone: peak PSD within +/-2 RBW of the rep rate in
/// each spectrum (scalloping cancels in the ratio), addition-over-balanced in
/// dB, minus the 6.02 dB addition-mode power-doubling correction.
inline CmrrEstimate cmrr_estimate(const Spectrum& balanced, const Spectrum& addition,
                                  double rep_rate) {
    balanced.validate();
    addition.validate();
    const double pk_bal = peak_psd_in_band(balanced, rep_rate, 2.0 * balanced.rbw);
    const double pk_add = peak_psd_in_band(addition, rep_rate, 2.0 * addition.rbw);
    if (!(pk_bal > 0) || !(pk_add > 0))
        throw DomainError("cmrr: nonpositive PSD at the rep rate");
    CmrrEstimate out;
    out.raw_db = to_db(pk_add / pk_bal);
    out.cmrr_db = out.raw_db - kAdditionCorrectionDb;
    out.degenerate = out.raw_db <= 0.0;
    return out;
}

inline double cmrr(const Spectrum& balanced, const Spectrum& addition, double rep_rate) {
    return cmrr_estimate(balanced, addition, rep_rate).cmrr_db;
}

/// Shot-noise clearance: illuminated spectrum over dark spectrum at f, in dB.
inline double clearance(const Spectrum& shot, const Spectrum& dark, double f) {
    return db_diff(shot, dark, f);
}

/// Measurement efficiency of a detector with the given clearance:
/// eta = (SNR - 1)/SNR with SNR the power ratio.
inline double eta_snr(double snr_db) {
    if (!(snr_db > 0)) throw DomainError("eta_snr: snr_db must be positive");
    const double snr = std::pow(10.0, snr_db / 10.0);
    return (snr - 1.0) / snr;
}

inline double total_efficiency(double eta_snr_value, double eta_coup, double eta_qe) {
    for (double v : {eta_snr_value, eta_coup, eta_qe})
        if (!(v > 0) || v > 1.0)
            throw DomainError("total_efficiency: arguments must lie in (0,1]");
    return eta_snr_value * eta_coup * eta_qe;
}

/// Input-referred current noise density recovered from a dark spectrum:
/// sqrt of the band average of S_dark / (R_f^2 |r(f)|^2).
inline double electronic_current_noise_density(const Spectrum& dark,
                                               const DetectorModel& model, double f_lo,
                                               double f_hi) {
    dark.validate();
    if (f_lo < dark.f_min() || f_hi > dark.f_max())
        throw BandOutOfRange("electronic_current_noise_density: band outside support");
    const double rf2 = model.feedback.gain_resistor * model.feedback.gain_resistor;
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < dark.freqs.size(); ++i) {
        const double f = dark.freqs[i];
        if (f < f_lo || f > f_hi) continue;
        acc += dark.psd[i] / (rf2 * gain_value(model.response, f));
        ++count;
    }
    if (count == 0) throw BandOutOfRange("electronic_current_noise_density: no bins in band");
    return std::sqrt(std::max(acc / static_cast<double>(count), 0.0));
}

}  // namespace homodyne
