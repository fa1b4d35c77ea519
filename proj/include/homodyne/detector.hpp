#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "homodyne/constants.hpp"
#include "homodyne/errors.hpp"
#include "homodyne/spectrum.hpp"

namespace homodyne {

struct PhotodiodeParams {
    double responsivity = 0.0;          // A/W at the operating wavelength
    double junction_capacitance = 0.0;  // F
    double shunt_resistance = 0.0;      // ohm
    double dark_current = 0.0;          // A
    double active_diameter = 0.0;       // m
    double reverse_bias = 0.0;          // V
    double quantum_efficiency = 0.0;    // fraction
    double coupling_efficiency = 0.0;   // fraction

    void validate() const {
        if (responsivity < 0 || junction_capacitance < 0 || shunt_resistance < 0 ||
            dark_current < 0 || active_diameter < 0 || reverse_bias < 0)
            throw ConfigError("PhotodiodeParams: negative value");
        if (quantum_efficiency < 0 || quantum_efficiency > 1)
            throw ConfigError("PhotodiodeParams: quantum_efficiency outside [0,1]");
        if (coupling_efficiency < 0 || coupling_efficiency > 1)
            throw ConfigError("PhotodiodeParams: coupling_efficiency outside [0,1]");
    }

    /// Effective A/W including coupling loss.
    double effective_responsivity() const {
        return coupling_efficiency * responsivity;
    }
};

struct OpAmpParams {
    double gain_bandwidth_product = 0.0;     // Hz
    double voltage_noise = 0.0;              // V/sqrt(Hz)
    double current_noise = 0.0;              // A/sqrt(Hz)
    double input_capacitance = 0.0;          // F
    double input_bias_offset_current = 0.0;  // A
    double output_swing = 0.0;               // V, rail-to-rail limit (one-sided)

    void validate() const {
        if (!(gain_bandwidth_product > 0) || !(voltage_noise > 0) ||
            !(current_noise > 0) || !(input_capacitance > 0) ||
            !(input_bias_offset_current > 0))
            throw ConfigError("OpAmpParams: all fields must be positive");
        if (!(output_swing > 0))
            throw ConfigError("OpAmpParams: output_swing must be positive");
    }
};

struct FeedbackNetwork {
    double gain_resistor = 0.0;       // ohm
    double feedback_capacitor = 0.0;  // F

    void validate() const {
        if (!(gain_resistor > 0) || !(feedback_capacitor > 0))
            throw ConfigError("FeedbackNetwork: values must be positive");
    }
};

/// Second-order gain shape |r(f)|^2 = 1 / (1 + (p^2-2)(f/f*)^2 + (f/f*)^4).
/// Frequencies are in hertz; p = sqrt(2) is the critically flat case.
struct ButterworthShape {
    double p = 0.0;
    double f_star = 0.0;  // Hz

    void validate() const {
        if (!(p > 0)) throw ConfigError("ButterworthShape: p must be positive");
        if (!(f_star > 0)) throw ConfigError("ButterworthShape: f_star must be positive");
    }
};

struct LocalOscillator {
    double wavelength = 0.0;       // m
    double average_power = 0.0;    // W
    double repetition_rate = 0.0;  // Hz
    double pulse_fwhm = 0.0;       // s
    double rin_density = 0.0;      // relative intensity noise, 1/Hz, single-sided

    void validate() const {
        if (!(wavelength > 0)) throw ConfigError("LocalOscillator: wavelength must be positive");
        if (average_power < 0) throw ConfigError("LocalOscillator: negative power");
        if (!(repetition_rate > 0))
            throw ConfigError("LocalOscillator: repetition_rate must be positive");
        if (pulse_fwhm < 0 || pulse_fwhm >= 1.0 / repetition_rate)
            throw ConfigError("LocalOscillator: pulse_fwhm must lie in [0, 1/repetition_rate)");
        if (rin_density < 0) throw ConfigError("LocalOscillator: negative rin_density");
    }
};

struct DetectorModel {
    PhotodiodeParams pd_plus;
    PhotodiodeParams pd_minus;
    OpAmpParams opamp;
    FeedbackNetwork feedback;
    double electronic_noise_density = 0.0;  // A/sqrt(Hz), input-referred flat floor
    double v_offset = 0.0;                  // V
    double sa_impedance = 50.0;             // ohm
    // Small-signal response the device actually exhibits. The closed form from
    // the component values (butterworth_params) is a predictor only; the two
    // are reported side by side and never forced to agree.
    ButterworthShape response;

    void validate() const {
        pd_plus.validate();
        pd_minus.validate();
        opamp.validate();
        feedback.validate();
        response.validate();
        if (electronic_noise_density < 0)
            throw ConfigError("DetectorModel: negative electronic_noise_density");
        if (!(sa_impedance > 0))
            throw ConfigError("DetectorModel: sa_impedance must be positive");
    }

    /// Checks the unity-QE responsivity bound at the LO wavelength.
    void validate_against(const LocalOscillator& lo) const {
        validate();
        lo.validate();
        const double bound = ideal_responsivity(lo.wavelength) * (1.0 + 1e-12);
        if (pd_plus.responsivity > bound || pd_minus.responsivity > bound)
            throw ConfigError("DetectorModel: responsivity exceeds lambda*q/hc bound");
    }
};

/// Closed-form shape predicted by the component values, evaluated exactly as
///   omega* = sqrt(A0f0 / (2 pi (2 Cpd + Cf + Coa)))
///   p      = (2 pi Rf Cf + 1/A0f0) * omega*
/// with numbers taken in SI units, and reported as f_star = omega*/(2 pi).
/// The convention flag belongs in any output that carries this value.
inline ButterworthShape butterworth_params(const DetectorModel& m) {
    m.validate();
    const double c_sum = m.pd_plus.junction_capacitance + m.pd_minus.junction_capacitance +
                         m.feedback.feedback_capacitor + m.opamp.input_capacitance;
    const double omega_star =
        std::sqrt(m.opamp.gain_bandwidth_product / (2.0 * kPi * c_sum));
    const double p = (2.0 * kPi * m.feedback.gain_resistor * m.feedback.feedback_capacitor +
                      1.0 / m.opamp.gain_bandwidth_product) *
                     omega_star;
    return ButterworthShape{p, omega_star / (2.0 * kPi)};
}

/// |r(f)|^2 at a single frequency.
inline double gain_value(const ButterworthShape& shape, double f) {
    const double x2 = (f / shape.f_star) * (f / shape.f_star);
    return 1.0 / (1.0 + (shape.p * shape.p - 2.0) * x2 + x2 * x2);
}

inline std::vector<double> gain_spectrum(const ButterworthShape& shape,
                                         std::span<const double> freqs) {
    shape.validate();
    std::vector<double> out;
    out.reserve(freqs.size());
    for (double f : freqs) {
        if (f < 0) throw DomainError("gain_spectrum: negative frequency");
        out.push_back(gain_value(shape, f));
    }
    return out;
}

enum class DcScenario { illuminate_plus, illuminate_minus, balanced };

/// DC output voltage for the given illumination scenario. For the blocked
/// (illuminate_*) scenarios lo.average_power is the power incident on the lit
/// arm; for balanced it is the total power split 50:50.
inline double dc_voltage(const DetectorModel& m, const LocalOscillator& lo,
                         DcScenario scenario) {
    m.validate_against(lo);
    const double rf = m.feedback.gain_resistor;
    const double p = lo.average_power;
    const double dark_diff = m.pd_plus.dark_current - m.pd_minus.dark_current;
    double photo = 0.0;
    switch (scenario) {
        case DcScenario::illuminate_plus:
            photo = m.pd_plus.effective_responsivity() * p;
            break;
        case DcScenario::illuminate_minus:
            photo = -m.pd_minus.effective_responsivity() * p;
            break;
        case DcScenario::balanced:
            photo = (m.pd_plus.effective_responsivity() -
                     m.pd_minus.effective_responsivity()) *
                    p / 2.0;
            break;
    }
    const double v = rf * (photo + dark_diff) + m.v_offset;
    if (std::abs(v) >= m.opamp.output_swing)
        throw SaturationError("dc_voltage: operating point exceeds output swing");
    return v;
}

/// Mean photodiode currents (A) in balanced operation at the LO power.
inline double balanced_dc_current_total(const DetectorModel& m, const LocalOscillator& lo) {
    return (m.pd_plus.effective_responsivity() + m.pd_minus.effective_responsivity()) *
               lo.average_power / 2.0 +
           m.pd_plus.dark_current + m.pd_minus.dark_current;
}

/// Single-sided shot-noise current PSD 2q(I+ + I-) of the subtraction current
/// in balanced operation, dark currents included (A^2/Hz).
inline double shot_noise_psd(const DetectorModel& m, const LocalOscillator& lo) {
    return 2.0 * kElectronCharge * balanced_dc_current_total(m, lo);
}

/// Single-sided output-voltage PSD R_f^2 (S_shot + i_e^2) |r(f)|^2 in balanced
/// operation (V^2/Hz).
inline std::vector<double> analytic_output_psd(const DetectorModel& m,
                                               const LocalOscillator& lo,
                                               std::span<const double> freqs) {
    m.validate_against(lo);
    const double rf2 = m.feedback.gain_resistor * m.feedback.gain_resistor;
    const double s_in = shot_noise_psd(m, lo) +
                        m.electronic_noise_density * m.electronic_noise_density;
    std::vector<double> out;
    out.reserve(freqs.size());
    for (double f : freqs) out.push_back(rf2 * s_in * gain_value(m.response, f));
    return out;
}

/// Spectrum-analyzer power reading: (2/R_imp) * integral of S_V over
/// [center - rbw/2, center + rbw/2], trapezoid rule with interpolated band
/// edges.
inline double sa_power(const Spectrum& spectrum, double center, double rbw,
                       double impedance) {
    spectrum.validate();
    if (!(rbw > 0)) throw DomainError("sa_power: rbw must be positive");
    if (!(impedance > 0)) throw DomainError("sa_power: impedance must be positive");
    const double lo = center - rbw / 2.0;
    const double hi = center + rbw / 2.0;
    if (lo < spectrum.f_min() || hi > spectrum.f_max())
        throw BandOutOfRange("sa_power: band outside spectrum support");

    double integral = 0.0;
    double f_prev = lo;
    double v_prev = psd_at(spectrum, lo);
    for (std::size_t i = 0; i < spectrum.freqs.size(); ++i) {
        const double f = spectrum.freqs[i];
        if (f <= lo) continue;
        if (f >= hi) break;
        integral += 0.5 * (v_prev + spectrum.psd[i]) * (f - f_prev);
        f_prev = f;
        v_prev = spectrum.psd[i];
    }
    const double v_hi = psd_at(spectrum, hi);
    integral += 0.5 * (v_prev + v_hi) * (hi - f_prev);
    return 2.0 * integral / impedance;
}

/// Shot-noise equivalent power: the LO power at which the LO-induced shot
/// noise equals the flat electronic floor i_e^2. Dark currents are excluded
/// (with them included the equation can have no nonnegative solution); the
/// report layer records this definition.
inline double snep(const DetectorModel& m) {
    m.validate();
    const double slope = kElectronCharge * (m.pd_plus.effective_responsivity() +
                                            m.pd_minus.effective_responsivity());
    if (!(slope > 0)) throw DomainError("snep: detector has zero responsivity");
    const double ie = m.electronic_noise_density;
    return ie * ie / slope;
}

}  // namespace homodyne
