#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "homodyne/analysis.hpp"
#include "homodyne/detector.hpp"
#include "homodyne/dsp.hpp"
#include "homodyne/synth.hpp"

namespace homodyne {

/// Everything characterize() needs beyond the detector and LO. Defaults match
/// the paper-2um preset workflow; all knobs are config-file visible.
struct SweepConfig {
    double sample_rate = 0.0;  // Hz
    std::uint64_t seed = 1;
    bool delta_pulses = true;

    // DC efficiency sweep (per-arm incident watts)
    std::vector<double> dc_powers;
    double dc_duration = 2.4e-4;  // s per point

    // Shot-noise linearity / saturation sweep (total LO watts)
    std::vector<double> sweep_powers;
    int sweep_navg = 100;
    double sweep_rbw = 300e3;
    double sweep_vbw = 10e3;
    Scenario sweep_scenario{ScenarioKind::balanced, 0.0, 0.0};

    // Gain-spectrum run
    double gain_power = 1e-3;  // W
    int gain_navg = 200;
    double gain_rbw = 100e3;
    double gain_vbw = 100.0;
    Scenario gain_scenario{ScenarioKind::balanced, 0.0, 0.0};
    double plateau_lo = 1e6;  // normalization band for the corrected gain
    double plateau_hi = 3e6;

    // CMRR runs
    double cmrr_power = 1e-4;  // W
    int cmrr_navg = 40;
    double cmrr_rbw = 300e3;
    double cmrr_vbw = 300e3;
    Scenario cmrr_scenario{ScenarioKind::balanced, 0.0, 0.0};

    // Dark runs reuse gain/sweep settings on their grids.
    int dark_navg = 200;

    // Analysis band and clearance frequency
    double band_lo = 1e6;
    double band_hi = 13e6;
    double clearance_freq = 5e6;
    SaturationPolicy policy;
};

/// Flat figure-of-merit record. Missing stages leave fields unset; the
/// serializers write them as "unavailable".
struct CharacterizationReport {
    std::optional<double> eta_total_plus, eta_total_plus_stderr;
    std::optional<double> eta_total_minus, eta_total_minus_stderr;
    std::optional<double> eta_coup;

    std::optional<double> butter_p, butter_f_star_hz, butter_scale, butter_r_squared;
    std::optional<double> bandwidth_3db_hz;
    std::optional<double> bandwidth_3db_peak_rel_hz;

    std::optional<double> linearity_slope, linearity_intercept;
    std::optional<double> linearity_r_squared, linearity_slope_stderr;
    std::vector<std::size_t> linearity_excluded;
    std::optional<bool> is_shot_noise_limited;
    std::optional<double> saturation_onset_w;  // +inf means no onset observed

    std::optional<double> cmrr_db, cmrr_raw_db;
    std::optional<double> clearance_db;
    double clearance_freq_hz = 0.0;
    std::optional<double> clearance_power_w;
    std::optional<double> eta_snr_db;
    std::optional<double> eta_snr_value;
    std::optional<double> eta_tot;

    double snep_w = 0.0;
    std::optional<double> electronic_noise_density_a_rthz;

    // Closed-form predictor from the component values, with the -3 dB
    // crossing under both readings of its f_star (as hertz / as rad/s).
    double closed_form_p = 0.0;
    double closed_form_f_star_hz = 0.0;
    double closed_form_bw3db_f_conv_hz = 0.0;
    double closed_form_bw3db_omega_conv_hz = 0.0;

    std::uint64_t seed = 0;
};

/// Per-figure plot data produced alongside the report.
struct CharacterizationArtifacts {
    // DC response: per-arm (power W, volts)
    std::vector<double> dc_powers_plus, dc_volts_plus;
    std::vector<double> dc_powers_minus, dc_volts_minus;
    // Corrected gain spectrum handed to the fit
    Spectrum corrected_gain;
    bool have_gain = false;
    // Power sweep spectra and band variances
    std::vector<double> sweep_powers;
    std::vector<double> band_variances;
    std::vector<Spectrum> sweep_spectra;
    Spectrum dark_sweep;
    bool have_dark_sweep = false;
    // CMRR spectra
    Spectrum cmrr_balanced, cmrr_addition;
    bool have_cmrr = false;
};

namespace detail {

inline Spectrum subtract_spectra(const Spectrum& a, const Spectrum& b) {
    a.validate();
    b.validate();
    if (a.freqs.size() != b.freqs.size())
        throw ConfigError("subtract_spectra: grids differ");
    Spectrum out = a;
    for (std::size_t i = 0; i < a.psd.size(); ++i) out.psd[i] = a.psd[i] - b.psd[i];
    return out;
}

/// Remove bins near the rep-rate harmonics before fitting: the residual comb
/// tone sits orders of magnitude above the shot floor and would own the
/// least-squares objective. The notch accounts for video smoothing spread.
inline Spectrum notch_harmonics(const Spectrum& s, double rep_rate, double rbw,
                                double vbw) {
    const double smear = (vbw < rbw) ? rbw * std::sqrt(rbw / vbw) : 0.0;
    const double half = 3.0 * rbw + 2.0 * smear;
    Spectrum out;
    out.rbw = s.rbw;
    out.vbw = s.vbw;
    out.n_averages = s.n_averages;
    out.units = s.units;
    for (std::size_t i = 0; i < s.freqs.size(); ++i) {
        const double f = s.freqs[i];
        const double k = std::round(f / rep_rate);
        if (k >= 1.0 && std::abs(f - k * rep_rate) <= half) continue;
        out.freqs.push_back(f);
        out.psd.push_back(s.psd[i]);
    }
    return out;
}

inline SynthConfig run_config(const SweepConfig& sweep, double duration,
                              std::uint64_t tag) {
    SynthConfig cfg;
    cfg.sample_rate = sweep.sample_rate;
    cfg.duration = duration;
    cfg.seed = derive_seed(sweep.seed, tag);
    cfg.delta_pulses = sweep.delta_pulses;
    return cfg;
}

}  // namespace detail

/// Full characterization pipeline: DC sweeps, dark runs, gain-spectrum fit,
/// power sweep with saturation detection, CMRR, clearance, and the derived
/// efficiency accounting. Deterministic given (model, lo, sweep).
inline CharacterizationReport characterize(const DetectorModel& model,
                                           const LocalOscillator& lo,
                                           const SweepConfig& sweep,
                                           CharacterizationArtifacts* artifacts = nullptr) {
    model.validate_against(lo);
    CharacterizationReport rep;
    rep.seed = sweep.seed;
    rep.clearance_freq_hz = sweep.clearance_freq;

    // Closed-form predictor and SNEP need no simulation.
    const ButterworthShape closed = butterworth_params(model);
    rep.closed_form_p = closed.p;
    rep.closed_form_f_star_hz = closed.f_star;
    rep.closed_form_bw3db_f_conv_hz = bandwidth_3db(closed);
    rep.closed_form_bw3db_omega_conv_hz =
        bandwidth_3db(ButterworthShape{closed.p, closed.f_star / (2.0 * kPi)});
    rep.snep_w = snep(model);

    auto lo_at = [&lo](double p) {
        LocalOscillator out = lo;
        out.average_power = p;
        return out;
    };

    // --- DC efficiency sweeps (per-arm powers, both arms) ---
    bool dc_usable = false;
    for (double p : sweep.dc_powers)
        if (p > 0) dc_usable = true;
    if (dc_usable) {
        std::vector<double> volts_plus, volts_minus;
        for (std::size_t i = 0; i < sweep.dc_powers.size(); ++i) {
            const Scenario plus{ScenarioKind::blocked_minus, 0.0, 0.0};
            const Scenario minus{ScenarioKind::blocked_plus, 0.0, 0.0};
            auto cfg_p = detail::run_config(sweep, sweep.dc_duration, 0x100 + i);
            auto cfg_m = detail::run_config(sweep, sweep.dc_duration, 0x200 + i);
            volts_plus.push_back(
                simulate_homodyne(model, lo_at(sweep.dc_powers[i]), plus, cfg_p).dc_volts);
            volts_minus.push_back(
                simulate_homodyne(model, lo_at(sweep.dc_powers[i]), minus, cfg_m).dc_volts);
        }
        const EfficiencyFit fp =
            fit_dc_efficiency(sweep.dc_powers, volts_plus, model, lo.wavelength);
        const EfficiencyFit fm =
            fit_dc_efficiency(sweep.dc_powers, volts_minus, model, lo.wavelength);
        rep.eta_total_plus = fp.eta;
        rep.eta_total_plus_stderr = fp.stderr_eta;
        rep.eta_total_minus = fm.eta;
        rep.eta_total_minus_stderr = fm.stderr_eta;
        if (model.pd_plus.quantum_efficiency > 0 && fp.eta <= model.pd_plus.quantum_efficiency)
            rep.eta_coup = decouple_coupling(fp.eta, model.pd_plus.quantum_efficiency);
        if (artifacts) {
            artifacts->dc_powers_plus = sweep.dc_powers;
            artifacts->dc_volts_plus = volts_plus;
            artifacts->dc_powers_minus = sweep.dc_powers;
            artifacts->dc_volts_minus = volts_minus;
        }
    }

    // --- Gain spectrum: shot run minus dark run, plateau-normalized ---
    if (sweep.gain_power > 0) {
        const double dur =
            duration_for_psd(sweep.sample_rate, sweep.gain_rbw,
                             std::max(sweep.gain_navg, sweep.dark_navg));
        auto dark_res = simulate_homodyne(model, lo_at(0.0),
                                          Scenario{ScenarioKind::balanced, 0.0, 0.0},
                                          detail::run_config(sweep, dur, 0x300));
        auto shot_res = simulate_homodyne(model, lo_at(sweep.gain_power),
                                          sweep.gain_scenario,
                                          detail::run_config(sweep, dur, 0x301));
        const Spectrum dark =
            estimate_psd(dark_res.ac, sweep.gain_rbw, sweep.gain_vbw, sweep.dark_navg);
        const Spectrum shot =
            estimate_psd(shot_res.ac, sweep.gain_rbw, sweep.gain_vbw, sweep.gain_navg);
        Spectrum corrected = detail::subtract_spectra(shot, dark);
        corrected = detail::notch_harmonics(corrected, lo.repetition_rate, sweep.gain_rbw,
                                            sweep.gain_vbw);
        const double plateau = band_average(corrected, sweep.plateau_lo, sweep.plateau_hi);
        if (plateau > 0) {
            for (double& v : corrected.psd) v /= plateau;
            const ButterworthFit fit = fit_butterworth(corrected);
            rep.butter_p = fit.shape.p;
            rep.butter_f_star_hz = fit.shape.f_star;
            rep.butter_scale = fit.scale;
            rep.butter_r_squared = fit.r_squared;
            rep.bandwidth_3db_hz = bandwidth_3db(fit);
            if (auto pk = bandwidth_3db_peak_relative(fit.shape))
                rep.bandwidth_3db_peak_rel_hz = *pk;
            if (artifacts) {
                artifacts->corrected_gain = corrected;
                artifacts->have_gain = true;
            }
        }
    }

    // --- Dark run on the sweep grid: floor metrics are always available ---
    const double sweep_dur = duration_for_psd(sweep.sample_rate, sweep.sweep_rbw,
                                              std::max(sweep.sweep_navg, sweep.dark_navg));
    auto dark_res = simulate_homodyne(model, lo_at(0.0),
                                      Scenario{ScenarioKind::balanced, 0.0, 0.0},
                                      detail::run_config(sweep, sweep_dur, 0x302));
    const Spectrum dark =
        estimate_psd(dark_res.ac, sweep.sweep_rbw, sweep.sweep_vbw, sweep.dark_navg);
    rep.electronic_noise_density_a_rthz =
        electronic_current_noise_density(dark, model, sweep.band_lo, sweep.band_hi);
    if (artifacts) {
        artifacts->dark_sweep = dark;
        artifacts->have_dark_sweep = true;
    }

    // --- Power sweep: band variances, linearity, saturation, clearance ---
    bool sweep_usable = false;
    for (double p : sweep.sweep_powers)
        if (p > 0) sweep_usable = true;
    if (sweep_usable) {
        const double dur = sweep_dur;
        std::vector<double> variances;
        std::vector<Spectrum> spectra;
        for (std::size_t i = 0; i < sweep.sweep_powers.size(); ++i) {
            auto res = simulate_homodyne(model, lo_at(sweep.sweep_powers[i]),
                                         sweep.sweep_scenario,
                                         detail::run_config(sweep, dur, 0x400 + i));
            Spectrum s = estimate_psd(res.ac, sweep.sweep_rbw, sweep.sweep_vbw,
                                      sweep.sweep_navg);
            variances.push_back(band_average(detail::subtract_spectra(s, dark),
                                             sweep.band_lo, sweep.band_hi));
            spectra.push_back(std::move(s));
        }

        if (sweep.sweep_powers.size() >= 5) {
            const LinearFit lin = fit_linearity(sweep.sweep_powers, variances, sweep.policy);
            rep.linearity_slope = lin.slope;
            rep.linearity_intercept = lin.intercept;
            rep.linearity_r_squared = lin.r_squared;
            rep.linearity_slope_stderr = lin.slope_stderr;
            rep.linearity_excluded = lin.excluded_points;
            rep.is_shot_noise_limited = shot_noise_limited(lin);
            double onset = std::numeric_limits<double>::infinity();
            for (std::size_t idx : lin.excluded_points)
                onset = std::min(onset, sweep.sweep_powers[idx]);
            rep.saturation_onset_w = onset;

            // Clearance at the highest power the linear fit kept.
            std::size_t best = sweep.sweep_powers.size();
            double best_p = -1.0;
            for (std::size_t i = 0; i < sweep.sweep_powers.size(); ++i) {
                const bool excluded =
                    std::find(lin.excluded_points.begin(), lin.excluded_points.end(), i) !=
                    lin.excluded_points.end();
                if (!excluded && sweep.sweep_powers[i] > best_p) {
                    best_p = sweep.sweep_powers[i];
                    best = i;
                }
            }
            if (best < spectra.size() && spectra[best].covers(sweep.clearance_freq) &&
                dark.covers(sweep.clearance_freq)) {
                const double clr = clearance(spectra[best], dark, sweep.clearance_freq);
                rep.clearance_db = clr;
                rep.clearance_power_w = best_p;
                if (clr > 0) {
                    rep.eta_snr_db = clr;
                    rep.eta_snr_value = eta_snr(clr);
                }
            }
        }

        if (artifacts) {
            artifacts->sweep_powers = sweep.sweep_powers;
            artifacts->band_variances = variances;
            artifacts->sweep_spectra = spectra;
        }
    }

    // --- CMRR: balanced vs addition at the rep rate ---
    if (sweep.cmrr_power > 0) {
        const double dur = duration_for_psd(sweep.sample_rate, sweep.cmrr_rbw,
                                            sweep.cmrr_navg);
        auto bal_res = simulate_homodyne(model, lo_at(sweep.cmrr_power), sweep.cmrr_scenario,
                                         detail::run_config(sweep, dur, 0x500));
        Scenario addition = sweep.cmrr_scenario;
        addition.kind = ScenarioKind::addition;
        auto add_res = simulate_homodyne(model, lo_at(sweep.cmrr_power), addition,
                                         detail::run_config(sweep, dur, 0x501));
        const Spectrum bal =
            estimate_psd(bal_res.ac, sweep.cmrr_rbw, sweep.cmrr_vbw, sweep.cmrr_navg);
        const Spectrum add =
            estimate_psd(add_res.ac, sweep.cmrr_rbw, sweep.cmrr_vbw, sweep.cmrr_navg);
        if (bal.covers(lo.repetition_rate) && add.covers(lo.repetition_rate)) {
            const CmrrEstimate est = cmrr_estimate(bal, add, lo.repetition_rate);
            rep.cmrr_db = est.cmrr_db;
            rep.cmrr_raw_db = est.raw_db;
        }
        if (artifacts) {
            artifacts->cmrr_balanced = bal;
            artifacts->cmrr_addition = add;
            artifacts->have_cmrr = true;
        }
    }

    // --- Efficiency accounting ---
    if (rep.eta_snr_value && rep.eta_coup && model.pd_plus.quantum_efficiency > 0)
        rep.eta_tot = total_efficiency(*rep.eta_snr_value, *rep.eta_coup,
                                       model.pd_plus.quantum_efficiency);
    return rep;
}

}  // namespace homodyne
