#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "homodyne/constants.hpp"
#include "homodyne/detector.hpp"
#include "homodyne/errors.hpp"
#include "homodyne/fft.hpp"
#include "homodyne/rng.hpp"
#include "homodyne/trace.hpp"

namespace homodyne {

enum class ScenarioKind { balanced, blocked_plus, blocked_minus, addition };

inline const char* to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::balanced: return "balanced";
        case ScenarioKind::blocked_plus: return "blocked_plus";
        case ScenarioKind::blocked_minus: return "blocked_minus";
        case ScenarioKind::addition: return "addition";
    }
    return "?";
}

/// Illumination scenario. arm_imbalance is the residual unsubtracted
/// common-mode amplitude fraction; path_delay shifts the PD- arm and yields
/// the frequency-dependent part of the rejection.
struct Scenario {
    ScenarioKind kind = ScenarioKind::balanced;
    double arm_imbalance = 0.0;  // fraction in [0,1]
    double path_delay = 0.0;     // s

    void validate() const {
        if (arm_imbalance < 0.0 || arm_imbalance > 1.0)
            throw ConfigError("Scenario: arm_imbalance outside [0,1]");
    }
};

struct SynthConfig {
    double sample_rate = 0.0;  // Hz
    double duration = 0.0;     // s
    std::uint64_t seed = 0;
    bool delta_pulses = true;  // approximate pulses as single-sample impulses

    static constexpr std::size_t kMaxSamples = std::size_t{1} << 28;

    std::size_t sample_count() const {
        return static_cast<std::size_t>(std::llround(duration * sample_rate));
    }

    void validate(const DetectorModel& model) const {
        if (!(sample_rate > 0)) throw ConfigError("SynthConfig: sample_rate must be positive");
        if (!(duration > 0)) throw ConfigError("SynthConfig: duration must be positive");
        if (!(sample_rate > 4.0 * model.response.f_star))
            throw ConfigError("SynthConfig: sample_rate must exceed 4x detector f_star");
        const std::size_t n = sample_count();
        if (n < 2) throw ConfigError("SynthConfig: trace too short");
        if (n > kMaxSamples) throw ConfigError("SynthConfig: trace exceeds memory budget");
    }
};

/// Trace duration giving at least n_averages Welch segments at the given rbw,
/// rounded up to a power-of-two sample count.
inline double duration_for_psd(double fs, double rbw, int n_averages) {
    std::size_t nseg = 1;
    while (fs / static_cast<double>(nseg) > rbw / 2.0) nseg <<= 1;
    const std::size_t needed = nseg + (static_cast<std::size_t>(n_averages) - 1) * nseg / 2;
    std::size_t n = 1;
    while (n < needed) n <<= 1;
    return static_cast<double>(n) / fs;
}

/// Periodic optical power envelope of the pulsed LO (watts). Delta mode
/// deposits each pulse's energy on the two samples bracketing its arrival
/// time (area- and first-moment-exact); Gaussian mode requires the FWHM to be
/// resolvable. Per-pulse energy is normalized exactly, so the time average
/// over any whole number of periods equals lo.average_power.
inline TimeTrace synth_pulse_train(const LocalOscillator& lo, const SynthConfig& cfg) {
    lo.validate();
    if (!(cfg.sample_rate > 0) || !(cfg.duration > 0))
        throw ConfigError("synth_pulse_train: invalid sample_rate/duration");
    const double fs = cfg.sample_rate;
    const double dt = 1.0 / fs;
    const std::size_t n = cfg.sample_count();
    if (n < 2 || n > SynthConfig::kMaxSamples)
        throw ConfigError("synth_pulse_train: sample count out of range");

    const double period = 1.0 / lo.repetition_rate;
    const double e_pulse = lo.average_power * period;  // J per pulse
    std::vector<double> env(n, 0.0);

    const bool delta = cfg.delta_pulses || lo.pulse_fwhm == 0.0;
    if (delta) {
        for (std::size_t k = 0;; ++k) {
            const double pos = static_cast<double>(k) * period * fs;
            const auto i0 = static_cast<std::size_t>(pos);
            if (i0 >= n) break;
            const double a = pos - static_cast<double>(i0);
            env[i0] += e_pulse * fs * (1.0 - a);
            if (i0 + 1 < n) env[i0 + 1] += e_pulse * fs * a;
        }
    } else {
        if (lo.pulse_fwhm < 2.0 * dt)
            throw ConfigError("synth_pulse_train: pulse_fwhm unresolvable at this "
                              "sample rate and delta mode not requested");
        const double sigma = lo.pulse_fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
        const auto reach = static_cast<std::ptrdiff_t>(std::ceil(5.0 * sigma * fs));
        for (std::size_t k = 0;; ++k) {
            const double center = static_cast<double>(k) * period;
            const auto ic = static_cast<std::ptrdiff_t>(std::llround(center * fs));
            if (ic - reach >= static_cast<std::ptrdiff_t>(n)) break;
            const std::ptrdiff_t lo_i = std::max<std::ptrdiff_t>(0, ic - reach);
            const std::ptrdiff_t hi_i =
                std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - 1, ic + reach);
            if (lo_i > hi_i) continue;
            double area = 0.0;
            for (std::ptrdiff_t i = lo_i; i <= hi_i; ++i) {
                const double u = (static_cast<double>(i) * dt - center) / sigma;
                area += std::exp(-0.5 * u * u);
            }
            if (area <= 0.0) continue;
            const double scale = e_pulse * fs / area;
            for (std::ptrdiff_t i = lo_i; i <= hi_i; ++i) {
                const double u = (static_cast<double>(i) * dt - center) / sigma;
                env[static_cast<std::size_t>(i)] += scale * std::exp(-0.5 * u * u);
            }
        }
    }

    if (lo.rin_density > 0.0) {
        NormalSampler rin(derive_seed(cfg.seed, 0));
        const double sig = std::sqrt(lo.rin_density * fs / 2.0);
        for (double& v : env) v = std::max(0.0, v * (1.0 + sig * rin()));
    }
    return TimeTrace(std::move(env), dt, TraceUnits::watts, cfg.seed);
}

namespace detail {
/// Circular shift by a possibly fractional number of samples (linear
/// interpolation between neighbors). Delay is in seconds.
inline std::vector<double> circular_delay(const std::vector<double>& x, double delay_s,
                                          double fs) {
    if (delay_s == 0.0) return x;
    const double shift = delay_s * fs;
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    const auto d = static_cast<std::ptrdiff_t>(std::floor(shift));
    const double a = shift - static_cast<double>(d);
    std::vector<double> out(x.size());
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        std::ptrdiff_t j0 = (i - d) % n;
        if (j0 < 0) j0 += n;
        std::ptrdiff_t j1 = j0 - 1;
        if (j1 < 0) j1 += n;
        out[static_cast<std::size_t>(i)] =
            (1.0 - a) * x[static_cast<std::size_t>(j0)] + a * x[static_cast<std::size_t>(j1)];
    }
    return out;
}
}  // namespace detail

/// Photocurrents at PD+ and PD- (amps) for the incident power envelope.
/// Each diode carries its scenario share of the envelope plus dark current
/// plus white Gaussian shot noise of single-sided PSD 2q x (instantaneous
/// mean current), independent across the diodes. Classical envelope
/// fluctuations stay common to both arms through the shared envelope.
inline std::pair<TimeTrace, TimeTrace> synth_photocurrents(const TimeTrace& envelope,
                                                           const DetectorModel& model,
                                                           const Scenario& scenario,
                                                           std::uint64_t seed) {
    if (envelope.units() != TraceUnits::watts)
        throw ConfigError("synth_photocurrents: envelope must be in watts");
    scenario.validate();
    model.validate();
    const double fs = envelope.sample_rate();

    double share_plus = 0.0, share_minus = 0.0;
    switch (scenario.kind) {
        case ScenarioKind::balanced:
            share_plus = (1.0 + scenario.arm_imbalance) / 2.0;
            share_minus = (1.0 - scenario.arm_imbalance) / 2.0;
            break;
        case ScenarioKind::blocked_plus:
            share_plus = 0.0;
            share_minus = 1.0;
            break;
        case ScenarioKind::blocked_minus:
        case ScenarioKind::addition:
            share_plus = 1.0;
            share_minus = 0.0;
            break;
    }

    const auto& env = envelope.samples();
    const std::vector<double> env_minus =
        (share_minus != 0.0 && scenario.path_delay != 0.0)
            ? detail::circular_delay(env, scenario.path_delay, fs)
            : env;

    const double r_plus = model.pd_plus.effective_responsivity();
    const double r_minus = model.pd_minus.effective_responsivity();
    const double dark_plus = model.pd_plus.dark_current;
    const double dark_minus = model.pd_minus.dark_current;

    NormalSampler noise_plus(derive_seed(seed, 1));
    NormalSampler noise_minus(derive_seed(seed, 2));
    const std::size_t n = env.size();
    std::vector<double> ip(n), im(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double mean_p = r_plus * share_plus * env[i] + dark_plus;
        const double mean_m = r_minus * share_minus * env_minus[i] + dark_minus;
        ip[i] = mean_p + std::sqrt(kElectronCharge * std::max(mean_p, 0.0) * fs) * noise_plus();
        im[i] = mean_m + std::sqrt(kElectronCharge * std::max(mean_m, 0.0) * fs) * noise_minus();
    }
    return {TimeTrace(std::move(ip), envelope.dt(), TraceUnits::amps, seed),
            TimeTrace(std::move(im), envelope.dt(), TraceUnits::amps, seed)};
}

/// Transimpedance stage: R_f times the current trace filtered by the model
/// response. Realized as a zero-phase frequency-sampled magnitude filter on
/// the trace's rFFT grid (circular), so the magnitude matches gain_spectrum
/// exactly at the grid points and the DC gain is exactly R_f.
inline TimeTrace tia_filter(const TimeTrace& current, const DetectorModel& model) {
    if (current.units() != TraceUnits::amps)
        throw ConfigError("tia_filter: input trace must be in amps");
    model.validate();
    const double fs = current.sample_rate();
    if (fs < 2.0 * model.response.f_star)
        throw ConfigError("tia_filter: sample rate too low to realize the response");

    auto bins = rfft(current.samples());
    const std::size_t n = current.size();
    const double df = fs / static_cast<double>(n);
    for (std::size_t k = 0; k < bins.size(); ++k)
        bins[k] *= std::sqrt(gain_value(model.response, df * static_cast<double>(k)));
    auto filtered = irfft(bins, n);
    const double rf = model.feedback.gain_resistor;
    for (double& v : filtered) v *= rf;
    return TimeTrace(std::move(filtered), current.dt(), TraceUnits::volts, current.seed());
}

/// Smooth symmetric soft clip with rail A = output_swing:
/// y = v / (1 + (v/A)^8)^(1/8). Identity to 0.05% for |v| < A/2.
inline TimeTrace apply_saturation(const TimeTrace& voltage, const DetectorModel& model) {
    if (voltage.units() != TraceUnits::volts)
        throw ConfigError("apply_saturation: input trace must be in volts");
    const double rail = model.opamp.output_swing;
    std::vector<double> out(voltage.samples());
    for (double& v : out) {
        const double u = v / rail;
        const double u2 = u * u;
        const double u8 = u2 * u2 * u2 * u2;
        v = v / std::pow(1.0 + u8, 0.125);
    }
    return TimeTrace(std::move(out), voltage.dt(), TraceUnits::volts, voltage.seed());
}

struct SimulationResult {
    TimeTrace ac;     // volts, mean removed (bias-tee AC port)
    double dc_volts;  // mean of the clipped output (bias-tee DC port)
};

/// Full chain: envelope -> photocurrents -> subtraction -> input-referred
/// electronic noise -> TIA -> offset -> soft clip -> DC/AC split.
inline SimulationResult simulate_homodyne(const DetectorModel& model,
                                          const LocalOscillator& lo,
                                          const Scenario& scenario,
                                          const SynthConfig& cfg) {
    model.validate_against(lo);
    scenario.validate();
    cfg.validate(model);

    const TimeTrace envelope = synth_pulse_train(lo, cfg);
    auto [ip, im] = synth_photocurrents(envelope, model, scenario, cfg.seed);

    const double fs = cfg.sample_rate;
    NormalSampler electronic(derive_seed(cfg.seed, 3));
    const double sig_e = model.electronic_noise_density * std::sqrt(fs / 2.0);
    std::vector<double> diff(ip.size());
    const auto& p = ip.samples();
    const auto& m = im.samples();
    for (std::size_t i = 0; i < diff.size(); ++i)
        diff[i] = p[i] - m[i] + sig_e * electronic();

    TimeTrace voltage =
        tia_filter(TimeTrace(std::move(diff), envelope.dt(), TraceUnits::amps, cfg.seed), model);
    for (double& v : voltage.samples()) v += model.v_offset;
    TimeTrace clipped = apply_saturation(voltage, model);

    const double dc = clipped.mean();
    for (double& v : clipped.samples()) v -= dc;
    return SimulationResult{std::move(clipped), dc};
}

}  // namespace homodyne
