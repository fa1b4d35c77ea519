#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "homodyne/characterize.hpp"
#include "homodyne/detector.hpp"
#include "homodyne/errors.hpp"
#include "homodyne/synth.hpp"

namespace homodyne {

/// Shortest exact text form of a double that parses back to the same value.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace detail {

struct UnitSuffix {
    std::string_view suffix;
    double scale;
};

/// Longest suffix wins; values in the file are multiplied by the scale to
/// reach SI base units. Keys without a recognized suffix are dimensionless.
inline constexpr std::array<UnitSuffix, 39> kUnitSuffixes = {{
    {"_pa_per_rthz", 1e-12},
    {"_fa_per_rthz", 1e-15},
    {"_nv_per_rthz", 1e-9},
    {"_a_per_rthz", 1.0},
    {"_v_per_rthz", 1.0},
    {"_a_per_w", 1.0},
    {"_per_hz", 1.0},
    {"_kohm", 1e3},
    {"_mohm", 1e6},
    {"_ghz", 1e9},
    {"_mhz", 1e6},
    {"_khz", 1e3},
    {"_ohm", 1.0},
    {"_hz", 1.0},
    {"_ms", 1e-3},
    {"_us", 1e-6},
    {"_ns", 1e-9},
    {"_ps", 1e-12},
    {"_mv", 1e-3},
    {"_uv", 1e-6},
    {"_ma", 1e-3},
    {"_ua", 1e-6},
    {"_na", 1e-9},
    {"_pa", 1e-12},
    {"_fa", 1e-15},
    {"_mw", 1e-3},
    {"_uw", 1e-6},
    {"_uf", 1e-6},
    {"_nf", 1e-9},
    {"_pf", 1e-12},
    {"_mm", 1e-3},
    {"_um", 1e-6},
    {"_nm", 1e-9},
    {"_s", 1.0},
    {"_v", 1.0},
    {"_a", 1.0},
    {"_w", 1.0},
    {"_f", 1.0},
    {"_m", 1.0},
}};

inline double unit_scale(std::string_view key) {
    for (const auto& u : kUnitSuffixes)
        if (key.size() > u.suffix.size() &&
            key.substr(key.size() - u.suffix.size()) == u.suffix)
            return u.scale;
    return 1.0;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Ordered key = value store with '#' comments and unit-suffixed numeric keys.
class KeyValueFile {
public:
    void parse(const std::string& text) {
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ParseError("config line " + std::to_string(lineno) + ": missing '='");
            const std::string key = detail::trim(line.substr(0, eq));
            const std::string value = detail::trim(line.substr(eq + 1));
            if (key.empty())
                throw ParseError("config line " + std::to_string(lineno) + ": empty key");
            set_raw(key, value);
        }
    }

    void load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open config file: " + path);
        std::stringstream buf;
        buf << in.rdbuf();
        parse(buf.str());
    }

    std::string serialize() const {
        std::string out;
        for (const auto& [k, v] : entries_) {
            out += k;
            out += " = ";
            out += v;
            out += "\n";
        }
        return out;
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write config file: " + path);
        out << serialize();
    }

    bool has(const std::string& key) const { return index_.count(key) != 0; }

    const std::string& raw(const std::string& key) const {
        auto it = index_.find(key);
        if (it == index_.end()) throw ParseError("missing config key: " + key);
        return entries_[it->second].second;
    }

    double get_num(const std::string& key) const {
        const std::string& v = raw(key);
        char* end = nullptr;
        const double parsed = std::strtod(v.c_str(), &end);
        if (end == v.c_str() || detail::trim(end)[0] != '\0')
            throw ParseError("config key " + key + ": not a number: " + v);
        return parsed * detail::unit_scale(key);
    }

    double get_num(const std::string& key, double fallback) const {
        return has(key) ? get_num(key) : fallback;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string& v = raw(key);
        if (v == "true") return true;
        if (v == "false") return false;
        throw ParseError("config key " + key + ": expected true/false, got " + v);
    }

    std::string get_str(const std::string& key, const std::string& fallback) const {
        return has(key) ? raw(key) : fallback;
    }

    std::vector<double> get_list(const std::string& key) const {
        const double scale = detail::unit_scale(key);
        std::vector<double> out;
        std::stringstream ss(raw(key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = detail::trim(item);
            if (item.empty()) continue;
            char* end = nullptr;
            const double parsed = std::strtod(item.c_str(), &end);
            if (end == item.c_str())
                throw ParseError("config key " + key + ": bad list element: " + item);
            out.push_back(parsed * scale);
        }
        return out;
    }

    void set_raw(const std::string& key, const std::string& value) {
        auto it = index_.find(key);
        if (it != index_.end()) {
            entries_[it->second].second = value;
        } else {
            index_[key] = entries_.size();
            entries_.emplace_back(key, value);
        }
    }

    /// Stores an SI value under a (possibly unit-suffixed) key.
    void set_num(const std::string& key, double si_value) {
        set_raw(key, format_double(si_value / detail::unit_scale(key)));
    }

    void set_bool(const std::string& key, bool v) { set_raw(key, v ? "true" : "false"); }

    void set_list(const std::string& key, const std::vector<double>& si_values) {
        const double scale = detail::unit_scale(key);
        std::string out;
        for (std::size_t i = 0; i < si_values.size(); ++i) {
            if (i) out += ",";
            out += format_double(si_values[i] / scale);
        }
        set_raw(key, out);
    }

    const std::vector<std::pair<std::string, std::string>>& entries() const {
        return entries_;
    }

private:
    mutable std::vector<std::pair<std::string, std::string>> entries_;
    std::map<std::string, std::size_t> index_;
};

/// Full run setup: device, source, and sweep plan.
struct Config {
    DetectorModel model;
    LocalOscillator lo;
    SweepConfig sweep;
};

namespace detail {

inline void pd_to_kv(KeyValueFile& kv, const std::string& prefix, const PhotodiodeParams& pd) {
    kv.set_num(prefix + ".responsivity_a_per_w", pd.responsivity);
    kv.set_num(prefix + ".junction_capacitance_pf", pd.junction_capacitance);
    kv.set_num(prefix + ".shunt_resistance_kohm", pd.shunt_resistance);
    kv.set_num(prefix + ".dark_current_ua", pd.dark_current);
    kv.set_num(prefix + ".active_diameter_um", pd.active_diameter);
    kv.set_num(prefix + ".reverse_bias_v", pd.reverse_bias);
    kv.set_num(prefix + ".quantum_efficiency", pd.quantum_efficiency);
    kv.set_num(prefix + ".coupling_efficiency", pd.coupling_efficiency);
}

inline PhotodiodeParams pd_from_kv(const KeyValueFile& kv, const std::string& prefix) {
    PhotodiodeParams pd;
    pd.responsivity = kv.get_num(prefix + ".responsivity_a_per_w");
    pd.junction_capacitance = kv.get_num(prefix + ".junction_capacitance_pf");
    pd.shunt_resistance = kv.get_num(prefix + ".shunt_resistance_kohm");
    pd.dark_current = kv.get_num(prefix + ".dark_current_ua");
    pd.active_diameter = kv.get_num(prefix + ".active_diameter_um");
    pd.reverse_bias = kv.get_num(prefix + ".reverse_bias_v");
    pd.quantum_efficiency = kv.get_num(prefix + ".quantum_efficiency");
    pd.coupling_efficiency = kv.get_num(prefix + ".coupling_efficiency");
    return pd;
}

inline void scenario_to_kv(KeyValueFile& kv, const std::string& prefix, const Scenario& s) {
    kv.set_raw(prefix + ".kind", to_string(s.kind));
    kv.set_num(prefix + ".arm_imbalance", s.arm_imbalance);
    kv.set_num(prefix + ".path_delay_ps", s.path_delay);
}

inline ScenarioKind scenario_kind_from_string(const std::string& s) {
    if (s == "balanced") return ScenarioKind::balanced;
    if (s == "blocked_plus") return ScenarioKind::blocked_plus;
    if (s == "blocked_minus") return ScenarioKind::blocked_minus;
    if (s == "addition") return ScenarioKind::addition;
    throw ParseError("unknown scenario kind: " + s);
}

inline Scenario scenario_from_kv(const KeyValueFile& kv, const std::string& prefix,
                                 const Scenario& fallback) {
    Scenario s = fallback;
    if (kv.has(prefix + ".kind"))
        s.kind = scenario_kind_from_string(kv.raw(prefix + ".kind"));
    s.arm_imbalance = kv.get_num(prefix + ".arm_imbalance", s.arm_imbalance);
    s.path_delay = kv.get_num(prefix + ".path_delay_ps", s.path_delay);
    return s;
}

}  // namespace detail

inline void config_to_kv(const Config& c, KeyValueFile& kv) {
    detail::pd_to_kv(kv, "detector.pd_plus", c.model.pd_plus);
    detail::pd_to_kv(kv, "detector.pd_minus", c.model.pd_minus);
    kv.set_num("detector.opamp.gain_bandwidth_mhz", c.model.opamp.gain_bandwidth_product);
    kv.set_num("detector.opamp.voltage_noise_nv_per_rthz", c.model.opamp.voltage_noise);
    kv.set_num("detector.opamp.current_noise_fa_per_rthz", c.model.opamp.current_noise);
    kv.set_num("detector.opamp.input_capacitance_pf", c.model.opamp.input_capacitance);
    kv.set_num("detector.opamp.input_bias_offset_current_pa",
               c.model.opamp.input_bias_offset_current);
    kv.set_num("detector.opamp.output_swing_v", c.model.opamp.output_swing);
    kv.set_num("detector.feedback.gain_resistor_kohm", c.model.feedback.gain_resistor);
    kv.set_num("detector.feedback.feedback_capacitor_pf", c.model.feedback.feedback_capacitor);
    kv.set_num("detector.electronic_noise_pa_per_rthz", c.model.electronic_noise_density);
    kv.set_num("detector.v_offset_mv", c.model.v_offset);
    kv.set_num("detector.sa_impedance_ohm", c.model.sa_impedance);
    kv.set_num("detector.response.p", c.model.response.p);
    kv.set_num("detector.response.f_star_mhz", c.model.response.f_star);

    kv.set_num("lo.wavelength_um", c.lo.wavelength);
    kv.set_num("lo.average_power_mw", c.lo.average_power);
    kv.set_num("lo.repetition_rate_mhz", c.lo.repetition_rate);
    kv.set_num("lo.pulse_fwhm_ps", c.lo.pulse_fwhm);
    kv.set_num("lo.rin_per_hz", c.lo.rin_density);

    kv.set_num("synth.sample_rate_mhz", c.sweep.sample_rate);
    kv.set_raw("synth.seed", std::to_string(c.sweep.seed));
    kv.set_bool("synth.delta_pulses", c.sweep.delta_pulses);

    kv.set_list("sweep.dc_powers_uw", c.sweep.dc_powers);
    kv.set_num("sweep.dc_duration_ms", c.sweep.dc_duration);
    kv.set_list("sweep.powers_mw", c.sweep.sweep_powers);
    kv.set_raw("sweep.navg", std::to_string(c.sweep.sweep_navg));
    kv.set_num("sweep.rbw_khz", c.sweep.sweep_rbw);
    kv.set_num("sweep.vbw_khz", c.sweep.sweep_vbw);
    detail::scenario_to_kv(kv, "sweep.scenario", c.sweep.sweep_scenario);

    kv.set_num("gain.power_mw", c.sweep.gain_power);
    kv.set_raw("gain.navg", std::to_string(c.sweep.gain_navg));
    kv.set_num("gain.rbw_khz", c.sweep.gain_rbw);
    kv.set_num("gain.vbw_hz", c.sweep.gain_vbw);
    detail::scenario_to_kv(kv, "gain.scenario", c.sweep.gain_scenario);
    kv.set_num("gain.plateau_lo_mhz", c.sweep.plateau_lo);
    kv.set_num("gain.plateau_hi_mhz", c.sweep.plateau_hi);

    kv.set_num("cmrr.power_uw", c.sweep.cmrr_power);
    kv.set_raw("cmrr.navg", std::to_string(c.sweep.cmrr_navg));
    kv.set_num("cmrr.rbw_khz", c.sweep.cmrr_rbw);
    kv.set_num("cmrr.vbw_khz", c.sweep.cmrr_vbw);
    detail::scenario_to_kv(kv, "cmrr.scenario", c.sweep.cmrr_scenario);

    kv.set_raw("dark.navg", std::to_string(c.sweep.dark_navg));
    kv.set_num("analysis.band_lo_mhz", c.sweep.band_lo);
    kv.set_num("analysis.band_hi_mhz", c.sweep.band_hi);
    kv.set_num("analysis.clearance_freq_mhz", c.sweep.clearance_freq);
    kv.set_num("analysis.saturation_threshold", c.sweep.policy.rel_threshold);
}

inline Config config_from_kv(const KeyValueFile& kv) {
    Config c;
    c.model.pd_plus = detail::pd_from_kv(kv, "detector.pd_plus");
    c.model.pd_minus = detail::pd_from_kv(kv, "detector.pd_minus");
    c.model.opamp.gain_bandwidth_product = kv.get_num("detector.opamp.gain_bandwidth_mhz");
    c.model.opamp.voltage_noise = kv.get_num("detector.opamp.voltage_noise_nv_per_rthz");
    c.model.opamp.current_noise = kv.get_num("detector.opamp.current_noise_fa_per_rthz");
    c.model.opamp.input_capacitance = kv.get_num("detector.opamp.input_capacitance_pf");
    c.model.opamp.input_bias_offset_current =
        kv.get_num("detector.opamp.input_bias_offset_current_pa");
    c.model.opamp.output_swing = kv.get_num("detector.opamp.output_swing_v");
    c.model.feedback.gain_resistor = kv.get_num("detector.feedback.gain_resistor_kohm");
    c.model.feedback.feedback_capacitor =
        kv.get_num("detector.feedback.feedback_capacitor_pf");
    c.model.electronic_noise_density = kv.get_num("detector.electronic_noise_pa_per_rthz");
    c.model.v_offset = kv.get_num("detector.v_offset_mv");
    c.model.sa_impedance = kv.get_num("detector.sa_impedance_ohm");
    c.model.response.p = kv.get_num("detector.response.p");
    c.model.response.f_star = kv.get_num("detector.response.f_star_mhz");

    c.lo.wavelength = kv.get_num("lo.wavelength_um");
    c.lo.average_power = kv.get_num("lo.average_power_mw");
    c.lo.repetition_rate = kv.get_num("lo.repetition_rate_mhz");
    c.lo.pulse_fwhm = kv.get_num("lo.pulse_fwhm_ps");
    c.lo.rin_density = kv.get_num("lo.rin_per_hz", 0.0);

    c.sweep.sample_rate = kv.get_num("synth.sample_rate_mhz");
    c.sweep.seed = static_cast<std::uint64_t>(std::stoull(kv.get_str("synth.seed", "1")));
    c.sweep.delta_pulses = kv.get_bool("synth.delta_pulses", true);

    c.sweep.dc_powers = kv.has("sweep.dc_powers_uw") ? kv.get_list("sweep.dc_powers_uw")
                                                     : std::vector<double>{};
    c.sweep.dc_duration = kv.get_num("sweep.dc_duration_ms", c.sweep.dc_duration);
    c.sweep.sweep_powers =
        kv.has("sweep.powers_mw") ? kv.get_list("sweep.powers_mw") : std::vector<double>{};
    c.sweep.sweep_navg = static_cast<int>(kv.get_num("sweep.navg", c.sweep.sweep_navg));
    c.sweep.sweep_rbw = kv.get_num("sweep.rbw_khz", c.sweep.sweep_rbw);
    c.sweep.sweep_vbw = kv.get_num("sweep.vbw_khz", c.sweep.sweep_vbw);
    c.sweep.sweep_scenario =
        detail::scenario_from_kv(kv, "sweep.scenario", c.sweep.sweep_scenario);

    c.sweep.gain_power = kv.get_num("gain.power_mw", c.sweep.gain_power);
    c.sweep.gain_navg = static_cast<int>(kv.get_num("gain.navg", c.sweep.gain_navg));
    c.sweep.gain_rbw = kv.get_num("gain.rbw_khz", c.sweep.gain_rbw);
    c.sweep.gain_vbw = kv.get_num("gain.vbw_hz", c.sweep.gain_vbw);
    c.sweep.gain_scenario =
        detail::scenario_from_kv(kv, "gain.scenario", c.sweep.gain_scenario);
    c.sweep.plateau_lo = kv.get_num("gain.plateau_lo_mhz", c.sweep.plateau_lo);
    c.sweep.plateau_hi = kv.get_num("gain.plateau_hi_mhz", c.sweep.plateau_hi);

    c.sweep.cmrr_power = kv.get_num("cmrr.power_uw", c.sweep.cmrr_power);
    c.sweep.cmrr_navg = static_cast<int>(kv.get_num("cmrr.navg", c.sweep.cmrr_navg));
    c.sweep.cmrr_rbw = kv.get_num("cmrr.rbw_khz", c.sweep.cmrr_rbw);
    c.sweep.cmrr_vbw = kv.get_num("cmrr.vbw_khz", c.sweep.cmrr_vbw);
    c.sweep.cmrr_scenario =
        detail::scenario_from_kv(kv, "cmrr.scenario", c.sweep.cmrr_scenario);

    c.sweep.dark_navg = static_cast<int>(kv.get_num("dark.navg", c.sweep.dark_navg));
    c.sweep.band_lo = kv.get_num("analysis.band_lo_mhz", c.sweep.band_lo);
    c.sweep.band_hi = kv.get_num("analysis.band_hi_mhz", c.sweep.band_hi);
    c.sweep.clearance_freq = kv.get_num("analysis.clearance_freq_mhz", c.sweep.clearance_freq);
    c.sweep.policy.rel_threshold =
        kv.get_num("analysis.saturation_threshold", c.sweep.policy.rel_threshold);
    return c;
}

/// Built-in device preset: the characterized 2 um detector. Component values
/// follow the device's data sheet set; coupling efficiencies reproduce the
/// measured per-arm totals, the response shape is the measured fit, the
/// path delay reproduces the measured rep-rate rejection, and the sweep
/// imbalance places the saturation knee at its observed onset.
inline Config paper_2um_config() {
    Config c;
    PhotodiodeParams pd;
    pd.responsivity = 1.45;              // A/W
    pd.junction_capacitance = 9e-12;     // F
    pd.shunt_resistance = 60e3;          // ohm
    pd.dark_current = 20e-6;             // A
    pd.active_diameter = 250e-6;         // m
    pd.reverse_bias = 2.4;               // V
    pd.quantum_efficiency = 0.865;
    c.model.pd_plus = pd;
    c.model.pd_minus = pd;
    c.model.pd_plus.coupling_efficiency = 0.75188113072788296;   // total 0.653
    c.model.pd_minus.coupling_efficiency = 0.75994111222113744;  // total 0.660

    c.model.opamp.gain_bandwidth_product = 410e6;  // Hz
    c.model.opamp.voltage_noise = 4e-9;            // V/rtHz
    c.model.opamp.current_noise = 2.5e-15;         // A/rtHz
    c.model.opamp.input_capacitance = 1.3e-12;     // F
    c.model.opamp.input_bias_offset_current = 1e-12;
    c.model.opamp.output_swing = 3.9;  // V

    c.model.feedback.gain_resistor = 3.9e3;        // ohm
    c.model.feedback.feedback_capacitor = 4.7e-12; // F

    c.model.electronic_noise_density = 2.79e-12;  // A/rtHz
    c.model.v_offset = 2.4e-3;                    // V
    c.model.sa_impedance = 50.0;
    c.model.response = ButterworthShape{1.12, 61e6};

    c.lo.wavelength = 2.07e-6;
    c.lo.average_power = 1e-3;
    c.lo.repetition_rate = 39.5e6;
    c.lo.pulse_fwhm = 2e-12;
    c.lo.rin_density = 0.0;

    c.sweep.sample_rate = 276.5e6;  // 7 samples per pulse period
    c.sweep.seed = 1;
    c.sweep.delta_pulses = true;

    c.sweep.dc_powers = {10e-6, 20e-6, 30e-6, 40e-6, 50e-6, 60e-6, 70e-6, 80e-6};
    c.sweep.dc_duration = 2.4e-4;

    c.sweep.sweep_powers = {0.3e-3, 0.6e-3, 0.9e-3, 1.2e-3, 1.5e-3,
                            1.8e-3, 2.1e-3, 2.4e-3, 2.7e-3, 3.0e-3};
    c.sweep.sweep_navg = 100;
    c.sweep.sweep_rbw = 300e3;
    c.sweep.sweep_vbw = 10e3;
    const double path_delay = 1.6079e-11;  // s, raw rep-rate rejection 54 dB
    c.sweep.sweep_scenario = Scenario{ScenarioKind::balanced, 0.115, path_delay};

    c.sweep.gain_power = 1e-3;
    c.sweep.gain_navg = 200;
    c.sweep.gain_rbw = 100e3;
    c.sweep.gain_vbw = 100.0;
    c.sweep.gain_scenario = Scenario{ScenarioKind::balanced, 0.0, path_delay};
    c.sweep.plateau_lo = 1e6;
    c.sweep.plateau_hi = 3e6;

    c.sweep.cmrr_power = 100e-6;
    c.sweep.cmrr_navg = 40;
    c.sweep.cmrr_rbw = 300e3;
    c.sweep.cmrr_vbw = 300e3;
    c.sweep.cmrr_scenario = Scenario{ScenarioKind::balanced, 0.0, path_delay};

    c.sweep.dark_navg = 200;
    c.sweep.band_lo = 1e6;
    c.sweep.band_hi = 13e6;
    c.sweep.clearance_freq = 5e6;
    return c;
}

inline std::vector<std::string> preset_names() { return {"paper-2um"}; }

inline Config preset_config(const std::string& name) {
    if (name == "paper-2um") return paper_2um_config();
    throw ConfigError("unknown preset: " + name);
}

}  // namespace homodyne
