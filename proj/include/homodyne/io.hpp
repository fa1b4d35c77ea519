#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "homodyne/characterize.hpp"
#include "homodyne/config.hpp"
#include "homodyne/errors.hpp"
#include "homodyne/spectrum.hpp"
#include "homodyne/trace.hpp"

namespace homodyne {

namespace detail {

inline std::string header_field(const std::string& line, const std::string& name) {
    const std::string tag = name + "=";
    const auto pos = line.find(tag);
    if (pos == std::string::npos)
        throw ParseError("missing header field '" + name + "' in: " + line);
    const auto start = pos + tag.size();
    auto end = line.find(' ', start);
    if (end == std::string::npos) end = line.size();
    return line.substr(start, end - start);
}

inline double parse_double(const std::string& s, const std::string& what) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) throw ParseError("bad number for " + what + ": " + s);
    return v;
}

}  // namespace detail

// --- TimeTrace files: two-column text (time_seconds, value) ---

inline void write_trace(const TimeTrace& trace, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot write trace file: " + path);
    std::fprintf(f, "# homodyne-trace v1\n");
    std::fprintf(f, "# units=%s dt_s=%s seed=%llu n=%zu\n", to_string(trace.units()),
                 format_double(trace.dt()).c_str(),
                 static_cast<unsigned long long>(trace.seed()), trace.size());
    std::fprintf(f, "# time_s value\n");
    const auto& x = trace.samples();
    for (std::size_t i = 0; i < x.size(); ++i)
        std::fprintf(f, "%s %s\n",
                     format_double(static_cast<double>(i) * trace.dt()).c_str(),
                     format_double(x[i]).c_str());
    std::fclose(f);
}

inline TimeTrace read_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace file: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("# homodyne-trace", 0) != 0)
        throw ParseError("not a homodyne trace file: " + path);
    if (!std::getline(in, line)) throw ParseError("trace header truncated: " + path);
    const TraceUnits units = trace_units_from_string(detail::header_field(line, "units"));
    const double dt = detail::parse_double(detail::header_field(line, "dt_s"), "dt_s");
    const auto seed = static_cast<std::uint64_t>(
        std::stoull(detail::header_field(line, "seed")));
    std::vector<double> samples;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream row(line);
        double t = 0.0, v = 0.0;
        if (!(row >> t >> v)) throw ParseError("bad trace row: " + line);
        samples.push_back(v);
    }
    return TimeTrace(std::move(samples), dt, units, seed);
}

// --- Spectrum files: header + two-column (freq_hz, value) ---

inline void write_spectrum(const Spectrum& spec, const std::string& path) {
    spec.validate();
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot write spectrum file: " + path);
    std::fprintf(f, "# homodyne-spectrum v1\n");
    std::fprintf(f, "# units=%s rbw_hz=%s vbw_hz=%s n_averages=%d\n", to_string(spec.units),
                 format_double(spec.rbw).c_str(), format_double(spec.vbw).c_str(),
                 spec.n_averages);
    std::fprintf(f, "# freq_hz value\n");
    for (std::size_t i = 0; i < spec.freqs.size(); ++i)
        std::fprintf(f, "%s %s\n", format_double(spec.freqs[i]).c_str(),
                     format_double(spec.psd[i]).c_str());
    std::fclose(f);
}

inline Spectrum read_spectrum(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open spectrum file: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("# homodyne-spectrum", 0) != 0)
        throw ParseError("not a homodyne spectrum file: " + path);
    if (!std::getline(in, line)) throw ParseError("spectrum header truncated: " + path);
    Spectrum spec;
    spec.units = spectrum_units_from_string(detail::header_field(line, "units"));
    spec.rbw = detail::parse_double(detail::header_field(line, "rbw_hz"), "rbw_hz");
    spec.vbw = detail::parse_double(detail::header_field(line, "vbw_hz"), "vbw_hz");
    spec.n_averages = static_cast<int>(
        detail::parse_double(detail::header_field(line, "n_averages"), "n_averages"));
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream row(line);
        double f = 0.0, v = 0.0;
        if (!(row >> f >> v)) throw ParseError("bad spectrum row: " + line);
        spec.freqs.push_back(f);
        spec.psd.push_back(v);
    }
    spec.validate();
    return spec;
}

// --- CharacterizationReport: flat key-value and JSON forms ---

inline constexpr const char* kUnavailable = "unavailable";

namespace detail {

inline void put_opt(KeyValueFile& kv, const std::string& key,
                    const std::optional<double>& v) {
    if (v)
        kv.set_raw(key, format_double(*v));
    else
        kv.set_raw(key, kUnavailable);
}

inline std::optional<double> get_opt(const KeyValueFile& kv, const std::string& key) {
    if (!kv.has(key) || kv.raw(key) == kUnavailable) return std::nullopt;
    return parse_double(kv.raw(key), key);
}

}  // namespace detail

inline KeyValueFile report_to_kv(const CharacterizationReport& r) {
    KeyValueFile kv;
    kv.set_raw("report.format", "homodyne-report-v1");
    kv.set_raw("convention.psd", "single_sided");
    kv.set_raw("convention.db", "10log10_power");
    kv.set_raw("convention.f_star", "omega_star_over_2pi");
    kv.set_raw("convention.uncertainty", "ols_stderr");
    kv.set_raw("convention.snep",
               "lo_shot_noise_equals_electronic_floor_dark_currents_excluded");
    kv.set_raw("seed", std::to_string(r.seed));

    detail::put_opt(kv, "eta_total_plus", r.eta_total_plus);
    detail::put_opt(kv, "eta_total_plus_stderr", r.eta_total_plus_stderr);
    detail::put_opt(kv, "eta_total_minus", r.eta_total_minus);
    detail::put_opt(kv, "eta_total_minus_stderr", r.eta_total_minus_stderr);
    detail::put_opt(kv, "eta_coup", r.eta_coup);

    detail::put_opt(kv, "butterworth_p", r.butter_p);
    detail::put_opt(kv, "butterworth_f_star_hz", r.butter_f_star_hz);
    detail::put_opt(kv, "butterworth_scale", r.butter_scale);
    detail::put_opt(kv, "butterworth_r_squared", r.butter_r_squared);
    detail::put_opt(kv, "bandwidth_3db_hz", r.bandwidth_3db_hz);
    detail::put_opt(kv, "bandwidth_3db_peak_rel_hz", r.bandwidth_3db_peak_rel_hz);

    detail::put_opt(kv, "linearity_slope", r.linearity_slope);
    detail::put_opt(kv, "linearity_intercept", r.linearity_intercept);
    detail::put_opt(kv, "linearity_r_squared", r.linearity_r_squared);
    detail::put_opt(kv, "linearity_slope_stderr", r.linearity_slope_stderr);
    if (r.linearity_r_squared) {
        std::string ex;
        for (std::size_t i = 0; i < r.linearity_excluded.size(); ++i) {
            if (i) ex += ",";
            ex += std::to_string(r.linearity_excluded[i]);
        }
        kv.set_raw("linearity_excluded", ex.empty() ? "none" : ex);
    } else {
        kv.set_raw("linearity_excluded", kUnavailable);
    }
    if (r.is_shot_noise_limited)
        kv.set_bool("shot_noise_limited", *r.is_shot_noise_limited);
    else
        kv.set_raw("shot_noise_limited", kUnavailable);
    detail::put_opt(kv, "saturation_onset_w", r.saturation_onset_w);

    detail::put_opt(kv, "cmrr_db", r.cmrr_db);
    detail::put_opt(kv, "cmrr_raw_db", r.cmrr_raw_db);
    detail::put_opt(kv, "clearance_db", r.clearance_db);
    kv.set_raw("clearance_freq_hz", format_double(r.clearance_freq_hz));
    detail::put_opt(kv, "clearance_power_w", r.clearance_power_w);
    detail::put_opt(kv, "eta_snr_db", r.eta_snr_db);
    detail::put_opt(kv, "eta_snr", r.eta_snr_value);
    detail::put_opt(kv, "eta_tot", r.eta_tot);

    kv.set_raw("snep_w", format_double(r.snep_w));
    detail::put_opt(kv, "electronic_noise_density_a_rthz", r.electronic_noise_density_a_rthz);

    kv.set_raw("closed_form.p", format_double(r.closed_form_p));
    kv.set_raw("closed_form.f_star_hz", format_double(r.closed_form_f_star_hz));
    kv.set_raw("closed_form.bw3db_f_conv_hz", format_double(r.closed_form_bw3db_f_conv_hz));
    kv.set_raw("closed_form.bw3db_omega_conv_hz",
               format_double(r.closed_form_bw3db_omega_conv_hz));
    return kv;
}

inline CharacterizationReport report_from_kv(const KeyValueFile& kv) {
    if (kv.get_str("report.format", "") != "homodyne-report-v1")
        throw ParseError("not a homodyne report");
    CharacterizationReport r;
    r.seed = static_cast<std::uint64_t>(std::stoull(kv.get_str("seed", "0")));
    r.eta_total_plus = detail::get_opt(kv, "eta_total_plus");
    r.eta_total_plus_stderr = detail::get_opt(kv, "eta_total_plus_stderr");
    r.eta_total_minus = detail::get_opt(kv, "eta_total_minus");
    r.eta_total_minus_stderr = detail::get_opt(kv, "eta_total_minus_stderr");
    r.eta_coup = detail::get_opt(kv, "eta_coup");
    r.butter_p = detail::get_opt(kv, "butterworth_p");
    r.butter_f_star_hz = detail::get_opt(kv, "butterworth_f_star_hz");
    r.butter_scale = detail::get_opt(kv, "butterworth_scale");
    r.butter_r_squared = detail::get_opt(kv, "butterworth_r_squared");
    r.bandwidth_3db_hz = detail::get_opt(kv, "bandwidth_3db_hz");
    r.bandwidth_3db_peak_rel_hz = detail::get_opt(kv, "bandwidth_3db_peak_rel_hz");
    r.linearity_slope = detail::get_opt(kv, "linearity_slope");
    r.linearity_intercept = detail::get_opt(kv, "linearity_intercept");
    r.linearity_r_squared = detail::get_opt(kv, "linearity_r_squared");
    r.linearity_slope_stderr = detail::get_opt(kv, "linearity_slope_stderr");
    const std::string ex = kv.get_str("linearity_excluded", kUnavailable);
    if (ex != kUnavailable && ex != "none") {
        std::stringstream ss(ex);
        std::string item;
        while (std::getline(ss, item, ','))
            r.linearity_excluded.push_back(static_cast<std::size_t>(std::stoull(item)));
    }
    const std::string snl = kv.get_str("shot_noise_limited", kUnavailable);
    if (snl != kUnavailable) r.is_shot_noise_limited = (snl == "true");
    r.saturation_onset_w = detail::get_opt(kv, "saturation_onset_w");
    r.cmrr_db = detail::get_opt(kv, "cmrr_db");
    r.cmrr_raw_db = detail::get_opt(kv, "cmrr_raw_db");
    r.clearance_db = detail::get_opt(kv, "clearance_db");
    r.clearance_freq_hz = kv.has("clearance_freq_hz")
                              ? detail::parse_double(kv.raw("clearance_freq_hz"), "clearance")
                              : 0.0;
    r.clearance_power_w = detail::get_opt(kv, "clearance_power_w");
    r.eta_snr_db = detail::get_opt(kv, "eta_snr_db");
    r.eta_snr_value = detail::get_opt(kv, "eta_snr");
    r.eta_tot = detail::get_opt(kv, "eta_tot");
    r.snep_w = detail::parse_double(kv.raw("snep_w"), "snep_w");
    r.electronic_noise_density_a_rthz =
        detail::get_opt(kv, "electronic_noise_density_a_rthz");
    r.closed_form_p = detail::parse_double(kv.raw("closed_form.p"), "closed_form.p");
    r.closed_form_f_star_hz =
        detail::parse_double(kv.raw("closed_form.f_star_hz"), "closed_form.f_star_hz");
    r.closed_form_bw3db_f_conv_hz = detail::parse_double(
        kv.raw("closed_form.bw3db_f_conv_hz"), "closed_form.bw3db_f_conv_hz");
    r.closed_form_bw3db_omega_conv_hz = detail::parse_double(
        kv.raw("closed_form.bw3db_omega_conv_hz"), "closed_form.bw3db_omega_conv_hz");
    return r;
}

inline void write_report(const CharacterizationReport& r, const std::string& path) {
    report_to_kv(r).save(path);
}

inline CharacterizationReport read_report(const std::string& path) {
    KeyValueFile kv;
    kv.load(path);
    return report_from_kv(kv);
}

/// JSON mirror of the key-value report. Infinities are stored as strings
/// since strict JSON has no literal for them.
inline nlohmann::ordered_json report_to_json(const CharacterizationReport& r) {
    nlohmann::ordered_json j;
    const KeyValueFile kv = report_to_kv(r);
    for (const auto& [key, value] : kv.entries()) {
        if (value == kUnavailable) {
            j[key] = nullptr;
            continue;
        }
        char* end = nullptr;
        const double num = std::strtod(value.c_str(), &end);
        if (end != value.c_str() && *end == '\0' && std::isfinite(num))
            j[key] = num;
        else
            j[key] = value;
    }
    return j;
}

inline CharacterizationReport report_from_json(const nlohmann::ordered_json& j) {
    KeyValueFile kv;
    for (const auto& [key, value] : j.items()) {
        if (value.is_null())
            kv.set_raw(key, kUnavailable);
        else if (value.is_number())
            kv.set_raw(key, format_double(value.get<double>()));
        else
            kv.set_raw(key, value.get<std::string>());
    }
    return report_from_kv(kv);
}

inline void write_report_json(const CharacterizationReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report json: " + path);
    out << report_to_json(r).dump(2) << "\n";
}

inline CharacterizationReport read_report_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open report json: " + path);
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ParseError(std::string("bad report json: ") + e.what());
    }
    return report_from_json(j);
}

namespace detail {
inline bool opt_equal(const std::optional<double>& a, const std::optional<double>& b) {
    if (a.has_value() != b.has_value()) return false;
    if (!a) return true;
    if (std::isnan(*a) && std::isnan(*b)) return true;
    return *a == *b;
}
}  // namespace detail

inline bool operator==(const CharacterizationReport& a, const CharacterizationReport& b) {
    using detail::opt_equal;
    return a.seed == b.seed && opt_equal(a.eta_total_plus, b.eta_total_plus) &&
           opt_equal(a.eta_total_plus_stderr, b.eta_total_plus_stderr) &&
           opt_equal(a.eta_total_minus, b.eta_total_minus) &&
           opt_equal(a.eta_total_minus_stderr, b.eta_total_minus_stderr) &&
           opt_equal(a.eta_coup, b.eta_coup) && opt_equal(a.butter_p, b.butter_p) &&
           opt_equal(a.butter_f_star_hz, b.butter_f_star_hz) &&
           opt_equal(a.butter_scale, b.butter_scale) &&
           opt_equal(a.butter_r_squared, b.butter_r_squared) &&
           opt_equal(a.bandwidth_3db_hz, b.bandwidth_3db_hz) &&
           opt_equal(a.bandwidth_3db_peak_rel_hz, b.bandwidth_3db_peak_rel_hz) &&
           opt_equal(a.linearity_slope, b.linearity_slope) &&
           opt_equal(a.linearity_intercept, b.linearity_intercept) &&
           opt_equal(a.linearity_r_squared, b.linearity_r_squared) &&
           opt_equal(a.linearity_slope_stderr, b.linearity_slope_stderr) &&
           a.linearity_excluded == b.linearity_excluded &&
           a.is_shot_noise_limited == b.is_shot_noise_limited &&
           opt_equal(a.saturation_onset_w, b.saturation_onset_w) &&
           opt_equal(a.cmrr_db, b.cmrr_db) && opt_equal(a.cmrr_raw_db, b.cmrr_raw_db) &&
           opt_equal(a.clearance_db, b.clearance_db) &&
           a.clearance_freq_hz == b.clearance_freq_hz &&
           opt_equal(a.clearance_power_w, b.clearance_power_w) &&
           opt_equal(a.eta_snr_db, b.eta_snr_db) &&
           opt_equal(a.eta_snr_value, b.eta_snr_value) && opt_equal(a.eta_tot, b.eta_tot) &&
           a.snep_w == b.snep_w &&
           opt_equal(a.electronic_noise_density_a_rthz, b.electronic_noise_density_a_rthz) &&
           a.closed_form_p == b.closed_form_p &&
           a.closed_form_f_star_hz == b.closed_form_f_star_hz &&
           a.closed_form_bw3db_f_conv_hz == b.closed_form_bw3db_f_conv_hz &&
           a.closed_form_bw3db_omega_conv_hz == b.closed_form_bw3db_omega_conv_hz;
}

// --- report-diff: field-by-field comparison with per-field tolerances ---

struct FieldTolerance {
    double abs_tol = 0.0;
    double rel_tol = 0.0;
};

struct FieldDiff {
    std::string field;
    std::string a, b;
    bool pass = false;
};

/// Defaults reflect how reproducible each figure of merit is run-to-run.
inline std::map<std::string, FieldTolerance> default_report_tolerances() {
    std::map<std::string, FieldTolerance> t;
    t["eta_total_plus"] = {0.02, 0.0};
    t["eta_total_minus"] = {0.025, 0.0};
    t["eta_total_plus_stderr"] = {0.02, 0.0};
    t["eta_total_minus_stderr"] = {0.02, 0.0};
    t["eta_coup"] = {0.02, 0.0};
    t["butterworth_p"] = {0.1, 0.0};
    t["butterworth_f_star_hz"] = {0.0, 0.1};
    t["butterworth_scale"] = {0.05, 0.0};
    t["butterworth_r_squared"] = {0.02, 0.0};
    t["bandwidth_3db_hz"] = {0.0, 0.05};
    t["bandwidth_3db_peak_rel_hz"] = {0.0, 0.05};
    t["linearity_slope"] = {0.0, 0.05};
    t["linearity_intercept"] = {0.0, 1.0};
    t["linearity_r_squared"] = {0.01, 0.0};
    t["linearity_slope_stderr"] = {0.0, 1.0};
    t["saturation_onset_w"] = {0.0, 0.2};
    t["cmrr_db"] = {1.0, 0.0};
    t["cmrr_raw_db"] = {1.0, 0.0};
    t["clearance_db"] = {1.5, 0.0};
    t["eta_snr_db"] = {1.5, 0.0};
    t["eta_snr"] = {0.05, 0.0};
    t["eta_tot"] = {0.02, 0.0};
    t["snep_w"] = {0.0, 0.05};
    t["electronic_noise_density_a_rthz"] = {0.0, 0.05};
    return t;
}

/// Compares two reports field by field. Non-numeric fields must match
/// exactly; numeric fields pass within their tolerance. "unavailable" only
/// matches "unavailable".
inline std::vector<FieldDiff> report_diff(const CharacterizationReport& ra,
                                          const CharacterizationReport& rb,
                                          std::map<std::string, FieldTolerance> tolerances =
                                              default_report_tolerances()) {
    const KeyValueFile ka = report_to_kv(ra);
    const KeyValueFile kb = report_to_kv(rb);
    std::vector<FieldDiff> out;
    for (const auto& [key, va] : ka.entries()) {
        FieldDiff d;
        d.field = key;
        d.a = va;
        d.b = kb.has(key) ? kb.raw(key) : "(missing)";
        if (!kb.has(key)) {
            d.pass = false;
            out.push_back(d);
            continue;
        }
        char* enda = nullptr;
        char* endb = nullptr;
        const double na = std::strtod(va.c_str(), &enda);
        const double nb = std::strtod(d.b.c_str(), &endb);
        const bool numa = enda != va.c_str() && *enda == '\0';
        const bool numb = endb != d.b.c_str() && *endb == '\0';
        if (numa && numb) {
            if (std::isinf(na) || std::isinf(nb)) {
                d.pass = na == nb;
            } else {
                const auto it = tolerances.find(key);
                const double abs_tol = it != tolerances.end() ? it->second.abs_tol : 0.0;
                const double rel_tol = it != tolerances.end() ? it->second.rel_tol : 1e-9;
                const double diff = std::abs(na - nb);
                d.pass = diff <= abs_tol || diff <= rel_tol * std::max(std::abs(na), std::abs(nb));
            }
        } else {
            d.pass = va == d.b;
        }
        out.push_back(d);
    }
    return out;
}

}  // namespace homodyne
