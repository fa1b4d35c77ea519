// Command-line front end: simulation runs, full characterization, report
// diffing, and preset management. All outputs are deterministic text files;
// every run writes a manifest that reproduces it bit-exactly via --config.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "homodyne/homodyne.hpp"

namespace fs = std::filesystem;
using namespace homodyne;

namespace {

// Exit codes (documented in the README):
//   0 ok, 2 config/usage, 3 parse, 4 domain/band, 5 saturation,
//   6 insufficient data, 7 fit/regression failure, 8 io, 10 diff mismatch
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitParse = 3;
constexpr int kExitDomain = 4;
constexpr int kExitSaturation = 5;
constexpr int kExitInsufficient = 6;
constexpr int kExitFit = 7;
constexpr int kExitIo = 8;
constexpr int kExitDiff = 10;

struct PlanOptions {
    std::string preset;
    std::string config_path;
    std::string experiment;
    std::string out_dir;
    std::string ingest_dir;
    std::vector<double> sweep_watts;
    std::optional<std::uint64_t> seed;
    std::optional<double> rbw, vbw;
    std::optional<double> band_lo, band_hi;
    std::optional<double> clearance_freq;
    bool write_traces = true;
};

Config load_plan_config(const PlanOptions& opt, KeyValueFile* raw_out = nullptr) {
    if (!opt.preset.empty() && !opt.config_path.empty())
        throw ConfigError("give either --preset or --config, not both");
    KeyValueFile kv;
    if (!opt.config_path.empty()) {
        kv.load(opt.config_path);
    } else {
        const std::string name = opt.preset.empty() ? "paper-2um" : opt.preset;
        config_to_kv(preset_config(name), kv);
    }
    Config cfg = config_from_kv(kv);
    if (opt.seed) cfg.sweep.seed = *opt.seed;
    if (!opt.sweep_watts.empty()) {
        cfg.sweep.sweep_powers = opt.sweep_watts;
        cfg.sweep.dc_powers = opt.sweep_watts;
    }
    if (opt.rbw) cfg.sweep.sweep_rbw = *opt.rbw;
    if (opt.vbw) cfg.sweep.sweep_vbw = *opt.vbw;
    if (opt.band_lo) cfg.sweep.band_lo = *opt.band_lo;
    if (opt.band_hi) cfg.sweep.band_hi = *opt.band_hi;
    if (opt.clearance_freq) cfg.sweep.clearance_freq = *opt.clearance_freq;
    cfg.model.validate_against(cfg.lo);
    if (raw_out) *raw_out = kv;
    return cfg;
}

void write_manifest(const Config& cfg, const std::string& command,
                    const std::string& experiment, bool traces, const fs::path& dir) {
    KeyValueFile kv;
    kv.set_raw("plan.command", command);
    if (!experiment.empty()) kv.set_raw("plan.experiment", experiment);
    kv.set_bool("plan.traces", traces);
    config_to_kv(cfg, kv);
    kv.save((dir / "manifest.txt").string());
}

SynthConfig make_run(const Config& cfg, double duration, std::uint64_t tag) {
    SynthConfig run;
    run.sample_rate = cfg.sweep.sample_rate;
    run.duration = duration;
    run.seed = derive_seed(cfg.sweep.seed, tag);
    run.delta_pulses = cfg.sweep.delta_pulses;
    return run;
}

LocalOscillator lo_at(const Config& cfg, double power) {
    LocalOscillator lo = cfg.lo;
    lo.average_power = power;
    return lo;
}

void write_columns(const fs::path& path, const std::string& format_tag,
                   const std::vector<std::string>& column_names,
                   const std::vector<std::vector<double>>& columns) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot write " + path.string());
    std::fprintf(f, "# %s\n#", format_tag.c_str());
    for (const auto& name : column_names) std::fprintf(f, " %s", name.c_str());
    std::fprintf(f, "\n");
    const std::size_t rows = columns.empty() ? 0 : columns.front().size();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < columns.size(); ++c)
            std::fprintf(f, "%s%s", c ? " " : "", format_double(columns[c][r]).c_str());
        std::fprintf(f, "\n");
    }
    std::fclose(f);
}

std::vector<std::vector<double>> read_columns(const fs::path& path,
                                              const std::string& format_tag,
                                              std::size_t n_columns) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("# " + format_tag, 0) != 0)
        throw ParseError(path.string() + ": expected format " + format_tag);
    std::vector<std::vector<double>> cols(n_columns);
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream row(line);
        for (std::size_t c = 0; c < n_columns; ++c) {
            double v = 0.0;
            if (!(row >> v)) throw ParseError(path.string() + ": short row: " + line);
            cols[c].push_back(v);
        }
    }
    return cols;
}

// --- simulate experiments ---

void run_dc_sweep(const Config& cfg, const fs::path& out, bool traces) {
    std::vector<double> volts_plus, volts_minus;
    for (std::size_t i = 0; i < cfg.sweep.dc_powers.size(); ++i) {
        auto res_p = simulate_homodyne(cfg.model, lo_at(cfg, cfg.sweep.dc_powers[i]),
                                       Scenario{ScenarioKind::blocked_minus, 0.0, 0.0},
                                       make_run(cfg, cfg.sweep.dc_duration, 0x100 + i));
        auto res_m = simulate_homodyne(cfg.model, lo_at(cfg, cfg.sweep.dc_powers[i]),
                                       Scenario{ScenarioKind::blocked_plus, 0.0, 0.0},
                                       make_run(cfg, cfg.sweep.dc_duration, 0x200 + i));
        volts_plus.push_back(res_p.dc_volts);
        volts_minus.push_back(res_m.dc_volts);
        if (traces) {
            char name[64];
            std::snprintf(name, sizeof(name), "trace_dc_plus_%02zu.txt", i);
            write_trace(res_p.ac, (out / name).string());
            std::snprintf(name, sizeof(name), "trace_dc_minus_%02zu.txt", i);
            write_trace(res_m.ac, (out / name).string());
        }
    }
    write_columns(out / "dc_response.tsv", "homodyne-dc-response v1",
                  {"power_w", "v_plus_v", "v_minus_v"},
                  {cfg.sweep.dc_powers, volts_plus, volts_minus});
}

void run_gain_spectrum(const Config& cfg, const fs::path& out, bool traces) {
    const double dur = duration_for_psd(cfg.sweep.sample_rate, cfg.sweep.gain_rbw,
                                        std::max(cfg.sweep.gain_navg, cfg.sweep.dark_navg));
    auto dark_res = simulate_homodyne(cfg.model, lo_at(cfg, 0.0),
                                      Scenario{ScenarioKind::balanced, 0.0, 0.0},
                                      make_run(cfg, dur, 0x300));
    auto shot_res = simulate_homodyne(cfg.model, lo_at(cfg, cfg.sweep.gain_power),
                                      cfg.sweep.gain_scenario, make_run(cfg, dur, 0x301));
    const Spectrum dark =
        estimate_psd(dark_res.ac, cfg.sweep.gain_rbw, cfg.sweep.gain_vbw, cfg.sweep.dark_navg);
    const Spectrum shot =
        estimate_psd(shot_res.ac, cfg.sweep.gain_rbw, cfg.sweep.gain_vbw, cfg.sweep.gain_navg);
    write_spectrum(dark, (out / "dark.spectrum").string());
    write_spectrum(shot, (out / "shot.spectrum").string());
    Spectrum corrected = dark;
    for (std::size_t i = 0; i < corrected.psd.size(); ++i)
        corrected.psd[i] = shot.psd[i] - dark.psd[i];
    write_spectrum(corrected, (out / "corrected_gain.spectrum").string());
    if (traces) {
        write_trace(dark_res.ac, (out / "trace_dark.txt").string());
        write_trace(shot_res.ac, (out / "trace_shot.txt").string());
    }
}

void run_power_sweep(const Config& cfg, const fs::path& out, bool traces) {
    if (cfg.sweep.sweep_powers.empty())
        throw ConfigError("power-sweep: empty sweep power list");
    const double dur = duration_for_psd(cfg.sweep.sample_rate, cfg.sweep.sweep_rbw,
                                        std::max(cfg.sweep.sweep_navg, cfg.sweep.dark_navg));
    auto dark_res = simulate_homodyne(cfg.model, lo_at(cfg, 0.0),
                                      Scenario{ScenarioKind::balanced, 0.0, 0.0},
                                      make_run(cfg, dur, 0x302));
    const Spectrum dark = estimate_psd(dark_res.ac, cfg.sweep.sweep_rbw, cfg.sweep.sweep_vbw,
                                       cfg.sweep.dark_navg);
    write_spectrum(dark, (out / "dark.spectrum").string());
    std::vector<double> variances;
    for (std::size_t i = 0; i < cfg.sweep.sweep_powers.size(); ++i) {
        auto res = simulate_homodyne(cfg.model, lo_at(cfg, cfg.sweep.sweep_powers[i]),
                                     cfg.sweep.sweep_scenario, make_run(cfg, dur, 0x400 + i));
        const Spectrum s = estimate_psd(res.ac, cfg.sweep.sweep_rbw, cfg.sweep.sweep_vbw,
                                        cfg.sweep.sweep_navg);
        char name[64];
        std::snprintf(name, sizeof(name), "power_%02zu.spectrum", i);
        write_spectrum(s, (out / name).string());
        if (traces) {
            std::snprintf(name, sizeof(name), "trace_power_%02zu.txt", i);
            write_trace(res.ac, (out / name).string());
        }
        Spectrum sub = s;
        for (std::size_t k = 0; k < sub.psd.size(); ++k) sub.psd[k] -= dark.psd[k];
        variances.push_back(band_average(sub, cfg.sweep.band_lo, cfg.sweep.band_hi));
    }
    std::vector<double> indices(cfg.sweep.sweep_powers.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = static_cast<double>(i);
    write_columns(out / "sweep_powers.tsv", "homodyne-sweep-powers v1",
                  {"index", "power_w", "band_variance_v2_per_hz"},
                  {indices, cfg.sweep.sweep_powers, variances});
}

void run_cmrr(const Config& cfg, const fs::path& out, bool traces) {
    const double dur =
        duration_for_psd(cfg.sweep.sample_rate, cfg.sweep.cmrr_rbw, cfg.sweep.cmrr_navg);
    auto bal_res = simulate_homodyne(cfg.model, lo_at(cfg, cfg.sweep.cmrr_power),
                                     cfg.sweep.cmrr_scenario, make_run(cfg, dur, 0x500));
    Scenario addition = cfg.sweep.cmrr_scenario;
    addition.kind = ScenarioKind::addition;
    auto add_res = simulate_homodyne(cfg.model, lo_at(cfg, cfg.sweep.cmrr_power), addition,
                                     make_run(cfg, dur, 0x501));
    const Spectrum bal = estimate_psd(bal_res.ac, cfg.sweep.cmrr_rbw, cfg.sweep.cmrr_vbw,
                                      cfg.sweep.cmrr_navg);
    const Spectrum add = estimate_psd(add_res.ac, cfg.sweep.cmrr_rbw, cfg.sweep.cmrr_vbw,
                                      cfg.sweep.cmrr_navg);
    write_spectrum(bal, (out / "balanced.spectrum").string());
    write_spectrum(add, (out / "addition.spectrum").string());
    if (traces) {
        write_trace(bal_res.ac, (out / "trace_balanced.txt").string());
        write_trace(add_res.ac, (out / "trace_addition.txt").string());
    }
}

int cmd_simulate(const PlanOptions& opt) {
    Config cfg = load_plan_config(opt);
    std::string experiment = opt.experiment;
    if (experiment.empty() && !opt.config_path.empty()) {
        KeyValueFile kv;
        kv.load(opt.config_path);
        experiment = kv.get_str("plan.experiment", "");
    }
    if (experiment.empty()) throw ConfigError("simulate: --experiment required");
    if (opt.out_dir.empty()) throw ConfigError("simulate: --out required");
    fs::create_directories(opt.out_dir);
    const fs::path out(opt.out_dir);

    if (experiment == "dc-sweep") {
        if (cfg.sweep.dc_powers.empty()) throw ConfigError("dc-sweep: empty power list");
        run_dc_sweep(cfg, out, opt.write_traces);
    } else if (experiment == "gain-spectrum") {
        run_gain_spectrum(cfg, out, opt.write_traces);
    } else if (experiment == "power-sweep") {
        run_power_sweep(cfg, out, opt.write_traces);
    } else if (experiment == "cmrr") {
        run_cmrr(cfg, out, opt.write_traces);
    } else {
        throw ConfigError("unknown experiment: " + experiment);
    }
    write_manifest(cfg, "simulate", experiment, opt.write_traces, out);
    std::cout << "wrote " << experiment << " outputs to " << out.string() << "\n";
    return kExitOk;
}

// --- characterize ---

void emit_figures(const Config& cfg, const CharacterizationReport& rep,
                  const CharacterizationArtifacts& art, const fs::path& out) {
    if (!art.dc_powers_plus.empty()) {
        const auto fit_p =
            fit_dc_efficiency(art.dc_powers_plus, art.dc_volts_plus, cfg.model,
                              cfg.lo.wavelength);
        const auto fit_m =
            fit_dc_efficiency(art.dc_powers_minus, art.dc_volts_minus, cfg.model,
                              cfg.lo.wavelength);
        std::vector<double> pred_p, pred_m;
        for (std::size_t i = 0; i < art.dc_powers_plus.size(); ++i) {
            pred_p.push_back(fit_p.fit.intercept + fit_p.fit.slope * art.dc_powers_plus[i]);
            pred_m.push_back(fit_m.fit.intercept + fit_m.fit.slope * art.dc_powers_minus[i]);
        }
        write_columns(out / "fig_dc_response.tsv", "homodyne-fig-dc v1",
                      {"power_w", "v_plus_v", "v_minus_v", "fit_plus_v", "fit_minus_v"},
                      {art.dc_powers_plus, art.dc_volts_plus, art.dc_volts_minus, pred_p,
                       pred_m});
    }
    if (art.have_gain && rep.butter_p) {
        const ButterworthShape shape{*rep.butter_p, *rep.butter_f_star_hz};
        std::vector<double> fitted;
        for (double f : art.corrected_gain.freqs)
            fitted.push_back(*rep.butter_scale * gain_value(shape, f));
        write_columns(out / "fig_gain_spectrum.tsv", "homodyne-fig-gain v1",
                      {"freq_hz", "corrected_gain", "fitted_gain"},
                      {art.corrected_gain.freqs, art.corrected_gain.psd, fitted});
    }
    if (!art.sweep_powers.empty()) {
        std::vector<double> fit_line, included;
        for (std::size_t i = 0; i < art.sweep_powers.size(); ++i) {
            fit_line.push_back(rep.linearity_slope
                                   ? *rep.linearity_intercept +
                                         *rep.linearity_slope * art.sweep_powers[i]
                                   : 0.0);
            const bool excl = std::find(rep.linearity_excluded.begin(),
                                        rep.linearity_excluded.end(),
                                        i) != rep.linearity_excluded.end();
            included.push_back(excl ? 0.0 : 1.0);
        }
        write_columns(out / "fig_linearity.tsv", "homodyne-fig-linearity v1",
                      {"power_w", "band_variance_v2_per_hz", "fit_v2_per_hz", "included"},
                      {art.sweep_powers, art.band_variances, fit_line, included});
    }
    if (art.have_dark_sweep && !art.sweep_spectra.empty()) {
        std::vector<std::string> names{"freq_hz", "dark_v2_per_hz"};
        std::vector<std::vector<double>> cols{art.dark_sweep.freqs, art.dark_sweep.psd};
        for (std::size_t i = 0; i < art.sweep_spectra.size(); ++i) {
            names.push_back("psd_p" + std::to_string(i) + "_v2_per_hz");
            cols.push_back(art.sweep_spectra[i].psd);
        }
        write_columns(out / "fig_psd_sweep.tsv", "homodyne-fig-psd v1", names, cols);
    }
}

CharacterizationReport characterize_from_files(const Config& cfg, const fs::path& dir,
                                               CharacterizationArtifacts& art,
                                               std::vector<std::string>& warnings) {
    CharacterizationReport rep;
    rep.seed = cfg.sweep.seed;
    rep.clearance_freq_hz = cfg.sweep.clearance_freq;
    const ButterworthShape closed = butterworth_params(cfg.model);
    rep.closed_form_p = closed.p;
    rep.closed_form_f_star_hz = closed.f_star;
    rep.closed_form_bw3db_f_conv_hz = bandwidth_3db(closed);
    rep.closed_form_bw3db_omega_conv_hz =
        bandwidth_3db(ButterworthShape{closed.p, closed.f_star / (2.0 * kPi)});
    rep.snep_w = snep(cfg.model);

    if (fs::exists(dir / "dc_response.tsv")) {
        auto cols = read_columns(dir / "dc_response.tsv", "homodyne-dc-response v1", 3);
        const auto fp = fit_dc_efficiency(cols[0], cols[1], cfg.model, cfg.lo.wavelength);
        const auto fm = fit_dc_efficiency(cols[0], cols[2], cfg.model, cfg.lo.wavelength);
        rep.eta_total_plus = fp.eta;
        rep.eta_total_plus_stderr = fp.stderr_eta;
        rep.eta_total_minus = fm.eta;
        rep.eta_total_minus_stderr = fm.stderr_eta;
        if (cfg.model.pd_plus.quantum_efficiency > 0 &&
            fp.eta <= cfg.model.pd_plus.quantum_efficiency)
            rep.eta_coup = decouple_coupling(fp.eta, cfg.model.pd_plus.quantum_efficiency);
        art.dc_powers_plus = cols[0];
        art.dc_volts_plus = cols[1];
        art.dc_powers_minus = cols[0];
        art.dc_volts_minus = cols[2];
    } else {
        warnings.push_back("no dc_response.tsv: efficiency fields unavailable");
    }

    bool have_dark = false;
    Spectrum dark;
    if (fs::exists(dir / "dark.spectrum")) {
        dark = read_spectrum((dir / "dark.spectrum").string());
        have_dark = true;
        rep.electronic_noise_density_a_rthz = electronic_current_noise_density(
            dark, cfg.model, cfg.sweep.band_lo, cfg.sweep.band_hi);
        art.dark_sweep = dark;
        art.have_dark_sweep = true;
    } else {
        warnings.push_back("no dark.spectrum: floor and clearance fields unavailable");
    }

    if (fs::exists(dir / "corrected_gain.spectrum")) {
        Spectrum corrected = read_spectrum((dir / "corrected_gain.spectrum").string());
        corrected = homodyne::detail::notch_harmonics(corrected, cfg.lo.repetition_rate,
                                                      corrected.rbw, corrected.vbw);
        const double plateau =
            band_average(corrected, cfg.sweep.plateau_lo, cfg.sweep.plateau_hi);
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
            art.corrected_gain = corrected;
            art.have_gain = true;
        }
    } else {
        warnings.push_back("no corrected_gain.spectrum: bandwidth fields unavailable");
    }

    if (fs::exists(dir / "sweep_powers.tsv") && have_dark) {
        auto cols = read_columns(dir / "sweep_powers.tsv", "homodyne-sweep-powers v1", 3);
        std::vector<double> powers = cols[1];
        std::vector<double> variances;
        std::vector<Spectrum> spectra;
        bool have_spectra = true;
        for (std::size_t i = 0; i < powers.size(); ++i) {
            char name[64];
            std::snprintf(name, sizeof(name), "power_%02zu.spectrum", i);
            if (!fs::exists(dir / name)) {
                have_spectra = false;
                break;
            }
            spectra.push_back(read_spectrum((dir / name).string()));
        }
        if (have_spectra) {
            for (auto& s : spectra) {
                Spectrum sub = s;
                for (std::size_t k = 0; k < sub.psd.size(); ++k) sub.psd[k] -= dark.psd[k];
                variances.push_back(band_average(sub, cfg.sweep.band_lo, cfg.sweep.band_hi));
            }
        } else {
            variances = cols[2];  // fall back to the recorded band variances
        }
        if (powers.size() >= 5) {
            const LinearFit lin = fit_linearity(powers, variances, cfg.sweep.policy);
            rep.linearity_slope = lin.slope;
            rep.linearity_intercept = lin.intercept;
            rep.linearity_r_squared = lin.r_squared;
            rep.linearity_slope_stderr = lin.slope_stderr;
            rep.linearity_excluded = lin.excluded_points;
            rep.is_shot_noise_limited = shot_noise_limited(lin);
            double onset = std::numeric_limits<double>::infinity();
            for (std::size_t idx : lin.excluded_points) onset = std::min(onset, powers[idx]);
            rep.saturation_onset_w = onset;
            if (!spectra.empty()) {
                std::size_t best = powers.size();
                double best_p = -1.0;
                for (std::size_t i = 0; i < powers.size(); ++i) {
                    const bool excl = std::find(lin.excluded_points.begin(),
                                                lin.excluded_points.end(),
                                                i) != lin.excluded_points.end();
                    if (!excl && powers[i] > best_p) {
                        best_p = powers[i];
                        best = i;
                    }
                }
                if (best < spectra.size() && spectra[best].covers(cfg.sweep.clearance_freq) &&
                    dark.covers(cfg.sweep.clearance_freq)) {
                    const double clr =
                        clearance(spectra[best], dark, cfg.sweep.clearance_freq);
                    rep.clearance_db = clr;
                    rep.clearance_power_w = best_p;
                    if (clr > 0) {
                        rep.eta_snr_db = clr;
                        rep.eta_snr_value = eta_snr(clr);
                    }
                }
            }
        }
        art.sweep_powers = powers;
        art.band_variances = variances;
        art.sweep_spectra = spectra;
    } else if (!fs::exists(dir / "sweep_powers.tsv")) {
        warnings.push_back("no sweep_powers.tsv: linearity fields unavailable");
    }

    if (fs::exists(dir / "balanced.spectrum") && fs::exists(dir / "addition.spectrum")) {
        const Spectrum bal = read_spectrum((dir / "balanced.spectrum").string());
        const Spectrum add = read_spectrum((dir / "addition.spectrum").string());
        if (bal.covers(cfg.lo.repetition_rate) && add.covers(cfg.lo.repetition_rate)) {
            const CmrrEstimate est = cmrr_estimate(bal, add, cfg.lo.repetition_rate);
            rep.cmrr_db = est.cmrr_db;
            rep.cmrr_raw_db = est.raw_db;
            if (est.degenerate)
                warnings.push_back("cmrr: balanced and addition spectra are degenerate");
        }
        art.cmrr_balanced = bal;
        art.cmrr_addition = add;
        art.have_cmrr = true;
    } else {
        warnings.push_back("no balanced/addition spectra: cmrr unavailable");
    }

    if (rep.eta_snr_value && rep.eta_coup && cfg.model.pd_plus.quantum_efficiency > 0)
        rep.eta_tot = total_efficiency(*rep.eta_snr_value, *rep.eta_coup,
                                       cfg.model.pd_plus.quantum_efficiency);
    return rep;
}

void print_summary(const CharacterizationReport& rep) {
    auto line = [](const char* name, const std::optional<double>& v, const char* unit) {
        std::printf("  %-28s ", name);
        if (v)
            std::printf("%.6g %s\n", *v, unit);
        else
            std::printf("unavailable\n");
    };
    std::printf("characterization summary:\n");
    line("eta_total_plus", rep.eta_total_plus, "");
    line("eta_total_minus", rep.eta_total_minus, "");
    line("eta_coup", rep.eta_coup, "");
    line("butterworth_p", rep.butter_p, "");
    line("butterworth_f_star", rep.butter_f_star_hz, "Hz");
    line("bandwidth_3db", rep.bandwidth_3db_hz, "Hz");
    line("linearity_r_squared", rep.linearity_r_squared, "");
    line("saturation_onset", rep.saturation_onset_w, "W");
    line("cmrr", rep.cmrr_db, "dB");
    line("clearance", rep.clearance_db, "dB");
    line("eta_snr", rep.eta_snr_value, "");
    line("eta_tot", rep.eta_tot, "");
    line("electronic_noise_density", rep.electronic_noise_density_a_rthz, "A/rtHz");
    std::printf("  %-28s %.6g W\n", "snep", rep.snep_w);
    std::printf("  %-28s p=%.6g f*=%.6g Hz (bw %.6g / %.6g Hz)\n",
                "closed_form_predictor", rep.closed_form_p, rep.closed_form_f_star_hz,
                rep.closed_form_bw3db_f_conv_hz, rep.closed_form_bw3db_omega_conv_hz);
}

int cmd_characterize(const PlanOptions& opt) {
    Config cfg = load_plan_config(opt);
    if (opt.out_dir.empty()) throw ConfigError("characterize: --out required");
    fs::create_directories(opt.out_dir);
    const fs::path out(opt.out_dir);

    CharacterizationArtifacts art;
    CharacterizationReport rep;
    std::vector<std::string> warnings;
    if (!opt.ingest_dir.empty()) {
        rep = characterize_from_files(cfg, fs::path(opt.ingest_dir), art, warnings);
    } else {
        rep = characterize(cfg.model, cfg.lo, cfg.sweep, &art);
    }
    write_report(rep, (out / "report.txt").string());
    write_report_json(rep, (out / "report.json").string());
    emit_figures(cfg, rep, art, out);
    write_manifest(cfg, "characterize", "full-characterize", opt.write_traces, out);
    for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    print_summary(rep);
    std::cout << "wrote report to " << (out / "report.txt").string() << "\n";
    return kExitOk;
}

CharacterizationReport load_any_report(const std::string& path) {
    if (path.size() > 5 && path.substr(path.size() - 5) == ".json")
        return read_report_json(path);
    return read_report(path);
}

int cmd_report_diff(const std::string& path_a, const std::string& path_b,
                    const std::vector<std::string>& tol_args) {
    const CharacterizationReport a = load_any_report(path_a);
    const CharacterizationReport b = load_any_report(path_b);
    auto tolerances = default_report_tolerances();
    for (const auto& arg : tol_args) {
        const auto eq = arg.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--tol expects field=value, got: " + arg);
        const std::string field = arg.substr(0, eq);
        tolerances[field] = FieldTolerance{std::stod(arg.substr(eq + 1)), 0.0};
    }
    const auto diffs = report_diff(a, b, tolerances);
    bool all_pass = true;
    for (const auto& d : diffs) {
        if (!d.pass) all_pass = false;
        std::printf("%-36s %-26s %-26s %s\n", d.field.c_str(), d.a.c_str(), d.b.c_str(),
                    d.pass ? "PASS" : "FAIL");
    }
    std::printf("report-diff: %s\n", all_pass ? "PASS" : "FAIL");
    return all_pass ? kExitOk : kExitDiff;
}

int cmd_presets(bool list, const std::string& show, const std::string& write,
                const std::string& out_file) {
    if (!show.empty()) {
        KeyValueFile kv;
        config_to_kv(preset_config(show), kv);
        std::cout << kv.serialize();
        return kExitOk;
    }
    if (!write.empty()) {
        if (out_file.empty()) throw ConfigError("presets --write needs --out");
        KeyValueFile kv;
        config_to_kv(preset_config(write), kv);
        kv.save(out_file);
        std::cout << "wrote preset " << write << " to " << out_file << "\n";
        return kExitOk;
    }
    (void)list;
    for (const auto& name : preset_names()) std::cout << name << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Balanced homodyne detector simulation and characterization"};
    app.require_subcommand(1);

    PlanOptions sim_opt, chr_opt;
    std::string sweep_arg_sim, sweep_arg_chr, band_arg;

    auto add_common = [](CLI::App* cmd, PlanOptions& opt) {
        cmd->add_option("--preset", opt.preset, "built-in preset name (paper-2um)");
        cmd->add_option("--config", opt.config_path, "configuration or manifest file");
        cmd->add_option("--seed", [&opt](const std::vector<std::string>& v) {
            opt.seed = std::stoull(v.front());
            return true;
        }, "override the run seed")->expected(1);
        cmd->add_option("--out", opt.out_dir, "output directory");
    };

    CLI::App* sim = app.add_subcommand("simulate", "run one experiment, write traces/spectra");
    add_common(sim, sim_opt);
    sim->add_option("--experiment", sim_opt.experiment,
                    "dc-sweep | gain-spectrum | power-sweep | cmrr");
    sim->add_option("--sweep", sweep_arg_sim, "comma-separated sweep powers in watts");
    sim->add_option("--rbw", [&sim_opt](const std::vector<std::string>& v) {
        sim_opt.rbw = std::stod(v.front());
        return true;
    }, "resolution bandwidth override, Hz")->expected(1);
    sim->add_option("--vbw", [&sim_opt](const std::vector<std::string>& v) {
        sim_opt.vbw = std::stod(v.front());
        return true;
    }, "video bandwidth override, Hz")->expected(1);
    sim->add_flag("!--no-traces", sim_opt.write_traces, "skip trace files");

    CLI::App* chr = app.add_subcommand("characterize", "full characterization + report");
    add_common(chr, chr_opt);
    chr->add_option("--sweep", sweep_arg_chr, "comma-separated sweep powers in watts");
    chr->add_option("--ingest", chr_opt.ingest_dir,
                    "read spectra/response files from this directory instead of simulating");
    chr->add_option("--band", band_arg, "analysis band lo:hi in Hz (e.g. 1e6:13e6)");
    chr->add_option("--clearance-freq", [&chr_opt](const std::vector<std::string>& v) {
        chr_opt.clearance_freq = std::stod(v.front());
        return true;
    }, "clearance readout frequency, Hz")->expected(1);
    chr->add_option("--rbw", [&chr_opt](const std::vector<std::string>& v) {
        chr_opt.rbw = std::stod(v.front());
        return true;
    }, "power-sweep resolution bandwidth, Hz")->expected(1);
    chr->add_option("--vbw", [&chr_opt](const std::vector<std::string>& v) {
        chr_opt.vbw = std::stod(v.front());
        return true;
    }, "power-sweep video bandwidth, Hz")->expected(1);

    CLI::App* dif = app.add_subcommand("report-diff", "field-by-field report comparison");
    std::vector<std::string> diff_paths;
    std::vector<std::string> tol_args;
    dif->add_option("reports", diff_paths, "two report files (.txt or .json)")
        ->expected(2);
    dif->add_option("--tol", tol_args, "field=abs_tolerance override (repeatable)");

    CLI::App* pre = app.add_subcommand("presets", "list or export built-in presets");
    bool list_flag = false;
    std::string show_name, write_name, write_out;
    pre->add_flag("--list", list_flag, "list preset names");
    pre->add_option("--show", show_name, "print a preset configuration");
    pre->add_option("--write", write_name, "write a preset configuration to --out");
    pre->add_option("--out", write_out, "output file for --write");

    try {
        app.parse(argc, argv);
        auto parse_sweep = [](const std::string& s) {
            std::vector<double> out;
            std::stringstream ss(s);
            std::string item;
            while (std::getline(ss, item, ','))
                if (!item.empty()) out.push_back(std::stod(item));
            return out;
        };
        if (!sweep_arg_sim.empty()) sim_opt.sweep_watts = parse_sweep(sweep_arg_sim);
        if (!sweep_arg_chr.empty()) chr_opt.sweep_watts = parse_sweep(sweep_arg_chr);
        if (!band_arg.empty()) {
            const auto colon = band_arg.find(':');
            if (colon == std::string::npos)
                throw ConfigError("--band expects lo:hi, got: " + band_arg);
            chr_opt.band_lo = std::stod(band_arg.substr(0, colon));
            chr_opt.band_hi = std::stod(band_arg.substr(colon + 1));
        }

        if (sim->parsed()) return cmd_simulate(sim_opt);
        if (chr->parsed()) return cmd_characterize(chr_opt);
        if (dif->parsed()) return cmd_report_diff(diff_paths[0], diff_paths[1], tol_args);
        if (pre->parsed()) return cmd_presets(list_flag, show_name, write_name, write_out);
        return kExitConfig;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    } catch (const SaturationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitSaturation;
    } catch (const InsufficientData& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInsufficient;
    } catch (const FitDiverged& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFit;
    } catch (const NoCrossing& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFit;
    } catch (const DegenerateInput& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFit;
    } catch (const InconsistentEfficiencies& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFit;
    } catch (const BandOutOfRange& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitDomain;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitDomain;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitParse;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
}
