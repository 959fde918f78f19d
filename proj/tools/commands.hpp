#pragma once

// Subcommand bodies of the qdsplit executable. Each returns a process exit
// code: 0 ok, 1 configuration / input error, 2 no guided mode, 3 fit failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qdsplit/qdsplit.hpp"

namespace qdsplit::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kNoGuidedMode = 2, kFitFailure = 3 };

/// Failure that maps onto an exit code.
struct CommandError {
  int code;
  std::string message;
};

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CommandError{kConfigError, "cannot write " + path};
  return out;
}

/// Writes to `path`, or to stdout when the path is empty or "-".
template <class Write>
void emit(const std::string& path, Write&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    std::cout.flush();
    return;
  }
  auto out = open_output(path);
  write(out);
}

inline std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------- design

struct ModesOptions {
  std::string config;
  std::string out;
  bool no_profile = false;
};

inline int cmd_modes(const ModesOptions& opt) {
  const auto cfg = design_config_from_json(load_json_file(opt.config));
  const auto& geom = cfg.geometry;
  const auto isolated = effective_index_2d(geom);
  if (!isolated) throw CommandError{kNoGuidedMode, "no guided mode for the isolated waveguide"};

  json report;
  report["geometry"] = geometry_to_json(geom);
  report["n_eff"] = mode_to_json(*isolated, false)["n_eff"];
  report["isolated"] = mode_to_json(*isolated, !opt.no_profile);
  if (!geom.isolated()) {
    const auto pair = solve_supermodes(geom);
    if (!pair) throw CommandError{kNoGuidedMode, "coupled cross-section does not guide both supermodes"};
    report["symmetric"] = mode_to_json(pair->symmetric, !opt.no_profile);
    report["antisymmetric"] = mode_to_json(pair->antisymmetric, !opt.no_profile);
    report["delta_n"] = pair->delta_n;
    if (pair->delta_n > 0.0) report["l5050_um"] = l5050_um(geom.wavelength_nm, pair->delta_n);
    if (const auto loss = mismatch_loss(geom)) report["mismatch_loss"] = *loss;
  }
  emit(opt.out, [&](std::ostream& os) { os << report.dump(2) << '\n'; });
  return kOk;
}

struct GridOptions {
  std::optional<double> wl_min, wl_max, gap_min, gap_max;
  std::optional<std::size_t> wl_steps, gap_steps;
};

struct MapOptions {
  std::string config;
  std::string out;
  GridOptions grid;
};

/// Grid from the config's "sweep" block with flag overrides. Missing axes
/// collapse onto the configured geometry value.
inline std::vector<double> resolve_axis(const std::optional<GridSpec>& base, double fallback,
                                        std::optional<double> lo, std::optional<double> hi,
                                        std::optional<std::size_t> steps, const char* name) {
  GridSpec g = base.value_or(GridSpec{fallback, fallback, 1});
  if (lo) g.min = *lo;
  if (hi) g.max = *hi;
  if (steps) g.steps = *steps;
  if (!base && (lo || hi) && !steps) g.steps = (g.min == g.max) ? 1 : 2;
  if (g.steps < 1) throw ConfigError(name, "steps must be >= 1");
  if (g.max < g.min) throw ConfigError(name, "max must be >= min");
  return g.values();
}

struct ResolvedGrid {
  CouplerGeometry geometry;
  std::vector<double> wavelengths;
  std::vector<double> gaps;
};

inline ResolvedGrid resolve_grid(const MapOptions& opt) {
  const auto cfg = design_config_from_json(load_json_file(opt.config));
  ResolvedGrid r;
  r.geometry = cfg.geometry;
  r.wavelengths = resolve_axis(cfg.wavelength_grid, cfg.geometry.wavelength_nm, opt.grid.wl_min, opt.grid.wl_max,
                               opt.grid.wl_steps, "sweep.wavelength_nm");
  if (!cfg.gap_grid && !opt.grid.gap_min && !opt.grid.gap_max && cfg.geometry.isolated())
    throw ConfigError("sweep.gap_nm", "a gap grid is required when the geometry has no finite gap");
  r.gaps = resolve_axis(cfg.gap_grid, cfg.geometry.gap_nm, opt.grid.gap_min, opt.grid.gap_max, opt.grid.gap_steps,
                        "sweep.gap_nm");
  try {
    detail::check_sweep(r.geometry, r.wavelengths, r.gaps);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("sweep", e.what());
  }
  return r;
}

inline std::string optional_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

inline int cmd_map(const MapOptions& opt) {
  const auto grid = resolve_grid(opt);
  const auto cells = sweep_l5050_map(grid.geometry, grid.wavelengths, grid.gaps);
  bool any_valid = false;
  emit(opt.out, [&](std::ostream& os) {
    os << "wavelength_nm,gap_nm,delta_n,l5050_um,valid\n";
    for (const auto& c : cells) {
      any_valid = any_valid || c.valid();
      os << format_double(c.wavelength_nm) << ',' << format_double(c.gap_nm) << ',' << optional_field(c.delta_n)
         << ',' << optional_field(c.l5050_um) << ',' << (c.valid() ? "true" : "false") << '\n';
    }
  });
  if (!any_valid) throw CommandError{kNoGuidedMode, "no grid cell supports a guided supermode pair"};
  return kOk;
}

inline int cmd_loss_map(const MapOptions& opt) {
  const auto grid = resolve_grid(opt);
  const auto cells = sweep_loss_map(grid.geometry, grid.wavelengths, grid.gaps);
  bool any_valid = false;
  emit(opt.out, [&](std::ostream& os) {
    os << "wavelength_nm,gap_nm,loss_fraction,valid\n";
    for (const auto& c : cells) {
      any_valid = any_valid || c.valid();
      os << format_double(c.wavelength_nm) << ',' << format_double(c.gap_nm) << ',' << optional_field(c.loss) << ','
         << (c.valid() ? "true" : "false") << '\n';
    }
  });
  if (!any_valid) throw CommandError{kNoGuidedMode, "no grid cell supports a guided supermode pair"};
  return kOk;
}

// ---------------------------------------------------------------- HBT

/// Scenario with the splitter ratio resolved from the coupler design when the
/// channel does not fix it.
inline ScenarioConfig load_scenario(const std::string& path) {
  auto s = scenario_from_json(load_json_file(path));
  if (s.split_from_design) {
    if (s.design.geometry.isolated())
      throw ConfigError("geometry.gap_nm", "a finite gap is needed to derive channel.split_cross");
    const auto split = design_split_cross(s.design);
    if (!split) throw CommandError{kNoGuidedMode, "coupler design does not guide both supermodes"};
    s.channel.split_cross = *split;
  }
  return s;
}

struct SimOptions {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

inline int cmd_hbt_sim(const SimOptions& opt) {
  const auto s = load_scenario(opt.config);
  const auto stream = simulate_stream(s.emitter, s.channel, s.duration_ps, opt.seed.value_or(s.seed));
  emit(opt.out, [&](std::ostream& os) { write_events_csv(os, stream); });
  return kOk;
}

inline std::vector<PhotonEvent> read_events_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open " + path);
  try {
    return read_events_csv(in);
  } catch (const std::runtime_error& e) {
    throw ConfigError("", path + ": " + e.what());
  }
}

struct CorrOptions {
  std::string events;
  std::string start = "A";
  std::string stop = "B";
  double bin_ps = 128.0;
  double window_ns = 50.0;
  std::string out;
  std::optional<double> duration_ps;
  std::uint64_t split_seed = 0;
};

inline Detector detector_flag(const std::string& value, const char* flag) {
  const auto d = parse_detector(value);
  if (!d) throw ConfigError(flag, "expected A, B or C");
  return *d;
}

inline G2Histogram correlate_or_fail(const PhotonEventStream& stream, Detector start, Detector stop, double bin_ps,
                                     double window_ns) {
  try {
    return cross_correlate(stream, start, stop, bin_ps, window_ns * 1e3);
  } catch (const std::invalid_argument& e) {
    throw CommandError{kConfigError, e.what()};
  } catch (const std::domain_error& e) {
    throw CommandError{kConfigError, e.what()};
  }
}

inline int cmd_hbt_corr(const CorrOptions& opt) {
  const Detector start = detector_flag(opt.start, "--start");
  const Detector stop = detector_flag(opt.stop, "--stop");
  PhotonEventStream stream;
  stream.events = read_events_file(opt.events);
  stream.seed = opt.split_seed;
  stream.duration_ps = opt.duration_ps.value_or(stream.events.empty() ? 0.0 : stream.events.back().time_ps);
  const auto hist = correlate_or_fail(stream, start, stop, opt.bin_ps, opt.window_ns);
  emit(opt.out, [&](std::ostream& os) { write_histogram_csv(os, hist); });
  return kOk;
}

inline json fit_to_json(const G2Fit& fit, std::optional<double> rho, double rho_err) {
  json j{{"g2_zero", fit.g2_zero},
         {"a", fit.dip_depth},
         {"tau_c_ps", fit.tau_c_ps},
         {"irf_ps", fit.irf_fwhm_ps},
         {"g2_deconvolved", fit.deconvolved_g2_zero()},
         {"has_dip", fit.has_dip},
         {"residual_norm", fit.residual_norm},
         {"reduced_chi2", fit.reduced_chi2}};
  json errors{{"g2_zero", fit.g2_zero_err}, {"a", fit.dip_depth_err}, {"tau_c_ps", fit.tau_c_err_ps}};
  if (rho) {
    const auto corrected = background_correct(fit, *rho, rho_err);
    j["rho"] = *rho;
    j["g2_corrected"] = corrected.value;
    errors["g2_corrected"] = corrected.error;
  } else {
    j["g2_corrected"] = nullptr;
  }
  j["errors"] = errors;
  return j;
}

inline G2Fit fit_or_fail(const G2Histogram& hist, double irf_ps) {
  try {
    return fit_g2(hist, irf_ps);
  } catch (const FitError& e) {
    throw CommandError{kFitFailure, e.what()};
  }
}

struct FitCommandOptions {
  std::string hist;
  double irf_ps = 520.0;
  std::optional<double> rho;
  double rho_err = 0.0;
  std::string out;
};

inline int cmd_hbt_fit(const FitCommandOptions& opt) {
  if (opt.rho && !(*opt.rho > 0.0 && *opt.rho <= 1.0)) throw ConfigError("--rho", "must be in (0, 1]");
  if (!(opt.rho_err >= 0.0)) throw ConfigError("--rho-err", "must be >= 0");
  if (!(opt.irf_ps >= 0.0)) throw ConfigError("--irf-ps", "must be >= 0");
  std::ifstream in(opt.hist);
  if (!in) throw ConfigError("", "cannot open " + opt.hist);
  G2Histogram hist;
  try {
    hist = read_histogram_csv(in);
  } catch (const std::runtime_error& e) {
    throw ConfigError("", opt.hist + ": " + e.what());
  }
  const auto fit = fit_or_fail(hist, opt.irf_ps);
  const auto report = fit_to_json(fit, opt.rho, opt.rho_err);
  emit(opt.out, [&](std::ostream& os) { os << report.dump(2) << '\n'; });
  return kOk;
}

struct HbtOptions {
  std::string config;
  std::string out_dir = ".";
};

struct HbtResult {
  G2Histogram cross;
  G2Histogram autocorr;
  G2Fit cross_fit;
  G2Fit auto_fit;
  double rho_cross = 1.0;
  double rho_auto = 1.0;
  CorrectedG2 cross_corrected;
  CorrectedG2 auto_corrected;
};

/// End-to-end analysis of one simulated stream: A x B cross-correlation and
/// the control-port auto-correlation, each fitted and corrected.
inline HbtResult analyse_stream(const ScenarioConfig& s, const PhotonEventStream& stream) {
  HbtResult r;
  r.cross = correlate_or_fail(stream, Detector::A, Detector::B, s.analysis.bin_ps, s.analysis.window_ns);
  r.autocorr = correlate_or_fail(stream, Detector::C, Detector::C, s.analysis.bin_ps, s.analysis.window_ns);
  r.cross_fit = fit_or_fail(r.cross, s.analysis.irf_ps);
  r.auto_fit = fit_or_fail(r.autocorr, s.analysis.irf_ps);
  r.rho_cross = signal_to_total(s.emitter, s.channel, Detector::A, Detector::B);
  r.rho_auto = signal_fraction(s.emitter, s.channel, Detector::C);
  r.cross_corrected = background_correct(r.cross_fit, r.rho_cross);
  r.auto_corrected = background_correct(r.auto_fit, r.rho_auto);
  return r;
}

inline std::string summary_line(const ScenarioConfig& s, const HbtResult& r) {
  std::ostringstream os;
  os << s.name << ": cross g2(0) = " << fixed(r.cross_fit.g2_zero) << " +/- " << fixed(r.cross_fit.g2_zero_err)
     << " (corrected " << fixed(r.cross_corrected.value) << " +/- " << fixed(r.cross_corrected.error)
     << ", rho " << fixed(r.rho_cross) << "); auto g2(0) = " << fixed(r.auto_fit.g2_zero) << " +/- "
     << fixed(r.auto_fit.g2_zero_err) << " (corrected " << fixed(r.auto_corrected.value) << " +/- "
     << fixed(r.auto_corrected.error) << ", rho " << fixed(r.rho_auto) << ")";
  return os.str();
}

inline int cmd_hbt(const HbtOptions& opt) {
  const auto s = load_scenario(opt.config);
  const auto stream = simulate_stream(s.emitter, s.channel, s.duration_ps, s.seed);
  const auto r = analyse_stream(s, stream);

  std::error_code ec;
  std::filesystem::create_directories(opt.out_dir, ec);
  if (ec) throw CommandError{kConfigError, "cannot create " + opt.out_dir + ": " + ec.message()};
  const std::filesystem::path dir(opt.out_dir);
  emit((dir / "events.csv").string(), [&](std::ostream& os) { write_events_csv(os, stream); });
  emit((dir / "hist.csv").string(), [&](std::ostream& os) { write_histogram_csv(os, r.cross); });
  emit((dir / "hist_auto.csv").string(), [&](std::ostream& os) { write_histogram_csv(os, r.autocorr); });

  json report{{"scenario", s.name},
              {"seed", s.seed},
              {"split_cross", s.channel.split_cross},
              {"counts", {{"A", stream.count(Detector::A)}, {"B", stream.count(Detector::B)}, {"C", stream.count(Detector::C)}}},
              {"cross", fit_to_json(r.cross_fit, r.rho_cross, 0.0)},
              {"auto", fit_to_json(r.auto_fit, r.rho_auto, 0.0)}};
  report["cross"]["coincidences"] = r.cross.total_counts();
  report["auto"]["coincidences"] = r.autocorr.total_counts();
  emit((dir / "fit.json").string(), [&](std::ostream& os) { os << report.dump(2) << '\n'; });
  std::cout << summary_line(s, r) << '\n';
  return kOk;
}

}  // namespace qdsplit::cli
