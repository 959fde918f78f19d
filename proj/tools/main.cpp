#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

using namespace qdsplit;
using namespace qdsplit::cli;

void add_grid_flags(CLI::App* sub, GridOptions& g) {
  sub->add_option("--wl-min", g.wl_min, "First wavelength of the grid (nm)");
  sub->add_option("--wl-max", g.wl_max, "Last wavelength of the grid (nm)");
  sub->add_option("--wl-steps", g.wl_steps, "Number of wavelengths")->check(CLI::PositiveNumber);
  sub->add_option("--gap-min", g.gap_min, "Smallest gap of the grid (nm)");
  sub->add_option("--gap-max", g.gap_max, "Largest gap of the grid (nm)");
  sub->add_option("--gap-steps", g.gap_steps, "Number of gaps")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Directional-coupler beam-splitter design and HBT photon-correlation toolkit"};
  app.require_subcommand(1);

  ModesOptions modes;
  auto* modes_cmd = app.add_subcommand("modes", "Isolated-waveguide mode, supermodes, delta_n and L50:50 as JSON");
  modes_cmd->add_option("--config", modes.config, "Geometry JSON")->required();
  modes_cmd->add_option("--out", modes.out, "Output file (default stdout)");
  modes_cmd->add_flag("--no-profile", modes.no_profile, "Omit sampled field profiles");

  MapOptions map;
  auto* map_cmd = app.add_subcommand("map", "L50:50 over a wavelength x gap grid as CSV");
  map_cmd->add_option("--config", map.config, "Geometry JSON with optional sweep block")->required();
  map_cmd->add_option("--out", map.out, "Output CSV (default stdout)");
  add_grid_flags(map_cmd, map.grid);

  MapOptions loss;
  auto* loss_cmd = app.add_subcommand("loss-map", "Launch mismatch loss over a wavelength x gap grid as CSV");
  loss_cmd->add_option("--config", loss.config, "Geometry JSON with optional sweep block")->required();
  loss_cmd->add_option("--out", loss.out, "Output CSV (default stdout)");
  add_grid_flags(loss_cmd, loss.grid);

  SimOptions sim;
  auto* sim_cmd = app.add_subcommand("hbt-sim", "Simulate detection events of a scenario as CSV");
  sim_cmd->add_option("--config", sim.config, "Scenario JSON")->required();
  sim_cmd->add_option("--out", sim.out, "Output events CSV (default stdout)");
  sim_cmd->add_option("--seed", sim.seed, "Override the scenario seed");

  CorrOptions corr;
  auto* corr_cmd = app.add_subcommand("hbt-corr", "Correlation histogram of two detectors from an events CSV");
  corr_cmd->add_option("--events", corr.events, "Events CSV (timestamp_ps,detector)")->required();
  corr_cmd->add_option("--start", corr.start, "Start detector: A, B or C")->capture_default_str();
  corr_cmd->add_option("--stop", corr.stop, "Stop detector: A, B or C (same as start: virtual 50:50 split)")
      ->capture_default_str();
  corr_cmd->add_option("--bin-ps", corr.bin_ps, "Bin width (ps)")->capture_default_str()->check(CLI::PositiveNumber);
  corr_cmd->add_option("--window-ns", corr.window_ns, "Half-width of the delay window (ns)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  corr_cmd->add_option("--duration-ps", corr.duration_ps, "Acquisition time (default: last timestamp)")
      ->check(CLI::PositiveNumber);
  corr_cmd->add_option("--split-seed", corr.split_seed, "Seed of the virtual split for auto-correlation")
      ->capture_default_str();
  corr_cmd->add_option("--out", corr.out, "Output histogram CSV (default stdout)");

  FitCommandOptions fit;
  auto* fit_cmd = app.add_subcommand("hbt-fit", "Fit the IRF-convolved antibunching dip of a histogram CSV");
  fit_cmd->add_option("--hist", fit.hist, "Histogram CSV (tau_ps,counts,normalized)")->required();
  fit_cmd->add_option("--irf-ps", fit.irf_ps, "Timing-response FWHM (ps)")->capture_default_str();
  fit_cmd->add_option("--rho", fit.rho, "Signal fraction for background correction");
  fit_cmd->add_option("--rho-err", fit.rho_err, "Standard error of rho")->capture_default_str();
  fit_cmd->add_option("--out", fit.out, "Output JSON (default stdout)");

  HbtOptions hbt;
  auto* hbt_cmd = app.add_subcommand("hbt", "Simulate, correlate, fit and correct a scenario in one pass");
  hbt_cmd->add_option("--config", hbt.config, "Scenario JSON")->required();
  hbt_cmd->add_option("--out-dir", hbt.out_dir, "Directory for events.csv, hist.csv, hist_auto.csv, fit.json")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*modes_cmd) return cmd_modes(modes);
    if (*map_cmd) return cmd_map(map);
    if (*loss_cmd) return cmd_loss_map(loss);
    if (*sim_cmd) return cmd_hbt_sim(sim);
    if (*corr_cmd) return cmd_hbt_corr(corr);
    if (*fit_cmd) return cmd_hbt_fit(fit);
    if (*hbt_cmd) return cmd_hbt(hbt);
  } catch (const CommandError& e) {
    std::cerr << "error: " << e.message << '\n';
    return e.code;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return kConfigError;
}
