// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "oracles.hpp"
#include "qdsplit/qdsplit.hpp"

using namespace qdsplit;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string scenario_path(const char* name) { return std::string(QDSPLIT_SCENARIOS) + "/" + name; }

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome closed_form_coupling_length() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> wl(400, 2000), log_dn(std::log(1e-6), std::log(1.0));
  double worst = 0;
  for (int i = 0; i < 100000; ++i) {
    const double lambda = wl(rng);
    const double dn = std::exp(log_dn(rng));
    const double expected = lambda * std::asin(std::sqrt(0.5)) / (std::numbers::pi * dn) * 1e-3;
    worst = std::max(worst, std::abs(l5050_um(lambda, dn) - expected) / expected);
  }
  // first crossing of half transfer on a 1e5-point lossless length scan
  const double lambda = 927, dn = 0.0506;
  const double target = l5050_um(lambda, dn);
  const int n = 100000;
  const double span = 2.0 * target;
  CouplerDesign d;
  d.geometry.gap_nm = 100;
  d.per_bend_loss = 0;
  double first = -1;
  for (int i = 0; i <= n; ++i) {
    d.interaction_length_um = span * i / n;
    if (power_transfer(d, dn).p_cross >= 0.5) {
      first = d.interaction_length_um;
      break;
    }
  }
  const double elapsed = seconds_since(t0);
  const bool scan_ok = first >= target && first - target <= span / n;
  return {worst <= 1e-12 && scan_ok && elapsed < 1.0,
          fmt("max rel err %.2e, scan %.6f vs %.6f um, %.2f s", worst, first, target, elapsed)};
}

Outcome coupling_length_map() {
  const auto cfg = design_config_from_json(load_json_file(scenario_path("fig1b.json")));
  const auto wl = cfg.wavelength_grid->values();
  const auto gaps = cfg.gap_grid->values();
  const auto t0 = Clock::now();
  const auto cells = sweep_l5050_map(cfg.geometry, wl, gaps);
  const double elapsed = seconds_since(t0);

  std::map<std::pair<double, double>, double> L;
  int valid = 0, too_long = 0;
  double longest_short_gap = 0;
  for (const auto& c : cells) {
    if (!c.valid()) continue;
    ++valid;
    L[{c.gap_nm, c.wavelength_nm}] = *c.l5050_um;
    if (c.gap_nm < 100) {
      longest_short_gap = std::max(longest_short_gap, *c.l5050_um);
      if (!(*c.l5050_um < 15.0)) ++too_long;
    }
  }
  int violations = 0;
  for (std::size_t g = 0; g < gaps.size(); ++g)
    for (std::size_t w = 0; w < wl.size(); ++w) {
      const auto here = L.find({gaps[g], wl[w]});
      if (here == L.end()) continue;
      if (w + 1 < wl.size()) {
        const auto next = L.find({gaps[g], wl[w + 1]});
        if (next != L.end() && !(next->second < here->second)) ++violations;
      }
      if (g + 1 < gaps.size()) {
        const auto next = L.find({gaps[g + 1], wl[w]});
        if (next != L.end() && !(next->second > here->second)) ++violations;
      }
    }
  return {cells.size() == 2500 && valid > 0 && too_long == 0 && violations == 0 && elapsed < 30.0,
          fmt("%d/%zu valid, max L(gap<100) %.3f um, %d monotonicity violations, %.1f s", valid, cells.size(),
              longest_short_gap, violations, elapsed)};
}

Outcome mismatch_loss_trend() {
  const auto cfg = design_config_from_json(load_json_file(scenario_path("fig1c.json")));
  const auto wl = cfg.wavelength_grid->values();
  std::vector<double> gaps = cfg.gap_grid->values();
  gaps.push_back(20);
  std::sort(gaps.begin(), gaps.end());
  gaps.erase(std::unique(gaps.begin(), gaps.end()), gaps.end());
  const auto t0 = Clock::now();
  const auto cells = sweep_loss_map(cfg.geometry, wl, gaps);
  const double elapsed = seconds_since(t0);

  std::map<std::pair<double, double>, double> loss;
  int invalid = 0;
  for (const auto& c : cells) {
    if (c.valid())
      loss[{c.wavelength_nm, c.gap_nm}] = *c.loss;
    else
      ++invalid;
  }
  double lo20 = 1, hi20 = 0, max_wide = 0;
  int violations = 0;
  for (double w : wl) {
    const double at20 = loss.at({w, 20.0});
    lo20 = std::min(lo20, at20);
    hi20 = std::max(hi20, at20);
    for (std::size_t g = 0; g < gaps.size(); ++g) {
      const double v = loss.at({w, gaps[g]});
      if (gaps[g] >= 100) max_wide = std::max(max_wide, v);
      if (g + 1 < gaps.size() && !(loss.at({w, gaps[g + 1]}) < v)) ++violations;
    }
  }
  const bool ok = invalid == 0 && lo20 >= 0.01 && hi20 <= 0.10 && max_wide < 0.01 && violations == 0 && elapsed < 30.0;
  return {ok, fmt("loss(20 nm) in [%.4f, %.4f], max loss(gap>=100) %.5f, %d monotonicity violations, %.1f s", lo20,
                  hi20, max_wide, violations, elapsed)};
}

Outcome decoupling_limit() {
  CouplerGeometry g;
  g.gap_nm = 10 * g.wavelength_nm;
  const auto pair = solve_supermodes(g);
  const auto loss = mismatch_loss(g);
  if (!pair || !loss) return {false, "no guided supermodes at gap = 10 lambda"};
  return {pair->delta_n < 1e-6 && *loss < 1e-4, fmt("delta_n %.3e, mismatch loss %.3e", pair->delta_n, *loss)};
}

struct SeedRun {
  cli::HbtResult result;
  std::uint64_t seed;
};

std::vector<SeedRun> run_seeds(const ScenarioConfig& base, int n) {
  std::vector<SeedRun> runs;
  for (int i = 1; i <= n; ++i) {
    const auto seed = static_cast<std::uint64_t>(i);
    const auto stream = simulate_stream(base.emitter, base.channel, base.duration_ps, seed);
    runs.push_back({cli::analyse_stream(base, stream), seed});
  }
  return runs;
}

Outcome auto_correlation_scenario() {
  const auto s = cli::load_scenario(scenario_path("fig3a.json"));
  const auto runs = run_seeds(s, 20);
  int in_band = 0;
  double sum = 0;
  for (const auto& r : runs) {
    const double g = r.result.auto_fit.g2_zero;
    sum += g;
    if (g >= 0.18 && g <= 0.28) ++in_band;
  }
  return {in_band >= 19, fmt("%d/20 seeds in [0.18, 0.28], mean g2(0) %.3f, duration %.0e ps", in_band, sum / 20,
                             s.duration_ps)};
}

Outcome cross_correlation_scenario() {
  const auto s = cli::load_scenario(scenario_path("fig3b.json"));
  const auto runs = run_seeds(s, 20);
  int measured = 0, corrected = 0;
  double sum_m = 0, sum_c = 0;
  for (const auto& r : runs) {
    const double g = r.result.cross_fit.g2_zero;
    const double c = r.result.cross_corrected.value;
    sum_m += g;
    sum_c += c;
    if (g >= 0.25 && g <= 0.37) ++measured;
    if (c >= 0.03 && c <= 0.17) ++corrected;
  }
  return {measured >= 19 && corrected >= 19,
          fmt("measured %d/20 in [0.25, 0.37] (mean %.3f), corrected %d/20 in [0.03, 0.17] (mean %.3f), T %.3f",
              measured, sum_m / 20, corrected, sum_c / 20, s.channel.split_cross)};
}

Outcome imbalance_invariance() {
  auto s = cli::load_scenario(scenario_path("fig3b.json"));
  auto run = [&](double T) {
    ScenarioConfig v = s;
    v.channel.split_cross = T;
    return cli::analyse_stream(v, simulate_stream(v.emitter, v.channel, v.duration_ps, v.seed));
  };
  const auto balanced = run(0.5);
  const auto skewed = run(0.7);
  const double n5 = static_cast<double>(balanced.cross.total_counts());
  const double n7 = static_cast<double>(skewed.cross.total_counts());
  const double ratio = n7 / n5;
  const double expected = 2 * 0.7 * 0.3 / 0.5;
  const double sigma = ratio * std::sqrt(1 / n5 + 1 / n7);
  const double dg = std::abs(skewed.cross_fit.g2_zero - balanced.cross_fit.g2_zero);
  const double combined = std::hypot(skewed.cross_fit.g2_zero_err, balanced.cross_fit.g2_zero_err);
  return {std::abs(ratio - expected) <= 3 * sigma && dg <= combined,
          fmt("coincidence ratio %.4f (expected %.2f, sigma %.4f); g2(0) %.4f vs %.4f, |diff| %.4f <= %.4f", ratio,
              expected, sigma, skewed.cross_fit.g2_zero, balanced.cross_fit.g2_zero, dg, combined)};
}

Outcome correction_round_trip() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> rho_d(0.6, 1.0), tau_d(300, 3000), jit_d(0, 1000);
  const int trials = 50;
  int within = 0;
  for (int i = 0; i < trials; ++i) {
    EmitterSpec e;
    e.beta_forward = e.beta_backward = 0.5;
    const double tau_c = tau_d(rng);
    e.pump_rate_per_ns = e.decay_rate_per_ns = 0.5e3 / tau_c;
    ChannelSpec c;
    const double rho = rho_d(rng);
    c.background_rate_per_ns = background_rate_for(e, rho);
    c.jitter_fwhm_ps = jit_d(rng);
    const auto stream = simulate_stream(e, c, 1e9, 1000 + static_cast<std::uint64_t>(i));
    const auto fit = fit_g2(cross_correlate(stream, Detector::A, Detector::B, 128, 50000), c.jitter_fwhm_ps);
    const auto corr = background_correct(fit, signal_to_total(e, c, Detector::A, Detector::B));
    if (std::abs(corr.value) <= 2 * corr.error) ++within;
  }
  return {within >= 45, fmt("%d/%d within 2 standard errors of 0", within, trials)};
}

Outcome solver_oracle_equivalence() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> core(1.8, 3.6), clad_frac(0.0, 0.9), thick(80, 900), wl(700, 1600),
      gap(20, 300);
  double worst = 0;
  int compared = 0, mismatched_counts = 0;
  for (int i = 0; i < 100; ++i) {
    const double lambda = wl(rng);
    const double n_core = core(rng);
    auto cladding = [&] { return 1.0 + clad_frac(rng) * (n_core - 1.0) * 0.8; };
    if (i % 2 == 0) {
      const double n_cover = cladding(), n_sub = cladding(), d = thick(rng);
      const StackSpec stack{{{n_cover, kInf}, {n_core, d}, {n_sub, kInf}}, lambda};
      const auto expected = oracle::three_layer_indices(n_cover, n_core, n_sub, d, lambda);
      const auto got = guided_indices(stack);
      if (got.size() != expected.size()) ++mismatched_counts;
      for (std::size_t m = 0; m < std::min(got.size(), expected.size()); ++m) {
        const auto mode = solve_slab_te(stack, static_cast<int>(m));
        if (!mode) {
          ++mismatched_counts;
          continue;
        }
        worst = std::max(worst, std::abs(mode->n_eff - expected[m]));
        ++compared;
      }
    } else {
      const double n_clad = cladding(), w = thick(rng) * 0.5, g = gap(rng);
      const StackSpec stack{{{n_clad, kInf}, {n_core, w}, {n_clad, g}, {n_core, w}, {n_clad, kInf}}, lambda};
      const auto even = oracle::coupled_indices(n_core, n_clad, w, g, lambda, true);
      const auto mode = solve_slab_te(stack, 0);
      if (even.empty() || !mode) {
        if (even.empty() != !mode) ++mismatched_counts;
        continue;
      }
      worst = std::max(worst, std::abs(mode->n_eff - even.front()));
      ++compared;
    }
  }
  return {worst <= 1e-9 && mismatched_counts == 0 && compared >= 100,
          fmt("%d modes compared over 100 stacks, max |dn| %.2e, %d count mismatches", compared, worst,
              mismatched_counts)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"coupling-length closed form", closed_form_coupling_length},
      {"coupling-length map trends", coupling_length_map},
      {"mismatch-loss trend", mismatch_loss_trend},
      {"decoupling limit", decoupling_limit},
      {"auto-correlation scenario", auto_correlation_scenario},
      {"cross-correlation scenario", cross_correlation_scenario},
      {"splitter imbalance invariance", imbalance_invariance},
      {"background correction round trip", correction_round_trip},
      {"solver oracle equivalence", solver_oracle_equivalence},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
