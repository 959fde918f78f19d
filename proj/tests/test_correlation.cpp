#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qdsplit/correlation.hpp"
#include "qdsplit/photon_stream.hpp"

using namespace qdsplit;

namespace {

std::vector<double> poisson_stream(double rate_per_ns, double duration, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(rate_per_ns * 1e-3);
  std::vector<double> t;
  for (double x = gap(rng); x < duration; x += gap(rng)) t.push_back(x);
  return t;
}

/// Histogram whose normalized values are exactly `values`; counts are a
/// scaled copy so that fit weights are well defined.
G2Histogram model_histogram(double bin, double tau_max, const std::function<double(double)>& g2) {
  G2Histogram h;
  const auto k = static_cast<int>(std::floor(tau_max / bin));
  h.bin_width_ps = bin;
  h.tau_max_ps = tau_max;
  h.normalization = 1e-5;
  for (int i = -k; i <= k; ++i) {
    h.bin_centers_ps.push_back(i * bin);
    const double v = g2(i * bin);
    h.normalized.push_back(v);
    h.counts.push_back(static_cast<std::uint64_t>(std::llround(v / h.normalization)));
  }
  return h;
}

G2Histogram dip_histogram(double a, double tau_c, double irf, double bin = 128, double tau_max = 20000) {
  G2Histogram h = model_histogram(bin, tau_max, [](double) { return 1.0; });
  const DipModel model(h.bin_centers_ps, bin, irf);
  h.normalized = model.evaluate(a, tau_c);
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    h.counts[i] = static_cast<std::uint64_t>(std::llround(h.normalized[i] / h.normalization));
  return h;
}

EmitterSpec bright_emitter() {
  EmitterSpec e;
  e.pump_rate_per_ns = 0.7;
  e.decay_rate_per_ns = 0.7;
  e.beta_forward = 0.5;
  e.beta_backward = 0.5;
  return e;
}

}  // namespace

TEST(CrossCorrelate, IndependentPoissonStreamsAreFlat) {
  const double duration = 5e8;
  const auto a = poisson_stream(0.5, duration, 1);
  const auto b = poisson_stream(0.5, duration, 2);
  const auto h = cross_correlate(a, b, duration, 128, 50000);
  double sum = 0;
  for (double v : h.normalized) sum += v;
  const double mean = sum / static_cast<double>(h.normalized.size());
  const double per_bin = 1.0 / h.normalization;
  EXPECT_NEAR(mean, 1.0, 3.0 / std::sqrt(per_bin * h.normalized.size()));
  EXPECT_NEAR(h.far_wing_mean, 1.0, 0.01);
}

TEST(CrossCorrelate, BinLayoutAndNormalization) {
  const std::vector<double> start{1000.0, 2000.0};
  const std::vector<double> stop{1000.0, 1130.0, 2500.0};
  const auto h = cross_correlate(start, stop, 1e4, 100, 1000);
  ASSERT_EQ(h.counts.size(), 21u);
  EXPECT_DOUBLE_EQ(h.bin_centers_ps.front(), -1000.0);
  EXPECT_DOUBLE_EQ(h.bin_centers_ps[10], 0.0);
  // delays: 0, 130, 1500(out), -1000, -870, 500
  EXPECT_EQ(h.counts[10], 1u);
  EXPECT_EQ(h.counts[11], 1u);
  EXPECT_EQ(h.counts[0], 1u);
  EXPECT_EQ(h.counts[1], 1u);
  EXPECT_EQ(h.counts[15], 1u);
  EXPECT_EQ(h.total_counts(), 5u);
  EXPECT_DOUBLE_EQ(h.normalization, 1e4 / (2.0 * 3.0 * 100.0));
  EXPECT_DOUBLE_EQ(h.normalized[10], h.normalization);
}

TEST(CrossCorrelate, PerfectEmitterHasEmptyZeroBin) {
  EmitterSpec e = bright_emitter();
  ChannelSpec c;
  c.jitter_fwhm_ps = 0;
  const auto s = simulate_stream(e, c, 1e9, 3);
  const auto h = cross_correlate(s, Detector::A, Detector::B, 1.0, 100.0);
  EXPECT_EQ(h.counts[h.counts.size() / 2], 0u);
  const auto auto_h = cross_correlate(s, Detector::C, Detector::C, 1.0, 100.0);
  EXPECT_EQ(auto_h.counts[auto_h.counts.size() / 2], 0u);
}

TEST(CrossCorrelate, ReversedPairIsTimeMirror) {
  ChannelSpec c;
  c.background_rate_per_ns = 0.02;
  c.split_cross = 0.6;
  const auto s = simulate_stream(bright_emitter(), c, 3e8, 12);
  const auto ab = cross_correlate(s, Detector::A, Detector::B, 128, 50000);
  const auto ba = cross_correlate(s, Detector::B, Detector::A, 128, 50000);
  const auto mirror = ba.reversed();
  EXPECT_EQ(ab.counts, mirror.counts);
  EXPECT_EQ(ab.n_start, mirror.n_start);
  const auto f_ab = fit_g2(ab, 520);
  const auto f_ba = fit_g2(ba, 520);
  EXPECT_NEAR(f_ab.g2_zero, f_ba.g2_zero, 1e-9);
  EXPECT_NEAR(f_ab.dip_depth, f_ba.dip_depth, 1e-9);
  EXPECT_NEAR(f_ab.tau_c_ps, f_ba.tau_c_ps, 1e-9 * f_ab.tau_c_ps);
}

TEST(CrossCorrelate, ErrorPaths) {
  const std::vector<double> t{1.0, 2.0};
  const std::vector<double> empty;
  const std::vector<double> unsorted{3.0, 1.0};
  EXPECT_THROW(cross_correlate(empty, t, 10.0, 1, 20), std::invalid_argument);
  EXPECT_THROW(cross_correlate(t, empty, 10.0, 1, 20), std::invalid_argument);
  EXPECT_THROW(cross_correlate(t, t, 0.0, 1, 20), std::domain_error);
  EXPECT_THROW(cross_correlate(t, t, 10.0, 1, 5), std::invalid_argument);
  EXPECT_THROW(cross_correlate(t, t, 10.0, 0, 20), std::invalid_argument);
  EXPECT_THROW(cross_correlate(unsorted, t, 10.0, 1, 20), std::invalid_argument);
}

TEST(ConvolvedDip, ClosedFormMatchesQuadrature) {
  for (double tau : {100.0, 400.0, 714.0, 3000.0}) {
    for (double irf : {0.0, 200.0, 520.0, 1000.0}) {
      const double expected = irf == 0.0 ? 1.0 : oracle::gaussian_averaged_exp(tau, irf);
      EXPECT_NEAR(convolved_dip_at_zero(tau, irf), expected, 1e-8) << tau << " " << irf;
    }
  }
  // far asymptotic branch
  EXPECT_NEAR(convolved_dip_at_zero(5.0, 520.0), oracle::gaussian_averaged_exp(5.0, 520.0), 1e-6);
}

TEST(DipModel, ReducesToBinAveragedExponentialWithoutIrf) {
  const std::vector<double> centers{-256, -128, 0, 128, 256};
  const DipModel model(centers, 128, 0.0);
  const auto k = model.kernel(500);
  // average of exp(-|t|/500) over the 8 sample points of the zero bin
  double expected = 0;
  for (int j = 0; j < 8; ++j) expected += std::exp(-std::abs((j + 0.5 - 4) * 16.0) / 500) / 8;
  EXPECT_NEAR(k[2], expected, 1e-15);
  EXPECT_NEAR(k[1], k[3], 1e-15);
}

TEST(FitG2, RecoversNoiseFreeModel) {
  const auto h = dip_histogram(0.77, 900, 520);
  const auto fit = fit_g2(h, 520);
  EXPECT_NEAR(fit.dip_depth, 0.77, 0.77e-6);
  EXPECT_NEAR(fit.tau_c_ps, 900, 900e-6);
  EXPECT_NEAR(fit.g2_zero, 1 - 0.77 * convolved_dip_at_zero(900, 520), 1e-6);
  EXPECT_TRUE(fit.has_dip);
  EXPECT_GE(fit.g2_zero, 0.0);
  EXPECT_GE(fit.dip_depth_err, 0.0);
  EXPECT_GE(fit.tau_c_err_ps, 0.0);
  EXPECT_NEAR(fit.deconvolved_g2_zero(), 0.23, 1e-6);
}

TEST(FitG2, AgreesWithBruteForceGridSearch) {
  const auto h = dip_histogram(0.62, 1300, 400, 128, 10000);
  const DipModel model(h.bin_centers_ps, h.bin_width_ps, 400);
  double best = std::numeric_limits<double>::infinity();
  double best_a = 0, best_tau = 0;
  // 1e-3 relative resolution in both parameters around the optimum region
  for (double tau = 1100; tau <= 1500; tau *= 1.001) {
    const auto k = model.kernel(tau);
    for (double a = 0.50; a <= 0.75; a += 0.001) {
      double chi2 = 0;
      for (std::size_t i = 0; i < k.size(); ++i) {
        const double r = h.normalized[i] - (1 - a * k[i]);
        chi2 += r * r / static_cast<double>(h.counts[i]);
      }
      if (chi2 < best) {
        best = chi2;
        best_a = a;
        best_tau = tau;
      }
    }
  }
  const auto fit = fit_g2(h, 400);
  EXPECT_NEAR(fit.dip_depth, best_a, 1e-3);
  EXPECT_NEAR(fit.tau_c_ps, best_tau, 1e-3 * best_tau);
}

TEST(FitG2, AnalyticTwoLevelHistogramWithoutIrf) {
  const double tau_c = 1e3 / 1.1;
  // bin-averaged 1 - exp(-|tau|/tau_c), integrated analytically
  const double bin = 128;
  auto avg = [&](double center) {
    const double lo = center - bin / 2, hi = center + bin / 2;
    double integral;
    if (lo >= 0) {
      integral = tau_c * (std::exp(-lo / tau_c) - std::exp(-hi / tau_c));
    } else if (hi <= 0) {
      integral = tau_c * (std::exp(hi / tau_c) - std::exp(lo / tau_c));
    } else {
      integral = tau_c * (2.0 - std::exp(-hi / tau_c) - std::exp(lo / tau_c));
    }
    return 1.0 - integral / bin;
  };
  const auto h = model_histogram(bin, 50000, avg);
  const auto fit = fit_g2(h, 0.0);
  EXPECT_NEAR(fit.tau_c_ps, tau_c, 0.05 * tau_c);
  EXPECT_NEAR(fit.dip_depth, 1.0, 1e-3);
}

TEST(FitG2, FlatHistogramReportsNoDip) {
  const auto h = model_histogram(128, 20000, [](double t) { return 1.0 + 0.3 * std::exp(-std::abs(t) / 800); });
  const auto fit = fit_g2(h, 520);
  EXPECT_FALSE(fit.has_dip);
  EXPECT_LT(fit.dip_depth, 0.0);
}

TEST(FitG2, BoundedIterationsThrowFitError) {
  const auto h = dip_histogram(0.77, 900, 520);
  FitOptions opt;
  opt.max_iterations = 2;
  EXPECT_THROW(fit_g2(h, 520, opt), FitError);
}

TEST(FitG2, RejectsBadInput) {
  const auto h = dip_histogram(0.77, 900, 520);
  EXPECT_THROW(fit_g2(h, -1), std::invalid_argument);
  G2Histogram tiny;
  EXPECT_THROW(fit_g2(tiny, 520), std::invalid_argument);
}

TEST(FitG2, DoublingDurationShrinksErrorsBySqrtTwo) {
  EmitterSpec e = bright_emitter();
  ChannelSpec c;
  c.background_rate_per_ns = background_rate_for(e, 0.95);
  double ratio_a = 0, ratio_tau = 0;
  const int seeds = 4;
  for (int s = 0; s < seeds; ++s) {
    const auto one = fit_g2(cross_correlate(simulate_stream(e, c, 5e8, 100 + s), Detector::A, Detector::B, 128, 50000), 520);
    const auto two = fit_g2(cross_correlate(simulate_stream(e, c, 1e9, 200 + s), Detector::A, Detector::B, 128, 50000), 520);
    ratio_a += one.dip_depth_err / two.dip_depth_err / seeds;
    ratio_tau += one.tau_c_err_ps / two.tau_c_err_ps / seeds;
  }
  EXPECT_NEAR(ratio_a, std::sqrt(2.0), 0.2 * std::sqrt(2.0));
  EXPECT_NEAR(ratio_tau, std::sqrt(2.0), 0.2 * std::sqrt(2.0));
}

TEST(BackgroundCorrect, Identities) {
  G2Fit fit;
  fit.dip_depth = 0.7;
  fit.dip_depth_err = 0.02;
  const auto unchanged = background_correct(fit, 1.0);
  EXPECT_DOUBLE_EQ(unchanged.value, fit.deconvolved_g2_zero());
  EXPECT_DOUBLE_EQ(unchanged.error, 0.02);

  const double rho = 0.8;
  fit.dip_depth = rho * rho;  // measured 1 - rho^2 for an ideal emitter
  EXPECT_NEAR(background_correct(fit, rho).value, 0.0, 1e-15);

  EXPECT_THROW(background_correct(fit, 0.0), std::invalid_argument);
  EXPECT_THROW(background_correct(fit, 1.2), std::invalid_argument);
  EXPECT_THROW(background_correct(fit, 0.9, -0.1), std::invalid_argument);
}

TEST(BackgroundCorrect, ErrorPropagationAndDisplayClamp) {
  G2Fit fit;
  fit.dip_depth = 0.9;
  fit.dip_depth_err = 0.03;
  const double rho = 0.9, rho_err = 0.01;
  const auto c = background_correct(fit, rho, rho_err);
  EXPECT_NEAR(c.value, 1 - 0.9 / 0.81, 1e-15);
  EXPECT_LT(c.value, 0.0);
  EXPECT_EQ(c.display_value(), 0.0);
  const double expected = std::hypot(0.03 / 0.81, 2 * 0.9 * rho_err / (0.81 * 0.9));
  EXPECT_NEAR(c.error, expected, 1e-15);
}

TEST(BackgroundCorrect, RoundTripOnSimulatedStreams) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> rho_d(0.6, 1.0), tau_d(300, 3000), jit_d(0, 1000);
  int within = 0;
  const int trials = 6;
  for (int i = 0; i < trials; ++i) {
    EmitterSpec e = bright_emitter();
    const double tau = tau_d(rng);
    e.pump_rate_per_ns = e.decay_rate_per_ns = 0.5e3 / tau;
    ChannelSpec c;
    const double rho = rho_d(rng);
    c.background_rate_per_ns = background_rate_for(e, rho);
    c.jitter_fwhm_ps = jit_d(rng);
    const auto s = simulate_stream(e, c, 1e9, 500 + i);
    const auto fit = fit_g2(cross_correlate(s, Detector::A, Detector::B, 128, 50000), c.jitter_fwhm_ps);
    const auto corr = background_correct(fit, signal_to_total(e, c, Detector::A, Detector::B));
    if (std::abs(corr.value) <= 2 * corr.error) ++within;
  }
  EXPECT_GE(within, trials - 1);
}

TEST(HistogramCsv, RoundTrip) {
  const auto s = simulate_stream(bright_emitter(), ChannelSpec{}, 1e8, 4);
  const auto h = cross_correlate(s, Detector::A, Detector::B, 128, 20000);
  std::stringstream ss;
  write_histogram_csv(ss, h);
  const auto back = read_histogram_csv(ss);
  EXPECT_EQ(back.counts, h.counts);
  EXPECT_EQ(back.bin_centers_ps, h.bin_centers_ps);
  EXPECT_EQ(back.normalized, h.normalized);
  EXPECT_DOUBLE_EQ(back.bin_width_ps, 128);
  EXPECT_NEAR(back.normalization, h.normalization, 1e-12 * h.normalization);
  const auto f1 = fit_g2(h, 520);
  const auto f2 = fit_g2(back, 520);
  EXPECT_NEAR(f1.g2_zero, f2.g2_zero, 1e-9);
  std::istringstream bad("tau_ps,counts,normalized\n0,x,1\n");
  EXPECT_THROW(read_histogram_csv(bad), std::runtime_error);
}
