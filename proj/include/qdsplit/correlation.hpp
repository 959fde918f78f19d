#pragma once

// Second-order correlation histograms from time tags, the IRF-convolved
// antibunching fit, and the background / timing-response correction.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "qdsplit/numerics.hpp"
#include "qdsplit/photon_stream.hpp"

namespace qdsplit {

struct G2Histogram {
  std::vector<double> bin_centers_ps;  // k * bin_width_ps, symmetric about 0
  std::vector<std::uint64_t> counts;
  std::vector<double> normalized;
  double bin_width_ps = 0.0;
  double tau_max_ps = 0.0;
  std::size_t n_start = 0;
  std::size_t n_stop = 0;
  double duration_ps = 0.0;
  double normalization = 0.0;  // normalized value of a single count
  double far_wing_mean = 0.0;  // mean normalized value for |tau| > tau_max / 2

  std::uint64_t total_counts() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

  /// Histogram of the swapped channel pair.
  G2Histogram reversed() const {
    G2Histogram r = *this;
    std::reverse(r.counts.begin(), r.counts.end());
    std::reverse(r.normalized.begin(), r.normalized.end());
    std::swap(r.n_start, r.n_stop);
    return r;
  }
};

namespace detail {

inline void finish_histogram(G2Histogram& h) {
  h.normalized.resize(h.counts.size());
  double wing_sum = 0.0;
  std::size_t wing_n = 0;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    h.normalized[i] = static_cast<double>(h.counts[i]) * h.normalization;
    if (std::abs(h.bin_centers_ps[i]) > 0.5 * h.tau_max_ps) {
      wing_sum += h.normalized[i];
      ++wing_n;
    }
  }
  h.far_wing_mean = wing_n ? wing_sum / static_cast<double>(wing_n) : 0.0;
}

}  // namespace detail

/// Full pair-counting correlation of stop relative to start: every pair with
/// |t_stop - t_start| inside the window is counted. Normalized so that
/// uncorrelated streams give 1: counts / (rate_start rate_stop bin duration).
inline G2Histogram cross_correlate(std::span<const double> start, std::span<const double> stop,
                                   double duration_ps, double bin_width_ps, double tau_max_ps) {
  if (start.empty() || stop.empty()) throw std::invalid_argument("cross_correlate: empty stream");
  if (!(bin_width_ps > 0.0)) throw std::invalid_argument("cross_correlate: bin width must be positive");
  if (!(tau_max_ps >= 10.0 * bin_width_ps))
    throw std::invalid_argument("cross_correlate: window must span at least 10 bins");
  if (!(duration_ps > 0.0) || !std::isfinite(duration_ps))
    throw std::domain_error("cross_correlate: zero rate, normalization undefined");
  if (!std::is_sorted(start.begin(), start.end()) || !std::is_sorted(stop.begin(), stop.end()))
    throw std::invalid_argument("cross_correlate: time tags must be sorted");

  const auto half_bins = static_cast<std::int64_t>(std::floor(tau_max_ps / bin_width_ps));
  const std::size_t n_bins = static_cast<std::size_t>(2 * half_bins + 1);
  const double reach = (static_cast<double>(half_bins) + 0.5) * bin_width_ps;

  // Starts are split into contiguous chunks; per-chunk counts are summed.
  const std::size_t chunks = std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), start.size());
  std::vector<std::vector<std::uint64_t>> partial(chunks, std::vector<std::uint64_t>(n_bins, 0));
  numerics::parallel_for(chunks, [&](std::size_t c) {
    const std::size_t first = start.size() * c / chunks;
    const std::size_t last = start.size() * (c + 1) / chunks;
    auto& local = partial[c];
    auto lo = std::lower_bound(stop.begin(), stop.end(), start[first] - reach);
    for (std::size_t i = first; i < last; ++i) {
      const double t = start[i];
      while (lo != stop.end() && *lo < t - reach) ++lo;
      for (auto it = lo; it != stop.end() && *it < t + reach; ++it) {
        const auto k = static_cast<std::int64_t>(std::floor((*it - t) / bin_width_ps + 0.5));
        if (k >= -half_bins && k <= half_bins) ++local[static_cast<std::size_t>(k + half_bins)];
      }
    }
  });

  G2Histogram h;
  h.counts.assign(n_bins, 0);
  for (const auto& local : partial)
    for (std::size_t i = 0; i < n_bins; ++i) h.counts[i] += local[i];
  h.bin_centers_ps.resize(n_bins);
  for (std::size_t i = 0; i < n_bins; ++i)
    h.bin_centers_ps[i] = static_cast<double>(static_cast<std::int64_t>(i) - half_bins) * bin_width_ps;
  h.bin_width_ps = bin_width_ps;
  h.tau_max_ps = tau_max_ps;
  h.n_start = start.size();
  h.n_stop = stop.size();
  h.duration_ps = duration_ps;
  h.normalization = duration_ps / (static_cast<double>(start.size()) * static_cast<double>(stop.size()) * bin_width_ps);
  detail::finish_histogram(h);
  return h;
}

/// Correlation between two detectors of a stream. Correlating a detector
/// with itself splits its clicks with a virtual 50:50 beam-splitter first.
inline G2Histogram cross_correlate(const PhotonEventStream& stream, Detector start, Detector stop,
                                   double bin_width_ps, double tau_max_ps) {
  if (start == stop) {
    const auto [first, second] = virtual_split(stream.times(start), stream.seed);
    return cross_correlate(first, second, stream.duration_ps, bin_width_ps, tau_max_ps);
  }
  return cross_correlate(stream.times(start), stream.times(stop), stream.duration_ps, bin_width_ps, tau_max_ps);
}

/// exp(-|tau|/tau_c) convolved with a unit-area Gaussian of the given FWHM,
/// evaluated at tau = 0 in closed form.
inline double convolved_dip_at_zero(double tau_c_ps, double irf_fwhm_ps) {
  if (irf_fwhm_ps <= 0.0) return 1.0;
  const double sigma = irf_fwhm_ps / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  const double k = sigma / tau_c_ps;
  if (k > 25.0) {
    const double k2 = k * k;
    return std::sqrt(2.0 / std::numbers::pi) / k * (1.0 - 1.0 / k2 + 3.0 / (k2 * k2));
  }
  return std::exp(0.5 * k * k) * std::erfc(k / std::sqrt(2.0));
}

/// Bin-averaged antibunching kernel on a histogram grid: exp(-|tau|/tau_c)
/// sampled 8x per bin, convolved numerically with a Gaussian IRF and averaged
/// back onto the bins.
class DipModel {
 public:
  static constexpr int kOversample = 8;

  DipModel(std::span<const double> bin_centers_ps, double bin_width_ps, double irf_fwhm_ps)
      : bin_width_(bin_width_ps), irf_fwhm_(irf_fwhm_ps), n_bins_(bin_centers_ps.size()) {
    if (bin_centers_ps.empty() || !(bin_width_ps > 0.0)) throw std::invalid_argument("DipModel: empty grid");
    if (!(irf_fwhm_ps >= 0.0)) throw std::invalid_argument("DipModel: irf_fwhm must be >= 0");
    pitch_ = bin_width_ps / kOversample;
    const double sigma = irf_fwhm_ps / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    const int reach = sigma < 0.25 * pitch_ ? 0 : static_cast<int>(std::ceil(5.0 * sigma / pitch_));
    taps_.resize(static_cast<std::size_t>(2 * reach + 1));
    for (int m = -reach; m <= reach; ++m) {
      const double x = m * pitch_;
      taps_[static_cast<std::size_t>(m + reach)] = reach == 0 ? 1.0 : std::exp(-0.5 * x * x / (sigma * sigma));
    }
    const double sum = std::accumulate(taps_.begin(), taps_.end(), 0.0);
    for (auto& t : taps_) t /= sum;
    reach_ = reach;
    fine_.resize(n_bins_ * kOversample + 2 * static_cast<std::size_t>(reach));
    for (std::size_t i = 0; i < fine_.size(); ++i) {
      const auto bin = static_cast<std::int64_t>(i) - reach;
      // fine point j of bin b sits at center_b + (j + 0.5 - kOversample/2) * pitch
      fine_[i] = bin_centers_ps.front() + (static_cast<double>(bin) + 0.5 - 0.5 * kOversample) * pitch_;
    }
  }

  double bin_width() const { return bin_width_; }
  double irf_fwhm() const { return irf_fwhm_; }

  /// Bin-averaged convolved exp(-|tau|/tau_c).
  std::vector<double> kernel(double tau_c_ps) const {
    std::vector<double> shape(fine_.size());
    for (std::size_t i = 0; i < fine_.size(); ++i) shape[i] = std::exp(-std::abs(fine_[i]) / tau_c_ps);
    std::vector<double> out(n_bins_, 0.0);
    const std::size_t width = taps_.size();
    for (std::size_t b = 0; b < n_bins_; ++b) {
      double acc = 0.0;
      for (int j = 0; j < kOversample; ++j) {
        const std::size_t center = b * kOversample + static_cast<std::size_t>(j) + static_cast<std::size_t>(reach_);
        const double* s = &shape[center - static_cast<std::size_t>(reach_)];
        double conv = 0.0;
        for (std::size_t m = 0; m < width; ++m) conv += taps_[m] * s[width - 1 - m];
        acc += conv;
      }
      out[b] = acc / kOversample;
    }
    return out;
  }

  std::vector<double> evaluate(double dip_depth, double tau_c_ps) const {
    auto k = kernel(tau_c_ps);
    for (auto& v : k) v = 1.0 - dip_depth * v;
    return k;
  }

 private:
  double bin_width_;
  double irf_fwhm_;
  std::size_t n_bins_;
  double pitch_ = 0.0;
  int reach_ = 0;
  std::vector<double> taps_;
  std::vector<double> fine_;
};

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct G2Fit {
  double g2_zero = 1.0;  // convolved model at tau = 0
  double g2_zero_err = 0.0;
  double dip_depth = 0.0;  // a of 1 - a exp(-|tau|/tau_c), before convolution
  double dip_depth_err = 0.0;
  double tau_c_ps = 0.0;
  double tau_c_err_ps = 0.0;
  double irf_fwhm_ps = 0.0;
  double residual_norm = 0.0;  // sqrt of the weighted chi-square
  double reduced_chi2 = 0.0;
  bool has_dip = false;  // false: flat or bunched histogram

  double deconvolved_g2_zero() const { return 1.0 - dip_depth; }
};

struct FitOptions {
  int reweight_passes = 2;   // passes with model-based Poisson variances after the raw-count pass
  int max_iterations = 200;  // per one-dimensional minimization
};

namespace detail {

struct ProfileResult {
  double dip_depth;
  double chi2;
};

/// Best dip depth for a fixed kernel (the model is linear in it) and the
/// resulting weighted chi-square.
inline ProfileResult profile_fit(std::span<const double> y, std::span<const double> w,
                                 std::span<const double> k) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    num += w[i] * (1.0 - y[i]) * k[i];
    den += w[i] * k[i] * k[i];
  }
  const double a = den > 0.0 ? num / den : 0.0;
  double chi2 = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - 1.0 + a * k[i];
    chi2 += w[i] * r * r;
  }
  return {a, chi2};
}

}  // namespace detail

/// Weighted least-squares fit of 1 - a exp(-|tau|/tau_c) convolved with a
/// Gaussian IRF. The dip depth is eliminated analytically and tau_c found by
/// a bracketed 1D search. Weights start from raw-count Poisson variances and
/// are then refined with the fitted model's expected counts.
inline G2Fit fit_g2(const G2Histogram& hist, double irf_fwhm_ps, FitOptions options = {}) {
  if (!(irf_fwhm_ps >= 0.0)) throw std::invalid_argument("fit_g2: irf_fwhm must be >= 0");
  if (hist.counts.size() < 3 || hist.normalized.size() != hist.counts.size())
    throw std::invalid_argument("fit_g2: histogram too small");
  if (!(hist.normalization > 0.0)) throw std::invalid_argument("fit_g2: histogram is not normalized");

  const DipModel model(hist.bin_centers_ps, hist.bin_width_ps, irf_fwhm_ps);
  const std::span<const double> y(hist.normalized);
  const double scale = hist.normalization;
  const std::size_t n = y.size();

  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 1.0 / (scale * scale * std::max<double>(static_cast<double>(hist.counts[i]), 1.0));

  const double log_lo = std::log(hist.bin_width_ps / DipModel::kOversample);
  const double log_hi = std::log(std::max(hist.tau_max_ps, 2.0 * hist.bin_width_ps) / 2.0);
  auto chi2_at = [&](double log_tau) {
    const auto k = model.kernel(std::exp(log_tau));
    return detail::profile_fit(y, w, k).chi2;
  };

  double log_tau = 0.0;
  for (int pass = 0; pass <= options.reweight_passes; ++pass) {
    constexpr int kCoarse = 48;
    int best = 0;
    double best_chi2 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kCoarse; ++i) {
      const double u = log_lo + (log_hi - log_lo) * i / (kCoarse - 1);
      const double c = chi2_at(u);
      if (c < best_chi2) {
        best_chi2 = c;
        best = i;
      }
    }
    const double step = (log_hi - log_lo) / (kCoarse - 1);
    const double lo = std::max(log_lo, log_lo + step * (best - 1));
    const double hi = std::min(log_hi, log_lo + step * (best + 1));
    std::uintmax_t iterations = static_cast<std::uintmax_t>(options.max_iterations);
    const auto found = boost::math::tools::brent_find_minima(chi2_at, lo, hi, std::numeric_limits<double>::digits / 2,
                                                             iterations);
    if (iterations >= static_cast<std::uintmax_t>(options.max_iterations))
      throw FitError("fit_g2: correlation-time search did not converge");
    log_tau = found.first;

    if (pass < options.reweight_passes) {
      const auto k = model.kernel(std::exp(log_tau));
      const double a = detail::profile_fit(y, w, k).dip_depth;
      for (std::size_t i = 0; i < n; ++i) {
        const double expected = std::max(1.0 - a * k[i], 1e-3);
        w[i] = 1.0 / (scale * expected);
      }
    }
  }

  const double tau_c = std::exp(log_tau);
  const auto k = model.kernel(tau_c);
  const auto best = detail::profile_fit(y, w, k);
  const double a = best.dip_depth;

  // Covariance of (a, tau_c) from the weighted normal matrix.
  const double h = 1e-5 * tau_c;
  const auto k_plus = model.kernel(tau_c + h);
  const auto k_minus = model.kernel(tau_c - h);
  std::array<double, 3> normal{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    const double d_a = -k[i];
    const double d_tau = -a * (k_plus[i] - k_minus[i]) / (2.0 * h);
    normal[0] += w[i] * d_a * d_a;
    normal[1] += w[i] * d_a * d_tau;
    normal[2] += w[i] * d_tau * d_tau;
  }
  const double det = normal[0] * normal[2] - normal[1] * normal[1];
  const double inf = std::numeric_limits<double>::infinity();
  const double var_a = det > 0.0 ? normal[2] / det : inf;
  const double var_tau = det > 0.0 ? normal[0] / det : inf;
  const double cov = det > 0.0 ? -normal[1] / det : 0.0;

  G2Fit fit;
  fit.irf_fwhm_ps = irf_fwhm_ps;
  fit.dip_depth = a;
  fit.tau_c_ps = tau_c;
  fit.dip_depth_err = std::sqrt(var_a);
  fit.tau_c_err_ps = std::sqrt(var_tau);
  const double c0 = convolved_dip_at_zero(tau_c, irf_fwhm_ps);
  const double dc0 = (convolved_dip_at_zero(tau_c + h, irf_fwhm_ps) - convolved_dip_at_zero(tau_c - h, irf_fwhm_ps)) / (2.0 * h);
  fit.g2_zero = 1.0 - a * c0;
  const double g_a = -c0;
  const double g_tau = -a * dc0;
  fit.g2_zero_err = std::sqrt(std::max(0.0, g_a * g_a * var_a + 2.0 * g_a * g_tau * cov + g_tau * g_tau * var_tau));
  fit.residual_norm = std::sqrt(best.chi2);
  fit.reduced_chi2 = best.chi2 / static_cast<double>(n - 2);
  fit.has_dip = a > 0.0;
  return fit;
}

struct CorrectedG2 {
  double value = 0.0;
  double error = 0.0;

  /// Noise can push the estimate below zero; clamp only for display.
  double display_value() const { return std::max(0.0, value); }
};

/// Removes uncorrelated background (signal fraction rho) from the deconvolved
/// dip: g2_corr = (g2_deconv - (1 - rho^2)) / rho^2 = 1 - a / rho^2.
inline CorrectedG2 background_correct(const G2Fit& fit, double rho, double rho_err = 0.0) {
  if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("background_correct: rho must be in (0, 1]");
  if (!(rho_err >= 0.0)) throw std::invalid_argument("background_correct: rho_err must be >= 0");
  const double r2 = rho * rho;
  const double g2_deconv = fit.deconvolved_g2_zero();
  CorrectedG2 out;
  out.value = (g2_deconv - (1.0 - r2)) / r2;
  const double d_a = fit.dip_depth_err / r2;
  const double d_rho = 2.0 * fit.dip_depth * rho_err / (r2 * rho);
  out.error = std::hypot(d_a, d_rho);
  return out;
}

inline void write_histogram_csv(std::ostream& os, const G2Histogram& h) {
  os << "tau_ps,counts,normalized\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    os << format_double(h.bin_centers_ps[i]) << ',' << h.counts[i] << ',' << format_double(h.normalized[i]) << '\n';
}

/// Reads a histogram written by write_histogram_csv. Event totals and duration
/// are not stored in the file; the per-count normalization is recovered from
/// the rows.
inline G2Histogram read_histogram_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "tau_ps,counts,normalized")
    throw std::runtime_error("histogram csv: expected header 'tau_ps,counts,normalized'");
  G2Histogram h;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    double tau = 0.0;
    std::uint64_t count = 0;
    double norm = 0.0;
    bool ok = c2 != std::string::npos;
    if (ok) {
      const char* b = line.data();
      const auto r1 = std::from_chars(b, b + c1, tau);
      const auto r2 = std::from_chars(b + c1 + 1, b + c2, count);
      const auto r3 = std::from_chars(b + c2 + 1, b + line.size(), norm);
      ok = r1.ec == std::errc() && r1.ptr == b + c1 && r2.ec == std::errc() && r2.ptr == b + c2 &&
           r3.ec == std::errc() && r3.ptr == b + line.size();
    }
    if (!ok) throw std::runtime_error("histogram csv: malformed line " + std::to_string(line_no));
    h.bin_centers_ps.push_back(tau);
    h.counts.push_back(count);
    h.normalized.push_back(norm);
  }
  if (h.counts.size() < 3) throw std::runtime_error("histogram csv: too few bins");
  h.bin_width_ps = (h.bin_centers_ps.back() - h.bin_centers_ps.front()) / static_cast<double>(h.counts.size() - 1);
  h.tau_max_ps = h.bin_centers_ps.back();
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    if (h.counts[i] > 0) {
      h.normalization = h.normalized[i] / static_cast<double>(h.counts[i]);
      break;
    }
  }
  if (!(h.normalization > 0.0)) throw std::runtime_error("histogram csv: no counts, normalization unknown");
  double wing_sum = 0.0;
  std::size_t wing_n = 0;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    if (std::abs(h.bin_centers_ps[i]) > 0.5 * h.tau_max_ps) {
      wing_sum += h.normalized[i];
      ++wing_n;
    }
  }
  h.far_wing_mean = wing_n ? wing_sum / static_cast<double>(wing_n) : 0.0;
  return h;
}

}  // namespace qdsplit
