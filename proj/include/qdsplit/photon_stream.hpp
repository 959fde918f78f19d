#pragma once

// Seeded Monte-Carlo twin of a CW-pumped quantum emitter feeding an on-chip
// splitter, with guided background light and timing-jittered detectors.
// Times are in ps, rates in 1/ns.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <iterator>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qdsplit {

enum class Detector : std::uint8_t { A = 0, B = 1, C = 2 };  // C is the control port

inline char detector_code(Detector d) { return "ABC"[static_cast<int>(d)]; }

inline std::optional<Detector> parse_detector(std::string_view s) {
  if (s == "A") return Detector::A;
  if (s == "B") return Detector::B;
  if (s == "C") return Detector::C;
  return std::nullopt;
}

struct EmitterSpec {
  double pump_rate_per_ns = 0.1;
  double decay_rate_per_ns = 1.0;
  double beta_forward = 0.475;   // into the guided mode towards the splitter
  double beta_backward = 0.475;  // into the guided mode towards the control port
  // Share of source photons that come from an independent, spectrally
  // overlapping companion emitter with the same dynamics. Zero for a clean dot.
  double companion_fraction = 0.0;

  void validate() const {
    if (!(pump_rate_per_ns > 0.0) || !std::isfinite(pump_rate_per_ns))
      throw std::invalid_argument("pump_rate_per_ns must be positive");
    if (!(decay_rate_per_ns > 0.0) || !std::isfinite(decay_rate_per_ns))
      throw std::invalid_argument("decay_rate_per_ns must be positive");
    if (!(beta_forward >= 0.0) || !(beta_backward >= 0.0) || beta_forward + beta_backward > 1.0)
      throw std::invalid_argument("beta_forward, beta_backward must be >= 0 and sum to <= 1");
    if (!(companion_fraction >= 0.0 && companion_fraction <= 0.5))
      throw std::invalid_argument("companion_fraction must be in [0, 0.5]");
  }

  /// Steady-state photon rate of the dot itself.
  double emission_rate_per_ns() const {
    return pump_rate_per_ns * decay_rate_per_ns / (pump_rate_per_ns + decay_rate_per_ns);
  }
  /// Dot plus companion.
  double source_rate_per_ns() const { return emission_rate_per_ns() / (1.0 - companion_fraction); }
  double correlation_time_ps() const { return 1e3 / (pump_rate_per_ns + decay_rate_per_ns); }
  /// g2(0) of the source light before background and jitter.
  double ideal_g2_zero() const { return 2.0 * companion_fraction * (1.0 - companion_fraction); }
};

struct ChannelSpec {
  // Poissonian light guided along with the dot emission (other dots, ensemble
  // PL). It travels forwards/backwards with equal probability and passes the
  // splitter like any guided photon.
  double background_rate_per_ns = 0.0;
  double split_cross = 0.5;  // probability a splitter-side photon reaches detector A
  double detector_efficiency = 1.0;
  double jitter_fwhm_ps = 520.0;  // timing response of a detector pair, i.e. of a measured delay
  double dead_time_ps = 0.0;

  void validate() const {
    auto fraction = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!(background_rate_per_ns >= 0.0) || !std::isfinite(background_rate_per_ns))
      throw std::invalid_argument("background_rate_per_ns must be >= 0");
    if (!fraction(split_cross)) throw std::invalid_argument("split_cross must be in [0, 1]");
    if (!fraction(detector_efficiency)) throw std::invalid_argument("detector_efficiency must be in [0, 1]");
    if (!(jitter_fwhm_ps >= 0.0) || !std::isfinite(jitter_fwhm_ps))
      throw std::invalid_argument("jitter_fwhm_ps must be >= 0");
    if (!(dead_time_ps >= 0.0) || !std::isfinite(dead_time_ps))
      throw std::invalid_argument("dead_time_ps must be >= 0");
  }

  /// Per-click Gaussian jitter; two independent clicks give a delay spread of jitter_fwhm_ps.
  double jitter_sigma_ps() const { return jitter_fwhm_ps / (2.0 * std::sqrt(2.0 * std::log(2.0))) / std::sqrt(2.0); }
};

struct PhotonEvent {
  double time_ps = 0.0;
  Detector detector = Detector::A;

  friend bool operator==(const PhotonEvent&, const PhotonEvent&) = default;
};

struct PhotonEventStream {
  std::vector<PhotonEvent> events;  // ascending in time
  double duration_ps = 0.0;
  std::uint64_t seed = 0;
  EmitterSpec emitter;
  ChannelSpec channel;

  std::vector<double> times(Detector d) const {
    std::vector<double> out;
    for (const auto& e : events)
      if (e.detector == d) out.push_back(e.time_ps);
    return out;
  }

  std::size_t count(Detector d) const {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [d](const PhotonEvent& e) { return e.detector == d; }));
  }
};

namespace detail {

enum class RngStream : std::uint32_t { emitter = 1, companion, companion_thinning, routing, jitter, background, split };

/// Independent engine per (seed, purpose) so that changing one stage never
/// reshuffles the random numbers of another.
inline std::mt19937_64 rng_for(std::uint64_t seed, RngStream purpose, std::uint32_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), index};
  return std::mt19937_64(seq);
}

inline std::vector<double> two_level_emissions(double pump_per_ps, double decay_per_ps, double duration_ps,
                                               std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::exponential_distribution<double> excite(pump_per_ps);
  std::exponential_distribution<double> decay(decay_per_ps);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(duration_ps * pump_per_ps * decay_per_ps / (pump_per_ps + decay_per_ps) * 1.1) + 16);
  // start from the steady-state occupation
  bool excited = uniform(rng) < pump_per_ps / (pump_per_ps + decay_per_ps);
  double t = 0.0;
  while (true) {
    if (excited) {
      t += decay(rng);
      if (t > duration_ps) break;
      out.push_back(t);
      excited = false;
    } else {
      t += excite(rng);
      if (t > duration_ps) break;
      excited = true;
    }
  }
  return out;
}

inline std::vector<double> poisson_times(double rate_per_ps, double duration_ps, std::mt19937_64& rng) {
  std::vector<double> out;
  if (!(rate_per_ps > 0.0)) return out;
  std::exponential_distribution<double> gap(rate_per_ps);
  for (double t = gap(rng); t <= duration_ps; t += gap(rng)) out.push_back(t);
  return out;
}

}  // namespace detail

/// Two-level Markov (Gillespie) emission times of the dot alone, in ps.
inline std::vector<double> simulate_emitter(const EmitterSpec& spec, double duration_ps, std::uint64_t seed) {
  spec.validate();
  if (!(duration_ps > 0.0)) throw std::invalid_argument("duration must be positive");
  auto rng = detail::rng_for(seed, detail::RngStream::emitter);
  return detail::two_level_emissions(spec.pump_rate_per_ns * 1e-3, spec.decay_rate_per_ns * 1e-3, duration_ps, rng);
}

/// Emission times of the dot merged with its companion (if any).
inline std::vector<double> simulate_source(const EmitterSpec& spec, double duration_ps, std::uint64_t seed) {
  auto times = simulate_emitter(spec, duration_ps, seed);
  if (spec.companion_fraction <= 0.0) return times;
  auto rng = detail::rng_for(seed, detail::RngStream::companion);
  auto thin = detail::rng_for(seed, detail::RngStream::companion_thinning);
  const auto companion = detail::two_level_emissions(spec.pump_rate_per_ns * 1e-3, spec.decay_rate_per_ns * 1e-3,
                                                     duration_ps, rng);
  const double keep = spec.companion_fraction / (1.0 - spec.companion_fraction);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<double> kept;
  for (double t : companion)
    if (uniform(thin) < keep) kept.push_back(t);
  std::vector<double> merged;
  merged.reserve(times.size() + kept.size());
  std::merge(times.begin(), times.end(), kept.begin(), kept.end(), std::back_inserter(merged));
  return merged;
}

namespace detail {

/// Fraction of guided background reaching each detector: half goes back to
/// the control port, half forward through the splitter.
inline double background_share(const ChannelSpec& chan, Detector d) {
  switch (d) {
    case Detector::A: return 0.5 * chan.split_cross;
    case Detector::B: return 0.5 * (1.0 - chan.split_cross);
    default: return 0.5;
  }
}

inline double signal_share(const EmitterSpec& spec, const ChannelSpec& chan, Detector d) {
  switch (d) {
    case Detector::A: return spec.beta_forward * chan.split_cross;
    case Detector::B: return spec.beta_forward * (1.0 - chan.split_cross);
    default: return spec.beta_backward;
  }
}

}  // namespace detail

/// Routes emissions through waveguide, splitter and detectors and adds
/// background. Each emission consumes a fixed set of random numbers whatever
/// its fate, so scenarios that differ only in routing stay paired.
inline PhotonEventStream route_and_detect(std::span<const double> emissions, const EmitterSpec& spec,
                                          const ChannelSpec& chan, double duration_ps, std::uint64_t seed) {
  spec.validate();
  chan.validate();
  if (!(duration_ps > 0.0)) throw std::invalid_argument("duration must be positive");
  if (!std::is_sorted(emissions.begin(), emissions.end()))
    throw std::invalid_argument("emission times must be sorted");

  auto route_rng = detail::rng_for(seed, detail::RngStream::routing);
  auto jitter_rng = detail::rng_for(seed, detail::RngStream::jitter);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, chan.jitter_sigma_ps());
  const bool jittered = chan.jitter_fwhm_ps > 0.0;

  std::vector<double> per_detector[3];
  auto detect = [&](double t, std::optional<Detector> target, bool keep, double dt) {
    if (!target || !keep) return;
    const double shifted = t + dt;
    if (shifted < 0.0 || shifted > duration_ps) return;
    per_detector[static_cast<int>(*target)].push_back(shifted);
  };

  for (double t : emissions) {
    const double u_route = uniform(route_rng);
    const double u_split = uniform(route_rng);
    const bool keep = uniform(route_rng) < chan.detector_efficiency;
    const double dt = jittered ? jitter(jitter_rng) : 0.0;
    std::optional<Detector> target;
    if (u_route < spec.beta_backward) {
      target = Detector::C;
    } else if (u_route < spec.beta_backward + spec.beta_forward) {
      target = u_split < chan.split_cross ? Detector::A : Detector::B;
    }
    detect(t, target, keep, dt);
  }

  for (Detector d : {Detector::A, Detector::B, Detector::C}) {
    const double rate = chan.background_rate_per_ns * 1e-3 * detail::background_share(chan, d);
    auto rng = detail::rng_for(seed, detail::RngStream::background, static_cast<std::uint32_t>(d));
    const auto background = detail::poisson_times(rate, duration_ps, rng);
    std::normal_distribution<double> background_jitter(0.0, chan.jitter_sigma_ps());
    for (double t : background) {
      const bool keep = uniform(rng) < chan.detector_efficiency;
      const double dt = jittered ? background_jitter(rng) : 0.0;
      detect(t, d, keep, dt);
    }
  }

  PhotonEventStream stream;
  stream.duration_ps = duration_ps;
  stream.seed = seed;
  stream.emitter = spec;
  stream.channel = chan;
  for (Detector d : {Detector::A, Detector::B, Detector::C}) {
    auto& times = per_detector[static_cast<int>(d)];
    std::sort(times.begin(), times.end());
    double last = -std::numeric_limits<double>::infinity();
    for (double t : times) {
      if (chan.dead_time_ps > 0.0 && t - last < chan.dead_time_ps) continue;
      stream.events.push_back({t, d});
      last = t;
    }
  }
  std::sort(stream.events.begin(), stream.events.end(), [](const PhotonEvent& a, const PhotonEvent& b) {
    return a.time_ps < b.time_ps || (a.time_ps == b.time_ps && a.detector < b.detector);
  });
  return stream;
}

/// Full pipeline: source emission followed by routing and detection.
inline PhotonEventStream simulate_stream(const EmitterSpec& spec, const ChannelSpec& chan, double duration_ps,
                                         std::uint64_t seed) {
  const auto emissions = simulate_source(spec, duration_ps, seed);
  return route_and_detect(emissions, spec, chan, duration_ps, seed);
}

/// Signal fraction S/(S+B) at one detector.
inline double signal_fraction(const EmitterSpec& spec, const ChannelSpec& chan, Detector d) {
  const double s = spec.source_rate_per_ns() * detail::signal_share(spec, chan, d);
  const double b = chan.background_rate_per_ns * detail::background_share(chan, d);
  if (!(s + b > 0.0)) throw std::domain_error("signal fraction undefined: no light reaches the detector");
  return s / (s + b);
}

/// Effective rho of a detector pair: the correlated part of g2 - 1 scales with
/// rho_start * rho_stop, reported here as its square root.
inline double signal_to_total(const EmitterSpec& spec, const ChannelSpec& chan, Detector start, Detector stop) {
  return std::sqrt(signal_fraction(spec, chan, start) * signal_fraction(spec, chan, stop));
}

/// Background rate (1/ns, guided, before detection) giving signal fraction
/// `rho` at every port when beta_forward == beta_backward.
inline double background_rate_for(const EmitterSpec& spec, double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("rho must be in (0, 1]");
  return 2.0 * spec.source_rate_per_ns() * spec.beta_backward * (1.0 - rho) / rho;
}

/// Splits one detector's clicks 50:50 at random, as a fibre beam-splitter in
/// front of two detectors would.
inline std::pair<std::vector<double>, std::vector<double>> virtual_split(std::span<const double> times,
                                                                        std::uint64_t seed) {
  auto rng = detail::rng_for(seed, detail::RngStream::split);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::pair<std::vector<double>, std::vector<double>> out;
  for (double t : times) (uniform(rng) < 0.5 ? out.first : out.second).push_back(t);
  return out;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline void write_events_csv(std::ostream& os, const PhotonEventStream& stream) {
  os << "timestamp_ps,detector\n";
  for (const auto& e : stream.events) os << format_double(e.time_ps) << ',' << detector_code(e.detector) << '\n';
}

inline std::vector<PhotonEvent> read_events_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "timestamp_ps,detector")
    throw std::runtime_error("events csv: expected header 'timestamp_ps,detector'");
  std::vector<PhotonEvent> events;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    PhotonEvent e;
    const auto res = comma == std::string::npos
                         ? std::from_chars_result{line.data(), std::errc::invalid_argument}
                         : std::from_chars(line.data(), line.data() + comma, e.time_ps);
    const auto det = comma == std::string::npos ? std::nullopt : parse_detector(std::string_view(line).substr(comma + 1));
    if (res.ec != std::errc() || res.ptr != line.data() + comma || !det)
      throw std::runtime_error("events csv: malformed line " + std::to_string(line_no));
    e.detector = *det;
    events.push_back(e);
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const PhotonEvent& a, const PhotonEvent& b) { return a.time_ps < b.time_ps; });
  return events;
}

}  // namespace qdsplit
