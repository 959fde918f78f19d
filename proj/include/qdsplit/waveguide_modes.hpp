#pragma once

// Guided TE modes of 1D dielectric slab stacks and the effective-index
// reduction of air-clad rectangular waveguides and waveguide pairs.
//
// Conventions: lengths in nm, k0 = 2*pi/lambda0, and every transverse field
// is carried as E(x) together with its slope dE/d(k0 x), which keeps the
// transfer matrices dimensionless.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "qdsplit/numerics.hpp"

namespace qdsplit {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Free-space wavenumber in rad/nm.
inline double wavenumber(double wavelength_nm) { return 2.0 * kPi / wavelength_nm; }

struct Layer {
  double index = 1.0;
  double thickness_nm = kInf;  // ignored for the two outer claddings
};

/// Ordered 1D layer stack. The first and last layers are semi-infinite
/// claddings; everything in between has finite thickness.
struct StackSpec {
  std::vector<Layer> layers;
  double wavelength_nm = 0.0;

  static StackSpec symmetric_slab(double n_core, double n_clad, double thickness_nm,
                                  double wavelength_nm) {
    return {{{n_clad, kInf}, {n_core, thickness_nm}, {n_clad, kInf}}, wavelength_nm};
  }

  void validate() const {
    if (layers.size() < 3) throw std::invalid_argument("stack needs at least 3 layers");
    if (!(wavelength_nm > 0.0) || !std::isfinite(wavelength_nm))
      throw std::invalid_argument("stack wavelength must be positive");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& layer = layers[i];
      if (!(layer.index >= 1.0) || !std::isfinite(layer.index))
        throw std::invalid_argument("layer " + std::to_string(i) + ": index must be >= 1");
      const bool outer = i == 0 || i + 1 == layers.size();
      if (!outer && (!(layer.thickness_nm > 0.0) || !std::isfinite(layer.thickness_nm)))
        throw std::invalid_argument("layer " + std::to_string(i) +
                                    ": thickness must be positive and finite");
    }
  }

  double cladding_index() const { return std::max(layers.front().index, layers.back().index); }

  double max_index() const {
    double n = 0.0;
    for (const auto& layer : layers) n = std::max(n, layer.index);
    return n;
  }

  std::span<const Layer> finite_layers() const {
    return std::span<const Layer>(layers).subspan(1, layers.size() - 2);
  }

  bool is_symmetric() const {
    const std::size_t n = layers.size();
    for (std::size_t i = 0; i < n / 2; ++i) {
      const auto& a = layers[i];
      const auto& b = layers[n - 1 - i];
      if (a.index != b.index) return false;
      if (i != 0 && a.thickness_nm != b.thickness_nm) return false;
    }
    return true;
  }
};

enum class Parity { even, odd, none };

inline const char* to_string(Parity p) {
  switch (p) {
    case Parity::even: return "even";
    case Parity::odd: return "odd";
    default: return "none";
  }
}

/// One analytic piece of a transverse field: inside [lo, hi] the field is
/// the exact solution of E'' = -k0^2 q E expanded about x_ref. Pieces with an
/// infinite end are the exponentially decaying cladding tails.
struct FieldPiece {
  double lo = -kInf;
  double hi = kInf;
  double x_ref = 0.0;
  double value = 0.0;  // E(x_ref)
  double slope = 0.0;  // dE/d(k0 x) at x_ref
  double q = 0.0;      // n_layer^2 - n_eff^2

  bool left_tail() const { return std::isinf(lo); }
  bool right_tail() const { return std::isinf(hi); }

  double value_at(double x, double k0) const {
    const double s = k0 * (x - x_ref);
    if (left_tail()) return value * std::exp(std::sqrt(-q) * s);
    if (right_tail()) return value * std::exp(-std::sqrt(-q) * s);
    if (q > 0.0) {
      const double p = std::sqrt(q);
      return value * std::cos(p * s) + slope * std::sin(p * s) / p;
    }
    if (q < 0.0) {
      const double p = std::sqrt(-q);
      return value * std::cosh(p * s) + slope * std::sinh(p * s) / p;
    }
    return value + slope * s;
  }

  double slope_at(double x, double k0) const {
    const double s = k0 * (x - x_ref);
    if (left_tail()) {
      const double p = std::sqrt(-q);
      return p * value * std::exp(p * s);
    }
    if (right_tail()) {
      const double p = std::sqrt(-q);
      return -p * value * std::exp(-p * s);
    }
    if (q > 0.0) {
      const double p = std::sqrt(q);
      return -value * p * std::sin(p * s) + slope * std::cos(p * s);
    }
    if (q < 0.0) {
      const double p = std::sqrt(-q);
      return value * p * std::sinh(p * s) + slope * std::cosh(p * s);
    }
    return slope;
  }
};

/// Piecewise-analytic transverse field, possibly a weighted sum of several
/// mode fields (e.g. a launched supermode superposition). Evaluation is exact
/// everywhere, so resampling onto any grid is free of interpolation error.
class ModeField {
 public:
  struct Component {
    double k0 = 0.0;
    double max_index = 1.0;
    double weight = 1.0;
    std::vector<FieldPiece> pieces;  // left tail, interior pieces..., right tail

    const FieldPiece& piece_at(double x) const {
      auto it = std::lower_bound(pieces.begin(), pieces.end() - 1, x,
                                 [](const FieldPiece& p, double v) { return p.hi < v; });
      return *it;
    }
    double operator()(double x) const { return piece_at(x).value_at(x, k0); }
    double derivative(double x) const { return k0 * piece_at(x).slope_at(x, k0); }
    std::vector<double> breakpoints() const {
      std::vector<double> out;
      for (std::size_t i = 0; i + 1 < pieces.size(); ++i) out.push_back(pieces[i].hi);
      return out;
    }
    double left_decay() const { return k0 * std::sqrt(-pieces.front().q); }   // 1/nm
    double right_decay() const { return k0 * std::sqrt(-pieces.back().q); }  // 1/nm
  };

  ModeField() = default;
  explicit ModeField(Component c) { components_.push_back(std::move(c)); }

  double operator()(double x) const {
    double e = 0.0;
    for (const auto& c : components_) e += c.weight * c(x);
    return e;
  }

  /// dE/dx in 1/nm units of the field amplitude.
  double derivative(double x) const {
    double d = 0.0;
    for (const auto& c : components_) d += c.weight * c.derivative(x);
    return d;
  }

  ModeField scaled(double factor) const {
    ModeField out = *this;
    for (auto& c : out.components_) c.weight *= factor;
    return out;
  }

  ModeField shifted(double dx_nm) const {
    ModeField out = *this;
    for (auto& c : out.components_) {
      for (auto& p : c.pieces) {
        p.lo += dx_nm;
        p.hi += dx_nm;
        p.x_ref += dx_nm;
      }
    }
    return out;
  }

  friend ModeField operator+(const ModeField& a, const ModeField& b) {
    ModeField out = a;
    out.components_.insert(out.components_.end(), b.components_.begin(), b.components_.end());
    return out;
  }

  const std::vector<Component>& components() const { return components_; }

  /// Largest discontinuity of E and of dE/dx across any piece boundary.
  std::pair<double, double> max_interface_jumps() const {
    double jump_e = 0.0;
    double jump_d = 0.0;
    for (const auto& c : components_) {
      for (std::size_t i = 0; i + 1 < c.pieces.size(); ++i) {
        const double b = c.pieces[i].hi;
        const auto& l = c.pieces[i];
        const auto& r = c.pieces[i + 1];
        jump_e = std::max(jump_e, std::abs(c.weight * (l.value_at(b, c.k0) - r.value_at(b, c.k0))));
        jump_d = std::max(jump_d, std::abs(c.weight * c.k0 *
                                           (l.slope_at(b, c.k0) - r.slope_at(b, c.k0))));
      }
    }
    return {jump_e, jump_d};
  }

 private:
  std::vector<Component> components_;
};

namespace detail {

/// Integral over the real line of the product of two field components.
/// Semi-infinite regions beyond every breakpoint are integrated in closed
/// form; finite segments use 8-point Gauss-Legendre on sub-intervals no
/// longer than lambda / (40 n_max).
inline double component_product_integral(const ModeField::Component& a,
                                         const ModeField::Component& b) {
  std::vector<double> cuts = a.breakpoints();
  const auto cuts_b = b.breakpoints();
  cuts.insert(cuts.end(), cuts_b.begin(), cuts_b.end());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const double pitch = std::min(2.0 * kPi / (a.k0 * 40.0 * a.max_index),
                                2.0 * kPi / (b.k0 * 40.0 * b.max_index));
  double total = a(cuts.front()) * b(cuts.front()) / (a.left_decay() + b.left_decay());
  total += a(cuts.back()) * b(cuts.back()) / (a.right_decay() + b.right_decay());

  using Gauss = boost::math::quadrature::gauss<double, 8>;
  auto integrand = [&](double x) { return a(x) * b(x); };
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double len = cuts[i + 1] - cuts[i];
    const auto n_sub = static_cast<std::size_t>(std::max(1.0, std::ceil(len / pitch)));
    const double h = len / static_cast<double>(n_sub);
    for (std::size_t k = 0; k < n_sub; ++k) {
      const double x0 = cuts[i] + h * static_cast<double>(k);
      total += Gauss::integrate(integrand, x0, x0 + h);
    }
  }
  return total;
}

struct SlabState {
  double value;
  double slope;
};

inline SlabState propagate(SlabState s, double q, double k0_thickness) {
  if (q > 0.0) {
    const double p = std::sqrt(q);
    const double c = std::cos(p * k0_thickness);
    const double sn = std::sin(p * k0_thickness);
    return {s.value * c + s.slope * sn / p, -s.value * p * sn + s.slope * c};
  }
  if (q < 0.0) {
    const double p = std::sqrt(-q);
    const double c = std::cosh(p * k0_thickness);
    const double sn = std::sinh(p * k0_thickness);
    return {s.value * c + s.slope * sn / p, s.value * p * sn + s.slope * c};
  }
  return {s.value + s.slope * k0_thickness, s.slope};
}

inline SlabState renormalized(SlabState s) {
  const double h = std::hypot(s.value, s.slope);
  return {s.value / h, s.slope / h};
}

/// Outgoing-boundary mismatch after launching `start` at the left edge of
/// `layers` (the first of which may be entered at a fraction of its thickness)
/// and requiring a decaying tail in a right cladding of index n_right.
/// Normalized so that |result| <= 1 + decay constant.
inline double outgoing_mismatch(SlabState start, std::span<const Layer> layers,
                                double first_fraction, double n_right, double n_eff, double k0) {
  SlabState s = renormalized(start);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const double d = layers[i].thickness_nm * (i == 0 ? first_fraction : 1.0);
    s = renormalized(propagate(s, layers[i].index * layers[i].index - n_eff * n_eff, k0 * d));
  }
  const double p = std::sqrt(n_eff * n_eff - n_right * n_right);
  return s.slope + p * s.value;
}

inline double left_to_right_residual(const StackSpec& stack, double n_eff) {
  const double n_left = stack.layers.front().index;
  const double p0 = std::sqrt(std::max(0.0, n_eff * n_eff - n_left * n_left));
  return outgoing_mismatch({1.0, p0}, stack.finite_layers(), 1.0, stack.layers.back().index, n_eff,
                           wavenumber(stack.wavelength_nm));
}

inline SlabState parity_start(Parity parity) {
  return parity == Parity::odd ? SlabState{0.0, 1.0} : SlabState{1.0, 0.0};
}

/// Same mismatch, launched from the symmetry plane of a palindromic stack with
/// an odd number of layers.
inline double center_out_residual(const StackSpec& stack, Parity parity, double n_eff) {
  const std::size_t center = stack.layers.size() / 2;
  auto outer = std::span<const Layer>(stack.layers).subspan(center, stack.layers.size() - 1 - center);
  return outgoing_mismatch(parity_start(parity), outer, 0.5, stack.layers.back().index, n_eff,
                           wavenumber(stack.wavelength_nm));
}

inline FieldPiece tail_piece(bool left, double x, double value, double q) {
  FieldPiece p;
  p.lo = left ? -kInf : x;
  p.hi = left ? x : kInf;
  p.x_ref = x;
  p.value = value;
  p.slope = (left ? 1.0 : -1.0) * std::sqrt(-q) * value;
  p.q = q;
  return p;
}

inline ModeField::Component left_to_right_field(const StackSpec& stack, double n_eff) {
  const double k0 = wavenumber(stack.wavelength_nm);
  const double n2 = n_eff * n_eff;
  ModeField::Component c{k0, stack.max_index(), 1.0, {}};
  const double q0 = stack.layers.front().index * stack.layers.front().index - n2;
  c.pieces.push_back(tail_piece(true, 0.0, 1.0, q0));
  SlabState s{1.0, std::sqrt(-q0)};
  double x = 0.0;
  for (const auto& layer : stack.finite_layers()) {
    const double q = layer.index * layer.index - n2;
    c.pieces.push_back({x, x + layer.thickness_nm, x, s.value, s.slope, q});
    s = propagate(s, q, k0 * layer.thickness_nm);
    x += layer.thickness_nm;
  }
  c.pieces.push_back(tail_piece(false, x, s.value, stack.layers.back().index * stack.layers.back().index - n2));
  return c;
}

inline ModeField::Component center_out_field(const StackSpec& stack, Parity parity, double n_eff) {
  const double k0 = wavenumber(stack.wavelength_nm);
  const double n2 = n_eff * n_eff;
  const std::size_t center = stack.layers.size() / 2;
  const double sign = parity == Parity::odd ? -1.0 : 1.0;

  std::vector<FieldPiece> right;
  const auto start = parity_start(parity);
  const Layer& mid = stack.layers[center];
  const double q_mid = mid.index * mid.index - n2;
  const FieldPiece middle{-0.5 * mid.thickness_nm, 0.5 * mid.thickness_nm, 0.0, start.value, start.slope, q_mid};
  SlabState s = propagate(start, q_mid, k0 * 0.5 * mid.thickness_nm);
  double x = 0.5 * mid.thickness_nm;
  for (std::size_t i = center + 1; i + 1 < stack.layers.size(); ++i) {
    const auto& layer = stack.layers[i];
    const double q = layer.index * layer.index - n2;
    right.push_back({x, x + layer.thickness_nm, x, s.value, s.slope, q});
    s = propagate(s, q, k0 * layer.thickness_nm);
    x += layer.thickness_nm;
  }
  right.push_back(tail_piece(false, x, s.value, stack.layers.back().index * stack.layers.back().index - n2));

  ModeField::Component c{k0, stack.max_index(), 1.0, {}};
  for (auto it = right.rbegin(); it != right.rend(); ++it) {
    FieldPiece m = *it;
    m.lo = -it->hi;
    m.hi = -it->lo;
    m.x_ref = -it->x_ref;
    m.value = sign * it->value;
    m.slope = -sign * it->slope;
    c.pieces.push_back(m);
  }
  c.pieces.push_back(middle);
  c.pieces.insert(c.pieces.end(), right.begin(), right.end());
  return c;
}

}  // namespace detail

/// Field profile sampled on a uniform grid (positions in nm).
struct SampledProfile {
  std::vector<double> position_nm;
  std::vector<double> amplitude;
};

struct ModeSolution {
  double n_eff = 0.0;
  double beta = 0.0;  // rad/nm
  double wavelength_nm = 0.0;
  Parity parity = Parity::none;
  double residual = 0.0;  // normalized dispersion mismatch at n_eff
  ModeField field;        // L2-normalized
  SampledProfile profile;

  double peak_amplitude() const {
    double peak = 0.0;
    for (double a : profile.amplitude) peak = std::max(peak, std::abs(a));
    return peak;
  }
};

/// Inner product of two fields over the whole real line.
inline double field_inner_product(const ModeField& a, const ModeField& b) {
  double total = 0.0;
  for (const auto& ca : a.components())
    for (const auto& cb : b.components())
      total += ca.weight * cb.weight * detail::component_product_integral(ca, cb);
  return total;
}

/// Power coupling between two fields: |<a,b>|^2 / (<a,a><b,b>), in [0, 1].
inline double mode_overlap(const ModeField& a, const ModeField& b) {
  const double ab = field_inner_product(a, b);
  const double aa = field_inner_product(a, a);
  const double bb = field_inner_product(b, b);
  if (!(aa > 0.0) || !(bb > 0.0)) throw std::invalid_argument("mode_overlap: zero field");
  return std::clamp(ab * ab / (aa * bb), 0.0, 1.0);
}

inline double mode_overlap(const ModeSolution& a, const ModeSolution& b) {
  return mode_overlap(a.field, b.field);
}

namespace detail {

/// Normalizes the component, fixes its sign and samples it over +-5 decay
/// lengths beyond the outermost interfaces.
inline ModeSolution finish_mode(ModeField::Component c, double n_eff, double wavelength_nm,
                                Parity parity, double residual,
                                std::optional<double> positive_at = std::nullopt) {
  const double norm2 = component_product_integral(c, c);
  c.weight = 1.0 / std::sqrt(norm2);

  const auto cuts = c.breakpoints();
  const double x_lo = cuts.front() - 5.0 / c.left_decay();
  const double x_hi = cuts.back() + 5.0 / c.right_decay();
  const double pitch = wavelength_nm / (40.0 * c.max_index);
  const auto intervals = static_cast<std::size_t>(std::ceil((x_hi - x_lo) / pitch));

  SampledProfile prof;
  prof.position_nm.reserve(intervals + 1);
  prof.amplitude.reserve(intervals + 1);
  for (std::size_t i = 0; i <= intervals; ++i) {
    const double x = x_lo + (x_hi - x_lo) * static_cast<double>(i) / static_cast<double>(intervals);
    prof.position_nm.push_back(x);
    prof.amplitude.push_back(c.weight * c(x));
  }

  double reference = 0.0;
  if (positive_at) {
    reference = c.weight * c(*positive_at);
  } else {
    for (double a : prof.amplitude)
      if (std::abs(a) > std::abs(reference)) reference = a;
  }
  if (reference < 0.0) {
    c.weight = -c.weight;
    for (auto& a : prof.amplitude) a = -a;
  }

  ModeSolution m;
  m.n_eff = n_eff;
  m.beta = wavenumber(wavelength_nm) * n_eff;
  m.wavelength_nm = wavelength_nm;
  m.parity = parity;
  m.residual = residual;
  m.field = ModeField(std::move(c));
  m.profile = std::move(prof);
  return m;
}

inline ModeSolution shifted(ModeSolution m, double dx_nm) {
  m.field = m.field.shifted(dx_nm);
  for (auto& x : m.profile.position_nm) x += dx_nm;
  return m;
}

}  // namespace detail

/// Normalized dispersion mismatch of a stack at a trial effective index. Its
/// zeros in (cladding index, max index) are exactly the guided TE modes.
inline double dispersion_residual(const StackSpec& stack, double n_eff) {
  return detail::left_to_right_residual(stack, n_eff);
}

/// Guided TE effective indices, highest first; at most `max_modes` of them.
inline std::vector<double> guided_indices(const StackSpec& stack,
                                          std::size_t max_modes = static_cast<std::size_t>(-1)) {
  stack.validate();
  const double lo = stack.cladding_index();
  const double hi = stack.max_index();
  if (!(hi > lo)) return {};
  return numerics::scan_index_roots([&](double n) { return dispersion_residual(stack, n); }, lo, hi,
                                    max_modes);
}

inline int count_guided_modes(const StackSpec& stack) {
  return static_cast<int>(guided_indices(stack).size());
}

/// The `mode_order`-th guided TE mode (0 = fundamental). Positions are measured
/// from the first interface. Returns nullopt when the stack guides fewer modes.
inline std::optional<ModeSolution> solve_slab_te(const StackSpec& stack, int mode_order = 0) {
  if (mode_order < 0) throw std::invalid_argument("mode_order must be non-negative");
  const auto roots = guided_indices(stack, static_cast<std::size_t>(mode_order) + 1);
  if (static_cast<std::size_t>(mode_order) >= roots.size()) return std::nullopt;
  const double n_eff = roots[static_cast<std::size_t>(mode_order)];
  const Parity parity =
      stack.is_symmetric() ? (mode_order % 2 == 0 ? Parity::even : Parity::odd) : Parity::none;
  return detail::finish_mode(detail::left_to_right_field(stack, n_eff), n_eff, stack.wavelength_nm,
                             parity, dispersion_residual(stack, n_eff));
}

/// Mode of given parity in a palindromic stack with a finite centre layer,
/// solved outward from the symmetry plane (x = 0). Even/odd pairs that are
/// numerically degenerate for the full stack stay separable here.
inline std::optional<ModeSolution> solve_symmetric_te(const StackSpec& stack, Parity parity,
                                                      int mode_order = 0,
                                                      std::optional<double> positive_at = std::nullopt) {
  stack.validate();
  if (parity == Parity::none) throw std::invalid_argument("solve_symmetric_te needs a parity");
  if (stack.layers.size() % 2 == 0 || !stack.is_symmetric())
    throw std::invalid_argument("solve_symmetric_te needs a palindromic stack with odd layer count");
  const double lo = stack.cladding_index();
  const double hi = stack.max_index();
  if (!(hi > lo)) return std::nullopt;
  auto residual = [&](double n) { return detail::center_out_residual(stack, parity, n); };
  if (mode_order < 0) return std::nullopt;
  const auto roots = numerics::scan_index_roots(residual, lo, hi, static_cast<std::size_t>(mode_order) + 1);
  if (static_cast<std::size_t>(mode_order) >= roots.size()) return std::nullopt;
  const double n_eff = roots[static_cast<std::size_t>(mode_order)];
  return detail::finish_mode(detail::center_out_field(stack, parity, n_eff), n_eff,
                             stack.wavelength_nm, parity, residual(n_eff), positive_at);
}

/// Cross-section of one air-clad ridge, or of two identical ridges separated
/// by `gap_nm` (infinite gap = isolated waveguide).
struct CouplerGeometry {
  static constexpr double kIsolatedGap = kInf;

  double width_nm = 280.0;
  double height_nm = 140.0;
  double gap_nm = kIsolatedGap;
  double n_core = 3.48;
  double n_clad = 1.0;
  double wavelength_nm = 927.0;
  double dn_core_dlambda = 0.0;  // 1/nm, linear index slope about wavelength_nm

  bool isolated() const { return std::isinf(gap_nm); }

  void validate() const {
    auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!positive(width_nm)) throw std::invalid_argument("width_nm must be positive");
    if (!positive(height_nm)) throw std::invalid_argument("height_nm must be positive");
    if (!(gap_nm > 0.0)) throw std::invalid_argument("gap_nm must be positive");
    if (!positive(wavelength_nm)) throw std::invalid_argument("wavelength_nm must be positive");
    if (!(n_clad >= 1.0) || !std::isfinite(n_clad)) throw std::invalid_argument("n_clad must be >= 1");
    if (!(n_core > n_clad) || !std::isfinite(n_core))
      throw std::invalid_argument("n_core must exceed n_clad");
    if (!std::isfinite(dn_core_dlambda)) throw std::invalid_argument("dn_core_dlambda must be finite");
  }

  /// Same cross-section at another wavelength; the core index follows the
  /// configured linear dispersion.
  CouplerGeometry at_wavelength(double lambda_nm) const {
    CouplerGeometry g = *this;
    g.n_core = n_core + dn_core_dlambda * (lambda_nm - wavelength_nm);
    g.wavelength_nm = lambda_nm;
    return g;
  }

  CouplerGeometry with_gap(double gap) const {
    CouplerGeometry g = *this;
    g.gap_nm = gap;
    return g;
  }
};

/// Effective index of the vertical (membrane) slab.
inline std::optional<double> vertical_effective_index(const CouplerGeometry& geom) {
  geom.validate();
  const auto stack = StackSpec::symmetric_slab(geom.n_core, geom.n_clad, geom.height_nm, geom.wavelength_nm);
  const auto roots = guided_indices(stack, 1);
  if (roots.empty()) return std::nullopt;
  return roots.front();
}

/// Fundamental mode of a single waveguide by the two-step effective-index
/// method. The gap is ignored; the profile is centred on x = 0.
inline std::optional<ModeSolution> effective_index_2d(const CouplerGeometry& geom) {
  const auto n_vertical = vertical_effective_index(geom);
  if (!n_vertical) return std::nullopt;
  const auto horizontal =
      StackSpec::symmetric_slab(*n_vertical, geom.n_clad, geom.width_nm, geom.wavelength_nm);
  auto mode = solve_slab_te(horizontal, 0);
  if (!mode) return std::nullopt;
  return detail::shifted(std::move(*mode), -0.5 * geom.width_nm);
}

struct SupermodePair {
  ModeSolution symmetric;
  ModeSolution antisymmetric;
  double delta_n = 0.0;  // n_sym - n_antisym
};

/// Horizontal five-layer cross-section of the coupling region, centred on the
/// middle of the gap.
inline StackSpec coupled_stack(const CouplerGeometry& geom, double n_vertical) {
  return {{{geom.n_clad, kInf},
           {n_vertical, geom.width_nm},
           {geom.n_clad, geom.gap_nm},
           {n_vertical, geom.width_nm},
           {geom.n_clad, kInf}},
          geom.wavelength_nm};
}

/// Even and odd fundamental supermodes of two identical waveguides. Both are
/// signed positive at the centre of the right-hand waveguide.
inline std::optional<SupermodePair> solve_supermodes(const CouplerGeometry& geom) {
  geom.validate();
  if (geom.isolated()) throw std::invalid_argument("solve_supermodes needs a finite gap");
  const auto n_vertical = vertical_effective_index(geom);
  if (!n_vertical) return std::nullopt;
  const auto stack = coupled_stack(geom, *n_vertical);
  const double right_center = 0.5 * geom.gap_nm + 0.5 * geom.width_nm;
  auto even = solve_symmetric_te(stack, Parity::even, 0, right_center);
  auto odd = solve_symmetric_te(stack, Parity::odd, 0, right_center);
  if (!even || !odd) return std::nullopt;
  const double dn = even->n_eff - odd->n_eff;
  return SupermodePair{std::move(*even), std::move(*odd), dn};
}

}  // namespace qdsplit
