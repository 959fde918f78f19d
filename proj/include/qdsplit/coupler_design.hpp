#pragma once

// Coupled-mode design of a two-waveguide directional coupler: 50:50 length,
// power split vs interaction length, design maps and launch mismatch loss.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qdsplit/numerics.hpp"
#include "qdsplit/waveguide_modes.hpp"

namespace qdsplit {

/// Interaction length (um) for 50:50 transfer,
/// lambda0 * asin(sqrt(0.5)) / (pi * delta_n) = lambda0 / (4 delta_n).
inline double l5050_um(double wavelength_nm, double delta_n) {
  if (!(delta_n > 0.0)) throw std::invalid_argument("l5050 needs delta_n > 0");
  if (!(wavelength_nm > 0.0)) throw std::invalid_argument("l5050 needs a positive wavelength");
  return wavelength_nm / (4.0 * delta_n) * 1e-3;
}

/// Interaction length (um) at which the lossless cross-port fraction equals
/// `p_cross`. Branch 0 is the first rise from 0 to 1, branch 1 the following
/// fall, and so on.
inline double length_for_cross_fraction(double wavelength_nm, double delta_n, double p_cross,
                                        int branch = 0) {
  if (!(delta_n > 0.0)) throw std::invalid_argument("delta_n must be positive");
  if (!(p_cross >= 0.0 && p_cross <= 1.0)) throw std::invalid_argument("p_cross must be in [0, 1]");
  if (branch < 0) throw std::invalid_argument("branch must be non-negative");
  const double base = std::asin(std::sqrt(p_cross));
  const double half_turns = kPi * static_cast<double>(branch / 2);
  const double phase = branch % 2 == 0 ? base + half_turns : kPi - base + half_turns;
  return phase * wavelength_nm / (kPi * delta_n) * 1e-3;
}

struct CouplerDesign {
  static constexpr double kNegligibleBendRadiusUm = 2.0;

  CouplerGeometry geometry;
  double interaction_length_um = 0.0;
  double bend_radius_um = 2.0;
  double per_bend_loss = 0.01;
  double mismatch_loss = 0.0;  // launch loss into the coupling region, fraction

  /// Throws on hard violations; returns advisory warnings.
  std::vector<std::string> validate() const {
    geometry.validate();
    if (!(interaction_length_um >= 0.0)) throw std::invalid_argument("interaction_length_um must be >= 0");
    if (!(bend_radius_um > 0.0)) throw std::invalid_argument("bend_radius_um must be positive");
    if (!(per_bend_loss >= 0.0 && per_bend_loss < 0.05))
      throw std::invalid_argument("per_bend_loss must be in [0, 0.05)");
    if (!(mismatch_loss >= 0.0 && mismatch_loss < 1.0))
      throw std::invalid_argument("mismatch_loss must be in [0, 1)");
    std::vector<std::string> warnings;
    if (bend_radius_um < kNegligibleBendRadiusUm)
      warnings.push_back("bend radius below 2 um: bend loss is no longer negligible, per_bend_loss may be optimistic");
    if (2.0 * per_bend_loss + mismatch_loss >= 1.0)
      warnings.push_back("configured losses consume all power");
    return warnings;
  }
};

struct SplitResult {
  double p_bar = 1.0;
  double p_cross = 0.0;
  double loss = 0.0;
};

/// Coupled-mode power split after the interaction length, with the fixed
/// losses (mismatch + two bends) taken off both ports.
inline SplitResult power_transfer(const CouplerDesign& design, double delta_n) {
  design.validate();
  if (!(delta_n >= 0.0)) throw std::invalid_argument("delta_n must be >= 0");
  const double phase = kPi * delta_n * design.interaction_length_um * 1e3 / design.geometry.wavelength_nm;
  const double s = std::sin(phase);
  const double cross = s * s;
  const double fixed_loss = std::min(1.0, design.mismatch_loss + 2.0 * design.per_bend_loss);
  const double kept = 1.0 - fixed_loss;
  SplitResult r;
  r.p_cross = cross * kept;
  r.p_bar = (1.0 - cross) * kept;
  r.loss = 1.0 - r.p_cross - r.p_bar;
  return r;
}

struct MapCell {
  double wavelength_nm = 0.0;
  double gap_nm = 0.0;
  std::optional<double> delta_n;
  std::optional<double> l5050_um;

  bool valid() const { return l5050_um.has_value(); }
};

namespace detail {

inline void check_sweep(const CouplerGeometry& base, std::span<const double> wavelengths,
                        std::span<const double> gaps) {
  if (wavelengths.empty() || gaps.empty()) throw std::invalid_argument("sweep grids must be non-empty");
  base.validate();
  for (double w : wavelengths) base.at_wavelength(w).validate();
  for (double g : gaps)
    if (!(g > 0.0) || std::isinf(g)) throw std::invalid_argument("sweep gaps must be positive and finite");
}

template <class Cell, class Fill>
std::vector<Cell> sweep_grid(std::span<const double> wavelengths, std::span<const double> gaps, Fill fill) {
  // rows sorted by (gap, wavelength)
  std::vector<double> sorted_w(wavelengths.begin(), wavelengths.end());
  std::vector<double> sorted_g(gaps.begin(), gaps.end());
  std::sort(sorted_w.begin(), sorted_w.end());
  std::sort(sorted_g.begin(), sorted_g.end());
  std::vector<Cell> cells(sorted_w.size() * sorted_g.size());
  numerics::parallel_for(cells.size(), [&](std::size_t i) {
    Cell& cell = cells[i];
    cell.gap_nm = sorted_g[i / sorted_w.size()];
    cell.wavelength_nm = sorted_w[i % sorted_w.size()];
    fill(cell);
  });
  return cells;
}

}  // namespace detail

/// L_50:50 over a (wavelength x gap) grid. Cells where the pair of supermodes
/// is not guided (or delta_n is not positive) are left invalid.
inline std::vector<MapCell> sweep_l5050_map(const CouplerGeometry& base, std::span<const double> wavelengths,
                                            std::span<const double> gaps) {
  detail::check_sweep(base, wavelengths, gaps);
  return detail::sweep_grid<MapCell>(wavelengths, gaps, [&](MapCell& cell) {
    const auto geom = base.at_wavelength(cell.wavelength_nm).with_gap(cell.gap_nm);
    const auto pair = solve_supermodes(geom);
    if (!pair || !(pair->delta_n > 0.0)) return;
    cell.delta_n = pair->delta_n;
    cell.l5050_um = l5050_um(cell.wavelength_nm, pair->delta_n);
  });
}

inline std::vector<MapCell> sweep_l5050_map(double width_nm, double height_nm,
                                            std::span<const double> wavelengths,
                                            std::span<const double> gaps) {
  CouplerGeometry base;
  base.width_nm = width_nm;
  base.height_nm = height_nm;
  if (!wavelengths.empty()) base.wavelength_nm = wavelengths.front();
  return sweep_l5050_map(base, wavelengths, gaps);
}

struct MismatchBreakdown {
  double overlap = 1.0;               // power overlap of input mode and launched superposition
  double fresnel_transmission = 1.0;  // 1 - r^2 from the propagation-constant step
  double loss = 0.0;
};

/// Launch loss from an isolated input waveguide into the coupling region. The
/// input is the right-hand waveguide; it launches (even + odd)/sqrt(2).
inline std::optional<MismatchBreakdown> mismatch_breakdown(const CouplerGeometry& geom) {
  if (geom.isolated()) throw std::invalid_argument("mismatch_loss needs a finite gap");
  const auto isolated = effective_index_2d(geom);
  const auto pair = solve_supermodes(geom);
  if (!isolated || !pair) return std::nullopt;

  const ModeField input = isolated->field.shifted(0.5 * geom.gap_nm + 0.5 * geom.width_nm);
  const ModeField launched = (pair->symmetric.field + pair->antisymmetric.field).scaled(1.0 / std::sqrt(2.0));

  MismatchBreakdown b;
  b.overlap = mode_overlap(input, launched);
  const double r = (isolated->beta - pair->symmetric.beta) / (isolated->beta + pair->symmetric.beta);
  b.fresnel_transmission = 1.0 - r * r;
  b.loss = std::clamp(1.0 - b.overlap * b.fresnel_transmission, 0.0, 1.0);
  return b;
}

inline std::optional<double> mismatch_loss(const CouplerGeometry& geom) {
  const auto b = mismatch_breakdown(geom);
  if (!b) return std::nullopt;
  return b->loss;
}

struct LossCell {
  double wavelength_nm = 0.0;
  double gap_nm = 0.0;
  std::optional<double> loss;

  bool valid() const { return loss.has_value(); }
};

inline std::vector<LossCell> sweep_loss_map(const CouplerGeometry& base, std::span<const double> wavelengths,
                                            std::span<const double> gaps) {
  detail::check_sweep(base, wavelengths, gaps);
  return detail::sweep_grid<LossCell>(wavelengths, gaps, [&](LossCell& cell) {
    cell.loss = mismatch_loss(base.at_wavelength(cell.wavelength_nm).with_gap(cell.gap_nm));
  });
}

/// Design with its mismatch loss filled in from the geometry.
inline CouplerDesign with_computed_mismatch(CouplerDesign design) {
  if (const auto loss = mismatch_loss(design.geometry)) design.mismatch_loss = *loss;
  return design;
}

}  // namespace qdsplit
