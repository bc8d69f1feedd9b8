#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "isorec/dataset.hpp"
#include "isorec/estimator.hpp"
#include "isorec/grid.hpp"

namespace isorec {

struct PavaBlock {
  std::size_t begin, end;  // half-open index range
  double mean, weight;
};

struct PavaFit {
  std::vector<double> fitted;
  std::vector<PavaBlock> blocks;
};

/// Weighted pool-adjacent-violators: the unique weighted L2 projection of
/// y onto the nondecreasing cone. Input must be pre-sorted by covariate
/// with ties already merged.
inline PavaFit pava(std::span<const double> y, std::span<const double> w) {
  if (y.size() != w.size() || y.empty())
    throw UserError("pava needs equally sized nonempty y and w");
  for (double wi : w)
    if (!(wi > 0.0)) throw UserError("pava weights must be positive");

  PavaFit fit;
  auto& blocks = fit.blocks;
  for (std::size_t i = 0; i < y.size(); ++i) {
    blocks.push_back({i, i + 1, y[i], w[i]});
    while (blocks.size() >= 2 &&
           blocks[blocks.size() - 2].mean >= blocks.back().mean) {
      const PavaBlock b = blocks.back();
      blocks.pop_back();
      PavaBlock& a = blocks.back();
      a.mean = (a.mean * a.weight + b.mean * b.weight) / (a.weight + b.weight);
      a.weight += b.weight;
      a.end = b.end;
    }
  }
  fit.fitted.resize(y.size());
  for (const auto& b : blocks)
    for (std::size_t i = b.begin; i < b.end; ++i) fit.fitted[i] = b.mean;
  return fit;
}

/// Sorts a 1-D dataset by covariate and merges duplicate covariate values
/// (responses averaged, weights summed) so pava() preconditions hold.
struct Sorted1d {
  std::vector<double> x, y, w;
};

inline Sorted1d sort_merge_1d(const Dataset& data) {
  if (data.d != 1) throw UserError("sort_merge_1d requires d = 1");
  std::vector<std::size_t> order(data.n);
  for (std::size_t i = 0; i < data.n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return data.cov(a, 0) < data.cov(b, 0);
  });
  Sorted1d out;
  for (std::size_t i : order) {
    const double xi = data.cov(i, 0);
    if (!out.x.empty() && out.x.back() == xi) {
      out.y.back() = (out.y.back() * out.w.back() + data.y[i]) / (out.w.back() + 1.0);
      out.w.back() += 1.0;
    } else {
      out.x.push_back(xi);
      out.y.push_back(data.y[i]);
      out.w.push_back(1.0);
    }
  }
  return out;
}

/// Multivariate isotonic least squares comparator via Dykstra's
/// alternating projections onto the per-axis chain cones. Exact LSE on a
/// complete grid; the intersection-cone projection in general.
struct DykstraFit {
  std::vector<double> fitted;                    // per observation
  std::vector<std::vector<double>> cell_coords;  // distinct (snapped) sites
  std::vector<double> cell_values;
  std::vector<double> cell_weights;
  std::size_t iterations = 0;
  double residual_gap = 0.0;
};

namespace detail {

inline double snap_coord(const std::vector<double>& axis, double v) {
  const auto it = std::lower_bound(axis.begin(), axis.end(), v);
  if (it == axis.begin()) return axis.front();
  if (it == axis.end()) return axis.back();
  const double hi = *it, lo = *(it - 1);
  return (v - lo) <= (hi - v) ? lo : hi;
}

}  // namespace detail

inline DykstraFit dykstra_isotonic(const Dataset& data, double tol = 1e-8,
                                   std::size_t max_iter = 10000,
                                   const QueryGrid* snap_grid = nullptr) {
  if (data.d < 2) throw UserError("dykstra_isotonic requires d >= 2");
  if (!(tol > 0.0)) throw UserError("tolerance must be positive");

  // group observations into cells (exact sites, or grid-snapped sites)
  std::map<std::vector<double>, std::pair<double, double>> agg;  // coords -> (sum, count)
  std::vector<std::vector<double>> obs_cell(data.n);
  for (std::size_t i = 0; i < data.n; ++i) {
    std::vector<double> key(data.d);
    for (std::size_t j = 0; j < data.d; ++j) {
      const double v = data.cov(i, j);
      key[j] = snap_grid ? detail::snap_coord(snap_grid->axes[j], v) : v;
    }
    auto& slot = agg[key];
    slot.first += data.y[i];
    slot.second += 1.0;
    obs_cell[i] = key;
  }

  DykstraFit fit;
  std::map<std::vector<double>, std::size_t> cell_index;
  std::vector<double> target;
  for (const auto& [key, sc] : agg) {
    cell_index[key] = fit.cell_coords.size();
    fit.cell_coords.push_back(key);
    target.push_back(sc.first / sc.second);
    fit.cell_weights.push_back(sc.second);
  }
  const std::size_t m = fit.cell_coords.size();

  // axis chains: cells sharing all coordinates except the axis one,
  // ordered along the axis
  std::vector<std::vector<std::vector<std::size_t>>> chains(data.d);
  for (std::size_t axis = 0; axis < data.d; ++axis) {
    std::map<std::vector<double>, std::vector<std::size_t>> groups;
    for (std::size_t c = 0; c < m; ++c) {
      std::vector<double> rest;
      for (std::size_t j = 0; j < data.d; ++j)
        if (j != axis) rest.push_back(fit.cell_coords[c][j]);
      groups[rest].push_back(c);
    }
    for (auto& [rest, members] : groups) {
      std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
        return fit.cell_coords[a][axis] < fit.cell_coords[b][axis];
      });
      if (members.size() >= 2) chains[axis].push_back(std::move(members));
    }
  }

  auto gap = [&](const std::vector<double>& v) {
    double g = 0.0;
    for (const auto& axis_chains : chains)
      for (const auto& chain : axis_chains)
        for (std::size_t i = 0; i + 1 < chain.size(); ++i)
          g = std::max(g, v[chain[i]] - v[chain[i + 1]]);
    return g;
  };

  std::vector<double> v = target;
  std::vector<std::vector<double>> corrections(data.d, std::vector<double>(m, 0.0));
  std::vector<double> z(m), cy, cw, v_prev(m);
  fit.residual_gap = gap(v);
  // stop only when the iterate is both feasible and stationary; a sweep
  // can land on a feasible point that is not yet the projection
  double delta = std::numeric_limits<double>::infinity();
  while ((fit.residual_gap > tol || delta > tol) && fit.iterations < max_iter) {
    v_prev = v;
    for (std::size_t axis = 0; axis < data.d; ++axis) {
      auto& corr = corrections[axis];
      for (std::size_t c = 0; c < m; ++c) z[c] = v[c] + corr[c];
      // chains touch disjoint cells within one axis pass
      for (const auto& chain : chains[axis]) {
        cy.clear();
        cw.clear();
        for (auto c : chain) {
          cy.push_back(z[c]);
          cw.push_back(fit.cell_weights[c]);
        }
        const auto proj = pava(cy, cw);
        for (std::size_t i = 0; i < chain.size(); ++i) z[chain[i]] = proj.fitted[i];
      }
      for (std::size_t c = 0; c < m; ++c) {
        corr[c] = v[c] + corr[c] - z[c];
        v[c] = z[c];
      }
    }
    ++fit.iterations;
    fit.residual_gap = gap(v);
    delta = 0.0;
    for (std::size_t c = 0; c < m; ++c)
      delta = std::max(delta, std::abs(v[c] - v_prev[c]));
  }
  if (fit.residual_gap > tol || delta > tol)
    throw ConvergenceError("dykstra_isotonic did not reach tolerance; gap = " +
                           std::to_string(fit.residual_gap));

  fit.cell_values = v;
  fit.fitted.resize(data.n);
  for (std::size_t i = 0; i < data.n; ++i)
    fit.fitted[i] = v[cell_index[obs_cell[i]]];
  return fit;
}

/// Extends a Dykstra fit to a full grid as the midpoint of its monotone
/// lower and upper envelopes; each envelope is isotonic in the query
/// point by construction.
inline IsotonicFit baseline_surface(const DykstraFit& fit, const QueryGrid& grid) {
  const std::size_t total = grid.size();
  const std::size_t d = grid.dim();
  IsotonicFit out;
  out.grid = grid;
  out.lower.assign(total, 0.0);
  out.upper.assign(total, 0.0);
  out.mid.assign(total, 0.0);
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < total; ++g) {
    const auto p = grid.point(g);
    double lo = -inf, hi = inf;
    for (std::size_t c = 0; c < fit.cell_coords.size(); ++c) {
      const auto& cc = fit.cell_coords[c];
      bool below = true, above = true;
      for (std::size_t j = 0; j < d; ++j) {
        if (cc[j] > p[j]) below = false;
        if (cc[j] < p[j]) above = false;
      }
      if (below) lo = std::max(lo, fit.cell_values[c]);
      if (above) hi = std::min(hi, fit.cell_values[c]);
    }
    if (lo == -inf && hi == inf)
      throw NotEstimableError("grid point has no comparable fitted cell");
    if (lo == -inf) lo = hi;
    if (hi == inf) hi = lo;
    if (lo > hi) std::swap(lo, hi);  // cross-chain slack on incomplete designs
    out.lower[g] = lo;
    out.upper[g] = hi;
    out.mid[g] = 0.5 * (lo + hi);
  }
  return out;
}

}  // namespace isorec
