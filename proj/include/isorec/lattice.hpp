#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "isorec/dataset.hpp"
#include "isorec/grid.hpp"

namespace isorec {

/// Grid resolution for the box partition: M = floor(n^{1/(dc+2)}),
/// h = 1/M, where dc counts continuous-or-trend dimensions. Computed via
/// integer power checks so exact cube/fourth roots are not lost to
/// floating-point rounding.
struct Bandwidth {
  std::size_t M;
  double h;
};

inline Bandwidth bandwidth(std::size_t n, std::size_t d_continuous) {
  if (n < 1) throw UserError("bandwidth requires n >= 1");
  if (d_continuous == 0) return {1, 1.0};
  const double e = 1.0 / static_cast<double>(d_continuous + 2);
  std::size_t m = static_cast<std::size_t>(std::pow(static_cast<double>(n), e));
  if (m < 1) m = 1;
  auto pow_le = [&](std::size_t base) {
    // true iff base^(dc+2) <= n, overflow-safe
    unsigned long long acc = 1;
    for (std::size_t i = 0; i < d_continuous + 2; ++i) {
      if (acc > n / std::max<unsigned long long>(base, 1) && base > 1) return false;
      acc *= base;
      if (acc > n) return false;
    }
    return acc <= n;
  };
  while (pow_le(m + 1)) ++m;
  while (m > 1 && !pow_le(m)) --m;
  return {m, 1.0 / static_cast<double>(m)};
}

/// Per-dimension box structure: quantile breakpoints for continuous dims
/// (plug-in for the unknown marginal rescaling), equispaced breakpoints
/// for a trend dim, and the observed level set for discrete dims.
struct LatticeSpec {
  std::vector<std::vector<double>> breaks;  // cont/trend: M+1 ascending values
  std::vector<DimKind> kinds;
  std::size_t M = 1;
  double h = 1.0;

  std::size_t dim() const { return breaks.size(); }

  std::size_t boxes_in_dim(std::size_t j) const {
    return kinds[j] == DimKind::Discrete ? breaks[j].size() : breaks[j].size() - 1;
  }

  std::size_t box_count() const {
    std::size_t c = 1;
    for (std::size_t j = 0; j < dim(); ++j) c *= boxes_in_dim(j);
    return c;
  }

  std::vector<std::size_t> box_strides() const {
    std::vector<std::size_t> st(dim(), 1);
    for (std::size_t j = dim(); j-- > 1;) st[j - 1] = st[j] * boxes_in_dim(j);
    return st;
  }

  /// Box index of a value along one dimension. Continuous/trend binning
  /// is left-open right-closed, with the leftmost bin absorbing its left
  /// endpoint and out-of-range values clamped to the edge bins.
  std::size_t bin(std::size_t j, double v) const {
    const auto& b = breaks[j];
    if (kinds[j] == DimKind::Discrete) {
      const auto it = std::lower_bound(b.begin(), b.end(), v);
      if (it == b.end()) return b.size() - 1;
      return static_cast<std::size_t>(it - b.begin());
    }
    // first breakpoint index k >= 1 with v <= b[k]
    const auto it = std::lower_bound(b.begin() + 1, b.end(), v);
    if (it == b.end()) return b.size() - 2;
    return static_cast<std::size_t>(it - b.begin()) - 1;
  }
};

/// Occupancy counts per box and the regularity-event check: every box
/// must hold at least c * n^{2/(dc+2)} observations.
struct OccupancyTable {
  std::vector<std::size_t> counts;
  double threshold = 0.0;
  bool passed = false;
};

struct InteriorMask {
  std::vector<char> mask;  // one flag per box, flattened per box_strides
  bool empty_interior = false;
};

namespace detail {

/// Lower-interpolation order statistic at level q in [0,1].
inline double quantile_lower(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw UserError("quantile of empty sample");
  if (q <= 0.0) return sorted.front();
  if (q >= 1.0) return sorted.back();
  const std::size_t n = sorted.size();
  std::size_t k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  if (k < 1) k = 1;
  if (k > n) k = n;
  return sorted[k - 1];
}

}  // namespace detail

inline LatticeSpec build_lattice(const Dataset& data) {
  data.validate();
  LatticeSpec spec;
  spec.kinds = data.kinds;
  const auto bw = bandwidth(data.n, data.continuous_dims());
  spec.M = bw.M;
  spec.h = bw.h;
  spec.breaks.resize(data.d);
  for (std::size_t j = 0; j < data.d; ++j) {
    if (data.kinds[j] == DimKind::Discrete) {
      std::set<double> levels;
      for (std::size_t i = 0; i < data.n; ++i) levels.insert(data.cov(i, j));
      spec.breaks[j].assign(levels.begin(), levels.end());
    } else if (data.kinds[j] == DimKind::Trend) {
      spec.breaks[j].resize(spec.M + 1);
      for (std::size_t k = 0; k <= spec.M; ++k)
        spec.breaks[j][k] = static_cast<double>(k) * spec.h;
      spec.breaks[j][spec.M] = 1.0;
    } else {
      std::vector<double> col(data.n);
      for (std::size_t i = 0; i < data.n; ++i) col[i] = data.cov(i, j);
      std::sort(col.begin(), col.end());
      std::size_t distinct = data.n == 0 ? 0 : 1;
      for (std::size_t i = 1; i < data.n; ++i)
        if (col[i] != col[i - 1]) ++distinct;
      if (distinct < spec.M + 1)
        throw DegenerateLatticeError(
            "dimension " + std::to_string(j + 1) + " has only " +
            std::to_string(distinct) + " distinct values, need " +
            std::to_string(spec.M + 1) + " breakpoints");
      spec.breaks[j].resize(spec.M + 1);
      for (std::size_t k = 0; k <= spec.M; ++k)
        spec.breaks[j][k] =
            detail::quantile_lower(col, static_cast<double>(k) * spec.h);
      for (std::size_t k = 1; k <= spec.M; ++k)
        if (!(spec.breaks[j][k] > spec.breaks[j][k - 1]))
          throw DegenerateLatticeError("quantile breakpoints tie in dimension " +
                                       std::to_string(j + 1) +
                                       "; sample too concentrated for M = " +
                                       std::to_string(spec.M));
    }
  }
  return spec;
}

inline OccupancyTable occupancy(const Dataset& data, const LatticeSpec& lattice,
                                double c) {
  if (c <= 0.0) throw UserError("occupancy constant must be positive");
  OccupancyTable table;
  table.counts.assign(lattice.box_count(), 0);
  const auto strides = lattice.box_strides();
  for (std::size_t i = 0; i < data.n; ++i) {
    std::size_t flat = 0;
    for (std::size_t j = 0; j < data.d; ++j)
      flat += strides[j] * lattice.bin(j, data.cov(i, j));
    ++table.counts[flat];
  }
  const double dc = static_cast<double>(data.continuous_dims());
  table.threshold =
      c * std::pow(static_cast<double>(data.n), 2.0 / (dc + 2.0));
  table.passed = true;
  for (auto cnt : table.counts)
    if (static_cast<double>(cnt) < table.threshold) {
      table.passed = false;
      break;
    }
  return table;
}

/// Mask selecting boxes with one boundary layer removed along every
/// continuous/trend dim; discrete dims keep all levels.
inline InteriorMask interior_domain(const LatticeSpec& lattice) {
  InteriorMask out;
  out.mask.assign(lattice.box_count(), 0);
  bool any_continuous = false;
  for (auto k : lattice.kinds)
    if (k != DimKind::Discrete) any_continuous = true;
  if (any_continuous && lattice.M < 3) {
    out.empty_interior = true;
    return out;
  }
  const std::size_t total = lattice.box_count();
  const auto strides = lattice.box_strides();
  for (std::size_t flat = 0; flat < total; ++flat) {
    bool interior = true;
    std::size_t rem = flat;
    for (std::size_t j = 0; j < lattice.dim(); ++j) {
      const std::size_t idx = rem / strides[j];
      rem %= strides[j];
      if (lattice.kinds[j] == DimKind::Discrete) continue;
      // boxes are 1-based k = idx+1; interior needs 1 < k < M
      if (idx == 0 || idx + 1 == lattice.boxes_in_dim(j)) {
        interior = false;
        break;
      }
    }
    if (interior) out.mask[flat] = 1;
  }
  return out;
}

/// Largest axis-aligned sub-grid on which every retained grid point has
/// at least one observation weakly below it and one weakly above it
/// (componentwise). Ties resolved by retained-point count, then by the
/// lexicographically smallest lower corner, then upper corner.
inline QueryGrid trim_to_data(const QueryGrid& grid, const Dataset& data) {
  const std::size_t d = grid.dim();
  if (d != data.d) throw UserError("grid/data dimension mismatch");
  if (data.n == 0 || grid.size() == 0) throw EmptyGridError("no data or empty grid");

  // feasible lower corners: a grid point with some observation weakly below
  auto below_ok = [&](const std::vector<std::size_t>& idx) {
    for (std::size_t i = 0; i < data.n; ++i) {
      bool ok = true;
      for (std::size_t j = 0; j < d; ++j)
        if (data.cov(i, j) > grid.axes[j][idx[j]]) {
          ok = false;
          break;
        }
      if (ok) return true;
    }
    return false;
  };
  auto above_ok = [&](const std::vector<std::size_t>& idx) {
    for (std::size_t i = 0; i < data.n; ++i) {
      bool ok = true;
      for (std::size_t j = 0; j < d; ++j)
        if (data.cov(i, j) < grid.axes[j][idx[j]]) {
          ok = false;
          break;
        }
      if (ok) return true;
    }
    return false;
  };

  std::vector<std::vector<std::size_t>> lo_corners, hi_corners;
  const std::size_t total = grid.size();
  for (std::size_t flat = 0; flat < total; ++flat) {
    const auto idx = grid.unflatten(flat);
    if (below_ok(idx)) lo_corners.push_back(idx);
    if (above_ok(idx)) hi_corners.push_back(idx);
  }
  if (lo_corners.empty() || hi_corners.empty())
    throw EmptyGridError("no grid point is estimable from the data");

  std::size_t best_count = 0;
  std::vector<std::size_t> best_lo, best_hi;
  for (const auto& lo : lo_corners) {
    for (const auto& hi : hi_corners) {
      std::size_t count = 1;
      bool valid = true;
      for (std::size_t j = 0; j < d; ++j) {
        if (hi[j] < lo[j]) {
          valid = false;
          break;
        }
        count *= hi[j] - lo[j] + 1;
      }
      if (!valid) continue;
      const bool better =
          count > best_count ||
          (count == best_count && (lo < best_lo || (lo == best_lo && hi < best_hi)));
      if (better) {
        best_count = count;
        best_lo = lo;
        best_hi = hi;
      }
    }
  }
  if (best_count == 0) throw EmptyGridError("no feasible sub-grid exists");

  QueryGrid out;
  out.axes.resize(d);
  for (std::size_t j = 0; j < d; ++j)
    out.axes[j].assign(grid.axes[j].begin() + static_cast<std::ptrdiff_t>(best_lo[j]),
                       grid.axes[j].begin() + static_cast<std::ptrdiff_t>(best_hi[j] + 1));
  return out;
}

}  // namespace isorec
