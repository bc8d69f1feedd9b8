#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "isorec/dataset.hpp"
#include "isorec/grid.hpp"
#include "isorec/rect_average.hpp"

namespace isorec {

/// Lower/upper/midpoint surfaces on a rectangular query grid. The
/// midpoint is the canonical estimate; lower and upper bracket it and
/// all three are isotonic by construction (verified before return).
struct IsotonicFit {
  QueryGrid grid;
  std::vector<double> lower, upper, mid;
};

namespace detail {

struct HullPoint {
  double c, s;
};

inline double cross(const HullPoint& o, const HullPoint& a, const HullPoint& b) {
  return (a.c - o.c) * (b.s - o.s) - (a.s - o.s) * (b.c - o.c);
}

/// Lower convex hull of points already sorted by c (duplicates in c carry
/// identical s and are collapsed).
inline void lower_hull(const std::vector<HullPoint>& pts, std::vector<HullPoint>& hull) {
  hull.clear();
  for (const auto& p : pts) {
    if (!hull.empty() && p.c == hull.back().c) continue;
    while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), p) <= 0.0)
      hull.pop_back();
    hull.push_back(p);
  }
}

inline double slope(const HullPoint& a, const HullPoint& b) {
  return (b.s - a.s) / (b.c - a.c);
}

/// Minimum slope from a left point to hull vertices with c > a.c.
/// Rectangle means are slopes between prefix points, so this is the
/// exact inner minimum over upper corners. Returns NaN when no vertex
/// lies strictly to the right (all candidate rectangles empty).
inline double min_slope_from_left(const HullPoint& a, const std::vector<HullPoint>& hull) {
  std::size_t lo = static_cast<std::size_t>(
      std::upper_bound(hull.begin(), hull.end(), a.c,
                       [](double v, const HullPoint& p) { return v < p.c; }) -
      hull.begin());
  if (lo >= hull.size()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t hi = hull.size() - 1;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (slope(a, hull[mid + 1]) >= slope(a, hull[mid]))
      hi = mid;
    else
      lo = mid + 1;
  }
  return slope(a, hull[lo]);
}

/// Maximum slope from a right point to hull vertices with c < b.c.
inline double max_slope_from_right(const HullPoint& b, const std::vector<HullPoint>& hull) {
  std::size_t end = static_cast<std::size_t>(
      std::lower_bound(hull.begin(), hull.end(), b.c,
                       [](const HullPoint& p, double v) { return p.c < v; }) -
      hull.begin());
  if (end == 0) return std::numeric_limits<double>::quiet_NaN();
  std::size_t lo = 0, hi = end - 1;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (slope(hull[mid], b) <= slope(hull[mid + 1], b))
      lo = mid + 1;
    else
      hi = mid;
  }
  return slope(hull[lo], b);
}

/// Candidate corner classes along one dimension for a query coordinate.
/// A class is the index range of included observed coordinates: lower
/// classes are the smallest included index, upper classes the largest.
struct DimClasses {
  std::vector<std::size_t> lower;  // alpha values
  std::vector<std::size_t> upper;  // beta values
};

inline DimClasses corner_classes(const std::vector<double>& coords, double x) {
  DimClasses cl;
  const std::size_t n = coords.size();
  const std::size_t s = static_cast<std::size_t>(
      std::lower_bound(coords.begin(), coords.end(), x) - coords.begin());
  const std::size_t t = static_cast<std::size_t>(
      std::upper_bound(coords.begin(), coords.end(), x) - coords.begin());
  for (std::size_t a = 0; a < t; ++a) cl.lower.push_back(a);
  if (s == t && t < n) cl.lower.push_back(t);  // lower edge strictly above all coords <= x
  if (s == t && s >= 1) cl.upper.push_back(s - 1);  // upper edge strictly below all coords >= x
  for (std::size_t b = s; b < n; ++b) cl.upper.push_back(b);
  return cl;
}

struct QueryWorkspace {
  std::vector<double> slab_count, slab_sum;
  std::vector<double> val_count, val_sum;
  std::vector<HullPoint> pts, hull;
  std::vector<double> agg;
};

/// Odometer over the Cartesian product of per-dim class lists.
class ClassOdometer {
 public:
  explicit ClassOdometer(const std::vector<const std::vector<std::size_t>*>& lists)
      : lists_(lists), pos_(lists.size(), 0) {
    for (const auto* l : lists_)
      if (l->empty()) done_ = true;
  }
  bool done() const { return done_; }
  std::size_t value(std::size_t j) const { return (*lists_[j])[pos_[j]]; }
  void advance() {
    for (std::size_t j = lists_.size(); j-- > 0;) {
      if (++pos_[j] < lists_[j]->size()) return;
      pos_[j] = 0;
    }
    done_ = true;
  }

 private:
  std::vector<const std::vector<std::size_t>*> lists_;
  std::vector<std::size_t> pos_;
  bool done_ = false;
};

enum class Side { Lower, Upper };

/// Shared min-max engine. The dimension with the most distinct
/// coordinates is handled by a convex-hull tangent search over prefix
/// points; the remaining dimensions are enumerated class by class.
///
/// Empty-rectangle convention: a lower corner a competes in the outer
/// max only when [a, x] contains an observation (dually [x, b] for upper
/// corners). Equivalently an empty rectangle counts as -inf inside the
/// min (+inf inside the max), which is the reading under which the
/// sandwich inequality holds everywhere; every surviving [a, b] is then
/// automatically nonempty because it contains [a, x].
inline double minmax_estimate(const RectAverager& ra, std::span<const double> x,
                              Side side, QueryWorkspace& ws) {
  const std::size_t d = ra.dim();
  if (x.size() != d) throw UserError("query point dimension mismatch");

  std::vector<DimClasses> classes(d);
  for (std::size_t j = 0; j < d; ++j) classes[j] = corner_classes(ra.coords(j), x[j]);

  std::size_t axis = 0;
  for (std::size_t j = 1; j < d; ++j)
    if (ra.coords(j).size() > ra.coords(axis).size()) axis = j;

  std::vector<std::size_t> outer;
  for (std::size_t j = 0; j < d; ++j)
    if (j != axis) outer.push_back(j);

  std::vector<const std::vector<std::size_t>*> a_lists, b_lists;
  for (auto j : outer) {
    a_lists.push_back(&classes[j].lower);
    b_lists.push_back(&classes[j].upper);
  }
  const auto& axis_lower = classes[axis].lower;
  const auto& axis_upper = classes[axis].upper;
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> s_idx(d), t_idx(d);
  for (std::size_t j = 0; j < d; ++j) {
    const auto& c = ra.coords(j);
    s_idx[j] = static_cast<std::size_t>(
        std::lower_bound(c.begin(), c.end(), x[j]) - c.begin());
    t_idx[j] = static_cast<std::size_t>(
        std::upper_bound(c.begin(), c.end(), x[j]) - c.begin());
  }

  std::vector<std::size_t> lo_idx(d), hi_idx(d);
  auto set_outer = [&](const ClassOdometer& a_odo, const ClassOdometer& b_odo) {
    // returns false when some outer dim range is empty
    for (std::size_t t = 0; t < outer.size(); ++t) {
      const std::size_t j = outer[t];
      const std::size_t alpha = a_odo.value(t);
      const std::size_t beta = b_odo.value(t);
      if (beta < alpha) return false;
      lo_idx[j] = alpha;
      hi_idx[j] = beta + 1;
    }
    return true;
  };

  double result = side == Side::Lower ? -inf : inf;
  bool any = false;

  if (side == Side::Lower) {
    // max over admissible a of min over b
    for (ClassOdometer a_odo(a_lists); !a_odo.done(); a_odo.advance()) {
      // admissibility prefixes for [a, x]: outer ranges [alpha_j, t_j)
      bool possible = true;
      for (std::size_t u = 0; u < outer.size(); ++u) {
        const std::size_t j = outer[u];
        const std::size_t alpha = a_odo.value(u);
        if (alpha >= t_idx[j]) {
          possible = false;
          break;
        }
        lo_idx[j] = alpha;
        hi_idx[j] = t_idx[j];
      }
      if (!possible) continue;
      ra.slab_prefix(axis, lo_idx, hi_idx, ws.val_count, ws.val_sum);

      ws.agg.assign(axis_lower.size(), inf);
      for (ClassOdometer b_odo(b_lists); !b_odo.done(); b_odo.advance()) {
        if (!set_outer(a_odo, b_odo)) continue;
        ra.slab_prefix(axis, lo_idx, hi_idx, ws.slab_count, ws.slab_sum);
        ws.pts.clear();
        for (auto beta : axis_upper)
          ws.pts.push_back({ws.slab_count[beta + 1], ws.slab_sum[beta + 1]});
        lower_hull(ws.pts, ws.hull);
        if (ws.hull.empty()) continue;
        for (std::size_t i = 0; i < axis_lower.size(); ++i) {
          const HullPoint a{ws.slab_count[axis_lower[i]], ws.slab_sum[axis_lower[i]]};
          const double v = min_slope_from_left(a, ws.hull);
          if (!std::isnan(v) && v < ws.agg[i]) ws.agg[i] = v;
        }
      }
      for (std::size_t i = 0; i < axis_lower.size(); ++i) {
        const std::size_t alpha = axis_lower[i];
        if (ws.val_count[t_idx[axis]] - ws.val_count[alpha] < 0.5) continue;
        const double v = ws.agg[i];
        if (v < inf) {
          any = true;
          if (v > result) result = v;
        }
      }
    }
  } else {
    // min over admissible b of max over a
    for (ClassOdometer b_odo(b_lists); !b_odo.done(); b_odo.advance()) {
      // admissibility prefixes for [x, b]: outer ranges [s_j, beta_j + 1)
      bool possible = true;
      for (std::size_t u = 0; u < outer.size(); ++u) {
        const std::size_t j = outer[u];
        const std::size_t beta = b_odo.value(u);
        if (beta + 1 <= s_idx[j]) {
          possible = false;
          break;
        }
        lo_idx[j] = s_idx[j];
        hi_idx[j] = beta + 1;
      }
      if (!possible) continue;
      ra.slab_prefix(axis, lo_idx, hi_idx, ws.val_count, ws.val_sum);

      ws.agg.assign(axis_upper.size(), -inf);
      for (ClassOdometer a_odo(a_lists); !a_odo.done(); a_odo.advance()) {
        if (!set_outer(a_odo, b_odo)) continue;
        ra.slab_prefix(axis, lo_idx, hi_idx, ws.slab_count, ws.slab_sum);
        ws.pts.clear();
        for (auto alpha : axis_lower)
          ws.pts.push_back({ws.slab_count[alpha], ws.slab_sum[alpha]});
        lower_hull(ws.pts, ws.hull);
        if (ws.hull.empty()) continue;
        for (std::size_t i = 0; i < axis_upper.size(); ++i) {
          const std::size_t beta = axis_upper[i];
          const HullPoint b{ws.slab_count[beta + 1], ws.slab_sum[beta + 1]};
          const double v = max_slope_from_right(b, ws.hull);
          if (!std::isnan(v) && v > ws.agg[i]) ws.agg[i] = v;
        }
      }
      for (std::size_t i = 0; i < axis_upper.size(); ++i) {
        const std::size_t beta = axis_upper[i];
        if (ws.val_count[beta + 1] - ws.val_count[s_idx[axis]] < 0.5) continue;
        const double v = ws.agg[i];
        if (v > -inf) {
          any = true;
          if (v < result) result = v;
        }
      }
    }
  }

  if (!any)
    throw NotEstimableError(
        "query point has no observation weakly below or weakly above it");
  return result;
}

}  // namespace detail

inline double lower_estimate(const RectAverager& ra, std::span<const double> x) {
  detail::QueryWorkspace ws;
  return detail::minmax_estimate(ra, x, detail::Side::Lower, ws);
}

inline double upper_estimate(const RectAverager& ra, std::span<const double> x) {
  detail::QueryWorkspace ws;
  return detail::minmax_estimate(ra, x, detail::Side::Upper, ws);
}

/// Fits lower/upper/mid on every grid point. Grid points may be
/// evaluated concurrently; results are positionally assembled so the
/// output is independent of the number of jobs.
inline IsotonicFit fit_grid(const Dataset& data, const QueryGrid& grid,
                            unsigned jobs = 1) {
  const RectAverager ra = RectAverager::build(data);
  const std::size_t total = grid.size();
  if (total == 0) throw EmptyGridError("empty query grid");
  IsotonicFit fit;
  fit.grid = grid;
  fit.lower.assign(total, 0.0);
  fit.upper.assign(total, 0.0);
  fit.mid.assign(total, 0.0);
  std::vector<char> failed(total, 0);

  if (jobs == 0) jobs = 1;
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(total));
  auto worker = [&](std::size_t begin, std::size_t end) {
    detail::QueryWorkspace ws;
    for (std::size_t i = begin; i < end; ++i) {
      const auto p = grid.point(i);
      try {
        fit.lower[i] = detail::minmax_estimate(ra, p, detail::Side::Lower, ws);
        fit.upper[i] = detail::minmax_estimate(ra, p, detail::Side::Upper, ws);
        fit.mid[i] = 0.5 * (fit.lower[i] + fit.upper[i]);
      } catch (const NotEstimableError&) {
        failed[i] = 1;
      }
    }
  };
  if (jobs <= 1) {
    worker(0, total);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (total + jobs - 1) / jobs;
    for (unsigned t = 0; t < jobs; ++t) {
      const std::size_t b = std::min<std::size_t>(t * chunk, total);
      const std::size_t e = std::min<std::size_t>(b + chunk, total);
      if (b < e) pool.emplace_back(worker, b, e);
    }
    for (auto& th : pool) th.join();
  }

  std::string offenders;
  for (std::size_t i = 0; i < total; ++i)
    if (failed[i]) {
      if (!offenders.empty()) offenders += ", ";
      if (offenders.size() < 200) {
        offenders += "(";
        const auto p = grid.point(i);
        for (std::size_t j = 0; j < p.size(); ++j)
          offenders += (j ? "," : "") + std::to_string(p[j]);
        offenders += ")";
      }
    }
  if (!offenders.empty())
    throw NotEstimableError("grid points not estimable (trim the grid first): " +
                            offenders);

  // sandwich and isotonicity are structural guarantees; a violation here
  // is an implementation bug
  const double slack = 1e-12;
  for (std::size_t i = 0; i < total; ++i)
    if (fit.lower[i] > fit.upper[i] + slack)
      throw InvariantError("sandwich violated at grid point " + std::to_string(i));
  const auto strides = grid.strides();
  for (std::size_t j = 0; j < grid.dim(); ++j) {
    const std::size_t len = grid.axes[j].size();
    for (std::size_t i = 0; i < total; ++i) {
      const std::size_t pos = (i / strides[j]) % len;
      if (pos + 1 == len) continue;
      const std::size_t nxt = i + strides[j];
      for (const auto* surf : {&fit.lower, &fit.upper, &fit.mid})
        if ((*surf)[i] > (*surf)[nxt] + slack)
          throw InvariantError("isotonicity violated along dimension " +
                               std::to_string(j + 1));
    }
  }
  return fit;
}

/// Midpoint value at the grid point nearest to x (Euclidean distance in
/// span-rescaled coordinates; ties go to the lexicographically smaller
/// grid index).
inline double predict(const IsotonicFit& fit, std::span<const double> x) {
  const std::size_t total = fit.grid.size();
  if (total == 0) throw UserError("empty fit");
  if (x.size() != fit.grid.dim()) throw UserError("query dimension mismatch");
  std::vector<double> scale(fit.grid.dim(), 1.0);
  for (std::size_t j = 0; j < fit.grid.dim(); ++j) {
    const double span = fit.grid.axes[j].back() - fit.grid.axes[j].front();
    if (span > 0.0) scale[j] = 1.0 / span;
  }
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < total; ++i) {
    const auto p = fit.grid.point(i);
    double dist = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double delta = (p[j] - x[j]) * scale[j];
      dist += delta * delta;
    }
    if (dist < best) {
      best = dist;
      best_i = i;
    }
  }
  return fit.mid[best_i];
}

inline void write_fit_csv(const IsotonicFit& fit, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UserError("cannot write file: " + path);
  for (std::size_t j = 0; j < fit.grid.dim(); ++j) out << "x" << j + 1 << ',';
  out << "lower,upper,mid\n";
  char buf[64];
  for (std::size_t i = 0; i < fit.grid.size(); ++i) {
    const auto p = fit.grid.point(i);
    for (double v : p) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << buf << ',';
    }
    std::snprintf(buf, sizeof(buf), "%.17g", fit.lower[i]);
    out << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", fit.upper[i]);
    out << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", fit.mid[i]);
    out << buf << '\n';
  }
}

/// Reads a fit written by write_fit_csv back into memory. Rows must form
/// the full row-major grid product, which write_fit_csv guarantees.
inline IsotonicFit read_fit_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty fit file");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 4) throw ParseError("fit file needs coordinates plus 3 surfaces");
  const std::size_t d = header.size() - 3;
  std::vector<std::vector<double>> coord_rows;
  IsotonicFit fit;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) throw ParseError("ragged fit file row");
    std::vector<double> coords(d);
    for (std::size_t j = 0; j < d; ++j) coords[j] = std::stod(cells[j]);
    coord_rows.push_back(coords);
    fit.lower.push_back(std::stod(cells[d]));
    fit.upper.push_back(std::stod(cells[d + 1]));
    fit.mid.push_back(std::stod(cells[d + 2]));
  }
  fit.grid.axes.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> vals;
    for (const auto& r : coord_rows) vals.push_back(r[j]);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    fit.grid.axes[j] = vals;
  }
  if (fit.grid.size() != coord_rows.size())
    throw ParseError("fit file rows do not form a full rectangular grid");
  return fit;
}

}  // namespace isorec
