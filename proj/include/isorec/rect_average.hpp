#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "isorec/dataset.hpp"

namespace isorec {

/// Per-dimension open/closed flags for a rectangle query.
struct EdgeClosure {
  bool lo_closed = true;
  bool hi_closed = true;
};

/// Exact sum/count/average oracle for axis-aligned hyperrectangles,
/// backed by d-dimensional prefix-sum tensors over the lattice of
/// distinct observed coordinates. Immutable after build; queries are
/// pure and cost O(2^d) lookups.
class RectAverager {
 public:
  static RectAverager build(const Dataset& data,
                            std::size_t cell_budget = 100'000'000) {
    data.validate();
    RectAverager ra;
    ra.d_ = data.d;
    ra.coords_.resize(data.d);
    for (std::size_t j = 0; j < data.d; ++j) {
      std::vector<double> col(data.n);
      for (std::size_t i = 0; i < data.n; ++i) col[i] = data.cov(i, j);
      std::sort(col.begin(), col.end());
      col.erase(std::unique(col.begin(), col.end()), col.end());
      ra.coords_[j] = std::move(col);
    }
    std::size_t cells = 1;
    for (std::size_t j = 0; j < data.d; ++j) {
      const std::size_t side = ra.coords_[j].size() + 1;
      if (cells > cell_budget / side)
        throw CapacityError(
            "prefix tensor would exceed the cell budget (" +
            std::to_string(cell_budget) +
            " cells); consider a grid-restricted representation");
      cells *= side;
    }
    ra.shape_.resize(data.d);
    ra.stride_.assign(data.d, 1);
    for (std::size_t j = 0; j < data.d; ++j) ra.shape_[j] = ra.coords_[j].size() + 1;
    for (std::size_t j = data.d; j-- > 1;)
      ra.stride_[j - 1] = ra.stride_[j] * ra.shape_[j];
    ra.cum_sum_.assign(cells, 0.0);
    ra.cum_count_.assign(cells, 0.0);

    for (std::size_t i = 0; i < data.n; ++i) {
      std::size_t flat = 0;
      for (std::size_t j = 0; j < data.d; ++j) {
        const auto& c = ra.coords_[j];
        const std::size_t idx = static_cast<std::size_t>(
            std::lower_bound(c.begin(), c.end(), data.cov(i, j)) - c.begin());
        flat += (idx + 1) * ra.stride_[j];
      }
      ra.cum_sum_[flat] += data.y[i];
      ra.cum_count_[flat] += 1.0;
    }
    for (std::size_t axis = 0; axis < data.d; ++axis) {
      ra.prefix_pass(ra.cum_sum_, axis);
      ra.prefix_pass(ra.cum_count_, axis);
    }
    ra.total_count_ = ra.cum_count_.back();
    ra.total_sum_ = ra.cum_sum_.back();
    return ra;
  }

  std::size_t dim() const { return d_; }
  const std::vector<double>& coords(std::size_t j) const { return coords_[j]; }
  double total_count() const { return total_count_; }
  double total_sum() const { return total_sum_; }

  /// Mean response over the rectangle [lo, hi] with the given per-edge
  /// closure; nullopt signals an empty rectangle.
  std::optional<double> average(std::span<const double> lo, std::span<const double> hi,
                                std::span<const EdgeClosure> closure = {}) const {
    if (lo.size() != d_ || hi.size() != d_)
      throw UserError("rectangle dimension mismatch");
    std::vector<std::size_t> a(d_), b(d_);
    for (std::size_t j = 0; j < d_; ++j) {
      if (lo[j] > hi[j])
        throw UserError("invalid rectangle: lo exceeds hi in dimension " +
                        std::to_string(j + 1));
      const EdgeClosure cl = closure.empty() ? EdgeClosure{} : closure[j];
      const auto& c = coords_[j];
      a[j] = static_cast<std::size_t>(
          (cl.lo_closed ? std::lower_bound(c.begin(), c.end(), lo[j])
                        : std::upper_bound(c.begin(), c.end(), lo[j])) -
          c.begin());
      b[j] = static_cast<std::size_t>(
          (cl.hi_closed ? std::upper_bound(c.begin(), c.end(), hi[j])
                        : std::lower_bound(c.begin(), c.end(), hi[j])) -
          c.begin());
      if (b[j] < a[j]) b[j] = a[j];
    }
    const double cnt = corner_sum(cum_count_, a, b);
    if (cnt < 0.5) return std::nullopt;
    return corner_sum(cum_sum_, a, b) / cnt;
  }

  /// Count/sum over coordinate-index ranges [a_j, b_j) per dimension.
  double count_idx(const std::vector<std::size_t>& a,
                   const std::vector<std::size_t>& b) const {
    return corner_sum(cum_count_, a, b);
  }
  double sum_idx(const std::vector<std::size_t>& a,
                 const std::vector<std::size_t>& b) const {
    return corner_sum(cum_sum_, a, b);
  }

  /// Running prefixes along `axis` for a fixed box on the other dims:
  /// out_count[m], out_sum[m] cover other-dim index ranges [a_j, b_j)
  /// crossed with axis indices < m, for m = 0..coords(axis).size().
  void slab_prefix(std::size_t axis, const std::vector<std::size_t>& a,
                   const std::vector<std::size_t>& b, std::vector<double>& out_count,
                   std::vector<double>& out_sum) const {
    const std::size_t len = shape_[axis];
    out_count.assign(len, 0.0);
    out_sum.assign(len, 0.0);
    // corner expansion over the non-axis dims
    std::vector<std::size_t> dims;
    for (std::size_t j = 0; j < d_; ++j)
      if (j != axis) dims.push_back(j);
    const std::size_t combos = std::size_t{1} << dims.size();
    for (std::size_t mask = 0; mask < combos; ++mask) {
      std::size_t base = 0;
      int sign = 1;
      for (std::size_t t = 0; t < dims.size(); ++t) {
        const std::size_t j = dims[t];
        if (mask & (std::size_t{1} << t)) {
          base += a[j] * stride_[j];
          sign = -sign;
        } else {
          base += b[j] * stride_[j];
        }
      }
      const std::size_t st = stride_[axis];
      const double* pc = cum_count_.data() + base;
      const double* ps = cum_sum_.data() + base;
      if (sign > 0) {
        for (std::size_t m = 0; m < len; ++m) {
          out_count[m] += pc[m * st];
          out_sum[m] += ps[m * st];
        }
      } else {
        for (std::size_t m = 0; m < len; ++m) {
          out_count[m] -= pc[m * st];
          out_sum[m] -= ps[m * st];
        }
      }
    }
  }

 private:
  void prefix_pass(std::vector<double>& t, std::size_t axis) {
    // compensated running sums along one axis, line by line
    const std::size_t st = stride_[axis];
    const std::size_t len = shape_[axis];
    const std::size_t total = t.size();
    const std::size_t block = st * len;
    for (std::size_t start = 0; start < total; start += block) {
      for (std::size_t off = 0; off < st; ++off) {
        double acc = 0.0, comp = 0.0;
        for (std::size_t m = 0; m < len; ++m) {
          const std::size_t idx = start + off + m * st;
          const double v = t[idx] - comp;
          const double s = acc + v;
          comp = (s - acc) - v;
          acc = s;
          t[idx] = acc;
        }
      }
    }
  }

  double corner_sum(const std::vector<double>& t, const std::vector<std::size_t>& a,
                    const std::vector<std::size_t>& b) const {
    const std::size_t combos = std::size_t{1} << d_;
    double total = 0.0;
    for (std::size_t mask = 0; mask < combos; ++mask) {
      std::size_t flat = 0;
      int sign = 1;
      for (std::size_t j = 0; j < d_; ++j) {
        if (mask & (std::size_t{1} << j)) {
          flat += a[j] * stride_[j];
          sign = -sign;
        } else {
          flat += b[j] * stride_[j];
        }
      }
      total += sign > 0 ? t[flat] : -t[flat];
    }
    return total;
  }

  std::size_t d_ = 0;
  std::vector<std::vector<double>> coords_;
  std::vector<std::size_t> shape_, stride_;
  std::vector<double> cum_sum_, cum_count_;
  double total_count_ = 0.0, total_sum_ = 0.0;
};

}  // namespace isorec
