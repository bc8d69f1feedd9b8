#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "isorec/baseline.hpp"
#include "isorec/estimator.hpp"
#include "isorec/lattice.hpp"
#include "isorec/simulate.hpp"

namespace isorec {

/// Weighted Riemann sum of |mid - f_true| over the masked grid points.
/// Weights carry the measure: box volume for continuous dims, counting
/// measure for discrete dims, h per box on quantile-rescaled dims.
inline double integrated_l1(const IsotonicFit& fit,
                            const std::function<double(std::span<const double>)>& f_true,
                            const std::vector<char>& mask,
                            const std::vector<double>& weights) {
  const std::size_t total = fit.grid.size();
  if (mask.size() != total || weights.size() != total)
    throw UserError("mask/weights must align with the fit grid");
  double acc = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < total; ++i) {
    if (!mask[i]) continue;
    any = true;
    acc += std::abs(fit.mid[i] - f_true(fit.grid.point(i))) * weights[i];
  }
  if (!any) throw EmptyGridError("domain mask selects no grid points");
  return acc;
}

inline double mape(std::span<const double> predictions,
                   std::span<const double> observations) {
  if (predictions.size() != observations.size())
    throw UserError("mape: length mismatch");
  if (predictions.empty()) throw UserError("mape: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    acc += std::abs(predictions[i] - observations[i]);
  return acc / static_cast<double>(predictions.size());
}

struct LemmaCheck {
  double lhs, rhs;
  bool holds;
};

/// Telescoping bias bound for isotonic lattice functions: the sum of
/// central second differences over interior lattice points is at most
/// 2 d M^{d-1} times the total range. `values` holds f on the (M+1)^d
/// lattice of points (k_1/M, ..., k_d/M), row-major, last dim fastest.
inline LemmaCheck lemma_a1_check(const std::vector<double>& values, std::size_t M,
                                 std::size_t d) {
  std::size_t total = 1;
  for (std::size_t j = 0; j < d; ++j) total *= (M + 1);
  if (values.size() != total)
    throw UserError("lattice function size must be (M+1)^d");
  std::vector<std::size_t> strides(d, 1);
  for (std::size_t j = d; j-- > 1;) strides[j - 1] = strides[j] * (M + 1);

  // isotonicity precondition
  for (std::size_t i = 0; i < total; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t pos = (i / strides[j]) % (M + 1);
      if (pos + 1 <= M && values[i] > values[i + strides[j]] + 1e-12)
        throw UserError("lemma_a1_check requires an isotonic lattice function");
    }

  double lhs = 0.0;
  if (M >= 2) {
    std::vector<std::size_t> k(d, 1);
    while (true) {
      std::size_t up = 0, down = 0;
      for (std::size_t j = 0; j < d; ++j) {
        up += (k[j] + 1) * strides[j];
        down += (k[j] - 1) * strides[j];
      }
      lhs += values[up] - values[down];
      // advance odometer over {1..M-1}^d
      std::size_t j = d;
      bool done = true;
      while (j-- > 0) {
        if (++k[j] <= M - 1) {
          done = false;
          break;
        }
        k[j] = 1;
      }
      if (done) break;
    }
  }
  const double range = values.back() - values.front();
  const double rhs =
      2.0 * static_cast<double>(d) * std::pow(static_cast<double>(M),
                                              static_cast<double>(d - 1)) * range;
  return {lhs, rhs, lhs <= rhs + 1e-12};
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw UserError("median of empty vector");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  return m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

inline double quartile_of(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// One-sided sign test: p-value of seeing at least `wins` successes in
/// `trials` fair coin flips.
inline double sign_test_p(std::size_t wins, std::size_t trials) {
  if (trials == 0) return 1.0;
  double p = 0.0;
  const double log_half = std::log(0.5);
  for (std::size_t k = wins; k <= trials; ++k) {
    const double log_binom = std::lgamma(static_cast<double>(trials) + 1.0) -
                             std::lgamma(static_cast<double>(k) + 1.0) -
                             std::lgamma(static_cast<double>(trials - k) + 1.0);
    p += std::exp(log_binom + static_cast<double>(trials) * log_half);
  }
  return std::min(p, 1.0);
}

/// Evaluation grid aligned with lattice boxes: continuous/trend axes take
/// interior box midpoints with the box measure as weight, discrete axes
/// take the observed levels with counting weight.
struct EvalGrid {
  QueryGrid grid;
  std::vector<std::vector<double>> axis_weights;

  std::vector<double> point_weights() const {
    const std::size_t total = grid.size();
    std::vector<double> w(total, 1.0);
    for (std::size_t i = 0; i < total; ++i) {
      const auto idx = grid.unflatten(i);
      for (std::size_t j = 0; j < grid.dim(); ++j) w[i] *= axis_weights[j][idx[j]];
    }
    return w;
  }
};

enum class Measure { Lebesgue, QuantileNu };

inline EvalGrid interior_eval_grid(const LatticeSpec& lattice, Measure measure) {
  EvalGrid eg;
  const std::size_t d = lattice.dim();
  eg.grid.axes.resize(d);
  eg.axis_weights.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    const auto& b = lattice.breaks[j];
    if (lattice.kinds[j] == DimKind::Discrete) {
      eg.grid.axes[j] = b;
      eg.axis_weights[j].assign(b.size(), 1.0);
    } else {
      if (lattice.M < 3)
        throw DegenerateLatticeError("interior grid needs M >= 3");
      for (std::size_t k = 1; k + 1 < lattice.M; ++k) {
        eg.grid.axes[j].push_back(0.5 * (b[k] + b[k + 1]));
        eg.axis_weights[j].push_back(measure == Measure::Lebesgue ? b[k + 1] - b[k]
                                                                  : lattice.h);
      }
    }
  }
  return eg;
}

/// Restricts an EvalGrid to a trimmed grid, keeping the weight attached
/// to each surviving axis coordinate.
inline EvalGrid restrict_eval_grid(const EvalGrid& eg, const QueryGrid& trimmed) {
  EvalGrid out;
  out.grid = trimmed;
  out.axis_weights.resize(trimmed.dim());
  for (std::size_t j = 0; j < trimmed.dim(); ++j) {
    for (double v : trimmed.axes[j]) {
      const auto& src = eg.grid.axes[j];
      const auto it = std::lower_bound(src.begin(), src.end(), v);
      if (it == src.end() || *it != v)
        throw InvariantError("trimmed grid is not a sub-grid of the eval grid");
      out.axis_weights[j].push_back(
          eg.axis_weights[j][static_cast<std::size_t>(it - src.begin())]);
    }
  }
  return out;
}

struct RatePoint {
  std::size_t n = 0;
  double median_l1 = 0.0;
  std::size_t failures = 0;
};

struct RateRecord {
  std::vector<RatePoint> per_n;
  double slope = 0.0, intercept = 0.0, r2 = 0.0;
};

enum class RateDgp { Iid1d, PoissonTrend };

namespace detail {

inline void fit_loglog_line(const std::vector<double>& lx, const std::vector<double>& ly,
                            double& slope, double& intercept, double& r2) {
  const std::size_t m = lx.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
    syy += ly[i] * ly[i];
  }
  const double dm = static_cast<double>(m);
  const double vxx = sxx - sx * sx / dm;
  const double vxy = sxy - sx * sy / dm;
  const double vyy = syy - sy * sy / dm;
  slope = vxy / vxx;
  intercept = (sy - slope * sx) / dm;
  r2 = vyy > 0.0 ? (vxy * vxy) / (vxx * vyy) : 1.0;
}

/// One iid-design replicate of the 1-D rate protocol: f(x) = x^2 on a
/// uniform design with Gaussian noise, integrated L1 over the interior
/// lattice boxes. The loss is normalized by the total measure of the
/// evaluated domain: the interior domain itself grows with n (its
/// boundary layer shrinks), and without the normalization that growth
/// masks the error decay at small n.
inline double iid1d_replicate_l1(std::size_t n, std::uint64_t seed,
                                 std::uint64_t stream) {
  IidSpec spec;
  spec.n = n;
  spec.d = 1;
  spec.seed = Rng::derive(seed, stream).next_u64();
  spec.noise = NoiseKind::Gaussian;
  spec.sigma = 0.3;
  spec.f = [](std::span<const double> x) { return x[0] * x[0]; };
  const Dataset ds = simulate_iid(spec);
  const LatticeSpec lattice = build_lattice(ds);
  EvalGrid eg = interior_eval_grid(lattice, Measure::Lebesgue);
  const QueryGrid trimmed = trim_to_data(eg.grid, ds);
  eg = restrict_eval_grid(eg, trimmed);
  const IsotonicFit fit = fit_grid(ds, eg.grid);
  const std::vector<char> mask(eg.grid.size(), 1);
  const std::vector<double> w = eg.point_weights();
  double total = 0.0;
  for (double v : w) total += v;
  return integrated_l1(
             fit, [](std::span<const double> x) { return x[0] * x[0]; }, mask, w) /
         total;
}

/// One dependent-case replicate: count autoregression with trend,
/// lag-embedded design, integrated L1 against f_sim over a fixed count
/// window crossed with the interior trend boxes (nu measure), normalized
/// by the total nu mass of the evaluated domain (see iid1d_replicate_l1).
inline double poisson_trend_replicate_l1(std::size_t n, std::uint64_t seed,
                                         std::uint64_t stream) {
  const auto path = simulate_poisson_trend(n, Rng::derive(seed, stream).next_u64());
  std::vector<double> series(path.series.begin(), path.series.end());
  const Dataset ds = lag_embed(series, 1, true);
  const LatticeSpec lattice = build_lattice(ds);
  EvalGrid eg = interior_eval_grid(lattice, Measure::QuantileNu);
  // keep the discrete evaluation window fixed across n so the nu-measure
  // domain does not grow with the sample size
  std::vector<double> levels, level_w;
  for (std::size_t i = 0; i < eg.grid.axes[0].size(); ++i) {
    const double lvl = eg.grid.axes[0][i];
    if (lvl >= 4.0 && lvl <= 16.0) {
      levels.push_back(lvl);
      level_w.push_back(eg.axis_weights[0][i]);
    }
  }
  if (levels.empty()) throw NotEstimableError("no counts observed in the window");
  eg.grid.axes[0] = levels;
  eg.axis_weights[0] = level_w;
  const QueryGrid trimmed = trim_to_data(eg.grid, ds);
  eg = restrict_eval_grid(eg, trimmed);
  const IsotonicFit fit = fit_grid(ds, eg.grid);
  const std::vector<char> mask(eg.grid.size(), 1);
  const std::vector<double> w = eg.point_weights();
  double total = 0.0;
  for (double v : w) total += v;
  return integrated_l1(
             fit, [](std::span<const double> x) { return f_sim(x[0], x[1]); }, mask,
             w) /
         total;
}

template <typename Job>
inline void parallel_for(std::size_t count, unsigned jobs, Job&& job) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::vector<std::thread> pool;
  const unsigned workers = std::min<unsigned>(jobs, static_cast<unsigned>(count));
  const std::size_t chunk = (count + workers - 1) / workers;
  for (unsigned t = 0; t < workers; ++t) {
    const std::size_t b = std::min<std::size_t>(t * chunk, count);
    const std::size_t e = std::min<std::size_t>(b + chunk, count);
    if (b < e)
      pool.emplace_back([b, e, &job] {
        for (std::size_t i = b; i < e; ++i) job(i);
      });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

/// Rate sweep: median measure-normalized integrated L1 per sample size
/// and the log-log regression slope. Replicates that fail to estimate are
/// excluded; more than 10% failures at any n is an error.
inline RateRecord rate_experiment(RateDgp dgp, const std::vector<std::size_t>& ns,
                                  std::size_t reps, std::uint64_t seed,
                                  unsigned jobs = 1) {
  if (ns.size() < 3) throw UserError("rate_experiment needs >= 3 sample sizes");
  if (reps < 10) throw UserError("rate_experiment needs >= 10 replicates");
  RateRecord rec;
  std::vector<double> lx, ly;
  for (std::size_t ni = 0; ni < ns.size(); ++ni) {
    const std::size_t n = ns[ni];
    std::vector<double> l1(reps, std::nan(""));
    detail::parallel_for(reps, jobs, [&](std::size_t r) {
      const std::uint64_t stream = (static_cast<std::uint64_t>(ni) << 32) | r;
      try {
        l1[r] = dgp == RateDgp::Iid1d
                    ? detail::iid1d_replicate_l1(n, seed, stream)
                    : detail::poisson_trend_replicate_l1(n, seed, stream);
      } catch (const UserError&) {
        // recorded as a failure below
      }
    });
    RatePoint pt;
    pt.n = n;
    std::vector<double> ok;
    for (double v : l1)
      if (std::isnan(v))
        ++pt.failures;
      else
        ok.push_back(v);
    if (pt.failures * 10 > reps)
      throw UserError("more than 10% of replicates failed at n = " +
                      std::to_string(n));
    pt.median_l1 = median_of(ok);
    rec.per_n.push_back(pt);
    lx.push_back(std::log(static_cast<double>(n)));
    ly.push_back(std::log(pt.median_l1));
  }
  detail::fit_loglog_line(lx, ly, rec.slope, rec.intercept, rec.r2);
  return rec;
}

struct CompareRow {
  std::size_t replicate = 0;
  std::size_t n = 0;
  double l1_mid = 0.0, l1_baseline = 0.0;
  double mape_mid = 0.0, mape_baseline = 0.0;
};

struct CompareSummary {
  std::size_t n = 0;
  double median_l1_mid = 0.0, median_l1_baseline = 0.0;
  double q1_l1_mid = 0.0, q3_l1_mid = 0.0;
  double q1_l1_baseline = 0.0, q3_l1_baseline = 0.0;
  double median_mape_mid = 0.0, median_mape_baseline = 0.0;
  std::size_t l1_wins = 0;       // replicates with l1_mid < l1_baseline
  std::size_t l1_trials = 0;     // non-tied replicates
  double sign_test_p = 1.0;      // one-sided, in favor of the midpoint fit
  std::size_t failures = 0;
};

struct ExperimentReport {
  std::vector<CompareRow> per_replicate;
  std::vector<CompareSummary> summary;
};

/// Midpoint estimator vs the Dykstra comparator on the count
/// autoregression, on an equidistant grid trimmed to the data: per
/// replicate integrated L1 against the true regression function plus
/// in-sample MAPE for both fits.
inline ExperimentReport compare_study(const std::vector<std::size_t>& ns,
                                      std::size_t reps, std::uint64_t seed,
                                      unsigned jobs = 1,
                                      std::size_t grid_points = 21) {
  if (reps < 2) throw UserError("compare_study needs >= 2 replicates");
  ExperimentReport report;
  for (std::size_t ni = 0; ni < ns.size(); ++ni) {
    const std::size_t n = ns[ni];
    std::vector<CompareRow> rows(reps);
    std::vector<char> ok(reps, 0);
    detail::parallel_for(reps, jobs, [&](std::size_t r) {
      const std::uint64_t stream = (static_cast<std::uint64_t>(ni) << 32) | r;
      try {
        const auto path =
            simulate_poisson_trend(n, Rng::derive(seed, stream).next_u64());
        std::vector<double> series(path.series.begin(), path.series.end());
        const Dataset ds = lag_embed(series, 1, true);

        std::vector<double> lo(ds.d), hi(ds.d);
        for (std::size_t j = 0; j < ds.d; ++j) {
          lo[j] = hi[j] = ds.cov(0, j);
          for (std::size_t i = 1; i < ds.n; ++i) {
            lo[j] = std::min(lo[j], ds.cov(i, j));
            hi[j] = std::max(hi[j], ds.cov(i, j));
          }
        }
        const QueryGrid grid =
            trim_to_data(equispaced_grid(lo, hi, grid_points), ds);

        const IsotonicFit fit = fit_grid(ds, grid);
        const DykstraFit dyk = dykstra_isotonic(ds, 1e-8, 10000, &grid);
        const IsotonicFit base = baseline_surface(dyk, grid);

        double cell = 1.0;
        for (std::size_t j = 0; j < ds.d; ++j)
          cell *= (hi[j] - lo[j]) / static_cast<double>(grid_points - 1);
        const std::vector<char> mask(grid.size(), 1);
        const std::vector<double> weights(grid.size(), cell);
        auto truth = [](std::span<const double> x) { return f_sim(x[0], x[1]); };

        CompareRow row;
        row.replicate = r;
        row.n = n;
        row.l1_mid = integrated_l1(fit, truth, mask, weights);
        row.l1_baseline = integrated_l1(base, truth, mask, weights);

        std::vector<double> pred_mid(ds.n), pred_base(ds.n), obs(ds.n);
        std::vector<double> point(ds.d);
        for (std::size_t i = 0; i < ds.n; ++i) {
          for (std::size_t j = 0; j < ds.d; ++j) point[j] = ds.cov(i, j);
          pred_mid[i] = predict(fit, point);
          pred_base[i] = predict(base, point);
          obs[i] = ds.y[i];
        }
        row.mape_mid = mape(pred_mid, obs);
        row.mape_baseline = mape(pred_base, obs);
        rows[r] = row;
        ok[r] = 1;
      } catch (const UserError&) {
        // recorded as a failure below
      }
    });

    CompareSummary sum;
    sum.n = n;
    std::vector<double> lm, lb, mm, mb;
    for (std::size_t r = 0; r < reps; ++r) {
      if (!ok[r]) {
        ++sum.failures;
        continue;
      }
      report.per_replicate.push_back(rows[r]);
      lm.push_back(rows[r].l1_mid);
      lb.push_back(rows[r].l1_baseline);
      mm.push_back(rows[r].mape_mid);
      mb.push_back(rows[r].mape_baseline);
      if (rows[r].l1_mid != rows[r].l1_baseline) {
        ++sum.l1_trials;
        if (rows[r].l1_mid < rows[r].l1_baseline) ++sum.l1_wins;
      }
    }
    if (sum.failures * 10 > reps)
      throw UserError("more than 10% of replicates failed at n = " +
                      std::to_string(n));
    sum.median_l1_mid = median_of(lm);
    sum.median_l1_baseline = median_of(lb);
    sum.q1_l1_mid = quartile_of(lm, 0.25);
    sum.q3_l1_mid = quartile_of(lm, 0.75);
    sum.q1_l1_baseline = quartile_of(lb, 0.25);
    sum.q3_l1_baseline = quartile_of(lb, 0.75);
    sum.median_mape_mid = median_of(mm);
    sum.median_mape_baseline = median_of(mb);
    sum.sign_test_p = sign_test_p(sum.l1_wins, sum.l1_trials);
    report.summary.push_back(sum);
  }
  return report;
}

}  // namespace isorec
