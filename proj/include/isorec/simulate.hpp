#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "isorec/dataset.hpp"
#include "isorec/rng.hpp"

namespace isorec {

/// Regression function of the count-autoregression benchmark:
/// f(y, z) = -5 + 20 / (1 + exp(-0.3 y)) + 4 z, isotonic in both
/// arguments with range [5, 23) on y >= 0, z in [0, 1].
inline double f_sim(double y, double z) {
  return -5.0 + 20.0 / (1.0 + std::exp(-0.3 * y)) + 4.0 * z;
}

struct PoissonTrendPath {
  std::vector<long> series;        // Y_1..Y_n
  std::vector<double> intensity;   // lambda_1..lambda_n
};

/// Poisson count autoregression with trend: Y_t | past ~ Poisson(lambda_t)
/// with lambda_t = f_sim(Y_{t-1}, (t-1)/n). The chain starts from
/// Y_0 ~ Poisson(f_sim(0, 0)); results are insensitive to this choice
/// since the chain mixes geometrically. Same seed, same output.
inline PoissonTrendPath simulate_poisson_trend(std::size_t n, std::uint64_t seed) {
  if (n < 2) throw UserError("simulate_poisson_trend requires n >= 2");
  Rng rng(seed);
  PoissonTrendPath path;
  path.series.reserve(n);
  path.intensity.reserve(n);
  long prev = rng.poisson(f_sim(0.0, 0.0));
  for (std::size_t t = 1; t <= n; ++t) {
    const double lambda =
        f_sim(static_cast<double>(prev),
              static_cast<double>(t - 1) / static_cast<double>(n));
    const long y = rng.poisson(lambda);
    path.intensity.push_back(lambda);
    path.series.push_back(y);
    prev = y;
  }
  return path;
}

enum class NoiseKind { None, Gaussian, Uniform };
enum class DesignDensity { Uniform, Tilted };

/// Spec of an iid regression draw on [0,1]^d: design density bounded away
/// from 0 and infinity, centered noise with bounded variance, and an
/// isotonic regression function.
struct IidSpec {
  std::size_t n = 100;
  std::size_t d = 1;
  std::uint64_t seed = 1;
  DesignDensity density = DesignDensity::Uniform;
  double tilt = 0.0;  // linear density 1 + tilt*(x - 1/2) per dim, |tilt| < 2
  NoiseKind noise = NoiseKind::Gaussian;
  double sigma = 0.3;
  std::function<double(std::span<const double>)> f;
};

inline Dataset simulate_iid(const IidSpec& spec) {
  if (spec.n < 1 || spec.d < 1) throw UserError("iid spec needs n >= 1, d >= 1");
  if (!spec.f) throw UserError("iid spec needs a regression function");
  if (spec.density == DesignDensity::Tilted && std::abs(spec.tilt) >= 2.0)
    throw UserError("tilted density must stay bounded away from zero (|tilt| < 2)");
  Rng rng(spec.seed);
  Dataset ds;
  ds.n = spec.n;
  ds.d = spec.d;
  ds.kinds.assign(spec.d, DimKind::Continuous);
  ds.x.resize(spec.n * spec.d);
  ds.y.resize(spec.n);
  std::vector<double> row(spec.d);
  for (std::size_t i = 0; i < spec.n; ++i) {
    for (std::size_t j = 0; j < spec.d; ++j) {
      double u = rng.uniform();
      if (spec.density == DesignDensity::Tilted) {
        // inverse cdf of 1 + tilt*(x - 1/2) on [0,1]
        const double g = spec.tilt;
        const double a = g / 2.0;
        const double b = 1.0 - g / 2.0;
        u = a == 0.0 ? u : (-b + std::sqrt(b * b + 4.0 * a * u)) / (2.0 * a);
      }
      row[j] = u;
      ds.x[i * spec.d + j] = u;
    }
    double eps = 0.0;
    switch (spec.noise) {
      case NoiseKind::None: break;
      case NoiseKind::Gaussian: eps = spec.sigma * rng.normal(); break;
      case NoiseKind::Uniform:
        // centered uniform with standard deviation sigma
        eps = spec.sigma * std::sqrt(12.0) * (rng.uniform() - 0.5);
        break;
    }
    ds.y[i] = spec.f(row) + eps;
  }
  return ds;
}

}  // namespace isorec
