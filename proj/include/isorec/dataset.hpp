#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "isorec/errors.hpp"

namespace isorec {

enum class DimKind { Discrete, Continuous, Trend };

inline char kind_letter(DimKind k) {
  switch (k) {
    case DimKind::Discrete: return 'd';
    case DimKind::Continuous: return 'c';
    case DimKind::Trend: return 't';
  }
  return '?';
}

inline DimKind kind_from_letter(char c) {
  switch (c) {
    case 'd': return DimKind::Discrete;
    case 'c': return DimKind::Continuous;
    case 't': return DimKind::Trend;
    default:
      throw SchemaError(std::string("unknown covariate kind '") + c +
                        "', expected one of d,c,t");
  }
}

/// Regression sample with mixed covariate kinds. Immutable after
/// construction; safe for shared read-only access.
struct Dataset {
  std::vector<double> y;        // responses, length n
  std::vector<double> x;        // covariates, row-major n*d
  std::vector<DimKind> kinds;   // length d
  std::size_t n = 0;
  std::size_t d = 0;
  std::string response_name = "y";
  std::vector<std::string> covariate_names;

  double cov(std::size_t row, std::size_t dim) const { return x[row * d + dim]; }

  std::size_t continuous_dims() const {
    std::size_t c = 0;
    for (auto k : kinds)
      if (k != DimKind::Discrete) ++c;
    return c;
  }

  /// Checks finiteness, discrete integrality and the trend column shape.
  void validate() const {
    if (n < 1 || d < 1) throw ValidationError("dataset must have n >= 1 and d >= 1");
    if (y.size() != n || x.size() != n * d || kinds.size() != d)
      throw ValidationError("dataset field sizes are inconsistent");
    std::size_t trend_dims = 0;
    for (auto k : kinds)
      if (k == DimKind::Trend) ++trend_dims;
    if (trend_dims > 1) throw ValidationError("at most one trend dimension is allowed");
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(y[i]))
        throw ValidationError("non-finite response at row " + std::to_string(i + 1));
      for (std::size_t j = 0; j < d; ++j) {
        const double v = cov(i, j);
        if (!std::isfinite(v))
          throw ValidationError("non-finite covariate at row " + std::to_string(i + 1));
        if (kinds[j] == DimKind::Discrete) {
          if (v < 0.0 || v != std::floor(v))
            throw ValidationError("discrete column " + std::to_string(j + 1) +
                                  " has non-integer value " + std::to_string(v) +
                                  " at row " + std::to_string(i + 1));
        } else if (kinds[j] == DimKind::Trend) {
          const double want = static_cast<double>(i + 1) / static_cast<double>(n);
          if (std::abs(v - want) > 1e-9 * std::max(1.0, want))
            throw ValidationError("trend column must hold t/n in order; row " +
                                  std::to_string(i + 1) + " has " + std::to_string(v));
        }
      }
    }
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_cell(const std::string& cell, std::size_t row, const std::string& col) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(cell, &pos);
    while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
    if (pos != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw ParseError("non-numeric value '" + cell + "' in column '" + col +
                     "' at data row " + std::to_string(row));
  }
}

}  // namespace detail

/// Loads a UTF-8 comma-separated file with one header row. All columns
/// other than the response become covariates, in file order; `kinds`
/// must list one DimKind per covariate column.
inline Dataset load_csv(const std::string& path, const std::string& response,
                        const std::vector<DimKind>& kinds) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);

  std::size_t response_idx = header.size();
  std::vector<std::size_t> cov_idx;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == response)
      response_idx = i;
    else
      cov_idx.push_back(i);
  }
  if (response_idx == header.size())
    throw SchemaError("response column '" + response + "' not found in " + path);
  if (cov_idx.empty()) throw SchemaError("no covariate columns in " + path);
  if (kinds.size() != cov_idx.size())
    throw SchemaError("declared " + std::to_string(kinds.size()) + " kinds for " +
                      std::to_string(cov_idx.size()) + " covariate columns");

  Dataset ds;
  ds.d = cov_idx.size();
  ds.kinds = kinds;
  ds.response_name = response;
  for (auto i : cov_idx) ds.covariate_names.push_back(header[i]);

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError("row " + std::to_string(row) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(header.size()));
    ds.y.push_back(detail::parse_cell(cells[response_idx], row, response));
    for (std::size_t j = 0; j < cov_idx.size(); ++j)
      ds.x.push_back(detail::parse_cell(cells[cov_idx[j]], row, header[cov_idx[j]]));
  }
  ds.n = row;
  ds.validate();
  return ds;
}

inline void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UserError("cannot write file: " + path);
  out << ds.response_name;
  for (std::size_t j = 0; j < ds.d; ++j) {
    out << ',';
    out << (j < ds.covariate_names.size() ? ds.covariate_names[j]
                                          : "x" + std::to_string(j + 1));
  }
  out << '\n';
  char buf[64];
  for (std::size_t i = 0; i < ds.n; ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", ds.y[i]);
    out << buf;
    for (std::size_t j = 0; j < ds.d; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.cov(i, j));
      out << ',' << buf;
    }
    out << '\n';
  }
}

/// Builds a lagged design from a raw series: covariate column j holds the
/// (j+1)-lagged value, the response is the current value, and an optional
/// trailing trend column holds t/n over the effective sample.
inline Dataset lag_embed(const std::vector<double>& series, std::size_t lags,
                         bool with_trend) {
  if (lags == 0) throw UserError("lag_embed requires lags >= 1");
  if (series.size() <= lags)
    throw EmptyGridError("series of length " + std::to_string(series.size()) +
                         " leaves no rows after " + std::to_string(lags) + " lags");
  Dataset ds;
  ds.n = series.size() - lags;
  ds.d = lags + (with_trend ? 1 : 0);
  ds.y.reserve(ds.n);
  ds.x.reserve(ds.n * ds.d);
  for (std::size_t t = 0; t < ds.n; ++t) {
    ds.y.push_back(series[t + lags]);
    for (std::size_t j = 0; j < lags; ++j) ds.x.push_back(series[t + lags - 1 - j]);
    if (with_trend)
      ds.x.push_back(static_cast<double>(t + 1) / static_cast<double>(ds.n));
  }
  bool integer_lags = true;
  for (double v : series)
    if (v < 0.0 || v != std::floor(v)) integer_lags = false;
  for (std::size_t j = 0; j < lags; ++j) {
    ds.kinds.push_back(integer_lags ? DimKind::Discrete : DimKind::Continuous);
    ds.covariate_names.push_back("lag" + std::to_string(j + 1));
  }
  if (with_trend) {
    ds.kinds.push_back(DimKind::Trend);
    ds.covariate_names.push_back("trend");
  }
  ds.validate();
  return ds;
}

}  // namespace isorec
