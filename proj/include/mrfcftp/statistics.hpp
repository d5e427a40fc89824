// Copyright 2026 The mrfcftp Authors - All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef MRFCFTP_STATISTICS_HPP
#define MRFCFTP_STATISTICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <json.hpp>

#include "mrfcftp/errors.hpp"

namespace mrfcftp {

struct LogLinearFit {
  double slope = 0.0, intercept = 0.0, residual = 0.0;
  std::size_t points = 0;
};

// Least squares of log(y) on x, ignoring y <= 0. Residual is the RMS of
// the log deviations.
inline LogLinearFit fit_log_linear(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> xs, ls;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (y[i] > 0.0 && std::isfinite(y[i])) {
      xs.push_back(x[i]);
      ls.push_back(std::log(y[i]));
    }
  LogLinearFit f;
  f.points = xs.size();
  if (xs.size() < 2) return f;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ls[i];
  }
  mx /= xs.size();
  my /= xs.size();
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ls[i] - my);
  }
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double r = ls[i] - (f.intercept + f.slope * xs[i]);
    ss += r * r;
  }
  f.residual = std::sqrt(ss / xs.size());
  return f;
}

// Upper tail of the chi-square distribution.
inline double chi_square_sf(double stat, double dof) {
  if (dof <= 0) return 1.0;
  if (stat <= 0) return 1.0;
  return boost::math::gamma_q(dof / 2.0, stat / 2.0);
}

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  std::size_t cells = 0;
};

// Pearson goodness of fit. Cells are taken in decreasing expected count
// and merged until each pooled cell expects at least min_expected.
inline ChiSquareResult chi_square_gof(const std::vector<std::uint64_t>& observed,
                                      const std::vector<double>& probs, double min_expected = 5.0) {
  if (observed.size() != probs.size()) throw ContractError("chi-square size mismatch");
  std::uint64_t n = 0;
  for (auto o : observed) n += o;
  if (n == 0) throw ContractError("chi-square with no observations");
  std::vector<std::size_t> order(probs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  std::vector<double> e_cells, o_cells;
  double e = 0.0, o = 0.0;
  for (std::size_t i : order) {
    if (probs[i] <= 0.0 && observed[i] > 0) {
      ChiSquareResult r;
      r.statistic = std::numeric_limits<double>::infinity();
      r.p_value = 0.0;
      return r;
    }
    e += probs[i] * n;
    o += observed[i];
    if (e >= min_expected) {
      e_cells.push_back(e);
      o_cells.push_back(o);
      e = o = 0.0;
    }
  }
  if (e > 0.0 || o > 0.0) {
    if (e_cells.empty()) {
      e_cells.push_back(e);
      o_cells.push_back(o);
    } else {
      e_cells.back() += e;
      o_cells.back() += o;
    }
  }
  ChiSquareResult r;
  r.cells = e_cells.size();
  for (std::size_t i = 0; i < e_cells.size(); ++i)
    r.statistic += (o_cells[i] - e_cells[i]) * (o_cells[i] - e_cells[i]) / e_cells[i];
  r.dof = static_cast<int>(e_cells.size()) - 1;
  r.p_value = chi_square_sf(r.statistic, r.dof);
  return r;
}

// Total variation between empirical counts and a law.
inline double empirical_tv(const std::vector<std::uint64_t>& observed, const std::vector<double>& probs) {
  std::uint64_t n = 0;
  for (auto o : observed) n += o;
  double s = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) s += std::abs(double(observed[i]) / n - probs[i]);
  return 0.5 * s;
}

// Two-sided Kolmogorov-Smirnov critical value, asymptotic form.
inline double ks_critical(double alpha, std::size_t n) {
  return std::sqrt(-std::log(alpha / 2.0) / 2.0) / std::sqrt(static_cast<double>(n));
}

// Two-sample KS statistic.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

inline double binomial_se(double p, std::size_t n) { return std::sqrt(std::max(p * (1 - p), 0.0) / n); }

// Geometric law on {1, 2, ...} with success probability beta: maximum
// likelihood estimate and the log-survival slope log(1 - beta) with its
// delta-method standard error.
struct GeometricFit {
  double beta = 0.0, beta_se = 0.0;
  double slope = 0.0, slope_se = 0.0;
  std::size_t n = 0;
};

inline GeometricFit fit_geometric(const std::vector<std::uint32_t>& times) {
  GeometricFit g;
  g.n = times.size();
  if (times.empty()) throw ContractError("geometric fit with no samples");
  double mean = 0.0;
  for (auto t : times) mean += t;
  mean /= times.size();
  if (mean < 1.0) throw ContractError("geometric fit needs times >= 1");
  g.beta = 1.0 / mean;
  g.beta_se = std::sqrt(g.beta * g.beta * (1 - g.beta) / times.size());
  g.slope = std::log1p(-g.beta);
  g.slope_se = g.beta_se / (1 - g.beta);
  return g;
}

// Empirical survival curve of a stopping time with censoring at the cap.
struct TailRow {
  std::uint32_t n = 0;
  std::uint64_t survivors = 0;
  double survival = 0.0, ci_low = 0.0, ci_high = 0.0;
};

struct TailTable {
  std::vector<TailRow> rows;
  std::uint64_t replicas = 0, censored = 0;
  LogLinearFit fit;
  GeometricFit geometric;
  double fit_floor = 0.0;

  std::string to_csv() const {
    std::ostringstream os;
    os.precision(10);
    os << "n,survivors,survival,ci_low,ci_high\n";
    for (const auto& r : rows)
      os << r.n << ',' << r.survivors << ',' << r.survival << ',' << r.ci_low << ',' << r.ci_high << '\n';
    return os.str();
  }

  nlohmann::json summary() const {
    return {{"replicas", replicas},
            {"censored", censored},
            {"fit_floor", fit_floor},
            {"slope", fit.slope},
            {"intercept", fit.intercept},
            {"rms_log_residual", fit.residual},
            {"fit_points", fit.points},
            {"geometric_beta", geometric.beta},
            {"geometric_slope", geometric.slope},
            {"geometric_slope_se", geometric.slope_se}};
  }
};

// Survival Pr(T > n) on a grid of `points` evenly spaced n up to the last
// n whose survival is at least `floor`. Censored draws count as surviving
// past every n below the cap. The log-linear fit uses grid points from
// `fit_from` on. The geometric fit uses uncensored draws only.
inline TailTable tail_table(const std::vector<std::uint32_t>& times, const std::vector<bool>& censored,
                            double floor = 1e-3, std::size_t points = 60, double fit_from = 0.0) {
  TailTable tab;
  tab.replicas = times.size();
  tab.fit_floor = floor;
  if (times.empty()) return tab;
  std::vector<std::uint32_t> sorted(times);
  std::sort(sorted.begin(), sorted.end());
  for (bool c : censored) tab.censored += c;
  const std::size_t N = times.size();
  // Largest n with Pr(T > n) >= floor.
  const std::size_t keep = static_cast<std::size_t>(std::ceil(floor * N));
  const std::uint32_t n_max = keep == 0 ? sorted.back() : sorted[N - std::min(keep, N)];
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k <= points; ++k) {
    const std::uint32_t n = static_cast<std::uint32_t>(std::llround(double(n_max) * k / points));
    if (!tab.rows.empty() && tab.rows.back().n == n) continue;
    TailRow r;
    r.n = n;
    r.survivors = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), n);
    r.survival = double(r.survivors) / N;
    const double se = binomial_se(r.survival, N);
    r.ci_low = std::max(0.0, r.survival - 1.96 * se);
    r.ci_high = std::min(1.0, r.survival + 1.96 * se);
    tab.rows.push_back(r);
    if (n >= fit_from * n_max && r.survival >= floor) {
      xs.push_back(n);
      ys.push_back(r.survival);
    }
  }
  tab.fit = fit_log_linear(xs, ys);
  std::vector<std::uint32_t> pos;
  for (std::size_t i = 0; i < N; ++i)
    if (times[i] >= 1 && !(i < censored.size() && censored[i])) pos.push_back(times[i]);
  if (!pos.empty()) tab.geometric = fit_geometric(pos);
  return tab;
}

}  // namespace mrfcftp

#endif  // MRFCFTP_STATISTICS_HPP
