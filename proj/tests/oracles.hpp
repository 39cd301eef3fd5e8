#pragma once

// Independent brute-force references and random generators for the tests.

#include "momentset/core.hpp"
#include "momentset/ksstat.hpp"
#include "momentset/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using namespace momentset;

// Two-pass mean and sd (divisor n) of m_j g over the sample.
inline std::pair<VectorXd, VectorXd> two_pass(const Sample& s, const MomentModel& m,
                                              const VectorXd& theta, const Instrument& g) {
  const Index n = s.n(), dy = m.d_y();
  std::vector<VectorXd> v(n);
  for (Index i = 0; i < n; ++i) {
    const VectorXd x = s.x().row(i).transpose();
    const VectorXd w = s.w().row(i).transpose();
    v[i] = m.eval(x, w, theta) * eval_instrument(g, x);
  }
  VectorXd mu = VectorXd::Zero(dy), sd = VectorXd::Zero(dy);
  for (Index i = 0; i < n; ++i) mu += v[i];
  mu /= static_cast<double>(n);
  for (Index i = 0; i < n; ++i) sd += (v[i] - mu).cwiseAbs2();
  sd = (sd / static_cast<double>(n)).cwiseSqrt();
  return {mu, sd};
}

// sup over every interval (a, b] cut from the data, a in {-inf} u X, b in X,
// of S(mu_j / (sd_j v floor)); floor <= 0 means no studentization.
inline double brute_interval_stat(const Sample& s, const MomentModel& m, const VectorXd& theta,
                                  const SFunction& sf, double floor) {
  std::vector<double> xs(s.x().data(), s.x().data() + s.n());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::vector<double> lows{-kInf};
  lows.insert(lows.end(), xs.begin(), xs.end());
  double best = 0.0;
  for (double a : lows) {
    for (double b : xs) {
      if (!(b > a)) continue;
      BoxInstrument box{VectorXd::Constant(1, a), VectorXd::Constant(1, b)};
      const auto [mu, sd] = two_pass(s, m, theta, box);
      VectorXd t(mu.size());
      for (Index j = 0; j < mu.size(); ++j) t[j] = floor > 0 ? mu[j] / std::max(sd[j], floor) : mu[j];
      best = std::max(best, s_value(sf, t));
    }
  }
  return best;
}

// Direct Nadaraya-Watson sum.
inline VectorXd brute_kernel_mean(const Sample& s, const MomentModel& m, const VectorXd& theta,
                                  const VectorXd& x0, KernelId k, double h) {
  VectorXd num = VectorXd::Zero(m.d_y());
  double den = 0.0;
  for (Index i = 0; i < s.n(); ++i) {
    const VectorXd x = s.x().row(i).transpose();
    const double wgt = kernel_value(k, VectorXd((x - x0) / h));
    if (wgt == 0.0) continue;
    num += wgt * m.eval(x, s.w().row(i).transpose(), theta);
    den += wgt;
  }
  return num / den;
}

inline double brute_directed(const MatrixXd& a, const MatrixXd& b) {
  if (a.rows() == 0) return 0.0;
  if (b.rows() == 0) return kInf;
  double worst = 0.0;
  for (Index i = 0; i < a.rows(); ++i) {
    double best = kInf;
    for (Index k = 0; k < b.rows(); ++k) best = std::min(best, (a.row(i) - b.row(k)).norm());
    worst = std::max(worst, best);
  }
  return worst;
}

inline double brute_hausdorff(const MatrixXd& a, const MatrixXd& b) {
  if (a.rows() == 0 && b.rows() == 0) return 0.0;
  return std::max(brute_directed(a, b), brute_directed(b, a));
}

// ---------------------------------------------------------------------------
// Generators

inline MatrixXd uniform_matrix(std::mt19937_64& rng, Index rows, Index cols, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index k = 0; k < cols; ++k) m(i, k) = u(rng);
  return m;
}

// x ~ U(-1, 1) rounded to a coarse lattice when `ties` so that repeated x
// values occur; W^H = 1 + x + noise, W^L = W^H - |noise'| - shift.
inline Sample interval_sample(std::mt19937_64& rng, Index n, bool ties = false) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  MatrixXd x(n, 1), w(n, 2);
  for (Index i = 0; i < n; ++i) {
    double xi = u(rng);
    if (ties) xi = std::round(xi * 4.0) / 4.0;
    const double hi = 1.0 + xi + z(rng);
    x(i, 0) = xi;
    w(i, 1) = hi;
    w(i, 0) = hi - std::abs(z(rng)) - 0.5;
  }
  return Sample(x, w);
}

// Quantile-type interval sample with some fully censored outcomes.
inline Sample censored_sample(std::mt19937_64& rng, Index n, double miss = 0.2) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), p(0.0, 1.0);
  MatrixXd x(n, 1), w(n, 2);
  for (Index i = 0; i < n; ++i) {
    const double xi = u(rng);
    const double y = 0.25 + 0.5 * xi + u(rng);
    const bool missing = p(rng) < miss;
    x(i, 0) = xi;
    w(i, 0) = missing ? -kInf : y;
    w(i, 1) = missing ? kInf : y;
  }
  return Sample(x, w);
}

inline Sample one_sided_sample(std::mt19937_64& rng, Index n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  MatrixXd x(n, 1), w(n, 1);
  for (Index i = 0; i < n; ++i) {
    x(i, 0) = u(rng);
    w(i, 0) = x(i, 0) * x(i, 0) + z(rng);
  }
  return Sample(x, w);
}

inline ModelSpec spec_of(ModelKind kind, double lo = -5.0, double hi = 5.0) {
  ModelSpec s;
  s.kind = kind;
  s.dx = 1;
  s.theta_box.lower = VectorXd::Constant(2, lo);
  s.theta_box.upper = VectorXd::Constant(2, hi);
  return s;
}

}  // namespace oracle
