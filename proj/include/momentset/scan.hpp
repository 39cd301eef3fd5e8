#pragma once

// Prefix-sum enumeration of the data-defined interval and box families.
//
// For an indicator instrument g, mu_hat and sigma_hat over (s, t] depend on
// (s, t) only through the set of observations it contains, so the supremum
// over all real intervals equals the maximum over intervals whose endpoints
// are distinct order statistics (lower endpoint possibly -inf). With the
// observations grouped by distinct x value and prefix sums of m and m^2 over
// the groups, each candidate costs O(1).

#include "momentset/core.hpp"

#include <vector>

namespace momentset {

/// Location of the best candidate found by a scan. Interval (a, b] covers
/// groups a..b-1; for boxes the second axis uses (a1, b1].
struct ScanHit {
  double value = -kInf;  // criterion value (may be negative: no violation)
  Index a = 0, b = 0;
  Index a1 = 0, b1 = 0;
};

/// One-dimensional interval family over a fixed x column.
///
/// `load` replaces the values of one component. Scratch state (prefix sums,
/// cached witnesses) is owned by the object; use one instance per thread.
class IntervalScan {
 public:
  IntervalScan(const Eigen::Ref<const VectorXd>& x, Index d_y);

  Index groups() const { return static_cast<Index>(values_.size()); }
  Index n() const { return n_; }
  const std::vector<double>& group_values() const { return values_; }

  /// Values m_j(W_i, theta) in original sample order.
  void load(Index j, const Eigen::Ref<const VectorXd>& m);

  /// Instrument for the interval (a, b].
  BoxInstrument instrument(Index a, Index b) const;

  /// Mean and variance (divisor n) of m_j * 1{(a,b]}.
  void moments(Index j, Index a, Index b, double& mu, double& var) const;

  /// max over intervals of -mu / max(sigma_hat, floor).
  ScanHit max_studentized(Index j, double floor) const;
  /// max over intervals of -mu (unit weights), O(groups).
  ScanHit max_raw(Index j) const;
  /// max over intervals of -omega(a, b) * mu for a caller-supplied weight.
  template <class Omega>
  ScanHit max_weighted(Index j, Omega&& omega) const;

  /// Whether some interval has -mu > thr * max(sigma_hat, floor). Stops at
  /// the first witness and remembers it for the next call on component j.
  bool studentized_exceeds(Index j, double thr, double floor);

 private:
  Index n_ = 0;
  double inv_n_ = 0.0;
  std::vector<Index> group_of_;  // original row -> group
  std::vector<double> values_;   // distinct sorted x
  std::vector<std::vector<double>> sum_;  // per component, size G + 1
  std::vector<std::vector<double>> sq_;
  std::vector<std::pair<Index, Index>> witness_;
};

template <class Omega>
ScanHit IntervalScan::max_weighted(Index j, Omega&& omega) const {
  const auto& P = sum_[j];
  const Index G = groups();
  ScanHit best;
  for (Index a = 0; a < G; ++a) {
    for (Index b = a + 1; b <= G; ++b) {
      const double mu = (P[b] - P[a]) * inv_n_;
      const double v = -omega(a, b) * mu;
      if (v > best.value) best = {v, a, b};
    }
  }
  return best;
}

/// Two-dimensional half-open boxes with corners at (optionally thinned)
/// order statistics of each coordinate.
class BoxScan {
 public:
  /// `corner_cap > 0` keeps at most that many cut points per axis.
  BoxScan(const Eigen::Ref<const MatrixXd>& x, Index d_y, Index corner_cap);

  Index cuts(Index axis) const { return static_cast<Index>(cuts_[axis].size()); }
  bool exact() const { return exact_; }

  void load(Index j, const Eigen::Ref<const VectorXd>& m);
  BoxInstrument instrument(const ScanHit& h) const;
  void moments(Index j, const ScanHit& h, double& mu, double& var) const;

  ScanHit max_studentized(Index j, double floor) const;
  template <class Omega>
  ScanHit max_weighted(Index j, Omega&& omega) const;

  bool studentized_exceeds(Index j, double thr, double floor);
  bool raw_exceeds(Index j, double thr);

 private:
  double box_sum(const std::vector<double>& s, Index a0, Index b0, Index a1, Index b1) const {
    const Index w = cuts(1) + 1;
    return s[b0 * w + b1] - s[a0 * w + b1] - s[b0 * w + a1] + s[a0 * w + a1];
  }

  Index n_ = 0;
  double inv_n_ = 0.0;
  bool exact_ = true;
  std::vector<double> cuts_[2];
  std::vector<Index> cell_;  // row -> (c0 * K1 + c1)
  std::vector<std::vector<double>> sum_;  // (K0+1) x (K1+1) prefix tables
  std::vector<std::vector<double>> sq_;
  std::vector<ScanHit> witness_;
};

template <class Omega>
ScanHit BoxScan::max_weighted(Index j, Omega&& omega) const {
  ScanHit best;
  const Index K0 = cuts(0), K1 = cuts(1);
  for (Index a0 = 0; a0 < K0; ++a0)
    for (Index b0 = a0 + 1; b0 <= K0; ++b0)
      for (Index a1 = 0; a1 < K1; ++a1)
        for (Index b1 = a1 + 1; b1 <= K1; ++b1) {
          ScanHit h{0.0, a0, b0, a1, b1};
          const double mu = box_sum(sum_[j], a0, b0, a1, b1) * inv_n_;
          const double v = -omega(h) * mu;
          if (v > best.value) {
            best = h;
            best.value = v;
          }
        }
  return best;
}

}  // namespace momentset
