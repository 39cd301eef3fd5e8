#include "momentset/scan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace momentset {

namespace {

// Distinct sorted values of v and the group index of each entry.
void group_by_value(const Eigen::Ref<const VectorXd>& v, std::vector<double>& values,
                    std::vector<Index>& group_of) {
  const Index n = v.size();
  std::vector<Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return v[a] < v[b]; });
  values.clear();
  group_of.assign(static_cast<size_t>(n), 0);
  for (Index r = 0; r < n; ++r) {
    const Index i = order[r];
    if (values.empty() || v[i] != values.back()) values.push_back(v[i]);
    group_of[i] = static_cast<Index>(values.size()) - 1;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// IntervalScan

IntervalScan::IntervalScan(const Eigen::Ref<const VectorXd>& x, Index d_y)
    : n_(x.size()), inv_n_(x.size() > 0 ? 1.0 / static_cast<double>(x.size()) : 0.0) {
  group_by_value(x, values_, group_of_);
  const size_t G = values_.size();
  sum_.assign(static_cast<size_t>(d_y), std::vector<double>(G + 1, 0.0));
  sq_.assign(static_cast<size_t>(d_y), std::vector<double>(G + 1, 0.0));
  witness_.assign(static_cast<size_t>(d_y), {0, 0});
}

void IntervalScan::load(Index j, const Eigen::Ref<const VectorXd>& m) {
  auto& P = sum_[j];
  auto& Q = sq_[j];
  std::fill(P.begin(), P.end(), 0.0);
  std::fill(Q.begin(), Q.end(), 0.0);
  for (Index i = 0; i < n_; ++i) {
    const size_t g = static_cast<size_t>(group_of_[i]) + 1;
    P[g] += m[i];
    Q[g] += m[i] * m[i];
  }
  for (size_t g = 1; g < P.size(); ++g) {
    P[g] += P[g - 1];
    Q[g] += Q[g - 1];
  }
}

BoxInstrument IntervalScan::instrument(Index a, Index b) const {
  BoxInstrument box{VectorXd(1), VectorXd(1)};
  box.lower[0] = a == 0 ? -kInf : values_[a - 1];
  box.upper[0] = values_[b - 1];
  return box;
}

void IntervalScan::moments(Index j, Index a, Index b, double& mu, double& var) const {
  mu = (sum_[j][b] - sum_[j][a]) * inv_n_;
  var = std::max(0.0, (sq_[j][b] - sq_[j][a]) * inv_n_ - mu * mu);
}

ScanHit IntervalScan::max_studentized(Index j, double floor) const {
  const double* P = sum_[j].data();
  const double* Q = sq_[j].data();
  const Index G = groups();
  const double inv = inv_n_;
  ScanHit best;
  for (Index a = 0; a < G; ++a) {
    const double pa = P[a], qa = Q[a];
    double row = -kInf;
    for (Index b = a + 1; b <= G; ++b) {
      const double mu = (P[b] - pa) * inv;
      const double var = (Q[b] - qa) * inv - mu * mu;
      const double den = std::max(std::sqrt(std::max(var, 0.0)), floor);
      row = std::max(row, -mu / den);
    }
    if (row > best.value) {
      ScanHit hit;
      for (Index b = a + 1; b <= G; ++b) {
        const double mu = (P[b] - pa) * inv;
        const double var = (Q[b] - qa) * inv - mu * mu;
        const double den = std::max(std::sqrt(std::max(var, 0.0)), floor);
        const double v = -mu / den;
        if (v > hit.value) hit = {v, a, b};
      }
      if (hit.value > best.value) best = hit;
    }
  }
  return best;
}

ScanHit IntervalScan::max_raw(Index j) const {
  const auto& P = sum_[j];
  const Index G = groups();
  ScanHit best;
  Index arg_hi = 0;
  for (Index b = 1; b <= G; ++b) {
    const double v = (P[arg_hi] - P[b]) * inv_n_;
    if (v > best.value) best = {v, arg_hi, b};
    if (P[b] > P[arg_hi]) arg_hi = b;
  }
  return best;
}

bool IntervalScan::studentized_exceeds(Index j, double thr, double floor) {
  const double* P = sum_[j].data();
  const double* Q = sq_[j].data();
  const Index G = groups();
  const double inv = inv_n_;
  const double t_floor = thr * floor;
  const double t2 = thr * thr;

  auto test = [&](Index a, Index b) {
    const double mu = (P[b] - P[a]) * inv;
    const double nm = -mu;
    const double var = (Q[b] - Q[a]) * inv - mu * mu;
    return nm > t_floor && nm > 0.0 && nm * nm > t2 * var;
  };

  auto& w = witness_[j];
  if (w.second > w.first && w.second <= G && test(w.first, w.second)) return true;

  // Row a can only contain a witness if its largest drop clears thr * floor.
  std::vector<double> suffix_min(static_cast<size_t>(G + 2), kInf);
  for (Index b = G; b >= 1; --b) suffix_min[b] = std::min(suffix_min[b + 1], P[b]);

  for (Index a = 0; a < G; ++a) {
    const double pa = P[a], qa = Q[a];
    if ((pa - suffix_min[a + 1]) * inv <= t_floor) continue;
    int hit = 0;
    for (Index b = a + 1; b <= G; ++b) {
      const double mu = (P[b] - pa) * inv;
      const double nm = -mu;
      const double var = (Q[b] - qa) * inv - mu * mu;
      hit |= static_cast<int>(nm > t_floor) & static_cast<int>(nm > 0.0) &
             static_cast<int>(nm * nm > t2 * var);
    }
    if (hit) {
      for (Index b = a + 1; b <= G; ++b) {
        if (test(a, b)) {
          w = {a, b};
          return true;
        }
      }
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// BoxScan

BoxScan::BoxScan(const Eigen::Ref<const MatrixXd>& x, Index d_y, Index corner_cap)
    : n_(x.rows()), inv_n_(x.rows() > 0 ? 1.0 / static_cast<double>(x.rows()) : 0.0) {
  if (x.cols() != 2) throw DimensionError("BoxScan expects two x columns");
  for (Index axis = 0; axis < 2; ++axis) {
    std::vector<double> values;
    std::vector<Index> group_of;
    group_by_value(x.col(axis), values, group_of);
    const Index G = static_cast<Index>(values.size());
    auto& cuts = cuts_[axis];
    if (corner_cap > 0 && G > corner_cap) {
      exact_ = false;
      // Evenly spaced ranks; the largest value is always a cut so every
      // observation falls in some cell.
      for (Index k = 1; k <= corner_cap; ++k) {
        const Index r = (k * G) / corner_cap - 1;
        if (cuts.empty() || values[r] != cuts.back()) cuts.push_back(values[r]);
      }
    } else {
      cuts = values;
    }
  }
  const Index K1 = cuts(1);
  cell_.resize(static_cast<size_t>(n_));
  for (Index i = 0; i < n_; ++i) {
    const Index c0 = std::lower_bound(cuts_[0].begin(), cuts_[0].end(), x(i, 0)) - cuts_[0].begin();
    const Index c1 = std::lower_bound(cuts_[1].begin(), cuts_[1].end(), x(i, 1)) - cuts_[1].begin();
    cell_[i] = c0 * K1 + c1;
  }
  const size_t table = static_cast<size_t>((cuts(0) + 1) * (K1 + 1));
  sum_.assign(static_cast<size_t>(d_y), std::vector<double>(table, 0.0));
  sq_.assign(static_cast<size_t>(d_y), std::vector<double>(table, 0.0));
  witness_.assign(static_cast<size_t>(d_y), ScanHit{});
}

void BoxScan::load(Index j, const Eigen::Ref<const VectorXd>& m) {
  const Index K1 = cuts(1);
  const Index w = K1 + 1;
  auto& S = sum_[j];
  auto& Q = sq_[j];
  std::fill(S.begin(), S.end(), 0.0);
  std::fill(Q.begin(), Q.end(), 0.0);
  for (Index i = 0; i < n_; ++i) {
    const Index c0 = cell_[i] / K1, c1 = cell_[i] % K1;
    S[(c0 + 1) * w + (c1 + 1)] += m[i];
    Q[(c0 + 1) * w + (c1 + 1)] += m[i] * m[i];
  }
  for (Index r = 1; r <= cuts(0); ++r) {
    for (Index c = 1; c <= K1; ++c) {
      const Index k = r * w + c;
      S[k] += S[k - w] + S[k - 1] - S[k - w - 1];
      Q[k] += Q[k - w] + Q[k - 1] - Q[k - w - 1];
    }
  }
}

BoxInstrument BoxScan::instrument(const ScanHit& h) const {
  BoxInstrument box{VectorXd(2), VectorXd(2)};
  box.lower[0] = h.a == 0 ? -kInf : cuts_[0][h.a - 1];
  box.upper[0] = cuts_[0][h.b - 1];
  box.lower[1] = h.a1 == 0 ? -kInf : cuts_[1][h.a1 - 1];
  box.upper[1] = cuts_[1][h.b1 - 1];
  return box;
}

void BoxScan::moments(Index j, const ScanHit& h, double& mu, double& var) const {
  mu = box_sum(sum_[j], h.a, h.b, h.a1, h.b1) * inv_n_;
  var = std::max(0.0, box_sum(sq_[j], h.a, h.b, h.a1, h.b1) * inv_n_ - mu * mu);
}

ScanHit BoxScan::max_studentized(Index j, double floor) const {
  ScanHit best;
  const Index K0 = cuts(0), K1 = cuts(1);
  for (Index a0 = 0; a0 < K0; ++a0)
    for (Index b0 = a0 + 1; b0 <= K0; ++b0)
      for (Index a1 = 0; a1 < K1; ++a1)
        for (Index b1 = a1 + 1; b1 <= K1; ++b1) {
          const double mu = box_sum(sum_[j], a0, b0, a1, b1) * inv_n_;
          const double var = box_sum(sq_[j], a0, b0, a1, b1) * inv_n_ - mu * mu;
          const double v = -mu / std::max(std::sqrt(std::max(var, 0.0)), floor);
          if (v > best.value) best = {v, a0, b0, a1, b1};
        }
  return best;
}

bool BoxScan::studentized_exceeds(Index j, double thr, double floor) {
  auto test = [&](Index a0, Index b0, Index a1, Index b1) {
    const double mu = box_sum(sum_[j], a0, b0, a1, b1) * inv_n_;
    const double var = box_sum(sq_[j], a0, b0, a1, b1) * inv_n_ - mu * mu;
    const double nm = -mu;
    return nm > thr * floor && nm > 0.0 && nm * nm > thr * thr * var;
  };
  ScanHit& w = witness_[j];
  if (w.b > w.a && w.b1 > w.a1 && test(w.a, w.b, w.a1, w.b1)) return true;
  const Index K0 = cuts(0), K1 = cuts(1);
  for (Index a0 = 0; a0 < K0; ++a0)
    for (Index b0 = a0 + 1; b0 <= K0; ++b0)
      for (Index a1 = 0; a1 < K1; ++a1)
        for (Index b1 = a1 + 1; b1 <= K1; ++b1)
          if (test(a0, b0, a1, b1)) {
            w = {0.0, a0, b0, a1, b1};
            return true;
          }
  return false;
}

bool BoxScan::raw_exceeds(Index j, double thr) {
  auto test = [&](Index a0, Index b0, Index a1, Index b1) {
    return -box_sum(sum_[j], a0, b0, a1, b1) * inv_n_ > thr;
  };
  ScanHit& w = witness_[j];
  if (w.b > w.a && w.b1 > w.a1 && test(w.a, w.b, w.a1, w.b1)) return true;
  const Index K0 = cuts(0), K1 = cuts(1);
  for (Index a0 = 0; a0 < K0; ++a0)
    for (Index b0 = a0 + 1; b0 <= K0; ++b0)
      for (Index a1 = 0; a1 < K1; ++a1)
        for (Index b1 = a1 + 1; b1 <= K1; ++b1)
          if (test(a0, b0, a1, b1)) {
            w = {0.0, a0, b0, a1, b1};
            return true;
          }
  return false;
}

}  // namespace momentset
