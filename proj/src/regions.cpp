#include "momentset/regions.hpp"

#include <functional>

namespace momentset {

ThetaGrid::ThetaGrid(std::vector<VectorXd> axes) : axes_(std::move(axes)) {
  if (axes_.empty()) throw ConfigError("grid", "grid needs at least one axis");
  size_ = 1;
  for (size_t k = 0; k < axes_.size(); ++k) {
    const VectorXd& ax = axes_[k];
    if (ax.size() == 0) throw ConfigError("grid", "axis " + std::to_string(k) + " is empty");
    for (Index i = 1; i < ax.size(); ++i) {
      if (!(ax[i] > ax[i - 1])) {
        throw ConfigError("grid", "breakpoints on axis " + std::to_string(k) +
                                      " must be strictly increasing");
      }
    }
    size_ *= ax.size();
  }
}

ThetaGrid ThetaGrid::uniform(const VectorXd& lower, const VectorXd& upper, const VectorXd& pitch) {
  if (lower.size() != upper.size() || lower.size() != pitch.size()) {
    throw ConfigError("grid", "lower, upper and pitch must have the same length");
  }
  std::vector<VectorXd> axes;
  for (Index k = 0; k < lower.size(); ++k) {
    if (!(upper[k] >= lower[k])) throw ConfigError("grid.upper", "upper below lower");
    if (upper[k] == lower[k]) {
      axes.push_back(VectorXd::Constant(1, lower[k]));
      continue;
    }
    if (!(pitch[k] > 0.0)) throw ConfigError("grid.pitch", "pitch must be positive");
    const Index count = static_cast<Index>(std::floor((upper[k] - lower[k]) / pitch[k] + 0.5)) + 1;
    VectorXd ax(count);
    // Multiply rather than accumulate so breakpoints do not drift.
    for (Index i = 0; i < count; ++i) ax[i] = lower[k] + static_cast<double>(i) * pitch[k];
    axes.push_back(std::move(ax));
  }
  return ThetaGrid(std::move(axes));
}

VectorXd ThetaGrid::point(Index idx) const {
  VectorXd p(dim());
  for (Index k = 0; k < dim(); ++k) {
    const Index m = axes_[k].size();
    p[k] = axes_[k][idx % m];
    idx /= m;
  }
  return p;
}

Index ThetaGrid::index(const std::vector<Index>& multi) const {
  Index idx = 0;
  for (Index k = dim() - 1; k >= 0; --k) idx = idx * axes_[k].size() + multi[k];
  return idx;
}

std::vector<Index> ThetaGrid::multi_index(Index idx) const {
  std::vector<Index> m(static_cast<size_t>(dim()));
  for (Index k = 0; k < dim(); ++k) {
    m[k] = idx % axes_[k].size();
    idx /= axes_[k].size();
  }
  return m;
}

MatrixXd ThetaGrid::points() const {
  MatrixXd out(size_, dim());
  for (Index p = 0; p < size_; ++p) out.row(p) = point(p).transpose();
  return out;
}

double ThetaGrid::half_diagonal() const {
  double acc = 0.0;
  for (const auto& ax : axes_) {
    double widest = 0.0;
    for (Index i = 1; i < ax.size(); ++i) widest = std::max(widest, ax[i] - ax[i - 1]);
    acc += 0.25 * widest * widest;
  }
  return std::sqrt(acc);
}

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::weighted_ks:
      return "weighted_ks";
    case Estimator::bounded_ks:
      return "bounded_ks";
    case Estimator::kernel:
      return "kernel";
  }
  return "?";
}

Estimator estimator_from_string(const std::string& s) {
  for (auto e : {Estimator::weighted_ks, Estimator::bounded_ks, Estimator::kernel}) {
    if (to_string(e) == s) return e;
  }
  throw ConfigError("estimators", "unknown estimator '" + s + "'");
}

std::string to_string(RegionStrategy s) {
  switch (s) {
    case RegionStrategy::automatic:
      return "automatic";
    case RegionStrategy::exhaustive:
      return "exhaustive";
    case RegionStrategy::decision:
      return "decision";
    case RegionStrategy::slice_search:
      return "slice_search";
  }
  return "?";
}

RegionStrategy region_strategy_from_string(const std::string& s) {
  for (auto v : {RegionStrategy::automatic, RegionStrategy::exhaustive, RegionStrategy::decision,
                 RegionStrategy::slice_search}) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("strategy", "unknown region strategy '" + s + "'");
}

Index ConfidenceRegion::count() const {
  Index c = 0;
  for (auto m : member) c += m ? 1 : 0;
  return c;
}

MatrixXd ConfidenceRegion::member_points() const {
  MatrixXd out(count(), grid.dim());
  Index r = 0;
  for (Index p = 0; p < grid.size(); ++p) {
    if (member[p]) out.row(r++) = grid.point(p).transpose();
  }
  return out;
}

bool ConfidenceRegion::touches_grid_boundary() const {
  for (Index p = 0; p < grid.size(); ++p) {
    if (!member[p]) continue;
    const auto mi = grid.multi_index(p);
    for (Index k = 0; k < grid.dim(); ++k) {
      if (grid.axis_size(k) > 1 && (mi[k] == 0 || mi[k] == grid.axis_size(k) - 1)) return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Region construction

namespace {

// Smallest i in [0, n) with pred(i) true (n if none), for pred monotone
// false...true. Starts from `hint` and gallops outward.
Index first_true(Index n, Index hint, const std::function<bool(Index)>& pred) {
  if (n == 0) return 0;
  hint = std::clamp<Index>(hint, 0, n - 1);
  Index lo, hi;  // pred(lo - 1) false (or lo = 0), pred(hi) true (or hi = n)
  if (pred(hint)) {
    hi = hint;
    Index step = 1;
    lo = hint;
    while (true) {
      const Index probe = hi - step;
      if (probe < 0) {
        lo = 0;
        break;
      }
      if (pred(probe)) {
        hi = probe;
        step *= 2;
      } else {
        lo = probe + 1;
        break;
      }
    }
  } else {
    lo = hint + 1;
    Index step = 1;
    hi = n;
    while (true) {
      const Index probe = lo + step - 1;
      if (probe >= n) break;
      if (pred(probe)) {
        hi = probe;
        break;
      }
      lo = probe + 1;
      step *= 2;
    }
  }
  while (lo < hi) {
    const Index mid = lo + (hi - lo) / 2;
    if (pred(mid)) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

}  // namespace

ConfidenceRegion build_region(RegionCriterion& criterion, const ThetaGrid& grid, double c,
                              RegionStrategy strategy) {
  if (grid.size() == 0) throw DomainError("region over an empty grid");
  if (grid.dim() != criterion.model().theta_dim()) {
    throw DimensionError("grid dimension " + std::to_string(grid.dim()) + " != theta dimension " +
                         std::to_string(criterion.model().theta_dim()));
  }
  ConfidenceRegion region;
  region.grid = grid;
  region.c_used = c;
  region.member.assign(static_cast<size_t>(grid.size()), 0);
  region.stat = VectorXd::Constant(grid.size(), std::numeric_limits<double>::quiet_NaN());

  bool slices = false;
  if (strategy == RegionStrategy::slice_search) {
    if (!criterion.slice_monotone()) {
      throw ConfigError("strategy", "slice search needs a criterion monotone in the intercept");
    }
    slices = true;
  } else if (strategy == RegionStrategy::automatic) {
    slices = criterion.slice_monotone();
  }

  if (strategy == RegionStrategy::exhaustive) {
    for (Index p = 0; p < grid.size(); ++p) {
      const double v = criterion.scaled_statistic(grid.point(p));
      region.stat[p] = v;
      region.member[p] = v <= c ? 1 : 0;
    }
    return region;
  }
  if (!slices) {
    for (Index p = 0; p < grid.size(); ++p) {
      region.member[p] = criterion.violates(grid.point(p), c, 0) ? 0 : 1;
    }
    return region;
  }

  const Index n0 = grid.axis_size(0);
  const Index n_slices = grid.size() / n0;
  Index hint_hi = n0 / 2, hint_lo = n0 / 2;
  for (Index s = 0; s < n_slices; ++s) {
    const Index base = s * n0;
    VectorXd theta = grid.point(base);
    auto at = [&](Index i) {
      theta[0] = grid.axis(0)[i];
      return theta;
    };
    // Components whose violations grow with the intercept bound the slice
    // from above; the others bound it from below.
    const Index hi_end = first_true(n0, hint_hi, [&](Index i) {
      return criterion.violates(at(i), c, -1);
    });
    Index lo = n0;
    if (hi_end > 0) {
      // lo <= hi_end - 1 iff the top candidate passes the lower bound test.
      lo = first_true(hi_end, std::min(hint_lo, hi_end - 1),
                      [&](Index i) { return !criterion.violates(at(i), c, +1); });
    }
    for (Index i = lo; i < hi_end; ++i) region.member[base + i] = 1;
    if (hi_end > 0) hint_hi = hi_end;
    if (lo < hi_end) hint_lo = lo;
  }
  return region;
}

ConfidenceRegion confidence_region(const Sample& sample, const MomentModel& model,
                                   const ThetaGrid& grid, const InstrumentFamily& family,
                                   const SFunction& s, const TuningPolicy& tuning,
                                   RegionStrategy strategy) {
  auto criterion = make_weighted_criterion(sample, model, family, s, tuning);
  ConfidenceRegion r = build_region(*criterion, grid, critical_value(tuning, sample.n()), strategy);
  r.estimator = Estimator::weighted_ks;
  return r;
}

// ---------------------------------------------------------------------------
// Geometry

SetDistanceReport hausdorff(const ThetaGrid& grid, const std::vector<std::uint8_t>& a,
                            const std::vector<std::uint8_t>& b) {
  auto collect = [&](const std::vector<std::uint8_t>& mask) {
    Index count = 0;
    for (auto v : mask) count += v ? 1 : 0;
    MatrixXd pts(count, grid.dim());
    Index r = 0;
    for (Index p = 0; p < grid.size(); ++p) {
      if (mask[p]) pts.row(r++) = grid.point(p).transpose();
    }
    return pts;
  };
  if (static_cast<Index>(a.size()) != grid.size() || static_cast<Index>(b.size()) != grid.size()) {
    throw DimensionError("membership masks do not match the grid");
  }
  return hausdorff(collect(a), collect(b));
}

double hausdorff_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) return kInf;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  auto directed = [](const std::vector<double>& from, const std::vector<double>& to) {
    double worst = 0.0;
    for (double v : from) {
      auto it = std::lower_bound(to.begin(), to.end(), v);
      double d = kInf;
      if (it != to.end()) d = *it - v;
      if (it != to.begin()) d = std::min(d, v - *std::prev(it));
      worst = std::max(worst, d);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

Projection project(const ThetaGrid& grid, const std::vector<std::uint8_t>& member, Index axis) {
  if (axis < 0 || axis >= grid.dim()) throw DimensionError("projection axis out of range");
  std::vector<std::uint8_t> seen(static_cast<size_t>(grid.axis_size(axis)), 0);
  for (Index p = 0; p < grid.size(); ++p) {
    if (member[p]) seen[grid.multi_index(p)[axis]] = 1;
  }
  Projection out;
  for (Index i = 0; i < grid.axis_size(axis); ++i) {
    if (seen[i]) out.values.push_back(grid.axis(axis)[i]);
  }
  if (!out.values.empty()) {
    out.lower = out.values.front();
    out.upper = out.values.back();
  }
  return out;
}

}  // namespace momentset
