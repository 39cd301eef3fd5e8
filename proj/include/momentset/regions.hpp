#pragma once

#include "momentset/core.hpp"
#include "momentset/ksstat.hpp"

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <string>
#include <vector>

namespace momentset {

/// Cartesian grid over the parameter box. Points are indexed with axis 0
/// varying fastest.
class ThetaGrid {
 public:
  ThetaGrid() = default;
  explicit ThetaGrid(std::vector<VectorXd> axes);

  /// Breakpoints lower, lower + pitch, ... up to upper (inclusive within
  /// half a pitch) on every axis.
  static ThetaGrid uniform(const VectorXd& lower, const VectorXd& upper, const VectorXd& pitch);

  Index dim() const { return static_cast<Index>(axes_.size()); }
  Index size() const { return size_; }
  Index axis_size(Index k) const { return axes_[k].size(); }
  const VectorXd& axis(Index k) const { return axes_[k]; }

  VectorXd point(Index idx) const;
  Index index(const std::vector<Index>& multi) const;
  std::vector<Index> multi_index(Index idx) const;

  /// n_points x dim matrix of all grid points.
  MatrixXd points() const;

  /// Half-diagonal of one cell: the largest distance from a point of the
  /// box to its nearest grid point.
  double half_diagonal() const;

 private:
  std::vector<VectorXd> axes_;
  Index size_ = 0;
};

enum class Estimator { weighted_ks, bounded_ks, kernel };
std::string to_string(Estimator e);
Estimator estimator_from_string(const std::string& s);

/// Membership of grid points. Where `stat` is evaluated (not NaN),
/// member == (stat <= c_used). The decision and slice strategies settle
/// membership without computing the statistic and leave NaN.
struct ConfidenceRegion {
  ThetaGrid grid;
  std::vector<std::uint8_t> member;
  VectorXd stat;
  double c_used = 0.0;
  Estimator estimator = Estimator::weighted_ks;

  Index count() const;
  bool empty() const { return count() == 0; }
  /// Member points as rows.
  MatrixXd member_points() const;
  /// Whether some member sits on the outer boundary of the grid.
  bool touches_grid_boundary() const;
};

enum class RegionStrategy {
  automatic,     // slice search when the criterion is slice-monotone, else decision
  exhaustive,    // evaluate the statistic at every grid point
  decision,      // test "statistic > c" at every grid point, stopping scans early
  slice_search,  // requires a slice-monotone criterion
};

std::string to_string(RegionStrategy s);
RegionStrategy region_strategy_from_string(const std::string& s);

/// Builds {theta in grid : criterion's scaled statistic <= c}.
///
/// The slice search fixes all non-intercept coordinates and locates the
/// membership interval along axis 0 by galloping binary searches, using
/// that violations of each component are monotone in the intercept.
ConfidenceRegion build_region(RegionCriterion& criterion, const ThetaGrid& grid, double c,
                              RegionStrategy strategy = RegionStrategy::automatic);

/// {theta : sqrt(n / log n) T_n(theta) <= c_n}.
ConfidenceRegion confidence_region(const Sample& sample, const MomentModel& model,
                                   const ThetaGrid& grid, const InstrumentFamily& family,
                                   const SFunction& s, const TuningPolicy& tuning,
                                   RegionStrategy strategy = RegionStrategy::automatic);

// ---------------------------------------------------------------------------
// Set geometry

struct SetDistanceReport {
  double d_h = 0.0;
  double directed_ab = 0.0;  // sup_a inf_b
  double directed_ba = 0.0;
  bool empty_involved = false;
};

/// sup over rows a of A of the Euclidean distance to the nearest row of B.
/// +inf when B is empty and A is not; 0 when A is empty.
template <typename Derived1, typename Derived2>
typename Derived1::Scalar directed_hausdorff(const Eigen::MatrixBase<Derived1>& a,
                                             const Eigen::MatrixBase<Derived2>& b) {
  using Scalar = typename Derived1::Scalar;
  if (a.rows() == 0) return Scalar(0);
  if (b.rows() == 0) return std::numeric_limits<Scalar>::infinity();
  Scalar worst2(0);
  for (Index i = 0; i < a.rows(); ++i) {
    Scalar best2 = std::numeric_limits<Scalar>::infinity();
    for (Index k = 0; k < b.rows(); ++k) {
      const Scalar d2 = (a.row(i) - b.row(k)).squaredNorm();
      if (d2 < best2) {
        best2 = d2;
        // This a-row cannot raise the running maximum any further.
        if (best2 <= worst2) break;
      }
    }
    worst2 = std::max(worst2, best2);
  }
  return std::sqrt(worst2);
}

template <typename Derived1, typename Derived2>
SetDistanceReport hausdorff(const Eigen::MatrixBase<Derived1>& a,
                            const Eigen::MatrixBase<Derived2>& b) {
  SetDistanceReport r;
  r.empty_involved = a.rows() == 0 || b.rows() == 0;
  if (a.rows() == 0 && b.rows() == 0) return r;
  r.directed_ab = static_cast<double>(directed_hausdorff(a, b));
  r.directed_ba = static_cast<double>(directed_hausdorff(b, a));
  r.d_h = std::max(r.directed_ab, r.directed_ba);
  return r;
}

/// Hausdorff distance between two membership masks on the same grid.
SetDistanceReport hausdorff(const ThetaGrid& grid, const std::vector<std::uint8_t>& a,
                            const std::vector<std::uint8_t>& b);

/// Hausdorff distance between finite subsets of the real line.
double hausdorff_1d(std::vector<double> a, std::vector<double> b);

struct Projection {
  std::vector<double> values;  // sorted distinct coordinates of members
  double lower = std::numeric_limits<double>::quiet_NaN();
  double upper = std::numeric_limits<double>::quiet_NaN();
  bool empty() const { return values.empty(); }
};

/// Coordinate projection of the member set and its interval hull.
Projection project(const ThetaGrid& grid, const std::vector<std::uint8_t>& member, Index axis);
inline Projection project(const ConfidenceRegion& region, Index axis) {
  return project(region.grid, region.member, axis);
}

}  // namespace momentset
