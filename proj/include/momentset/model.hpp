#pragma once

#include "momentset/core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace momentset {

/// Closed per-coordinate bounds of the parameter space.
struct ThetaBox {
  VectorXd lower;
  VectorXd upper;

  Index dim() const { return lower.size(); }
  bool contains(const Eigen::Ref<const VectorXd>& theta, double tol = 1e-12) const;
  bool is_bounded() const { return lower.allFinite() && upper.allFinite(); }
};

enum class ModelKind {
  one_sided_regression,  // m = W^H - th1 - x'th_{-1}
  interval_regression,   // m = (W^H - line, line - W^L)
  one_sided_quantile,    // m = tau - I(W^H <= line)
  interval_quantile,     // m = (tau - I(W^H <= line), I(W^L <= line) - tau)
  selection,             // m = (gamma - W^L, W^H - gamma)
};

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

/// Declarative description of a bundled moment model.
///
/// W columns by kind: one-sided kinds take (W^H); interval kinds and
/// selection take (W^L, W^H). Regression kinds use theta = (intercept,
/// slopes...) with `dx` slopes; selection uses theta = (gamma).
///
/// For mean kinds `outcome_bound` (|W| <= B) and `regressor_bound`
/// (|x_k| <= B_x) enter the moment bound Ybar; leave them infinite when no
/// bound is known.
struct ModelSpec {
  ModelKind kind = ModelKind::interval_quantile;
  Index dx = 1;
  double tau = 0.5;
  double y_lower = 0.0;  // selection only
  double y_upper = 1.0;  // selection only
  ThetaBox theta_box;
  double outcome_bound = kInf;
  double regressor_bound = kInf;
};

/// The map (x, w, theta) -> m(w, theta) in R^{d_Y} with its parameter space
/// and bound Ybar. Immutable; evaluation is pure.
class MomentModel {
 public:
  const ModelSpec& spec() const { return spec_; }
  ModelKind kind() const { return spec_.kind; }
  Index d_y() const { return d_y_; }
  Index d_w() const { return d_w_; }
  Index d_x() const { return spec_.dx; }
  Index theta_dim() const { return spec_.theta_box.dim(); }
  const ThetaBox& theta_box() const { return spec_.theta_box; }
  double y_bar() const { return y_bar_; }

  bool is_quantile() const;
  bool is_regression() const { return spec_.kind != ModelKind::selection; }

  /// Moment vector for one observation, with shape and finiteness checks.
  VectorXd eval(const Eigen::Ref<const VectorXd>& x_row,
                const Eigen::Ref<const VectorXd>& w_row,
                const Eigen::Ref<const VectorXd>& theta) const;

  /// Component j of m(W_i, theta) for every row of the sample. No checks;
  /// call `validate` once per sample.
  void eval_component(const Sample& sample, const Eigen::Ref<const VectorXd>& theta, Index j,
                      Eigen::Ref<VectorXd> out) const;

  /// n x d_Y matrix of moments.
  MatrixXd eval_sample(const Sample& sample, const Eigen::Ref<const VectorXd>& theta) const;

  /// Shape checks, and rejection of +-inf for mean kinds.
  void validate(const Sample& sample) const;

  /// For regression kinds, sign of the pointwise dependence of each m_j on
  /// the intercept: -1 when m_j is nonincreasing in theta_1 (its violations
  /// grow as the intercept rises), +1 when nondecreasing. Empty for
  /// selection.
  std::optional<std::vector<int>> intercept_direction() const;

  /// True when each m_j takes at most two values ({tau-1, tau} or
  /// {-tau, 1-tau}) on any sample.
  bool two_valued() const { return is_quantile(); }

 private:
  friend MomentModel build_model(const ModelSpec& spec);
  explicit MomentModel(ModelSpec spec);

  double line(const Eigen::Ref<const VectorXd>& x_row,
              const Eigen::Ref<const VectorXd>& theta) const;

  ModelSpec spec_;
  Index d_y_ = 1;
  Index d_w_ = 1;
  double y_bar_ = kInf;
};

/// Validates the spec and returns the model.
MomentModel build_model(const ModelSpec& spec);

/// Convenience wrapper around MomentModel::eval.
inline VectorXd eval_moment(const MomentModel& model, const Eigen::Ref<const VectorXd>& x_row,
                            const Eigen::Ref<const VectorXd>& w_row,
                            const Eigen::Ref<const VectorXd>& theta) {
  return model.eval(x_row, w_row, theta);
}

/// Forms (W^L, W^H) for the selection model from observed (Y, D) with Y
/// known to lie in [y_lower, y_upper]. Y values within 1e-12 of the bounds
/// are clamped; anything further out is an error.
Sample selection_sample(const MatrixXd& x, const VectorXd& y, const Eigen::VectorXi& d,
                        double y_lower, double y_upper);

// ---------------------------------------------------------------------------
// Monotone reparameterizations of X for identification at the boundary.

/// finite_support: x -> x0 - (x0 - x)^(phi_x + 1) on x0 - 1 < x < x0
/// (coordinatewise), identity elsewhere. The active window has unit width
/// so the map stays continuous and increasing at both ends.
///
/// at_infinity: x -> K + 1 - 1/(x - K + 1) for x > K, identity elsewhere.
/// The image is bounded above by K + 1.
struct BoundaryTransform {
  enum class Kind { finite_support, at_infinity };
  Kind kind = Kind::finite_support;
  VectorXd x0;         // finite_support, one entry per x column
  double k_x = 0.0;    // at_infinity
  double phi_x = 0.0;  // > -1 (finite) or > 1 (infinity)

  double apply(double x, Index coord) const;
  double invert(double v, Index coord) const;
};

Sample apply_boundary_transform(const Sample& sample, const BoundaryTransform& t);

}  // namespace momentset
