#include "momentset/model.hpp"

#include <algorithm>
#include <cmath>

namespace momentset {

bool ThetaBox::contains(const Eigen::Ref<const VectorXd>& theta, double tol) const {
  if (theta.size() != dim()) return false;
  for (Index k = 0; k < dim(); ++k) {
    if (theta[k] < lower[k] - tol || theta[k] > upper[k] + tol) return false;
  }
  return true;
}

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::one_sided_regression:
      return "one_sided_regression";
    case ModelKind::interval_regression:
      return "interval_regression";
    case ModelKind::one_sided_quantile:
      return "one_sided_quantile";
    case ModelKind::interval_quantile:
      return "interval_quantile";
    case ModelKind::selection:
      return "selection";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
  for (auto k : {ModelKind::one_sided_regression, ModelKind::interval_regression,
                 ModelKind::one_sided_quantile, ModelKind::interval_quantile,
                 ModelKind::selection}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("model.kind", "unknown model kind '" + s + "'");
}

MomentModel::MomentModel(ModelSpec spec) : spec_(std::move(spec)) {
  switch (spec_.kind) {
    case ModelKind::one_sided_regression:
    case ModelKind::one_sided_quantile:
      d_y_ = 1;
      d_w_ = 1;
      break;
    case ModelKind::interval_regression:
    case ModelKind::interval_quantile:
    case ModelKind::selection:
      d_y_ = 2;
      d_w_ = 2;
      break;
  }
}

bool MomentModel::is_quantile() const {
  return spec_.kind == ModelKind::one_sided_quantile || spec_.kind == ModelKind::interval_quantile;
}

MomentModel build_model(const ModelSpec& spec) {
  const ThetaBox& box = spec.theta_box;
  if (box.lower.size() != box.upper.size()) {
    throw ConfigError("theta_box", "lower and upper bounds differ in length");
  }
  for (Index k = 0; k < box.dim(); ++k) {
    if (!(box.lower[k] <= box.upper[k])) {
      throw ConfigError("theta_box", "lower bound exceeds upper bound on axis " + std::to_string(k));
    }
  }
  if (spec.kind == ModelKind::selection) {
    if (box.dim() != 1) throw ConfigError("theta_box", "selection model has a scalar parameter");
    if (!(std::isfinite(spec.y_lower) && std::isfinite(spec.y_upper) &&
          spec.y_lower < spec.y_upper)) {
      throw ConfigError("y_lower", "selection model needs finite bounds y_lower < y_upper");
    }
    if (!box.is_bounded()) throw ConfigError("theta_box", "selection model needs a bounded box");
  } else {
    if (spec.dx < 1) throw ConfigError("dx", "regression models need at least one regressor");
    if (box.dim() != spec.dx + 1) {
      throw ConfigError("theta_box", "regression theta has dimension dx + 1 = " +
                                         std::to_string(spec.dx + 1));
    }
  }

  MomentModel m(spec);
  switch (spec.kind) {
    case ModelKind::one_sided_quantile:
    case ModelKind::interval_quantile:
      if (!(spec.tau > 0.0 && spec.tau < 1.0)) throw ConfigError("tau", "tau must lie in (0,1)");
      m.y_bar_ = std::max(spec.tau, 1.0 - spec.tau);
      break;
    case ModelKind::one_sided_regression:
    case ModelKind::interval_regression: {
      if (!box.is_bounded()) {
        throw ConfigError("theta_box", "mean regression models need a bounded parameter box");
      }
      double bound = spec.outcome_bound +
                     std::max(std::abs(box.lower[0]), std::abs(box.upper[0]));
      for (Index k = 1; k < box.dim(); ++k) {
        const double slope = std::max(std::abs(box.lower[k]), std::abs(box.upper[k]));
        if (slope > 0.0) bound += slope * spec.regressor_bound;
      }
      m.y_bar_ = bound;
      break;
    }
    case ModelKind::selection: {
      const double lo = box.lower[0], hi = box.upper[0];
      m.y_bar_ = std::max({std::abs(lo - spec.y_upper), std::abs(hi - spec.y_lower),
                           std::abs(spec.y_lower - hi), std::abs(spec.y_upper - lo)});
      break;
    }
  }
  return m;
}

double MomentModel::line(const Eigen::Ref<const VectorXd>& x_row,
                         const Eigen::Ref<const VectorXd>& theta) const {
  return theta[0] + x_row.dot(theta.tail(theta.size() - 1));
}

VectorXd MomentModel::eval(const Eigen::Ref<const VectorXd>& x_row,
                           const Eigen::Ref<const VectorXd>& w_row,
                           const Eigen::Ref<const VectorXd>& theta) const {
  if (theta.size() != theta_dim()) {
    throw DimensionError("theta has dimension " + std::to_string(theta.size()) + ", model expects " +
                         std::to_string(theta_dim()));
  }
  if (w_row.size() != d_w_) {
    throw DimensionError("w row has " + std::to_string(w_row.size()) + " entries, model expects " +
                         std::to_string(d_w_));
  }
  if (is_regression() && x_row.size() != spec_.dx) {
    throw DimensionError("x row has " + std::to_string(x_row.size()) + " entries, model expects " +
                         std::to_string(spec_.dx));
  }

  VectorXd m(d_y_);
  const double tau = spec_.tau;
  switch (spec_.kind) {
    case ModelKind::one_sided_regression:
      m[0] = w_row[0] - line(x_row, theta);
      break;
    case ModelKind::interval_regression: {
      const double l = line(x_row, theta);
      m[0] = w_row[1] - l;
      m[1] = l - w_row[0];
      break;
    }
    case ModelKind::one_sided_quantile:
      m[0] = tau - (w_row[0] <= line(x_row, theta) ? 1.0 : 0.0);
      break;
    case ModelKind::interval_quantile: {
      const double l = line(x_row, theta);
      m[0] = tau - (w_row[1] <= l ? 1.0 : 0.0);
      m[1] = (w_row[0] <= l ? 1.0 : 0.0) - tau;
      break;
    }
    case ModelKind::selection:
      m[0] = theta[0] - w_row[0];
      m[1] = w_row[1] - theta[0];
      break;
  }
  if (!m.allFinite()) {
    throw InvariantViolation("moment is not finite; " + to_string(spec_.kind) +
                             " cannot absorb infinite endpoints");
  }
  if ((m.array().abs() > y_bar_ * (1.0 + 1e-12)).any()) {
    throw InvariantViolation("moment exceeds the declared bound Ybar = " + std::to_string(y_bar_));
  }
  return m;
}

void MomentModel::eval_component(const Sample& sample, const Eigen::Ref<const VectorXd>& theta,
                                 Index j, Eigen::Ref<VectorXd> out) const {
  const Index n = sample.n();
  const MatrixXd& x = sample.x();
  const MatrixXd& w = sample.w();
  const double tau = spec_.tau;

  auto lines = [&](Eigen::Ref<VectorXd> dst) {
    dst.setConstant(theta[0]);
    for (Index k = 0; k < spec_.dx; ++k) dst.noalias() += x.col(k) * theta[k + 1];
  };

  switch (spec_.kind) {
    case ModelKind::one_sided_regression:
      lines(out);
      out = w.col(0) - out;
      break;
    case ModelKind::interval_regression:
      lines(out);
      if (j == 0) {
        out = w.col(1) - out;
      } else {
        out -= w.col(0);
      }
      break;
    case ModelKind::one_sided_quantile:
      lines(out);
      for (Index i = 0; i < n; ++i) out[i] = tau - (w(i, 0) <= out[i] ? 1.0 : 0.0);
      break;
    case ModelKind::interval_quantile:
      lines(out);
      if (j == 0) {
        for (Index i = 0; i < n; ++i) out[i] = tau - (w(i, 1) <= out[i] ? 1.0 : 0.0);
      } else {
        for (Index i = 0; i < n; ++i) out[i] = (w(i, 0) <= out[i] ? 1.0 : 0.0) - tau;
      }
      break;
    case ModelKind::selection:
      if (j == 0) {
        out = theta[0] - w.col(0).array();
      } else {
        out = w.col(1).array() - theta[0];
      }
      break;
  }
}

MatrixXd MomentModel::eval_sample(const Sample& sample,
                                  const Eigen::Ref<const VectorXd>& theta) const {
  MatrixXd out(sample.n(), d_y_);
  for (Index j = 0; j < d_y_; ++j) eval_component(sample, theta, j, out.col(j));
  return out;
}

void MomentModel::validate(const Sample& sample) const {
  if (sample.dw() != d_w_) {
    throw DimensionError("sample has " + std::to_string(sample.dw()) + " w columns, " +
                         to_string(spec_.kind) + " expects " + std::to_string(d_w_));
  }
  if (is_regression() && sample.dx() != spec_.dx) {
    throw DimensionError("sample has " + std::to_string(sample.dx()) + " x columns, model expects " +
                         std::to_string(spec_.dx));
  }
  if (!is_quantile() && sample.has_infinite_w()) {
    throw InvariantViolation(to_string(spec_.kind) +
                             " has unbounded moments when w contains +-inf");
  }
}

std::optional<std::vector<int>> MomentModel::intercept_direction() const {
  switch (spec_.kind) {
    case ModelKind::one_sided_regression:
    case ModelKind::one_sided_quantile:
      return std::vector<int>{-1};
    case ModelKind::interval_regression:
    case ModelKind::interval_quantile:
      return std::vector<int>{-1, +1};
    case ModelKind::selection:
      return std::nullopt;
  }
  return std::nullopt;
}

Sample selection_sample(const MatrixXd& x, const VectorXd& y, const Eigen::VectorXi& d,
                        double y_lower, double y_upper) {
  if (x.rows() != y.size() || y.size() != d.size()) {
    throw DimensionError("selection_sample: x, y and d must have the same length");
  }
  MatrixXd w(y.size(), 2);
  constexpr double tol = 1e-12;
  for (Index i = 0; i < y.size(); ++i) {
    if (d[i] != 0) {
      if (!(y[i] >= y_lower - tol && y[i] <= y_upper + tol)) {
        throw DomainError("selection_sample: observed Y outside [y_lower, y_upper] at row " +
                          std::to_string(i));
      }
      const double yc = std::clamp(y[i], y_lower, y_upper);
      w(i, 0) = yc;
      w(i, 1) = yc;
    } else {
      w(i, 0) = y_lower;
      w(i, 1) = y_upper;
    }
  }
  return Sample(x, w);
}

double BoundaryTransform::apply(double x, Index coord) const {
  if (kind == Kind::finite_support) {
    const double x0c = x0[coord];
    if (x0c - 1.0 < x && x < x0c) return x0c - std::pow(x0c - x, phi_x + 1.0);
    return x;
  }
  if (x > k_x) return k_x + 1.0 - 1.0 / (x - k_x + 1.0);
  return x;
}

double BoundaryTransform::invert(double v, Index coord) const {
  if (kind == Kind::finite_support) {
    const double x0c = x0[coord];
    if (x0c - 1.0 < v && v < x0c) return x0c - std::pow(x0c - v, 1.0 / (phi_x + 1.0));
    return v;
  }
  if (v > k_x) return k_x - 1.0 + 1.0 / (k_x + 1.0 - v);
  return v;
}

Sample apply_boundary_transform(const Sample& sample, const BoundaryTransform& t) {
  if (t.kind == BoundaryTransform::Kind::finite_support) {
    if (!(t.phi_x > -1.0)) throw ConfigError("phi_x", "finite-support transform needs phi_x > -1");
    if (t.x0.size() != sample.dx()) {
      throw DimensionError("finite-support transform: x0 has " + std::to_string(t.x0.size()) +
                           " entries, sample has " + std::to_string(sample.dx()) + " x columns");
    }
  } else {
    if (!(t.phi_x > 1.0)) throw ConfigError("phi_x", "transform at infinity needs phi_x > 1");
    if (!std::isfinite(t.k_x)) throw ConfigError("k_x", "K_X must be finite");
  }
  MatrixXd x = sample.x();
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index k = 0; k < x.cols(); ++k) {
      const double v = t.apply(x(i, k), k);
      if (!std::isfinite(v)) {
        throw DomainError("boundary transform undefined at row " + std::to_string(i));
      }
      x(i, k) = v;
    }
  }
  return Sample(std::move(x), sample.w());
}

}  // namespace momentset
