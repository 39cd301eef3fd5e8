#pragma once

#include "momentset/core.hpp"
#include "momentset/model.hpp"

#include <memory>
#include <optional>
#include <variant>

namespace momentset {

class ThetaGrid;

/// Truncation point sigma_n and critical value c_n.
///
/// paper_default sigma rule: sigma_n = scale * sqrt(log n * log log n / n),
/// so sigma_n * sqrt(n / log n) = scale * sqrt(log log n) grows without
/// bound. paper_default critical rule: c_n = 2 sqrt(log log n). Natural logs.
struct TuningPolicy {
  struct DefaultSigma {
    double scale = 0.5;
  };
  struct FixedValue {
    double value = 0.0;
  };
  struct DefaultCritical {};

  std::variant<DefaultSigma, FixedValue> sigma_rule = DefaultSigma{};
  std::variant<DefaultCritical, FixedValue> c_rule = DefaultCritical{};

  static TuningPolicy standard(double scale = 0.5) { return {DefaultSigma{scale}, DefaultCritical{}}; }
};

double sigma_n(const TuningPolicy& policy, Index n);
double critical_value(const TuningPolicy& policy, Index n);

/// sqrt(n / log n), the scaling of the weighted statistic.
double weighted_scale(Index n);

struct MomentSummary {
  VectorXd mu_hat;
  VectorXd sigma_hat;
};

/// Sample mean and standard deviation (divisor n) of m_j(W_i, theta) g(X_i).
MomentSummary moment_pair(const Sample& sample, const MomentModel& model,
                          const Eigen::Ref<const VectorXd>& theta, const Instrument& g);

struct StatResult {
  double t_value = 0.0;  // T_n(theta) >= 0
  double scaled = 0.0;   // t_value times the estimator's scaling
  Instrument argmax_instrument;
  Index argmin_component = 0;
  double studentized_min = 0.0;
};

/// T_n(theta) = sup_g S(mu_1/(sig_1 v sigma_n), ..., mu_dY/(sig_dY v sigma_n)).
/// `scaled` is sqrt(n / log n) T_n(theta).
StatResult ks_statistic(const Sample& sample, const MomentModel& model,
                        const Eigen::Ref<const VectorXd>& theta, const InstrumentFamily& family,
                        const SFunction& s, const TuningPolicy& tuning);

/// Largest sample standard deviation of m_j(W_i, theta) over the grid and
/// components. Zero when m does not vary with w.
double plugin_sd_scale(const Sample& sample, const MomentModel& model, const ThetaGrid& grid);

// ---------------------------------------------------------------------------
// Region criteria
//
// A criterion is a per-sample evaluator of one estimator's scaled statistic.
// `violates(theta, c, direction)` answers "scaled statistic > c" restricted
// to the components whose intercept direction equals `direction` (0 for all
// components). It may short-circuit and may cache state between calls, so a
// criterion object must not be shared across threads.

class RegionCriterion {
 public:
  virtual ~RegionCriterion() = default;
  virtual double scaled_statistic(const VectorXd& theta) = 0;
  virtual bool violates(const VectorXd& theta, double c, int direction) = 0;
  /// True when, for every fixed value of the non-intercept coordinates, the
  /// violation of each direction-(-1) component is nondecreasing in the
  /// intercept and that of each direction-(+1) component nonincreasing.
  virtual bool slice_monotone() const = 0;
  virtual const MomentModel& model() const = 0;
};

/// Weighted-KS criterion on sqrt(n / log n) scale with sigma_n from `tuning`.
std::unique_ptr<RegionCriterion> make_weighted_criterion(const Sample& sample,
                                                         const MomentModel& model,
                                                         const InstrumentFamily& family,
                                                         const SFunction& s,
                                                         const TuningPolicy& tuning);

}  // namespace momentset
