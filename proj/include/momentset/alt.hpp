#pragma once

// Competitor estimators: KS statistics with bounded weights on the sqrt(n)
// scale, and sup-norm tests of kernel estimates of the conditional mean.

#include "momentset/core.hpp"
#include "momentset/ksstat.hpp"
#include "momentset/model.hpp"
#include "momentset/regions.hpp"

#include <functional>
#include <memory>
#include <variant>

namespace momentset {

/// Weight omega(theta, g, j) in [lower, upper] with 0 < lower <= upper.
/// An empty `omega` means omega == 1.
struct BoundedWeightPolicy {
  std::function<double(const VectorXd&, const Instrument&, Index)> omega;
  double lower = 1.0;
  double upper = 1.0;
  std::variant<TuningPolicy::DefaultCritical, TuningPolicy::FixedValue> c_rule =
      TuningPolicy::DefaultCritical{};

  bool unit() const { return !omega; }
};

double critical_value(const BoundedWeightPolicy& policy, Index n);

/// T_{n,omega}(theta) = sup_g S(omega_1 mu_1, ..., omega_dY mu_dY); `scaled`
/// is sqrt(n) T. A weight outside [lower, upper] raises InvariantViolation.
StatResult bounded_ks_statistic(const Sample& sample, const MomentModel& model,
                                const Eigen::Ref<const VectorXd>& theta,
                                const InstrumentFamily& family, const SFunction& s,
                                const BoundedWeightPolicy& policy);

std::unique_ptr<RegionCriterion> make_bounded_criterion(const Sample& sample,
                                                        const MomentModel& model,
                                                        const InstrumentFamily& family,
                                                        const SFunction& s,
                                                        const BoundedWeightPolicy& policy);

/// {theta : sqrt(n) T_{n,omega}(theta) <= c_n}.
ConfidenceRegion bounded_region(const Sample& sample, const MomentModel& model,
                                const ThetaGrid& grid, const InstrumentFamily& family,
                                const SFunction& s, const BoundedWeightPolicy& policy,
                                RegionStrategy strategy = RegionStrategy::automatic);

// ---------------------------------------------------------------------------
// Kernel estimates

struct KernelSpec {
  struct Fixed {
    double h = 0.5;
  };
  /// h_n = c * n^(-exponent)
  struct Power {
    double c = 1.0;
    double exponent = 0.2;
  };
  /// h_n = (log n / n)^(1 / (d_X + 2 alpha))
  struct Optimal {
    double alpha = 2.0;
  };

  KernelId kernel = KernelId::uniform;
  std::variant<Fixed, Power, Optimal> h_rule = Optimal{};
  /// Lower bound a on h^{d_X} n / log n.
  double side_a = 1.0;
  std::variant<TuningPolicy::DefaultCritical, TuningPolicy::FixedValue> c_rule =
      TuningPolicy::DefaultCritical{};
};

double kernel_bandwidth(const KernelSpec& spec, Index n, Index dx);
double critical_value(const KernelSpec& spec, Index n);
/// h^{d_X} n / log n, the quantity bounded below by `side_a`.
double kernel_side_ratio(double h, Index n, Index dx);
/// sqrt(n h^{d_X} / log n).
double kernel_scale(double h, Index n, Index dx);

/// Nadaraya-Watson estimate of E[m(W, theta) | X = x] with bandwidth h.
/// Throws DomainError when no observation has positive kernel weight at x.
VectorXd kernel_cond_mean(const Sample& sample, const MomentModel& model,
                          const Eigen::Ref<const VectorXd>& theta,
                          const Eigen::Ref<const VectorXd>& x, KernelId kernel, double h);
VectorXd kernel_cond_mean(const Sample& sample, const MomentModel& model,
                          const Eigen::Ref<const VectorXd>& theta,
                          const Eigen::Ref<const VectorXd>& x, const KernelSpec& spec);

/// sup over the observed X_i of S(m_hat(theta, X_i)).
double kernel_statistic(const Sample& sample, const MomentModel& model,
                        const Eigen::Ref<const VectorXd>& theta, const SFunction& s,
                        KernelId kernel, double h);

/// Criterion on the sqrt(n h^{d_X} / log n) scale. Validates the bandwidth
/// side condition and throws ConfigError("kernel.h") when it fails.
std::unique_ptr<RegionCriterion> make_kernel_criterion(const Sample& sample,
                                                       const MomentModel& model,
                                                       const SFunction& s, const KernelSpec& spec);

/// {theta : sqrt(n h^{d_X} / log n) T^kern(theta) <= c}. A NaN `c` uses the
/// spec's critical value rule.
ConfidenceRegion kernel_region(const Sample& sample, const MomentModel& model,
                               const ThetaGrid& grid, const KernelSpec& spec, const SFunction& s,
                               double c = std::numeric_limits<double>::quiet_NaN(),
                               RegionStrategy strategy = RegionStrategy::automatic);

}  // namespace momentset
