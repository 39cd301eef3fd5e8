#include "momentset/alt.hpp"

#include "momentset/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace momentset {

namespace {

double default_critical(const std::variant<TuningPolicy::DefaultCritical, TuningPolicy::FixedValue>& rule,
                      Index n) {
  TuningPolicy t;
  t.c_rule = rule;
  return critical_value(t, n);
}

Weighting bounded_weighting(const BoundedWeightPolicy& policy) {
  if (!(policy.lower > 0.0) || !(policy.upper >= policy.lower) || !std::isfinite(policy.upper)) {
    throw ConfigError("omega", "weight bounds need 0 < lower <= upper < inf");
  }
  if (policy.unit()) return Weighting::unit();
  Weighting w;
  w.kind = Weighting::Kind::custom;
  w.omega = [policy](const VectorXd& theta, const Instrument& g, Index j) {
    const double v = policy.omega(theta, g, j);
    if (!(v >= policy.lower && v <= policy.upper)) {
      throw InvariantViolation("weight " + std::to_string(v) + " outside [" +
                               std::to_string(policy.lower) + ", " + std::to_string(policy.upper) +
                               "]");
    }
    return v;
  };
  return w;
}

class BoundedCriterion final : public RegionCriterion {
 public:
  BoundedCriterion(const Sample& sample, const MomentModel& model, const InstrumentFamily& family,
                   const SFunction& s, const BoundedWeightPolicy& policy)
      : engine_(sample, model, family, s),
        weighting_(bounded_weighting(policy)),
        scale_(std::sqrt(static_cast<double>(sample.n()))) {
    // Unit weights keep each mu_hat_j monotone in the intercept whenever m_j
    // is, so violations of each component are monotone along a slice.
    monotone_ = policy.unit() && model.intercept_direction().has_value() &&
                s.kind == SFunction::Kind::neg_part_sup_norm;
  }

  double scaled_statistic(const VectorXd& theta) override {
    return scale_ * engine_.evaluate(theta, weighting_).t_value;
  }
  bool violates(const VectorXd& theta, double c, int direction) override {
    return engine_.exceeds(theta, c / scale_, direction, weighting_);
  }
  bool slice_monotone() const override { return monotone_; }
  const MomentModel& model() const override { return engine_.model(); }

 private:
  KsEngine engine_;
  Weighting weighting_;
  double scale_;
  bool monotone_ = false;
};

}  // namespace

double critical_value(const BoundedWeightPolicy& policy, Index n) {
  return default_critical(policy.c_rule, n);
}

StatResult bounded_ks_statistic(const Sample& sample, const MomentModel& model,
                                const Eigen::Ref<const VectorXd>& theta,
                                const InstrumentFamily& family, const SFunction& s,
                                const BoundedWeightPolicy& policy) {
  if (sample.n() < 1) throw DomainError("bounded_ks_statistic: empty sample");
  KsEngine engine(sample, model, family, s);
  StatResult r = engine.evaluate(theta, bounded_weighting(policy));
  r.scaled = std::sqrt(static_cast<double>(sample.n())) * r.t_value;
  return r;
}

std::unique_ptr<RegionCriterion> make_bounded_criterion(const Sample& sample,
                                                        const MomentModel& model,
                                                        const InstrumentFamily& family,
                                                        const SFunction& s,
                                                        const BoundedWeightPolicy& policy) {
  if (sample.n() < 1) throw DomainError("bounded region: empty sample");
  return std::make_unique<BoundedCriterion>(sample, model, family, s, policy);
}

ConfidenceRegion bounded_region(const Sample& sample, const MomentModel& model,
                                const ThetaGrid& grid, const InstrumentFamily& family,
                                const SFunction& s, const BoundedWeightPolicy& policy,
                                RegionStrategy strategy) {
  auto criterion = make_bounded_criterion(sample, model, family, s, policy);
  ConfidenceRegion r =
      build_region(*criterion, grid, critical_value(policy, sample.n()), strategy);
  r.estimator = Estimator::bounded_ks;
  return r;
}

// ---------------------------------------------------------------------------
// Kernel estimates

double kernel_bandwidth(const KernelSpec& spec, Index n, Index dx) {
  const double nd = static_cast<double>(n);
  double h = std::visit(
      [&](const auto& rule) -> double {
        using T = std::decay_t<decltype(rule)>;
        if constexpr (std::is_same_v<T, KernelSpec::Fixed>) {
          return rule.h;
        } else if constexpr (std::is_same_v<T, KernelSpec::Power>) {
          return rule.c * std::pow(nd, -rule.exponent);
        } else {
          if (!(rule.alpha > 0.0)) throw ConfigError("kernel.alpha", "alpha must be positive");
          if (n < 2) throw DomainError("optimal bandwidth needs n >= 2");
          return std::pow(std::log(nd) / nd,
                          1.0 / (static_cast<double>(dx) + 2.0 * rule.alpha));
        }
      },
      spec.h_rule);
  if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("kernel.h", "bandwidth must be positive");
  return h;
}

double critical_value(const KernelSpec& spec, Index n) { return default_critical(spec.c_rule, n); }

double kernel_side_ratio(double h, Index n, Index dx) {
  const double nd = static_cast<double>(n);
  return std::pow(h, static_cast<double>(dx)) * nd / std::log(nd);
}

double kernel_scale(double h, Index n, Index dx) { return std::sqrt(kernel_side_ratio(h, n, dx)); }

VectorXd kernel_cond_mean(const Sample& sample, const MomentModel& model,
                          const Eigen::Ref<const VectorXd>& theta,
                          const Eigen::Ref<const VectorXd>& x, KernelId kernel, double h) {
  if (!(h > 0.0)) throw DomainError("kernel bandwidth must be positive");
  if (x.size() != sample.dx()) throw DimensionError("evaluation point dimension");
  model.validate(sample);
  VectorXd num = VectorXd::Zero(model.d_y());
  double den = 0.0;
  for (Index i = 0; i < sample.n(); ++i) {
    const double k = kernel_value(kernel, (sample.x().row(i).transpose() - x) / h);
    if (k <= 0.0) continue;
    num += k * model.eval(sample.x().row(i).transpose(), sample.w().row(i).transpose(), theta);
    den += k;
  }
  if (!(den > 0.0)) throw DomainError("no observation has positive kernel weight at x");
  return num / den;
}

VectorXd kernel_cond_mean(const Sample& sample, const MomentModel& model,
                          const Eigen::Ref<const VectorXd>& theta,
                          const Eigen::Ref<const VectorXd>& x, const KernelSpec& spec) {
  return kernel_cond_mean(sample, model, theta, x, spec.kernel,
                          kernel_bandwidth(spec, sample.n(), sample.dx()));
}

namespace {

// Kernel estimates at every distinct observed x.
//
// Scalar x: observations are sorted and each window is a contiguous run;
// the uniform kernel then needs only prefix sums of m. Otherwise the
// positive weights of each window are stored explicitly.
class KernelEngine {
 public:
  KernelEngine(const Sample& sample, const MomentModel& model, const SFunction& s, KernelId kernel,
               double h)
      : sample_(sample), model_(model), s_(s), kernel_(kernel), h_(h) {
    if (!(h > 0.0)) throw DomainError("kernel bandwidth must be positive");
    model_.validate(sample_);
    const Index n = sample_.n();
    if (n < 1) throw DomainError("kernel estimate on an empty sample");
    direction_.assign(static_cast<size_t>(model_.d_y()), 0);
    if (auto dir = model_.intercept_direction()) direction_ = *dir;
    m_.resize(n, model_.d_y());

    if (sample_.dx() == 1) {
      order_.resize(static_cast<size_t>(n));
      std::iota(order_.begin(), order_.end(), Index{0});
      const auto& xc = sample_.x();
      std::stable_sort(order_.begin(), order_.end(),
                       [&](Index a, Index b) { return xc(a, 0) < xc(b, 0); });
      std::vector<double> xs(static_cast<size_t>(n));
      for (Index k = 0; k < n; ++k) xs[k] = xc(order_[k], 0);
      contiguous_ = true;
      for (Index k = 0; k < n; ++k) {
        if (k > 0 && xs[k] == xs[k - 1]) continue;
        const double x0 = xs[k];
        const auto lo = std::partition_point(xs.begin(), xs.end(),
                                             [&](double v) { return (v - x0) / h_ < -1.0; });
        const auto hi = std::partition_point(xs.begin(), xs.end(),
                                             [&](double v) { return (v - x0) / h_ <= 1.0; });
        Window win;
        win.lo = lo - xs.begin();
        win.hi = hi - xs.begin();
        win.offset = static_cast<Index>(idx_.size());
        double den = 0.0;
        for (Index q = win.lo; q < win.hi; ++q) {
          const double wgt = kernel_value(kernel_, (xs[q] - x0) / h_);
          if (kernel_ != KernelId::uniform) {
            idx_.push_back(q);
            wt_.push_back(wgt);
          }
          den += wgt;
        }
        win.count = kernel_ == KernelId::uniform ? 0 : static_cast<Index>(idx_.size()) - win.offset;
        win.inv_den = 1.0 / den;  // den > 0: the window holds x0 itself for uniform
        if (!(den > 0.0)) continue;
        windows_.push_back(win);
      }
      prefix_.resize(static_cast<size_t>(n) + 1);
      sorted_m_.resize(n);
    } else {
      for (Index e = 0; e < n; ++e) {
        Window win;
        win.offset = static_cast<Index>(idx_.size());
        double den = 0.0;
        const VectorXd x0 = sample_.x().row(e).transpose();
        for (Index i = 0; i < n; ++i) {
          const double wgt = kernel_value(kernel_, (sample_.x().row(i).transpose() - x0) / h_);
          if (wgt <= 0.0) continue;
          idx_.push_back(i);
          wt_.push_back(wgt);
          den += wgt;
        }
        win.count = static_cast<Index>(idx_.size()) - win.offset;
        if (!(den > 0.0)) {
          idx_.resize(static_cast<size_t>(win.offset));
          wt_.resize(static_cast<size_t>(win.offset));
          continue;
        }
        win.inv_den = 1.0 / den;
        windows_.push_back(win);
      }
    }
  }

  Index windows() const { return static_cast<Index>(windows_.size()); }

  /// sup over windows of S(m_hat), restricted to components with the given
  /// direction for the sup-norm. With `thr` finite, returns as soon as a
  /// value above thr is found.
  double sup(const VectorXd& theta, int direction, double thr = kInf) {
    const Index d_y = model_.d_y();
    for (Index j = 0; j < d_y; ++j) {
      if (selected(j, direction)) model_.eval_component(sample_, theta, j, m_.col(j));
    }
    const bool sup_norm = s_.kind == SFunction::Kind::neg_part_sup_norm;
    double best = 0.0;
    if (sup_norm) {
      for (Index j = 0; j < d_y; ++j) {
        if (!selected(j, direction)) continue;
        best = std::max(best, component_sup(j, thr));
        if (best > thr) return best;
      }
      return best;
    }
    if (direction != 0) throw DomainError("component-restricted kernel tests need the sup-norm");
    MatrixXd est(windows(), d_y);
    for (Index j = 0; j < d_y; ++j) est.col(j) = estimates(j);
    for (Index e = 0; e < windows(); ++e) {
      best = std::max(best, s_value(s_, est.row(e).transpose()));
    }
    return best;
  }

 private:
  struct Window {
    Index lo = 0, hi = 0;  // sorted range (scalar x)
    Index offset = 0, count = 0;
    double inv_den = 0.0;
  };

  bool selected(Index j, int direction) const {
    return direction == 0 || direction_[j] == direction;
  }

  VectorXd estimates(Index j) {
    VectorXd out(windows());
    prepare(j);
    for (Index e = 0; e < windows(); ++e) out[e] = estimate(j, windows_[e]);
    return out;
  }

  void prepare(Index j) {
    if (!contiguous_) return;
    const Index n = sample_.n();
    for (Index k = 0; k < n; ++k) sorted_m_[k] = m_(order_[k], j);
    if (kernel_ == KernelId::uniform) {
      prefix_[0] = 0.0;
      for (Index k = 0; k < n; ++k) prefix_[k + 1] = prefix_[k] + sorted_m_[k];
    }
  }

  double estimate(Index j, const Window& win) const {
    if (contiguous_ && kernel_ == KernelId::uniform) {
      return (prefix_[win.hi] - prefix_[win.lo]) / static_cast<double>(win.hi - win.lo);
    }
    double acc = 0.0;
    if (contiguous_) {
      for (Index q = 0; q < win.count; ++q) acc += wt_[win.offset + q] * sorted_m_[idx_[win.offset + q]];
    } else {
      for (Index q = 0; q < win.count; ++q) acc += wt_[win.offset + q] * m_(idx_[win.offset + q], j);
    }
    return acc * win.inv_den;
  }

  double component_sup(Index j, double thr) {
    prepare(j);
    double best = 0.0;
    for (const auto& win : windows_) {
      best = std::max(best, -estimate(j, win));
      if (best > thr) break;
    }
    return best;
  }

  const Sample& sample_;
  MomentModel model_;
  SFunction s_;
  KernelId kernel_;
  double h_;
  std::vector<int> direction_;
  bool contiguous_ = false;
  std::vector<Index> order_;
  std::vector<Window> windows_;
  std::vector<Index> idx_;
  std::vector<double> wt_;
  std::vector<double> prefix_;
  VectorXd sorted_m_;
  MatrixXd m_;
};

class KernelCriterion final : public RegionCriterion {
 public:
  KernelCriterion(const Sample& sample, const MomentModel& model, const SFunction& s,
                  KernelId kernel, double h)
      : engine_(sample, model, s, kernel, h),
        model_(model),
        scale_(kernel_scale(h, sample.n(), sample.dx())) {
    // A kernel average of pointwise monotone m_j is monotone in the intercept.
    monotone_ = model.intercept_direction().has_value() &&
                s.kind == SFunction::Kind::neg_part_sup_norm;
  }

  double scaled_statistic(const VectorXd& theta) override {
    return scale_ * engine_.sup(theta, 0);
  }
  bool violates(const VectorXd& theta, double c, int direction) override {
    if (c < 0.0) return true;
    return engine_.sup(theta, direction, c / scale_) > c / scale_;
  }
  bool slice_monotone() const override { return monotone_; }
  const MomentModel& model() const override { return model_; }

 private:
  KernelEngine engine_;
  MomentModel model_;
  double scale_;
  bool monotone_ = false;
};

}  // namespace

double kernel_statistic(const Sample& sample, const MomentModel& model,
                        const Eigen::Ref<const VectorXd>& theta, const SFunction& s,
                        KernelId kernel, double h) {
  if (theta.size() != model.theta_dim()) throw DimensionError("theta dimension");
  KernelEngine engine(sample, model, s, kernel, h);
  return engine.sup(theta, 0);
}

std::unique_ptr<RegionCriterion> make_kernel_criterion(const Sample& sample,
                                                       const MomentModel& model,
                                                       const SFunction& s, const KernelSpec& spec) {
  if (sample.n() < 3) throw DomainError("kernel region needs n >= 3");
  const double h = kernel_bandwidth(spec, sample.n(), sample.dx());
  const double ratio = kernel_side_ratio(h, sample.n(), sample.dx());
  if (ratio < spec.side_a) {
    throw ConfigError("kernel.h", "bandwidth " + std::to_string(h) + " gives h^dX n / log n = " +
                                      std::to_string(ratio) + " below a = " +
                                      std::to_string(spec.side_a));
  }
  return std::make_unique<KernelCriterion>(sample, model, s, spec.kernel, h);
}

ConfidenceRegion kernel_region(const Sample& sample, const MomentModel& model,
                               const ThetaGrid& grid, const KernelSpec& spec, const SFunction& s,
                               double c, RegionStrategy strategy) {
  auto criterion = make_kernel_criterion(sample, model, s, spec);
  if (std::isnan(c)) c = critical_value(spec, sample.n());
  ConfidenceRegion r = build_region(*criterion, grid, c, strategy);
  r.estimator = Estimator::kernel;
  return r;
}

}  // namespace momentset
