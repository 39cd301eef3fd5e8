#include "momentset/ksstat.hpp"

#include "momentset/engine.hpp"
#include "momentset/regions.hpp"

#include <algorithm>
#include <cmath>

namespace momentset {

// ---------------------------------------------------------------------------
// Tuning

double sigma_n(const TuningPolicy& policy, Index n) {
  if (const auto* fixed = std::get_if<TuningPolicy::FixedValue>(&policy.sigma_rule)) {
    if (!(fixed->value > 0.0)) throw ConfigError("tuning.sigma", "fixed sigma_n must be positive");
    return fixed->value;
  }
  const double scale = std::get<TuningPolicy::DefaultSigma>(policy.sigma_rule).scale;
  if (!(scale > 0.0)) throw ConfigError("tuning.sigma_scale", "scale must be positive");
  if (n < 3) throw DomainError("sigma_n needs n >= 3 so that log log n > 0");
  const double ln = std::log(static_cast<double>(n));
  return scale * std::sqrt(ln * std::log(ln) / static_cast<double>(n));
}

double critical_value(const TuningPolicy& policy, Index n) {
  if (const auto* fixed = std::get_if<TuningPolicy::FixedValue>(&policy.c_rule)) {
    return fixed->value;
  }
  if (n < 3) throw DomainError("critical value needs n >= 3 so that log log n > 0");
  return 2.0 * std::sqrt(std::log(std::log(static_cast<double>(n))));
}

double weighted_scale(Index n) {
  if (n < 2) throw DomainError("sqrt(n / log n) needs n >= 2");
  const double nd = static_cast<double>(n);
  return std::sqrt(nd / std::log(nd));
}

// ---------------------------------------------------------------------------
// Moments

MomentSummary moment_pair(const Sample& sample, const MomentModel& model,
                          const Eigen::Ref<const VectorXd>& theta, const Instrument& g) {
  if (sample.n() < 1) throw DomainError("moment_pair: empty sample");
  model.validate(sample);
  if (theta.size() != model.theta_dim()) throw DimensionError("moment_pair: theta dimension");
  const Index n = sample.n();
  VectorXd gv(n);
  for (Index i = 0; i < n; ++i) gv[i] = eval_instrument(g, sample.x().row(i).transpose());
  const MatrixXd mg = model.eval_sample(sample, theta).array().colwise() * gv.array();
  MomentSummary out;
  out.mu_hat = mg.colwise().mean().transpose();
  const VectorXd second = mg.array().square().colwise().mean().transpose();
  out.sigma_hat = (second.array() - out.mu_hat.array().square()).max(0.0).sqrt();
  return out;
}

// ---------------------------------------------------------------------------
// Engine

KsEngine::KsEngine(const Sample& sample, const MomentModel& model, const InstrumentFamily& family,
                   const SFunction& s)
    : sample_(sample), model_(model), family_(family), s_(s) {
  model_.validate(sample_);
  const Index d_y = model_.d_y();
  direction_.assign(static_cast<size_t>(d_y), 0);
  if (auto dir = model_.intercept_direction()) direction_ = *dir;
  m_.resize(sample_.n(), d_y);
  col_.resize(sample_.n());

  switch (family_.kind) {
    case InstrumentFamily::Kind::all_data_intervals:
      if (sample_.dx() != 1) {
        throw ConfigError("family", "interval instruments need a scalar x (d_X = 1)");
      }
      intervals_.emplace(sample_.x().col(0), d_y);
      break;
    case InstrumentFamily::Kind::all_data_boxes:
      if (sample_.dx() == 1) {
        intervals_.emplace(sample_.x().col(0), d_y);
      } else if (sample_.dx() == 2) {
        boxes_.emplace(sample_.x(), d_y, family_.corner_cap);
      } else {
        throw ConfigError("family", "box instruments support d_X <= 2");
      }
      break;
    case InstrumentFamily::Kind::kernel_dilations: {
      if (family_.centers.empty() || family_.bandwidths.empty()) {
        throw ConfigError("family", "kernel dilation family is empty");
      }
      for (const auto& c : family_.centers) {
        for (double h : family_.bandwidths) {
          if (!(h > 0.0)) throw ConfigError("family.bandwidths", "bandwidths must be positive");
          if (c.size() != sample_.dx()) throw DimensionError("kernel center dimension");
          generic_.push_back(KernelInstrument{c, h, family_.kernel});
        }
      }
      gvals_.resize(sample_.n(), static_cast<Index>(generic_.size()));
      for (Index k = 0; k < gvals_.cols(); ++k) {
        for (Index i = 0; i < sample_.n(); ++i) {
          gvals_(i, k) = eval_instrument(generic_[k], sample_.x().row(i).transpose());
        }
      }
      break;
    }
  }
}

bool KsEngine::component_selected(Index j, int direction) const {
  return direction == 0 || direction_[j] == direction;
}

void KsEngine::load(const VectorXd& theta, Index j) {
  model_.eval_component(sample_, theta, j, m_.col(j));
  if (intervals_) intervals_->load(j, m_.col(j));
  if (boxes_) boxes_->load(j, m_.col(j));
}

void KsEngine::load_all(const VectorXd& theta) {
  for (Index j = 0; j < model_.d_y(); ++j) load(theta, j);
}

Instrument KsEngine::candidate_instrument(const ScanHit& hit, Index generic_index) const {
  if (intervals_) return intervals_->instrument(hit.a, hit.b);
  if (boxes_) return boxes_->instrument(hit);
  return generic_[generic_index];
}

VectorXd KsEngine::weighted_vector(const VectorXd& theta, const Weighting& w, const ScanHit& hit,
                                   Index generic_index) const {
  const Index d_y = model_.d_y();
  VectorXd z(d_y);
  std::optional<Instrument> g;
  if (w.kind == Weighting::Kind::custom) g = candidate_instrument(hit, generic_index);
  for (Index j = 0; j < d_y; ++j) {
    double mu = 0.0, var = 0.0;
    if (intervals_) {
      intervals_->moments(j, hit.a, hit.b, mu, var);
    } else if (boxes_) {
      boxes_->moments(j, hit, mu, var);
    } else {
      const auto gk = gvals_.col(generic_index).array();
      const auto mj = m_.col(j).array();
      mu = (mj * gk).mean();
      var = std::max(0.0, (mj * gk).square().mean() - mu * mu);
    }
    switch (w.kind) {
      case Weighting::Kind::studentized:
        z[j] = mu / std::max(std::sqrt(var), w.floor);
        break;
      case Weighting::Kind::unit:
        z[j] = mu;
        break;
      case Weighting::Kind::custom:
        z[j] = w.omega(theta, *g, j) * mu;
        break;
    }
  }
  return z;
}

StatResult KsEngine::evaluate(const VectorXd& theta, const Weighting& w) {
  if (theta.size() != model_.theta_dim()) throw DimensionError("theta dimension");
  if (w.kind == Weighting::Kind::studentized && !(w.floor > 0.0)) {
    throw DomainError("studentized weighting needs a positive truncation point");
  }
  if (s_.kind == SFunction::Kind::neg_part_sup_norm && w.kind != Weighting::Kind::custom) {
    return evaluate_sup_norm(theta, w);
  }
  return evaluate_joint(theta, w);
}

StatResult KsEngine::evaluate_sup_norm(const VectorXd& theta, const Weighting& w) {
  load_all(theta);
  ScanHit best;
  Index best_generic = 0;
  if (intervals_ || boxes_) {
    for (Index j = 0; j < model_.d_y(); ++j) {
      ScanHit h;
      if (intervals_) {
        h = w.kind == Weighting::Kind::unit ? intervals_->max_raw(j)
                                            : intervals_->max_studentized(j, w.floor);
      } else {
        h = w.kind == Weighting::Kind::unit
                ? boxes_->max_weighted(j, [](const ScanHit&) { return 1.0; })
                : boxes_->max_studentized(j, w.floor);
      }
      if (h.value > best.value) best = h;
    }
  } else {
    const double inv_n = 1.0 / static_cast<double>(sample_.n());
    const MatrixXd mu = gvals_.transpose() * m_ * inv_n;
    const MatrixXd second = gvals_.array().square().matrix().transpose() *
                            m_.array().square().matrix() * inv_n;
    for (Index k = 0; k < mu.rows(); ++k) {
      for (Index j = 0; j < mu.cols(); ++j) {
        double v = -mu(k, j);
        if (w.kind == Weighting::Kind::studentized) {
          const double var = std::max(0.0, second(k, j) - mu(k, j) * mu(k, j));
          v /= std::max(std::sqrt(var), w.floor);
        }
        if (v > best.value) {
          best.value = v;
          best_generic = k;
        }
      }
    }
  }

  StatResult r;
  r.t_value = std::max(0.0, best.value);
  r.argmax_instrument = candidate_instrument(best, best_generic);
  const VectorXd z = weighted_vector(theta, w, best, best_generic);
  r.studentized_min = z.minCoeff(&r.argmin_component);
  return r;
}

StatResult KsEngine::evaluate_joint(const VectorXd& theta, const Weighting& w) {
  load_all(theta);
  ScanHit best;
  Index best_generic = 0;
  auto consider = [&](const ScanHit& h, Index k) {
    const double v = s_value(s_, weighted_vector(theta, w, h, k));
    if (v > best.value) {
      best = h;
      best.value = v;
      best_generic = k;
    }
  };
  if (intervals_) {
    const Index G = intervals_->groups();
    for (Index a = 0; a < G; ++a)
      for (Index b = a + 1; b <= G; ++b) consider(ScanHit{0.0, a, b}, 0);
  } else if (boxes_) {
    const Index K0 = boxes_->cuts(0), K1 = boxes_->cuts(1);
    for (Index a0 = 0; a0 < K0; ++a0)
      for (Index b0 = a0 + 1; b0 <= K0; ++b0)
        for (Index a1 = 0; a1 < K1; ++a1)
          for (Index b1 = a1 + 1; b1 <= K1; ++b1) consider(ScanHit{0.0, a0, b0, a1, b1}, 0);
  } else {
    for (Index k = 0; k < static_cast<Index>(generic_.size()); ++k) consider(ScanHit{}, k);
  }
  StatResult r;
  r.t_value = std::max(0.0, best.value);
  r.argmax_instrument = candidate_instrument(best, best_generic);
  const VectorXd z = weighted_vector(theta, w, best, best_generic);
  r.studentized_min = z.minCoeff(&r.argmin_component);
  return r;
}

double KsEngine::restricted_sup(const VectorXd& theta, const Weighting& w, int direction) {
  load_all(theta);
  double best = 0.0;
  for (Index j = 0; j < model_.d_y(); ++j) {
    if (!component_selected(j, direction)) continue;
    if (intervals_) {
      ScanHit h;
      if (w.kind == Weighting::Kind::custom) {
        h = intervals_->max_weighted(
            j, [&](Index a, Index b) { return w.omega(theta, intervals_->instrument(a, b), j); });
      } else if (w.kind == Weighting::Kind::unit) {
        h = intervals_->max_raw(j);
      } else {
        h = intervals_->max_studentized(j, w.floor);
      }
      best = std::max(best, h.value);
    } else if (boxes_) {
      ScanHit h;
      if (w.kind == Weighting::Kind::custom) {
        h = boxes_->max_weighted(
            j, [&](const ScanHit& c) { return w.omega(theta, boxes_->instrument(c), j); });
      } else if (w.kind == Weighting::Kind::unit) {
        h = boxes_->max_weighted(j, [](const ScanHit&) { return 1.0; });
      } else {
        h = boxes_->max_studentized(j, w.floor);
      }
      best = std::max(best, h.value);
    } else {
      const double inv_n = 1.0 / static_cast<double>(sample_.n());
      for (Index k = 0; k < static_cast<Index>(generic_.size()); ++k) {
        const auto mg = m_.col(j).array() * gvals_.col(k).array();
        const double mu = mg.sum() * inv_n;
        double v = -mu;
        if (w.kind == Weighting::Kind::studentized) {
          v /= std::max(std::sqrt(std::max(0.0, mg.square().sum() * inv_n - mu * mu)), w.floor);
        } else if (w.kind == Weighting::Kind::custom) {
          v = -w.omega(theta, generic_[k], j) * mu;
        }
        best = std::max(best, v);
      }
    }
  }
  return best;
}

bool KsEngine::exceeds(const VectorXd& theta, double thr, int direction, const Weighting& w) {
  if (thr < 0.0) return true;  // the statistic is nonnegative
  if (s_.kind != SFunction::Kind::neg_part_sup_norm) {
    if (direction != 0) {
      throw DomainError("component-restricted tests need the sup-norm S function");
    }
    return evaluate(theta, w).t_value > thr;
  }
  if (w.kind == Weighting::Kind::custom || !(intervals_ || boxes_)) {
    return restricted_sup(theta, w, direction) > thr;
  }
  for (Index j = 0; j < model_.d_y(); ++j) {
    if (!component_selected(j, direction)) continue;
    load(theta, j);
    bool hit = false;
    if (w.kind == Weighting::Kind::studentized) {
      hit = intervals_ ? intervals_->studentized_exceeds(j, thr, w.floor)
                       : boxes_->studentized_exceeds(j, thr, w.floor);
    } else {
      hit = intervals_ ? intervals_->max_raw(j).value > thr : boxes_->raw_exceeds(j, thr);
    }
    if (hit) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Public statistic

StatResult ks_statistic(const Sample& sample, const MomentModel& model,
                        const Eigen::Ref<const VectorXd>& theta, const InstrumentFamily& family,
                        const SFunction& s, const TuningPolicy& tuning) {
  if (sample.n() < 2) throw DomainError("ks_statistic needs n >= 2");
  KsEngine engine(sample, model, family, s);
  StatResult r = engine.evaluate(theta, Weighting::studentized(sigma_n(tuning, sample.n())));
  r.scaled = weighted_scale(sample.n()) * r.t_value;
  return r;
}

double plugin_sd_scale(const Sample& sample, const MomentModel& model, const ThetaGrid& grid) {
  if (grid.size() == 0) throw DomainError("plugin_sd_scale: empty grid");
  if (sample.n() < 1) throw DomainError("plugin_sd_scale: empty sample");
  model.validate(sample);
  double best = 0.0;
  VectorXd col(sample.n());
  for (Index p = 0; p < grid.size(); ++p) {
    const VectorXd theta = grid.point(p);
    for (Index j = 0; j < model.d_y(); ++j) {
      model.eval_component(sample, theta, j, col);
      const double mean = col.mean();
      const double var = std::max(0.0, (col.array() - mean).square().mean());
      best = std::max(best, std::sqrt(var));
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Weighted criterion

namespace {

class WeightedCriterion final : public RegionCriterion {
 public:
  WeightedCriterion(const Sample& sample, const MomentModel& model, const InstrumentFamily& family,
                    const SFunction& s, const TuningPolicy& tuning)
      : engine_(sample, model, family, s),
        weighting_(Weighting::studentized(sigma_n(tuning, sample.n()))),
        scale_(weighted_scale(sample.n())) {
    monotone_ = model.intercept_direction().has_value() && model.two_valued() &&
                family.is_indicator() && s.kind == SFunction::Kind::neg_part_sup_norm;
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

std::unique_ptr<RegionCriterion> make_weighted_criterion(const Sample& sample,
                                                         const MomentModel& model,
                                                         const InstrumentFamily& family,
                                                         const SFunction& s,
                                                         const TuningPolicy& tuning) {
  if (sample.n() < 3) throw DomainError("weighted KS region needs n >= 3");
  return std::make_unique<WeightedCriterion>(sample, model, family, s, tuning);
}

}  // namespace momentset
