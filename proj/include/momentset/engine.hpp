#pragma once

// Shared evaluation engine for the KS-type statistics. Holds the per-sample
// scan structures for one instrument family and evaluates
// sup_g S(w_1 mu_1, ..., w_dY mu_dY) for a choice of weights w.

#include "momentset/core.hpp"
#include "momentset/ksstat.hpp"
#include "momentset/model.hpp"
#include "momentset/scan.hpp"

#include <functional>
#include <optional>

namespace momentset {

/// Weight applied to mu_hat_j(theta, g).
struct Weighting {
  enum class Kind {
    studentized,  // 1 / (sigma_hat_j v floor)
    unit,         // 1
    custom,       // omega(theta, g, j)
  };
  Kind kind = Kind::studentized;
  double floor = 0.0;
  std::function<double(const VectorXd&, const Instrument&, Index)> omega;

  static Weighting studentized(double floor) { return {Kind::studentized, floor, {}}; }
  static Weighting unit() { return {Kind::unit, 0.0, {}}; }
};

class KsEngine {
 public:
  KsEngine(const Sample& sample, const MomentModel& model, const InstrumentFamily& family,
           const SFunction& s);

  /// Unscaled statistic and its maximizer.
  StatResult evaluate(const VectorXd& theta, const Weighting& w);

  /// Whether the statistic restricted to components with the given intercept
  /// direction (0 = all) exceeds `thr`.
  bool exceeds(const VectorXd& theta, double thr, int direction, const Weighting& w);

  const MomentModel& model() const { return model_; }
  const Sample& sample() const { return sample_; }
  const SFunction& s() const { return s_; }
  const InstrumentFamily& family() const { return family_; }

 private:
  bool component_selected(Index j, int direction) const;
  void load(const VectorXd& theta, Index j);
  void load_all(const VectorXd& theta);

  StatResult evaluate_sup_norm(const VectorXd& theta, const Weighting& w);
  StatResult evaluate_joint(const VectorXd& theta, const Weighting& w);
  double restricted_sup(const VectorXd& theta, const Weighting& w, int direction);
  // Component-wise studentized values at one candidate.
  VectorXd weighted_vector(const VectorXd& theta, const Weighting& w, const ScanHit& hit,
                           Index generic_index) const;
  Instrument candidate_instrument(const ScanHit& hit, Index generic_index) const;

  const Sample& sample_;
  MomentModel model_;
  InstrumentFamily family_;
  SFunction s_;
  std::vector<int> direction_;

  std::optional<IntervalScan> intervals_;
  std::optional<BoxScan> boxes_;
  std::vector<Instrument> generic_;
  MatrixXd gvals_;  // n x |generic|
  MatrixXd m_;      // n x d_Y scratch
  VectorXd col_;    // n scratch
};

}  // namespace momentset
