#pragma once

// Data-generating processes with closed-form identified sets, and the Monte
// Carlo harness built on them.

#include "momentset/alt.hpp"
#include "momentset/core.hpp"
#include "momentset/ksstat.hpp"
#include "momentset/model.hpp"
#include "momentset/regions.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace momentset {

// ---------------------------------------------------------------------------
// Seeds

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t z);
/// Seed for replication `rep` at sample size `n`; `stream` separates
/// independent uses within one replication.
std::uint64_t replication_seed(std::uint64_t base, std::uint64_t n, std::uint64_t rep,
                               std::uint64_t stream = 0);

// ---------------------------------------------------------------------------
// DGPs

enum class DgpKind {
  median_missing,        // median regression with outcomes missing not at random
  slope_counterexample,  // E[W^H|x] = x^2, E[W^L|x] = -x^2
  contact_set,           // E[W|X] = theta_0 on the whole support
  selection_tails,       // selection model identified at a support endpoint
};

std::string to_string(DgpKind k);
DgpKind dgp_kind_from_string(const std::string& s);

enum class TailKind { finite, infinity };

struct DgpSpec {
  DgpKind kind = DgpKind::median_missing;
  VectorXd true_theta;     // empty: the kind's default
  double noise_sd = 1.0;   // slope_counterexample, contact_set
  // selection_tails: missing probability p_max * (1 - x)^phi_m on [0, 1)
  // (finite) or p_max * x^(-phi_m) on [1, inf) (infinity); X density
  // proportional to (1 - x)^phi_x or x^(-phi_x).
  double phi_m = 1.0;
  double phi_x = 0.0;
  TailKind tail = TailKind::finite;
  double p_max = 1.0;
};

/// The spec with `true_theta` filled in and parameters validated.
DgpSpec resolve(const DgpSpec& dgp);

/// Moment model estimated under the DGP (with its parameter box).
ModelSpec model_spec_for(const DgpSpec& dgp);
/// Default parameter grid for the DGP.
ThetaGrid default_grid(const DgpSpec& dgp);

/// Missing probability 1/5 - x^2/20 + x^4/200 of the median_missing design.
double missing_probability(double x);

Sample simulate(const DgpSpec& dgp, Index n, std::uint64_t seed);

/// Conditional medians (q_L, q_H) of W^L and W^H given X = x for
/// median_missing; requires |x| <= 3.
std::pair<double, double> median_bands(const DgpSpec& dgp, double x);

/// Grid points satisfying every conditional moment inequality at each point
/// of a uniform x-check grid.
struct IdentifiedSetOracle {
  ThetaGrid grid;
  std::vector<std::uint8_t> member;
  Index x_check_count = 0;

  Index count() const;
  MatrixXd member_points() const;
};

/// Whether theta satisfies the population inequalities on the x-check grid.
bool oracle_contains(const DgpSpec& dgp, const Eigen::Ref<const VectorXd>& theta,
                     Index x_check_count = 1201);
IdentifiedSetOracle oracle_set(const DgpSpec& dgp, const ThetaGrid& grid,
                               Index x_check_count = 1201);

// ---------------------------------------------------------------------------
// Monte Carlo

struct McDesign {
  DgpSpec dgp;
  std::vector<Estimator> estimators{Estimator::weighted_ks};
  std::vector<Index> sizes{200, 500, 1000};
  Index reps = 1000;
  std::uint64_t base_seed = 20240601;
  ThetaGrid grid;  // empty: default_grid(dgp)
  TuningPolicy tuning = TuningPolicy::standard(0.5);
  InstrumentFamily family = InstrumentFamily::intervals();
  SFunction s = SFunction::sup_norm();
  KernelSpec kernel;
  BoundedWeightPolicy bounded;
  Index x_check_count = 1201;
  RegionStrategy strategy = RegionStrategy::automatic;
  int threads = 1;
};

/// Outcome of one replication for one estimator.
struct ReplicationRecord {
  Estimator estimator = Estimator::weighted_ks;
  Index n = 0;
  Index rep = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  bool covered = false;
  bool empty = false;
  bool touches_boundary = false;
  Index count = 0;
  double d_h = 0.0;
  std::vector<double> proj_d_h;  // per axis
  std::vector<double> lower;     // hull per axis (NaN when empty)
  std::vector<double> upper;
};

inline const std::vector<double> kDistanceProbs{0.25, 0.5, 0.75, 0.9, 0.95};
inline const std::vector<double> kLowerProbs{0.05, 0.1, 0.25, 0.5, 0.75};
inline const std::vector<double> kUpperProbs{0.25, 0.5, 0.75, 0.9, 0.95};

/// Aggregates for one (estimator, n).
struct McRow {
  Estimator estimator = Estimator::weighted_ks;
  Index n = 0;
  Index reps_ok = 0;
  Index failures = 0;
  Index empty_regions = 0;
  Index boundary_touches = 0;
  double coverage = 0.0;
  std::vector<double> d_h_q;                    // at kDistanceProbs
  std::vector<std::vector<double>> proj_d_h_q;  // per axis, at kDistanceProbs
  std::vector<std::vector<double>> lower_q;     // per axis, at kLowerProbs
  std::vector<std::vector<double>> upper_q;     // per axis, at kUpperProbs
  std::vector<double> frac_lower_positive;      // per axis
};

struct McReport {
  McDesign design;
  std::vector<McRow> rows;
  std::vector<ReplicationRecord> records;
  IdentifiedSetOracle oracle;
  std::vector<Projection> oracle_projection;

  const McRow& row(Estimator e, Index n) const;
};

/// Linear-interpolation (type 7) quantile of `v` at probability p. Values
/// may include +inf, which sort last and propagate.
double quantile(std::vector<double> v, double p);
std::vector<double> quantiles(const std::vector<double>& v, const std::vector<double>& probs);

/// Evaluates one replication against a precomputed oracle.
ReplicationRecord run_replication(const McDesign& design, const IdentifiedSetOracle& oracle,
                                  const std::vector<Projection>& oracle_projection,
                                  Estimator estimator, Index n, Index rep);

McReport run_mc(const McDesign& design);

/// Rebuilds the aggregate rows from replication records.
std::vector<McRow> aggregate(const McDesign& design, const std::vector<ReplicationRecord>& records);

// ---------------------------------------------------------------------------
// Rates

enum class RateVariable {
  c2_log_n_over_n,  // c_n^2 log n / n
  log_n_over_n,     // log n / n
};

std::string to_string(RateVariable v);
RateVariable rate_variable_from_string(const std::string& s);

struct RateReport {
  std::vector<Index> sizes;
  std::vector<double> medians;
  std::vector<double> rate_values;
  double fitted_exponent = 0.0;
  double predicted_exponent = 0.0;
  std::vector<double> observed_shrink;   // medians[k+1] / medians[k]
  std::vector<double> predicted_shrink;  // (rate[k+1] / rate[k])^predicted
  std::vector<Index> excluded;           // sizes dropped for non-positive medians
  std::vector<std::string> warnings;
};

/// Least-squares slope of log median on log rate variable.
RateReport fit_rate(const std::vector<Index>& sizes, const std::vector<double>& medians,
                    const TuningPolicy& tuning, RateVariable variable, double predicted_exponent);

/// Runs the design over `sizes` (>= 3) for the first estimator and fits the
/// rate of its median Hausdorff distance.
RateReport rate_experiment(McDesign design, const std::vector<Index>& sizes,
                           RateVariable variable, double predicted_exponent);

// ---------------------------------------------------------------------------
// Divergence of sqrt(n) T_n at a contact-set parameter

struct DivergenceReport {
  std::vector<Index> sizes;
  std::vector<double> medians;  // median of sqrt(n) T_n(theta_0)
  double trend = std::numeric_limits<double>::quiet_NaN();  // Spearman(n, median)
};

double spearman(const std::vector<double>& a, const std::vector<double>& b);

DivergenceReport divergence_diagnostic(const DgpSpec& dgp, const std::vector<Index>& sizes,
                                       Index reps, const TuningPolicy& tuning,
                                       std::uint64_t base_seed, int threads = 1);

// ---------------------------------------------------------------------------
// Parallel helper

/// Runs body(i) for i in [0, count) on `threads` workers. Exceptions from
/// the body are rethrown after all workers stop.
void parallel_for(Index count, int threads, const std::function<void(Index)>& body);

}  // namespace momentset
