#include "momentset/mc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace momentset {

// ---------------------------------------------------------------------------
// Seeds

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t replication_seed(std::uint64_t base, std::uint64_t n, std::uint64_t rep,
                               std::uint64_t stream) {
  std::uint64_t h = mix64(base);
  h = mix64(h ^ n);
  h = mix64(h ^ rep);
  return mix64(h ^ stream);
}

// ---------------------------------------------------------------------------
// DGPs

std::string to_string(DgpKind k) {
  switch (k) {
    case DgpKind::median_missing:
      return "median_missing";
    case DgpKind::slope_counterexample:
      return "slope_counterexample";
    case DgpKind::contact_set:
      return "contact_set";
    case DgpKind::selection_tails:
      return "selection_tails";
  }
  return "?";
}

DgpKind dgp_kind_from_string(const std::string& s) {
  for (auto k : {DgpKind::median_missing, DgpKind::slope_counterexample, DgpKind::contact_set,
                 DgpKind::selection_tails}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("dgp.kind", "unknown DGP '" + s + "'");
}

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

constexpr double kBandTol = 1e-9;

// Missing probability of selection_tails in terms of t in [0, 1], where
// x = 1 - t (finite support) or x = 1 / t (at infinity); both tails give
// p_max * t^phi_m and t = 0 is the identifying limit.
double selection_missing_at(const DgpSpec& d, double t) { return d.p_max * std::pow(t, d.phi_m); }

}  // namespace

DgpSpec resolve(const DgpSpec& dgp) {
  DgpSpec d = dgp;
  if (d.true_theta.size() == 0) {
    switch (d.kind) {
      case DgpKind::median_missing:
        d.true_theta = vec({0.25, 0.5});
        break;
      case DgpKind::slope_counterexample:
      case DgpKind::contact_set:
        d.true_theta = vec({0.0, 0.0});
        break;
      case DgpKind::selection_tails:
        d.true_theta = vec({0.5});
        break;
    }
  }
  const Index want = d.kind == DgpKind::selection_tails ? 1 : 2;
  if (d.true_theta.size() != want) {
    throw ConfigError("dgp.true_theta", "expected " + std::to_string(want) + " entries");
  }
  if (d.kind == DgpKind::slope_counterexample && d.true_theta.norm() != 0.0) {
    throw ConfigError("dgp.true_theta", "the slope counterexample is identified at (0, 0) only");
  }
  if (d.kind == DgpKind::selection_tails && d.true_theta[0] != 0.5) {
    throw ConfigError("dgp.true_theta", "selection_tails draws Y* ~ unif(0,1), so gamma = 0.5");
  }
  if (!(d.noise_sd > 0.0)) throw ConfigError("dgp.noise_sd", "must be positive");
  if (d.kind == DgpKind::selection_tails) {
    if (!(d.phi_m > 0.0)) throw ConfigError("dgp.phi_m", "must be positive");
    if (d.tail == TailKind::finite && !(d.phi_x > -1.0)) {
      throw ConfigError("dgp.phi_x", "finite support needs phi_x > -1");
    }
    if (d.tail == TailKind::infinity && !(d.phi_x > 1.0)) {
      throw ConfigError("dgp.phi_x", "identification at infinity needs phi_x > 1");
    }
    if (!(d.p_max > 0.0 && d.p_max <= 1.0)) throw ConfigError("dgp.p_max", "must lie in (0, 1]");
  }
  return d;
}

ModelSpec model_spec_for(const DgpSpec& dgp_in) {
  const DgpSpec d = resolve(dgp_in);
  ModelSpec m;
  switch (d.kind) {
    case DgpKind::median_missing:
      m.kind = ModelKind::interval_quantile;
      m.tau = 0.5;
      m.theta_box = {vec({-1.5, -0.75}), vec({2.0, 1.75})};
      break;
    case DgpKind::slope_counterexample:
      // The intercept is fixed at zero so that the distance to the
      // identified set is the largest slope kept in the region.
      m.kind = ModelKind::interval_regression;
      m.theta_box = {vec({0.0, -2.0}), vec({0.0, 2.0})};
      break;
    case DgpKind::contact_set:
      m.kind = ModelKind::one_sided_regression;
      m.theta_box = {vec({-1.0, -1.0}), vec({1.0, 1.0})};
      break;
    case DgpKind::selection_tails:
      m.kind = ModelKind::selection;
      m.y_lower = 0.0;
      m.y_upper = 1.0;
      m.theta_box = {vec({0.0}), vec({1.0})};
      break;
  }
  return m;
}

ThetaGrid default_grid(const DgpSpec& dgp) {
  const ModelSpec m = model_spec_for(dgp);
  const double pitch =
      dgp.kind == DgpKind::contact_set || dgp.kind == DgpKind::slope_counterexample ? 0.01 : 0.005;
  return ThetaGrid::uniform(m.theta_box.lower, m.theta_box.upper,
                            VectorXd::Constant(m.theta_box.dim(), pitch));
}

double missing_probability(double x) {
  const double x2 = x * x;
  return 0.2 - x2 / 20.0 + x2 * x2 / 200.0;
}

Sample simulate(const DgpSpec& dgp_in, Index n, std::uint64_t seed) {
  if (n < 0) throw DomainError("simulate: negative sample size");
  const DgpSpec d = resolve(dgp_in);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, d.noise_sd);

  switch (d.kind) {
    case DgpKind::median_missing: {
      MatrixXd x(n, 1), w(n, 2);
      for (Index i = 0; i < n; ++i) {
        const double xi = -3.0 + 6.0 * unit(rng);
        const double u = -1.0 + 2.0 * unit(rng);
        const double ws = d.true_theta[0] + d.true_theta[1] * xi + u;
        const bool missing = unit(rng) < missing_probability(xi);
        x(i, 0) = xi;
        w(i, 0) = missing ? -kInf : ws;
        w(i, 1) = missing ? kInf : ws;
      }
      return Sample(std::move(x), std::move(w));
    }
    case DgpKind::slope_counterexample: {
      MatrixXd x(n, 1), w(n, 2);
      for (Index i = 0; i < n; ++i) {
        const double xi = -0.5 + unit(rng);
        x(i, 0) = xi;
        w(i, 0) = -xi * xi + normal(rng);
        w(i, 1) = xi * xi + normal(rng);
      }
      return Sample(std::move(x), std::move(w));
    }
    case DgpKind::contact_set: {
      MatrixXd x(n, 1), w(n, 1);
      for (Index i = 0; i < n; ++i) {
        const double xi = unit(rng);
        x(i, 0) = xi;
        w(i, 0) = d.true_theta[0] + d.true_theta[1] * xi + normal(rng);
      }
      return Sample(std::move(x), std::move(w));
    }
    case DgpKind::selection_tails: {
      MatrixXd x(n, 1);
      VectorXd y(n);
      Eigen::VectorXi obs(n);
      for (Index i = 0; i < n; ++i) {
        // 1 - unit(rng) lies in (0, 1], keeping the Pareto draw finite.
        const double v = 1.0 - unit(rng);
        double xi, t;
        if (d.tail == TailKind::finite) {
          xi = 1.0 - std::pow(v, 1.0 / (d.phi_x + 1.0));
          t = 1.0 - xi;
        } else {
          xi = std::pow(v, -1.0 / (d.phi_x - 1.0));
          t = 1.0 / xi;
        }
        x(i, 0) = xi;
        y[i] = unit(rng);
        obs[i] = unit(rng) < selection_missing_at(d, t) ? 0 : 1;
      }
      return selection_sample(x, y, obs, 0.0, 1.0);
    }
  }
  throw DomainError("simulate: unknown DGP");
}

std::pair<double, double> median_bands(const DgpSpec& dgp_in, double x) {
  const DgpSpec d = resolve(dgp_in);
  if (d.kind != DgpKind::median_missing) {
    throw DomainError("median_bands is defined for the median_missing design");
  }
  if (!(std::abs(x) <= 3.0)) throw DomainError("median_bands: |x| must be at most 3");
  const double p = missing_probability(x);
  const double line = d.true_theta[0] + d.true_theta[1] * x;
  return {line - 1.0 + (1.0 - 2.0 * p) / (1.0 - p), line - 1.0 + 1.0 / (1.0 - p)};
}

bool oracle_contains(const DgpSpec& dgp_in, const Eigen::Ref<const VectorXd>& theta,
                     Index x_check_count) {
  const DgpSpec d = resolve(dgp_in);
  if (x_check_count < 2) throw ConfigError("x_check_count", "needs at least 2 points");
  const double last = static_cast<double>(x_check_count - 1);
  for (Index k = 0; k < x_check_count; ++k) {
    const double frac = static_cast<double>(k) / last;
    switch (d.kind) {
      case DgpKind::median_missing: {
        const double x = -3.0 + 6.0 * frac;
        const auto [ql, qh] = median_bands(d, x);
        const double line = theta[0] + theta[1] * x;
        if (line < ql - kBandTol || line > qh + kBandTol) return false;
        break;
      }
      case DgpKind::slope_counterexample: {
        const double x = -0.5 + frac;
        const double line = theta[0] + theta[1] * x;
        if (line < -x * x - kBandTol || line > x * x + kBandTol) return false;
        break;
      }
      case DgpKind::contact_set: {
        const double x = frac;
        const double gap = d.true_theta[0] + d.true_theta[1] * x - theta[0] - theta[1] * x;
        if (gap < -kBandTol) return false;
        break;
      }
      case DgpKind::selection_tails: {
        const double p = selection_missing_at(d, frac);
        const double lo = 0.5 * (1.0 - p), hi = 0.5 * (1.0 - p) + p;
        if (theta[0] < lo - kBandTol || theta[0] > hi + kBandTol) return false;
        break;
      }
    }
  }
  return true;
}

Index IdentifiedSetOracle::count() const {
  Index c = 0;
  for (auto m : member) c += m ? 1 : 0;
  return c;
}

MatrixXd IdentifiedSetOracle::member_points() const {
  MatrixXd out(count(), grid.dim());
  Index r = 0;
  for (Index p = 0; p < grid.size(); ++p) {
    if (member[p]) out.row(r++) = grid.point(p).transpose();
  }
  return out;
}

IdentifiedSetOracle oracle_set(const DgpSpec& dgp, const ThetaGrid& grid, Index x_check_count) {
  IdentifiedSetOracle o;
  o.grid = grid;
  o.x_check_count = x_check_count;
  o.member.assign(static_cast<size_t>(grid.size()), 0);
  for (Index p = 0; p < grid.size(); ++p) {
    o.member[p] = oracle_contains(dgp, grid.point(p), x_check_count) ? 1 : 0;
  }
  return o;
}

// ---------------------------------------------------------------------------
// Quantiles

double quantile(std::vector<double> v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= v.size() || frac == 0.0) return v[lo];
  if (std::isinf(v[lo + 1]) || std::isinf(v[lo])) return v[lo + 1];
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

std::vector<double> quantiles(const std::vector<double>& v, const std::vector<double>& probs) {
  std::vector<double> out;
  out.reserve(probs.size());
  for (double p : probs) out.push_back(quantile(v, p));
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo

void parallel_for(Index count, int threads, const std::function<void(Index)>& body) {
  if (count <= 0) return;
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(count)));
  if (workers == 1) {
    for (Index i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<Index> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      while (!failed.load()) {
        const Index i = next.fetch_add(1);
        if (i >= count) break;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

const McRow& McReport::row(Estimator e, Index n) const {
  for (const auto& r : rows) {
    if (r.estimator == e && r.n == n) return r;
  }
  throw DomainError("no report row for " + to_string(e) + " at n = " + std::to_string(n));
}

namespace {

ConfidenceRegion estimate_region(const McDesign& design, const Sample& sample,
                                 const MomentModel& model, Estimator e) {
  switch (e) {
    case Estimator::weighted_ks:
      return confidence_region(sample, model, design.grid, design.family, design.s, design.tuning,
                               design.strategy);
    case Estimator::bounded_ks:
      return bounded_region(sample, model, design.grid, design.family, design.s, design.bounded,
                            design.strategy);
    case Estimator::kernel:
      return kernel_region(sample, model, design.grid, design.kernel, design.s,
                           std::numeric_limits<double>::quiet_NaN(), design.strategy);
  }
  throw DomainError("unknown estimator");
}

McDesign with_defaults(McDesign design) {
  design.dgp = resolve(design.dgp);
  if (design.grid.size() == 0) design.grid = default_grid(design.dgp);
  if (design.reps < 1) throw ConfigError("reps", "must be at least 1");
  if (design.sizes.empty()) throw ConfigError("sizes", "must be nonempty");
  if (design.estimators.empty()) throw ConfigError("estimators", "must be nonempty");
  for (Index n : design.sizes) {
    if (n < 3) throw ConfigError("sizes", "sample sizes must be at least 3");
  }
  return design;
}

void fill_record(ReplicationRecord& rec, const ConfidenceRegion& region,
                 const IdentifiedSetOracle& oracle,
                 const std::vector<Projection>& oracle_projection) {
  const ThetaGrid& grid = region.grid;
  rec.count = region.count();
  rec.empty = rec.count == 0;
  rec.touches_boundary = region.touches_grid_boundary();
  rec.covered = true;
  for (Index p = 0; p < grid.size(); ++p) {
    if (oracle.member[p] && !region.member[p]) {
      rec.covered = false;
      break;
    }
  }
  rec.d_h = rec.empty ? kInf : hausdorff(grid, region.member, oracle.member).d_h;
  const Index dim = grid.dim();
  rec.proj_d_h.assign(static_cast<size_t>(dim), kInf);
  rec.lower.assign(static_cast<size_t>(dim), std::numeric_limits<double>::quiet_NaN());
  rec.upper.assign(static_cast<size_t>(dim), std::numeric_limits<double>::quiet_NaN());
  for (Index k = 0; k < dim; ++k) {
    const Projection pr = project(region, k);
    if (!pr.empty()) {
      rec.proj_d_h[k] = hausdorff_1d(pr.values, oracle_projection[k].values);
      rec.lower[k] = pr.lower;
      rec.upper[k] = pr.upper;
    }
  }
}

}  // namespace

ReplicationRecord run_replication(const McDesign& design_in, const IdentifiedSetOracle& oracle,
                                  const std::vector<Projection>& oracle_projection,
                                  Estimator estimator, Index n, Index rep) {
  const McDesign design = with_defaults(design_in);
  ReplicationRecord rec;
  rec.estimator = estimator;
  rec.n = n;
  rec.rep = rep;
  rec.seed = replication_seed(design.base_seed, static_cast<std::uint64_t>(n),
                              static_cast<std::uint64_t>(rep));
  try {
    const Sample sample = simulate(design.dgp, n, rec.seed);
    const MomentModel model = build_model(model_spec_for(design.dgp));
    fill_record(rec, estimate_region(design, sample, model, estimator), oracle, oracle_projection);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

std::vector<McRow> aggregate(const McDesign& design_in,
                             const std::vector<ReplicationRecord>& records) {
  const McDesign design = with_defaults(design_in);
  const Index dim = design.grid.dim();
  std::vector<McRow> rows;
  for (Estimator e : design.estimators) {
    for (Index n : design.sizes) {
      McRow row;
      row.estimator = e;
      row.n = n;
      std::vector<double> dh;
      std::vector<std::vector<double>> pdh(dim), lo(dim), hi(dim);
      std::vector<Index> positive(dim, 0);
      Index covered = 0;
      for (const auto& r : records) {
        if (r.estimator != e || r.n != n) continue;
        if (!r.ok) {
          ++row.failures;
          continue;
        }
        ++row.reps_ok;
        covered += r.covered ? 1 : 0;
        row.empty_regions += r.empty ? 1 : 0;
        row.boundary_touches += r.touches_boundary ? 1 : 0;
        dh.push_back(r.d_h);
        for (Index k = 0; k < dim; ++k) {
          pdh[k].push_back(r.proj_d_h[k]);
          if (!r.empty) {
            lo[k].push_back(r.lower[k]);
            hi[k].push_back(r.upper[k]);
            positive[k] += r.lower[k] > 0.0 ? 1 : 0;
          }
        }
      }
      row.coverage = row.reps_ok > 0 ? static_cast<double>(covered) / row.reps_ok
                                     : std::numeric_limits<double>::quiet_NaN();
      row.d_h_q = quantiles(dh, kDistanceProbs);
      for (Index k = 0; k < dim; ++k) {
        row.proj_d_h_q.push_back(quantiles(pdh[k], kDistanceProbs));
        row.lower_q.push_back(quantiles(lo[k], kLowerProbs));
        row.upper_q.push_back(quantiles(hi[k], kUpperProbs));
        row.frac_lower_positive.push_back(
            row.reps_ok > 0 ? static_cast<double>(positive[k]) / row.reps_ok
                            : std::numeric_limits<double>::quiet_NaN());
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

McReport run_mc(const McDesign& design_in) {
  McReport report;
  report.design = with_defaults(design_in);
  const McDesign& design = report.design;
  report.oracle = oracle_set(design.dgp, design.grid, design.x_check_count);
  if (report.oracle.count() == 0) {
    throw InvariantViolation("identified-set oracle is empty on the grid");
  }
  for (Index k = 0; k < design.grid.dim(); ++k) {
    report.oracle_projection.push_back(project(design.grid, report.oracle.member, k));
  }

  const Index n_sizes = static_cast<Index>(design.sizes.size());
  const Index n_est = static_cast<Index>(design.estimators.size());
  const Index tasks = n_sizes * design.reps;
  // Slot (estimator, size, rep) so the record order never depends on timing.
  std::vector<ReplicationRecord> records(static_cast<size_t>(n_est * tasks));
  parallel_for(tasks, design.threads, [&](Index t) {
    const Index s = t / design.reps;
    const Index rep = t % design.reps;
    const Index n = design.sizes[s];
    ReplicationRecord base;
    base.n = n;
    base.rep = rep;
    base.seed = replication_seed(design.base_seed, static_cast<std::uint64_t>(n),
                                 static_cast<std::uint64_t>(rep));
    std::optional<Sample> sample;
    std::optional<MomentModel> model;
    std::string sample_error;
    try {
      sample.emplace(simulate(design.dgp, n, base.seed));
      model.emplace(build_model(model_spec_for(design.dgp)));
    } catch (const Error& e) {
      sample_error = e.what();
    }
    for (Index ei = 0; ei < n_est; ++ei) {
      ReplicationRecord rec = base;
      rec.estimator = design.estimators[ei];
      if (!sample) {
        rec.ok = false;
        rec.error = sample_error;
      } else {
        try {
          fill_record(rec, estimate_region(design, *sample, *model, rec.estimator),
                      report.oracle, report.oracle_projection);
        } catch (const ConfigError&) {
          throw;
        } catch (const Error& e) {
          rec.ok = false;
          rec.error = e.what();
        }
      }
      records[static_cast<size_t>(ei * tasks + t)] = std::move(rec);
    }
  });
  report.records = std::move(records);
  report.rows = aggregate(design, report.records);
  return report;
}

// ---------------------------------------------------------------------------
// Rates

std::string to_string(RateVariable v) {
  return v == RateVariable::c2_log_n_over_n ? "c2_log_n_over_n" : "log_n_over_n";
}

RateVariable rate_variable_from_string(const std::string& s) {
  if (s == "c2_log_n_over_n") return RateVariable::c2_log_n_over_n;
  if (s == "log_n_over_n") return RateVariable::log_n_over_n;
  throw ConfigError("rate_variable", "unknown rate variable '" + s + "'");
}

RateReport fit_rate(const std::vector<Index>& sizes, const std::vector<double>& medians,
                    const TuningPolicy& tuning, RateVariable variable,
                    double predicted_exponent) {
  if (sizes.size() != medians.size()) throw DimensionError("fit_rate: sizes and medians differ");
  RateReport r;
  r.sizes = sizes;
  r.medians = medians;
  r.predicted_exponent = predicted_exponent;
  for (Index n : sizes) {
    const double nd = static_cast<double>(n);
    double v = std::log(nd) / nd;
    if (variable == RateVariable::c2_log_n_over_n) {
      const double c = critical_value(tuning, n);
      v *= c * c;
    }
    r.rate_values.push_back(v);
  }
  std::vector<double> lx, ly;
  for (size_t k = 0; k < sizes.size(); ++k) {
    if (medians[k] > 0.0 && std::isfinite(medians[k])) {
      lx.push_back(std::log(r.rate_values[k]));
      ly.push_back(std::log(medians[k]));
    } else {
      r.excluded.push_back(sizes[k]);
      r.warnings.push_back("median distance at n = " + std::to_string(sizes[k]) +
                           " is not positive and finite; excluded from the fit");
    }
  }
  if (lx.size() >= 2) {
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
    double sxy = 0.0, sxx = 0.0;
    for (size_t k = 0; k < lx.size(); ++k) {
      sxy += (lx[k] - mx) * (ly[k] - my);
      sxx += (lx[k] - mx) * (lx[k] - mx);
    }
    r.fitted_exponent = sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
  } else {
    r.fitted_exponent = std::numeric_limits<double>::quiet_NaN();
    r.warnings.push_back("fewer than two usable sizes; no exponent fitted");
  }
  for (size_t k = 0; k + 1 < sizes.size(); ++k) {
    r.observed_shrink.push_back(medians[k + 1] / medians[k]);
    r.predicted_shrink.push_back(
        std::pow(r.rate_values[k + 1] / r.rate_values[k], predicted_exponent));
  }
  return r;
}

RateReport rate_experiment(McDesign design, const std::vector<Index>& sizes,
                           RateVariable variable, double predicted_exponent) {
  if (sizes.size() < 3) throw ConfigError("sizes", "a rate experiment needs at least 3 sizes");
  design.sizes = sizes;
  design.estimators.resize(1);
  const McReport report = run_mc(design);
  std::vector<double> medians;
  for (Index n : sizes) medians.push_back(report.row(design.estimators[0], n).d_h_q[1]);
  return fit_rate(sizes, medians, design.tuning, variable, predicted_exponent);
}

// ---------------------------------------------------------------------------
// Divergence diagnostic

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DimensionError("spearman: lengths differ");
  const size_t m = a.size();
  if (m < 2) return std::numeric_limits<double>::quiet_NaN();
  auto ranks = [m](const std::vector<double>& v) {
    std::vector<size_t> idx(m);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(), [&](size_t i, size_t j) { return v[i] < v[j]; });
    std::vector<double> r(m);
    for (size_t i = 0; i < m;) {
      size_t j = i;
      while (j + 1 < m && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / m;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / m;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t k = 0; k < m; ++k) {
    sab += (ra[k] - ma) * (rb[k] - mb);
    saa += (ra[k] - ma) * (ra[k] - ma);
    sbb += (rb[k] - mb) * (rb[k] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

DivergenceReport divergence_diagnostic(const DgpSpec& dgp_in, const std::vector<Index>& sizes,
                                       Index reps, const TuningPolicy& tuning,
                                       std::uint64_t base_seed, int threads) {
  const DgpSpec dgp = resolve(dgp_in);
  if (dgp.kind != DgpKind::contact_set) {
    throw ConfigError("dgp.kind", "the divergence diagnostic uses the contact_set DGP");
  }
  if (reps < 1) throw ConfigError("reps", "must be at least 1");
  if (sizes.empty()) throw ConfigError("sizes", "must be nonempty");
  const MomentModel model = build_model(model_spec_for(dgp));
  DivergenceReport out;
  out.sizes = sizes;
  for (Index n : sizes) {
    if (n < 3) throw ConfigError("sizes", "sample sizes must be at least 3");
    std::vector<double> values(static_cast<size_t>(reps));
    parallel_for(reps, threads, [&](Index r) {
      const Sample s = simulate(
          dgp, n,
          replication_seed(base_seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r)));
      const StatResult st = ks_statistic(s, model, dgp.true_theta, InstrumentFamily::intervals(),
                                         SFunction::sup_norm(), tuning);
      values[static_cast<size_t>(r)] = std::sqrt(static_cast<double>(n)) * st.t_value;
    });
    out.medians.push_back(quantile(values, 0.5));
  }
  if (sizes.size() >= 2) {
    std::vector<double> ns(sizes.begin(), sizes.end());
    out.trend = spearman(ns, out.medians);
  }
  return out;
}

}  // namespace momentset
