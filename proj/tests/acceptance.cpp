// Acceptance report: one PASS/FAIL line per criterion.
//
//   acceptance [AC1 AC7 ...]
//
// MOMENTSET_ACCEPT_REPS lowers the replication counts for a quick look;
// MOMENTSET_THREADS sets the worker count (default: all cores).

#include "oracles.hpp"

#include "momentset/alt.hpp"
#include "momentset/mc.hpp"
#include "momentset/regions.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>

using namespace momentset;

namespace {

int g_threads = 1;
Index g_reps_override = 0;
int g_failures = 0;

std::string num(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

void report(const std::string& id, bool pass, const std::string& detail) {
  std::cout << id << " " << (pass ? "PASS" : "FAIL") << "  " << detail << std::endl;
  if (!pass) ++g_failures;
}

Index reps_or(Index full) {
  return g_reps_override > 0 ? std::min(g_reps_override, full) : full;
}

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Index>(v.size()));
  Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

const McRow& row_at(const McReport& r, Estimator e, Index n) {
  for (const McRow& row : r.rows)
    if (row.estimator == e && row.n == n) return row;
  throw DomainError("missing report row");
}

// ---------------------------------------------------------------------------
// AC1-AC6: the median design with missing outcomes

const std::vector<Index> kSizes{200, 500, 1000};

McReport& median_design_report() {
  static std::optional<McReport> cached;
  if (!cached) {
    McDesign d;
    d.dgp.kind = DgpKind::median_missing;
    d.sizes = kSizes;
    d.reps = reps_or(1000);
    d.threads = g_threads;
    const auto t0 = std::chrono::steady_clock::now();
    cached = run_mc(d);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "# median design: " << d.reps << " reps per size, " << num(secs, 1) << " s"
              << std::endl;
    for (Index n : kSizes) {
      const McRow& r = row_at(*cached, Estimator::weighted_ks, n);
      std::cout << "#   n=" << n << " failures=" << r.failures << " empty=" << r.empty_regions
                << " boundary_touches=" << r.boundary_touches << std::endl;
    }
  }
  return *cached;
}

void ac1() {
  const McReport& r = median_design_report();
  bool pass = true;
  std::string detail = "coverage";
  for (Index n : kSizes) {
    const McRow& row = row_at(r, Estimator::weighted_ks, n);
    pass = pass && row.coverage >= 0.995 && row.failures == 0;
    detail += " n=" + std::to_string(n) + ":" + num(row.coverage);
  }
  report("AC1", pass, detail + " (need >= 0.995)");
}

void ac2() {
  const McReport& r = median_design_report();
  const std::map<Index, std::array<double, 3>> target{
      {200, {0.45, 0.50, 0.54}}, {500, {0.34, 0.36, 0.39}}, {1000, {0.27, 0.28, 0.30}}};
  bool pass = true;
  std::string detail = "d_H q25/q50/q75";
  for (Index n : kSizes) {
    const McRow& row = row_at(r, Estimator::weighted_ks, n);
    const auto& t = target.at(n);
    pass = pass && std::abs(row.d_h_q[1] - t[1]) <= 0.05 && std::abs(row.d_h_q[0] - t[0]) <= 0.06 &&
           std::abs(row.d_h_q[2] - t[2]) <= 0.06;
    detail += " n=" + std::to_string(n) + ":" + num(row.d_h_q[0], 2) + "/" + num(row.d_h_q[1], 2) +
              "/" + num(row.d_h_q[2], 2) + " (ref " + num(t[0], 2) + "/" + num(t[1], 2) + "/" +
              num(t[2], 2) + ")";
  }
  report("AC2", pass, detail);
}

void ac3() {
  const McReport& r = median_design_report();
  const std::array<std::array<double, 3>, 2> target{{{0.49, 0.36, 0.28}, {0.36, 0.25, 0.20}}};
  bool pass = true;
  std::string detail = "projection d_H medians";
  for (int axis = 0; axis < 2; ++axis) {
    detail += " theta" + std::to_string(axis + 1) + ":";
    for (std::size_t k = 0; k < kSizes.size(); ++k) {
      const double med = row_at(r, Estimator::weighted_ks, kSizes[k]).proj_d_h_q[axis][1];
      pass = pass && std::abs(med - target[axis][k]) <= 0.05;
      detail += (k ? "/" : "") + num(med, 2);
    }
    detail += " (ref " + num(target[axis][0], 2) + "/" + num(target[axis][1], 2) + "/" +
              num(target[axis][2], 2) + ")";
  }
  // Median hull ends of the theta1 projection, for reading the distances.
  detail += "; theta1 hull-end medians";
  for (Index n : kSizes) {
    const McRow& row = row_at(r, Estimator::weighted_ks, n);
    detail += " [" + num(row.lower_q[0][3], 2) + "," + num(row.upper_q[0][1], 2) + "]";
  }
  report("AC3", pass, detail);
}

void ac4() {
  const McReport& r = median_design_report();
  const std::array<double, 3> target{0.90, 0.80, 0.75};
  bool pass = true;
  std::string detail = "theta2 upper-end medians";
  for (std::size_t k = 0; k < kSizes.size(); ++k) {
    const double med = row_at(r, Estimator::weighted_ks, kSizes[k]).upper_q[1][1];
    pass = pass && std::abs(med - target[k]) <= 0.05;
    detail += (k ? "/" : " ") + num(med, 2);
  }
  const double frac = row_at(r, Estimator::weighted_ks, 200).frac_lower_positive[1];
  pass = pass && frac >= 0.85;
  report("AC4", pass,
         detail + " (ref .90/.80/.75); share with theta2 lower end > 0 at n=200: " + num(frac) +
             " (need >= 0.85)");
}

void ac5() {
  DgpSpec d;
  d.kind = DgpKind::median_missing;
  const IdentifiedSetOracle o = oracle_set(d, default_grid(d));
  const Projection p1 = project(o.grid, o.member, 0), p2 = project(o.grid, o.member, 1);
  const double tol = 0.005 + 1e-9;
  const bool pass = std::abs(p1.lower - 0.17) <= tol && std::abs(p1.upper - 0.33) <= tol &&
                    std::abs(p2.lower - 0.47) <= tol && std::abs(p2.upper - 0.53) <= tol;
  report("AC5", pass,
         "oracle hulls theta1=[" + num(p1.lower) + "," + num(p1.upper) + "] theta2=[" +
             num(p2.lower) + "," + num(p2.upper) + "] (ref [.17,.33] [.47,.53] +/- .005)");
}

void ac6() {
  const McReport& r = median_design_report();
  const double m200 = row_at(r, Estimator::weighted_ks, 200).d_h_q[1];
  const double m500 = row_at(r, Estimator::weighted_ks, 500).d_h_q[1];
  const double m1000 = row_at(r, Estimator::weighted_ks, 1000).d_h_q[1];
  const double f1 = m500 / m200, f2 = m1000 / m500;
  const bool pass = std::abs(f1 - 0.77) <= 0.12 && std::abs(f2 - 0.81) <= 0.12;
  report("AC6", pass,
         "shrink 200->500 " + num(f1) + " (ref .77), 500->1000 " + num(f2) + " (ref .81), tol .12");
}

// ---------------------------------------------------------------------------
// AC7: fast scans and Hausdorff distances against brute force

double fast_vs_brute(std::mt19937_64& rng, int rep) {
  std::uniform_int_distribution<int> size(2, 30);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const Index n = size(rng);
  Sample s;
  ModelKind kind;
  switch (rep % 4) {
    case 0:
      kind = ModelKind::interval_regression;
      s = oracle::interval_sample(rng, n, rep % 8 == 0);
      break;
    case 1:
      kind = ModelKind::interval_quantile;
      s = oracle::censored_sample(rng, n);
      break;
    case 2:
      kind = ModelKind::one_sided_regression;
      s = oracle::one_sided_sample(rng, n);
      break;
    default:
      kind = ModelKind::one_sided_quantile;
      s = oracle::one_sided_sample(rng, n);
  }
  const MomentModel m = build_model(oracle::spec_of(kind));
  const VectorXd theta = vec({u(rng), u(rng)});
  TuningPolicy t;
  const double floor = rep % 2 ? 0.05 : 0.4;
  t.sigma_rule = TuningPolicy::FixedValue{floor};
  const double fast =
      ks_statistic(s, m, theta, InstrumentFamily::intervals(), SFunction::sup_norm(), t).t_value;
  return std::abs(fast - oracle::brute_interval_stat(s, m, theta, SFunction::sup_norm(), floor));
}

void ac7() {
  std::mt19937_64 rng(7001);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) worst = std::max(worst, fast_vs_brute(rng, rep));

  const ThetaGrid grid = ThetaGrid::uniform(vec({0.0, 0.0}), vec({1.0, 1.0}), vec({0.05, 0.05}));
  double worst_h = 0.0;
  std::bernoulli_distribution coin(0.2);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<std::uint8_t> a(grid.size()), b(grid.size());
    for (Index i = 0; i < grid.size(); ++i) {
      a[i] = coin(rng);
      b[i] = coin(rng);
    }
    a[rep % grid.size()] = 1;
    b[(7 * rep) % grid.size()] = 1;
    const ConfidenceRegion ra{grid, a, VectorXd(), 0.0}, rb{grid, b, VectorXd(), 0.0};
    const double fast = hausdorff(grid, a, b).d_h;
    worst_h = std::max(worst_h, std::abs(fast - oracle::brute_hausdorff(ra.member_points(),
                                                                        rb.member_points())));
  }
  report("AC7", worst <= 1e-12 && worst_h <= 1e-12,
         "max |fast - brute| statistic " + sci(worst) + " over 200 samples, Hausdorff " +
             sci(worst_h) + " over 100 pairs (need <= 1e-12)");
}

// ---------------------------------------------------------------------------
// AC8: property suite

bool prop_nonnegative(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int rep = 0; rep < 300; ++rep) {
    const MomentModel m = build_model(oracle::spec_of(ModelKind::interval_regression, -10, 10));
    const Sample s = oracle::interval_sample(rng, 40);
    const StatResult r = ks_statistic(s, m, vec({u(rng), u(rng)}), InstrumentFamily::intervals(),
                                      SFunction::sup_norm(), TuningPolicy::standard());
    if (!(r.t_value >= 0.0)) return false;
  }
  return true;
}

bool prop_nesting() {
  DgpSpec d;
  d.kind = DgpKind::median_missing;
  const ThetaGrid grid = default_grid(d);
  const MomentModel m = build_model(model_spec_for(d));
  for (int rep = 0; rep < 5; ++rep) {
    const Sample s = simulate(d, 200, replication_seed(8001, 200, rep));
    auto crit = make_weighted_criterion(s, m, InstrumentFamily::intervals(), SFunction::sup_norm(),
                                        TuningPolicy::standard());
    std::vector<std::uint8_t> prev(grid.size(), 0);
    for (double c : {0.5, 1.5, 2.58, 4.0}) {
      const ConfidenceRegion r = build_region(*crit, grid, c);
      for (Index i = 0; i < grid.size(); ++i)
        if (prev[i] && !r.member[i]) return false;
      prev = r.member;
    }
  }
  return true;
}

bool prop_scale(std::mt19937_64& rng) {
  const MomentModel m = build_model(oracle::spec_of(ModelKind::one_sided_regression, -30, 30));
  for (int rep = 0; rep < 100; ++rep) {
    const Sample s = oracle::one_sided_sample(rng, 30);
    const Sample scaled(s.x(), s.w() * 3.0);
    TuningPolicy a, b;
    a.sigma_rule = TuningPolicy::FixedValue{0.2};
    b.sigma_rule = TuningPolicy::FixedValue{0.6};
    const VectorXd theta = vec({0.2 + 0.02 * rep, -0.4});
    const double ta =
        ks_statistic(s, m, theta, InstrumentFamily::intervals(), SFunction::sup_norm(), a).t_value;
    const double tb = ks_statistic(scaled, m, theta * 3.0, InstrumentFamily::intervals(),
                                   SFunction::sup_norm(), b)
                          .t_value;
    if (std::abs(ta - tb) > 1e-12) return false;
  }
  return true;
}

bool prop_kernel_convexity(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const MomentModel m = build_model(oracle::spec_of(ModelKind::interval_regression));
  for (int rep = 0; rep < 200; ++rep) {
    const Sample s = oracle::interval_sample(rng, 60);
    const VectorXd theta = vec({u(rng), u(rng)});
    const MatrixXd v = m.eval_sample(s, theta);
    const VectorXd mh = kernel_cond_mean(s, m, theta, s.x().row(rep % 60).transpose(),
                                         KernelId::epanechnikov, 0.3);
    for (Index j = 0; j < 2; ++j)
      if (mh[j] < v.col(j).minCoeff() - 1e-12 || mh[j] > v.col(j).maxCoeff() + 1e-12) return false;
  }
  return true;
}

// Medians of W^L and W^H among draws whose x lies within .025 of each
// center, accumulated until every slice holds at least 10^6 draws.
std::string prop_median_bands(bool& ok) {
  DgpSpec d;
  d.kind = DgpKind::median_missing;
  const std::vector<double> centers{-2.9, -1.5, 0.0, 1.0, 2.9};
  const Index per_slice = 1000000, chunk = 1000000;
  std::vector<std::vector<double>> lo(centers.size()), hi(centers.size());
  for (auto& v : lo) v.reserve(per_slice + 20000);
  for (auto& v : hi) v.reserve(per_slice + 20000);
  std::uint64_t block = 0;
  auto full = [&] {
    for (const auto& v : lo)
      if (static_cast<Index>(v.size()) < per_slice) return false;
    return true;
  };
  while (!full()) {
    const Sample s = simulate(d, chunk, replication_seed(8002, chunk, block++));
    for (Index i = 0; i < s.n(); ++i) {
      const double x = s.x()(i, 0);
      for (std::size_t k = 0; k < centers.size(); ++k) {
        if (std::abs(x - centers[k]) < 0.025 && static_cast<Index>(lo[k].size()) < per_slice) {
          lo[k].push_back(s.w()(i, 0));
          hi[k].push_back(s.w()(i, 1));
        }
      }
    }
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < centers.size(); ++k) {
    const auto [ql, qh] = median_bands(d, centers[k]);
    worst = std::max(worst, std::abs(quantile(lo[k], 0.5) - ql));
    worst = std::max(worst, std::abs(quantile(hi[k], 0.5) - qh));
  }
  ok = worst <= 0.01;
  return num(worst, 4);
}

bool prop_threads() {
  McDesign d;
  d.dgp.kind = DgpKind::median_missing;
  d.sizes = {200};
  d.reps = 8;
  d.estimators = {Estimator::weighted_ks, Estimator::bounded_ks, Estimator::kernel};
  d.grid = ThetaGrid::uniform(vec({-1.5, -0.75}), vec({2.0, 1.75}), vec({0.02, 0.02}));
  d.threads = 1;
  const McReport a = run_mc(d);
  d.threads = 4;
  const McReport b = run_mc(d);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto &x = a.records[i], &y = b.records[i];
    if (x.d_h != y.d_h || x.count != y.count || x.lower != y.lower || x.upper != y.upper)
      return false;
  }
  return a.records.size() == b.records.size();
}

void ac8() {
  std::mt19937_64 rng(8000);
  const bool nonneg = prop_nonnegative(rng);
  const bool nest = prop_nesting();
  const bool scale = prop_scale(rng);
  const bool convex = prop_kernel_convexity(rng);
  bool bands = false;
  const std::string band_err = prop_median_bands(bands);
  const bool threads = prop_threads();
  auto flag = [](bool b) { return b ? "ok" : "FAILED"; };
  report("AC8", nonneg && nest && scale && convex && bands && threads,
         std::string("T>=0 ") + flag(nonneg) + ", nesting " + flag(nest) + ", scale invariance " +
             flag(scale) + ", kernel convexity " + flag(convex) + ", median bands " + flag(bands) +
             " (max err " + band_err + " at 1e6 draws per slice), thread determinism " +
             flag(threads));
}

// ---------------------------------------------------------------------------
// AC9: divergence at a contact-set parameter

void ac9() {
  DgpSpec d;
  d.kind = DgpKind::contact_set;
  const std::vector<Index> sizes{200, 800, 3200};
  const Index reps = reps_or(200);
  const DivergenceReport shrinking =
      divergence_diagnostic(d, sizes, reps, TuningPolicy::standard(), 9001, g_threads);
  TuningPolicy fixed;
  fixed.sigma_rule = TuningPolicy::FixedValue{0.5};
  const DivergenceReport flat = divergence_diagnostic(d, sizes, reps, fixed, 9001, g_threads);
  const auto& m = shrinking.medians;
  const bool increasing = m[0] < m[1] && m[1] < m[2];
  const double growth = flat.medians[2] / flat.medians[1] - 1.0;
  report("AC9", increasing && growth < 0.25,
         "medians sqrt(n)T_n " + num(m[0]) + " < " + num(m[1]) + " < " + num(m[2]) +
             "; fixed sigma 800->3200 growth " + num(100.0 * growth, 1) + "% (need < 25%)");
}

// ---------------------------------------------------------------------------
// AC10: competitor estimators at n = 1000

void ac10() {
  McDesign d;
  d.dgp.kind = DgpKind::median_missing;
  d.sizes = {1000};
  d.reps = reps_or(300);
  d.threads = g_threads;
  d.estimators = {Estimator::weighted_ks, Estimator::bounded_ks, Estimator::kernel};
  const McReport r = run_mc(d);
  const double w = row_at(r, Estimator::weighted_ks, 1000).d_h_q[1];
  const double b = row_at(r, Estimator::bounded_ks, 1000).d_h_q[1];
  const double k = row_at(r, Estimator::kernel, 1000).d_h_q[1];
  report("AC10", b > w && k <= 2.0 * w,
         "median d_H weighted " + num(w) + ", bounded " + num(b) + " (need > weighted), kernel " +
             num(k) + " (need <= " + num(2.0 * w) + ")");
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* t = std::getenv("MOMENTSET_THREADS")) g_threads = std::max(1, std::atoi(t));
  else g_threads = std::max(1u, std::thread::hardware_concurrency());
  if (const char* r = std::getenv("MOMENTSET_ACCEPT_REPS")) g_reps_override = std::atoll(r);

  std::set<std::string> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(argv[i]);
  auto run = [&](const std::string& id, void (*fn)()) {
    if (!wanted.empty() && !wanted.count(id)) return;
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, false, std::string("error: ") + e.what());
    }
  };

  if (g_reps_override > 0)
    std::cout << "# replication counts capped at " << g_reps_override << std::endl;
  run("AC1", ac1);
  run("AC2", ac2);
  run("AC3", ac3);
  run("AC4", ac4);
  run("AC5", ac5);
  run("AC6", ac6);
  run("AC7", ac7);
  run("AC8", ac8);
  run("AC9", ac9);
  run("AC10", ac10);
  std::cout << "# " << g_failures << " criteria failed" << std::endl;
  return g_failures == 0 ? 0 : 1;
}
