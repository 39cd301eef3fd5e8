// Monte Carlo checks of the estimator comparisons and the slope rate.
//
//   experiments [E1 E2 ...]
//
// MOMENTSET_EXPERIMENT_REPS caps the replication counts; MOMENTSET_THREADS
// sets the worker count (default: all cores).

#include "momentset/alt.hpp"
#include "momentset/mc.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <set>
#include <string>
#include <thread>

using namespace momentset;

namespace {

int g_threads = 1;
Index g_cap = 0;
int g_failures = 0;

std::string num(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void report(const std::string& id, bool pass, const std::string& detail) {
  std::cout << id << " " << (pass ? "PASS" : "FAIL") << "  " << detail << std::endl;
  if (!pass) ++g_failures;
}

Index reps_or(Index full) { return g_cap > 0 ? std::min(g_cap, full) : full; }

const McRow& row_at(const McReport& r, Estimator e, Index n) {
  for (const McRow& row : r.rows)
    if (row.estimator == e && row.n == n) return row;
  throw DomainError("missing report row");
}

McDesign median_design(std::vector<Index> sizes, Index reps, std::vector<Estimator> est) {
  McDesign d;
  d.dgp.kind = DgpKind::median_missing;
  d.sizes = std::move(sizes);
  d.reps = reps_or(reps);
  d.estimators = std::move(est);
  d.threads = g_threads;
  d.base_seed = 424242;
  return d;
}

// Slope counterexample: median d_H against log n / n.
void e1() {
  McDesign d;
  d.dgp.kind = DgpKind::slope_counterexample;
  d.reps = reps_or(20);
  d.threads = g_threads;
  const auto t0 = std::chrono::steady_clock::now();
  const RateReport r = rate_experiment(d, {500, 2000, 8000}, RateVariable::log_n_over_n, 0.2);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::string med;
  for (std::size_t k = 0; k < r.sizes.size(); ++k)
    med += (k ? " " : "") + std::to_string(r.sizes[k]) + ":" + num(r.medians[k]);
  report("E1", std::abs(r.fitted_exponent - 0.2) <= 0.1,
         "slope design fitted exponent " + num(r.fitted_exponent) + " (ref 0.2 +/- 0.1), medians " +
             med + ", " + std::to_string(d.reps) + " reps, " + num(secs, 0) + " s");
}

// Kernel region at n = 500 against the weighted region.
void e2() {
  const McReport r = run_mc(median_design({500}, 100, {Estimator::weighted_ks, Estimator::kernel}));
  const double w = row_at(r, Estimator::weighted_ks, 500).d_h_q[1];
  const double k = row_at(r, Estimator::kernel, 500).d_h_q[1];
  report("E2", k <= 2.0 * w,
         "n=500 median d_H weighted " + num(w) + ", kernel " + num(k) + " (need <= " +
             num(2.0 * w) + ")");
}

// Bounded-weight coverage at n = 500.
void e3() {
  const McReport r = run_mc(median_design({500}, 200, {Estimator::bounded_ks}));
  const McRow& row = row_at(r, Estimator::bounded_ks, 500);
  report("E3", row.coverage >= 0.99,
         "bounded coverage at n=500 " + num(row.coverage) + " over " +
             std::to_string(row.reps_ok) + " reps (need >= 0.99)");
}

// Shrinkage of the bounded and weighted regions from n = 200 to 1000.
void e4() {
  const McReport r =
      run_mc(median_design({200, 1000}, 100, {Estimator::weighted_ks, Estimator::bounded_ks}));
  const double w200 = row_at(r, Estimator::weighted_ks, 200).d_h_q[1];
  const double w1000 = row_at(r, Estimator::weighted_ks, 1000).d_h_q[1];
  const double b200 = row_at(r, Estimator::bounded_ks, 200).d_h_q[1];
  const double b1000 = row_at(r, Estimator::bounded_ks, 1000).d_h_q[1];
  report("E4", b1000 / b200 > w1000 / w200,
         "median d_H ratio 1000/200: bounded " + num(b1000 / b200) + " (" + num(b200) + " -> " +
             num(b1000) + "), weighted " + num(w1000 / w200) + " (" + num(w200) + " -> " +
             num(w1000) + ") (need bounded > weighted)");
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* t = std::getenv("MOMENTSET_THREADS")) g_threads = std::max(1, std::atoi(t));
  else g_threads = std::max(1u, std::thread::hardware_concurrency());
  if (const char* r = std::getenv("MOMENTSET_EXPERIMENT_REPS")) g_cap = std::atoll(r);

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
  run("E1", e1);
  run("E2", e2);
  run("E3", e3);
  run("E4", e4);
  std::cout << "# " << g_failures << " experiments failed" << std::endl;
  return g_failures == 0 ? 0 : 1;
}
