#include "oracles.hpp"

#include "momentset/mc.hpp"
#include "momentset/regions.hpp"

#include <doctest.h>

#include <numeric>

using namespace momentset;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Index>(v.size()));
  Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

ThetaGrid small_grid() {
  return ThetaGrid::uniform(vec({-1.5, -1.0}), vec({2.0, 2.0}), vec({0.1, 0.25}));
}

// Wraps a criterion and reports it as not slice-monotone.
class Opaque : public RegionCriterion {
 public:
  explicit Opaque(std::unique_ptr<RegionCriterion> inner) : inner_(std::move(inner)) {}
  double scaled_statistic(const VectorXd& t) override { return inner_->scaled_statistic(t); }
  bool violates(const VectorXd& t, double c, int d) override { return inner_->violates(t, c, d); }
  bool slice_monotone() const override { return false; }
  const MomentModel& model() const override { return inner_->model(); }

 private:
  std::unique_ptr<RegionCriterion> inner_;
};

std::vector<std::uint8_t> random_mask(std::mt19937_64& rng, Index size, double p) {
  std::bernoulli_distribution b(p);
  std::vector<std::uint8_t> m(size);
  for (auto& v : m) v = b(rng);
  return m;
}

}  // namespace

TEST_CASE("grid construction and indexing") {
  const ThetaGrid g = ThetaGrid::uniform(vec({0.0, -1.0}), vec({1.0, 1.0}), vec({0.25, 0.5}));
  CHECK(g.dim() == 2);
  CHECK(g.axis_size(0) == 5);
  CHECK(g.axis_size(1) == 5);
  CHECK(g.size() == 25);
  CHECK(g.axis(0)[4] == doctest::Approx(1.0));
  CHECK(g.point(1)[0] == doctest::Approx(0.25));
  CHECK(g.point(5)[1] == doctest::Approx(-0.5));
  for (Index idx = 0; idx < g.size(); ++idx) CHECK(g.index(g.multi_index(idx)) == idx);
  CHECK(g.half_diagonal() == doctest::Approx(0.5 * std::hypot(0.25, 0.5)));

  CHECK_THROWS_AS(ThetaGrid::uniform(vec({0.0}), vec({1.0}), vec({0.0})), ConfigError);
  CHECK_THROWS_AS(ThetaGrid::uniform(vec({1.0}), vec({0.0}), vec({0.1})), ConfigError);
  CHECK_THROWS_AS(ThetaGrid::uniform(vec({0.0, 0.0}), vec({1.0}), vec({0.1})), ConfigError);
  CHECK_THROWS_AS(ThetaGrid(std::vector<VectorXd>{}), ConfigError);
  CHECK_THROWS_AS(ThetaGrid(std::vector<VectorXd>{vec({0.0, 0.0})}), ConfigError);
}

TEST_CASE("region strategies agree") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 12; ++rep) {
    Sample s;
    ModelSpec spec;
    switch (rep % 3) {
      case 0:
        spec = oracle::spec_of(ModelKind::interval_quantile);
        s = oracle::censored_sample(rng, 80 + 10 * rep);
        break;
      case 1:
        spec = oracle::spec_of(ModelKind::interval_regression);
        s = oracle::interval_sample(rng, 80 + 10 * rep, rep % 2 == 0);
        break;
      default:
        spec = oracle::spec_of(ModelKind::one_sided_regression);
        s = oracle::one_sided_sample(rng, 80 + 10 * rep);
    }
    const MomentModel m = build_model(spec);
    const ThetaGrid grid = small_grid();
    const SFunction sf = rep < 6 ? SFunction::sup_norm() : SFunction::p_norm(2.0);
    auto crit = make_weighted_criterion(s, m, InstrumentFamily::intervals(), sf, TuningPolicy::standard());
    const double c = critical_value(TuningPolicy::standard(), s.n());
    const ConfidenceRegion ex = build_region(*crit, grid, c, RegionStrategy::exhaustive);
    const ConfidenceRegion de = build_region(*crit, grid, c, RegionStrategy::decision);
    CHECK(ex.member == de.member);
    if (crit->slice_monotone()) {
      const ConfidenceRegion sl = build_region(*crit, grid, c, RegionStrategy::slice_search);
      CHECK(ex.member == sl.member);
    }
    for (Index i = 0; i < grid.size(); ++i) {
      REQUIRE(!std::isnan(ex.stat[i]));
      CHECK(ex.member[i] == (ex.stat[i] <= c));
    }
  }
}

TEST_CASE("slice search refuses a criterion without the monotonicity") {
  std::mt19937_64 rng(4);
  const MomentModel m = build_model(oracle::spec_of(ModelKind::interval_regression));
  const Sample s = oracle::interval_sample(rng, 50);
  Opaque crit(make_weighted_criterion(s, m, InstrumentFamily::intervals(), SFunction::sup_norm(),
                                      TuningPolicy::standard()));
  CHECK_THROWS_AS(build_region(crit, small_grid(), 2.0, RegionStrategy::slice_search), ConfigError);
  const ConfidenceRegion a = build_region(crit, small_grid(), 2.0, RegionStrategy::automatic);
  const ConfidenceRegion b = build_region(crit, small_grid(), 2.0, RegionStrategy::exhaustive);
  CHECK(a.member == b.member);
}

TEST_CASE("regions nest in the critical value") {
  std::mt19937_64 rng(5);
  const MomentModel m = build_model(oracle::spec_of(ModelKind::interval_quantile));
  const Sample s = oracle::censored_sample(rng, 150);
  auto crit = make_weighted_criterion(s, m, InstrumentFamily::intervals(), SFunction::sup_norm(),
                                      TuningPolicy::standard());
  const ThetaGrid grid = small_grid();
  std::vector<std::uint8_t> prev(grid.size(), 0);
  for (double c : {0.0, 0.5, 1.0, 2.0, 3.0, 5.0}) {
    const ConfidenceRegion r = build_region(*crit, grid, c);
    for (Index i = 0; i < grid.size(); ++i) CHECK((!prev[i] || r.member[i]));
    prev = r.member;
  }
  CHECK(build_region(*crit, grid, -1.0).empty());
  CHECK(build_region(*crit, grid, 1e9).count() == grid.size());
}

TEST_CASE("member flags and statistics") {
  std::mt19937_64 rng(6);
  const MomentModel m = build_model(oracle::spec_of(ModelKind::interval_regression));
  const Sample s = oracle::interval_sample(rng, 100);
  const ConfidenceRegion r = confidence_region(s, m, small_grid(), InstrumentFamily::intervals(),
                                               SFunction::sup_norm(), TuningPolicy::standard());
  CHECK(r.c_used == doctest::Approx(critical_value(TuningPolicy::standard(), 100)));
  const MatrixXd pts = r.member_points();
  CHECK(pts.rows() == r.count());
  for (Index i = 0; i < r.grid.size(); ++i)
    if (!std::isnan(r.stat[i])) CHECK(r.member[i] == (r.stat[i] <= r.c_used));
  CHECK_THROWS_AS(confidence_region(s, m, ThetaGrid::uniform(vec({0.0}), vec({1.0}), vec({0.5})),
                                    InstrumentFamily::intervals(), SFunction::sup_norm(),
                                    TuningPolicy::standard()),
                  DimensionError);
}

TEST_CASE("hausdorff examples and sentinels") {
  MatrixXd a(1, 2), b(2, 2);
  a << 0, 0;
  b << 0, 0, 1, 0;
  CHECK(hausdorff(a, a).d_h == 0.0);
  const SetDistanceReport r = hausdorff(b, a);
  CHECK(r.d_h == 1.0);
  CHECK(r.directed_ab == 1.0);
  CHECK(r.directed_ba == 0.0);
  const MatrixXd none(0, 2);
  CHECK(hausdorff(none, none).d_h == 0.0);
  CHECK(std::isinf(hausdorff(a, none).d_h));
  CHECK(hausdorff(a, none).empty_involved);
  CHECK(hausdorff_1d({0.0, 1.0}, {0.5}) == 0.5);
  CHECK(std::isinf(hausdorff_1d({0.0}, {})));
  CHECK(hausdorff_1d({}, {}) == 0.0);
}

TEST_CASE("hausdorff matches brute force and obeys the metric axioms") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<Index> rows(1, 40);
  for (int rep = 0; rep < 100; ++rep) {
    const MatrixXd a = oracle::uniform_matrix(rng, rows(rng), 2, -1, 1);
    const MatrixXd b = oracle::uniform_matrix(rng, rows(rng), 2, -1, 1);
    const MatrixXd c = oracle::uniform_matrix(rng, rows(rng), 2, -1, 1);
    const double ab = hausdorff(a, b).d_h;
    CHECK(std::abs(ab - oracle::brute_hausdorff(a, b)) <= 1e-12);
    CHECK(ab == hausdorff(b, a).d_h);
    CHECK(hausdorff(a, a).d_h == 0.0);
    CHECK(hausdorff(a, c).d_h <= ab + hausdorff(b, c).d_h + 1e-12);

    // Row order does not matter.
    std::vector<Index> order(a.rows());
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    MatrixXd shuffled(a.rows(), 2);
    for (Index i = 0; i < a.rows(); ++i) shuffled.row(i) = a.row(order[i]);
    CHECK(hausdorff(shuffled, b).d_h == ab);
  }
}

TEST_CASE("mask hausdorff matches brute force on grid points") {
  std::mt19937_64 rng(8);
  const ThetaGrid grid = ThetaGrid::uniform(vec({0.0, 0.0}), vec({1.0, 0.5}), vec({0.1, 0.05}));
  for (int rep = 0; rep < 100; ++rep) {
    const double p = rep % 4 == 0 ? 0.03 : 0.3;
    const auto a = random_mask(rng, grid.size(), p);
    const auto b = random_mask(rng, grid.size(), p);
    ConfidenceRegion ra{grid, a, VectorXd(), 0.0}, rb{grid, b, VectorXd(), 0.0};
    const MatrixXd pa = ra.member_points(), pb = rb.member_points();
    const double fast = hausdorff(grid, a, b).d_h;
    const double brute = oracle::brute_hausdorff(pa, pb);
    if (std::isinf(brute))
      CHECK(std::isinf(fast));
    else
      CHECK(std::abs(fast - brute) <= 1e-12);
  }
}

TEST_CASE("projections and hulls") {
  const ThetaGrid grid = ThetaGrid::uniform(vec({-1.0, 0.0}), vec({1.0, 2.0}), vec({0.25, 0.5}));
  std::vector<std::uint8_t> all(grid.size(), 1);
  const Projection p0 = project(grid, all, 0), p1 = project(grid, all, 1);
  CHECK(p0.lower == -1.0);
  CHECK(p0.upper == doctest::Approx(1.0));
  CHECK(p0.values.size() == 9);
  CHECK(p1.lower == 0.0);
  CHECK(p1.upper == doctest::Approx(2.0));

  std::vector<std::uint8_t> one(grid.size(), 0);
  one[grid.index({5, 1})] = 1;
  CHECK(project(grid, one, 0).lower == doctest::Approx(0.25));
  CHECK(project(grid, one, 0).upper == doctest::Approx(0.25));
  CHECK(project(grid, one, 1).lower == doctest::Approx(0.5));

  std::vector<std::uint8_t> none(grid.size(), 0);
  CHECK(project(grid, none, 0).empty());
  CHECK(std::isnan(project(grid, none, 0).lower));
  CHECK_THROWS_AS(project(grid, all, 2), DimensionError);

  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 200; ++rep) {
    const auto big = random_mask(rng, grid.size(), 0.4);
    auto small = big;
    for (auto& v : small)
      if (v && rng() % 2) v = 0;
    for (Index axis : {0, 1}) {
      const Projection ps = project(grid, small, axis), pb = project(grid, big, axis);
      if (ps.empty()) continue;
      CHECK(ps.lower >= pb.lower);
      CHECK(ps.upper <= pb.upper);
    }
  }
}

TEST_CASE("boundary touch flag") {
  const ThetaGrid grid = ThetaGrid::uniform(vec({0.0, 0.0}), vec({1.0, 1.0}), vec({0.25, 0.25}));
  ConfidenceRegion r{grid, std::vector<std::uint8_t>(grid.size(), 0), VectorXd(), 0.0};
  r.member[grid.index({2, 2})] = 1;
  CHECK(!r.touches_grid_boundary());
  r.member[grid.index({4, 2})] = 1;
  CHECK(r.touches_grid_boundary());
}

TEST_CASE("median design region at n = 500 covers the identified set") {
  DgpSpec dgp;
  dgp.kind = DgpKind::median_missing;
  const ThetaGrid grid = default_grid(dgp);
  const IdentifiedSetOracle truth = oracle_set(dgp, grid);
  const MomentModel m = build_model(model_spec_for(dgp));
  const Sample s = simulate(dgp, 500, 20240601);
  const ConfidenceRegion r = confidence_region(s, m, grid, InstrumentFamily::intervals(),
                                               SFunction::sup_norm(), TuningPolicy::standard());
  for (Index i = 0; i < grid.size(); ++i)
    if (truth.member[i]) REQUIRE(r.member[i]);
  CHECK(r.count() > truth.count());
  CHECK(!r.touches_grid_boundary());
}
