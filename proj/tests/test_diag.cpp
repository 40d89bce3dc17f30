#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "diag.hpp"
#include "error.hpp"
#include "helpers.hpp"
#include "rng.hpp"
#include "sim.hpp"

using namespace stpp;
using namespace stpp::diag;

namespace {

ingest::EventPattern pattern_on(const geom::GridPtr& grid, double t_len,
                                std::vector<ingest::Event> events) {
  ingest::EventPattern p;
  p.window = grid;
  p.t_len = t_len;
  p.events = std::move(events);
  return p;
}

}  // namespace

TEST_CASE("default lag grids span the reference ranges") {
  auto s = default_spatial_lags();
  CHECK(s.front() > 0);
  CHECK(s.back() == 10000.0);
  auto t = default_temporal_lags();
  CHECK(t.front() == 1.0);
  CHECK(t.back() == 100.0);
}

TEST_CASE("pcf of a homogeneous Poisson concentrates at 1") {
  // True intensity plugged in; mean over [1 km, 10 km] and 20 simulations.
  auto grid = geom::make_grid(40, 40, 0, 0, 500);  // 20 km window
  const double lam = 1e-6;                         // ~400 points
  std::vector<double> lags;
  for (double r = 1000; r <= 10000; r += 500) lags.push_back(r);
  double total = 0;
  int used = 0;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    auto p = sim::simulate_poisson([&](double, double, double) { return lam; }, grid, 1.0,
                                   seed);
    if (p.events.size() < 2) continue;
    std::vector<double> lambda_at(p.events.size(), lam);
    auto est = pcf(p, lambda_at, 2, lags, 500.0);
    total += std::accumulate(est.g.begin(), est.g.end(), 0.0) / est.g.size();
    ++used;
  }
  REQUIRE(used == 20);
  CHECK(total / used == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("pcf degenerate and error cases") {
  auto grid = geom::make_grid(10, 10, 0, 0, 500);
  std::vector<double> lags{500, 1000};

  SUBCASE("one point gives identically zero") {
    auto p = pattern_on(grid, 5, {{1250, 1250, 1, 1}});
    auto est = pcf(p, {1e-6}, 2, lags, 500.0);
    for (double g : est.g) CHECK(g == 0.0);
  }
  SUBCASE("zero intensity at a point is rejected") {
    auto p = pattern_on(grid, 5, {{1250, 1250, 1, 1}, {2250, 1250, 2, 1}});
    CHECK_THROWS_AS(pcf(p, {1e-6, 0.0}, 2, lags, 500.0), InputError);
  }
  SUBCASE("lags at zero are rejected") {
    auto p = pattern_on(grid, 5, {{1250, 1250, 1, 1}, {2250, 1250, 2, 1}});
    CHECK_THROWS_AS(pcf(p, {1e-6, 1e-6}, 2, {0.0, 500.0}, 500.0), InputError);
  }
}

TEST_CASE("temporal pcf excludes same-day pairs") {
  auto grid = geom::make_grid(10, 10, 0, 0, 500);
  // Two points on the same day: with the same-day exclusion nothing remains.
  auto p = pattern_on(grid, 50, {{1250, 1250, 10, 1}, {2250, 2250, 10, 1}});
  std::vector<double> lags{1, 2, 3};
  auto est = pcf(p, {0.1, 0.1}, 1, lags, 2.0);
  for (double g : est.g) CHECK(g == 0.0);
  // A day apart they register.
  p.events[1].t = 11;
  auto est2 = pcf(p, {0.1, 0.1}, 1, lags, 2.0);
  CHECK(est2.g[0] > 0.0);
}

TEST_CASE("k_inhom matches the hand-computed two-point value") {
  auto grid = geom::make_grid(10, 8, 0, 0, 100);  // 1000 x 800 m window
  const double t_len = 10;
  const double lam0 = 1e-4;
  // separation (50 m, 2 d)
  auto p = pattern_on(grid, t_len, {{305, 205, 1, 1}, {355, 205, 3, 1}});
  std::vector<double> r_grid{25, 50, 100, 200};
  std::vector<double> v_grid{1, 2, 4};
  auto est = k_inhom(p, {lam0, lam0}, r_grid, v_grid);

  // V_c = |W n W_(50,0)| · (t_len - 2) = (1000-50)·800 · 8 = 6.08e6 m²·day
  const double vc = (1000.0 - 50.0) * 800.0 * (t_len - 2.0);
  const double expected = 2.0 / (lam0 * lam0 * vc);
  for (size_t ri = 0; ri < r_grid.size(); ++ri)
    for (size_t vi = 0; vi < v_grid.size(); ++vi) {
      if (r_grid[ri] >= 50 && v_grid[vi] >= 2)
        CHECK(est.k(ri, vi) == doctest::Approx(expected).epsilon(1e-9));
      else
        CHECK(est.k(ri, vi) == 0.0);
    }

  SUBCASE("empty pattern gives zero") {
    auto empty = pattern_on(grid, t_len, {});
    auto z = k_inhom(empty, {}, r_grid, v_grid);
    for (size_t ri = 0; ri < r_grid.size(); ++ri)
      for (size_t vi = 0; vi < v_grid.size(); ++vi) CHECK(z.k(ri, vi) == 0.0);
  }
}

TEST_CASE("theoretical K value at (100 m, 10 d)") {
  CHECK(KEstimate::theoretical(100, 10) == doctest::Approx(6.2832e5).epsilon(1e-4));
}

TEST_CASE("K estimate is monotone and reorder-invariant") {
  auto grid = geom::make_grid(12, 12, 0, 0, 250);
  Rng rng(8);
  std::vector<ingest::Event> events;
  for (int i = 0; i < 60; ++i)
    events.push_back({rng.uniform() * 3000, rng.uniform() * 3000,
                      std::floor(rng.uniform() * 20), 1});
  auto p = pattern_on(grid, 20, events);
  std::vector<double> lambda_at(events.size(), 1e-6);
  std::vector<double> r_grid, v_grid;
  for (int i = 1; i <= 10; ++i) {
    r_grid.push_back(150.0 * i);
    v_grid.push_back(static_cast<double>(i));
  }
  auto est = k_inhom(p, lambda_at, r_grid, v_grid);
  for (size_t ri = 0; ri + 1 < r_grid.size(); ++ri)
    for (size_t vi = 0; vi + 1 < v_grid.size(); ++vi) {
      CHECK(est.k(ri + 1, vi) >= est.k(ri, vi));
      CHECK(est.k(ri, vi + 1) >= est.k(ri, vi));
    }

  // shuffle the points: the statistic ignores ordering
  auto shuffled = events;
  Rng perm(9);
  perm.shuffle(shuffled);
  auto p2 = pattern_on(grid, 20, shuffled);
  auto est2 = k_inhom(p2, lambda_at, r_grid, v_grid);
  for (size_t ri = 0; ri < r_grid.size(); ++ri)
    for (size_t vi = 0; vi < v_grid.size(); ++vi)
      CHECK(est2.k(ri, vi) == doctest::Approx(est.k(ri, vi)).epsilon(1e-12));
}

TEST_CASE("K of simulated Poisson tracks the no-interaction value") {
  auto grid = geom::make_grid(20, 20, 0, 0, 500);  // 10 km window
  const double t_len = 40;
  const double lam = 1.25e-7;  // ~500 points
  double sum = 0;
  const int n_seeds = 20;
  for (uint64_t seed = 1; seed <= n_seeds; ++seed) {
    auto p = sim::simulate_poisson([&](double, double, double) { return lam; }, grid, t_len,
                                   seed);
    std::vector<double> lambda_at(p.events.size(), lam);
    auto est = k_inhom(p, lambda_at, {2000.0}, {20.0});
    sum += est.k(0, 0);
  }
  double theo = KEstimate::theoretical(2000, 20);
  CHECK(sum / n_seeds == doctest::Approx(theo).epsilon(0.08));
}

TEST_CASE("separable kernel intensity integrates to the point count") {
  auto grid = geom::make_grid(30, 30, 0, 0, 200);
  auto p = pattern_on(grid, 20, {{3000, 3000, 10, 1}});
  SeparableKernelIntensity kde(p, 400.0, 2.0);

  // quadrature of the spatial factor over the grid
  double integral = 0;
  for (int r = 0; r < grid->nrows; ++r)
    for (int c = 0; c < grid->ncols; ++c)
      integral += kde.spatial(grid->center_x(c), grid->center_y(r)) * grid->cell_area();
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));

  SUBCASE("translation equivariance") {
    auto q = pattern_on(grid, 20, {{3400, 2800, 10, 1}});
    SeparableKernelIntensity kde2(q, 400.0, 2.0);
    CHECK(kde2.spatial(3400 + 123, 2800 - 57) ==
          doctest::Approx(kde.spatial(3000 + 123, 3000 - 57)).epsilon(1e-12));
  }
  SUBCASE("duplicating every point doubles the estimate") {
    auto q = pattern_on(grid, 20, {{3000, 3000, 10, 1}, {3000, 3000, 10, 1}});
    SeparableKernelIntensity kde2(q, 400.0, 2.0);
    CHECK(kde2(3100, 3100, 10.5) == doctest::Approx(2.0 * kde(3100, 3100, 10.5)).epsilon(1e-12));
  }
  SUBCASE("empty pattern is rejected") {
    auto empty = pattern_on(grid, 20, {});
    CHECK_THROWS_AS(SeparableKernelIntensity(empty, 400.0, 2.0), InputError);
  }
}

namespace {

model::ModelSpec flat_model(const geom::GridPtr& grid, double houses_total, double rate) {
  model::ModelSpec spec;
  model::TypeModel tm;
  tm.basis = model::make_basis(1, 0, 0, 0);
  tm.houses = testutil::constant_raster(grid, houses_total / grid->area());
  tm.raster_path = "h1.asc";
  tm.theta = {std::log(rate), 0.0, 0.0};
  spec.types.push_back(std::move(tm));
  return spec;
}

}  // namespace

TEST_CASE("envelope bounds, verdicts and reproducibility") {
  auto grid = geom::make_grid(15, 15, 0, 0, 400);  // 6 km window
  auto cov = testutil::flat_weather(30);
  auto spec = flat_model(grid, 200.0, 1.0 / 30.0);  // ~200 expected points

  EnvelopeParams params;
  params.n_sim = 19;
  params.n_lags = 12;
  params.dr = 250.0;
  params.dv = 2.0;
  params.kde_sigma = 600.0;
  params.kde_t_bw = 5.0;

  auto observed = sim::simulate_model(spec, cov, 30.0, 1234);

  SUBCASE("single simulation pins the bounds to its own curve") {
    EnvelopeParams one = params;
    one.n_sim = 1;
    auto env = envelope_test(spec, cov, observed, one, 7);
    for (size_t i = 0; i < env.lag.size(); ++i) CHECK(env.lo[i] == env.hi[i]);
  }
  SUBCASE("a strongly clustered pattern lands outside") {
    std::vector<ingest::Event> clustered;
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
      double cx = i < 50 ? 1500 : 4500;
      clustered.push_back({cx + 50 * rng.normal(), cx + 50 * rng.normal(),
                           std::floor(rng.uniform() * 3), 1});
    }
    for (auto& e : clustered) {
      e.x = std::min(5950.0, std::max(50.0, e.x));
      e.y = std::min(5950.0, std::max(50.0, e.y));
    }
    auto bad = pattern_on(grid, 30, clustered);
    auto env = envelope_test(spec, cov, bad, params, 7);
    CHECK_FALSE(env.inside);
  }
  SUBCASE("fixed seed reproduces the envelope") {
    auto e1 = envelope_test(spec, cov, observed, params, 99);
    auto e2 = envelope_test(spec, cov, observed, params, 99);
    CHECK(e1.lo == e2.lo);
    CHECK(e1.hi == e2.hi);
    CHECK(e1.observed == e2.observed);
  }
}

TEST_CASE("spatial residuals vanish when the model reproduces the data measure") {
  auto grid = geom::make_grid(12, 12, 0, 0, 250);
  auto cov = testutil::flat_weather(1);
  // one event at each of four cell centers, t_len = 1, rate 1 per house-day
  std::vector<ingest::Event> events;
  for (int r : {3, 8})
    for (int c : {4, 9}) events.push_back({grid->center_x(c), grid->center_y(r), 0, 1});
  auto pattern = pattern_on(grid, 1, events);

  model::ModelSpec spec;
  model::TypeModel tm;
  tm.basis = model::make_basis(1, 0, 0, 0);
  tm.houses = geom::RasterField(grid);
  tm.theta = {0.0, 0.0, 0.0};  // unit temporal rate
  // expected count per cell equals the observed count exactly
  for (const auto& e : events) {
    int r, c;
    grid->cell_of(e.x, e.y, &r, &c);
    tm.houses.at(r, c) += 1.0 / grid->cell_area();
  }
  spec.types.push_back(std::move(tm));
  spec.validate();

  auto field = residuals_spatial(spec, cov, pattern, 300.0);
  for (double v : field.values) CHECK(std::fabs(v) < 1e-10);

  SUBCASE("overprediction shows as a positive blob") {
    spec.types[0].houses.values[grid->idx(3, 4)] *= 2.0;
    auto over = residuals_spatial(spec, cov, pattern, 300.0);
    CHECK(over.at(3, 4) > 0.0);
  }
  SUBCASE("empty pattern and zero model give the zero field") {
    model::ModelSpec zero = spec;
    for (auto& v : zero.types[0].houses.values) v = 0.0;
    auto empty = pattern_on(grid, 1, {});
    auto field0 = residuals_spatial(zero, cov, empty, 300.0);
    for (double v : field0.values) CHECK(v == 0.0);
  }
}

TEST_CASE("temporal residuals difference predicted and observed monthly counts") {
  auto grid = geom::make_grid(5, 5, 0, 0, 1000);
  auto cov = testutil::flat_weather(365);
  cov.start_date = ingest::Date{2010, 1, 1};
  auto spec = flat_model(grid, 100.0, 1.0 / 300.0);  // daily total 1/3

  // 8 observed events in January, none later
  std::vector<ingest::Event> events;
  for (int i = 0; i < 8; ++i) events.push_back({2500, 2500, static_cast<double>(i), 1});
  auto pattern = pattern_on(grid, 365, events);

  auto rows = residuals_temporal(spec, cov, pattern);
  REQUIRE(rows.size() == 12);
  CHECK(rows[0].year == 2010);
  CHECK(rows[0].month == 1);
  CHECK(rows[0].observed == 8.0);
  CHECK(rows[0].predicted == doctest::Approx(31.0 / 3.0));
  CHECK(rows[0].residual() == doctest::Approx(31.0 / 3.0 - 8.0));
  for (const auto& r : rows) CHECK(r.complete);
  // February has 28 days on the leap-free calendar
  CHECK(rows[1].predicted == doctest::Approx(28.0 / 3.0));

  SUBCASE("zero model and empty pattern give zero residuals") {
    auto exact = pattern_on(grid, 365, {});
    auto rows2 = residuals_temporal(flat_model(grid, 100.0, 1e-300), cov, exact);
    for (const auto& r : rows2) CHECK(r.residual() == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("partial trailing month is flagged") {
    auto part = pattern_on(grid, 40, {});
    auto rows2 = residuals_temporal(spec, cov, part);
    REQUIRE(rows2.size() == 2);
    CHECK(rows2[0].complete);        // full January
    CHECK_FALSE(rows2[1].complete);  // 9 days of February
  }
}

TEST_CASE("curve CSV emitters") {
  PcfEstimate est;
  est.lags = {100, 200};
  est.g = {1.5, 0.5};
  CHECK(pcf_to_csv(est) == "lag,value\n100,1.5\n200,0.5\n");

  Envelope env;
  env.lag = {100};
  env.lo = {0.5};
  env.hi = {2.0};
  env.observed = {1.0};
  CHECK(envelope_to_csv(env) == "lag,lo,hi,observed\n100,0.5,2,1\n");
}
