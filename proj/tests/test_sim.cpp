#include <doctest.h>

#include <cmath>
#include <numeric>

#include "error.hpp"
#include "helpers.hpp"
#include "sim.hpp"
#include "stats.hpp"

using namespace stpp;
using namespace stpp::sim;

TEST_CASE("zero intensity gives an empty pattern") {
  auto grid = geom::make_grid(5, 5, 0, 0, 100);
  auto p = simulate_poisson([](double, double, double) { return 0.0; }, grid, 10.0, 1);
  CHECK(p.events.empty());
}

TEST_CASE("negative intensity is rejected") {
  auto grid = geom::make_grid(3, 3, 0, 0, 100);
  CHECK_THROWS_AS(simulate_poisson([](double, double, double) { return -1.0; }, grid, 1.0, 1),
                  NumericError);
}

TEST_CASE("homogeneous expected count and dispersion") {
  // 1 km² over 10 days at 1e-4 m⁻²day⁻¹: expected 1000 points.
  auto grid = geom::make_grid(10, 10, 0, 0, 100);
  IntensityFn lam = [](double, double, double) { return 1e-4; };
  CHECK(expected_count(lam, grid, 10.0) == doctest::Approx(1000.0));

  // Dispersion over 200 seeds at expected count 500.
  IntensityFn lam500 = [](double, double, double) { return 5e-5; };
  std::vector<double> counts;
  for (uint64_t seed = 0; seed < 200; ++seed)
    counts.push_back(static_cast<double>(simulate_poisson(lam500, grid, 10.0, seed).events.size()));
  double mean = std::accumulate(counts.begin(), counts.end(), 0.0) / counts.size();
  double var = 0;
  for (double c : counts) var += (c - mean) * (c - mean);
  var /= counts.size();
  CHECK(mean == doctest::Approx(500.0).epsilon(0.02));
  CHECK(var / mean > 0.8);
  CHECK(var / mean < 1.2);
}

TEST_CASE("counts in disjoint blocks are uncorrelated across seeds") {
  auto grid = geom::make_grid(10, 10, 0, 0, 100);
  IntensityFn lam = [](double, double, double) { return 2e-4; };
  std::vector<double> left, right;
  for (uint64_t seed = 0; seed < 200; ++seed) {
    auto p = simulate_poisson(lam, grid, 5.0, seed);
    double nl = 0, nr = 0;
    for (const auto& e : p.events) (e.x < 500 ? nl : nr) += 1;
    left.push_back(nl);
    right.push_back(nr);
  }
  double ml = std::accumulate(left.begin(), left.end(), 0.0) / left.size();
  double mr = std::accumulate(right.begin(), right.end(), 0.0) / right.size();
  double num = 0, dl = 0, dr = 0;
  for (size_t i = 0; i < left.size(); ++i) {
    num += (left[i] - ml) * (right[i] - mr);
    dl += (left[i] - ml) * (left[i] - ml);
    dr += (right[i] - mr) * (right[i] - mr);
  }
  double r = num / std::sqrt(dl * dr);
  CHECK(std::fabs(r) < 0.1);
}

TEST_CASE("total count is Poisson: chi-square goodness of fit at 1%") {
  auto grid = geom::make_grid(8, 8, 0, 0, 100);
  const double mean = 100.0;
  IntensityFn lam = [&](double, double, double) { return mean / (6.4e5 * 1.0); };
  std::vector<long> totals;
  for (uint64_t seed = 0; seed < 200; ++seed)
    totals.push_back(static_cast<long>(simulate_poisson(lam, grid, 1.0, seed).events.size()));

  // Bin by Poisson CDF so each of the 8 bins expects 25 counts.
  auto poisson_cdf = [&](long k) {
    double p = std::exp(-mean), cdf = p;
    for (long i = 1; i <= k; ++i) {
      p *= mean / i;
      cdf += p;
    }
    return cdf;
  };
  std::vector<long> edges;
  double target = 0.125;
  for (long k = 0; k < 200 && edges.size() < 7; ++k)
    if (poisson_cdf(k) >= target * (edges.size() + 1)) edges.push_back(k);
  std::vector<double> observed(edges.size() + 1, 0.0), expected(edges.size() + 1, 0.0);
  for (long t : totals) {
    size_t bin = std::lower_bound(edges.begin(), edges.end(), t) - edges.begin();
    observed[bin] += 1;
  }
  double prev = 0;
  for (size_t b = 0; b < edges.size(); ++b) {
    double c = poisson_cdf(edges[b]);
    expected[b] = (c - prev) * totals.size();
    prev = c;
  }
  expected.back() = (1 - prev) * totals.size();
  double stat = 0;
  for (size_t b = 0; b < observed.size(); ++b)
    stat += (observed[b] - expected[b]) * (observed[b] - expected[b]) / expected[b];
  double p = stpp::chisq_upper_tail(stat, static_cast<int>(observed.size()) - 1);
  CHECK(p > 0.01);
}

TEST_CASE("fixed seed reproduces the pattern exactly") {
  auto grid = geom::make_grid(6, 6, 0, 0, 200);
  IntensityFn lam = [](double x, double, double t) { return 1e-5 * (1 + x / 1200) * (1 + t); };
  auto a = simulate_poisson(lam, grid, 4.0, 99);
  auto b = simulate_poisson(lam, grid, 4.0, 99);
  REQUIRE(a.events.size() == b.events.size());
  for (size_t i = 0; i < a.events.size(); ++i) {
    CHECK(a.events[i].x == b.events[i].x);
    CHECK(a.events[i].y == b.events[i].y);
    CHECK(a.events[i].t == b.events[i].t);
  }
  // integer day marks within range
  for (const auto& e : a.events) {
    CHECK(e.t == std::floor(e.t));
    CHECK(e.t >= 0);
    CHECK(e.t < 4);
    CHECK(grid->contains(e.x, e.y));
  }
}

TEST_CASE("synthetic worlds are calibrated, reproducible and writable") {
  WorldConfig cfg;
  cfg.ncols = 20;
  cfg.nrows = 20;
  cfg.t_len = 365;
  cfg.target_events = 800;
  cfg.seed = 11;

  auto w1 = make_synthetic_world(cfg);
  CHECK(w1.expected == doctest::Approx(800.0).epsilon(1e-6));
  CHECK(w1.expected >= 500.0);
  CHECK(w1.expected <= 5000.0);
  CHECK(w1.warnings.empty());
  // realized count within 5 sigma of the calibrated expectation
  CHECK(std::fabs(static_cast<double>(w1.events.events.size()) - 800.0) <
        5.0 * std::sqrt(800.0));

  auto w2 = make_synthetic_world(cfg);
  REQUIRE(w1.events.events.size() == w2.events.events.size());
  for (size_t i = 0; i < w1.events.events.size(); ++i)
    CHECK(w1.events.events[i].x == w2.events.events[i].x);

  SUBCASE("underpowered config warns") {
    cfg.target_events = 20;
    auto small = make_synthetic_world(cfg);
    REQUIRE(small.warnings.size() == 1);
    CHECK(small.warnings[0].find("underpowered") != std::string::npos);
  }
  SUBCASE("world directory round-trips through the readers") {
    testutil::TempDir tmp("world");
    write_world(w1, tmp.str());
    auto weather = ingest::read_weather(tmp.file("weather.csv"));
    CHECK(weather.size() == 365);
    auto raster = geom::read_raster(tmp.file("h1.asc"));
    CHECK(raster.values == w1.spec.types[0].houses.values);
    auto events = ingest::parse_events(tmp.file("events.csv"), raster.grid, 365.0,
                                       weather.start_date);
    CHECK(events.events.size() == w1.events.events.size());
  }
}
