#include "sim.hpp"

#include <cmath>
#include <filesystem>

#include <json.hpp>

#include "error.hpp"
#include "io.hpp"
#include "rng.hpp"
#include "text.hpp"

namespace stpp::sim {

ingest::EventPattern simulate_poisson(const IntensityFn& intensity, const geom::GridPtr& grid,
                                      double t_len, uint64_t seed, int mark) {
  grid->validate();
  ingest::EventPattern pattern;
  pattern.window = grid;
  pattern.t_len = t_len;
  const auto& g = *grid;
  const double ca = g.cell_area();
  const long days = static_cast<long>(std::ceil(t_len));
  Rng master(seed);
  for (int r = 0; r < g.nrows; ++r) {
    for (int c = 0; c < g.ncols; ++c) {
      size_t cell = g.idx(r, c);
      if (!g.mask[cell]) continue;
      const double cx = g.center_x(c), cy = g.center_y(r);
      for (long day = 0; day < days; ++day) {
        double lam = intensity(cx, cy, static_cast<double>(day));
        if (lam < 0 || !std::isfinite(lam))
          throw NumericError("simulate_poisson: invalid intensity " + fmt_g17(lam) +
                             " at cell " + std::to_string(cell) + " day " + std::to_string(day));
        if (lam == 0.0) continue;
        Rng rng = master.stream(cell, static_cast<uint64_t>(day));
        long n = rng.poisson(lam * ca);
        for (long i = 0; i < n; ++i) {
          double x = g.xll + (c + rng.uniform()) * g.cellsize;
          double y = g.yll + (g.nrows - r - 1 + rng.uniform()) * g.cellsize;
          pattern.events.push_back({x, y, static_cast<double>(day), mark});
        }
      }
    }
  }
  return pattern;
}

ingest::EventPattern simulate_model(const model::ModelSpec& spec,
                                    const ingest::TemporalCovariates& cov, double t_len,
                                    uint64_t seed) {
  spec.validate();
  ingest::EventPattern merged;
  merged.window = spec.grid();
  merged.t_len = t_len;
  for (int k = 1; k <= spec.n_types(); ++k) {
    const auto& tm = spec.types[k - 1];
    // Per-day rates precomputed once; the per-cell factor is h_k.
    const long days = static_cast<long>(std::ceil(t_len));
    std::vector<double> rate(days);
    for (long d = 0; d < days; ++d)
      rate[d] = model::temporal_intensity(tm.theta, static_cast<double>(d), cov, tm.basis);
    auto intensity = [&](double x, double y, double t) {
      int r, c;
      tm.houses.grid->cell_of(x, y, &r, &c);
      return tm.houses.at(r, c) * rate[static_cast<long>(t)];
    };
    auto part = simulate_poisson(intensity, spec.grid(), t_len,
                                 Rng::derive(seed, 0x5150u + k), k);
    merged.events.insert(merged.events.end(), part.events.begin(), part.events.end());
  }
  return merged;
}

double expected_count(const IntensityFn& intensity, const geom::GridPtr& grid, double t_len) {
  const auto& g = *grid;
  const double ca = g.cell_area();
  const long days = static_cast<long>(std::ceil(t_len));
  double total = 0.0;
  for (int r = 0; r < g.nrows; ++r)
    for (int c = 0; c < g.ncols; ++c) {
      if (!g.in(r, c)) continue;
      const double cx = g.center_x(c), cy = g.center_y(r);
      for (long day = 0; day < days; ++day)
        total += intensity(cx, cy, static_cast<double>(day)) * ca;
    }
  return total;
}

namespace {

ingest::TemporalCovariates synth_weather(long t_len, const ingest::Date& start, Rng rng) {
  ingest::TemporalCovariates cov;
  cov.start_date = start;
  const double w = 2.0 * M_PI / 365.0;
  for (long t = 0; t < t_len; ++t) {
    double wind = 12.0 + 5.0 * std::sin(w * t + 0.9) + 2.5 * rng.normal();
    wind = std::max(0.0, wind);
    double temp = 10.0 - 8.0 * std::cos(w * t) + 2.5 * rng.normal();
    double sun = std::max(0.0, 5.5 + 3.5 * std::cos(w * t) + 1.5 * rng.normal());
    double vis = std::min(80.0, std::max(1.0, 45.0 + 15.0 * std::cos(w * t) + 8.0 * rng.normal()));
    cov.wind_speed.push_back(wind);
    cov.temperature.push_back(temp);
    cov.wind_chill.push_back(ingest::compute_wind_chill(wind, temp));
    cov.sunshine.push_back(sun);
    cov.visibility.push_back(vis);
  }
  return cov;
}

geom::RasterField synth_houses(const geom::GridPtr& grid, double total, int bumps, Rng rng) {
  std::vector<geom::WeightedPoint> centers;
  const auto& g = *grid;
  const double margin = 0.15;
  for (int b = 0; b < bumps; ++b) {
    double x = g.xll + (margin + (1 - 2 * margin) * rng.uniform()) * g.ncols * g.cellsize;
    double y = g.yll + (margin + (1 - 2 * margin) * rng.uniform()) * g.nrows * g.cellsize;
    centers.push_back({x, y, total / bumps});
  }
  double sigma = (2.0 + 2.0 * rng.uniform()) * g.cellsize;
  return geom::smooth_points(centers, grid, sigma);
}

// Default coefficients: mild decaying harmonics plus a negative wind-chill
// slope; the intercept is calibrated afterwards.
std::vector<double> default_theta(const model::TemporalBasisSpec& basis, Rng rng) {
  std::vector<double> theta(basis.dimension(), 0.0);
  size_t i = 1;
  for (int j = 1; j <= basis.o1; ++j) {
    theta[i++] = 0.8 / j + 0.1 * rng.normal();
    theta[i++] = 0.2 / j + 0.1 * rng.normal();
  }
  if (basis.include_speed)
    for (int p = 1; p <= basis.o2; ++p) theta[i++] = (p == 1 ? 0.02 : 0.0);
  for (int p = 1; p <= basis.o3; ++p) theta[i++] = (p == 1 ? -0.05 : (p == 2 ? 1e-3 : 0.0));
  if (basis.include_interaction)
    for (int p = 1; p <= basis.o4; ++p) theta[i++] = (p == 1 ? 2e-3 : 0.0);
  return theta;
}

}  // namespace

SyntheticWorld make_synthetic_world(const WorldConfig& config) {
  if (config.n_types < 1 || config.n_types > 4)
    throw InputError("world: n_types must be in 1..4");
  if (config.t_len < 1) throw InputError("world: t_len must be positive");

  SyntheticWorld world;
  world.config = config;
  Rng master(config.seed);
  auto grid = geom::make_grid(config.ncols, config.nrows, config.xll, config.yll,
                              config.cellsize);
  world.weather = synth_weather(config.t_len, config.start_date, master.stream(7));

  for (int k = 1; k <= config.n_types; ++k) {
    model::TypeModel tm;
    tm.basis = (static_cast<int>(config.bases.size()) >= k) ? config.bases[k - 1]
                                                            : model::make_basis(2, 0, 1, 0);
    tm.basis.validate();
    tm.houses = synth_houses(grid, config.houses_per_type, config.bumps_per_type,
                             master.stream(13, k));
    tm.raster_path = "h" + std::to_string(k) + ".asc";
    tm.theta = (static_cast<int>(config.theta.size()) >= k && !config.theta[k - 1].empty())
                   ? config.theta[k - 1]
                   : default_theta(tm.basis, master.stream(17, k));
    if (static_cast<int>(tm.theta.size()) != tm.basis.dimension())
      throw InputError("world: theta length does not match basis for type " + std::to_string(k));
    world.spec.types.push_back(std::move(tm));
  }

  // Calibrate intercepts so each type contributes target/n_types expected events.
  const double per_type = config.target_events / config.n_types;
  for (int k = 1; k <= config.n_types; ++k) {
    auto& tm = world.spec.types[k - 1];
    double mass = tm.houses.integral();
    double day_sum = 0.0;
    for (long t = 0; t < config.t_len; ++t)
      day_sum += model::temporal_intensity(tm.theta, static_cast<double>(t), world.weather,
                                           tm.basis);
    double current = mass * day_sum;
    if (!(current > 0)) throw NumericError("world: degenerate expected count for type " +
                                           std::to_string(k));
    tm.theta[0] += std::log(per_type / current);
  }
  world.spec.validate();

  world.events = simulate_model(world.spec, world.weather, static_cast<double>(config.t_len),
                                master.stream(23).seed());
  world.expected = 0.0;
  for (int k = 1; k <= config.n_types; ++k) {
    const auto& tm = world.spec.types[k - 1];
    double day_sum = 0.0;
    for (long t = 0; t < config.t_len; ++t)
      day_sum += model::temporal_intensity(tm.theta, static_cast<double>(t), world.weather,
                                           tm.basis);
    world.expected += tm.houses.integral() * day_sum;
  }
  if (world.expected < 50.0)
    world.warnings.push_back("underpowered configuration: expected count " +
                             fmt_g17(world.expected) + " < 50");
  return world;
}

void write_world(const SyntheticWorld& world, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json truth;
  truth["expected_count"] = world.expected;
  truth["realized_count"] = world.events.events.size();
  truth["t_len"] = world.config.t_len;
  truth["seed"] = world.config.seed;
  truth["start_date"] = ingest::date_to_string(world.config.start_date);
  truth["types"] = nlohmann::json::array();
  for (size_t i = 0; i < world.spec.types.size(); ++i) {
    const auto& tm = world.spec.types[i];
    geom::write_raster(tm.houses, (fs::path(dir) / tm.raster_path).string());
    nlohmann::json t;
    t["basis"] = {{"o1", tm.basis.o1},
                  {"o2", tm.basis.o2},
                  {"o3", tm.basis.o3},
                  {"o4", tm.basis.o4},
                  {"include_speed", tm.basis.include_speed},
                  {"include_interaction", tm.basis.include_interaction},
                  {"period", tm.basis.period}};
    t["raster"] = tm.raster_path;
    t["theta"] = tm.theta;
    truth["types"].push_back(t);
  }
  ingest::write_weather(world.weather, (fs::path(dir) / "weather.csv").string());
  ingest::write_events(world.events, (fs::path(dir) / "events.csv").string());
  atomic_write((fs::path(dir) / "truth.json").string(), truth.dump(2) + "\n");
}

}  // namespace stpp::sim
