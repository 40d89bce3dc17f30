#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "geom.hpp"
#include "ingest.hpp"
#include "model.hpp"

namespace stpp::sim {

// λ(x, y, t) in m⁻²·day⁻¹, evaluated at cell centers and integer days.
using IntensityFn = std::function<double(double x, double y, double t)>;

// Inhomogeneous Poisson sample at daily resolution: per cell-day the count is
// Poisson(λ·cellarea), locations uniform within the cell, t the integer day.
// Draws use a counter-based stream keyed by (seed, cell, day), so generation
// order cannot matter.
ingest::EventPattern simulate_poisson(const IntensityFn& intensity, const geom::GridPtr& grid,
                                      double t_len, uint64_t seed, int mark = 1);

// Superposition of the per-type processes of a fitted model; marks carry the
// house type.
ingest::EventPattern simulate_model(const model::ModelSpec& spec,
                                    const ingest::TemporalCovariates& cov, double t_len,
                                    uint64_t seed);

// Expected count Σ_cells Σ_days λ·cellarea on the same grid the sampler uses.
double expected_count(const IntensityFn& intensity, const geom::GridPtr& grid, double t_len);

struct WorldConfig {
  int ncols = 40, nrows = 40;
  double cellsize = 500.0, xll = 0.0, yll = 0.0;
  int n_types = 1;
  long t_len = 730;
  ingest::Date start_date{2004, 1, 1};
  double target_events = 1000.0;  // total expected count, split across types
  int bumps_per_type = 3;
  double houses_per_type = 100.0;
  std::vector<model::TemporalBasisSpec> bases;     // defaults to o1=2, o3=1 per type
  std::vector<std::vector<double>> theta;          // optional; intercept is re-calibrated
  uint64_t seed = 1;
};

struct SyntheticWorld {
  model::ModelSpec spec;  // rasters + true theta per type
  ingest::TemporalCovariates weather;
  ingest::EventPattern events;
  double expected = 0.0;
  std::vector<std::string> warnings;
  WorldConfig config;
};

// Smooth Gaussian-bump house rasters, sinusoid-plus-noise weather, events
// drawn from the true model; ground truth retained for scoring.
SyntheticWorld make_synthetic_world(const WorldConfig& config);

// Directory layout: h<k>.asc, weather.csv, events.csv, truth.json.
void write_world(const SyntheticWorld& world, const std::string& dir);

}  // namespace stpp::sim
