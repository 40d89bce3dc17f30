#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "diag.hpp"
#include "error.hpp"
#include "fit.hpp"
#include "forest.hpp"
#include "geom.hpp"
#include "ingest.hpp"
#include "io.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "sim.hpp"
#include "text.hpp"

namespace stpp::run {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json parse_config(const std::string& config_json) {
  try {
    return json::parse(config_json);
  } catch (const json::exception& e) {
    throw InputError(std::string("config: invalid JSON: ") + e.what());
  }
}

const json& require(const json& j, const std::string& key) {
  if (!j.contains(key)) throw InputError("config: missing key '" + key + "'");
  return j.at(key);
}

std::string require_str(const json& j, const std::string& key) {
  const json& v = require(j, key);
  if (!v.is_string()) throw InputError("config: key '" + key + "' must be a string");
  return v.get<std::string>();
}

uint64_t require_seed(const json& j) {
  const json& v = require(j, "seed");
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw InputError("config: 'seed' must be an integer");
  return v.get<uint64_t>();
}

std::string out_path(const json& j, const std::string& name) {
  std::string dir = require_str(j, "out");
  fs::create_directories(dir);
  return (fs::path(dir) / name).string();
}

model::TemporalBasisSpec basis_from_json(const json& b) {
  return model::make_basis(b.value("o1", 1), b.value("o2", 0), b.value("o3", 1),
                           b.value("o4", 0));
}

// Loads events + weather against the model grid; t_len comes from the weather.
struct DataBundle {
  ingest::TemporalCovariates weather;
  ingest::EventPattern events;
};

DataBundle load_data(const json& cfg, const geom::GridPtr& grid) {
  DataBundle d;
  d.weather = ingest::read_weather(require_str(cfg, "weather"));
  d.events = ingest::parse_events(require_str(cfg, "events"), grid,
                                  static_cast<double>(d.weather.size()), d.weather.start_date);
  d.events.validate();
  return d;
}

void check_house_types(const ingest::EventPattern& events, int n_types) {
  for (const auto& e : events.events)
    if (e.k > n_types)
      throw InputError("event with house type " + std::to_string(e.k) + " but only " +
                       std::to_string(n_types) + " house rasters configured");
}

model::ModelSpec load_rasters(const json& cfg) {
  const json& paths = require(cfg, "rasters");
  if (!paths.is_array() || paths.empty())
    throw InputError("config: 'rasters' must be a non-empty array of paths");
  model::ModelSpec spec;
  for (const auto& p : paths) {
    model::TypeModel tm;
    // Absolute references keep the fit artifact loadable from any directory.
    tm.raster_path = fs::absolute(p.get<std::string>()).lexically_normal().string();
    tm.houses = geom::read_raster(tm.raster_path);
    spec.types.push_back(std::move(tm));
  }
  for (size_t i = 1; i < spec.types.size(); ++i)
    if (!spec.types[i].houses.grid->same_geometry(*spec.types[0].houses.grid))
      throw InputError("rasters do not share one grid");
  return spec;
}

std::string sci3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

}  // namespace

void cmd_simulate(const std::string& config_json) {
  json cfg = parse_config(config_json);
  sim::WorldConfig wc;
  wc.seed = require_seed(cfg);
  if (cfg.contains("grid")) {
    const json& g = cfg.at("grid");
    wc.ncols = g.value("ncols", wc.ncols);
    wc.nrows = g.value("nrows", wc.nrows);
    wc.cellsize = g.value("cellsize", wc.cellsize);
    wc.xll = g.value("xllcorner", wc.xll);
    wc.yll = g.value("yllcorner", wc.yll);
  }
  wc.n_types = cfg.value("n_types", wc.n_types);
  wc.t_len = cfg.value("t_len_days", wc.t_len);
  if (cfg.contains("start_date")) wc.start_date = ingest::parse_date(cfg.at("start_date"));
  wc.target_events = cfg.value("target_events", wc.target_events);
  wc.bumps_per_type = cfg.value("bumps_per_type", wc.bumps_per_type);
  wc.houses_per_type = cfg.value("houses_per_type", wc.houses_per_type);
  if (cfg.contains("orders"))
    for (const auto& b : cfg.at("orders")) wc.bases.push_back(basis_from_json(b));
  if (cfg.contains("theta"))
    wc.theta = cfg.at("theta").get<std::vector<std::vector<double>>>();

  sim::SyntheticWorld world = sim::make_synthetic_world(wc);
  std::string dir = require_str(cfg, "out");
  sim::write_world(world, dir);
  for (const auto& w : world.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::printf("world written to %s\n", dir.c_str());
  std::printf("expected count %s, realized count %zu\n", fmt_g17(world.expected).c_str(),
              world.events.events.size());
}

void cmd_importance(const std::string& config_json) {
  json cfg = parse_config(config_json);
  uint64_t seed = require_seed(cfg);

  std::vector<std::pair<std::string, geom::RasterField>> covariates;
  for (const auto& c : require(cfg, "spatial_covariates")) {
    std::string name = c.at("name").get<std::string>();
    covariates.emplace_back(name, geom::read_raster(c.at("path").get<std::string>()));
  }
  if (covariates.empty()) throw InputError("config: no spatial covariates");

  DataBundle data = load_data(cfg, covariates[0].second.grid);
  bool exclude_boundary = cfg.value("exclude_boundary", false);
  forest::TrainingTable spatial =
      forest::build_spatial_table(data.events, covariates, exclude_boundary);
  forest::TrainingTable temporal = forest::build_temporal_table(data.events, data.weather);

  forest::ForestConfig fc;
  fc.n_trees = cfg.value("n_trees", 2000);
  fc.min_node_size = cfg.value("min_node_size", 5);

  auto run_table = [&](const forest::TrainingTable& table, int mtry, uint64_t stream,
                       const std::string& prefix) {
    forest::ForestConfig c = fc;
    c.mtry = mtry;
    c.seed = Rng::derive(seed, stream);
    forest::Forest f = forest::fit_forest(table, c);
    auto trad = forest::importance(f, table, forest::ImportanceMode::kTraditional,
                                   Rng::derive(seed, stream + 1));
    auto cond = forest::importance(f, table, forest::ImportanceMode::kConditional,
                                   Rng::derive(seed, stream + 2));
    atomic_write(out_path(cfg, prefix + "_traditional.csv"), forest::importance_to_csv(trad));
    atomic_write(out_path(cfg, prefix + "_conditional.csv"), forest::importance_to_csv(cond));
  };
  run_table(spatial, cfg.value("mtry_spatial", 0), 10, "spatial");
  run_table(temporal, cfg.value("mtry_temporal", 0), 20, "temporal");
  std::printf("importance tables written: spatial %zux%zu, temporal %zux%zu\n", spatial.n(),
              spatial.m() + 1, temporal.n(), temporal.m() + 1);
}

namespace {

struct LrtReport {
  std::string term;
  fit::LrtResult result;
  model::TemporalBasisSpec full, reduced;
  bool ran = false;
};

// Reduced = AIC-best candidate without the term; full = the same orders with
// the term at its AIC-best order, which keeps the pair nested.
LrtReport run_lrt(const std::string& term, int o_lo, int o_hi,
                  const fit::GridSearchResult& search,
                  const std::vector<ingest::Event>& events_k,
                  const std::vector<ingest::Event>& dummy_k, const model::ModelSpec& spec, int k,
                  const fit::DummySpec& dummy, const ingest::TemporalCovariates& cov,
                  double t_len) {
  LrtReport report;
  report.term = term;
  if (o_lo > 0 || o_hi < 1) return report;  // grid does not span with/without

  auto order_of = [&](const model::TemporalBasisSpec& b) {
    return term == "speed" ? b.o2 : b.o4;
  };
  const fit::CandidateSummary* best_without = nullptr;
  for (const auto& c : search.candidates) {
    if (!c.converged || order_of(c.basis) != 0) continue;
    if (!best_without || c.aic < best_without->aic) best_without = &c;
  }
  if (!best_without) return report;
  const fit::CandidateSummary* best_with = nullptr;
  for (const auto& c : search.candidates) {
    if (!c.converged || order_of(c.basis) == 0) continue;
    model::TemporalBasisSpec stripped = c.basis;
    if (term == "speed") {
      stripped.o2 = 0;
      stripped.include_speed = false;
    } else {
      stripped.o4 = 0;
      stripped.include_interaction = false;
    }
    if (!(stripped == best_without->basis)) continue;
    if (!best_with || c.aic < best_with->aic) best_with = &c;
  }
  if (!best_with) return report;

  fit::TypeFit reduced =
      fit::fit_type(events_k, dummy_k, spec, k, best_without->basis, dummy, cov, t_len);
  fit::TypeFit full =
      fit::fit_type(events_k, dummy_k, spec, k, best_with->basis, dummy, cov, t_len);
  if (!reduced.converged || !full.converged) return report;
  report.result = fit::likelihood_ratio_test(full, reduced);
  report.full = full.basis;
  report.reduced = reduced.basis;
  report.ran = true;
  return report;
}

}  // namespace

void cmd_fit(const std::string& config_json) {
  json cfg = parse_config(config_json);
  uint64_t seed = require_seed(cfg);
  model::ModelSpec spec = load_rasters(cfg);
  DataBundle data = load_data(cfg, spec.grid());
  check_house_types(data.events, spec.n_types());
  const double t_len = static_cast<double>(data.weather.size());
  const double ci_level = cfg.value("ci_level", 0.95);
  const int godambe_substeps = cfg.value("godambe_substeps", 1);

  fit::DummySpec dummy;
  if (cfg.contains("r")) dummy.r = cfg.at("r").get<std::vector<double>>();
  dummy.validate(spec.n_types());

  fit::GridRanges ranges;
  if (cfg.contains("orders")) {
    const json& o = cfg.at("orders");
    auto range = [&](const char* key, int& lo, int& hi) {
      if (!o.contains(key)) return;
      auto v = o.at(key).get<std::vector<int>>();
      if (v.size() != 2) throw InputError(std::string("config: orders.") + key +
                                          " must be [lo, hi]");
      lo = v[0];
      hi = v[1];
    };
    range("o1", ranges.o1_lo, ranges.o1_hi);
    range("o2", ranges.o2_lo, ranges.o2_hi);
    range("o3", ranges.o3_lo, ranges.o3_hi);
    range("o4", ranges.o4_lo, ranges.o4_hi);
  }
  ranges.validate();
  const bool want_lrt = cfg.value("lrt", true);

  std::vector<fit::TypeFit> fits;
  std::ostringstream report;
  size_t failed = 0;
  for (int k = 1; k <= spec.n_types(); ++k) {
    auto events_k = data.events.of_type(k);
    auto dummy_k =
        fit::simulate_dummy(spec, dummy, k, t_len, Rng::derive(seed, 3000 + k)).events;
    report << "== house type " << k << " ==\n";
    report << "events " << events_k.size() << ", dummies " << dummy_k.size() << ", r "
           << fmt_g17(dummy.multiplier(k)) << "\n";
    try {
      fit::GridSearchResult search =
          fit::grid_search_aic(events_k, dummy_k, spec, k, ranges, dummy, data.weather, t_len,
                               ci_level, godambe_substeps);
      for (const auto& w : search.warnings) report << "warning: " << w << "\n";
      fit::TypeFit best = search.best;
      spec.types[k - 1].basis = best.basis;
      spec.types[k - 1].theta = best.theta;
      report << "selected orders (o1=" << best.basis.o1 << ", o2=" << best.basis.o2
             << ", o3=" << best.basis.o3 << ", o4=" << best.basis.o4 << ")"
             << ", AIC " << fmt_g17(best.aic) << ", loglik " << fmt_g17(best.loglik)
             << ", iterations " << best.iterations << "\n";
      auto names = best.basis.term_names();
      for (size_t p = 0; p < best.theta.size(); ++p) {
        double half = 0.5 * (best.ci[p].hi - best.ci[p].lo);
        report << "  theta[" << names[p] << "] = " << sci3(best.theta[p]) << " (±"
               << sci3(half) << ")\n";
      }
      report << "rho >= 4*lambda on " << fmt_g17(100.0 * best.rho_ge_4lambda)
             << "% of cell-days\n";
      if (want_lrt) {
        for (const auto& term : {std::string("speed"), std::string("interaction")}) {
          int lo = term == "speed" ? ranges.o2_lo : ranges.o4_lo;
          int hi = term == "speed" ? ranges.o2_hi : ranges.o4_hi;
          LrtReport lrt = run_lrt(term, lo, hi, search, events_k, dummy_k, spec, k, dummy,
                                  data.weather, t_len);
          if (lrt.ran)
            report << "LRT " << term << ": statistic " << fmt_g17(lrt.result.statistic)
                   << ", dof " << lrt.result.dof << ", p " << fmt_g17(lrt.result.p) << "\n";
        }
      }
      fits.push_back(std::move(best));
    } catch (const NumericError& e) {
      ++failed;
      report << "FAILED: " << e.what() << "\n";
      fit::TypeFit broken;
      broken.k = k;
      broken.basis = spec.types[k - 1].basis;
      broken.r = dummy.multiplier(k);
      broken.n_events = events_k.size();
      broken.n_dummy = dummy_k.size();
      broken.converged = false;
      broken.message = e.what();
      fits.push_back(std::move(broken));
    }
    report << "\n";
  }
  if (failed == static_cast<size_t>(spec.n_types()))
    throw NumericError("fit failed for every house type; see report");

  atomic_write(out_path(cfg, "fit.json"), fit::fits_to_json(fits, spec, ci_level));
  atomic_write(out_path(cfg, "report.txt"), report.str());
  for (const auto& f : fits) {
    std::string status = f.converged ? "converged" : "failed: " + f.message;
    std::printf("type %d: %s (%d iterations, loglik %s)\n", f.k, status.c_str(), f.iterations,
                fmt_g17(f.loglik).c_str());
  }
}

void cmd_predict(const std::string& config_json) {
  json cfg = parse_config(config_json);
  model::ModelSpec spec;
  auto fits = fit::fits_from_json(read_file(require_str(cfg, "fit")),
                                  fs::path(require_str(cfg, "fit")).parent_path().string(),
                                  &spec);
  std::vector<fit::TypeFit> usable;
  for (auto& f : fits)
    if (f.converged) usable.push_back(std::move(f));
  if (usable.empty()) throw NumericError("predict: no converged house type in the fit");
  ingest::TemporalCovariates weather = ingest::read_weather(require_str(cfg, "weather"));
  const double ci_level = cfg.value("ci_level", 0.95);

  std::ostringstream csv;
  csv << "t,lambda,lo,hi\n";
  auto emit = [&](long t) {
    auto rows = fit::predict_total(usable, spec, weather, t, t + 1, ci_level);
    csv << fmt_g17(rows[0].t) << ',' << fmt_g17(rows[0].lambda) << ',' << fmt_g17(rows[0].lo)
        << ',' << fmt_g17(rows[0].hi) << '\n';
  };

  long n_rows = 0;
  if (cfg.contains("dates")) {
    if (!weather.start_date)
      throw InputError("predict: 'dates' given but the weather has no calendar dates");
    auto v = cfg.at("dates").get<std::vector<std::string>>();
    if (v.size() != 2) throw InputError("config: 'dates' must be [first, last]");
    ingest::Date d = ingest::parse_date(v[0]);
    ingest::Date last = ingest::parse_date(v[1]);
    // Walk the real calendar; leap days borrow the February 28 prediction.
    while (true) {
      ingest::Date lookup = ingest::is_feb29(d) ? ingest::Date{d.year, 2, 28} : d;
      long t = ingest::day_index_365(lookup, *weather.start_date);
      if (t < 0 || t >= static_cast<long>(weather.size()))
        throw InputError("predict: no weather for " + ingest::date_to_string(d));
      emit(t);
      ++n_rows;
      if (d == last) break;
      // Increment on the real calendar.
      static const int md[13] = {0, 31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
      int dim = (d.month == 2 && ingest::is_leap_year(d.year)) ? 29 : md[d.month];
      if (d.day < dim) ++d.day;
      else if (d.month < 12) { d.month += 1; d.day = 1; }
      else { d.year += 1; d.month = 1; d.day = 1; }
    }
  } else {
    long t0 = cfg.value("t_start", 0L);
    long t1 = cfg.contains("t_end") ? cfg.at("t_end").get<long>()
                                    : static_cast<long>(weather.size());
    auto rows = fit::predict_total(usable, spec, weather, t0, t1, ci_level);
    for (const auto& r : rows) {
      csv << fmt_g17(r.t) << ',' << fmt_g17(r.lambda) << ',' << fmt_g17(r.lo) << ','
          << fmt_g17(r.hi) << '\n';
      ++n_rows;
    }
  }
  atomic_write(out_path(cfg, "predictions.csv"), csv.str());

  if (cfg.contains("raster_days")) {
    for (long t : cfg.at("raster_days").get<std::vector<long>>()) {
      if (t < 0 || t >= static_cast<long>(weather.size()))
        throw InputError("predict: raster day " + std::to_string(t) + " has no weather");
      geom::RasterField field =
          fit::prediction_raster(usable, spec, weather, static_cast<double>(t));
      geom::write_raster(field, out_path(cfg, "raster_t" + std::to_string(t) + ".asc"));
    }
  }
  std::printf("predictions written: %ld rows\n", n_rows);
}

namespace {

// Per-point plug-in intensities from the fitted model.
struct FittedPlugin {
  const model::ModelSpec& spec;
  const ingest::TemporalCovariates& cov;
  double t_len;

  std::vector<double> day_rate(int k) const {
    const auto& tm = spec.types[k - 1];
    std::vector<double> rate(static_cast<long>(std::ceil(t_len)));
    for (long t = 0; t < static_cast<long>(rate.size()); ++t)
      rate[t] = model::temporal_intensity(tm.theta, static_cast<double>(t), cov, tm.basis);
    return rate;
  }

  // λ(x) in m⁻²·day⁻¹ at each event.
  std::vector<double> spacetime(const ingest::EventPattern& pattern) const {
    std::vector<std::vector<double>> rates;
    for (int k = 1; k <= spec.n_types(); ++k) rates.push_back(day_rate(k));
    std::vector<double> out;
    out.reserve(pattern.events.size());
    for (const auto& e : pattern.events) {
      int r, c;
      pattern.window->cell_of(e.x, e.y, &r, &c);
      double lam = 0.0;
      for (int k = 1; k <= spec.n_types(); ++k)
        lam += spec.types[k - 1].houses.at(r, c) * rates[k - 1][static_cast<long>(e.t)];
      out.push_back(lam);
    }
    return out;
  }

  // Spatial projection ∫λ dt in m⁻² at each event.
  std::vector<double> spatial(const ingest::EventPattern& pattern) const {
    std::vector<double> day_sum(spec.n_types());
    for (int k = 1; k <= spec.n_types(); ++k) {
      auto rate = day_rate(k);
      for (double v : rate) day_sum[k - 1] += v;
    }
    std::vector<double> out;
    out.reserve(pattern.events.size());
    for (const auto& e : pattern.events) {
      int r, c;
      pattern.window->cell_of(e.x, e.y, &r, &c);
      double lam = 0.0;
      for (int k = 1; k <= spec.n_types(); ++k)
        lam += spec.types[k - 1].houses.at(r, c) * day_sum[k - 1];
      out.push_back(lam);
    }
    return out;
  }

  // Temporal projection ∫λ du in day⁻¹ at each event.
  std::vector<double> temporal(const ingest::EventPattern& pattern) const {
    std::vector<std::vector<double>> rates;
    std::vector<double> mass(spec.n_types());
    for (int k = 1; k <= spec.n_types(); ++k) {
      rates.push_back(day_rate(k));
      mass[k - 1] = spec.types[k - 1].houses.integral();
    }
    std::vector<double> out;
    out.reserve(pattern.events.size());
    for (const auto& e : pattern.events) {
      double lam = 0.0;
      for (int k = 1; k <= spec.n_types(); ++k)
        lam += mass[k - 1] * rates[k - 1][static_cast<long>(e.t)];
      out.push_back(lam);
    }
    return out;
  }
};

void diagnose_rho_compare(const json& cfg, const model::ModelSpec& spec_in,
                          const DataBundle& data, uint64_t seed);

}  // namespace

void cmd_diagnose(const std::string& config_json) {
  json cfg = parse_config(config_json);
  const std::string which = require_str(cfg, "which");
  model::ModelSpec spec;
  auto fits = fit::fits_from_json(read_file(require_str(cfg, "fit")),
                                  fs::path(require_str(cfg, "fit")).parent_path().string(),
                                  &spec);
  for (size_t i = 0; i < fits.size(); ++i) {
    if (!fits[i].converged)
      throw NumericError("diagnose: house type " + std::to_string(fits[i].k) +
                         " did not converge in the fit");
    spec.types[i].basis = fits[i].basis;
    spec.types[i].theta = fits[i].theta;
  }
  DataBundle data = load_data(cfg, spec.grid());
  check_house_types(data.events, spec.n_types());
  const double t_len = static_cast<double>(data.weather.size());
  FittedPlugin plugin{spec, data.weather, t_len};

  if (which == "pcf") {
    double smax = cfg.value("spatial_max_lag", 10000.0);
    double sband = cfg.value("spatial_bandwidth", 500.0);
    double sstep = cfg.value("spatial_lag_step", 250.0);
    double tmax = cfg.value("temporal_max_lag", 100.0);
    double tband = cfg.value("temporal_bandwidth", 10.0);
    std::vector<double> slags, tlags;
    for (double r = sstep; r <= smax + 1e-9; r += sstep) slags.push_back(r);
    for (double v = 1.0; v <= tmax + 1e-9; v += 1.0) tlags.push_back(v);
    auto sp = diag::pcf(data.events, plugin.spatial(data.events), 2, slags, sband);
    auto tp = diag::pcf(data.events, plugin.temporal(data.events), 1, tlags, tband);
    atomic_write(out_path(cfg, "pcf_spatial.csv"), diag::pcf_to_csv(sp));
    atomic_write(out_path(cfg, "pcf_temporal.csv"), diag::pcf_to_csv(tp));
    std::printf("pcf written: %zu spatial lags, %zu temporal lags\n", slags.size(),
                tlags.size());
  } else if (which == "kfun") {
    int steps = cfg.value("k_steps", 100);
    double dr = cfg.value("k_dr", 100.0);
    double dv = cfg.value("k_dv", 1.0);
    std::vector<double> r_grid(steps), v_grid(steps);
    for (int i = 0; i < steps; ++i) {
      r_grid[i] = dr * (i + 1);
      v_grid[i] = dv * (i + 1);
    }
    auto k = diag::k_inhom(data.events, plugin.spacetime(data.events), r_grid, v_grid);
    atomic_write(out_path(cfg, "kfun.csv"), diag::k_to_csv(k));
    std::printf("k-function written: %d x %d grid\n", steps, steps);
  } else if (which == "envelope") {
    uint64_t seed = require_seed(cfg);
    diag::EnvelopeParams params;
    params.n_sim = cfg.value("n_sim", 99);
    params.n_lags = cfg.value("k_steps", 100);
    params.dr = cfg.value("k_dr", 100.0);
    params.dv = cfg.value("k_dv", 1.0);
    params.kde_sigma = cfg.value("kde_sigma", 1000.0);
    params.kde_t_bw = cfg.value("kde_t_bw", 10.0);
    params.pcf_bandwidth = cfg.value("spatial_bandwidth", 500.0);
    std::string stat = cfg.value("statistic", std::string("kfun"));
    if (stat == "kfun") params.statistic = diag::EnvelopeStatistic::kKFunction;
    else if (stat == "pcf") params.statistic = diag::EnvelopeStatistic::kPcf;
    else throw InputError("config: unknown envelope statistic '" + stat + "'");
    auto env = diag::envelope_test(spec, data.weather, data.events, params, seed);
    atomic_write(out_path(cfg, "envelope.csv"), diag::envelope_to_csv(env));
    atomic_write(out_path(cfg, "envelope_verdict.txt"),
                 std::string(env.inside ? "inside" : "outside") + "\n");
    std::printf("envelope: observed curve %s the %d-simulation envelope\n",
                env.inside ? "inside" : "outside", params.n_sim);
  } else if (which == "residuals") {
    double sigma = cfg.value("residual_sigma", 1000.0);
    auto field = diag::residuals_spatial(spec, data.weather, data.events, sigma);
    auto monthly = diag::residuals_temporal(spec, data.weather, data.events);
    geom::write_raster(field, out_path(cfg, "residuals_spatial.asc"));
    atomic_write(out_path(cfg, "residuals_monthly.csv"),
                 diag::monthly_residuals_to_csv(monthly));
    std::printf("residuals written: %zu months\n", monthly.size());
  } else if (which == "rho_compare") {
    uint64_t seed = require_seed(cfg);
    diagnose_rho_compare(cfg, spec, data, seed);
  } else {
    throw InputError("config: unknown diagnostic '" + which +
                     "' (want pcf|kfun|envelope|residuals|rho_compare)");
  }
}

namespace {

// Tuned versus uniform dummy intensity with matched expected dummy counts;
// averaged fitted-value differences over n_rep paired runs.
void diagnose_rho_compare(const json& cfg, const model::ModelSpec& spec_in,
                          const DataBundle& data, uint64_t seed) {
  model::ModelSpec spec = spec_in;
  const double t_len = static_cast<double>(data.weather.size());
  const long days = static_cast<long>(t_len);
  const int n_rep = cfg.value("n_rep", 10);
  fit::DummySpec dummy;
  if (cfg.contains("r")) dummy.r = cfg.at("r").get<std::vector<double>>();
  dummy.validate(spec.n_types());

  geom::RasterField spatial_diff(spec.grid());
  std::vector<double> tuned_series(days, 0.0), uniform_series(days, 0.0);
  const double window_area = spec.grid()->area();

  for (int k = 1; k <= spec.n_types(); ++k) {
    const auto& tm = spec.types[k - 1];
    auto events_k = data.events.of_type(k);
    const double r_k = dummy.multiplier(k);
    double season_sum = 0.0;
    for (long t = 0; t < days; ++t)
      season_sum += fit::DummySpec::seasonal(static_cast<double>(t), tm.basis.period);
    const double expected_dummies = r_k * tm.houses.integral() * season_sum;
    const double c_uniform = expected_dummies / (window_area * t_len);

    std::vector<double> day_rate_tuned(days, 0.0), day_rate_unif(days, 0.0);
    int converged_reps = 0;
    for (int rep = 0; rep < n_rep; ++rep) {
      auto dummy_tuned =
          fit::simulate_dummy(spec, dummy, k, t_len, Rng::derive(seed, 5000 + 97 * k + rep));
      auto uniform_intensity = [&](double, double, double) { return c_uniform; };
      auto dummy_unif_all = sim::simulate_poisson(uniform_intensity, spec.grid(), t_len,
                                                  Rng::derive(seed, 7000 + 97 * k + rep), k);
      // Uniform dummies in zero-density cells carry no likelihood information.
      std::vector<ingest::Event> dummy_unif;
      for (const auto& e : dummy_unif_all.events) {
        int r, c;
        spec.grid()->cell_of(e.x, e.y, &r, &c);
        if (tm.houses.at(r, c) > 0) dummy_unif.push_back(e);
      }

      fit::TypeFit fit_tuned;
      try {
        fit_tuned = fit::fit_type(events_k, dummy_tuned.events, spec, k, tm.basis, dummy,
                                  data.weather, t_len);
      } catch (const NumericError&) {
        continue;
      }

      fit::LogisticData data_unif;
      {
        std::vector<double> row;
        const auto& basis = tm.basis;
        size_t n = events_k.size() + dummy_unif.size();
        data_unif.c = Matrix(n, basis.dimension());
        data_unif.label.resize(n);
        data_unif.offset.resize(n);
        data_unif.n_events = events_k.size();
        data_unif.n_dummy = dummy_unif.size();
        size_t i = 0;
        auto add = [&](const ingest::Event& e, int label) {
          int r, c;
          spec.grid()->cell_of(e.x, e.y, &r, &c);
          double h = tm.houses.at(r, c);
          if (h <= 0)
            throw InputError("rho_compare: point in a zero-density cell");
          model::basis_row(basis, e.t, data.weather, &row);
          for (size_t j = 0; j < row.size(); ++j) data_unif.c(i, j) = row[j];
          data_unif.label[i] = label;
          data_unif.offset[i] = std::log(h) - std::log(c_uniform);
          ++i;
        };
        for (const auto& e : events_k) add(e, 1);
        for (const auto& e : dummy_unif) add(e, 0);
      }
      fit::LogisticResult fit_unif = fit::logistic_fit(data_unif);
      if (!fit_tuned.converged || !fit_unif.converged) continue;
      ++converged_reps;
      for (long t = 0; t < days; ++t) {
        day_rate_tuned[t] += model::temporal_intensity(fit_tuned.theta, static_cast<double>(t),
                                                       data.weather, tm.basis);
        day_rate_unif[t] += model::temporal_intensity(fit_unif.theta, static_cast<double>(t),
                                                      data.weather, tm.basis);
      }
    }
    if (converged_reps == 0)
      throw NumericError("rho_compare: no converged replicate for house type " +
                         std::to_string(k));
    double day_sum_diff = 0.0;
    const double mass = tm.houses.integral();
    for (long t = 0; t < days; ++t) {
      day_rate_tuned[t] /= converged_reps;
      day_rate_unif[t] /= converged_reps;
      tuned_series[t] += mass * day_rate_tuned[t];
      uniform_series[t] += mass * day_rate_unif[t];
      day_sum_diff += day_rate_tuned[t] - day_rate_unif[t];
    }
    for (size_t i = 0; i < spatial_diff.values.size(); ++i)
      if (spatial_diff.grid->mask[i])
        spatial_diff.values[i] += tm.houses.values[i] * day_sum_diff;
  }

  geom::write_raster(spatial_diff, out_path(cfg, "rho_compare_spatial.asc"));
  std::ostringstream csv;
  csv << "t,tuned,uniform,diff\n";
  for (long t = 0; t < days; ++t)
    csv << t << ',' << fmt_g17(tuned_series[t]) << ',' << fmt_g17(uniform_series[t]) << ','
        << fmt_g17(tuned_series[t] - uniform_series[t]) << '\n';
  atomic_write(out_path(cfg, "rho_compare_temporal.csv"), csv.str());
  std::printf("rho comparison written over %d replicates per type\n", n_rep);
}

}  // namespace

}  // namespace stpp::run
