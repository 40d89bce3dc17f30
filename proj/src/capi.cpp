#include "stpp/stpp.h"

#include <cstring>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "commands.hpp"
#include "error.hpp"
#include "fit.hpp"
#include "geom.hpp"
#include "ingest.hpp"
#include "io.hpp"
#include "model.hpp"

namespace {

thread_local std::string g_last_error;

template <typename F>
int guarded(F&& f) {
  try {
    f();
    return STPP_OK;
  } catch (const stpp::InputError& e) {
    g_last_error = e.what();
    return STPP_ERR_INPUT;
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return STPP_ERR_INPUT;
  } catch (const stpp::NumericError& e) {
    g_last_error = e.what();
    return STPP_ERR_NUMERIC;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return STPP_ERR_NUMERIC;
  }
}

int require_arg(bool ok, const char* what) {
  if (ok) return STPP_OK;
  g_last_error = std::string("null or invalid argument: ") + what;
  return STPP_ERR_INPUT;
}

}  // namespace

struct stpp_raster {
  stpp::geom::RasterField field;
};

struct stpp_pattern {
  stpp::ingest::EventPattern pattern;
};

struct stpp_model {
  stpp::model::ModelSpec spec;
  stpp::ingest::TemporalCovariates weather;
  bool has_weather = false;
};

extern "C" {

const char* stpp_version(void) { return "0.1.0"; }

const char* stpp_last_error(void) { return g_last_error.c_str(); }

int stpp_raster_create(int ncols, int nrows, double xllcorner, double yllcorner,
                       double cellsize, const double* values, const unsigned char* mask,
                       stpp_raster** out) {
  if (int rc = require_arg(out != nullptr, "out")) return rc;
  return guarded([&] {
    auto g = std::make_shared<stpp::geom::SpatialGrid>();
    g->ncols = ncols;
    g->nrows = nrows;
    g->xll = xllcorner;
    g->yll = yllcorner;
    g->cellsize = cellsize;
    size_t n = static_cast<size_t>(ncols > 0 ? ncols : 0) * (nrows > 0 ? nrows : 0);
    g->mask.assign(n, 1);
    if (mask)
      for (size_t i = 0; i < n; ++i) g->mask[i] = mask[i] ? 1 : 0;
    g->validate();
    auto r = new stpp_raster;
    r->field = stpp::geom::RasterField(stpp::geom::GridPtr(g));
    if (values)
      for (size_t i = 0; i < n; ++i) r->field.values[i] = g->mask[i] ? values[i] : 0.0;
    try {
      r->field.validate(false);
    } catch (...) {
      delete r;
      throw;
    }
    *out = r;
  });
}

int stpp_raster_read(const char* path, stpp_raster** out) {
  if (int rc = require_arg(path && out, "path/out")) return rc;
  return guarded([&] {
    auto r = new stpp_raster;
    try {
      r->field = stpp::geom::read_raster(path);
    } catch (...) {
      delete r;
      throw;
    }
    *out = r;
  });
}

int stpp_raster_write(const stpp_raster* raster, const char* path) {
  if (int rc = require_arg(raster && path, "raster/path")) return rc;
  return guarded([&] { stpp::geom::write_raster(raster->field, path); });
}

void stpp_raster_free(stpp_raster* raster) { delete raster; }

int stpp_raster_dims(const stpp_raster* raster, int* ncols, int* nrows, double* xllcorner,
                     double* yllcorner, double* cellsize) {
  if (int rc = require_arg(raster != nullptr, "raster")) return rc;
  const auto& g = *raster->field.grid;
  if (ncols) *ncols = g.ncols;
  if (nrows) *nrows = g.nrows;
  if (xllcorner) *xllcorner = g.xll;
  if (yllcorner) *yllcorner = g.yll;
  if (cellsize) *cellsize = g.cellsize;
  return STPP_OK;
}

int stpp_raster_values(const stpp_raster* raster, double* buf, size_t buflen) {
  if (int rc = require_arg(raster && buf, "raster/buf")) return rc;
  const auto& v = raster->field.values;
  if (int rc = require_arg(buflen >= v.size(), "buffer too small")) return rc;
  std::memcpy(buf, v.data(), v.size() * sizeof(double));
  return STPP_OK;
}

int stpp_raster_mask(const stpp_raster* raster, unsigned char* buf, size_t buflen) {
  if (int rc = require_arg(raster && buf, "raster/buf")) return rc;
  const auto& m = raster->field.grid->mask;
  if (int rc = require_arg(buflen >= m.size(), "buffer too small")) return rc;
  std::memcpy(buf, m.data(), m.size());
  return STPP_OK;
}

int stpp_smooth_points(const stpp_raster* grid_like, const double* xyw, size_t n, double sigma,
                       stpp_raster** out) {
  if (int rc = require_arg(grid_like && out && (n == 0 || xyw), "grid/out/points")) return rc;
  return guarded([&] {
    std::vector<stpp::geom::WeightedPoint> pts(n);
    for (size_t i = 0; i < n; ++i) pts[i] = {xyw[3 * i], xyw[3 * i + 1], xyw[3 * i + 2]};
    auto r = new stpp_raster;
    try {
      r->field = stpp::geom::smooth_points(pts, grid_like->field.grid, sigma);
    } catch (...) {
      delete r;
      throw;
    }
    *out = r;
  });
}

int stpp_smooth_areal(const stpp_raster* box_totals, double sigma, stpp_raster** out) {
  if (int rc = require_arg(box_totals && out, "raster/out")) return rc;
  return guarded([&] {
    auto r = new stpp_raster;
    try {
      r->field = stpp::geom::smooth_areal(box_totals->field, sigma);
    } catch (...) {
      delete r;
      throw;
    }
    *out = r;
  });
}

int stpp_translation_overlap(const stpp_raster* grid_like, double dx, double dy, double* area) {
  if (int rc = require_arg(grid_like && area, "grid/area")) return rc;
  return guarded(
      [&] { *area = stpp::geom::translation_overlap(*grid_like->field.grid, dx, dy); });
}

int stpp_pattern_read(const char* path, const stpp_raster* window, double t_len,
                      const char* start_date, stpp_pattern** out) {
  if (int rc = require_arg(path && window && out, "path/window/out")) return rc;
  return guarded([&] {
    std::optional<stpp::ingest::Date> start;
    if (start_date) start = stpp::ingest::parse_date(start_date);
    auto p = new stpp_pattern;
    try {
      p->pattern = stpp::ingest::parse_events(path, window->field.grid, t_len, start);
    } catch (...) {
      delete p;
      throw;
    }
    *out = p;
  });
}

int stpp_pattern_write(const stpp_pattern* pattern, const char* path) {
  if (int rc = require_arg(pattern && path, "pattern/path")) return rc;
  return guarded([&] { stpp::ingest::write_events(pattern->pattern, path); });
}

void stpp_pattern_free(stpp_pattern* pattern) { delete pattern; }

int stpp_pattern_size(const stpp_pattern* pattern, size_t* n) {
  if (int rc = require_arg(pattern && n, "pattern/n")) return rc;
  *n = pattern->pattern.events.size();
  return STPP_OK;
}

int stpp_pattern_get(const stpp_pattern* pattern, size_t i, double* x, double* y, double* t,
                     int* k) {
  if (int rc = require_arg(pattern != nullptr, "pattern")) return rc;
  if (int rc = require_arg(i < pattern->pattern.events.size(), "index")) return rc;
  const auto& e = pattern->pattern.events[i];
  if (x) *x = e.x;
  if (y) *y = e.y;
  if (t) *t = e.t;
  if (k) *k = e.k;
  return STPP_OK;
}

int stpp_model_load(const char* json_path, stpp_model** out) {
  if (int rc = require_arg(json_path && out, "path/out")) return rc;
  return guarded([&] {
    auto m = new stpp_model;
    try {
      std::string base = std::filesystem::path(json_path).parent_path().string();
      std::string text = stpp::read_file(json_path);
      nlohmann::json j = nlohmann::json::parse(text);
      if (j.contains("ci_level")) {
        stpp::fit::fits_from_json(text, base, &m->spec);
      } else {
        m->spec = stpp::model::model_from_json(text, base);
      }
    } catch (...) {
      delete m;
      throw;
    }
    *out = m;
  });
}

void stpp_model_free(stpp_model* model) { delete model; }

int stpp_model_set_weather(stpp_model* model, const char* weather_csv) {
  if (int rc = require_arg(model && weather_csv, "model/weather")) return rc;
  return guarded([&] {
    model->weather = stpp::ingest::read_weather(weather_csv);
    model->has_weather = true;
  });
}

int stpp_model_n_types(const stpp_model* model, int* n) {
  if (int rc = require_arg(model && n, "model/n")) return rc;
  *n = model->spec.n_types();
  return STPP_OK;
}

int stpp_model_temporal(const stpp_model* model, int k, double t, double* out) {
  if (int rc = require_arg(model && out, "model/out")) return rc;
  if (int rc = require_arg(model->has_weather, "weather not set")) return rc;
  if (int rc = require_arg(k >= 1 && k <= model->spec.n_types(), "house type")) return rc;
  return guarded([&] {
    const auto& tm = model->spec.types[k - 1];
    *out = stpp::model::temporal_intensity(tm.theta, t, model->weather, tm.basis);
  });
}

int stpp_model_intensity(const stpp_model* model, double x, double y, double t, double* out) {
  if (int rc = require_arg(model && out, "model/out")) return rc;
  if (int rc = require_arg(model->has_weather, "weather not set")) return rc;
  return guarded([&] { *out = stpp::model::intensity(model->spec, x, y, t, model->weather); });
}

int stpp_cmd_importance(const char* config_json) {
  if (int rc = require_arg(config_json != nullptr, "config")) return rc;
  return guarded([&] { stpp::run::cmd_importance(config_json); });
}

int stpp_cmd_fit(const char* config_json) {
  if (int rc = require_arg(config_json != nullptr, "config")) return rc;
  return guarded([&] { stpp::run::cmd_fit(config_json); });
}

int stpp_cmd_predict(const char* config_json) {
  if (int rc = require_arg(config_json != nullptr, "config")) return rc;
  return guarded([&] { stpp::run::cmd_predict(config_json); });
}

int stpp_cmd_diagnose(const char* config_json) {
  if (int rc = require_arg(config_json != nullptr, "config")) return rc;
  return guarded([&] { stpp::run::cmd_diagnose(config_json); });
}

int stpp_cmd_simulate(const char* config_json) {
  if (int rc = require_arg(config_json != nullptr, "config")) return rc;
  return guarded([&] { stpp::run::cmd_simulate(config_json); });
}

}  // extern "C"
