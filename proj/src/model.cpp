#include "model.hpp"

#include <cmath>
#include <filesystem>

#include <json.hpp>

#include "error.hpp"
#include "linalg.hpp"

namespace stpp::model {

void TemporalBasisSpec::validate() const {
  if (o1 < 1 || o1 > 4) throw InputError("basis: o1 must be in 1..4");
  if (o2 < 0 || o2 > 5 || o3 < 0 || o3 > 5 || o4 < 0 || o4 > 5)
    throw InputError("basis: polynomial orders must be in 0..5");
  if (include_speed != (o2 > 0))
    throw InputError("basis: include_speed inconsistent with o2");
  if (include_interaction != (o4 > 0))
    throw InputError("basis: include_interaction inconsistent with o4");
  if (!(period > 0)) throw InputError("basis: period must be > 0");
}

std::vector<std::string> TemporalBasisSpec::term_names() const {
  std::vector<std::string> names{"intercept"};
  for (int j = 1; j <= o1; ++j) {
    names.push_back("cos" + std::to_string(j));
    names.push_back("sin" + std::to_string(j));
  }
  if (include_speed)
    for (int p = 1; p <= o2; ++p) names.push_back("speed^" + std::to_string(p));
  for (int p = 1; p <= o3; ++p) names.push_back("chill^" + std::to_string(p));
  if (include_interaction)
    for (int p = 1; p <= o4; ++p) names.push_back("speed_chill^" + std::to_string(p));
  return names;
}

bool TemporalBasisSpec::nested_in(const TemporalBasisSpec& full) const {
  return o1 <= full.o1 && o2 <= full.o2 && o3 <= full.o3 && o4 <= full.o4 &&
         (!include_speed || full.include_speed) &&
         (!include_interaction || full.include_interaction) && period == full.period;
}

TemporalBasisSpec make_basis(int o1, int o2, int o3, int o4) {
  TemporalBasisSpec b;
  b.o1 = o1;
  b.o2 = o2;
  b.o3 = o3;
  b.o4 = o4;
  b.include_speed = o2 > 0;
  b.include_interaction = o4 > 0;
  b.validate();
  return b;
}

void basis_row(const TemporalBasisSpec& spec, double t, const ingest::TemporalCovariates& cov,
               std::vector<double>* out) {
  long day = static_cast<long>(std::floor(t));
  if (day < 0 || day >= static_cast<long>(cov.size()))
    throw InputError("basis_row: day " + std::to_string(day) + " outside covariate range [0, " +
                     std::to_string(cov.size()) + ")");
  out->clear();
  out->reserve(spec.dimension());
  out->push_back(1.0);
  const double w = 2.0 * M_PI / spec.period;
  for (int j = 1; j <= spec.o1; ++j) {
    out->push_back(std::cos(w * j * t));
    out->push_back(std::sin(w * j * t));
  }
  const double v1 = cov.wind_speed[day];
  const double v3 = cov.wind_chill[day];
  if (spec.include_speed) {
    double p = 1.0;
    for (int j = 1; j <= spec.o2; ++j) out->push_back(p *= v1);
  }
  {
    double p = 1.0;
    for (int j = 1; j <= spec.o3; ++j) out->push_back(p *= v3);
  }
  if (spec.include_interaction) {
    double p = 1.0;
    const double v13 = v1 * v3;
    for (int j = 1; j <= spec.o4; ++j) out->push_back(p *= v13);
  }
}

double temporal_intensity(const std::vector<double>& theta, double t,
                          const ingest::TemporalCovariates& cov, const TemporalBasisSpec& spec) {
  if (static_cast<int>(theta.size()) != spec.dimension())
    throw InputError("temporal_intensity: theta length " + std::to_string(theta.size()) +
                     " does not match basis dimension " + std::to_string(spec.dimension()));
  std::vector<double> c;
  basis_row(spec, t, cov, &c);
  return std::exp(dot(theta, c));
}

const geom::GridPtr& ModelSpec::grid() const {
  if (types.empty()) throw InputError("model: no house types");
  return types[0].houses.grid;
}

void ModelSpec::validate() const {
  if (types.empty()) throw InputError("model: no house types");
  if (types.size() > 4) throw InputError("model: at most 4 house types");
  for (const auto& tm : types) {
    tm.basis.validate();
    tm.houses.validate(true);
    if (!tm.houses.grid->same_geometry(*types[0].houses.grid))
      throw InputError("model: house rasters do not share one grid");
    if (!tm.theta.empty() && static_cast<int>(tm.theta.size()) != tm.basis.dimension())
      throw InputError("model: theta length does not match basis dimension");
  }
}

double ModelSpec::house_total(int k) const { return types.at(k - 1).houses.integral(); }

double intensity_type(const ModelSpec& spec, int k, double x, double y, double t,
                      const ingest::TemporalCovariates& cov) {
  const auto& tm = spec.types.at(k - 1);
  const auto& g = *tm.houses.grid;
  int r, c;
  if (!g.cell_of(x, y, &r, &c) || !g.in(r, c))
    throw InputError("intensity: location outside the window");
  double h = tm.houses.at(r, c);
  if (h == 0.0) return 0.0;
  return h * temporal_intensity(tm.theta, t, cov, tm.basis);
}

double intensity(const ModelSpec& spec, double x, double y, double t,
                 const ingest::TemporalCovariates& cov) {
  double s = 0.0;
  for (int k = 1; k <= spec.n_types(); ++k) s += intensity_type(spec, k, x, y, t, cov);
  return s;
}

std::string model_to_json(const ModelSpec& spec) {
  nlohmann::json j;
  j["types"] = nlohmann::json::array();
  for (const auto& tm : spec.types) {
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
    j["types"].push_back(t);
  }
  return j.dump(2) + "\n";
}

ModelSpec model_from_json(const std::string& json_text, const std::string& base_dir) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  ModelSpec spec;
  for (const auto& t : j.at("types")) {
    TypeModel tm;
    const auto& b = t.at("basis");
    tm.basis.o1 = b.at("o1").get<int>();
    tm.basis.o2 = b.at("o2").get<int>();
    tm.basis.o3 = b.at("o3").get<int>();
    tm.basis.o4 = b.at("o4").get<int>();
    tm.basis.include_speed = b.at("include_speed").get<bool>();
    tm.basis.include_interaction = b.at("include_interaction").get<bool>();
    tm.basis.period = b.value("period", 365.0);
    tm.raster_path = t.at("raster").get<std::string>();
    std::filesystem::path p(tm.raster_path);
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    tm.houses = geom::read_raster(p.string());
    if (t.contains("theta")) tm.theta = t.at("theta").get<std::vector<double>>();
    spec.types.push_back(std::move(tm));
  }
  spec.validate();
  return spec;
}

}  // namespace stpp::model
