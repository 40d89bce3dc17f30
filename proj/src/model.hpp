#pragma once

#include <string>
#include <vector>

#include "geom.hpp"
#include "ingest.hpp"

namespace stpp::model {

// Orders of the log-linear temporal basis: harmonics of the 365-day year plus
// polynomials in wind speed, wind chill and their product. An order of 0 (or a
// cleared include flag) removes the block.
struct TemporalBasisSpec {
  int o1 = 1;  // harmonic order, 1..4
  int o2 = 0;  // wind-speed polynomial order, 0..5
  int o3 = 1;  // wind-chill polynomial order, 0..5
  int o4 = 0;  // speed·chill interaction polynomial order, 0..5
  bool include_speed = false;
  bool include_interaction = false;
  double period = 365.0;

  int dimension() const {
    return 1 + 2 * o1 + (include_speed ? o2 : 0) + o3 + (include_interaction ? o4 : 0);
  }
  void validate() const;
  std::vector<std::string> term_names() const;

  // True when every term of this basis appears in `full`.
  bool nested_in(const TemporalBasisSpec& full) const;

  bool operator==(const TemporalBasisSpec&) const = default;
};

TemporalBasisSpec make_basis(int o1, int o2, int o3, int o4);

// Covariate row C(t): intercept, cos/sin pairs, then the polynomial blocks.
// Daily covariates are read at day floor(t); the harmonic angle uses t itself.
void basis_row(const TemporalBasisSpec& spec, double t, const ingest::TemporalCovariates& cov,
               std::vector<double>* out);

// exp(θ·C(t)), the per-house daily rate.
double temporal_intensity(const std::vector<double>& theta, double t,
                          const ingest::TemporalCovariates& cov, const TemporalBasisSpec& spec);

struct TypeModel {
  TemporalBasisSpec basis;
  geom::RasterField houses;     // houses·m⁻²
  std::string raster_path;      // provenance for serialization
  std::vector<double> theta;    // empty until fitted / set
};

struct ModelSpec {
  std::vector<TypeModel> types;

  const geom::GridPtr& grid() const;
  int n_types() const { return static_cast<int>(types.size()); }
  void validate() const;

  // Σ value·cellarea of h_k: the total house count of a type.
  double house_total(int k) const;
};

// λ(u,t) = Σ_k h_k(u)·exp(θ_k·C(t)). Zero where every h_k vanishes; requires
// u inside the window.
double intensity(const ModelSpec& spec, double x, double y, double t,
                 const ingest::TemporalCovariates& cov);

// Per-type λ_k(u,t).
double intensity_type(const ModelSpec& spec, int k, double x, double y, double t,
                      const ingest::TemporalCovariates& cov);

// JSON round trip: orders, flags, coefficients and raster file references.
std::string model_to_json(const ModelSpec& spec);
ModelSpec model_from_json(const std::string& json_text, const std::string& base_dir);

}  // namespace stpp::model
