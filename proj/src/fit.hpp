#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ingest.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "sim.hpp"

namespace stpp::fit {

// Dummy process intensity ρ_k(u,t) = r_k·h_k(u)·s(t) with the seasonal factor
// s(t) = 0.5 + 0.25·(sin(2πt/365 + π/2) + 1) peaking at the turn of the year.
struct DummySpec {
  std::vector<double> r{60.0, 20.0, 20.0, 8.0};

  static double seasonal(double t, double period = 365.0);
  double multiplier(int k) const;
  void validate(int n_types) const;
};

double dummy_intensity(const model::ModelSpec& spec, const DummySpec& dummy, int k, double x,
                       double y, double t);

// Poisson realisation of the dummy process for type k.
ingest::EventPattern simulate_dummy(const model::ModelSpec& spec, const DummySpec& dummy, int k,
                                    double t_len, uint64_t seed);

// One observation per point of the mixed (events ∪ dummies) sample. The house
// density cancels between λ and ρ, leaving offset = -log(r_k·s(t)).
struct LogisticData {
  Matrix c;                   // n × m basis rows
  std::vector<int> label;     // 1 = event, 0 = dummy
  std::vector<double> offset;
  size_t n_events = 0, n_dummy = 0;
};

LogisticData build_logistic_data(const std::vector<ingest::Event>& events_k,
                                 const std::vector<ingest::Event>& dummy_k,
                                 const model::ModelSpec& spec, int k, const DummySpec& dummy,
                                 const ingest::TemporalCovariates& cov);

struct LogisticResult {
  std::vector<double> theta;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string message;
  std::vector<double> score;  // estimating-equation value at theta
};

// Newton maximization of the logistic log-likelihood with step halving;
// stops when the gradient ∞-norm drops below tol.
LogisticResult logistic_fit(const LogisticData& data, double tol = 1e-8, int max_iter = 100);

double logistic_loglik(const LogisticData& data, const std::vector<double>& theta);
std::vector<double> logistic_score(const LogisticData& data, const std::vector<double>& theta);

// Plug-in Godambe matrix on the cell×day grid:
// G[p][q] = Σ_cells Σ_days λ·ρ/(λ+ρ)·C_p·C_q·cellarea. The house factor is
// common to λ and ρ, so the cell sum collapses to the total house count;
// day_substeps refines the within-day quadrature.
Matrix godambe(const model::TypeModel& tm, const std::vector<double>& theta, double r_k,
               const ingest::TemporalCovariates& cov, double t_len, int day_substeps = 1);

// Direct double-sum form for arbitrary λ, ρ fields; the reference quadrature.
Matrix godambe_general(const std::vector<double>& cell_areas,
                       const std::vector<std::vector<double>>& lambda,  // [cell][day]
                       const std::vector<std::vector<double>>& rho,
                       const std::vector<std::vector<double>>& c_rows);  // [day][p]

struct Interval {
  double lo = 0.0, hi = 0.0;
};

std::vector<Interval> confidence_intervals(const std::vector<double>& theta, const Matrix& g_inv,
                                           double level);

struct TypeFit {
  int k = 1;
  model::TemporalBasisSpec basis;
  std::vector<double> theta;
  Matrix g, g_inv;
  std::vector<Interval> ci;
  double loglik = 0.0;
  double aic = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string message;
  size_t n_events = 0, n_dummy = 0;
  double r = 0.0;
  double rho_ge_4lambda = 0.0;  // share of cell-days satisfying the rule of thumb

  int dimension() const { return basis.dimension(); }
};

// Fit one house type against a given dummy realisation, then attach Godambe,
// CIs and the ρ ≥ 4λ share. godambe_substeps refines the within-day
// quadrature of the information integral.
TypeFit fit_type(const std::vector<ingest::Event>& events_k,
                 const std::vector<ingest::Event>& dummy_k, const model::ModelSpec& spec, int k,
                 const model::TemporalBasisSpec& basis, const DummySpec& dummy,
                 const ingest::TemporalCovariates& cov, double t_len, double ci_level = 0.95,
                 int godambe_substeps = 1);

// Share of cell-days (h_k > 0) on which ρ_k ≥ 4·λ_θ̂.
double rho_check_fraction(const model::TemporalBasisSpec& basis, const std::vector<double>& theta,
                          double r_k, const ingest::TemporalCovariates& cov, double t_len);

struct GridRanges {
  int o1_lo = 1, o1_hi = 4;
  int o2_lo = 0, o2_hi = 0;  // 0 admits the absent-term candidate
  int o3_lo = 1, o3_hi = 1;
  int o4_lo = 0, o4_hi = 0;
  void validate() const;
  std::vector<model::TemporalBasisSpec> candidates() const;
};

struct CandidateSummary {
  model::TemporalBasisSpec basis;
  double aic = 0.0;
  double loglik = 0.0;
  bool converged = false;
};

struct GridSearchResult {
  TypeFit best;
  std::vector<CandidateSummary> candidates;
  std::vector<std::string> warnings;
};

// Exhaustive AIC = -2ℓ + 2m minimization over the order grid with one shared
// dummy realisation; ties break toward smaller dimension, then lexicographic
// orders.
GridSearchResult grid_search_aic(const std::vector<ingest::Event>& events_k,
                                 const std::vector<ingest::Event>& dummy_k,
                                 const model::ModelSpec& spec, int k, const GridRanges& ranges,
                                 const DummySpec& dummy, const ingest::TemporalCovariates& cov,
                                 double t_len, double ci_level = 0.95,
                                 int godambe_substeps = 1);

struct LrtResult {
  double statistic = 0.0;
  int dof = 0;
  double p = 1.0;
};

// 2(ℓ_full − ℓ_reduced) against the chi-square upper tail; requires the
// reduced basis nested in the full one and fits on the same sample.
LrtResult likelihood_ratio_test(const TypeFit& full, const TypeFit& reduced);

struct DayPrediction {
  double t = 0.0;
  double lambda = 0.0;  // expected regional count for the day
  double lo = 0.0, hi = 0.0;
};

// Delta-method prediction bands on the log scale; the regional total combines
// the independent per-type fits.
std::vector<DayPrediction> predict_total(const std::vector<TypeFit>& fits,
                                         const model::ModelSpec& spec,
                                         const ingest::TemporalCovariates& cov, long t_begin,
                                         long t_end, double level);

// Per-type daily rate with its delta-method band.
DayPrediction predict_type(const TypeFit& fit, const ingest::TemporalCovariates& cov, double t,
                           double level);

// Σ_k h_k(u)·λ̂_k(t) for one day.
geom::RasterField prediction_raster(const std::vector<TypeFit>& fits,
                                    const model::ModelSpec& spec,
                                    const ingest::TemporalCovariates& cov, double t);

std::string fits_to_json(const std::vector<TypeFit>& fits, const model::ModelSpec& spec,
                         double ci_level);
// Returns the fits and fills spec from the referenced rasters.
std::vector<TypeFit> fits_from_json(const std::string& json_text, const std::string& base_dir,
                                    model::ModelSpec* spec);

}  // namespace stpp::fit
