#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "geom.hpp"
#include "ingest.hpp"
#include "linalg.hpp"
#include "model.hpp"

namespace stpp::diag {

struct PcfEstimate {
  std::vector<double> lags;  // metres (d=2) or days (d=1), strictly increasing
  std::vector<double> g;
  double bandwidth = 0.0;
  int dim = 2;
};

std::vector<double> default_spatial_lags();   // 250 m steps to 10,000 m
std::vector<double> default_temporal_lags();  // 1 day steps to 100 days

// Translation-corrected kernel estimate of the pair correlation function for
// the spatial (d=2) or temporal (d=1) projection; lambda_at holds the
// projection intensity at each point. Temporal same-day pairs are excluded:
// at daily resolution they swamp every small lag.
PcfEstimate pcf(const ingest::EventPattern& pattern, const std::vector<double>& lambda_at,
                int dim, const std::vector<double>& lags, double bandwidth);

struct KEstimate {
  std::vector<double> r;  // metres
  std::vector<double> v;  // days
  Matrix k;               // K̂(r_i, v_j)
  static double theoretical(double r, double v) { return 2.0 * M_PI * r * r * v; }
};

// Space-time inhomogeneous K with translation correction
// |W ∩ W_Δu|·(t_len − |Δt|); lambda_at holds λ(x) per point in m⁻²·day⁻¹.
KEstimate k_inhom(const ingest::EventPattern& pattern, const std::vector<double>& lambda_at,
                  const std::vector<double>& r_grid, const std::vector<double>& v_grid);

// Separable plug-in estimate λ̂(u,t) = Ŝ(u)·M̂(t)/N from Gaussian kernels;
// integrates to N over the plane × time line.
class SeparableKernelIntensity {
 public:
  SeparableKernelIntensity(const ingest::EventPattern& pattern, double spatial_sigma,
                           double temporal_bandwidth);
  double spatial(double x, double y) const;
  double temporal(double t) const;
  double operator()(double x, double y, double t) const;

 private:
  std::vector<double> xs_, ys_, ts_;
  double sigma_, t_bw_;
};

enum class EnvelopeStatistic { kKFunction, kPcf };

struct EnvelopeParams {
  int n_sim = 99;
  EnvelopeStatistic statistic = EnvelopeStatistic::kKFunction;
  // K is summarized along the diagonal profile (i·dr, i·dv).
  int n_lags = 100;
  double dr = 100.0;   // metres
  double dv = 1.0;     // days
  double pcf_bandwidth = 500.0;
  double kde_sigma = 1000.0;  // plug-in intensity bandwidths
  double kde_t_bw = 10.0;
};

struct Envelope {
  std::vector<double> lag;
  std::vector<double> lo, hi, observed;
  bool inside = false;
};

// Pointwise min/max bounds over n_sim simulations of the fitted model, each
// curve computed with its own kernel plug-in intensity, against the observed
// pattern treated the same way.
Envelope envelope_test(const model::ModelSpec& fitted, const ingest::TemporalCovariates& cov,
                       const ingest::EventPattern& observed, const EnvelopeParams& params,
                       uint64_t seed);

// Smoothed fitted risk minus smoothed observed points, both as Gaussian-blurred
// measures on the grid (m⁻² over the whole period).
geom::RasterField residuals_spatial(const model::ModelSpec& fitted,
                                    const ingest::TemporalCovariates& cov,
                                    const ingest::EventPattern& pattern, double sigma = 1000.0);

struct MonthlyResidual {
  int year = 0, month = 0;
  double predicted = 0.0, observed = 0.0;
  bool complete = true;

  double residual() const { return predicted - observed; }
};

// Predicted minus observed monthly counts on the 365-day calendar
// (February always 28 days); trailing partial months are flagged.
std::vector<MonthlyResidual> residuals_temporal(const model::ModelSpec& fitted,
                                                const ingest::TemporalCovariates& cov,
                                                const ingest::EventPattern& pattern);

std::string pcf_to_csv(const PcfEstimate& est);
std::string k_to_csv(const KEstimate& est);
std::string envelope_to_csv(const Envelope& env);
std::string monthly_residuals_to_csv(const std::vector<MonthlyResidual>& rows);

}  // namespace stpp::diag
