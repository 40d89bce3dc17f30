#include "diag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "error.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "sim.hpp"
#include "text.hpp"

namespace stpp::diag {

namespace {

const double kSqrt2Pi = 2.5066282746310005024157652848110;

// Ordered index pairs within Δx <= xmax via a sweep over x-sorted points; f is
// called once per unordered pair, deterministically in sorted order.
template <typename F>
void for_pairs(const std::vector<ingest::Event>& pts, double dx_max, F&& f) {
  std::vector<size_t> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (pts[a].x != pts[b].x) return pts[a].x < pts[b].x;
    return a < b;
  });
  for (size_t ai = 0; ai < order.size(); ++ai) {
    size_t i = order[ai];
    for (size_t bi = ai + 1; bi < order.size(); ++bi) {
      size_t j = order[bi];
      if (pts[j].x - pts[i].x > dx_max) break;
      f(i, j);
    }
  }
}

void check_lambda(const std::vector<ingest::Event>& pts, const std::vector<double>& lambda_at) {
  if (lambda_at.size() != pts.size())
    throw InputError("pair statistics: one intensity value per point required");
  for (size_t i = 0; i < lambda_at.size(); ++i)
    if (!(lambda_at[i] > 0))
      throw InputError("pair statistics: non-positive intensity at point " + std::to_string(i));
}

}  // namespace

std::vector<double> default_spatial_lags() {
  std::vector<double> lags;
  for (int i = 1; i <= 40; ++i) lags.push_back(250.0 * i);
  return lags;
}

std::vector<double> default_temporal_lags() {
  std::vector<double> lags;
  for (int i = 1; i <= 100; ++i) lags.push_back(static_cast<double>(i));
  return lags;
}

PcfEstimate pcf(const ingest::EventPattern& pattern, const std::vector<double>& lambda_at,
                int dim, const std::vector<double>& lags, double bandwidth) {
  if (dim != 1 && dim != 2) throw InputError("pcf: dim must be 1 (temporal) or 2 (spatial)");
  if (!(bandwidth > 0)) throw InputError("pcf: bandwidth must be > 0");
  if (lags.empty()) throw InputError("pcf: empty lag grid");
  for (size_t i = 0; i < lags.size(); ++i) {
    if (!(lags[i] > 0)) throw InputError("pcf: lags must be > 0 (r = 0 is excluded)");
    if (i && lags[i] <= lags[i - 1]) throw InputError("pcf: lags must be strictly increasing");
  }
  PcfEstimate est;
  est.lags = lags;
  est.g.assign(lags.size(), 0.0);
  est.bandwidth = bandwidth;
  est.dim = dim;
  const auto& pts = pattern.events;
  if (pts.size() < 2) return est;
  check_lambda(pts, lambda_at);

  const double reach = 5.0 * bandwidth;
  const double max_d = lags.back() + reach;
  const double inv_b = 1.0 / bandwidth;
  auto kernel = [&](double u) { return std::exp(-0.5 * u * u * inv_b * inv_b) * inv_b / kSqrt2Pi; };

  if (dim == 2) {
    geom::OverlapTable overlap(pattern.window, max_d);
    for_pairs(pts, max_d, [&](size_t i, size_t j) {
      double dx = pts[j].x - pts[i].x, dy = pts[j].y - pts[i].y;
      double d = std::hypot(dx, dy);
      if (d > max_d) return;
      double w_area = overlap.at(dx, dy);
      if (w_area <= 0) return;
      double base = 2.0 / (lambda_at[i] * lambda_at[j] * w_area);
      for (size_t li = 0; li < lags.size(); ++li) {
        double u = lags[li] - d;
        if (std::fabs(u) > reach) continue;
        est.g[li] += base * kernel(u);
      }
    });
    for (size_t li = 0; li < lags.size(); ++li)
      est.g[li] /= 2.0 * M_PI * lags[li];
  } else {
    const double t_len = pattern.t_len;
    // Sweep over times: reuse the pair walker on a time-as-x view.
    std::vector<ingest::Event> tview = pts;
    for (auto& e : tview) e.x = e.t;
    for_pairs(tview, max_d, [&](size_t i, size_t j) {
      double d = std::fabs(tview[j].x - tview[i].x);
      if (d == 0.0) return;  // same-day pairs excluded at daily resolution
      if (d > max_d) return;
      double w_t = t_len - d;
      if (w_t <= 0) return;
      double base = 2.0 / (lambda_at[i] * lambda_at[j] * w_t);
      for (size_t li = 0; li < lags.size(); ++li) {
        double u = lags[li] - d;
        if (std::fabs(u) > reach) continue;
        est.g[li] += base * kernel(u);
      }
    });
    for (size_t li = 0; li < lags.size(); ++li) est.g[li] /= 2.0;
  }
  return est;
}

KEstimate k_inhom(const ingest::EventPattern& pattern, const std::vector<double>& lambda_at,
                  const std::vector<double>& r_grid, const std::vector<double>& v_grid) {
  if (r_grid.empty() || v_grid.empty()) throw InputError("k_inhom: empty lag grids");
  for (size_t i = 1; i < r_grid.size(); ++i)
    if (r_grid[i] <= r_grid[i - 1]) throw InputError("k_inhom: r grid must increase");
  for (size_t i = 1; i < v_grid.size(); ++i)
    if (v_grid[i] <= v_grid[i - 1]) throw InputError("k_inhom: v grid must increase");
  KEstimate est;
  est.r = r_grid;
  est.v = v_grid;
  est.k = Matrix(r_grid.size(), v_grid.size());
  const auto& pts = pattern.events;
  if (pts.size() < 2) return est;
  check_lambda(pts, lambda_at);

  const double r_max = r_grid.back();
  const double v_max = v_grid.back();
  const double t_len = pattern.t_len;
  geom::OverlapTable overlap(pattern.window, r_max);

  // Bin pair weights at their (r, v) cell, then accumulate cumulatively.
  Matrix bins(r_grid.size(), v_grid.size());
  for_pairs(pts, r_max, [&](size_t i, size_t j) {
    double dx = pts[j].x - pts[i].x, dy = pts[j].y - pts[i].y;
    double du = std::hypot(dx, dy);
    if (du > r_max) return;
    double dt = std::fabs(pts[j].t - pts[i].t);
    if (dt > v_max) return;
    double vol = overlap.at(dx, dy) * (t_len - dt);
    if (vol <= 0) return;
    size_t ri = static_cast<size_t>(std::lower_bound(r_grid.begin(), r_grid.end(), du) -
                                    r_grid.begin());
    size_t vi = static_cast<size_t>(std::lower_bound(v_grid.begin(), v_grid.end(), dt) -
                                    v_grid.begin());
    if (ri >= r_grid.size() || vi >= v_grid.size()) return;
    bins(ri, vi) += 2.0 / (lambda_at[i] * lambda_at[j] * vol);
  });
  for (size_t ri = 0; ri < r_grid.size(); ++ri)
    for (size_t vi = 0; vi < v_grid.size(); ++vi) {
      double c = bins(ri, vi);
      if (ri > 0) c += est.k(ri - 1, vi);
      if (vi > 0) c += est.k(ri, vi - 1);
      if (ri > 0 && vi > 0) c -= est.k(ri - 1, vi - 1);
      est.k(ri, vi) = c;
    }
  return est;
}

SeparableKernelIntensity::SeparableKernelIntensity(const ingest::EventPattern& pattern,
                                                   double spatial_sigma,
                                                   double temporal_bandwidth)
    : sigma_(spatial_sigma), t_bw_(temporal_bandwidth) {
  if (pattern.events.empty())
    throw InputError("kernel intensity estimate: empty pattern");
  if (!(spatial_sigma > 0) || !(temporal_bandwidth > 0))
    throw InputError("kernel intensity estimate: bandwidths must be > 0");
  for (const auto& e : pattern.events) {
    xs_.push_back(e.x);
    ys_.push_back(e.y);
    ts_.push_back(e.t);
  }
}

double SeparableKernelIntensity::spatial(double x, double y) const {
  const double inv2s2 = 1.0 / (2.0 * sigma_ * sigma_);
  const double norm = 1.0 / (2.0 * M_PI * sigma_ * sigma_);
  double s = 0.0;
  for (size_t i = 0; i < xs_.size(); ++i) {
    double dx = x - xs_[i], dy = y - ys_[i];
    s += std::exp(-(dx * dx + dy * dy) * inv2s2);
  }
  return s * norm;
}

double SeparableKernelIntensity::temporal(double t) const {
  const double inv2b2 = 1.0 / (2.0 * t_bw_ * t_bw_);
  const double norm = 1.0 / (t_bw_ * kSqrt2Pi);
  double s = 0.0;
  for (double ti : ts_) {
    double dt = t - ti;
    s += std::exp(-dt * dt * inv2b2);
  }
  return s * norm;
}

double SeparableKernelIntensity::operator()(double x, double y, double t) const {
  return spatial(x, y) * temporal(t) / static_cast<double>(xs_.size());
}

namespace {

// Diagonal K profile or spatial pcf of one pattern with its own plug-in
// kernel intensity.
std::vector<double> envelope_statistic(const ingest::EventPattern& pattern,
                                       const EnvelopeParams& params) {
  const size_t n_lags = static_cast<size_t>(params.n_lags);
  if (pattern.events.size() < 2) return std::vector<double>(n_lags, 0.0);
  SeparableKernelIntensity kde(pattern, params.kde_sigma, params.kde_t_bw);
  if (params.statistic == EnvelopeStatistic::kKFunction) {
    std::vector<double> lambda_at(pattern.events.size());
    for (size_t i = 0; i < pattern.events.size(); ++i) {
      const auto& e = pattern.events[i];
      lambda_at[i] = kde(e.x, e.y, e.t);
    }
    std::vector<double> r_grid(n_lags), v_grid(n_lags);
    for (size_t i = 0; i < n_lags; ++i) {
      r_grid[i] = params.dr * (i + 1);
      v_grid[i] = params.dv * (i + 1);
    }
    KEstimate k = k_inhom(pattern, lambda_at, r_grid, v_grid);
    std::vector<double> diag_profile(n_lags);
    for (size_t i = 0; i < n_lags; ++i) diag_profile[i] = k.k(i, i);
    return diag_profile;
  }
  std::vector<double> lambda_sp(pattern.events.size());
  for (size_t i = 0; i < pattern.events.size(); ++i)
    lambda_sp[i] = kde.spatial(pattern.events[i].x, pattern.events[i].y);
  std::vector<double> lags(n_lags);
  for (size_t i = 0; i < n_lags; ++i) lags[i] = params.dr * (i + 1);
  return pcf(pattern, lambda_sp, 2, lags, params.pcf_bandwidth).g;
}

}  // namespace

Envelope envelope_test(const model::ModelSpec& fitted, const ingest::TemporalCovariates& cov,
                       const ingest::EventPattern& observed, const EnvelopeParams& params,
                       uint64_t seed) {
  if (params.n_sim < 1) throw InputError("envelope: n_sim must be >= 1");
  if (params.n_lags < 1) throw InputError("envelope: need at least one lag");
  Envelope env;
  env.lag.resize(params.n_lags);
  for (int i = 0; i < params.n_lags; ++i) env.lag[i] = params.dr * (i + 1);
  env.observed = envelope_statistic(observed, params);

  std::vector<std::vector<double>> curves(params.n_sim);
  parallel_for(params.n_sim, [&](size_t s) {
    auto pattern = sim::simulate_model(fitted, cov, observed.t_len, Rng::derive(seed, 1000 + s));
    curves[s] = envelope_statistic(pattern, params);
  });
  env.lo.assign(params.n_lags, std::numeric_limits<double>::infinity());
  env.hi.assign(params.n_lags, -std::numeric_limits<double>::infinity());
  for (const auto& curve : curves)
    for (int i = 0; i < params.n_lags; ++i) {
      env.lo[i] = std::min(env.lo[i], curve[i]);
      env.hi[i] = std::max(env.hi[i], curve[i]);
    }
  env.inside = true;
  for (int i = 0; i < params.n_lags; ++i)
    if (env.observed[i] < env.lo[i] || env.observed[i] > env.hi[i]) env.inside = false;
  return env;
}

geom::RasterField residuals_spatial(const model::ModelSpec& fitted,
                                    const ingest::TemporalCovariates& cov,
                                    const ingest::EventPattern& pattern, double sigma) {
  fitted.validate();
  if (!fitted.grid()->same_geometry(*pattern.window))
    throw InputError("spatial residuals: pattern window differs from the model grid");
  // Expected count per cell over the whole period, smoothed as a measure.
  geom::RasterField expected(fitted.grid());
  const long days = static_cast<long>(std::ceil(pattern.t_len));
  for (const auto& tm : fitted.types) {
    double day_sum = 0.0;
    for (long t = 0; t < days; ++t)
      day_sum += model::temporal_intensity(tm.theta, static_cast<double>(t), cov, tm.basis);
    const double ca = fitted.grid()->cell_area();
    for (size_t i = 0; i < expected.values.size(); ++i)
      if (expected.grid->mask[i]) expected.values[i] += tm.houses.values[i] * ca * day_sum;
  }
  geom::RasterField model_field = geom::smooth_areal(expected, sigma);

  std::vector<geom::WeightedPoint> pts;
  pts.reserve(pattern.events.size());
  for (const auto& e : pattern.events) pts.push_back({e.x, e.y, 1.0});
  geom::RasterField data_field = geom::smooth_points(pts, pattern.window, sigma);

  geom::RasterField out(fitted.grid());
  for (size_t i = 0; i < out.values.size(); ++i)
    if (out.grid->mask[i]) out.values[i] = model_field.values[i] - data_field.values[i];
  return out;
}

std::vector<MonthlyResidual> residuals_temporal(const model::ModelSpec& fitted,
                                                const ingest::TemporalCovariates& cov,
                                                const ingest::EventPattern& pattern) {
  fitted.validate();
  const long days = static_cast<long>(std::ceil(pattern.t_len));
  if (days > static_cast<long>(cov.size()))
    throw InputError("temporal residuals: weather shorter than the pattern period");
  ingest::Date start = cov.start_date.value_or(ingest::Date{1, 1, 1});

  std::vector<double> mass(fitted.types.size());
  for (size_t i = 0; i < fitted.types.size(); ++i) mass[i] = fitted.types[i].houses.integral();

  std::vector<double> observed(days, 0.0);
  for (const auto& e : pattern.events) observed[static_cast<long>(std::floor(e.t))] += 1.0;

  std::vector<MonthlyResidual> rows;
  std::vector<long> month_days;
  for (long t = 0; t < days; ++t) {
    ingest::Date d = ingest::add_days_365(start, t);
    if (rows.empty() || rows.back().year != d.year || rows.back().month != d.month) {
      rows.push_back({d.year, d.month, 0.0, 0.0, true});
      month_days.push_back(0);
      if (d.day != 1) rows.back().complete = false;  // leading partial month
    }
    double pred = 0.0;
    for (size_t i = 0; i < fitted.types.size(); ++i)
      pred += mass[i] * model::temporal_intensity(fitted.types[i].theta, static_cast<double>(t),
                                                  cov, fitted.types[i].basis);
    rows.back().predicted += pred;
    rows.back().observed += observed[t];
    ++month_days.back();
  }
  static const int kMonthDays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  for (size_t i = 0; i < rows.size(); ++i)
    if (month_days[i] != kMonthDays[rows[i].month - 1]) rows[i].complete = false;
  return rows;
}

std::string pcf_to_csv(const PcfEstimate& est) {
  std::ostringstream out;
  out << "lag,value\n";
  for (size_t i = 0; i < est.lags.size(); ++i)
    out << fmt_g17(est.lags[i]) << ',' << fmt_g17(est.g[i]) << '\n';
  return out.str();
}

std::string k_to_csv(const KEstimate& est) {
  std::ostringstream out;
  out << "r,v,value\n";
  for (size_t i = 0; i < est.r.size(); ++i)
    for (size_t j = 0; j < est.v.size(); ++j)
      out << fmt_g17(est.r[i]) << ',' << fmt_g17(est.v[j]) << ',' << fmt_g17(est.k(i, j)) << '\n';
  return out.str();
}

std::string envelope_to_csv(const Envelope& env) {
  std::ostringstream out;
  out << "lag,lo,hi,observed\n";
  for (size_t i = 0; i < env.lag.size(); ++i)
    out << fmt_g17(env.lag[i]) << ',' << fmt_g17(env.lo[i]) << ',' << fmt_g17(env.hi[i]) << ','
        << fmt_g17(env.observed[i]) << '\n';
  return out.str();
}

std::string monthly_residuals_to_csv(const std::vector<MonthlyResidual>& rows) {
  std::ostringstream out;
  out << "year,month,predicted,observed,residual,complete\n";
  for (const auto& r : rows)
    out << r.year << ',' << r.month << ',' << fmt_g17(r.predicted) << ',' << fmt_g17(r.observed)
        << ',' << fmt_g17(r.residual()) << ',' << (r.complete ? 1 : 0) << '\n';
  return out.str();
}

}  // namespace stpp::diag
