#include "fit.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "error.hpp"
#include "parallel.hpp"
#include "stats.hpp"
#include "text.hpp"

namespace stpp::fit {

double DummySpec::seasonal(double t, double period) {
  return 0.5 + 0.25 * (std::sin(2.0 * M_PI * t / period + M_PI / 2.0) + 1.0);
}

double DummySpec::multiplier(int k) const {
  if (k < 1 || k > static_cast<int>(r.size()))
    throw InputError("dummy: no multiplier for type " + std::to_string(k));
  return r[k - 1];
}

void DummySpec::validate(int n_types) const {
  if (static_cast<int>(r.size()) < n_types)
    throw InputError("dummy: need a multiplier per house type");
  for (double v : r)
    if (!(v > 0)) throw InputError("dummy: multipliers must be > 0");
}

double dummy_intensity(const model::ModelSpec& spec, const DummySpec& dummy, int k, double x,
                       double y, double t) {
  const auto& tm = spec.types.at(k - 1);
  int r, c;
  if (!tm.houses.grid->cell_of(x, y, &r, &c)) return 0.0;
  return dummy.multiplier(k) * tm.houses.at(r, c) *
         DummySpec::seasonal(t, tm.basis.period);
}

ingest::EventPattern simulate_dummy(const model::ModelSpec& spec, const DummySpec& dummy, int k,
                                    double t_len, uint64_t seed) {
  const auto& tm = spec.types.at(k - 1);
  const double r_k = dummy.multiplier(k);
  const double period = tm.basis.period;
  auto intensity = [&](double x, double y, double t) {
    int r, c;
    tm.houses.grid->cell_of(x, y, &r, &c);
    return r_k * tm.houses.at(r, c) * DummySpec::seasonal(t, period);
  };
  return sim::simulate_poisson(intensity, tm.houses.grid, t_len, seed, k);
}

LogisticData build_logistic_data(const std::vector<ingest::Event>& events_k,
                                 const std::vector<ingest::Event>& dummy_k,
                                 const model::ModelSpec& spec, int k, const DummySpec& dummy,
                                 const ingest::TemporalCovariates& cov) {
  const auto& tm = spec.types.at(k - 1);
  const double r_k = dummy.multiplier(k);
  const size_t n = events_k.size() + dummy_k.size();
  LogisticData data;
  data.c = Matrix(n, tm.basis.dimension());
  data.label.resize(n);
  data.offset.resize(n);
  data.n_events = events_k.size();
  data.n_dummy = dummy_k.size();

  std::vector<double> row;
  size_t i = 0;
  auto add = [&](const ingest::Event& e, int label) {
    int r, c;
    if (!tm.houses.grid->cell_of(e.x, e.y, &r, &c) || !tm.houses.grid->in(r, c))
      throw InputError("logistic data: point outside window at index " + std::to_string(i));
    if (tm.houses.at(r, c) <= 0.0)
      throw InputError("logistic data: point in a cell with zero house density (type " +
                       std::to_string(k) + ", x=" + fmt_g17(e.x) + ", y=" + fmt_g17(e.y) + ")");
    model::basis_row(tm.basis, e.t, cov, &row);
    for (size_t j = 0; j < row.size(); ++j) data.c(i, j) = row[j];
    data.label[i] = label;
    data.offset[i] = -std::log(r_k * DummySpec::seasonal(e.t, tm.basis.period));
    ++i;
  };
  for (const auto& e : events_k) add(e, 1);
  for (const auto& e : dummy_k) add(e, 0);
  return data;
}

namespace {

inline double log_sigmoid(double z) {
  return z > 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

}  // namespace

double logistic_loglik(const LogisticData& data, const std::vector<double>& theta) {
  const size_t n = data.label.size();
  const size_t m = data.c.cols();
  double ll = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double z = data.offset[i];
    for (size_t j = 0; j < m; ++j) z += theta[j] * data.c(i, j);
    ll += data.label[i] ? log_sigmoid(z) : log_sigmoid(-z);
  }
  return ll;
}

std::vector<double> logistic_score(const LogisticData& data, const std::vector<double>& theta) {
  const size_t n = data.label.size();
  const size_t m = data.c.cols();
  std::vector<double> g(m, 0.0);
  for (size_t i = 0; i < n; ++i) {
    double z = data.offset[i];
    for (size_t j = 0; j < m; ++j) z += theta[j] * data.c(i, j);
    double p = 1.0 / (1.0 + std::exp(-z));
    double w = data.label[i] - p;
    for (size_t j = 0; j < m; ++j) g[j] += w * data.c(i, j);
  }
  return g;
}

LogisticResult logistic_fit(const LogisticData& data, double tol, int max_iter) {
  const size_t n = data.label.size();
  const size_t m = data.c.cols();
  LogisticResult res;
  res.theta.assign(m, 0.0);
  if (n == 0) {
    res.message = "empty sample";
    return res;
  }
  if (data.n_events == 0 || data.n_dummy == 0) {
    res.message = std::string("complete separation: ") +
                  (data.n_events == 0 ? "no event points; intercept diverges to -inf"
                                      : "no dummy points; intercept diverges to +inf");
    res.score = logistic_score(data, res.theta);
    return res;
  }

  // Intercept start from the constant-covariate closed form; the rest at 0.
  double mean_offset = 0.0;
  for (double o : data.offset) mean_offset += o;
  mean_offset /= static_cast<double>(n);
  res.theta[0] = std::log(static_cast<double>(data.n_events) / data.n_dummy) - mean_offset;

  double ll = logistic_loglik(data, res.theta);
  std::vector<double> z(n), p(n);
  for (int iter = 1; iter <= max_iter; ++iter) {
    res.iterations = iter;
    for (size_t i = 0; i < n; ++i) {
      double zi = data.offset[i];
      for (size_t j = 0; j < m; ++j) zi += res.theta[j] * data.c(i, j);
      z[i] = zi;
      p[i] = 1.0 / (1.0 + std::exp(-zi));
    }
    std::vector<double> g(m, 0.0);
    Matrix h(m, m);
    for (size_t i = 0; i < n; ++i) {
      double w = data.label[i] - p[i];
      double v = p[i] * (1.0 - p[i]);
      for (size_t j = 0; j < m; ++j) {
        g[j] += w * data.c(i, j);
        for (size_t l = j; l < m; ++l) h(j, l) += v * data.c(i, j) * data.c(i, l);
      }
    }
    for (size_t j = 0; j < m; ++j)
      for (size_t l = 0; l < j; ++l) h(j, l) = h(l, j);

    double gmax = 0.0;
    for (double gj : g) gmax = std::max(gmax, std::fabs(gj));
    if (gmax < tol) {
      res.converged = true;
      break;
    }

    Matrix l;
    size_t bad = 0;
    if (!cholesky(h, l, &bad)) {
      res.message = "singular Hessian at column '" + std::to_string(bad) +
                    "' (possible separation or collinear basis)";
      break;
    }
    std::vector<double> step = cholesky_solve(l, g);

    // Step halving keeps the likelihood non-decreasing on this concave
    // surface, up to the rounding noise of the big sum.
    const double slack = 1e-12 * (1.0 + std::fabs(ll));
    double alpha = 1.0;
    bool accepted = false;
    std::vector<double> trial(m);
    for (int half = 0; half <= 30; ++half) {
      for (size_t j = 0; j < m; ++j) trial[j] = res.theta[j] + alpha * step[j];
      double ll_trial = logistic_loglik(data, trial);
      if (ll_trial >= ll - slack) {
        res.theta = trial;
        ll = ll_trial;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      res.message = "step halving exhausted without likelihood improvement";
      break;
    }
  }
  res.loglik = ll;
  res.score = logistic_score(data, res.theta);
  if (!res.converged && res.message.empty()) {
    double gmax = 0.0;
    for (double gj : res.score) gmax = std::max(gmax, std::fabs(gj));
    if (gmax < tol)
      res.converged = true;  // landed on the root at the final iteration
    else
      res.message = "no convergence in " + std::to_string(res.iterations) +
                    " iterations (gradient max " + fmt_g17(gmax) + ")";
  }
  return res;
}

Matrix godambe(const model::TypeModel& tm, const std::vector<double>& theta, double r_k,
               const ingest::TemporalCovariates& cov, double t_len, int day_substeps) {
  if (day_substeps < 1) throw InputError("godambe: day_substeps must be >= 1");
  const int m = tm.basis.dimension();
  if (static_cast<int>(theta.size()) != m) throw InputError("godambe: theta dimension mismatch");
  const double house_mass = tm.houses.integral();  // Σ h·cellarea
  Matrix g(m, m);
  const long days = static_cast<long>(std::ceil(t_len));
  std::vector<double> c;
  for (long day = 0; day < days; ++day) {
    for (int s = 0; s < day_substeps; ++s) {
      double t = day_substeps == 1 ? static_cast<double>(day)
                                   : day + (s + 0.5) / day_substeps;
      model::basis_row(tm.basis, t, cov, &c);
      double lam = std::exp(dot(theta, c));
      double rho = r_k * DummySpec::seasonal(t, tm.basis.period);
      double w = house_mass * lam * rho / (lam + rho) / day_substeps;
      for (int p = 0; p < m; ++p)
        for (int q = p; q < m; ++q) g(p, q) += w * c[p] * c[q];
    }
  }
  for (int p = 0; p < m; ++p)
    for (int q = 0; q < p; ++q) g(p, q) = g(q, p);
  return g;
}

Matrix godambe_general(const std::vector<double>& cell_areas,
                       const std::vector<std::vector<double>>& lambda,
                       const std::vector<std::vector<double>>& rho,
                       const std::vector<std::vector<double>>& c_rows) {
  const size_t n_cells = cell_areas.size();
  const size_t n_days = c_rows.size();
  const size_t m = n_days ? c_rows[0].size() : 0;
  Matrix g(m, m);
  for (size_t cell = 0; cell < n_cells; ++cell) {
    for (size_t day = 0; day < n_days; ++day) {
      double lam = lambda[cell][day], rh = rho[cell][day];
      if (lam + rh <= 0) continue;
      double w = lam * rh / (lam + rh) * cell_areas[cell];
      const auto& c = c_rows[day];
      for (size_t p = 0; p < m; ++p)
        for (size_t q = p; q < m; ++q) g(p, q) += w * c[p] * c[q];
    }
  }
  for (size_t p = 0; p < m; ++p)
    for (size_t q = 0; q < p; ++q) g(p, q) = g(q, p);
  return g;
}

std::vector<Interval> confidence_intervals(const std::vector<double>& theta, const Matrix& g_inv,
                                           double level) {
  if (level < 0 || level >= 1) throw InputError("confidence level must be in [0, 1)");
  double z = level == 0 ? 0.0 : normal_quantile(0.5 + level / 2.0);
  std::vector<Interval> out(theta.size());
  for (size_t p = 0; p < theta.size(); ++p) {
    double se = std::sqrt(std::max(0.0, g_inv(p, p)));
    out[p] = {theta[p] - z * se, theta[p] + z * se};
  }
  return out;
}

double rho_check_fraction(const model::TemporalBasisSpec& basis, const std::vector<double>& theta,
                          double r_k, const ingest::TemporalCovariates& cov, double t_len) {
  // ρ and λ share the house factor, so the comparison is day-wise.
  const long days = static_cast<long>(std::ceil(t_len));
  long ok = 0;
  for (long day = 0; day < days; ++day) {
    double lam = model::temporal_intensity(theta, static_cast<double>(day), cov, basis);
    double rho = r_k * DummySpec::seasonal(static_cast<double>(day), basis.period);
    if (rho >= 4.0 * lam) ++ok;
  }
  return days ? static_cast<double>(ok) / days : 1.0;
}

TypeFit fit_type(const std::vector<ingest::Event>& events_k,
                 const std::vector<ingest::Event>& dummy_k, const model::ModelSpec& spec, int k,
                 const model::TemporalBasisSpec& basis, const DummySpec& dummy,
                 const ingest::TemporalCovariates& cov, double t_len, double ci_level,
                 int godambe_substeps) {
  model::ModelSpec local = spec;
  local.types.at(k - 1).basis = basis;
  TypeFit fit;
  fit.k = k;
  fit.basis = basis;
  fit.r = dummy.multiplier(k);
  fit.n_events = events_k.size();
  fit.n_dummy = dummy_k.size();

  LogisticData data = build_logistic_data(events_k, dummy_k, local, k, dummy, cov);
  LogisticResult res = logistic_fit(data);
  fit.theta = res.theta;
  fit.loglik = res.loglik;
  fit.iterations = res.iterations;
  fit.converged = res.converged;
  fit.message = res.message;
  fit.aic = -2.0 * res.loglik + 2.0 * basis.dimension();
  if (!fit.converged) return fit;

  fit.g = godambe(local.types.at(k - 1), fit.theta, fit.r, cov, t_len, godambe_substeps);
  Matrix l;
  size_t bad = 0;
  if (!cholesky(fit.g, l, &bad)) {
    auto names = basis.term_names();
    throw NumericError("godambe matrix singular: collinear column '" + names.at(bad) +
                       "' for house type " + std::to_string(k));
  }
  fit.g_inv = cholesky_inverse(l);
  fit.ci = confidence_intervals(fit.theta, fit.g_inv, ci_level);
  fit.rho_ge_4lambda = rho_check_fraction(basis, fit.theta, fit.r, cov, t_len);
  return fit;
}

void GridRanges::validate() const {
  if (o1_lo < 1 || o1_hi > 4 || o1_lo > o1_hi) throw InputError("grid ranges: bad o1 range");
  auto check = [](int lo, int hi, const char* name) {
    if (lo < 0 || hi > 5 || lo > hi) throw InputError(std::string("grid ranges: bad ") + name);
  };
  check(o2_lo, o2_hi, "o2 range");
  check(o3_lo, o3_hi, "o3 range");
  check(o4_lo, o4_hi, "o4 range");
}

std::vector<model::TemporalBasisSpec> GridRanges::candidates() const {
  validate();
  std::vector<model::TemporalBasisSpec> out;
  for (int a = o1_lo; a <= o1_hi; ++a)
    for (int b = o2_lo; b <= o2_hi; ++b)
      for (int c = o3_lo; c <= o3_hi; ++c)
        for (int d = o4_lo; d <= o4_hi; ++d) out.push_back(model::make_basis(a, b, c, d));
  return out;
}

GridSearchResult grid_search_aic(const std::vector<ingest::Event>& events_k,
                                 const std::vector<ingest::Event>& dummy_k,
                                 const model::ModelSpec& spec, int k, const GridRanges& ranges,
                                 const DummySpec& dummy, const ingest::TemporalCovariates& cov,
                                 double t_len, double ci_level, int godambe_substeps) {
  auto candidates = ranges.candidates();
  std::vector<TypeFit> fits(candidates.size());
  parallel_for(candidates.size(), [&](size_t i) {
    try {
      fits[i] = fit_type(events_k, dummy_k, spec, k, candidates[i], dummy, cov, t_len, ci_level,
                         godambe_substeps);
    } catch (const NumericError& e) {
      fits[i].k = k;
      fits[i].basis = candidates[i];
      fits[i].converged = false;
      fits[i].message = e.what();
      fits[i].aic = std::numeric_limits<double>::infinity();
    }
  });

  GridSearchResult result;
  int best = -1;
  for (size_t i = 0; i < fits.size(); ++i) {
    const auto& f = fits[i];
    result.candidates.push_back({f.basis, f.aic, f.loglik, f.converged});
    if (!f.converged) {
      std::ostringstream w;
      w << "candidate (o1=" << f.basis.o1 << ", o2=" << f.basis.o2 << ", o3=" << f.basis.o3
        << ", o4=" << f.basis.o4 << ") excluded: " << f.message;
      result.warnings.push_back(w.str());
      continue;
    }
    if (best < 0) {
      best = static_cast<int>(i);
      continue;
    }
    const auto& fb = fits[best];
    auto key = [](const TypeFit& x) {
      return std::make_tuple(x.aic, x.basis.dimension(), x.basis.o1, x.basis.o2, x.basis.o3,
                             x.basis.o4);
    };
    if (key(f) < key(fb)) best = static_cast<int>(i);
  }
  if (best < 0) throw NumericError("grid search: no candidate converged for house type " +
                                   std::to_string(k));
  result.best = fits[best];
  return result;
}

LrtResult likelihood_ratio_test(const TypeFit& full, const TypeFit& reduced) {
  if (!reduced.basis.nested_in(full.basis))
    throw InputError("likelihood ratio test: reduced basis not nested in the full one");
  if (full.n_events != reduced.n_events || full.n_dummy != reduced.n_dummy)
    throw InputError("likelihood ratio test: fits use different samples");
  LrtResult out;
  out.statistic = std::max(0.0, 2.0 * (full.loglik - reduced.loglik));
  out.dof = full.dimension() - reduced.dimension();
  out.p = chisq_upper_tail(out.statistic, out.dof);
  return out;
}

DayPrediction predict_type(const TypeFit& fit, const ingest::TemporalCovariates& cov, double t,
                           double level) {
  std::vector<double> c;
  model::basis_row(fit.basis, t, cov, &c);
  double pred = std::exp(dot(fit.theta, c));
  double varlog = fit.g_inv.rows() ? std::max(0.0, quad_form(fit.g_inv, c)) : 0.0;
  double z = level == 0 ? 0.0 : normal_quantile(0.5 + level / 2.0);
  double half = z * std::sqrt(varlog);
  return {t, pred, pred * std::exp(-half), pred * std::exp(half)};
}

std::vector<DayPrediction> predict_total(const std::vector<TypeFit>& fits,
                                         const model::ModelSpec& spec,
                                         const ingest::TemporalCovariates& cov, long t_begin,
                                         long t_end, double level) {
  if (t_begin < 0 || t_end <= t_begin) throw InputError("predict: empty day range");
  if (t_end > static_cast<long>(cov.size()))
    throw InputError("predict: weather missing for day " + std::to_string(t_end - 1));
  double z = level == 0 ? 0.0 : normal_quantile(0.5 + level / 2.0);
  std::vector<double> mass(fits.size());
  for (size_t i = 0; i < fits.size(); ++i) mass[i] = spec.house_total(fits[i].k);

  std::vector<DayPrediction> out;
  std::vector<double> c;
  for (long t = t_begin; t < t_end; ++t) {
    double total = 0.0, var_num = 0.0;
    for (size_t i = 0; i < fits.size(); ++i) {
      const auto& f = fits[i];
      model::basis_row(f.basis, static_cast<double>(t), cov, &c);
      double pred = mass[i] * std::exp(dot(f.theta, c));
      double varlog = f.g_inv.rows() ? std::max(0.0, quad_form(f.g_inv, c)) : 0.0;
      total += pred;
      var_num += pred * pred * varlog;
    }
    // Log-scale delta method on the sum of the independent type totals.
    double varlog_total = total > 0 ? var_num / (total * total) : 0.0;
    double half = z * std::sqrt(varlog_total);
    out.push_back({static_cast<double>(t), total, total * std::exp(-half),
                   total * std::exp(half)});
  }
  return out;
}

geom::RasterField prediction_raster(const std::vector<TypeFit>& fits,
                                    const model::ModelSpec& spec,
                                    const ingest::TemporalCovariates& cov, double t) {
  geom::RasterField out(spec.grid());
  for (const auto& f : fits) {
    const auto& tm = spec.types.at(f.k - 1);
    double rate = model::temporal_intensity(f.theta, t, cov, f.basis);
    for (size_t i = 0; i < out.values.size(); ++i)
      if (out.grid->mask[i]) out.values[i] += tm.houses.values[i] * rate;
  }
  return out;
}

std::string fits_to_json(const std::vector<TypeFit>& fits, const model::ModelSpec& spec,
                         double ci_level) {
  nlohmann::json j;
  j["ci_level"] = ci_level;
  j["types"] = nlohmann::json::array();
  for (const auto& f : fits) {
    const auto& tm = spec.types.at(f.k - 1);
    nlohmann::json t;
    t["k"] = f.k;
    t["basis"] = {{"o1", f.basis.o1},
                  {"o2", f.basis.o2},
                  {"o3", f.basis.o3},
                  {"o4", f.basis.o4},
                  {"include_speed", f.basis.include_speed},
                  {"include_interaction", f.basis.include_interaction},
                  {"period", f.basis.period}};
    t["raster"] = tm.raster_path;
    t["theta"] = f.theta;
    t["loglik"] = f.loglik;
    t["aic"] = f.aic;
    t["iterations"] = f.iterations;
    t["converged"] = f.converged;
    if (!f.message.empty()) t["message"] = f.message;
    t["n_events"] = f.n_events;
    t["n_dummy"] = f.n_dummy;
    t["r"] = f.r;
    t["rho_ge_4lambda"] = f.rho_ge_4lambda;
    if (f.g.rows()) {
      nlohmann::json gm = nlohmann::json::array(), gi = nlohmann::json::array();
      for (size_t p = 0; p < f.g.rows(); ++p) {
        nlohmann::json rowg = nlohmann::json::array(), rowi = nlohmann::json::array();
        for (size_t q = 0; q < f.g.cols(); ++q) {
          rowg.push_back(f.g(p, q));
          rowi.push_back(f.g_inv(p, q));
        }
        gm.push_back(rowg);
        gi.push_back(rowi);
      }
      t["godambe"] = gm;
      t["godambe_inv"] = gi;
      nlohmann::json ci = nlohmann::json::array();
      for (const auto& in : f.ci) ci.push_back({in.lo, in.hi});
      t["ci"] = ci;
    }
    j["types"].push_back(t);
  }
  return j.dump(2) + "\n";
}

std::vector<TypeFit> fits_from_json(const std::string& json_text, const std::string& base_dir,
                                    model::ModelSpec* spec) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  std::vector<TypeFit> fits;
  model::ModelSpec s;
  for (const auto& t : j.at("types")) {
    TypeFit f;
    f.k = t.at("k").get<int>();
    const auto& b = t.at("basis");
    f.basis.o1 = b.at("o1").get<int>();
    f.basis.o2 = b.at("o2").get<int>();
    f.basis.o3 = b.at("o3").get<int>();
    f.basis.o4 = b.at("o4").get<int>();
    f.basis.include_speed = b.at("include_speed").get<bool>();
    f.basis.include_interaction = b.at("include_interaction").get<bool>();
    f.basis.period = b.value("period", 365.0);
    f.theta = t.at("theta").get<std::vector<double>>();
    f.loglik = t.at("loglik").get<double>();
    f.aic = t.at("aic").get<double>();
    f.iterations = t.at("iterations").get<int>();
    f.converged = t.at("converged").get<bool>();
    if (t.contains("message")) f.message = t.at("message").get<std::string>();
    f.n_events = t.at("n_events").get<size_t>();
    f.n_dummy = t.at("n_dummy").get<size_t>();
    f.r = t.at("r").get<double>();
    f.rho_ge_4lambda = t.value("rho_ge_4lambda", 0.0);
    if (t.contains("godambe")) {
      const auto& gm = t.at("godambe");
      const auto& gi = t.at("godambe_inv");
      size_t m = gm.size();
      f.g = Matrix(m, m);
      f.g_inv = Matrix(m, m);
      for (size_t p = 0; p < m; ++p)
        for (size_t q = 0; q < m; ++q) {
          f.g(p, q) = gm[p][q].get<double>();
          f.g_inv(p, q) = gi[p][q].get<double>();
        }
      for (const auto& in : t.at("ci"))
        f.ci.push_back({in[0].get<double>(), in[1].get<double>()});
    }

    model::TypeModel tm;
    tm.basis = f.basis;
    tm.raster_path = t.at("raster").get<std::string>();
    std::filesystem::path p(tm.raster_path);
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    tm.houses = geom::read_raster(p.string());
    tm.theta = f.theta;
    s.types.push_back(std::move(tm));
    fits.push_back(std::move(f));
  }
  s.validate();
  if (spec) *spec = std::move(s);
  return fits;
}

}  // namespace stpp::fit
