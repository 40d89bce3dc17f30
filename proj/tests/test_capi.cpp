#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "helpers.hpp"
#include "rng.hpp"
#include "stpp/stpp.h"

using nlohmann::json;

namespace {

std::string dump(const json& j) { return j.dump(); }

}  // namespace

TEST_CASE("raster handles: create, write, read, smooth, overlap") {
  testutil::TempDir tmp("capi_raster");
  std::vector<double> values(100, 0.0);
  values[55] = 3.5;
  stpp_raster* r = nullptr;
  REQUIRE(stpp_raster_create(10, 10, 0, 0, 100, values.data(), nullptr, &r) == STPP_OK);

  int ncols = 0, nrows = 0;
  double xll = 1, yll = 1, cs = 0;
  CHECK(stpp_raster_dims(r, &ncols, &nrows, &xll, &yll, &cs) == STPP_OK);
  CHECK(ncols == 10);
  CHECK(cs == 100.0);

  CHECK(stpp_raster_write(r, tmp.file("a.asc").c_str()) == STPP_OK);
  stpp_raster* back = nullptr;
  REQUIRE(stpp_raster_read(tmp.file("a.asc").c_str(), &back) == STPP_OK);
  std::vector<double> out(100);
  CHECK(stpp_raster_values(back, out.data(), out.size()) == STPP_OK);
  CHECK(out[55] == 3.5);
  std::vector<unsigned char> mask(100);
  CHECK(stpp_raster_mask(back, mask.data(), mask.size()) == STPP_OK);
  CHECK(mask[0] == 1);

  // smoothing through the C surface; sigma small enough that no mass leaks
  // off this 1 km window
  double xyw[3] = {550.0, 550.0, 2.0};
  stpp_raster* smooth = nullptr;
  REQUIRE(stpp_smooth_points(r, xyw, 1, 50.0, &smooth) == STPP_OK);
  std::vector<double> sm(100);
  CHECK(stpp_raster_values(smooth, sm.data(), sm.size()) == STPP_OK);
  double total = 0;
  for (double v : sm) total += v * 100.0 * 100.0;
  CHECK(total == doctest::Approx(2.0).epsilon(1e-6));

  stpp_raster* areal = nullptr;
  REQUIRE(stpp_smooth_areal(r, 150.0, &areal) == STPP_OK);

  double area = 0;
  CHECK(stpp_translation_overlap(r, 100.0, 0.0, &area) == STPP_OK);
  CHECK(area == doctest::Approx(9e5));

  stpp_raster_free(r);
  stpp_raster_free(back);
  stpp_raster_free(smooth);
  stpp_raster_free(areal);

  // failure path: unreadable file
  stpp_raster* bad = nullptr;
  CHECK(stpp_raster_read(tmp.file("missing.asc").c_str(), &bad) == STPP_ERR_INPUT);
  CHECK(std::strlen(stpp_last_error()) > 0);
}

TEST_CASE("pattern handles round trip") {
  testutil::TempDir tmp("capi_pattern");
  stpp_raster* window = nullptr;
  REQUIRE(stpp_raster_create(10, 10, 0, 0, 100, nullptr, nullptr, &window) == STPP_OK);
  testutil::spit(tmp.file("e.csv"), "x,y,t,k\n150,250,3,2\n50,50,0,1\n");
  stpp_pattern* p = nullptr;
  REQUIRE(stpp_pattern_read(tmp.file("e.csv").c_str(), window, 10.0, nullptr, &p) == STPP_OK);
  size_t n = 0;
  CHECK(stpp_pattern_size(p, &n) == STPP_OK);
  CHECK(n == 2);
  double x, y, t;
  int k;
  CHECK(stpp_pattern_get(p, 0, &x, &y, &t, &k) == STPP_OK);
  CHECK(x == 150.0);
  CHECK(k == 2);
  CHECK(stpp_pattern_get(p, 5, &x, &y, &t, &k) == STPP_ERR_INPUT);
  CHECK(stpp_pattern_write(p, tmp.file("e2.csv").c_str()) == STPP_OK);
  stpp_pattern_free(p);
  stpp_raster_free(window);
}

TEST_CASE("full command pipeline through the C API") {
  testutil::TempDir tmp("capi_pipeline");
  const std::string world = tmp.file("world");
  const std::string fitdir = tmp.file("fit");

  json sim_cfg = {
      {"out", world},
      {"seed", 11},
      {"grid", {{"ncols", 20}, {"nrows", 20}, {"cellsize", 500}}},
      {"n_types", 2},
      {"t_len_days", 365},
      {"start_date", "2004-01-01"},
      {"target_events", 700},
      {"orders", json::array({{{"o1", 1}, {"o3", 1}}, {{"o1", 1}, {"o3", 1}}})},
  };
  REQUIRE(stpp_cmd_simulate(dump(sim_cfg).c_str()) == STPP_OK);
  CHECK(std::filesystem::exists(world + "/h1.asc"));
  CHECK(std::filesystem::exists(world + "/h2.asc"));
  CHECK(std::filesystem::exists(world + "/events.csv"));
  CHECK(std::filesystem::exists(world + "/weather.csv"));
  CHECK(std::filesystem::exists(world + "/truth.json"));

  // the truth document is itself a loadable model
  {
    stpp_model* truth = nullptr;
    REQUIRE(stpp_model_load((world + "/truth.json").c_str(), &truth) == STPP_OK);
    REQUIRE(stpp_model_set_weather(truth, (world + "/weather.csv").c_str()) == STPP_OK);
    double rate = 0;
    CHECK(stpp_model_temporal(truth, 1, 0.0, &rate) == STPP_OK);
    CHECK(rate > 0.0);
    stpp_model_free(truth);
  }

  // a pure-noise covariate on the same grid to test the ranking
  {
    stpp_raster* h1 = nullptr;
    REQUIRE(stpp_raster_read((world + "/h1.asc").c_str(), &h1) == STPP_OK);
    int nc = 0, nr = 0;
    double xll, yll, cs;
    stpp_raster_dims(h1, &nc, &nr, &xll, &yll, &cs);
    std::vector<double> vals(static_cast<size_t>(nc) * nr);
    stpp::Rng rng(999);
    for (auto& v : vals) v = rng.uniform();
    stpp_raster* noise = nullptr;
    REQUIRE(stpp_raster_create(nc, nr, xll, yll, cs, vals.data(), nullptr, &noise) == STPP_OK);
    REQUIRE(stpp_raster_write(noise, (world + "/noise.asc").c_str()) == STPP_OK);
    stpp_raster_free(h1);
    stpp_raster_free(noise);
  }

  json imp_cfg = {
      {"events", world + "/events.csv"},
      {"weather", world + "/weather.csv"},
      {"spatial_covariates",
       json::array({{{"name", "noise"}, {"path", world + "/noise.asc"}},
                    {{"name", "h1"}, {"path", world + "/h1.asc"}},
                    {{"name", "h2"}, {"path", world + "/h2.asc"}}})},
      {"out", tmp.file("imp")},
      {"seed", 5},
      {"n_trees", 100},
  };
  REQUIRE(stpp_cmd_importance(dump(imp_cfg).c_str()) == STPP_OK);
  for (const char* name : {"spatial_traditional.csv", "spatial_conditional.csv",
                           "temporal_traditional.csv", "temporal_conditional.csv"}) {
    auto text = testutil::slurp(tmp.file("imp") + "/" + name);
    CHECK(text.rfind("variable,mode,score\n", 0) == 0);
  }
  // counts are driven by the house densities: they outrank the noise field
  {
    auto text = testutil::slurp(tmp.file("imp") + "/spatial_traditional.csv");
    auto top = text.substr(text.find('\n') + 1, 3);
    CHECK((top.rfind("h1,", 0) == 0 || top.rfind("h2,", 0) == 0));
  }

  json fit_cfg = {
      {"events", world + "/events.csv"},
      {"weather", world + "/weather.csv"},
      {"rasters", json::array({world + "/h1.asc", world + "/h2.asc"})},
      {"out", fitdir},
      {"seed", 21},
      {"r", json::array({0.08, 0.08})},
      {"orders", {{"o1", json::array({1, 2})}, {"o3", json::array({1, 1})}}},
  };
  REQUIRE(stpp_cmd_fit(dump(fit_cfg).c_str()) == STPP_OK);
  CHECK(std::filesystem::exists(fitdir + "/fit.json"));
  CHECK(std::filesystem::exists(fitdir + "/report.txt"));
  auto report = testutil::slurp(fitdir + "/report.txt");
  CHECK(report.find("house type 1") != std::string::npos);
  CHECK(report.find("rho >= 4*lambda") != std::string::npos);

  // model handle over the fit artifact
  stpp_model* model = nullptr;
  REQUIRE(stpp_model_load((fitdir + "/fit.json").c_str(), &model) == STPP_OK);
  int n_types = 0;
  CHECK(stpp_model_n_types(model, &n_types) == STPP_OK);
  CHECK(n_types == 2);
  double rate = 0.0;
  CHECK(stpp_model_temporal(model, 1, 0.0, &rate) == STPP_ERR_INPUT);  // weather not set
  REQUIRE(stpp_model_set_weather(model, (world + "/weather.csv").c_str()) == STPP_OK);
  CHECK(stpp_model_temporal(model, 1, 0.0, &rate) == STPP_OK);
  CHECK(rate > 0.0);
  double lam = 0.0;
  CHECK(stpp_model_intensity(model, 5000.0, 5000.0, 0.0, &lam) == STPP_OK);
  CHECK(lam >= 0.0);
  stpp_model_free(model);

  json pred_cfg = {
      {"fit", fitdir + "/fit.json"},
      {"weather", world + "/weather.csv"},
      {"out", tmp.file("pred")},
      {"t_start", 0},
      {"t_end", 30},
      {"raster_days", json::array({5})},
  };
  REQUIRE(stpp_cmd_predict(dump(pred_cfg).c_str()) == STPP_OK);
  auto pred_text = testutil::slurp(tmp.file("pred") + "/predictions.csv");
  CHECK(pred_text.rfind("t,lambda,lo,hi\n", 0) == 0);
  CHECK(std::count(pred_text.begin(), pred_text.end(), '\n') == 31);
  CHECK(std::filesystem::exists(tmp.file("pred") + "/raster_t5.asc"));

  json diag_cfg = {
      {"fit", fitdir + "/fit.json"},
      {"events", world + "/events.csv"},
      {"weather", world + "/weather.csv"},
      {"out", tmp.file("diag")},
      {"which", "pcf"},
      {"spatial_max_lag", 4000.0},
      {"temporal_max_lag", 40.0},
  };
  REQUIRE(stpp_cmd_diagnose(dump(diag_cfg).c_str()) == STPP_OK);
  CHECK(std::filesystem::exists(tmp.file("diag") + "/pcf_spatial.csv"));
  CHECK(std::filesystem::exists(tmp.file("diag") + "/pcf_temporal.csv"));

  diag_cfg["which"] = "kfun";
  diag_cfg["k_steps"] = 20;
  REQUIRE(stpp_cmd_diagnose(dump(diag_cfg).c_str()) == STPP_OK);
  CHECK(std::filesystem::exists(tmp.file("diag") + "/kfun.csv"));

  diag_cfg["which"] = "residuals";
  REQUIRE(stpp_cmd_diagnose(dump(diag_cfg).c_str()) == STPP_OK);
  CHECK(std::filesystem::exists(tmp.file("diag") + "/residuals_spatial.asc"));
  CHECK(std::filesystem::exists(tmp.file("diag") + "/residuals_monthly.csv"));

  diag_cfg["which"] = "envelope";
  diag_cfg["seed"] = 3;
  diag_cfg["n_sim"] = 9;
  diag_cfg["k_steps"] = 10;
  diag_cfg["k_dr"] = 300.0;
  diag_cfg["k_dv"] = 2.0;
  REQUIRE(stpp_cmd_diagnose(dump(diag_cfg).c_str()) == STPP_OK);
  auto verdict = testutil::slurp(tmp.file("diag") + "/envelope_verdict.txt");
  CHECK((verdict == "inside\n" || verdict == "outside\n"));

  diag_cfg["which"] = "rho_compare";
  diag_cfg["n_rep"] = 2;
  diag_cfg["r"] = json::array({0.08, 0.08});
  REQUIRE(stpp_cmd_diagnose(dump(diag_cfg).c_str()) == STPP_OK);
  CHECK(std::filesystem::exists(tmp.file("diag") + "/rho_compare_spatial.asc"));
  CHECK(std::filesystem::exists(tmp.file("diag") + "/rho_compare_temporal.csv"));

  // Leap-day prediction: 2004 is a leap year, Feb 29 repeats Feb 28.
  json pred_dates = pred_cfg;
  pred_dates["out"] = tmp.file("pred_dates");
  pred_dates.erase("t_start");
  pred_dates.erase("t_end");
  pred_dates.erase("raster_days");
  pred_dates["dates"] = json::array({"2004-02-28", "2004-03-01"});
  REQUIRE(stpp_cmd_predict(dump(pred_dates).c_str()) == STPP_OK);
  auto lines = testutil::slurp(tmp.file("pred_dates") + "/predictions.csv");
  auto first = lines.find('\n') + 1;
  auto second = lines.find('\n', first) + 1;
  auto third = lines.find('\n', second) + 1;
  std::string row28 = lines.substr(first, second - first);
  std::string row29 = lines.substr(second, third - second);
  CHECK(std::count(lines.begin(), lines.end(), '\n') == 4);  // header + 3 days
  CHECK(row28 == row29);
}

TEST_CASE("command failures map to input errors with messages") {
  CHECK(stpp_cmd_fit("{ not json") == STPP_ERR_INPUT);
  CHECK(std::strlen(stpp_last_error()) > 0);
  json cfg = {{"events", "/nonexistent/events.csv"},
              {"weather", "/nonexistent/weather.csv"},
              {"rasters", json::array({"/nonexistent/h1.asc"})},
              {"out", "/tmp/stpp_never"},
              {"seed", 1}};
  CHECK(stpp_cmd_fit(cfg.dump().c_str()) == STPP_ERR_INPUT);
  std::string msg = stpp_last_error();
  CHECK(msg.find("/nonexistent/h1.asc") != std::string::npos);

  // seed is mandatory for stochastic commands
  json nosd = {{"out", "/tmp/stpp_never2"}};
  CHECK(stpp_cmd_simulate(nosd.dump().c_str()) == STPP_ERR_INPUT);
}
