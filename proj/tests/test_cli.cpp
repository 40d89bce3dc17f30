#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "helpers.hpp"

using nlohmann::json;

namespace {

std::string cli_bin() {
  const char* env = std::getenv("STPPFIT_BIN");
  REQUIRE_MESSAGE(env != nullptr, "STPPFIT_BIN must point at the built stppfit binary");
  return env;
}

int run(const std::string& args, const std::string& log) {
  std::string cmd = cli_bin() + " " + args + " >" + log + " 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("cli: simulate is seed-deterministic byte for byte") {
  testutil::TempDir tmp("cli_sim");
  json cfg = {{"seed", 3},
              {"grid", {{"ncols", 12}, {"nrows", 12}, {"cellsize", 500}}},
              {"t_len_days", 120},
              {"target_events", 150}};
  testutil::spit(tmp.file("sim.json"), cfg.dump());
  REQUIRE(run("simulate --config " + tmp.file("sim.json") + " --out " + tmp.file("w1"),
              tmp.file("log1")) == 0);
  REQUIRE(run("simulate --config " + tmp.file("sim.json") + " --out " + tmp.file("w2"),
              tmp.file("log2")) == 0);
  for (const char* name : {"h1.asc", "weather.csv", "events.csv"})
    CHECK(testutil::slurp(tmp.file("w1") + "/" + name) ==
          testutil::slurp(tmp.file("w2") + "/" + name));
}

TEST_CASE("cli: exit codes distinguish input problems") {
  testutil::TempDir tmp("cli_err");
  // missing config file
  CHECK(run("simulate --config " + tmp.file("none.json"), tmp.file("log")) == 2);
  // config referencing a missing weather file
  json cfg = {{"events", tmp.file("e.csv")},
              {"weather", tmp.file("missing_weather.csv")},
              {"spatial_covariates", json::array()},
              {"out", tmp.file("out")},
              {"seed", 1}};
  testutil::spit(tmp.file("imp.json"), cfg.dump());
  CHECK(run("importance --config " + tmp.file("imp.json"), tmp.file("log2")) == 2);
  auto log = testutil::slurp(tmp.file("log2"));
  CHECK(log.find("error") != std::string::npos);
  // unknown diagnostic name
  json diag = {{"fit", tmp.file("nofit.json")},
               {"events", tmp.file("e.csv")},
               {"weather", tmp.file("w.csv")},
               {"out", tmp.file("out")},
               {"which", "bogus"}};
  testutil::spit(tmp.file("diag.json"), diag.dump());
  CHECK(run("diagnose --config " + tmp.file("diag.json"), tmp.file("log3")) == 2);
}

TEST_CASE("cli: numerical failure exits with code 1") {
  testutil::TempDir tmp("cli_numeric");
  // A world with no events at all: every house type hits complete separation,
  // so the whole fit is a numerical failure.
  json sim = {{"seed", 2},
              {"grid", {{"ncols", 8}, {"nrows", 8}, {"cellsize", 500}}},
              {"t_len_days", 60},
              {"target_events", 60}};
  testutil::spit(tmp.file("sim.json"), sim.dump());
  REQUIRE(run("simulate --config " + tmp.file("sim.json") + " --out " + tmp.file("w"),
              tmp.file("log0")) == 0);
  testutil::spit(tmp.file("w") + "/events.csv", "x,y,t,k\n");  // drop all events
  json cfg = {{"events", tmp.file("w") + "/events.csv"},
              {"weather", tmp.file("w") + "/weather.csv"},
              {"rasters", json::array({tmp.file("w") + "/h1.asc"})},
              {"out", tmp.file("fit")},
              {"seed", 4},
              {"r", json::array({0.5})},
              {"orders", {{"o1", json::array({1, 1})}, {"o3", json::array({1, 1})}}}};
  testutil::spit(tmp.file("fit.json"), cfg.dump());
  CHECK(run("fit --config " + tmp.file("fit.json"), tmp.file("log1")) == 1);
}

TEST_CASE("cli: flag overrides beat the config file") {
  testutil::TempDir tmp("cli_override");
  json cfg = {{"seed", 1},
              {"out", tmp.file("ignored")},
              {"grid", {{"ncols", 8}, {"nrows", 8}, {"cellsize", 500}}},
              {"t_len_days", 60},
              {"target_events", 60}};
  testutil::spit(tmp.file("sim.json"), cfg.dump());
  REQUIRE(run("simulate --config " + tmp.file("sim.json") + " --out " + tmp.file("real") +
                  " --seed 9 --set target_events=80",
              tmp.file("log")) == 0);
  CHECK(std::filesystem::exists(tmp.file("real") + "/truth.json"));
  CHECK_FALSE(std::filesystem::exists(tmp.file("ignored")));
  auto truth = json::parse(testutil::slurp(tmp.file("real") + "/truth.json"));
  CHECK(truth["seed"] == 9);
  CHECK(truth["expected_count"].get<double>() == doctest::Approx(80.0).epsilon(1e-9));
}
