#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <unistd.h>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "geom.hpp"
#include "ingest.hpp"

namespace testutil {

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    auto base = std::filesystem::temp_directory_path() / "stpp_tests";
    std::filesystem::create_directories(base);
    static std::atomic<unsigned> counter{0};
    path_ = base / (tag + "_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

// Flat weather series of n days (integer-dated).
inline stpp::ingest::TemporalCovariates flat_weather(size_t n, double wind = 10.0,
                                                     double temp = 5.0) {
  stpp::ingest::TemporalCovariates cov;
  for (size_t t = 0; t < n; ++t) {
    cov.wind_speed.push_back(wind);
    cov.temperature.push_back(temp);
    cov.wind_chill.push_back(stpp::ingest::compute_wind_chill(wind, temp));
    cov.sunshine.push_back(4.0);
    cov.visibility.push_back(50.0);
  }
  return cov;
}

inline stpp::geom::RasterField constant_raster(const stpp::geom::GridPtr& grid, double value) {
  stpp::geom::RasterField f(grid);
  for (size_t i = 0; i < f.values.size(); ++i)
    if (grid->mask[i]) f.values[i] = value;
  return f;
}

}  // namespace testutil
