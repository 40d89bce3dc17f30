#pragma once

#include <optional>
#include <string>
#include <vector>

#include "geom.hpp"

namespace stpp::ingest {

struct Date {
  int year = 0, month = 0, day = 0;
  bool operator==(const Date&) const = default;
};

bool is_leap_year(int year);
Date parse_date(const std::string& text);
std::string date_to_string(const Date& d);
bool is_feb29(const Date& d);

// 0-based position of a date within the 365-day year (February fixed at 28
// days). Rejects February 29.
int day_of_year_365(const Date& d);

// Day index on the leap-free calendar, relative to a start date.
long day_index_365(const Date& d, const Date& start);

// Walk n days forward on the leap-free calendar.
Date add_days_365(const Date& start, long n);

// Space-time event with a house-type mark.
struct Event {
  double x = 0.0, y = 0.0;
  double t = 0.0;  // day index in [0, t_len)
  int k = 1;       // house type, 1..4
};

struct EventPattern {
  std::vector<Event> events;
  geom::GridPtr window;
  double t_len = 0.0;

  std::vector<Event> of_type(int k) const;
  void validate() const;
};

// Daily covariate series, one record per day index with no gaps.
struct TemporalCovariates {
  std::vector<double> wind_speed;   // km/h
  std::vector<double> temperature;  // °C
  std::vector<double> wind_chill;   // °C
  std::vector<double> sunshine;     // h
  std::vector<double> visibility;   // level
  std::optional<Date> start_date;   // calendar date of day 0, leap-free

  size_t size() const { return wind_speed.size(); }
  void validate() const;
};

// JAG/TI wind chill: applies above 4.8 km/h, otherwise the air temperature.
double compute_wind_chill(double wind_speed_kmh, double temperature_c);

struct DatedWeatherRow {
  Date date;
  double wind_speed = 0.0;
  double temperature = 0.0;
  std::optional<double> wind_chill;  // overrides computation when present
  double sunshine = 0.0;
  double visibility = 0.0;
};

struct DatedEvent {
  double x = 0.0, y = 0.0;
  Date date;
  int k = 1;
};

// Removes every February 29 record and renumbers the remaining days
// consecutively, so each calendar year spans exactly 365 indices. Weather rows
// must be consecutive calendar days; duplicates are rejected.
std::pair<TemporalCovariates, EventPattern> drop_leap_days(
    const std::vector<DatedWeatherRow>& weather, const std::vector<DatedEvent>& events,
    geom::GridPtr window);

// Event CSV `x,y,t,k`; t is a day index or an ISO date. ISO dates require
// start_date; events on February 29 are dropped.
EventPattern parse_events(const std::string& path, geom::GridPtr window, double t_len,
                          const std::optional<Date>& start_date = std::nullopt);
std::string events_to_csv(const EventPattern& pattern);
void write_events(const EventPattern& pattern, const std::string& path);

// Weather CSV `date,wind_speed,temperature[,wind_chill,sunshine,visibility]`.
// ISO dates go through drop_leap_days; integer dates must already be the
// consecutive indices 0..n-1.
TemporalCovariates read_weather(const std::string& path);
std::string weather_to_csv(const TemporalCovariates& cov);
void write_weather(const TemporalCovariates& cov, const std::string& path);

}  // namespace stpp::ingest
