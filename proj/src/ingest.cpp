#include "ingest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "error.hpp"
#include "io.hpp"
#include "text.hpp"

namespace stpp::ingest {

namespace {
const int kMonthDays365[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
const int kMonthDaysLeap[12] = {31, 29, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
}  // namespace

bool is_leap_year(int year) {
  return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

Date parse_date(const std::string& text) {
  auto parts = split(trim(text), '-');
  if (parts.size() != 3) throw InputError("bad date (want YYYY-MM-DD): '" + text + "'");
  Date d;
  d.year = static_cast<int>(parse_long(parts[0], "date year"));
  d.month = static_cast<int>(parse_long(parts[1], "date month"));
  d.day = static_cast<int>(parse_long(parts[2], "date day"));
  if (d.month < 1 || d.month > 12) throw InputError("bad month in date '" + text + "'");
  int maxd = (is_leap_year(d.year) ? kMonthDaysLeap : kMonthDays365)[d.month - 1];
  if (d.day < 1 || d.day > maxd) throw InputError("bad day in date '" + text + "'");
  return d;
}

std::string date_to_string(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

bool is_feb29(const Date& d) { return d.month == 2 && d.day == 29; }

int day_of_year_365(const Date& d) {
  if (is_feb29(d)) throw InputError("day_of_year_365: February 29 has no index");
  int doy = 0;
  for (int m = 1; m < d.month; ++m) doy += kMonthDays365[m - 1];
  return doy + d.day - 1;
}

long day_index_365(const Date& d, const Date& start) {
  return 365L * (d.year - start.year) + day_of_year_365(d) - day_of_year_365(start);
}

Date add_days_365(const Date& start, long n) {
  long idx = day_of_year_365(start) + n;
  long year_offset = idx >= 0 ? idx / 365 : (idx - 364) / 365;
  int doy = static_cast<int>(idx - 365 * year_offset);
  Date d;
  d.year = static_cast<int>(start.year + year_offset);
  int m = 0;
  while (doy >= kMonthDays365[m]) doy -= kMonthDays365[m++];
  d.month = m + 1;
  d.day = doy + 1;
  return d;
}

std::vector<Event> EventPattern::of_type(int k) const {
  std::vector<Event> out;
  for (const auto& e : events)
    if (e.k == k) out.push_back(e);
  return out;
}

void EventPattern::validate() const {
  if (!window) throw InputError("event pattern: missing window");
  window->validate();
  for (size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (!std::isfinite(e.x) || !std::isfinite(e.y) || !std::isfinite(e.t))
      throw InputError("event " + std::to_string(i) + ": non-finite coordinate");
    if (e.t < 0 || e.t >= t_len)
      throw InputError("event " + std::to_string(i) + ": day " + fmt_g17(e.t) +
                       " outside [0, " + fmt_g17(t_len) + ")");
    if (e.k < 1 || e.k > 4)
      throw InputError("event " + std::to_string(i) + ": house type " + std::to_string(e.k) +
                       " not in 1..4");
    if (!window->contains(e.x, e.y))
      throw InputError("event " + std::to_string(i) + ": location (" + fmt_g17(e.x) + ", " +
                       fmt_g17(e.y) + ") outside the window");
  }
}

void TemporalCovariates::validate() const {
  size_t n = size();
  if (temperature.size() != n || wind_chill.size() != n || sunshine.size() != n ||
      visibility.size() != n)
    throw InputError("weather: column length mismatch");
  auto check = [&](const std::vector<double>& v, const char* name) {
    for (size_t i = 0; i < v.size(); ++i)
      if (!std::isfinite(v[i]))
        throw InputError(std::string("weather: non-finite ") + name + " on day " +
                         std::to_string(i));
  };
  check(wind_speed, "wind_speed");
  check(temperature, "temperature");
  check(wind_chill, "wind_chill");
  check(sunshine, "sunshine");
  check(visibility, "visibility");
}

double compute_wind_chill(double wind_speed_kmh, double temperature_c) {
  if (wind_speed_kmh < 0) throw InputError("wind chill: negative wind speed");
  if (wind_speed_kmh < 4.8) return temperature_c;
  double v16 = std::pow(wind_speed_kmh, 0.16);
  return 13.12 + 0.6215 * temperature_c - 11.37 * v16 + 0.3965 * temperature_c * v16;
}

std::pair<TemporalCovariates, EventPattern> drop_leap_days(
    const std::vector<DatedWeatherRow>& weather, const std::vector<DatedEvent>& events,
    geom::GridPtr window) {
  if (weather.empty()) throw InputError("drop_leap_days: empty weather series");
  TemporalCovariates cov;
  std::optional<Date> prev;      // last kept date
  std::optional<Date> prev_raw;  // last date seen, Feb 29 included
  for (const auto& row : weather) {
    if (prev_raw && row.date == *prev_raw)
      throw InputError("duplicate date " + date_to_string(row.date));
    prev_raw = row.date;
    if (prev && !is_feb29(row.date)) {
      long step = day_index_365(row.date, *prev);
      if (step != 1)
        throw InputError("weather dates not consecutive at " + date_to_string(row.date));
    }
    if (is_feb29(row.date)) continue;
    prev = row.date;
    if (!cov.start_date) cov.start_date = row.date;
    cov.wind_speed.push_back(row.wind_speed);
    cov.temperature.push_back(row.temperature);
    cov.wind_chill.push_back(row.wind_chill ? *row.wind_chill
                                            : compute_wind_chill(row.wind_speed, row.temperature));
    cov.sunshine.push_back(row.sunshine);
    cov.visibility.push_back(row.visibility);
  }
  cov.validate();

  EventPattern pattern;
  pattern.window = std::move(window);
  pattern.t_len = static_cast<double>(cov.size());
  for (const auto& ev : events) {
    if (is_feb29(ev.date)) continue;
    long t = day_index_365(ev.date, *cov.start_date);
    if (t < 0 || t >= static_cast<long>(cov.size()))
      throw InputError("event on " + date_to_string(ev.date) + " outside the weather span");
    pattern.events.push_back({ev.x, ev.y, static_cast<double>(t), ev.k});
  }
  pattern.validate();
  return {std::move(cov), std::move(pattern)};
}

EventPattern parse_events(const std::string& path, geom::GridPtr window, double t_len,
                          const std::optional<Date>& start_date) {
  auto lines = read_lines(path);
  if (lines.empty()) throw InputError(path + ": empty event file");
  auto header = split(lines[0], ',');
  if (header.size() < 4 || trim(header[0]) != "x" || trim(header[1]) != "y" ||
      trim(header[2]) != "t" || trim(header[3]) != "k")
    throw InputError(path + ": expected header 'x,y,t,k'");

  EventPattern pattern;
  pattern.window = std::move(window);
  pattern.t_len = t_len;
  for (size_t li = 1; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    const std::string where = path + " line " + std::to_string(li + 1);
    auto f = split(lines[li], ',');
    if (f.size() != 4) throw InputError(where + ": expected 4 fields");
    Event e;
    e.x = parse_double(f[0], where + " x");
    e.y = parse_double(f[1], where + " y");
    const std::string ttok = trim(f[2]);
    if (ttok.find('-') != std::string::npos && !looks_like_integer(ttok)) {
      if (!start_date) throw InputError(where + ": ISO date given but no start date configured");
      Date d = parse_date(ttok);
      if (is_feb29(d)) continue;  // leap-day events are dropped
      e.t = static_cast<double>(day_index_365(d, *start_date));
    } else {
      e.t = parse_double(f[2], where + " t");
    }
    e.k = static_cast<int>(parse_long(f[3], where + " k"));
    if (e.k < 1 || e.k > 4)
      throw InputError(where + ": house type " + std::to_string(e.k) + " not in 1..4");
    if (e.t < 0 || e.t >= t_len) throw InputError(where + ": day index out of range");
    if (!pattern.window->contains(e.x, e.y)) throw InputError(where + ": point outside window");
    pattern.events.push_back(e);
  }
  return pattern;
}

std::string events_to_csv(const EventPattern& pattern) {
  std::ostringstream out;
  out << "x,y,t,k\n";
  for (const auto& e : pattern.events)
    out << fmt_g17(e.x) << ',' << fmt_g17(e.y) << ',' << fmt_g17(e.t) << ',' << e.k << '\n';
  return out.str();
}

void write_events(const EventPattern& pattern, const std::string& path) {
  atomic_write(path, events_to_csv(pattern));
}

TemporalCovariates read_weather(const std::string& path) {
  auto lines = read_lines(path);
  if (lines.empty()) throw InputError(path + ": empty weather file");
  auto header = split(lines[0], ',');
  for (auto& h : header) h = trim(h);
  if (header.size() < 3 || header[0] != "date" || header[1] != "wind_speed" ||
      header[2] != "temperature")
    throw InputError(path + ": expected header 'date,wind_speed,temperature[,wind_chill,sunshine,visibility]'");
  int chill_col = -1, sun_col = -1, vis_col = -1;
  for (size_t i = 3; i < header.size(); ++i) {
    if (header[i] == "wind_chill") chill_col = static_cast<int>(i);
    else if (header[i] == "sunshine") sun_col = static_cast<int>(i);
    else if (header[i] == "visibility") vis_col = static_cast<int>(i);
    else throw InputError(path + ": unknown weather column '" + header[i] + "'");
  }

  std::vector<DatedWeatherRow> rows;
  bool dated = false, indexed = false;
  long expect_index = 0;
  for (size_t li = 1; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    const std::string where = path + " line " + std::to_string(li + 1);
    auto f = split(lines[li], ',');
    if (f.size() != header.size()) throw InputError(where + ": field count mismatch");
    DatedWeatherRow row;
    const std::string dtok = trim(f[0]);
    if (looks_like_integer(dtok)) {
      indexed = true;
      long idx = parse_long(dtok, where + " date");
      if (idx != expect_index++)
        throw InputError(where + ": day indices must be consecutive from 0");
    } else {
      dated = true;
      row.date = parse_date(dtok);
    }
    if (dated && indexed) throw InputError(path + ": mixed ISO dates and day indices");
    row.wind_speed = parse_double(f[1], where + " wind_speed");
    row.temperature = parse_double(f[2], where + " temperature");
    if (chill_col >= 0) row.wind_chill = parse_double(f[chill_col], where + " wind_chill");
    if (sun_col >= 0) row.sunshine = parse_double(f[sun_col], where + " sunshine");
    if (vis_col >= 0) row.visibility = parse_double(f[vis_col], where + " visibility");
    rows.push_back(row);
  }
  if (rows.empty()) throw InputError(path + ": no weather rows");

  if (indexed) {
    TemporalCovariates cov;
    for (const auto& row : rows) {
      cov.wind_speed.push_back(row.wind_speed);
      cov.temperature.push_back(row.temperature);
      cov.wind_chill.push_back(row.wind_chill
                                   ? *row.wind_chill
                                   : compute_wind_chill(row.wind_speed, row.temperature));
      cov.sunshine.push_back(row.sunshine);
      cov.visibility.push_back(row.visibility);
    }
    cov.validate();
    return cov;
  }
  auto window = geom::make_grid(1, 1, 0, 0, 1);  // placeholder, no events here
  return drop_leap_days(rows, {}, window).first;
}

std::string weather_to_csv(const TemporalCovariates& cov) {
  std::ostringstream out;
  out << "date,wind_speed,temperature,wind_chill,sunshine,visibility\n";
  for (size_t t = 0; t < cov.size(); ++t) {
    if (cov.start_date)
      out << date_to_string(add_days_365(*cov.start_date, static_cast<long>(t)));
    else
      out << t;
    out << ',' << fmt_g17(cov.wind_speed[t]) << ',' << fmt_g17(cov.temperature[t]) << ','
        << fmt_g17(cov.wind_chill[t]) << ',' << fmt_g17(cov.sunshine[t]) << ','
        << fmt_g17(cov.visibility[t]) << '\n';
  }
  return out.str();
}

void write_weather(const TemporalCovariates& cov, const std::string& path) {
  atomic_write(path, weather_to_csv(cov));
}

}  // namespace stpp::ingest
