#include "text.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>

#include "error.hpp"

namespace stpp {

std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  for (size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == sep) {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

double parse_double(const std::string& tok, const std::string& context) {
  const std::string t = trim(tok);
  if (t.empty()) throw InputError(context + ": empty numeric field");
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size())
    throw InputError(context + ": not a number: '" + t + "'");
  return v;
}

long parse_long(const std::string& tok, const std::string& context) {
  const std::string t = trim(tok);
  if (t.empty()) throw InputError(context + ": empty integer field");
  char* end = nullptr;
  long v = std::strtol(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size())
    throw InputError(context + ": not an integer: '" + t + "'");
  return v;
}

bool looks_like_integer(const std::string& tok) {
  const std::string t = trim(tok);
  if (t.empty()) return false;
  size_t i = (t[0] == '+' || t[0] == '-') ? 1 : 0;
  if (i == t.size()) return false;
  for (; i < t.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(t[i]))) return false;
  return true;
}

}  // namespace stpp
