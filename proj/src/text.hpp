#pragma once

#include <string>
#include <vector>

namespace stpp {

// Shortest text that round-trips a double exactly (17 significant digits).
std::string fmt_g17(double v);

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& line, char sep);

// Parsers that name the offending value and context in the error message.
double parse_double(const std::string& tok, const std::string& context);
long parse_long(const std::string& tok, const std::string& context);

bool looks_like_integer(const std::string& tok);

}  // namespace stpp
