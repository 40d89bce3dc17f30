#pragma once

#include <string>
#include <vector>

namespace stpp {

std::vector<std::string> read_lines(const std::string& path);
std::string read_file(const std::string& path);

// Write via a sibling temp file and rename, so readers never see partial output.
void atomic_write(const std::string& path, const std::string& content);

}  // namespace stpp
