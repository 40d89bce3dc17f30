#pragma once

#include <string>

namespace stpp::run {

// Command entry points shared by the C API and the CLI. Each takes the merged
// JSON configuration text, validates it, runs the pipeline and writes the
// artifacts listed in the README. Failures surface as InputError (bad
// configuration or files) or NumericError.
void cmd_importance(const std::string& config_json);
void cmd_fit(const std::string& config_json);
void cmd_predict(const std::string& config_json);
void cmd_diagnose(const std::string& config_json);
void cmd_simulate(const std::string& config_json);

}  // namespace stpp::run
