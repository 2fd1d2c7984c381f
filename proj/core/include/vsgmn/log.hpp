#pragma once

#include <string>

namespace vsgmn {

enum class LogLevel { error = 0, info = 1, debug = 2 };

// Level comes from the VSGMN_LOG environment variable (error|info|debug),
// read once per process; unset or unrecognized values mean `info`.
LogLevel log_level();

void log_error(const std::string& message);
void log_info(const std::string& message);
void log_debug(const std::string& message);

}  // namespace vsgmn
