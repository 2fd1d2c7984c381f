#include "vsgmn/log.hpp"

#include <cstdlib>
#include <iostream>

namespace vsgmn {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("VSGMN_LOG");
    if (env == nullptr) return LogLevel::info;
    const std::string value(env);
    if (value == "error") return LogLevel::error;
    if (value == "debug") return LogLevel::debug;
    return LogLevel::info;
  }();
  return level;
}

namespace {

void emit(LogLevel at, const char* tag, const std::string& message) {
  if (static_cast<int>(log_level()) < static_cast<int>(at)) return;
  std::cerr << tag << message << '\n';
}

}  // namespace

void log_error(const std::string& message) {
  emit(LogLevel::error, "[error] ", message);
}

void log_info(const std::string& message) {
  emit(LogLevel::info, "[info] ", message);
}

void log_debug(const std::string& message) {
  emit(LogLevel::debug, "[debug] ", message);
}

}  // namespace vsgmn
