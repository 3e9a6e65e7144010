#include "admmopt/logging.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace admmopt {

void set_log_level(std::string_view level) {
  static const bool once = [] {
    // diagnostics go to stderr; stdout belongs to reports
    auto logger = spdlog::stderr_color_mt("admmopt");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    return true;
  }();
  (void)once;
  auto parsed = spdlog::level::from_str(std::string(level));
  if (parsed == spdlog::level::off && level != "off") parsed = spdlog::level::warn;
  spdlog::set_level(parsed);
}

void init_logging_from_env() {
  const char* env = std::getenv("ADMM_OPT_LOG");
  set_log_level(env ? env : "warn");
}

}  // namespace admmopt
