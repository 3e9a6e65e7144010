#pragma once

#include <string_view>

namespace admmopt {

/// Sets the library log level from ADMM_OPT_LOG (error|warn|info|debug|trace|off).
/// Unset means "warn".
void init_logging_from_env();

/// Same names as ADMM_OPT_LOG; unknown names fall back to "warn".
void set_log_level(std::string_view level);

}  // namespace admmopt
