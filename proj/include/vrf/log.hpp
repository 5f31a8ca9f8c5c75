#pragma once

#include <spdlog/spdlog.h>

namespace vrf {

/// Shared diagnostic logger (stderr). Verbosity comes from VRF_LOG
/// (trace|debug|info|warn|error|off); the default is warn.
spdlog::logger& log();

}  // namespace vrf
