#include "vrf/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>

#include <cstdlib>
#include <memory>
#include <string>

namespace vrf {

spdlog::logger& log() {
  static std::shared_ptr<spdlog::logger> logger = [] {
    auto l = spdlog::stderr_color_mt("vrf");
    l->set_pattern("[%l] %v");
    spdlog::level::level_enum level = spdlog::level::warn;
    if (const char* env = std::getenv("VRF_LOG"); env != nullptr)
      level = spdlog::level::from_str(env);
    l->set_level(level);
    return l;
  }();
  return *logger;
}

}  // namespace vrf
