#include "rsr/logging.hpp"

#include <cstdlib>
#include <string_view>

#include <spdlog/sinks/stdout_sinks.h>

namespace rsr {

namespace {

spdlog::level::level_enum level_from_env() {
  const char* env = std::getenv("RSR_LOG");
  const std::string_view v = env ? env : "";
  if (v == "error") return spdlog::level::err;
  if (v == "debug") return spdlog::level::debug;
  return spdlog::level::info;
}

}  // namespace

spdlog::logger& log() {
  static const std::shared_ptr<spdlog::logger> logger = [] {
    auto l = std::make_shared<spdlog::logger>("rsr", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    l->set_pattern("[%l] %v");
    l->set_level(level_from_env());
    return l;
  }();
  return *logger;
}

}  // namespace rsr
