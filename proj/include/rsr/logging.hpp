#pragma once

#include <spdlog/spdlog.h>

namespace rsr {

/// Shared stderr logger. Its level comes from RSR_LOG (error | info | debug,
/// default info) the first time it is requested.
spdlog::logger& log();

}  // namespace rsr
