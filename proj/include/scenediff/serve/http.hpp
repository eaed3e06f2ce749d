#pragma once

#include <string>

// Eigen must be seen before httplib.h.
#include "scenediff/serve/service.hpp"

#include "httplib.h"

namespace scenediff::serve {

/// Routes every /api request to `service.handle`. Bodies are JSON.
void register_routes(httplib::Server& server, Service& service);

/// Blocks until the server stops. Returns false when the address cannot be
/// bound.
bool run_server(Service& service, const std::string& host, int port);

}  // namespace scenediff::serve
