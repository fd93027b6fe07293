#pragma once

#include "styland/service/service.hpp"

#include "httplib.h"

namespace styland::service {

/// Mounts the /api/v1 routes on `server`.
void register_routes(httplib::Server& server, Service& service);

/// Serves until the server is stopped. Returns false if binding failed.
bool serve(Service& service, const std::string& host, int port, int threads);

}  // namespace styland::service
