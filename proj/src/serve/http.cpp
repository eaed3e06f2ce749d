#include "scenediff/serve/http.hpp"

namespace scenediff::serve {

void register_routes(httplib::Server& server, Service& service) {
  auto route = [&service](const httplib::Request& req, httplib::Response& res) {
    const Response r = service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get("/api/.*", route);
  server.Post("/api/.*", route);
  server.Put("/api/.*", route);
  server.Delete("/api/.*", route);
}

bool run_server(Service& service, const std::string& host, int port) {
  httplib::Server server;
  register_routes(server, service);
  return server.listen(host, port);
}

}  // namespace scenediff::serve
