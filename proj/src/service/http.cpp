#include "styland/service/http.hpp"

namespace styland::service {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw ServiceError(400, "bad_request", "request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw ServiceError(400, "bad_request", std::string("malformed JSON: ") + e.what());
  }
}

template <typename T>
T field(const json& body, const char* key, T fallback) {
  if (!body.contains(key)) return fallback;
  try {
    return body.at(key).get<T>();
  } catch (const json::exception&) {
    throw ServiceError(400, "bad_request", std::string("field '") + key + "' has the wrong type");
  }
}

std::optional<std::uint64_t> seed_field(const json& body) {
  if (!body.contains("seed") || body.at("seed").is_null()) return std::nullopt;
  if (!body.at("seed").is_number_unsigned()) throw ServiceError(400, "bad_request", "seed must be a non-negative integer");
  return body.at("seed").get<std::uint64_t>();
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

Handler guarded(Handler inner) {
  return [inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
    try {
      inner(req, res);
    } catch (const ServiceError& e) {
      send_json(res, e.status(), e.body());
    } catch (const Error& e) {
      send_json(res, 500, ServiceError(500, to_string(e.kind()), e.what()).body());
    } catch (const std::exception& e) {
      send_json(res, 500, ServiceError(500, "internal", e.what()).body());
    }
  };
}

}  // namespace

void register_routes(httplib::Server& server, Service& service) {
  const std::string sid = "([A-Za-z0-9_-]+)";
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  server.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  server.Get("/api/v1/model", guarded([&](const httplib::Request&, httplib::Response& res) {
               send_json(res, 200, service.model_info());
             }));
  server.Post("/api/v1/sessions", guarded([&](const httplib::Request&, httplib::Response& res) {
                send_json(res, 201, service.create_session());
              }));
  server.Get("/api/v1/sessions/" + sid, guarded([&](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, service.session_info(req.matches[1]));
             }));
  server.Put("/api/v1/sessions/" + sid + "/segmentation",
             guarded([&](const httplib::Request& req, httplib::Response& res) {
               const io::Bytes png(req.body.begin(), req.body.end());
               send_json(res, 200, service.upload_segmentation(req.matches[1], png));
             }));
  server.Post("/api/v1/sessions/" + sid + "/depths", guarded([&](const httplib::Request& req, httplib::Response& res) {
                const auto body = parse_body(req);
                send_json(res, 201, service.request_depths(req.matches[1], field(body, "n", 4), seed_field(body)));
              }));
  server.Post("/api/v1/sessions/" + sid + "/depths/" + sid + "/shift",
              guarded([&](const httplib::Request& req, httplib::Response& res) {
                const auto body = parse_body(req);
                if (!body.contains("label") || !body.contains("delta")) {
                  throw ServiceError(400, "bad_request", "shift needs 'label' and 'delta'");
                }
                send_json(res, 201,
                          service.shift_depth(req.matches[1], req.matches[2], field<std::string>(body, "label", ""),
                                              field(body, "delta", 0.0)));
              }));
  server.Post("/api/v1/sessions/" + sid + "/images", guarded([&](const httplib::Request& req, httplib::Response& res) {
                const auto body = parse_body(req);
                if (!body.contains("candidate")) throw ServiceError(400, "bad_request", "images needs 'candidate'");
                send_json(res, 201,
                          service.request_images(req.matches[1], field<std::string>(body, "candidate", ""),
                                                 field(body, "n", 4), seed_field(body)));
              }));
  server.Get("/api/v1/sessions/" + sid + "/assets/" + sid,
             guarded([&](const httplib::Request& req, httplib::Response& res) {
               const auto bytes = service.fetch_asset(req.matches[1], req.matches[2]);
               res.status = 200;
               res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
             }));
}

bool serve(Service& service, const std::string& host, int port, int threads) {
  httplib::Server server;
  server.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(std::max(1, threads))); };
  register_routes(server, service);
  return server.listen(host, port);
}

}  // namespace styland::service
