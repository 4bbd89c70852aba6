#include "biplanar/http_service.hpp"

#include <httplib.h>

#include <functional>

namespace biplanar {

namespace {

ScannerCalibration resolve_calibration(const nlohmann::json& ref, const ScannerCalibration& fallback) {
  if (ref.is_null()) return fallback;
  if (ref.is_object()) return calibration_from_json(ref);
  if (ref.is_string()) return load_calibration(ref.get<std::string>());
  throw Error(ErrorCode::ParseError, "'calibration' must be a profile name, a file path or an object");
}

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, std::string("request body: ") + e.what());
  }
}

void send_json(httplib::Response& res, const nlohmann::json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, {{"code", code}, {"message", message}}, status);
}

// Runs a handler, translating library errors into JSON error responses.
httplib::Server::Handler guarded(std::function<void(const httplib::Request&, httplib::Response&)> fn) {
  return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, http_status(e.code()), to_string(e.code()), e.what());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 400, "ParseError", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "InternalError", e.what());
    }
  };
}

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownSession: return 404;
    case ErrorCode::InsufficientCorrespondences:
    case ErrorCode::DegenerateConfiguration:
    case ErrorCode::DegenerateGeometry:
    case ErrorCode::SingularProjection: return 422;
    case ErrorCode::IoError: return 500;
    default: return 400;
  }
}

struct AnnotationServer::Impl {
  SessionStore& store;
  ServiceOptions options;
  httplib::Server server;

  Impl(SessionStore& s, ServiceOptions o) : store(s), options(std::move(o)) { routes(); }

  void create(const httplib::Request& req, httplib::Response& res) {
    ImageSource frontal, lateral;
    nlohmann::json cal_ref;
    if (req.is_multipart_form_data()) {
      if (!req.has_file("frontal") || !req.has_file("lateral"))
        throw Error(ErrorCode::UnreadableImage, "multipart upload needs 'frontal' and 'lateral' parts");
      frontal.bytes = req.get_file_value("frontal").content;
      lateral.bytes = req.get_file_value("lateral").content;
      if (req.has_file("calibration")) {
        const std::string text = req.get_file_value("calibration").content;
        cal_ref = !text.empty() && text.front() == '{' ? nlohmann::json::parse(text) : nlohmann::json(text);
      }
    } else {
      const auto body = parse_body(req);
      frontal.path = body.at("frontal").get<std::string>();
      lateral.path = body.at("lateral").get<std::string>();
      if (body.contains("calibration")) cal_ref = body.at("calibration");
    }
    const std::string id = store.create(frontal, lateral, resolve_calibration(cal_ref, options.default_calibration));
    send_json(res, {{"id", id}, {"state", store.state(id)}}, 201);
  }

  void routes() {
    server.Post("/sessions", guarded([this](const auto& req, auto& res) { create(req, res); }));

    server.Get("/sessions", guarded([this](const auto&, auto& res) { send_json(res, {{"sessions", store.ids()}}); }));

    server.Get(R"(/sessions/([^/]+))",
               guarded([this](const auto& req, auto& res) { send_json(res, store.state(req.matches[1])); }));

    server.Get(R"(/sessions/([^/]+)/images/([^/]+))", guarded([this](const auto& req, auto& res) {
                 const bool preview = req.get_param_value("variant") == "preview";
                 const int max_side = req.has_param("max") ? std::stoi(req.get_param_value("max")) : 1024;
                 auto payload = store.image(req.matches[1], parse_view(req.matches[2].str()), preview, max_side);
                 res.set_content(std::move(payload.body), payload.content_type);
               }));

    server.Put(R"(/sessions/([^/]+)/landmarks/([^/]+)/([^/]+))", guarded([this](const auto& req, auto& res) {
                 const auto body = parse_body(req);
                 if (!body.contains("u") || !body.contains("v") || !body["u"].is_number() || !body["v"].is_number())
                   throw Error(ErrorCode::ParseError, "placement body needs numeric 'u' and 'v'");
                 send_json(res, store.place(req.matches[1], req.matches[2], parse_view(req.matches[3].str()),
                                            body["u"].template get<double>(), body["v"].template get<double>(),
                                            body.value("client_timestamp", std::string())));
               }));

    server.Delete(R"(/sessions/([^/]+)/landmarks/([^/]+)/([^/]+))", guarded([this](const auto& req, auto& res) {
                    send_json(res, store.remove(req.matches[1], req.matches[2], parse_view(req.matches[3].str())));
                  }));
    server.Delete(R"(/sessions/([^/]+)/landmarks/([^/]+))", guarded([this](const auto& req, auto& res) {
                    send_json(res, store.remove(req.matches[1], req.matches[2], std::nullopt));
                  }));

    server.Get(R"(/sessions/([^/]+)/export)", guarded([this](const auto& req, auto& res) {
                 const std::string format = req.has_param("format") ? req.get_param_value("format") : "landmarks";
                 auto payload = store.export_session(req.matches[1], format);
                 res.set_content(std::move(payload.body), payload.content_type);
               }));

    server.Post(R"(/sessions/([^/]+)/fit)", guarded([this](const auto& req, auto& res) {
                  send_json(res, store.fit(req.matches[1], req.body));
                }));

    if (!options.ui_dir.empty() && std::filesystem::is_directory(options.ui_dir))
      server.set_mount_point("/", options.ui_dir.string());
  }
};

AnnotationServer::AnnotationServer(SessionStore& store, ServiceOptions options)
    : impl_(std::make_unique<Impl>(store, std::move(options))) {}

AnnotationServer::~AnnotationServer() = default;

int AnnotationServer::bind() {
  const auto& o = impl_->options;
  if (o.port == 0) {
    const int port = impl_->server.bind_to_any_port(o.host);
    if (port < 0) throw Error(ErrorCode::IoError, "cannot bind " + o.host);
    return port;
  }
  if (!impl_->server.bind_to_port(o.host, o.port))
    throw Error(ErrorCode::IoError, "cannot bind " + o.host + ":" + std::to_string(o.port));
  return o.port;
}

void AnnotationServer::serve() { impl_->server.listen_after_bind(); }

void AnnotationServer::stop() { impl_->server.stop(); }

}  // namespace biplanar
