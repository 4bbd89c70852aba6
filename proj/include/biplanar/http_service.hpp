#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "biplanar/error.hpp"
#include "biplanar/session.hpp"

namespace biplanar {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;              // 0 binds an ephemeral port
  std::filesystem::path ui_dir; // served at / when it exists
  ScannerCalibration default_calibration = hss_default();  // when a create request names none
};

/// HTTP front end for a SessionStore.
///
///   POST   /sessions                              create (JSON paths or multipart upload)
///   GET    /sessions                              list ids
///   GET    /sessions/{id}                         full state
///   GET    /sessions/{id}/images/{view}           original image; ?variant=preview for 8-bit PNG
///   PUT    /sessions/{id}/landmarks/{label}/{view}  body {"u", "v", "client_timestamp"?}
///   DELETE /sessions/{id}/landmarks/{label}[/{view}]
///   GET    /sessions/{id}/export?format=landmarks|points|scene
///   POST   /sessions/{id}/fit                     body: model CSV (label,x,y,z)
///
/// Errors are JSON {"code", "message"}.
class AnnotationServer {
 public:
  AnnotationServer(SessionStore& store, ServiceOptions options);
  ~AnnotationServer();

  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  /// Binds the socket; returns the bound port. Throws IoError.
  int bind();
  /// Blocks serving requests until `stop()`.
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// HTTP status used for a library error code.
int http_status(ErrorCode code);

}  // namespace biplanar
