#include <doctest.h>

#include <thread>

#include "biplanar/error.hpp"
#include "biplanar/http_service.hpp"
#include "biplanar/image_io.hpp"
#include "biplanar/session.hpp"
#include "support.hpp"

// After Eigen: <resolv.h> defines _res.
#include <httplib.h>

using namespace biplanar;

namespace {

const ScannerCalibration kCal = hss_default();

std::string blank_pgm(int cols, int rows) {
  GrayImage g{rows, cols, 16, std::vector<std::uint16_t>(static_cast<std::size_t>(rows) * cols, 1000)};
  return encode_pgm(g);
}

ImageSource bytes(std::string b) { return {std::move(b), {}}; }

std::string new_session(SessionStore& store, int rows = 400) {
  return store.create(bytes(blank_pgm(1896, rows)), bytes(blank_pgm(1764, rows)), kCal);
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected biplanar::Error");
  return ErrorCode::IoError;
}

// Runs an AnnotationServer on an ephemeral loopback port for one test.
struct LiveServer {
  SessionStore& store;
  AnnotationServer server;
  int port;
  std::thread thread;

  explicit LiveServer(SessionStore& s) : store(s), server(s, {"127.0.0.1", 0, {}, hss_default()}), port(server.bind()) {
    thread = std::thread([this] { server.serve(); });
  }
  ~LiveServer() {
    server.stop();
    thread.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(10);
    return c;
  }
};

}  // namespace

TEST_CASE("session creation") {
  const auto dir = testing_support::scratch_dir("service_create");
  SessionStore store(dir);

  const auto id = store.create(bytes(blank_pgm(1896, 2000)), bytes(blank_pgm(1764, 2000)), kCal);
  const auto state = store.state(id);
  CHECK(state["id"] == id);
  CHECK(state["images"]["frontal"]["rows"] == 2000);
  CHECK(state["images"]["lateral"]["cols"] == 1764);
  CHECK(state["calibration"]["rows"] == 2000);
  CHECK(state["landmarks"].empty());
  CHECK(store.ids() == std::vector<std::string>{id});

  CHECK(code_of([&] { store.create(bytes(blank_pgm(1896, 2000)), bytes(blank_pgm(1764, 1999)), kCal); }) ==
        ErrorCode::ImageMismatch);
  CHECK(code_of([&] { store.create(bytes(blank_pgm(1895, 100)), bytes(blank_pgm(1764, 100)), kCal); }) ==
        ErrorCode::ImageMismatch);
  CHECK(code_of([&] { store.create(bytes("garbage"), bytes(blank_pgm(1764, 100)), kCal); }) ==
        ErrorCode::UnreadableImage);
  CHECK(code_of([&] { store.state("nope"); }) == ErrorCode::UnknownSession);
  CHECK(store.ids().size() == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("placements, guidance and reconstruction") {
  const auto dir = testing_support::scratch_dir("service_place");
  SessionStore store(dir);
  const auto id = new_session(store);

  const auto first = store.place(id, "T1", View::Frontal, 947.5, 0);
  CHECK(first["guidance"]["view"] == "lateral");
  CHECK(first["guidance"]["row"] == 0.0);
  CHECK(first["landmark"]["reconstruction"].is_null());

  const auto second = store.place(id, "T1", View::Lateral, 881.5, 0);
  const auto& point = second["landmark"]["reconstruction"]["point"];
  CHECK(point["x"] == 0.0);
  CHECK(point["y"] == 0.0);
  CHECK(point["z"] == 0.0);

  // A pair synthesized from a known 3D point.
  const WorldPoint p{-31.25, 47.5, -52.0};
  const auto f = project_frontal(p, kCal), l = project_lateral(p, kCal);
  store.place(id, "L2", View::Frontal, f.u, f.v);
  const auto r = store.place(id, "L2", View::Lateral, l.u, l.v);
  const auto& q = r["landmark"]["reconstruction"]["point"];
  const WorldPoint got{q["x"].get<double>(), q["y"].get<double>(), q["z"].get<double>()};
  CHECK(distance(got, p) < 1e-6);
  CHECK(got == reconstruct({"L2", f, l}, kCal));

  // Guidance always echoes the placed row.
  testing_support::Rng rng(51);
  for (int i = 0; i < 50; ++i) {
    const double v = rng.uniform(0, 399.99);
    const auto g = store.place(id, "g" + std::to_string(i % 5), View::Lateral, rng.uniform(0, 1763), v);
    REQUIRE(g["guidance"]["row"].get<double>() == v);
  }

  CHECK(code_of([&] { store.place(id, "X", View::Frontal, 1896, 10); }) == ErrorCode::OutOfRange);
  CHECK(code_of([&] { store.place(id, "X", View::Lateral, 10, 400); }) == ErrorCode::OutOfRange);
  CHECK(code_of([&] { store.place(id, "X", View::Lateral, -0.1, 10); }) == ErrorCode::OutOfRange);
  CHECK(code_of([&] { store.place("missing", "X", View::Lateral, 1, 1); }) == ErrorCode::UnknownSession);
  std::filesystem::remove_all(dir);
}

TEST_CASE("replacing a placement keeps one and logs both") {
  const auto dir = testing_support::scratch_dir("service_replace");
  SessionStore store(dir);
  const auto id = new_session(store);
  store.place(id, "A", View::Frontal, 100, 50, "t1");
  store.place(id, "A", View::Frontal, 120, 55, "t2");
  const auto state = store.state(id);
  REQUIRE(state["landmarks"].size() == 1);
  CHECK(state["landmarks"][0]["frontal"]["u"] == 120.0);
  int places = 0;
  for (const auto& a : state["audit"]) places += a["action"] == "place";
  CHECK(places == 2);
  CHECK(state["audit"].back()["client_timestamp"] == "t2");
  std::filesystem::remove_all(dir);
}

TEST_CASE("deleting placements") {
  const auto dir = testing_support::scratch_dir("service_delete");
  SessionStore store(dir);
  const auto id = new_session(store);
  store.place(id, "A", View::Frontal, 100, 50);
  store.place(id, "A", View::Lateral, 100, 50);
  const auto partial = store.remove(id, "A", View::Lateral);
  CHECK(partial["landmark"]["lateral"].is_null());
  CHECK(partial["landmark"]["reconstruction"].is_null());
  CHECK(code_of([&] { store.remove(id, "A", View::Lateral); }) == ErrorCode::OutOfRange);
  store.remove(id, "A", std::nullopt);
  CHECK(store.state(id)["landmarks"].empty());
  std::filesystem::remove_all(dir);
}

TEST_CASE("state survives a restart") {
  const auto dir = testing_support::scratch_dir("service_restart");
  nlohmann::json before;
  std::string id;
  {
    SessionStore store(dir);
    id = new_session(store);
    store.place(id, "A", View::Frontal, 100.125, 50.5);
    store.place(id, "A", View::Lateral, 333.3333333333333, 49.75);
    store.place(id, "B", View::Frontal, 1.0 / 3.0, 2.0 / 7.0);
    before = store.state(id);
  }
  SessionStore reopened(dir);
  CHECK(reopened.ids() == std::vector<std::string>{id});
  CHECK(reopened.state(id) == before);
  CHECK_FALSE(std::filesystem::exists(dir / id / "session.json.tmp"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("exports and fitting") {
  const auto dir = testing_support::scratch_dir("service_export");
  SessionStore store(dir);
  const auto id = new_session(store, 800);
  const auto model = testing_support::vertebra_model();
  const RigidTransform pose{axis_angle(Eigen::Vector3d::UnitZ(), 0.3), Eigen::Vector3d(5, -8, -70)};
  const auto placed = testing_support::transformed(model, pose);
  for (const auto& lm : placed.entries()) {
    const auto f = project_frontal(lm.point, kCal), l = project_lateral(lm.point, kCal);
    store.place(id, lm.label, View::Frontal, f.u, f.v);
    store.place(id, lm.label, View::Lateral, l.u, l.v);
  }
  store.place(id, "orphan", View::Frontal, 10, 10);

  const auto pairs = store.export_session(id, "landmarks");
  CHECK(pairs.content_type == "text/csv");
  const auto parsed = pairs_from_csv(parse_csv(pairs.body));
  CHECK(parsed.pairs.size() == 6);
  CHECK(parsed.incomplete == std::vector<std::string>{"orphan"});

  const auto points = landmarks_from_csv(parse_csv(store.export_session(id, "points").body));
  REQUIRE(points.size() == 6);
  for (const auto& lm : points.entries()) CHECK(distance(lm.point, *placed.find(lm.label)) < 1e-9);

  const auto scene = nlohmann::json::parse(store.export_session(id, "scene").body);
  CHECK(scene["landmarks"].size() == 6);
  CHECK(scene["images"]["frontal"]["rows"] == 800);

  std::ostringstream model_csv;
  write_landmarks_csv(model_csv, model);
  const auto fit = store.fit(id, model_csv.str());
  CHECK(fit["rms"].get<double>() < 1e-9);
  const auto t = rigid_from_json(fit["transform"]);
  CHECK((t.rotation - pose.rotation).norm() < 1e-9);

  CHECK(code_of([&] { store.export_session(id, "xml"); }) == ErrorCode::InvalidRequest);
  CHECK(store.image(id, View::Frontal, false).body == blank_pgm(1896, 800));
  const auto preview = decode_image(store.image(id, View::Lateral, true, 256).body);
  CHECK(preview.bit_depth == 8);
  CHECK(std::max(preview.rows, preview.cols) <= 256);
  std::filesystem::remove_all(dir);
}

TEST_CASE("concurrent placements on one session are serialized") {
  const auto dir = testing_support::scratch_dir("service_concurrent");
  SessionStore store(dir);
  const auto id = new_session(store);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&, t] {
      for (int i = 0; i < 10; ++i) store.place(id, "t" + std::to_string(t) + "_" + std::to_string(i), View::Frontal, t, i);
    });
  for (auto& th : threads) th.join();
  CHECK(store.state(id)["landmarks"].size() == 40);
  SessionStore reopened(dir);
  CHECK(reopened.state(id)["landmarks"].size() == 40);
  std::filesystem::remove_all(dir);
}

TEST_CASE("HTTP API") {
  const auto dir = testing_support::scratch_dir("service_http");
  SessionStore store(dir);
  LiveServer live(store);
  auto client = live.client();

  httplib::MultipartFormDataItems upload = {
      {"frontal", blank_pgm(1896, 300), "frontal.pgm", "image/x-portable-graymap"},
      {"lateral", blank_pgm(1764, 300), "lateral.pgm", "image/x-portable-graymap"},
      {"calibration", "hss-default", "", "text/plain"},
  };
  auto created = client.Post("/sessions", upload);
  REQUIRE(created);
  REQUIRE(created->status == 201);
  const auto id = nlohmann::json::parse(created->body)["id"].get<std::string>();

  auto list = client.Get("/sessions");
  REQUIRE(list);
  CHECK(nlohmann::json::parse(list->body)["sessions"] == nlohmann::json::array({id}));

  auto placed = client.Put("/sessions/" + id + "/landmarks/T7/frontal", R"({"u": 947.5, "v": 120.25})",
                           "application/json");
  REQUIRE(placed);
  CHECK(placed->status == 200);
  CHECK(nlohmann::json::parse(placed->body)["guidance"]["row"] == 120.25);

  const WorldPoint p{12.5, -40, -21.569};
  const auto f = project_frontal(p, kCal), l = project_lateral(p, kCal);
  client.Put("/sessions/" + id + "/landmarks/T8/frontal", nlohmann::json{{"u", f.u}, {"v", f.v}}.dump(),
             "application/json");
  auto done = client.Put("/sessions/" + id + "/landmarks/T8/lateral", nlohmann::json{{"u", l.u}, {"v", l.v}}.dump(),
                         "application/json");
  REQUIRE(done);
  const auto q = nlohmann::json::parse(done->body)["landmark"]["reconstruction"]["point"];
  auto cal = kCal;
  cal.rows = 300;
  const auto expected = reconstruct({"T8", f, l}, cal);
  CHECK(q["x"].get<double>() == expected.x);
  CHECK(q["y"].get<double>() == expected.y);
  CHECK(q["z"].get<double>() == expected.z);

  auto state = client.Get("/sessions/" + id);
  REQUIRE(state);
  CHECK(nlohmann::json::parse(state->body) == store.state(id));

  auto bad = client.Put("/sessions/" + id + "/landmarks/T9/frontal", R"({"u": -5, "v": 1})", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(nlohmann::json::parse(bad->body)["code"] == "OutOfRange");

  auto missing = client.Get("/sessions/deadbeef");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  auto mismatch = client.Post("/sessions", httplib::MultipartFormDataItems{
                                               {"frontal", blank_pgm(1896, 20), "f.pgm", ""},
                                               {"lateral", blank_pgm(1764, 19), "l.pgm", ""},
                                           });
  REQUIRE(mismatch);
  CHECK(mismatch->status == 400);
  CHECK(nlohmann::json::parse(mismatch->body)["code"] == "ImageMismatch");

  auto csv = client.Get("/sessions/" + id + "/export?format=landmarks");
  REQUIRE(csv);
  CHECK(csv->get_header_value("Content-Type") == "text/csv");
  CHECK(csv->body.find("T8,lateral") != std::string::npos);

  auto image = client.Get("/sessions/" + id + "/images/lateral");
  REQUIRE(image);
  CHECK(decode_image(image->body).cols == 1764);

  auto removed = client.Delete("/sessions/" + id + "/landmarks/T7");
  REQUIRE(removed);
  CHECK(removed->status == 200);
  auto fit = client.Post("/sessions/" + id + "/fit", "label,x,y,z\nT8,0,0,0\n", "text/csv");
  REQUIRE(fit);
  CHECK(fit->status == 422);
  CHECK(nlohmann::json::parse(fit->body)["code"] == "InsufficientCorrespondences");
  std::filesystem::remove_all(dir);
}

TEST_CASE("HTTP status mapping") {
  CHECK(http_status(ErrorCode::UnknownSession) == 404);
  CHECK(http_status(ErrorCode::DegenerateConfiguration) == 422);
  CHECK(http_status(ErrorCode::ParseError) == 400);
  CHECK(http_status(ErrorCode::IoError) == 500);
}
