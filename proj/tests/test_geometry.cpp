#include <doctest.h>

#include <Eigen/Dense>

#include "biplanar/error.hpp"
#include "biplanar/geometry.hpp"
#include "support.hpp"

using namespace biplanar;
using testing_support::Rng;

namespace {

const ScannerCalibration kCal = hss_default();

// Frontal projection by explicit line construction: emitter at (-f, 0, z),
// intersect the emitter->p line with the x = 0 plane, convert to pixels.
double oracle_frontal_u(const WorldPoint& p, const ScannerCalibration& cal) {
  const Eigen::Vector3d e(-cal.f_frontal, 0, p.z);
  const Eigen::Vector3d d = Eigen::Vector3d(p.x, p.y, p.z) - e;
  const double t = -e.x() / d.x();
  const Eigen::Vector3d hit = e + t * d;
  return cal.cols_frontal / 2.0 + hit.y() / cal.pitch_frontal;
}

double oracle_lateral_u(const WorldPoint& p, const ScannerCalibration& cal) {
  const Eigen::Vector3d e(0, -cal.f_lateral, p.z);
  const Eigen::Vector3d d = Eigen::Vector3d(p.x, p.y, p.z) - e;
  const double t = -e.y() / d.y();
  const Eigen::Vector3d hit = e + t * d;
  return cal.cols_lateral / 2.0 - hit.x() / cal.pitch_lateral;
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

}  // namespace

TEST_CASE("frontal projection examples") {
  const auto a = project_frontal({0, 0, 0}, kCal);
  CHECK(a.view == View::Frontal);
  CHECK(a.u == 947.5);
  CHECK(a.v == 0);

  const WorldPoint p{0, 100, -179.363};
  const auto b = project_frontal(p, kCal);
  CHECK(b.u == doctest::Approx(oracle_frontal_u(p, kCal)).epsilon(1e-14));
  CHECK(b.u == doctest::Approx(947.5 + 100 / 0.179363).epsilon(1e-14));
  CHECK(b.u == doctest::Approx(1505.03).epsilon(1e-5));
  CHECK(b.v == doctest::Approx(1000.0).epsilon(1e-13));

  CHECK(code_of([] { project_frontal({-987, 50, 0}, kCal); }) == ErrorCode::SingularProjection);
  CHECK(code_of([] { project_frontal({-1200, 50, 0}, kCal); }) == ErrorCode::SingularProjection);
}

TEST_CASE("lateral projection examples") {
  const auto a = project_lateral({0, 0, 0}, kCal);
  CHECK(a.view == View::Lateral);
  CHECK(a.u == 881.5);
  CHECK(a.v == 0);

  const WorldPoint p{100, 0, 0};
  const auto b = project_lateral(p, kCal);
  CHECK(b.u == doctest::Approx(oracle_lateral_u(p, kCal)).epsilon(1e-14));
  CHECK(b.u == doctest::Approx(881.5 - 100 / 0.179363).epsilon(1e-14));
  CHECK(b.u == doctest::Approx(323.97).epsilon(1e-5));
  CHECK(b.v == 0);

  CHECK(code_of([] { project_lateral({5, -918, 0}, kCal); }) == ErrorCode::SingularProjection);
}

TEST_CASE("projection matches the line-intersection oracle on random points") {
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const auto p = testing_support::scan_point(rng, kCal);
    CHECK(project_frontal(p, kCal).u == doctest::Approx(oracle_frontal_u(p, kCal)).epsilon(1e-12));
    CHECK(project_lateral(p, kCal).u == doctest::Approx(oracle_lateral_u(p, kCal)).epsilon(1e-12));
  }
}

TEST_CASE("homogeneous frontal form") {
  const auto a = project_homogeneous_frontal({0, 0, 42}, kCal);
  CHECK(a.u_h == 0);
  CHECK(a.w_h == 987);
  const auto b = project_homogeneous_frontal({0, 100, -3}, kCal);
  CHECK(b.u_h == 98700);
  CHECK(b.w_h == 987);

  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const auto p = testing_support::scan_point(rng, kCal);
    const auto h = project_homogeneous_frontal(p, kCal);
    const double u = kCal.cols_frontal / 2.0 + (h.u_h / h.w_h) / kCal.pitch_frontal;
    CHECK(u == doctest::Approx(project_frontal(p, kCal).u).epsilon(1e-12));
  }
}

TEST_CASE("pixel to isocenter plane") {
  CHECK(pixel_to_isocenter_plane({View::Frontal, 947.5, 0}, kCal) == 0);
  CHECK(pixel_to_isocenter_plane({View::Frontal, 1047.5, 0}, kCal) == doctest::Approx(17.9363).epsilon(1e-12));
  CHECK(pixel_to_isocenter_plane({View::Lateral, 781.5, 0}, kCal) == doctest::Approx(17.9363).epsilon(1e-12));

  const auto q = isocenter_point({View::Lateral, 781.5, 10}, kCal);
  CHECK(q.x == doctest::Approx(17.9363));
  CHECK(q.y == 0);
  CHECK(q.z == doctest::Approx(-1.79363));
}

TEST_CASE("reconstruction examples") {
  const auto o = reconstruct({"o", {View::Frontal, 947.5, 0}, {View::Lateral, 881.5, 0}}, kCal);
  CHECK(o.x == 0);
  CHECK(o.y == 0);
  CHECK(o.z == 0);

  const auto avg = reconstruct({"a", {View::Frontal, 947.5, 10}, {View::Lateral, 881.5, 20}}, kCal);
  CHECK(avg.z == kCal.z_start - 15 * kCal.pitch_vertical);
}

TEST_CASE("round trip: reconstruct(project(p)) == p") {
  Rng rng(13);
  for (auto z_start : {0.0, 350.0, -80.0}) {
    auto cal = kCal;
    cal.z_start = z_start;
    for (int i = 0; i < 3000; ++i) {
      const auto p = testing_support::scan_point(rng, cal);
      const StereoPair pair{"p", project_frontal(p, cal), project_lateral(p, cal)};
      const auto r = reconstruct(pair, cal);
      REQUIRE(distance(r, p) < 1e-9);
    }
  }
}

TEST_CASE("reconstruction agrees with the closest-approach oracle") {
  Rng rng(14);
  for (int i = 0; i < 1000; ++i) {
    const StereoPair pair{"r",
                          {View::Frontal, rng.uniform(0, 1895), rng.uniform(0, 8000)},
                          {View::Lateral, rng.uniform(0, 1763), rng.uniform(0, 8000)}};
    const auto r = reconstruct(pair, kCal);
    const Eigen::Vector3d o = testing_support::closest_approach_midpoint(pair, kCal);
    REQUIRE((Eigen::Vector3d(r.x, r.y, r.z) - o).norm() < 1e-9);
  }
}

TEST_CASE("near-parallel rays are degenerate") {
  // Both rays pointing along the same direction: y_f * x_l = f_f * f_l.
  auto cal = kCal;
  const double y_f = 900, x_l = cal.f_frontal * cal.f_lateral / y_f;
  const StereoPair pair{"inf",
                        {View::Frontal, cal.cols_frontal / 2.0 + y_f / cal.pitch_frontal, 0},
                        {View::Lateral, cal.cols_lateral / 2.0 - x_l / cal.pitch_lateral, 0}};
  CHECK(code_of([&] { reconstruct(pair, cal); }) == ErrorCode::DegenerateGeometry);
}

TEST_CASE("epipolar row identity") {
  CHECK(epipolar_row({View::Frontal, 500, 1234.5}) == 1234.5);
  CHECK(epipolar_row({View::Lateral, 0, 0}) == 0);
  Rng rng(15);
  for (int i = 0; i < 5000; ++i) {
    auto cal = kCal;
    cal.z_start = rng.uniform(-500, 500);
    const auto p = testing_support::scan_point(rng, cal);
    REQUIRE(epipolar_row(project_frontal(p, cal)) == project_lateral(p, cal).v);
  }
}

TEST_CASE("row mismatch diagnostics") {
  const StereoPair close{"c", {View::Frontal, 10, 100}, {View::Lateral, 10, 104}};
  const StereoPair far{"f", {View::Frontal, 10, 100}, {View::Lateral, 10, 106}};
  CHECK(row_mismatch(close) == 4);
  CHECK_FALSE(row_mismatch_warning(close));
  CHECK(row_mismatch_warning(far));
}

TEST_CASE("isocenter planes are true scale") {
  Rng rng(16);
  for (int i = 0; i < 2000; ++i) {
    const double y = rng.uniform(-170, 170), x = rng.uniform(-150, 150), z = rng.uniform(-1000, 0);
    CHECK(project_frontal({0, y, z}, kCal).u - kCal.cols_frontal / 2.0 ==
          doctest::Approx(y / kCal.pitch_frontal).epsilon(1e-12));
    CHECK(kCal.cols_lateral / 2.0 - project_lateral({x, 0, z}, kCal).u ==
          doctest::Approx(x / kCal.pitch_lateral).epsilon(1e-12));
  }
}

TEST_CASE("horizontal magnification shrinks toward the detector") {
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    const double y = rng.uniform(1, 200), z = rng.uniform(-800, 0);
    double previous = std::numeric_limits<double>::infinity();
    for (double x = -600; x <= 250; x += 17) {
      const double off = std::abs(project_frontal({x, y, z}, kCal).u - kCal.cols_frontal / 2.0);
      REQUIRE(off < previous);
      previous = off;
    }
  }
}

TEST_CASE("rows depend only on height") {
  Rng rng(18);
  for (int i = 0; i < 1000; ++i) {
    const double z = rng.uniform(-1500, 0);
    const auto a = testing_support::scan_point(rng, kCal);
    const auto b = testing_support::scan_point(rng, kCal);
    REQUIRE(project_frontal({a.x, a.y, z}, kCal).v == project_frontal({b.x, b.y, z}, kCal).v);
    REQUIRE(project_lateral({a.x, a.y, z}, kCal).v == project_lateral({b.x, b.y, z}, kCal).v);
  }
}

TEST_CASE("orientation convention") {
  CHECK(project_frontal({0, 10, 0}, kCal).u > project_frontal({0, 0, 0}, kCal).u);
  CHECK(project_lateral({10, 0, 0}, kCal).u < project_lateral({0, 0, 0}, kCal).u);
  CHECK(project_frontal({0, 0, -10}, kCal).v > 0);
}

TEST_CASE("back-projected rays") {
  const auto central = backproject_ray({View::Frontal, 947.5, 0}, kCal);
  CHECK(central.origin == WorldPoint{-987, 0, 0});
  CHECK(central.direction.x == doctest::Approx(1));
  CHECK(central.direction.y == 0);
  CHECK(central.direction.z == 0);

  const auto off = backproject_ray({View::Frontal, 1047.5, 0}, kCal);
  const double n = std::hypot(987.0, 17.9363);
  CHECK(off.direction.x == doctest::Approx(987 / n).epsilon(1e-12));
  CHECK(off.direction.y == doctest::Approx(17.9363 / n).epsilon(1e-12));

  const auto lat = backproject_ray({View::Lateral, 881.5, 3}, kCal);
  CHECK(lat.origin.y == -918);
  CHECK(lat.direction.y == doctest::Approx(1));
  CHECK(distance_to_detector(lat, View::Lateral, kCal) == doctest::Approx(1300));
  CHECK(emitter_position(View::Lateral, 3, kCal) == lat.origin);
}

TEST_CASE("every point on a back-projected ray reprojects to its pixel") {
  Rng rng(19);
  for (int i = 0; i < 1000; ++i) {
    const View view = rng.integer(0, 1) ? View::Frontal : View::Lateral;
    const int cols = view == View::Frontal ? kCal.cols_frontal : kCal.cols_lateral;
    const ImagePoint ip{view, rng.uniform(0, cols), rng.uniform(0, 8000)};
    const auto ray = backproject_ray(ip, kCal);
    REQUIRE(norm(ray.direction) == doctest::Approx(1).epsilon(1e-12));
    REQUIRE(ray.direction.z == 0);
    const double reach = distance_to_detector(ray, view, kCal);
    for (int k = 1; k <= 5; ++k) {
      const auto q = ray.at(reach * k / 6.0);
      const auto back = project(q, view, kCal);
      REQUIRE(back.u == doctest::Approx(ip.u).epsilon(1e-12));
      REQUIRE(std::abs(back.u - ip.u) < 1e-9);
      REQUIRE(back.v == doctest::Approx(ip.v).epsilon(1e-14));
    }
  }
}

TEST_CASE("pinhole projection magnifies vertically") {
  const PinholeCamera cam{View::Frontal, -400};
  CHECK(cam.source(kCal) == WorldPoint{-987, 0, -400});

  const auto axis = project_pinhole({0, 0, -400}, cam, kCal);
  const auto slot_axis = project_frontal({0, 0, -400}, kCal);
  CHECK(axis.u == slot_axis.u);
  CHECK(axis.v == doctest::Approx(slot_axis.v).epsilon(1e-14));

  const auto up = project_pinhole({0, 0, -300}, cam, kCal);
  CHECK(axis.v - up.v == doctest::Approx(557.53).epsilon(1e-5));

  const auto closer = project_pinhole({-200, 0, -300}, cam, kCal);
  CHECK(std::abs(closer.v - axis.v) > std::abs(up.v - axis.v));

  CHECK(code_of([&] { project_pinhole({-987, 0, 0}, cam, kCal); }) == ErrorCode::SingularProjection);

  const auto ray = pinhole_ray(up, cam, kCal);
  const auto q = ray.at(500);
  const auto back = project_pinhole(q, cam, kCal);
  CHECK(back.u == doctest::Approx(up.u).epsilon(1e-12));
  CHECK(back.v == doctest::Approx(up.v).epsilon(1e-12));
}

TEST_CASE("view names") {
  CHECK(parse_view("PA") == View::Frontal);
  CHECK(parse_view("lateral") == View::Lateral);
  CHECK(parse_view("LAT") == View::Lateral);
  CHECK(to_string(View::Frontal) == "frontal");
  CHECK(code_of([] { parse_view("axial"); }) == ErrorCode::ParseError);
}
