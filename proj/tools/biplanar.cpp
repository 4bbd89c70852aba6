// Command-line front end: project, reconstruct, drr, fit, phantom, serve.

#include <CLI11.hpp>

#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "biplanar/calibration.hpp"
#include "biplanar/csv.hpp"
#include "biplanar/error.hpp"
#include "biplanar/geometry.hpp"
#include "biplanar/http_service.hpp"
#include "biplanar/image_io.hpp"
#include "biplanar/landmarks.hpp"
#include "biplanar/mesh.hpp"
#include "biplanar/render.hpp"
#include "biplanar/rigid.hpp"
#include "biplanar/session.hpp"
#include "biplanar/volume_io.hpp"

#ifndef BIPLANAR_VERSION
#define BIPLANAR_VERSION "0.0.0"
#endif

namespace bp = biplanar;
namespace fs = std::filesystem;

namespace {

constexpr const char* kCalibrationEnv = "BIPLANAR_CALIBRATION";

struct Globals {
  std::string calibration;
  std::optional<double> z_start;
  std::optional<int> rows;
  bool partial_ok = false;
  int verbosity = 0;
};

bp::ScannerCalibration resolve_calibration(const Globals& g) {
  std::string ref = g.calibration;
  if (ref.empty()) {
    const char* env = std::getenv(kCalibrationEnv);
    ref = env && *env ? env : std::string(bp::kHssDefaultName);
  }
  bp::ScannerCalibration cal = bp::load_calibration(ref);
  if (g.z_start) cal.z_start = *g.z_start;
  if (g.rows) cal.rows = *g.rows;
  bp::validate(cal);
  return cal;
}

bp::CsvTable read_table(const std::string& path) {
  if (path == "-") return bp::read_csv(std::cin);
  return bp::read_csv_file(path);
}

// Writes to the file, or to stdout for "-" / empty.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw bp::Error(bp::ErrorCode::IoError, "cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

int finish(std::size_t failures, const Globals& g) {
  if (failures == 0) return 0;
  std::cerr << failures << " record(s) failed\n";
  return g.partial_ok ? 0 : 1;
}

int cmd_project(const Globals& g, const std::string& input, const std::string& output) {
  const auto cal = resolve_calibration(g);
  const auto table = read_table(input);
  const int c_label = table.require_column("label");
  const int c_x = table.require_column("x"), c_y = table.require_column("y"), c_z = table.require_column("z");

  Output out(output);
  auto& os = out.stream();
  os << "label,view,u,v,status\n";
  std::size_t failures = 0;
  for (const auto& row : table.rows) {
    const bp::WorldPoint p{bp::parse_number(row.fields[c_x], row.line, "x"), bp::parse_number(row.fields[c_y], row.line, "y"),
                           bp::parse_number(row.fields[c_z], row.line, "z")};
    for (bp::View view : {bp::View::Frontal, bp::View::Lateral}) {
      os << row.fields[c_label] << ',' << bp::to_string(view) << ',';
      try {
        const auto ip = bp::project(p, view, cal);
        os << bp::format_number(ip.u) << ',' << bp::format_number(ip.v) << ",ok\n";
      } catch (const bp::Error& e) {
        if (e.code() != bp::ErrorCode::SingularProjection) throw;
        os << ",,singular\n";
        ++failures;
        if (g.verbosity > 0) std::cerr << "line " << row.line << ": " << e.what() << '\n';
      }
    }
  }
  return finish(failures, g);
}

int cmd_reconstruct(const Globals& g, const std::string& input, const std::string& output) {
  const auto cal = resolve_calibration(g);
  auto table = read_table(input);
  // Rows marked as failed by `project` carry no coordinates.
  if (const int c_status = table.column("status"); c_status >= 0) {
    std::erase_if(table.rows, [&](const auto& r) { return r.fields[c_status] != "ok"; });
  }
  const auto input_pairs = bp::pairs_from_csv(table);
  const auto result = bp::reconstruct_set(input_pairs.pairs, cal);

  Output out(output);
  auto& os = out.stream();
  os << "label,x,y,z,row_mismatch,residual,status\n";
  for (const auto& d : result.diagnostics) {
    if (d.ok) {
      os << d.label << ',' << bp::format_number(d.point->x) << ',' << bp::format_number(d.point->y) << ','
         << bp::format_number(d.point->z) << ',' << bp::format_number(d.row_mismatch) << ','
         << bp::format_number(d.residual_px) << ",ok\n";
    } else {
      os << d.label << ",,,," << bp::format_number(d.row_mismatch) << ",,degenerate\n";
      std::cerr << d.label << ": " << d.error << '\n';
    }
    if (d.row_warning) {
      std::cerr << "warning: '" << d.label << "' rows differ by " << d.row_mismatch << " px (> "
                << bp::kRowMismatchWarningPx << "); check the labeling\n";
    }
  }
  for (const auto& label : input_pairs.incomplete) {
    os << label << ",,,,,,incomplete\n";
    std::cerr << label << ": placed in only one view\n";
  }
  return finish(result.failures() + input_pairs.incomplete.size(), g);
}

struct DrrArgs {
  std::string volume;
  std::string output;
  std::string geometry = "slot";
  std::string view = "frontal";
  std::string tf = "identity";
  std::string format = "pgm";
  std::optional<double> step;
  std::optional<double> source_z;
  std::optional<int> first_row;
  std::optional<int> row_count;
  double threshold = 0;
  double level = 0.5;
  double width = 1;
  double gamma = 1;
  bool invert = false;
  int threads = 0;
};

int cmd_drr(const Globals& g, const DrrArgs& a) {
  const auto cal = resolve_calibration(g);
  const bp::Volume vol = bp::load_volume(a.volume);
  auto req = bp::default_request(vol, bp::parse_geometry(a.geometry), bp::parse_view(a.view), cal);
  if (a.step) req.step = *a.step;
  if (a.source_z) req.source_z = *a.source_z;
  if (a.first_row) req.first_row = *a.first_row;
  if (a.row_count) req.row_count = *a.row_count;
  req.cal.rows = std::max(req.cal.rows, req.first_row + req.row_count);
  req.tf.mode = bp::parse_transfer_mode(a.tf);
  req.tf.threshold = a.threshold;
  req.tf.level = a.level;
  req.tf.width = a.width;

  const auto t0 = std::chrono::steady_clock::now();
  auto img = bp::render(req, vol, a.threads);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  img.mapping.gamma = a.gamma;
  img.mapping.invert = a.invert;

  const auto format = bp::parse_image_format(a.format);
  fs::path out_path = a.output;
  if (!out_path.has_extension()) out_path += std::string(bp::file_extension(format));
  bp::export_image(img, out_path, format);

  nlohmann::json sidecar = {
      {"request", bp::to_json(req)},
      {"volume", a.volume},
      {"image", {{"file", out_path.filename().string()}, {"rows", img.rows}, {"cols", img.cols}, {"first_row", img.first_row}}},
      {"mapping", {{"min", img.mapping.min}, {"max", img.mapping.max}, {"gamma", img.mapping.gamma}, {"invert", img.mapping.invert}}},
      {"version", BIPLANAR_VERSION},
  };
  auto sidecar_path = out_path;
  sidecar_path.replace_extension(".json");
  std::ofstream(sidecar_path) << sidecar.dump(2) << '\n';
  if (g.verbosity > 0) std::cerr << "rendered " << img.rows << "x" << img.cols << " in " << seconds << " s\n";
  return 0;
}

int cmd_fit(const std::string& model_path, const std::string& target_path, const std::string& output,
            const std::string& mesh_in, const std::string& mesh_out) {
  const auto model = bp::landmarks_from_csv(read_table(model_path));
  const auto target = bp::landmarks_from_csv(bp::read_csv_file(target_path));
  const auto fit = bp::fit_rigid(model, target);

  nlohmann::json j = {{"transform", bp::to_json(fit.transform)}, {"rms", fit.rms}, {"labels", fit.labels}};
  Output out(output);
  out.stream() << j.dump(2) << '\n';
  std::cerr << "rms " << fit.rms << " mm over " << fit.labels.size() << " landmarks\n";

  if (!mesh_in.empty()) {
    const auto moved = bp::apply_transform(fit.transform, bp::read_obj_file(mesh_in));
    std::ofstream obj(mesh_out);
    if (!obj) throw bp::Error(bp::ErrorCode::IoError, "cannot write '" + mesh_out + "'");
    bp::write_obj(obj, {moved});
  }
  return 0;
}

int cmd_phantom(const std::string& spec_path, const std::string& output, const std::string& type) {
  const bp::Volume vol = bp::load_volume(spec_path);
  bp::write_metaimage(vol, output, type == "short" ? bp::ElementType::Int16 : bp::ElementType::Float32);
  return 0;
}

bp::AnnotationServer* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const Globals& g, const bp::ServiceOptions& options, const std::string& sessions) {
  bp::ServiceOptions opts = options;
  opts.default_calibration = resolve_calibration(g);
  bp::SessionStore store(sessions);
  bp::AnnotationServer server(store, opts);
  const int port = server.bind();
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "serving " << store.ids().size() << " session(s) from " << sessions << " on http://" << options.host
            << ':' << port << "/\n";
  server.serve();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Biplanar slot-scanner geometry toolkit"};
  app.set_version_flag("--version", std::string(BIPLANAR_VERSION));
  app.require_subcommand(1);

  Globals g;
  app.add_option("-c,--calibration", g.calibration,
                 std::string("Calibration JSON file or 'hss-default' (default: $") + kCalibrationEnv + " or hss-default)");
  app.add_option("--z-start", g.z_start, "Override the emitter height at row 0 (mm)");
  app.add_option("--rows", g.rows, "Override the number of image rows");
  app.add_flag("--partial-ok", g.partial_ok, "Exit 0 even when individual records fail");
  app.add_flag("-v,--verbose", g.verbosity, "More diagnostics on stderr");

  std::string input, output;
  auto* project = app.add_subcommand("project", "Project 3D points (label,x,y,z CSV) into both views");
  project->add_option("input", input, "Input CSV or '-' for stdin")->required();
  project->add_option("-o,--output", output, "Output CSV (default stdout)");

  auto* reconstruct = app.add_subcommand("reconstruct", "Reconstruct stereo pairs (label,view,u,v CSV) to 3D");
  reconstruct->add_option("input", input, "Input CSV or '-' for stdin")->required();
  reconstruct->add_option("-o,--output", output, "Output CSV (default stdout)");

  DrrArgs drr_args;
  auto* drr = app.add_subcommand("drr", "Render a synthetic radiograph from a volume");
  drr->add_option("volume", drr_args.volume, "MetaImage header (.mhd/.mha) or phantom JSON")->required();
  drr->add_option("-o,--output", drr_args.output, "Output image; the JSON sidecar is written next to it")->required();
  drr->add_option("--geometry", drr_args.geometry, "slot | pinhole")->capture_default_str();
  drr->add_option("--view", drr_args.view, "frontal | lateral")->capture_default_str();
  drr->add_option("--step", drr_args.step, "Integration step in mm (default half the smallest voxel spacing)");
  drr->add_option("--tf", drr_args.tf, "identity | window | highpass")->capture_default_str();
  drr->add_option("--threshold", drr_args.threshold, "highpass threshold")->capture_default_str();
  drr->add_option("--level", drr_args.level, "window level")->capture_default_str();
  drr->add_option("--width", drr_args.width, "window width")->capture_default_str();
  drr->add_option("--source-z", drr_args.source_z, "Pinhole source height in mm (default volume centre)");
  drr->add_option("--first-row", drr_args.first_row, "First detector row (default: row of the volume top)");
  drr->add_option("--row-count", drr_args.row_count, "Number of rows (default: cover the volume)");
  drr->add_option("--threads", drr_args.threads, "Worker threads, 0 for the OpenMP default")->capture_default_str();
  drr->add_option("--format", drr_args.format, "pgm | png (16-bit)")->capture_default_str();
  drr->add_option("--gamma", drr_args.gamma, "Export gamma")->capture_default_str();
  drr->add_flag("--invert", drr_args.invert, "Export dark-bone instead of bright-bone");

  std::string target, mesh_in, mesh_out;
  auto* fit = app.add_subcommand("fit", "Rigidly fit a model landmark CSV onto a target landmark CSV");
  fit->add_option("model", input, "Model CSV (label,x,y,z)")->required();
  fit->add_option("target", target, "Target CSV (label,x,y,z)")->required();
  fit->add_option("-o,--output", output, "Transform JSON (default stdout)");
  fit->add_option("--mesh", mesh_in, "OBJ mesh to move with the fitted transform");
  fit->add_option("--mesh-out", mesh_out, "Where to write the moved mesh")->needs(fit->get_option("--mesh"));

  std::string element_type = "float";
  auto* phantom = app.add_subcommand("phantom", "Write a procedural phantom as MetaImage");
  phantom->add_option("spec", input, "Phantom JSON description")->required();
  phantom->add_option("-o,--output", output, "Output .mhd header (raw data goes next to it)")->required();
  phantom->add_option("--type", element_type, "float | short")->check(CLI::IsMember({"float", "short"}))->capture_default_str();

  bp::ServiceOptions service;
  std::string sessions = "sessions";
  auto* serve = app.add_subcommand("serve", "Run the landmark annotation service");
  serve->add_option("--host", service.host, "Bind address")->capture_default_str();
  serve->add_option("--port", service.port, "Port, 0 for any free port")->capture_default_str();
  serve->add_option("--sessions", sessions, "Session directory")->capture_default_str();
  serve->add_option("--ui-dir", service.ui_dir, "Static UI bundle served at /");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*project) return cmd_project(g, input, output);
    if (*reconstruct) return cmd_reconstruct(g, input, output);
    if (*drr) return cmd_drr(g, drr_args);
    if (*fit) {
      if (!mesh_in.empty() && mesh_out.empty()) throw CLI::RequiredError("--mesh-out");
      return cmd_fit(input, target, output, mesh_in, mesh_out);
    }
    if (*phantom) return cmd_phantom(input, output, element_type);
    if (*serve) return cmd_serve(g, service, sessions);
  } catch (const bp::Error& e) {
    std::cerr << "error [" << bp::to_string(e.code()) << "]: " << e.what() << '\n';
    return 2;
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
