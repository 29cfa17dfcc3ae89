// camctl: command-line front end for building camera-control signals,
// segmenting static/dynamic regions, rendering previews and evaluating paths.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "camctl/camctl.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct GlobalOptions {
  std::uint64_t seed = 0;
  bool seed_given = false;
  unsigned threads = 0;
  bool quiet = false;
};

// Raised for a well-formed run whose outcome must map to a specific code.
struct ExitRequest {
  int code;
  std::string message;
};

void note(const GlobalOptions& g, const std::string& msg) {
  if (!g.quiet) std::cout << msg << '\n';
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) camctl::fail(camctl::ErrorKind::kData, "cannot create directory " + dir + ": " + ec.message());
}

json motion_json(const camctl::RigidMotion& m) {
  json r = json::array();
  for (int i = 0; i < 3; ++i) r.push_back({m.rotation(i, 0), m.rotation(i, 1), m.rotation(i, 2)});
  return {{"R", r}, {"t", {m.translation.x(), m.translation.y(), m.translation.z()}}};
}

// Segmentation flags shared by `segment` and `signal-from-video`.
struct SegmentFlags {
  std::optional<double> epsilon;
  double alpha = 0.15;
  int max_iters = 10;
  double min_static_fraction = 0.10;
  bool allow_degenerate = false;

  void add_to(CLI::App* app) {
    app->add_option("--epsilon", epsilon, "Tolerable summed squared reprojection error per point, px^2 (default 4*T)");
    app->add_option("--alpha", alpha, "Acceptable ratio for re-thresholding, in (0,1)")->capture_default_str();
    app->add_option("--max-iters", max_iters, "Maximum extraction iterations")->capture_default_str();
    app->add_option("--min-static-fraction", min_static_fraction, "Smallest static fraction before giving up")
        ->capture_default_str();
    app->add_flag("--allow-degenerate", allow_degenerate, "Write outputs and exit 0 on a degenerate segmentation");
  }

  camctl::SegmentationConfig config(unsigned threads) const {
    camctl::SegmentationConfig c;
    c.epsilon = epsilon;
    c.alpha = alpha;
    c.max_iterations = max_iters;
    c.min_static_fraction = min_static_fraction;
    c.threads = threads;
    return c;
  }

  json echo(int frames) const {
    return {{"epsilon", epsilon.value_or(4.0 * frames)},
            {"alpha", alpha},
            {"max_iters", max_iters},
            {"min_static_fraction", min_static_fraction}};
  }
};

struct VideoInputs {
  std::string tracks;
  std::string depth_dir;
  std::string intrinsics;

  void add_to(CLI::App* app) {
    app->add_option("--tracks", tracks, "TCT1 track file")->required();
    app->add_option("--depth-dir", depth_dir, "Directory of depth_NNNN.tcd files")->required();
    app->add_option("--intrinsics", intrinsics, "Intrinsics JSON")->required();
  }

  camctl::AssembledField load() const {
    const camctl::Intrinsics k = camctl::read_intrinsics(intrinsics);
    const camctl::Tracks t = camctl::read_tracks(tracks);
    const std::vector<camctl::DepthMap> depths = camctl::read_depth_dir(depth_dir);
    return camctl::assemble_field(depths, t, k);
  }
};

camctl::SegmentationResult run_segmentation(const camctl::TrajectoryField& field, const SegmentFlags& flags,
                                            const GlobalOptions& g) {
  camctl::SegmentationResult seg = camctl::extract_static(field, flags.config(g.threads));
  note(g, "segmentation: " + camctl::to_string(seg.status) + " after " + std::to_string(seg.iterations_used) +
              " iteration(s), static fraction " +
              std::to_string(static_cast<double>(seg.partition.count_static()) / seg.partition.size()));
  return seg;
}

json segmentation_report(const camctl::SegmentationResult& seg, const camctl::AssembledField& assembled,
                         const SegmentFlags& flags, const std::string& command) {
  json frames = json::array();
  for (std::size_t f = 0; f < seg.motions.size(); ++f) {
    json fr = motion_json(seg.motions[f]);
    fr["frame"] = f;
    fr["cost"] = seg.frame_costs.empty() ? 0.0 : seg.frame_costs[f];
    fr["converged"] = seg.frame_converged.empty() ? true : seg.frame_converged[f] != 0;
    frames.push_back(fr);
  }
  return {{"toolkit_version", camctl::kToolkitVersion},
          {"command", command},
          {"parameters", flags.echo(assembled.field.num_frames)},
          {"status", camctl::to_string(seg.status)},
          {"iterations", seg.iterations_used},
          {"eps_max_trace", seg.eps_max_trace},
          {"eps_max_monotone", seg.eps_max_monotone},
          {"static_fraction", static_cast<double>(seg.partition.count_static()) / seg.partition.size()},
          {"unfit_frames", seg.unfit_frames},
          {"warnings", {{"clamped_samples", assembled.clamped_samples}, {"invalid_depth", assembled.invalid_depth}}},
          {"motions", frames}};
}

void check_degenerate(const camctl::SegmentationResult& seg, const SegmentFlags& flags) {
  if (seg.status == camctl::SegmentationStatus::kDegenerate && !flags.allow_degenerate)
    throw ExitRequest{kExitNumerical,
                      "error: degenerate segmentation (static set fell below the minimum); rerun with "
                      "--allow-degenerate to accept it"};
}

// ---- commands --------------------------------------------------------------

void cmd_synth(const GlobalOptions& g, const std::string& scene_file, const std::string& path_file,
               const std::string& out) {
  camctl::SceneSpec spec = camctl::scene_from_json(camctl::read_json(scene_file));
  if (g.seed_given) spec.seed = g.seed;
  const camctl::CameraPath path = camctl::load_path(path_file);
  const camctl::GroundTruth gt = camctl::generate_scene(spec, path);

  ensure_dir(out);
  ensure_dir((fs::path(out) / "depth").string());
  std::vector<camctl::DepthMap> depths(static_cast<std::size_t>(spec.frames));
  camctl::parallel_for(0, depths.size(), g.threads, [&](std::size_t f) {
    depths[f] = camctl::render_depth(spec, gt, static_cast<int>(f));
  });
  for (std::size_t f = 0; f < depths.size(); ++f)
    camctl::write_depth((fs::path(out) / "depth" / camctl::depth_frame_name(static_cast<int>(f))).string(),
                        depths[f]);
  camctl::write_tracks((fs::path(out) / "tracks.tct").string(), gt.tracks);
  camctl::save_path(gt.path, (fs::path(out) / "path.json").string());
  camctl::write_pgm((fs::path(out) / "partition.pgm").string(), camctl::partition_to_pgm(gt.partition));
  camctl::write_ppm((fs::path(out) / "rgb0.ppm").string(), gt.rgb0);
  camctl::write_json((fs::path(out) / "intrinsics.json").string(), camctl::intrinsics_to_json(spec.intrinsics));
  json echo = camctl::scene_to_json(spec);
  echo["toolkit_version"] = camctl::kToolkitVersion;
  camctl::write_json((fs::path(out) / "scene.json").string(), echo);
  camctl::write_json((fs::path(out) / "true_m.json").string(),
                     {{"toolkit_version", camctl::kToolkitVersion}, {"m", gt.true_m.m}});

  // Adjacent-frame correspondences of tracks visible in both frames.
  camctl::CorrespondenceSet pairs(static_cast<std::size_t>(std::max(spec.frames - 1, 0)));
  for (int f = 1; f < spec.frames; ++f) {
    for (std::size_t i = 0; i < gt.tracks.num_points; ++i) {
      const std::size_t a = gt.tracks.index(f - 1, i), b = gt.tracks.index(f, i);
      if (!gt.tracks.visible[a] || !gt.tracks.visible[b]) continue;
      pairs[static_cast<std::size_t>(f - 1)].push_back(
          {{gt.tracks.u[a], gt.tracks.v[a]}, {gt.tracks.u[b], gt.tracks.v[b]}});
    }
  }
  std::ofstream corr(fs::path(out) / "correspondences.txt");
  camctl::write_correspondences(corr, pairs);
  note(g, "synth: wrote " + std::to_string(spec.frames) + " frames to " + out);
}

void cmd_segment(const GlobalOptions& g, const VideoInputs& in, const SegmentFlags& flags, const std::string& out) {
  const camctl::AssembledField assembled = in.load();
  const camctl::SegmentationResult seg = run_segmentation(assembled.field, flags, g);
  ensure_dir(out);
  camctl::write_pgm((fs::path(out) / "mask.pgm").string(), camctl::partition_to_pgm(seg.partition));
  camctl::save_path(camctl::CameraPath{seg.motions}, (fs::path(out) / "motions.json").string());
  camctl::write_json((fs::path(out) / "report.json").string(), segmentation_report(seg, assembled, flags, "segment"));
  check_degenerate(seg, flags);
}

void cmd_signal_from_video(const GlobalOptions& g, const VideoInputs& in, const SegmentFlags& flags,
                           const std::string& out, std::string m_out, bool normalized) {
  const camctl::AssembledField assembled = in.load();
  const camctl::TrajectoryField& field = assembled.field;
  const camctl::SegmentationResult seg = run_segmentation(field, flags, g);
  check_degenerate(seg, flags);

  const camctl::ResidualField residual = camctl::residual_g(field, seg.motions);
  const camctl::MotionStrengthSeries ms = camctl::motion_strength(residual);
  const camctl::TrajectoryChannels traj = camctl::point_trajectory(field, seg.motions, g.threads);
  camctl::ControlTensor tensor = camctl::pack_tensor(traj, ms);
  if (normalized) camctl::normalize_coordinates(tensor);
  camctl::write_tensor(out, tensor);

  if (m_out.empty()) m_out = out + ".m.json";
  json report = segmentation_report(seg, assembled, flags, "signal-from-video");
  report["m"] = ms.m;
  report["empty_pairs"] = ms.empty_pairs;
  report["normalized"] = normalized;
  report["shape"] = {tensor.num_frames, tensor.channels, tensor.height, tensor.width};
  camctl::write_json(m_out, report);
  note(g, "signal-from-video: wrote " + out);
}

void cmd_signal_from_path(const GlobalOptions& g, const std::string& depth_file, const std::string& intr,
                          const std::string& path_file, double strength, bool normalized, const std::string& out) {
  const camctl::DepthMap depth = camctl::read_depth(depth_file);
  const camctl::Intrinsics k = camctl::read_intrinsics(intr);
  const camctl::CameraPath path = camctl::load_path(path_file);
  camctl::ControlTensor tensor = camctl::build_inference_signal(depth, k, path, strength, g.threads);
  if (normalized) camctl::normalize_coordinates(tensor);
  camctl::write_tensor(out, tensor);
  note(g, "signal-from-path: wrote (" + std::to_string(tensor.num_frames) + ", 3, " + std::to_string(tensor.height) +
              ", " + std::to_string(tensor.width) + ") tensor to " + out);
}

void cmd_path(const GlobalOptions& g, const std::string& kind, double magnitude, int frames, const std::string& out) {
  const camctl::CameraPath path = camctl::generate_primitive({camctl::parse_primitive(kind), magnitude, frames});
  camctl::save_path(path, out);
  note(g, "path: wrote " + kind + " with " + std::to_string(frames) + " frames to " + out);
}

void cmd_preview(const GlobalOptions& g, const std::string& rgb, const std::string& depth, const std::string& intr,
                 const std::string& path_file, const std::string& out) {
  camctl::RgbdFrame frame{camctl::read_ppm(rgb), camctl::read_depth(depth), camctl::read_intrinsics(intr)};
  const camctl::CameraPath path = camctl::load_path(path_file);
  const camctl::PreviewFrames pv = camctl::render_preview(frame, path, g.threads);
  ensure_dir(out);
  for (std::size_t f = 0; f < pv.frames.size(); ++f) {
    char name[64];
    std::snprintf(name, sizeof name, "preview_%04zu.ppm", f);
    camctl::write_ppm((fs::path(out) / name).string(), pv.frames[f]);
    std::snprintf(name, sizeof name, "coverage_%04zu.pgm", f);
    camctl::write_pgm((fs::path(out) / name).string(), pv.coverage[f]);
  }
  note(g, "preview: wrote " + std::to_string(pv.frames.size()) + " frames to " + out);
}

void cmd_eval(const GlobalOptions& g, const std::string& gt_file, const std::string& est_file,
              const std::string& corr_file, const std::string& out) {
  const camctl::CameraPath gt = camctl::load_path(gt_file);
  const camctl::CameraPath est = camctl::load_path(est_file);
  json report{{"toolkit_version", camctl::kToolkitVersion},
              {"definition", "toolkit definition"},
              {"frames", gt.size()},
              {"rot_err", camctl::rot_err(gt, est)},
              {"trans_err", camctl::trans_err(gt, est)}};
  if (!corr_file.empty()) report["msc"] = camctl::msc(camctl::read_correspondences(corr_file));
  camctl::write_json(out, report);
  note(g, "eval: " + report.dump());
}

int exit_code_for(camctl::ErrorKind kind) {
  switch (kind) {
    case camctl::ErrorKind::kInvalidArgument: return kExitUsage;
    case camctl::ErrorKind::kData:
    case camctl::ErrorKind::kFormat: return kExitData;
    case camctl::ErrorKind::kNumerical: return kExitNumerical;
  }
  return kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Camera-control signal toolkit"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--seed", g.seed, "Seed for every random draw (overrides scene seeds)");
  app.add_option("--threads", g.threads, "Worker threads, 0 = hardware concurrency")->capture_default_str();
  app.add_flag("--quiet", g.quiet, "Suppress progress output");

  std::string scene_file, path_file, out, m_out, rgb, depth, intr, gt_file, est_file, corr_file, kind;
  double magnitude = 1.0, strength = 0.0;
  int frames = 24;
  bool normalized = false;
  VideoInputs video;
  SegmentFlags seg_flags;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene with ground truth");
  synth->add_option("--scene", scene_file, "Scene JSON")->required();
  synth->add_option("--path", path_file, "Camera path JSON")->required();
  synth->add_option("--out", out, "Output directory")->required();

  auto* segment = app.add_subcommand("segment", "Extract the static region and per-frame rigid motions");
  video.add_to(segment);
  seg_flags.add_to(segment);
  segment->add_option("--out", out, "Output directory")->required();

  auto* from_video = app.add_subcommand("signal-from-video", "Build the control tensor from tracks and depth");
  video.add_to(from_video);
  seg_flags.add_to(from_video);
  from_video->add_option("--out", out, "Output TCS1 tensor")->required();
  from_video->add_option("--m-out", m_out, "Motion strength JSON (default <out>.m.json)");
  from_video->add_flag("--normalized", normalized, "Store trajectory channels in [-1, 1]");

  auto* from_path = app.add_subcommand("signal-from-path", "Build the control tensor from a depth map and a camera path");
  from_path->add_option("--depth", depth, "First-frame TCD1 depth")->required();
  from_path->add_option("--intrinsics", intr, "Intrinsics JSON")->required();
  from_path->add_option("--path", path_file, "Camera path JSON")->required();
  from_path->add_option("--motion-strength", strength, "Motion strength for frames after the first")->required();
  from_path->add_flag("--normalized", normalized, "Store trajectory channels in [-1, 1]");
  from_path->add_option("--out", out, "Output TCS1 tensor")->required();

  auto* path_cmd = app.add_subcommand("path", "Write one of the eight basic camera movements");
  path_cmd->add_option("--primitive", kind, "pan_left|pan_right|pan_up|pan_down|zoom_in|zoom_out|rot_acw|rot_cw")
      ->required();
  path_cmd->add_option("--magnitude", magnitude, "Scene units for pans/zooms, radians for rotations")
      ->capture_default_str();
  path_cmd->add_option("--frames", frames, "Frame count")->capture_default_str();
  path_cmd->add_option("--out", out, "Output path JSON")->required();

  auto* preview = app.add_subcommand("preview", "Render the RGBD point cloud along a camera path");
  preview->add_option("--rgb", rgb, "First-frame P6 PPM")->required();
  preview->add_option("--depth", depth, "First-frame TCD1 depth")->required();
  preview->add_option("--intrinsics", intr, "Intrinsics JSON")->required();
  preview->add_option("--path", path_file, "Camera path JSON")->required();
  preview->add_option("--out", out, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Compare an estimated camera path with ground truth");
  eval->add_option("--gt", gt_file, "Ground-truth path JSON")->required();
  eval->add_option("--est", est_file, "Estimated path JSON")->required();
  eval->add_option("--corr", corr_file, "Correspondence file for the motion score");
  eval->add_option("--out", out, "Output report JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }
  g.seed_given = app.count("--seed") > 0;

  try {
    if (*synth) cmd_synth(g, scene_file, path_file, out);
    else if (*segment) cmd_segment(g, video, seg_flags, out);
    else if (*from_video) cmd_signal_from_video(g, video, seg_flags, out, m_out, normalized);
    else if (*from_path) cmd_signal_from_path(g, depth, intr, path_file, strength, normalized, out);
    else if (*path_cmd) cmd_path(g, kind, magnitude, frames, out);
    else if (*preview) cmd_preview(g, rgb, depth, intr, path_file, out);
    else if (*eval) cmd_eval(g, gt_file, est_file, corr_file, out);
  } catch (const ExitRequest& e) {
    std::cerr << e.message << '\n';
    return e.code;
  } catch (const camctl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
