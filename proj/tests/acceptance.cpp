// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <camctl/camctl.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>

#include "cli_util.hpp"
#include "scenes.hpp"

using namespace camctl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

const Intrinsics kK{64.0, 64.0, 31.5, 31.5, 64, 64};

struct CleanRecovery {
  GroundTruth gt;
  SegmentationResult seg;
  double seconds = 0.0;
};

const CleanRecovery& clean_recovery() {
  static const CleanRecovery r = [] {
    CleanRecovery out;
    out.gt = generate_scene(camtest::quarter_dynamic_scene(), camtest::pan_roll_path(24));
    SegmentationConfig cfg;
    cfg.threads = 1;
    const auto t0 = std::chrono::steady_clock::now();
    out.seg = extract_static(out.gt.observed, cfg);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
  }();
  return r;
}

void noise_free_recovery(Outcome& o) {
  const CleanRecovery& r = clean_recovery();
  const auto sc = camtest::score(r.gt.partition, r.seg.partition);
  double worst_rot = 0.0, worst_trans = 0.0;
  for (int f = 1; f < 24; ++f) {
    worst_rot = std::max(worst_rot, geodesic_angle(r.seg.motions[f].rotation, r.gt.path.motions[f].rotation));
    worst_trans =
        std::max(worst_trans, (r.seg.motions[f].translation - r.gt.path.motions[f].translation).norm());
  }
  o.detail << "mismatched pixels " << sc.mismatches << ", max rot err " << worst_rot << " rad, max trans err "
           << worst_trans << ", " << r.seconds << " s";
  o.check(sc.mismatches == 0, "partition differs from ground truth");
  o.check(worst_rot < 1e-4, "rotation error");
  o.check(worst_trans < 1e-4, "translation error");
  o.check(r.seconds < 60.0, "wall clock");
}

void noisy_recovery(Outcome& o) {
  double worst_f1 = 1.0, worst_deg = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const GroundTruth gt = generate_scene(camtest::quarter_dynamic_scene(seed, 0.5), camtest::pan_roll_path(24));
    const SegmentationResult seg = extract_static(gt.observed);
    const auto sc = camtest::score(gt.partition, seg.partition);
    worst_f1 = std::min({worst_f1, sc.f1_static, sc.f1_dynamic});
    double sum = 0.0;
    for (int f = 1; f < 24; ++f) sum += geodesic_angle(seg.motions[f].rotation, gt.path.motions[f].rotation);
    worst_deg = std::max(worst_deg, sum / 23.0 * 180.0 / std::numbers::pi);
  }
  o.detail << "worst F1 " << worst_f1 << ", worst mean geodesic " << worst_deg << " deg/frame over 20 seeds";
  o.check(worst_f1 >= 0.95, "F1");
  o.check(worst_deg < 0.5, "rotation");
}

void gradient_check(Outcome& o) {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    SeqRng rng(seed, 3);
    const int count = 3 + static_cast<int>(rng.uniform() * 60);
    const RigidMotion truth{so3_exp(Vec3(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3))),
                            Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5))};
    std::vector<Vec3> pts;
    std::vector<Pixel2> obs;
    for (int i = 0; i < count; ++i) {
      const Vec3 p = unproject({rng.uniform(0, 63), rng.uniform(0, 63)}, rng.uniform(2, 10), kK);
      pts.push_back(p);
      obs.push_back(project(apply(truth, p), kK) + Pixel2(rng.normal(), rng.normal()));
    }
    Vec6 x;
    for (int i = 0; i < 3; ++i) x[i] = rng.uniform(-0.3, 0.3);
    for (int i = 3; i < 6; ++i) x[i] = rng.uniform(-0.5, 0.5);
    const Vec6 g = reproj_cost_grad(pts, obs, {}, kK, x).grad;
    Vec6 fd;
    for (int i = 0; i < 6; ++i) {
      const double h = 1e-6;
      Vec6 a = x, b = x;
      a[i] += h;
      b[i] -= h;
      fd[i] = (reproj_cost_grad(pts, obs, {}, kK, a).cost - reproj_cost_grad(pts, obs, {}, kK, b).cost) / (2 * h);
    }
    worst = std::max(worst, (g - fd).norm() / std::max(fd.norm(), 1e-12));
  }
  o.detail << "worst relative error " << worst << " over 200 configurations";
  o.check(worst < 1e-5, "gradient mismatch");
}

void manifold_roundtrips(Outcome& o) {
  SeqRng rng(2024);
  double worst_log = 0.0, worst_proj = 0.0;
  for (int s = 0; s < 1000; ++s) {
    Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    axis.normalize();
    const Vec3 w = axis * rng.uniform(0.0, std::numbers::pi - 1e-6);
    worst_log = std::max(worst_log, (so3_log(so3_exp(w)) - w).norm());
    const Pixel2 px(rng.uniform(-0.5, 63.5), rng.uniform(-0.5, 63.5));
    const double z = rng.uniform(0.05, 200.0);
    worst_proj = std::max(worst_proj, (project(unproject(px, z, kK), kK) - px).norm());
  }
  o.detail << "log(exp) max err " << worst_log << ", project(unproject) max err " << worst_proj;
  o.check(worst_log < 1e-10, "so3 roundtrip");
  o.check(worst_proj < 1e-9, "projection roundtrip");
}

void motion_strength_oracle(Outcome& o) {
  SceneSpec still = camtest::quarter_dynamic_scene();
  still.objects.clear();
  const GroundTruth s = generate_scene(still, camtest::pan_roll_path(24));
  double static_max = 0.0;
  for (double m : motion_strength(residual_g(s.field, s.path.motions)).m) static_max = std::max(static_max, std::abs(m));

  const double v = 0.05;
  SceneSpec moving = camtest::quarter_dynamic_scene(1, 0.0, 0.0);
  moving.objects[0].velocity = {0.0, 0.0, v};
  const GroundTruth d = generate_scene(moving, camtest::identity_path(24));
  const MotionStrengthSeries m = motion_strength(residual_g(d.field, d.path.motions));
  const double f = static_cast<double>(d.partition.size() - d.partition.count_static()) / d.partition.size();
  double worst_fv = 0.0, worst_true = 0.0;
  for (int l = 1; l < 24; ++l) {
    worst_fv = std::max(worst_fv, std::abs(m.m[l] - f * v));
    worst_true = std::max(worst_true, std::abs(m.m[l] - d.true_m.m[l]));
  }
  // Same object under a panning and rolling camera against the analytic series.
  const GroundTruth p = generate_scene(camtest::quarter_dynamic_scene(), camtest::pan_roll_path(24));
  const MotionStrengthSeries mp = motion_strength(residual_g(p.field, p.path.motions));
  for (int l = 1; l < 24; ++l) worst_true = std::max(worst_true, std::abs(mp.m[l] - p.true_m.m[l]));

  o.detail << "static max " << static_max << ", |m - f*v| max " << worst_fv << " (f = " << f
           << "), |m - true_m| max " << worst_true;
  o.check(static_max < 1e-9, "static scene");
  o.check(worst_fv < 1e-6, "f*v");
  o.check(worst_true < 1e-6, "analytic true_m");
}

void msc_oracle(Outcome& o) {
  double rigid_max = 0.0, oracle_diff = 0.0, proc_err = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    rigid_max = std::max(rigid_max, msc(camtest::rigid_pairs(seed, 23, 60)));
    const CorrespondenceSet mixed = camtest::rigid_pairs(100 + seed, 6, 50, 15, 4.0);
    oracle_diff = std::max(oracle_diff, std::abs(msc(mixed) - camtest::brute_force_msc(mixed)));
  }
  SeqRng rng(55);
  for (int s = 0; s < 500; ++s) {
    const double angle = rng.uniform(-3.1, 3.1);
    const double c = std::cos(angle), sn = std::sin(angle);
    std::vector<Pixel2> src, dst;
    for (int i = 0; i < 10; ++i) {
      const Pixel2 p(rng.uniform(-40, 40), rng.uniform(-40, 40));
      src.push_back(p);
      dst.push_back(Pixel2(c * p.x() - sn * p.y(), sn * p.x() + c * p.y()) + Pixel2(3, -7));
    }
    proc_err = std::max(proc_err, std::abs(procrustes_2d(src, dst).angle - angle));
  }
  o.detail << "rigid MSC max " << rigid_max << ", |MSC - brute force| max " << oracle_diff
           << ", procrustes angle err max " << proc_err;
  o.check(rigid_max < 1e-9, "rigid MSC");
  o.check(oracle_diff < 1e-6, "brute-force oracle");
  o.check(proc_err < 1e-12, "procrustes rotation");
}

void preview_checks(Outcome& o) {
  const GroundTruth gt = generate_scene(camtest::quarter_dynamic_scene(), camtest::identity_path(24));
  const PreviewFrames id = render_preview({gt.rgb0, gt.depth0, kK}, camtest::identity_path(2));
  o.check(id.frames[0] == gt.rgb0 && id.frames[1] == gt.rgb0, "identity path");

  const Intrinsics k{4, 4, 1.5, 1.5, 4, 4};
  RgbImage src(4, 4);
  src.set(0, 0, {10, 20, 30});
  src.set(0, 1, {200, 100, 50});
  std::vector<Vec3> pts(16, Vec3(0, 0, -1));
  pts[0] = unproject({2, 1}, 5.0, k);
  pts[1] = unproject({2, 1}, 2.0, k);
  const bool near_first = render_frame(src, pts, k, {}).pixel(1, 2) == std::array<std::uint8_t, 3>{200, 100, 50};
  std::swap(pts[0], pts[1]);
  const bool near_second = render_frame(src, pts, k, {}).pixel(1, 2) == std::array<std::uint8_t, 3>{10, 20, 30};
  o.check(near_first && near_second, "z-buffer occlusion");

  int ok = 0;
  for (const auto& [kind, name] : kPrimitiveNames) {
    const auto d = camtest::primitive_direction(kind);
    if (d.ok) ++ok;
    else o.check(false, std::string(name) + " direction");
  }
  o.detail << "identity exact, z-buffer ok, " << ok << "/8 primitive directions";
}

void format_integrity(Outcome& o) {
  SeqRng rng(808);
  bool bitwise = true;
  for (int s = 0; s < 10; ++s) {
    DepthMap d(13, 9);
    for (float& x : d.values) x = static_cast<float>(rng.uniform(0.1, 80));
    bitwise &= encode_depth(decode_depth(encode_depth(d))) == encode_depth(d) && decode_depth(encode_depth(d)) == d;

    Tracks t(5, 40);
    for (std::size_t i = 0; i < t.u.size(); ++i) {
      t.u[i] = static_cast<float>(rng.uniform(-5, 70));
      t.v[i] = static_cast<float>(rng.uniform(-5, 70));
      t.visible[i] = rng.uniform() < 0.7;
    }
    bitwise &= decode_tracks(encode_tracks(t)) == t;

    ControlTensor c;
    c.num_frames = 4;
    c.height = 6;
    c.width = 7;
    c.data.resize(4 * 3 * 42);
    for (double& x : c.data) x = static_cast<float>(rng.uniform(-2, 2));
    c.last_valid.assign(42, 1);
    c.last_valid[5] = 0;
    bitwise &= decode_tensor(encode_tensor(c)) == c;

    CameraPath p;
    p.motions.resize(8);
    for (std::size_t f = 1; f < 8; ++f)
      p.motions[f] = {camtest::random_rotation(rng, 3.0), Vec3(rng.normal(), rng.normal(), rng.normal())};
    const CameraPath back = path_from_json(nlohmann::json::parse(path_to_json(p).dump()));
    for (std::size_t f = 0; f < 8; ++f)
      bitwise &= back.motions[f].rotation == p.motions[f].rotation &&
                 back.motions[f].translation == p.motions[f].translation;
  }
  o.check(bitwise, "bitwise roundtrip");

  // Corruption classes on every binary codec.
  using Cause = FormatError::Cause;
  auto cause = [](const std::function<void()>& fn) -> int {
    try {
      fn();
    } catch (const FormatError& e) {
      return static_cast<int>(e.cause());
    } catch (...) {
      return -2;
    }
    return -1;
  };
  DepthMap d(8, 8, 3.0f);
  Tracks t(3, 10);
  ControlTensor c;
  c.num_frames = 2;
  c.height = 3;
  c.width = 3;
  c.data.assign(2 * 3 * 9, 0.5);
  c.last_valid.assign(9, 1);
  const std::vector<std::pair<Bytes, std::function<void(const Bytes&)>>> codecs{
      {encode_depth(d), [](const Bytes& b) { decode_depth(b); }},
      {encode_tracks(t), [](const Bytes& b) { decode_tracks(b); }},
      {encode_tensor(c), [](const Bytes& b) { decode_tensor(b); }},
  };
  int cases = 0, wrong = 0;
  for (const auto& [good, decode] : codecs) {
    for (int s = 0; s < 50; ++s) {
      const auto len = static_cast<std::size_t>(rng.uniform() * good.size());
      const Bytes cut(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(len));
      const int expect = static_cast<int>(len < 4 ? Cause::kUnrecognized : Cause::kTruncated);
      wrong += cause([&] { decode(cut); }) != expect;
      Bytes longer = good;
      longer.insert(longer.end(), 1 + s % 7, 0xAB);
      wrong += cause([&] { decode(longer); }) != static_cast<int>(Cause::kSizeMismatch);
      Bytes magic = good;
      magic[s % 4] ^= 0x41;
      wrong += cause([&] { decode(magic); }) != static_cast<int>(Cause::kUnrecognized);
      cases += 3;
    }
  }
  Bytes nan = encode_depth(d);
  nan[20] = nan[21] = 0xff;
  nan[22] = 0xc0;
  nan[23] = 0x7f;
  wrong += cause([&] { decode_depth(nan); }) != static_cast<int>(Cause::kInvalidValue);
  Bytes vis = encode_tracks(t);
  vis[12 + 9 * 4 + 8] = 9;
  wrong += cause([&] { decode_tracks(vis); }) != static_cast<int>(Cause::kInvalidValue);
  cases += 2;
  o.check(wrong == 0, std::to_string(wrong) + " misclassified corruptions");

  // The 704 x 448, 24-frame inference tensor through the command line.
  const fs::path dir = camtest::fresh_dir("camctl_acceptance_shape");
  const Intrinsics big{600, 600, 351.5, 223.5, 704, 448};
  DepthMap plane(704, 448);
  for (int r = 0; r < 448; ++r)
    for (int col = 0; col < 704; ++col) plane.at(r, col) = static_cast<float>(3.0 + 0.004 * r);
  write_depth((dir / "d.tcd").string(), plane);
  write_json((dir / "k.json").string(), intrinsics_to_json(big));
  save_path(generate_primitive({PrimitiveKind::kZoomIn, 0.6, 24}), (dir / "p.json").string());
  const auto run = camtest::run_camctl("--quiet signal-from-path --depth " + (dir / "d.tcd").string() +
                                           " --intrinsics " + (dir / "k.json").string() + " --path " +
                                           (dir / "p.json").string() + " --motion-strength 0.2 --out " +
                                           (dir / "t.tcs").string(),
                                       dir);
  bool shape = false;
  if (run.code == 0) {
    const ControlTensor out = read_tensor((dir / "t.tcs").string());
    shape = out.num_frames == 24 && out.channels == 3 && out.height == 448 && out.width == 704;
  }
  fs::remove_all(dir);
  o.check(shape, "signal-from-path shape");
  o.detail << "roundtrips bitwise, " << cases - wrong << "/" << cases
           << " corruptions classified, signal-from-path shape (24, 3, 448, 704) " << (shape ? "ok" : "wrong");
}

// synth -> segment -> signal-from-video -> eval in `dir` with the given thread count.
bool run_pipeline(const fs::path& dir, int threads) {
  const std::string g = "--quiet --seed 17 --threads " + std::to_string(threads) + " ";
  auto ok = [&](const std::string& args) { return camtest::run_camctl(g + args, dir).code == 0; };
  const std::string s = (dir / "synth").string();
  const std::string in = " --tracks " + s + "/tracks.tct --depth-dir " + s + "/depth --intrinsics " + s +
                         "/intrinsics.json";
  const fs::path inputs = dir.parent_path();
  return ok("synth --scene " + (inputs / "scene.json").string() + " --path " + (inputs / "path.json").string() +
            " --out " + s) &&
         ok("segment" + in + " --out " + (dir / "seg").string()) &&
         ok("signal-from-video" + in + " --out " + (dir / "signal.tcs").string()) &&
         ok("eval --gt " + s + "/path.json --est " + (dir / "seg/motions.json").string() + " --corr " + s +
            "/correspondences.txt --out " + (dir / "eval.json").string());
}

void determinism(Outcome& o) {
  const fs::path root = camtest::fresh_dir("camctl_acceptance_determinism");
  write_json((root / "scene.json").string(), scene_to_json(camtest::quarter_dynamic_scene(0, 0.5)));
  save_path(camtest::pan_roll_path(24), (root / "path.json").string());
  fs::create_directories(root / "t1");
  fs::create_directories(root / "t8");
  const bool ran = run_pipeline(root / "t1", 1) && run_pipeline(root / "t8", 8);
  o.check(ran, "pipeline run");
  std::size_t files = 0, differing = 0;
  if (ran) {
    for (const auto& e : fs::recursive_directory_iterator(root / "t1")) {
      if (!e.is_regular_file() || e.path().filename() == "camctl_output.txt") continue;
      const fs::path other = root / "t8" / fs::relative(e.path(), root / "t1");
      ++files;
      if (!fs::exists(other) || camtest::slurp(e.path()) != camtest::slurp(other)) {
        ++differing;
        o.check(false, fs::relative(e.path(), root / "t1").string() + " differs");
      }
    }
  }
  fs::remove_all(root);
  o.check(files > 30, "expected artifacts");
  o.detail << files << " artifacts compared, " << differing << " differ between --threads 1 and --threads 8";
}

void eval_consistency(Outcome& o) {
  const CleanRecovery& r = clean_recovery();
  const fs::path dir = camtest::fresh_dir("camctl_acceptance_eval");
  save_path(r.gt.path, (dir / "gt.json").string());
  save_path(CameraPath{r.seg.motions}, (dir / "est.json").string());
  const auto self = camtest::run_camctl("--quiet eval --gt " + (dir / "gt.json").string() + " --est " +
                                            (dir / "gt.json").string() + " --out " + (dir / "self.json").string(),
                                        dir);
  const auto est = camtest::run_camctl("--quiet eval --gt " + (dir / "gt.json").string() + " --est " +
                                           (dir / "est.json").string() + " --out " + (dir / "est_report.json").string(),
                                       dir);
  o.check(self.code == 0 && est.code == 0, "eval runs");
  if (self.code == 0 && est.code == 0) {
    const auto a = read_json((dir / "self.json").string());
    const auto b = read_json((dir / "est_report.json").string());
    const double self_rot = a["rot_err"], self_trans = a["trans_err"], rot = b["rot_err"], trans = b["trans_err"];
    o.detail << "eval(gt, gt) = (" << self_rot << ", " << self_trans << "), recovered rot_err " << rot
             << " rad, trans_err " << trans;
    o.check(self_rot == 0.0 && self_trans == 0.0, "self evaluation");
    o.check(rot < 2.4e-3, "recovered rot_err");
  }
  fs::remove_all(dir);
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"noise-free synthetic recovery", noise_free_recovery},
      {"noisy recovery over 20 seeds", noisy_recovery},
      {"analytic gradient vs finite differences", gradient_check},
      {"rotation manifold and projection roundtrips", manifold_roundtrips},
      {"motion strength oracle", motion_strength_oracle},
      {"motion score oracle", msc_oracle},
      {"preview correctness", preview_checks},
      {"format integrity", format_integrity},
      {"end-to-end determinism across thread counts", determinism},
      {"eval self-consistency", eval_consistency},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << i + 1 << ": " << criteria[i].first << " -- "
              << o.detail.str() << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criterion(s) failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
