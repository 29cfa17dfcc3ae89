#pragma once

// Camera paths as per-frame point transforms, the eight basic camera
// movements, and the path JSON format.
//
// A path stores, for every frame, the rigid map taking first-frame camera
// coordinates to that frame's camera coordinates. Moving the camera right
// therefore translates points by -x.

#include <json.hpp>

#include <array>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "camctl/geometry.hpp"

namespace camctl {

struct CameraPath {
  std::vector<RigidMotion> motions;

  std::size_t size() const { return motions.size(); }
};

inline void validate(const CameraPath& path, double tol = 1e-6) {
  if (path.motions.empty()) fail(ErrorKind::kData, "camera path has no frames");
  for (std::size_t f = 0; f < path.motions.size(); ++f) {
    if (!is_rotation(path.motions[f].rotation, tol))
      fail(ErrorKind::kData, "invalid rotation at frame " + std::to_string(f));
    if (!path.motions[f].translation.allFinite())
      fail(ErrorKind::kData, "non-finite translation at frame " + std::to_string(f));
  }
  if (!is_identity(path.motions[0], 1e-9)) fail(ErrorKind::kData, "frame 0 must be identity");
}

enum class PrimitiveKind { kPanLeft, kPanRight, kPanUp, kPanDown, kZoomIn, kZoomOut, kRotAcw, kRotCw };

inline constexpr std::array<std::pair<PrimitiveKind, std::string_view>, 8> kPrimitiveNames{{
    {PrimitiveKind::kPanLeft, "pan_left"},
    {PrimitiveKind::kPanRight, "pan_right"},
    {PrimitiveKind::kPanUp, "pan_up"},
    {PrimitiveKind::kPanDown, "pan_down"},
    {PrimitiveKind::kZoomIn, "zoom_in"},
    {PrimitiveKind::kZoomOut, "zoom_out"},
    {PrimitiveKind::kRotAcw, "rot_acw"},
    {PrimitiveKind::kRotCw, "rot_cw"},
}};

inline std::string_view to_string(PrimitiveKind kind) {
  for (const auto& [k, name] : kPrimitiveNames)
    if (k == kind) return name;
  return "unknown";
}

inline PrimitiveKind parse_primitive(std::string_view name) {
  for (const auto& [k, n] : kPrimitiveNames)
    if (n == name) return k;
  fail(ErrorKind::kInvalidArgument, "unknown primitive '" + std::string(name) + "'");
}

struct PrimitiveSpec {
  PrimitiveKind kind = PrimitiveKind::kPanRight;
  double magnitude = 1.0;  // scene units for pans/zooms, radians for rotations
  int frames = 24;
};

/// Linear ramp from the identity at frame 0 to the full magnitude at the last
/// frame.
inline CameraPath generate_primitive(const PrimitiveSpec& spec) {
  if (!(spec.magnitude >= 0.0) || !std::isfinite(spec.magnitude))
    fail(ErrorKind::kInvalidArgument, "primitive magnitude must be finite and >= 0");
  if (spec.frames < 2) fail(ErrorKind::kInvalidArgument, "primitive needs at least two frames");

  CameraPath path;
  path.motions.resize(static_cast<std::size_t>(spec.frames));
  for (int f = 1; f < spec.frames; ++f) {
    const double s = spec.magnitude * static_cast<double>(f) / static_cast<double>(spec.frames - 1);
    RigidMotion& m = path.motions[static_cast<std::size_t>(f)];
    switch (spec.kind) {
      case PrimitiveKind::kPanLeft: m.translation = {s, 0.0, 0.0}; break;
      case PrimitiveKind::kPanRight: m.translation = {-s, 0.0, 0.0}; break;
      case PrimitiveKind::kPanUp: m.translation = {0.0, s, 0.0}; break;
      case PrimitiveKind::kPanDown: m.translation = {0.0, -s, 0.0}; break;
      case PrimitiveKind::kZoomIn: m.translation = {0.0, 0.0, -s}; break;
      case PrimitiveKind::kZoomOut: m.translation = {0.0, 0.0, s}; break;
      case PrimitiveKind::kRotAcw: m.rotation = rot_z(s); break;
      case PrimitiveKind::kRotCw: m.rotation = rot_z(-s); break;
    }
  }
  return path;
}

// ---- path JSON -------------------------------------------------------------

inline nlohmann::json path_to_json(const CameraPath& path) {
  nlohmann::json frames = nlohmann::json::array();
  for (const RigidMotion& m : path.motions) {
    nlohmann::json r = nlohmann::json::array();
    for (int i = 0; i < 3; ++i) r.push_back({m.rotation(i, 0), m.rotation(i, 1), m.rotation(i, 2)});
    frames.push_back({{"R", r}, {"t", {m.translation.x(), m.translation.y(), m.translation.z()}}});
  }
  return {{"frames", frames}};
}

inline CameraPath path_from_json(const nlohmann::json& j) {
  auto bad = [](const std::string& what) { fail(ErrorKind::kData, "path JSON: " + what); };
  if (!j.is_object()) bad("top level must be an object");
  for (const auto& [key, value] : j.items())
    if (key != "frames") bad("unknown key '" + key + "'");
  if (!j.contains("frames") || !j["frames"].is_array()) bad("missing 'frames' array");

  CameraPath path;
  std::size_t f = 0;
  for (const auto& fr : j["frames"]) {
    const std::string where = " at frame " + std::to_string(f);
    if (!fr.is_object()) bad("frame entry must be an object" + where);
    for (const auto& [key, value] : fr.items())
      if (key != "R" && key != "t") bad("unknown key '" + key + "'" + where);
    if (!fr.contains("R") || !fr.contains("t")) bad("frame needs 'R' and 't'" + where);
    const auto& r = fr["R"];
    const auto& t = fr["t"];
    if (!r.is_array() || r.size() != 3) bad("'R' must be a 3x3 array" + where);
    if (!t.is_array() || t.size() != 3) bad("'t' must have 3 numbers" + where);
    RigidMotion m;
    for (int i = 0; i < 3; ++i) {
      if (!r[i].is_array() || r[i].size() != 3) bad("'R' must be a 3x3 array" + where);
      for (int c = 0; c < 3; ++c) {
        if (!r[i][c].is_number()) bad("'R' entries must be numbers" + where);
        m.rotation(i, c) = r[i][c].get<double>();
      }
      if (!t[i].is_number()) bad("'t' entries must be numbers" + where);
      m.translation[i] = t[i].get<double>();
    }
    path.motions.push_back(m);
    ++f;
  }
  validate(path);
  return path;
}

inline CameraPath load_path(const std::string& file) {
  std::ifstream in(file);
  if (!in) fail(ErrorKind::kData, "cannot open path file " + file);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kData, "path JSON: " + std::string(e.what()));
  }
  return path_from_json(j);
}

inline void save_path(const CameraPath& path, const std::string& file) {
  std::ofstream out(file);
  if (!out) fail(ErrorKind::kData, "cannot write path file " + file);
  out << path_to_json(path).dump(2) << '\n';
}

}  // namespace camctl
