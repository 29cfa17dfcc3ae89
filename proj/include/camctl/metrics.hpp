#pragma once

// Camera-control accuracy: rotation/translation path errors and the motion
// score (residual after per-pair 2D rigid alignment of correspondences).

#include <cmath>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "camctl/campath.hpp"

namespace camctl {

/// Sum over frames 1..T-1 of the geodesic angle between per-frame rotations.
inline double rot_err(const CameraPath& gt, const CameraPath& est) {
  if (gt.size() != est.size()) fail(ErrorKind::kInvalidArgument, "path length mismatch");
  double sum = 0.0;
  for (std::size_t f = 1; f < gt.size(); ++f)
    sum += geodesic_angle(gt.motions[f].rotation, est.motions[f].rotation);
  return sum;
}

/// Sum over frames 1..T-1 of the translation L2 distance, both paths scaled
/// by 1 / max_f |t_gt,f|. All-zero ground truth skips the scaling.
inline double trans_err(const CameraPath& gt, const CameraPath& est) {
  if (gt.size() != est.size()) fail(ErrorKind::kInvalidArgument, "path length mismatch");
  double scale = 0.0;
  for (const auto& m : gt.motions) scale = std::max(scale, m.translation.norm());
  const double s = scale > 0.0 ? 1.0 / scale : 1.0;
  double sum = 0.0;
  for (std::size_t f = 1; f < gt.size(); ++f)
    sum += (s * (est.motions[f].translation - gt.motions[f].translation)).norm();
  return sum;
}

struct Rigid2D {
  double angle = 0.0;
  Eigen::Vector2d translation = Eigen::Vector2d::Zero();

  Pixel2 apply(const Pixel2& p) const {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * p.x() - s * p.y() + translation.x(), s * p.x() + c * p.y() + translation.y()};
  }
};

/// Least-squares rotation + translation (no scale) taking src onto dst.
inline Rigid2D procrustes_2d(std::span<const Pixel2> src, std::span<const Pixel2> dst) {
  if (src.size() != dst.size()) fail(ErrorKind::kInvalidArgument, "correspondence lists differ in length");
  if (src.size() < 2) fail(ErrorKind::kInvalidArgument, "2D alignment needs at least 2 correspondences");
  Pixel2 cs = Pixel2::Zero(), cd = Pixel2::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(src.size());
  cd /= static_cast<double>(src.size());
  double dot = 0.0, cross = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Pixel2 a = src[i] - cs;
    const Pixel2 b = dst[i] - cd;
    dot += a.dot(b);
    cross += a.x() * b.y() - a.y() * b.x();
  }
  Rigid2D r;
  r.angle = std::atan2(cross, dot);
  const double c = std::cos(r.angle), s = std::sin(r.angle);
  r.translation = cd - Pixel2(c * cs.x() - s * cs.y(), s * cs.x() + c * cs.y());
  return r;
}

struct Correspondence {
  Pixel2 src;
  Pixel2 dst;
};

using CorrespondenceSet = std::vector<std::vector<Correspondence>>;  // per adjacent frame pair

/// Mean over pairs of the mean L2 residual after rigid alignment.
inline double msc(const CorrespondenceSet& pairs) {
  if (pairs.empty()) fail(ErrorKind::kInvalidArgument, "no frame pairs");
  double total = 0.0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& pair = pairs[p];
    if (pair.size() < 2)
      fail(ErrorKind::kInvalidArgument, "insufficient correspondences in pair " + std::to_string(p));
    std::vector<Pixel2> src, dst;
    src.reserve(pair.size());
    dst.reserve(pair.size());
    for (const auto& c : pair) {
      src.push_back(c.src);
      dst.push_back(c.dst);
    }
    const Rigid2D fit = procrustes_2d(src, dst);
    double sum = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) sum += (dst[i] - fit.apply(src[i])).norm();
    total += sum / static_cast<double>(src.size());
  }
  return total / static_cast<double>(pairs.size());
}

// ---- correspondence text file ----------------------------------------------
// One line per correspondence: "pair_index src_u src_v dst_u dst_v", pairs
// in ascending order starting at 0.

inline CorrespondenceSet parse_correspondences(std::istream& in, const std::string& name = "correspondences") {
  CorrespondenceSet pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    long long pair = -1;
    double su, sv, du, dv;
    std::string extra;
    if (!(ls >> pair >> su >> sv >> du >> dv) || (ls >> extra) || pair < 0)
      fail(ErrorKind::kData, name + ": malformed line " + std::to_string(line_no));
    if (!std::isfinite(su) || !std::isfinite(sv) || !std::isfinite(du) || !std::isfinite(dv))
      fail(ErrorKind::kData, name + ": non-finite value on line " + std::to_string(line_no));
    const auto idx = static_cast<std::size_t>(pair);
    if (idx + 1 < pairs.size() || idx > pairs.size())
      fail(ErrorKind::kData, name + ": pair indices out of order on line " + std::to_string(line_no));
    if (idx == pairs.size()) pairs.emplace_back();
    pairs[idx].push_back({{su, sv}, {du, dv}});
  }
  return pairs;
}

inline CorrespondenceSet read_correspondences(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kData, "cannot open " + path);
  return parse_correspondences(in, path);
}

inline void write_correspondences(std::ostream& out, const CorrespondenceSet& pairs) {
  out.precision(17);
  for (std::size_t p = 0; p < pairs.size(); ++p)
    for (const auto& c : pairs[p])
      out << p << ' ' << c.src.x() << ' ' << c.src.y() << ' ' << c.dst.x() << ' ' << c.dst.y() << '\n';
}

}  // namespace camctl
