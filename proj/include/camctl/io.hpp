#pragma once

// Interchange formats. All multi-byte values are little-endian regardless of
// the host.
//
//   TCD1 depth:   "TCD1" u32 W, u32 H, H*W f32 (row-major)
//   TCT1 tracks:  "TCT1" u32 T, u32 N, T*N records {f32 u, f32 v, u8 visible}
//   TCS1 tensor:  "TCS1" u32 T, u32 C, u32 H, u32 W, T*C*H*W f32 in (t,c,h,w),
//                 then H*W u8 validity of the last frame
//   P6 PPM / P5 PGM, maxval 255.

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "camctl/geometry.hpp"
#include "camctl/image.hpp"
#include "camctl/signal.hpp"
#include "camctl/trajfield.hpp"

namespace camctl {

using Bytes = std::vector<std::uint8_t>;

/// 2D point tracks of the first-frame grid, frame-major.
struct Tracks {
  int num_frames = 0;
  std::size_t num_points = 0;
  std::vector<float> u;
  std::vector<float> v;
  std::vector<std::uint8_t> visible;

  Tracks() = default;
  Tracks(int frames, std::size_t points)
      : num_frames(frames),
        num_points(points),
        u(static_cast<std::size_t>(frames) * points, 0.0f),
        v(static_cast<std::size_t>(frames) * points, 0.0f),
        visible(static_cast<std::size_t>(frames) * points, 1) {}

  std::size_t index(int frame, std::size_t point) const {
    return static_cast<std::size_t>(frame) * num_points + point;
  }
  bool operator==(const Tracks&) const = default;
};

namespace detail {

class ByteWriter {
 public:
  explicit ByteWriter(Bytes& out) : out_(out) {}

  void magic(std::string_view m) { out_.insert(out_.end(), m.begin(), m.end()); }
  void u8(std::uint8_t x) { out_.push_back(x); }
  void u32(std::uint32_t x) {
    for (int s = 0; s < 32; s += 8) out_.push_back(static_cast<std::uint8_t>(x >> s));
  }
  void f32(float x) { u32(std::bit_cast<std::uint32_t>(x)); }

 private:
  Bytes& out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

  void expect_magic(std::string_view m) {
    if (in_.size() < m.size() || std::memcmp(in_.data(), m.data(), m.size()) != 0)
      throw FormatError(FormatError::Cause::kUnrecognized, 0, "unrecognized format");
    pos_ = m.size();
  }
  // Fails before any allocation if `bytes` more are not available.
  void require(std::uint64_t bytes) const {
    if (bytes > remaining())
      throw FormatError(FormatError::Cause::kTruncated, in_.size(),
                        "truncated at byte " + std::to_string(in_.size()));
  }
  std::uint8_t u8() {
    require(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    require(4);
    std::uint32_t x = 0;
    for (int b = 0; b < 4; ++b) x |= static_cast<std::uint32_t>(in_[pos_ + b]) << (8 * b);
    pos_ += 4;
    return x;
  }
  float f32() { return std::bit_cast<float>(u32()); }

  void expect_end() const {
    if (pos_ != in_.size())
      throw FormatError(FormatError::Cause::kSizeMismatch, pos_,
                        "size mismatch at byte " + std::to_string(pos_) + ": " +
                            std::to_string(in_.size() - pos_) + " trailing bytes");
  }
  [[noreturn]] void invalid(std::size_t at, const std::string& what) const {
    throw FormatError(FormatError::Cause::kInvalidValue, at,
                      "invalid value at byte " + std::to_string(at) + ": " + what);
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// ---- files -----------------------------------------------------------------

inline Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kData, "cannot open " + path);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kData, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kData, "write failed for " + path);
}

// Prefixes decoding errors with the file name, keeping their class.
template <typename Decode>
auto decode_file(const std::string& path, Decode&& decode) {
  const Bytes bytes = read_file(path);
  try {
    return decode(bytes);
  } catch (const FormatError& e) {
    throw FormatError(e.cause(), e.offset(), path + ": " + e.what());
  }
}

// ---- TCD1 ------------------------------------------------------------------

inline Bytes encode_depth(const DepthMap& d) {
  Bytes out;
  out.reserve(12 + d.values.size() * 4);
  detail::ByteWriter w(out);
  w.magic("TCD1");
  w.u32(static_cast<std::uint32_t>(d.width));
  w.u32(static_cast<std::uint32_t>(d.height));
  for (float x : d.values) w.f32(x);
  return out;
}

/// Rejects NaN and infinite depths; non-positive values are left to callers.
inline DepthMap decode_depth(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic("TCD1");
  const std::uint32_t w = r.u32();
  const std::uint32_t h = r.u32();
  if (w == 0 || h == 0 || w > std::numeric_limits<int>::max() || h > std::numeric_limits<int>::max())
    r.invalid(4, "depth map dimensions " + std::to_string(w) + "x" + std::to_string(h));
  r.require(static_cast<std::uint64_t>(w) * h * 4);
  DepthMap d(static_cast<int>(w), static_cast<int>(h));
  for (float& x : d.values) {
    const std::size_t at = r.offset();
    x = r.f32();
    if (!std::isfinite(x)) r.invalid(at, "non-finite depth");
  }
  r.expect_end();
  return d;
}

inline void write_depth(const std::string& path, const DepthMap& d) { write_file(path, encode_depth(d)); }
inline DepthMap read_depth(const std::string& path) {
  return decode_file(path, [](const Bytes& b) { return decode_depth(b); });
}

// ---- TCT1 ------------------------------------------------------------------

inline Bytes encode_tracks(const Tracks& t) {
  Bytes out;
  out.reserve(12 + t.u.size() * 9);
  detail::ByteWriter w(out);
  w.magic("TCT1");
  w.u32(static_cast<std::uint32_t>(t.num_frames));
  w.u32(static_cast<std::uint32_t>(t.num_points));
  for (std::size_t i = 0; i < t.u.size(); ++i) {
    w.f32(t.u[i]);
    w.f32(t.v[i]);
    w.u8(t.visible[i]);
  }
  return out;
}

inline Tracks decode_tracks(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic("TCT1");
  const std::uint32_t frames = r.u32();
  const std::uint32_t points = r.u32();
  if (frames == 0 || frames > std::numeric_limits<int>::max() || points == 0)
    r.invalid(4, "track dimensions T=" + std::to_string(frames) + " N=" + std::to_string(points));
  r.require(static_cast<std::uint64_t>(frames) * points * 9);
  Tracks t(static_cast<int>(frames), points);
  for (std::size_t i = 0; i < t.u.size(); ++i) {
    const std::size_t at = r.offset();
    t.u[i] = r.f32();
    t.v[i] = r.f32();
    t.visible[i] = r.u8();
    if (t.visible[i] > 1) r.invalid(at + 8, "visibility flag must be 0 or 1");
    if (t.visible[i] && !(std::isfinite(t.u[i]) && std::isfinite(t.v[i])))
      r.invalid(at, "non-finite coordinate on a visible track");
  }
  r.expect_end();
  return t;
}

inline void write_tracks(const std::string& path, const Tracks& t) { write_file(path, encode_tracks(t)); }
inline Tracks read_tracks(const std::string& path) {
  return decode_file(path, [](const Bytes& b) { return decode_tracks(b); });
}

// ---- TCS1 ------------------------------------------------------------------

/// Values are stored as f32.
inline Bytes encode_tensor(const ControlTensor& t) {
  const std::size_t plane = t.plane();
  if (t.data.size() != static_cast<std::size_t>(t.num_frames) * t.channels * plane)
    fail(ErrorKind::kInvalidArgument, "control tensor storage does not match its shape");
  Bytes out;
  out.reserve(20 + t.data.size() * 4 + plane);
  detail::ByteWriter w(out);
  w.magic("TCS1");
  w.u32(static_cast<std::uint32_t>(t.num_frames));
  w.u32(static_cast<std::uint32_t>(t.channels));
  w.u32(static_cast<std::uint32_t>(t.height));
  w.u32(static_cast<std::uint32_t>(t.width));
  for (double x : t.data) w.f32(static_cast<float>(x));
  for (std::size_t i = 0; i < plane; ++i) w.u8(i < t.last_valid.size() ? t.last_valid[i] : 1);
  return out;
}

inline ControlTensor decode_tensor(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic("TCS1");
  std::uint32_t dims[4];
  for (auto& d : dims) d = r.u32();
  for (auto d : dims)
    if (d == 0 || d > static_cast<std::uint32_t>(std::numeric_limits<int>::max()))
      r.invalid(4, "tensor dimension " + std::to_string(d));
  const std::uint64_t plane = static_cast<std::uint64_t>(dims[2]) * dims[3];
  const std::uint64_t count = static_cast<std::uint64_t>(dims[0]) * dims[1] * plane;
  r.require(count * 4 + plane);
  ControlTensor t;
  t.num_frames = static_cast<int>(dims[0]);
  t.channels = static_cast<int>(dims[1]);
  t.height = static_cast<int>(dims[2]);
  t.width = static_cast<int>(dims[3]);
  t.data.resize(count);
  for (double& x : t.data) {
    const std::size_t at = r.offset();
    const float f = r.f32();
    if (!std::isfinite(f)) r.invalid(at, "non-finite tensor value");
    x = f;
  }
  t.last_valid.resize(plane);
  for (auto& b : t.last_valid) {
    const std::size_t at = r.offset();
    b = r.u8();
    if (b > 1) r.invalid(at, "validity byte must be 0 or 1");
  }
  r.expect_end();
  return t;
}

inline void write_tensor(const std::string& path, const ControlTensor& t) { write_file(path, encode_tensor(t)); }
inline ControlTensor read_tensor(const std::string& path) {
  return decode_file(path, [](const Bytes& b) { return decode_tensor(b); });
}

// ---- PPM / PGM -------------------------------------------------------------

namespace detail {

struct PnmHeader {
  int width = 0;
  int height = 0;
  std::size_t data_offset = 0;
};

inline PnmHeader parse_pnm_header(std::span<const std::uint8_t> bytes, std::string_view magic) {
  if (bytes.size() < 2 || bytes[0] != magic[0] || bytes[1] != magic[1])
    throw FormatError(FormatError::Cause::kUnrecognized, 0, "unrecognized format");
  std::size_t pos = 2;
  auto truncated = [&]() {
    return FormatError(FormatError::Cause::kTruncated, bytes.size(),
                       "truncated at byte " + std::to_string(bytes.size()));
  };
  auto skip_space = [&]() {
    while (pos < bytes.size()) {
      const auto c = bytes[pos];
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&]() -> long {
    skip_space();
    if (pos >= bytes.size()) throw truncated();
    const std::size_t start = pos;
    long value = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      value = value * 10 + (bytes[pos] - '0');
      if (value > std::numeric_limits<int>::max())
        throw FormatError(FormatError::Cause::kInvalidValue, start, "invalid value at byte " + std::to_string(start));
      ++pos;
    }
    if (pos == start)
      throw FormatError(FormatError::Cause::kSyntax, start, "malformed header at byte " + std::to_string(start));
    return value;
  };
  if (pos >= bytes.size()) throw truncated();
  const long w = number();
  const long h = number();
  const std::size_t maxval_at = pos;
  const long maxval = number();
  if (w <= 0 || h <= 0)
    throw FormatError(FormatError::Cause::kInvalidValue, 2, "invalid value at byte 2: empty image");
  if (maxval != 255)
    throw FormatError(FormatError::Cause::kInvalidValue, maxval_at,
                      "invalid value at byte " + std::to_string(maxval_at) + ": maxval must be 255");
  if (pos >= bytes.size()) throw truncated();
  ++pos;  // single whitespace before the raster
  return {static_cast<int>(w), static_cast<int>(h), pos};
}

inline void check_raster(std::span<const std::uint8_t> bytes, std::size_t offset, std::uint64_t size) {
  if (bytes.size() - offset < size)
    throw FormatError(FormatError::Cause::kTruncated, bytes.size(),
                      "truncated at byte " + std::to_string(bytes.size()));
  if (bytes.size() - offset > size)
    throw FormatError(FormatError::Cause::kSizeMismatch, offset + size,
                      "size mismatch at byte " + std::to_string(offset + size) + ": " +
                          std::to_string(bytes.size() - offset - size) + " trailing bytes");
}

}  // namespace detail

inline Bytes encode_ppm(const RgbImage& img) {
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.insert(out.end(), img.data.begin(), img.data.end());
  return out;
}

inline RgbImage decode_ppm(std::span<const std::uint8_t> bytes) {
  const auto h = detail::parse_pnm_header(bytes, "P6");
  const std::uint64_t size = static_cast<std::uint64_t>(h.width) * h.height * 3;
  detail::check_raster(bytes, h.data_offset, size);
  RgbImage img;
  img.width = h.width;
  img.height = h.height;
  img.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset), bytes.end());
  return img;
}

inline Bytes encode_pgm(const GrayImage& img) {
  const std::string header = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.insert(out.end(), img.data.begin(), img.data.end());
  return out;
}

inline GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  const auto h = detail::parse_pnm_header(bytes, "P5");
  const std::uint64_t size = static_cast<std::uint64_t>(h.width) * h.height;
  detail::check_raster(bytes, h.data_offset, size);
  GrayImage img;
  img.width = h.width;
  img.height = h.height;
  img.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset), bytes.end());
  return img;
}

inline void write_ppm(const std::string& path, const RgbImage& img) { write_file(path, encode_ppm(img)); }
inline RgbImage read_ppm(const std::string& path) {
  return decode_file(path, [](const Bytes& b) { return decode_ppm(b); });
}
inline void write_pgm(const std::string& path, const GrayImage& img) { write_file(path, encode_pgm(img)); }
inline GrayImage read_pgm(const std::string& path) {
  return decode_file(path, [](const Bytes& b) { return decode_pgm(b); });
}

/// 255 = static.
inline GrayImage partition_to_pgm(const PixelPartition& p) {
  GrayImage img(p.grid_w, p.grid_h);
  for (std::size_t i = 0; i < p.size(); ++i) img.data[i] = p.is_static(i) ? 255 : 0;
  return img;
}

inline PixelPartition partition_from_pgm(const GrayImage& img) {
  PixelPartition p(img.height, img.width);
  for (std::size_t i = 0; i < img.data.size(); ++i) p.static_mask[i] = img.data[i] >= 128;
  return p;
}

// ---- intrinsics JSON -------------------------------------------------------

inline nlohmann::json intrinsics_to_json(const Intrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

inline Intrinsics intrinsics_from_json(const nlohmann::json& j) {
  auto bad = [](const std::string& what) { fail(ErrorKind::kData, "intrinsics JSON: " + what); };
  if (!j.is_object()) bad("top level must be an object");
  static constexpr std::string_view keys[] = {"fx", "fy", "cx", "cy", "width", "height"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(keys), std::end(keys), key) == std::end(keys)) bad("unknown key '" + key + "'");
    if (!value.is_number()) bad("'" + key + "' must be a number");
  }
  for (auto key : keys)
    if (!j.contains(key)) bad("missing '" + std::string(key) + "'");
  auto integer = [&](const char* key) {
    const double x = j[key].get<double>();
    if (x != std::floor(x) || x < 1 || x > std::numeric_limits<int>::max())
      bad(std::string("'") + key + "' must be a positive integer");
    return static_cast<int>(x);
  };
  Intrinsics k{j["fx"].get<double>(), j["fy"].get<double>(), j["cx"].get<double>(),
               j["cy"].get<double>(), integer("width"), integer("height")};
  try {
    validate(k);
  } catch (const Error& e) {
    bad(e.what());
  }
  return k;
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kData, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kData, path + ": " + e.what());
  }
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kData, "cannot write " + path);
  out << j.dump(2) << '\n';
}

inline Intrinsics read_intrinsics(const std::string& path) { return intrinsics_from_json(read_json(path)); }

// ---- depth directories -----------------------------------------------------

inline std::string depth_frame_name(int frame) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "depth_%04d.tcd", frame);
  return buf;
}

/// Reads depth_0000.tcd, depth_0001.tcd, ... until the first missing index.
inline std::vector<DepthMap> read_depth_dir(const std::string& dir) {
  std::vector<DepthMap> out;
  for (int f = 0;; ++f) {
    const auto p = std::filesystem::path(dir) / depth_frame_name(f);
    if (!std::filesystem::exists(p)) break;
    out.push_back(read_depth(p.string()));
  }
  if (out.empty()) fail(ErrorKind::kData, "no depth_0000.tcd in " + dir);
  return out;
}

// ---- field assembly --------------------------------------------------------

/// Bilinear sample with coordinates clamped to the pixel-center domain.
inline double sample_bilinear(const DepthMap& d, double u, double v) {
  const double uc = std::clamp(u, 0.0, static_cast<double>(d.width - 1));
  const double vc = std::clamp(v, 0.0, static_cast<double>(d.height - 1));
  const int c0 = std::min(static_cast<int>(uc), std::max(d.width - 2, 0));
  const int r0 = std::min(static_cast<int>(vc), std::max(d.height - 2, 0));
  const int c1 = std::min(c0 + 1, d.width - 1);
  const int r1 = std::min(r0 + 1, d.height - 1);
  const double a = uc - c0;
  const double b = vc - r0;
  return (1 - a) * (1 - b) * d.at(r0, c0) + a * (1 - b) * d.at(r0, c1) + (1 - a) * b * d.at(r1, c0) +
         a * b * d.at(r1, c1);
}

struct AssembledField {
  TrajectoryField field;
  std::size_t clamped_samples = 0;    // visible tracks outside the image
  std::size_t invalid_depth = 0;      // entries dropped for non-positive depth
};

/// Lifts every track with its own frame's depth map.
inline AssembledField assemble_field(std::span<const DepthMap> depths, const Tracks& tracks, const Intrinsics& k) {
  validate(k);
  const std::size_t n = static_cast<std::size_t>(k.width) * k.height;
  if (depths.empty()) fail(ErrorKind::kData, "no depth frames");
  if (tracks.num_frames != static_cast<int>(depths.size()))
    fail(ErrorKind::kData, "frame count mismatch: " + std::to_string(depths.size()) + " depth maps, " +
                               std::to_string(tracks.num_frames) + " track frames");
  if (tracks.num_points != n)
    fail(ErrorKind::kData, "track count " + std::to_string(tracks.num_points) + " does not match the " +
                               std::to_string(k.width) + "x" + std::to_string(k.height) + " grid");
  for (std::size_t f = 0; f < depths.size(); ++f)
    if (depths[f].width != k.width || depths[f].height != k.height)
      fail(ErrorKind::kData, "depth frame " + std::to_string(f) + " size does not match intrinsics");

  AssembledField out;
  out.field = TrajectoryField(tracks.num_frames, k.height, k.width, k);
  TrajectoryField& field = out.field;
  for (std::size_t i = 0; i < n; ++i) {
    const int row = static_cast<int>(i / k.width);
    const int col = static_cast<int>(i % k.width);
    const double u = tracks.u[i];
    const double v = tracks.v[i];
    if (!tracks.visible[i] || std::abs(u - col) > 0.5 || std::abs(v - row) > 0.5)
      fail(ErrorKind::kData, "frame-0 track " + std::to_string(i) + " is not on its grid pixel");
    const double z = sample_bilinear(depths[0], u, v);
    if (!(z > 0.0))
      fail(ErrorKind::kData, "non-positive depth at frame 0, pixel (row " + std::to_string(row) + ", col " +
                                 std::to_string(col) + ")");
    field.at(0, i) = unproject({u, v}, z, k);
  }
  for (int f = 1; f < tracks.num_frames; ++f) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = tracks.index(f, i);
      bool vis = tracks.visible[idx] != 0;
      Vec3 p = field.at(f - 1, i);
      if (vis) {
        const Pixel2 px(tracks.u[idx], tracks.v[idx]);
        if (!in_image(px, k)) ++out.clamped_samples;
        const double z = sample_bilinear(depths[static_cast<std::size_t>(f)], px.x(), px.y());
        if (z > 0.0 && z >= kDefaultZMin) {
          p = unproject(px, z, k);
        } else {
          vis = false;
          ++out.invalid_depth;
        }
      }
      field.at(f, i) = p;
      field.visible[field.index(f, i)] = vis;
    }
  }
  return out;
}

}  // namespace camctl
