#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace camctl {

/// Row-major depth map in scene units (meters for metric depth).
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  DepthMap() = default;
  DepthMap(int w, int h, float fill = 0.0f)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  float at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
  float& at(int row, int col) { return values[static_cast<std::size_t>(row) * width + col]; }
  bool operator==(const DepthMap&) const = default;
};

/// Interleaved 8-bit RGB, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h, std::array<std::uint8_t, 3> fill = {0, 0, 0}) : width(w), height(h) {
    data.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < data.size(); i += 3) {
      data[i] = fill[0];
      data[i + 1] = fill[1];
      data[i + 2] = fill[2];
    }
  }

  std::array<std::uint8_t, 3> pixel(int row, int col) const {
    const std::size_t o = (static_cast<std::size_t>(row) * width + col) * 3;
    return {data[o], data[o + 1], data[o + 2]};
  }
  void set(int row, int col, std::array<std::uint8_t, 3> c) {
    const std::size_t o = (static_cast<std::size_t>(row) * width + col) * 3;
    data[o] = c[0];
    data[o + 1] = c[1];
    data[o + 2] = c[2];
  }
  bool operator==(const RgbImage&) const = default;
};

/// 8-bit single channel, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}
  bool operator==(const GrayImage&) const = default;
};

}  // namespace camctl
