#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "qtrack/box.hpp"
#include "qtrack/metrics.hpp"

namespace qtrack::render {

/// Plain RGB8 raster, row-major.
struct Image {
  int w = 0;
  int h = 0;
  std::vector<std::uint8_t> rgb;  // 3 * w * h bytes
};

Image solid(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b);

/// Outline of a normalized center box, clipped to the raster.
void draw_box(Image& img, const BoundingBox& box, std::uint8_t r,
              std::uint8_t g, std::uint8_t b, int thickness = 1);

/// Deterministic id -> color assignment (golden-angle hue walk), so a track
/// keeps one color across every frame and tool.
std::array<std::uint8_t, 3> id_color(int id);

/// Debug overlay: ground truth in gray underneath, predictions colored by
/// id on top.
Image render_overlay(const metrics::TrackedFrame& gt,
                     const metrics::TrackedFrame& pred, int w, int h);

/// Attention weights as a heat map, `cell` pixels per matrix entry,
/// normalized by the largest weight. An empty matrix renders a single
/// dark cell.
Image render_attention(const Eigen::MatrixXd& weights, int cell = 16);

/// Binary PPM (P6), a lossless raster every image viewer understands.
void write_ppm(const Image& img, const std::string& path);

}  // namespace qtrack::render
