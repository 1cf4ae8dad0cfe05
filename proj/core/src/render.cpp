#include "qtrack/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace qtrack::render {

namespace {

void put_pixel(Image& img, int x, int y, std::uint8_t r, std::uint8_t g,
               std::uint8_t b) {
  if (x < 0 || y < 0 || x >= img.w || y >= img.h) return;
  std::size_t at = 3 * (static_cast<std::size_t>(y) * img.w + x);
  img.rgb[at] = r;
  img.rgb[at + 1] = g;
  img.rgb[at + 2] = b;
}

std::array<std::uint8_t, 3> hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  double c = v * s;
  double hp = h * 6.0;
  double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else { r = c; b = x; }
  double m = v - c;
  auto to8 = [&](double t) {
    return static_cast<std::uint8_t>(std::lround(255.0 * (t + m)));
  };
  return {to8(r), to8(g), to8(b)};
}

/// Black -> red -> yellow -> white ramp for t in [0, 1].
std::array<std::uint8_t, 3> heat(double t) {
  t = std::clamp(t, 0.0, 1.0);
  auto to8 = [](double v) {
    return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
  };
  return {to8(3.0 * t), to8(3.0 * t - 1.0), to8(3.0 * t - 2.0)};
}

}  // namespace

Image solid(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (w <= 0 || h <= 0) throw std::invalid_argument("image size must be positive");
  Image img;
  img.w = w;
  img.h = h;
  img.rgb.resize(3 * static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < img.rgb.size(); i += 3) {
    img.rgb[i] = r;
    img.rgb[i + 1] = g;
    img.rgb[i + 2] = b;
  }
  return img;
}

void draw_box(Image& img, const BoundingBox& box, std::uint8_t r,
              std::uint8_t g, std::uint8_t b, int thickness) {
  int x0 = static_cast<int>(std::lround((box.cx - 0.5 * box.w) * img.w));
  int y0 = static_cast<int>(std::lround((box.cy - 0.5 * box.h) * img.h));
  int x1 = static_cast<int>(std::lround((box.cx + 0.5 * box.w) * img.w));
  int y1 = static_cast<int>(std::lround((box.cy + 0.5 * box.h) * img.h));
  for (int t = 0; t < thickness; ++t) {
    for (int x = x0; x <= x1; ++x) {
      put_pixel(img, x, y0 + t, r, g, b);
      put_pixel(img, x, y1 - t, r, g, b);
    }
    for (int y = y0; y <= y1; ++y) {
      put_pixel(img, x0 + t, y, r, g, b);
      put_pixel(img, x1 - t, y, r, g, b);
    }
  }
}

std::array<std::uint8_t, 3> id_color(int id) {
  // Golden-angle steps cover the hue circle without repeats for a long time.
  double hue = std::fmod(0.61803398875 * static_cast<double>(id), 1.0);
  if (hue < 0.0) hue += 1.0;
  return hsv_to_rgb(hue, 0.8, 0.95);
}

Image render_overlay(const metrics::TrackedFrame& gt,
                     const metrics::TrackedFrame& pred, int w, int h) {
  Image img = solid(w, h, 24, 24, 28);
  for (const BoundingBox& box : gt.boxes) draw_box(img, box, 120, 120, 120, 1);
  for (std::size_t i = 0; i < pred.ids.size(); ++i) {
    auto [r, g, b] = id_color(pred.ids[i]);
    draw_box(img, pred.boxes[i], r, g, b, 2);
  }
  return img;
}

Image render_attention(const Eigen::MatrixXd& weights, int cell) {
  if (cell < 1) throw std::invalid_argument("cell size must be positive");
  if (weights.size() == 0) return solid(cell, cell, 8, 8, 8);
  double peak = weights.maxCoeff();
  if (peak <= 0.0) peak = 1.0;
  Image img = solid(static_cast<int>(weights.cols()) * cell,
                    static_cast<int>(weights.rows()) * cell, 0, 0, 0);
  for (Eigen::Index r = 0; r < weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < weights.cols(); ++c) {
      auto [cr, cg, cb] = heat(weights(r, c) / peak);
      for (int y = 0; y < cell; ++y)
        for (int x = 0; x < cell; ++x)
          put_pixel(img, static_cast<int>(c) * cell + x,
                    static_cast<int>(r) * cell + y, cr, cg, cb);
    }
  }
  return img;
}

void write_ppm(const Image& img, const std::string& path) {
  if (img.w <= 0 || img.h <= 0 ||
      img.rgb.size() != 3 * static_cast<std::size_t>(img.w) * img.h)
    throw std::invalid_argument(path + ": malformed image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "P6\n" << img.w << ' ' << img.h << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.rgb.data()),
            static_cast<std::streamsize>(img.rgb.size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace qtrack::render
