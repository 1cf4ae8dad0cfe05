#pragma once

#include <array>
#include <stdexcept>

namespace qtrack {

/// Axis-aligned box, center parameterization, normalized to the frame
/// extent: cx, cy in [0,1], 0 < w,h <= 1.
struct BoundingBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  std::array<double, 4> to_xyxy() const {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }

  static BoundingBox from_xyxy(double x1, double y1, double x2, double y2) {
    return {0.5 * (x1 + x2), 0.5 * (y1 + y2), x2 - x1, y2 - y1};
  }

  bool valid() const {
    return cx >= 0.0 && cx <= 1.0 && cy >= 0.0 && cy <= 1.0 && w > 0.0 &&
           w <= 1.0 && h > 0.0 && h <= 1.0;
  }
};

/// Intersection over union, in [0,1]. Works for boxes in any common unit.
double iou(const BoundingBox& a, const BoundingBox& b);

/// Generalized IoU, in [-1,1]. Equals iou() when the enclosing box is the union.
double giou(const BoundingBox& a, const BoundingBox& b);

inline void check_valid(const BoundingBox& b, const char* what) {
  if (!b.valid()) throw std::invalid_argument(std::string(what) + ": invalid box");
}

}  // namespace qtrack
