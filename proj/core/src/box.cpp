#include "qtrack/box.hpp"

#include <algorithm>

namespace qtrack {

namespace {

struct Corners {
  double x1, y1, x2, y2;
};

Corners corners(const BoundingBox& b) {
  auto c = b.to_xyxy();
  return {c[0], c[1], c[2], c[3]};
}

double intersection_area(const Corners& a, const Corners& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

}  // namespace

double iou(const BoundingBox& a, const BoundingBox& b) {
  const Corners ca = corners(a), cb = corners(b);
  const double inter = intersection_area(ca, cb);
  const double uni = a.w * a.h + b.w * b.h - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

double giou(const BoundingBox& a, const BoundingBox& b) {
  const Corners ca = corners(a), cb = corners(b);
  const double inter = intersection_area(ca, cb);
  const double uni = a.w * a.h + b.w * b.h - inter;
  const double hull_w = std::max(ca.x2, cb.x2) - std::min(ca.x1, cb.x1);
  const double hull_h = std::max(ca.y2, cb.y2) - std::min(ca.y1, cb.y1);
  const double hull = hull_w * hull_h;
  if (uni <= 0.0 || hull <= 0.0) return 0.0;
  return inter / uni - (hull - uni) / hull;
}

}  // namespace qtrack
