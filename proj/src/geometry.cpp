#include "podcount/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "podcount/error.hpp"

namespace podcount {

BoundingBox::BoundingBox(double x, double y, double w, double h)
    : x_(x), y_(y), w_(w), h_(h) {
  const bool finite = std::isfinite(x) && std::isfinite(y) &&
                      std::isfinite(w) && std::isfinite(h);
  if (!finite || !(w > 0.0) || !(h > 0.0)) {
    std::ostringstream msg;
    msg << "box (" << x << ", " << y << ", " << w << ", " << h
        << ") needs finite coordinates and positive extent";
    throw Error(ErrorCode::InvalidBox, msg.str());
  }
}

BoundingBox BoundingBox::from_corners(double x1, double y1, double x2,
                                      double y2) {
  return BoundingBox(x1, y1, x2 - x1, y2 - y1);
}

BoundingBox BoundingBox::translated(double dx, double dy) const {
  return BoundingBox(x_ + dx, y_ + dy, w_, h_);
}

double iou(const BoundingBox& a, const BoundingBox& b) noexcept {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x(), b.x());
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y(), b.y());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  // Extents from the corners, so that iou(a, a) is exactly 1.
  const double area_a = (a.right() - a.x()) * (a.bottom() - a.y());
  const double area_b = (b.right() - b.x()) * (b.bottom() - b.y());
  const double inter = iw * ih;
  const double uni = area_a + area_b - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

Point2 centroid(const BoundingBox& b) noexcept {
  return {b.x() + b.w() / 2.0, b.y() + b.h() / 2.0};
}

double euclidean(const Point2& p, const Point2& q) noexcept {
  return std::hypot(p.x - q.x, p.y - q.y);
}

}  // namespace podcount
