#pragma once

#include <compare>

namespace podcount {

struct Point2 {
  double x{0.0};
  double y{0.0};

  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Axis-aligned box in continuous pixel coordinates, stored as
/// (left, top, width, height) to match VIA rectangle attributes.
/// Width and height are strictly positive and all fields finite; the
/// constructor throws Error(InvalidBox) otherwise.
class BoundingBox {
 public:
  BoundingBox(double x, double y, double w, double h);

  /// Build from corner form (x1, y1) top-left, (x2, y2) bottom-right.
  static BoundingBox from_corners(double x1, double y1, double x2, double y2);

  [[nodiscard]] double x() const noexcept { return x_; }
  [[nodiscard]] double y() const noexcept { return y_; }
  [[nodiscard]] double w() const noexcept { return w_; }
  [[nodiscard]] double h() const noexcept { return h_; }
  [[nodiscard]] double right() const noexcept { return x_ + w_; }
  [[nodiscard]] double bottom() const noexcept { return y_ + h_; }
  [[nodiscard]] double area() const noexcept { return w_ * h_; }

  [[nodiscard]] BoundingBox translated(double dx, double dy) const;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;

 private:
  double x_;
  double y_;
  double w_;
  double h_;
};

[[nodiscard]] double iou(const BoundingBox& a, const BoundingBox& b) noexcept;
[[nodiscard]] Point2 centroid(const BoundingBox& b) noexcept;
[[nodiscard]] double euclidean(const Point2& p, const Point2& q) noexcept;

}  // namespace podcount
