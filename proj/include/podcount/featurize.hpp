#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "podcount/data_model.hpp"

namespace podcount {

/// C x H x W grid of finite values in channel-major order.
class FeatureGrid {
 public:
  FeatureGrid() = default;
  /// Zero-filled grid. Throws ShapeMismatch on a zero extent.
  FeatureGrid(std::size_t channels, std::size_t height, std::size_t width);
  /// Throws ShapeMismatch when data.size() != C*H*W, NonFiniteValue on
  /// NaN or infinity.
  FeatureGrid(std::size_t channels, std::size_t height, std::size_t width,
              std::vector<float> data);

  [[nodiscard]] std::size_t channels() const noexcept { return channels_; }
  [[nodiscard]] std::size_t height() const noexcept { return height_; }
  [[nodiscard]] std::size_t width() const noexcept { return width_; }
  [[nodiscard]] std::span<const float> data() const noexcept { return data_; }
  [[nodiscard]] std::span<float> data() noexcept { return data_; }

  float& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * height_ + y) * width_ + x];
  }
  [[nodiscard]] float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * height_ + y) * width_ + x];
  }

  friend bool operator==(const FeatureGrid&, const FeatureGrid&) = default;

 private:
  std::size_t channels_{0};
  std::size_t height_{0};
  std::size_t width_{0};
  std::vector<float> data_;
};

struct GridSize {
  std::size_t width{16};
  std::size_t height{16};
};

struct ImageSize {
  double width{1280.0};
  double height{720.0};
};

/// Three-channel detection heatmap standing in for a convolutional feature
/// extractor. Each detection is binned by its centroid (clamped into the
/// image):
///   [0] number of detections in the cell
///   [1] mean confidence of the cell's detections (0 for empty cells)
///   [2] mean box area / image area of the cell's detections
/// Throws UnscoredDetection when a detection lacks a score.
FeatureGrid detection_heatmap(std::span<const Detection> detections,
                              ImageSize image, GridSize grid = {});

/// Heatmap over a region of interest: detections whose centroid lies inside
/// `roi` are binned relative to it, and areas are normalized by the roi area.
FeatureGrid detection_heatmap_in(std::span<const Detection> detections,
                                 const BoundingBox& roi, GridSize grid = {});

// Binary grid file: 8-byte magic "PCFGRID1", then little-endian uint32 C, H, W,
// uint64 element count, then C*H*W little-endian IEEE-754 binary32 values.
// Text variant: first line "PCFGRID-TEXT C H W N", then N values.
void save_feature_grid(const std::string& path, const FeatureGrid& grid);
void save_feature_grid_text(const std::string& path, const FeatureGrid& grid);
/// Reads either variant. Throws MalformedHeader, ShapeMismatch, NonFiniteValue.
FeatureGrid load_feature_grid(const std::string& path);

std::vector<unsigned char> encode_feature_grid(const FeatureGrid& grid);
FeatureGrid decode_feature_grid(std::span<const unsigned char> bytes);

}  // namespace podcount
