#include "podcount/featurize.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "podcount/error.hpp"

namespace podcount {

namespace {

constexpr char kMagic[8] = {'P', 'C', 'F', 'G', 'R', 'I', 'D', '1'};
constexpr std::string_view kTextMagic = "PCFGRID-TEXT";

void check_finite(std::span<const float> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::NonFiniteValue,
                  "grid value " + std::to_string(i) + " is not finite");
    }
  }
}

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xFFu));
  }
}

template <typename T>
T get_le(std::span<const unsigned char> bytes, std::size_t& pos) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  if (pos + sizeof(U) > bytes.size()) {
    throw Error(ErrorCode::ShapeMismatch, "grid file ends early");
  }
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bits |= static_cast<U>(bytes[pos + i]) << (8 * i);
  }
  pos += sizeof(U);
  return std::bit_cast<T>(bits);
}

struct CellAccumulator {
  std::vector<double> count;
  std::vector<double> score_sum;
  std::vector<double> area_sum;
};

FeatureGrid finish(const CellAccumulator& acc, GridSize grid) {
  FeatureGrid out(3, grid.height, grid.width);
  const std::size_t cells = grid.width * grid.height;
  auto data = out.data();
  for (std::size_t i = 0; i < cells; ++i) {
    const double n = acc.count[i];
    data[i] = static_cast<float>(n);
    if (n > 0) {
      data[cells + i] = static_cast<float>(acc.score_sum[i] / n);
      data[2 * cells + i] = static_cast<float>(acc.area_sum[i] / n);
    }
  }
  return out;
}

FeatureGrid bin_detections(std::span<const Detection> detections, double left,
                           double top, double width, double height,
                           GridSize grid, bool crop) {
  if (!(width > 0.0) || !(height > 0.0) || grid.width == 0 || grid.height == 0) {
    throw Error(ErrorCode::ShapeMismatch, "image and grid sizes must be positive");
  }
  const std::size_t cells = grid.width * grid.height;
  CellAccumulator acc{std::vector<double>(cells, 0.0),
                      std::vector<double>(cells, 0.0),
                      std::vector<double>(cells, 0.0)};
  const double gw = static_cast<double>(grid.width);
  const double gh = static_cast<double>(grid.height);
  for (const auto& d : detections) {
    if (!d.score) {
      throw Error(ErrorCode::UnscoredDetection, "heatmap input needs scores");
    }
    const Point2 c = centroid(d.box);
    double u = c.x - left;
    double v = c.y - top;
    if (crop && (u < 0.0 || u >= width || v < 0.0 || v >= height)) continue;
    u = std::clamp(u, 0.0, width);
    v = std::clamp(v, 0.0, height);
    const auto cx = std::min(static_cast<std::size_t>(std::floor(u * gw / width)),
                             grid.width - 1);
    const auto cy = std::min(static_cast<std::size_t>(std::floor(v * gh / height)),
                             grid.height - 1);
    const std::size_t cell = cy * grid.width + cx;
    acc.count[cell] += 1.0;
    acc.score_sum[cell] += *d.score;
    acc.area_sum[cell] += d.box.area() / (width * height);
  }
  return finish(acc, grid);
}

}  // namespace

FeatureGrid::FeatureGrid(std::size_t channels, std::size_t height,
                         std::size_t width)
    : FeatureGrid(channels, height, width,
                  std::vector<float>(channels * height * width, 0.0f)) {}

FeatureGrid::FeatureGrid(std::size_t channels, std::size_t height,
                         std::size_t width, std::vector<float> data)
    : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
  if (channels == 0 || height == 0 || width == 0) {
    throw Error(ErrorCode::ShapeMismatch, "grid extents must be positive");
  }
  if (data_.size() != channels * height * width) {
    throw Error(ErrorCode::ShapeMismatch,
                "grid declares " + std::to_string(channels * height * width) +
                    " values but holds " + std::to_string(data_.size()));
  }
  check_finite(data_);
}

FeatureGrid detection_heatmap(std::span<const Detection> detections,
                              ImageSize image, GridSize grid) {
  return bin_detections(detections, 0.0, 0.0, image.width, image.height, grid,
                        false);
}

FeatureGrid detection_heatmap_in(std::span<const Detection> detections,
                                 const BoundingBox& roi, GridSize grid) {
  return bin_detections(detections, roi.x(), roi.y(), roi.w(), roi.h(), grid,
                        true);
}

std::vector<unsigned char> encode_feature_grid(const FeatureGrid& grid) {
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  put_le(out, static_cast<std::uint32_t>(grid.channels()));
  put_le(out, static_cast<std::uint32_t>(grid.height()));
  put_le(out, static_cast<std::uint32_t>(grid.width()));
  put_le(out, static_cast<std::uint64_t>(grid.data().size()));
  for (float v : grid.data()) put_le(out, v);
  return out;
}

FeatureGrid decode_feature_grid(std::span<const unsigned char> bytes) {
  if (bytes.size() < sizeof(kMagic) + 20 ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::MalformedHeader, "not a feature grid file");
  }
  std::size_t pos = sizeof(kMagic);
  const auto c = get_le<std::uint32_t>(bytes, pos);
  const auto h = get_le<std::uint32_t>(bytes, pos);
  const auto w = get_le<std::uint32_t>(bytes, pos);
  const auto n = get_le<std::uint64_t>(bytes, pos);
  if (c == 0 || h == 0 || w == 0) {
    throw Error(ErrorCode::MalformedHeader, "grid extents must be positive");
  }
  const std::uint64_t expected = std::uint64_t{c} * h * w;
  const std::uint64_t available = (bytes.size() - pos) / 4;
  if (n != expected || available != expected || (bytes.size() - pos) % 4 != 0) {
    throw Error(ErrorCode::ShapeMismatch,
                "header shape " + std::to_string(c) + "x" + std::to_string(h) +
                    "x" + std::to_string(w) + " vs " + std::to_string(n) +
                    " declared and " + std::to_string(available) + " stored values");
  }
  std::vector<float> data;
  data.reserve(expected);
  for (std::uint64_t i = 0; i < expected; ++i) data.push_back(get_le<float>(bytes, pos));
  return FeatureGrid(c, h, w, std::move(data));
}

void save_feature_grid(const std::string& path, const FeatureGrid& grid) {
  const auto bytes = encode_feature_grid(grid);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for '" + path + "'");
}

void save_feature_grid_text(const std::string& path, const FeatureGrid& grid) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write '" + path + "'");
  out << kTextMagic << ' ' << grid.channels() << ' ' << grid.height() << ' '
      << grid.width() << ' ' << grid.data().size() << '\n';
  out.precision(9);  // round-trips binary32
  std::size_t i = 0;
  for (float v : grid.data()) {
    out << v << (++i % grid.width() == 0 ? '\n' : ' ');
  }
}

FeatureGrid load_feature_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() >= kTextMagic.size() &&
      std::memcmp(bytes.data(), kTextMagic.data(), kTextMagic.size()) == 0) {
    std::istringstream text(std::string(bytes.begin(), bytes.end()));
    std::string magic;
    std::size_t c = 0, h = 0, w = 0, n = 0;
    if (!(text >> magic >> c >> h >> w >> n) || c == 0 || h == 0 || w == 0) {
      throw Error(ErrorCode::MalformedHeader, "bad text grid header in '" + path + "'");
    }
    std::vector<float> data;
    std::string token;
    while (text >> token) {
      try {
        data.push_back(std::stof(token));
      } catch (const std::out_of_range&) {
        throw Error(ErrorCode::NonFiniteValue, "value out of range: " + token);
      } catch (const std::exception&) {
        if (token == "nan" || token == "inf" || token == "-inf") {
          throw Error(ErrorCode::NonFiniteValue, "value is not finite: " + token);
        }
        throw Error(ErrorCode::MalformedHeader, "bad value token: " + token);
      }
    }
    if (n != c * h * w || data.size() != n) {
      throw Error(ErrorCode::ShapeMismatch,
                  "text grid declares " + std::to_string(c * h * w) + " values, found " +
                      std::to_string(data.size()));
    }
    return FeatureGrid(c, h, w, std::move(data));
  }
  return decode_feature_grid(bytes);
}

}  // namespace podcount
