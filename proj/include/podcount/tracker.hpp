#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "podcount/data_model.hpp"
#include "podcount/geometry.hpp"

namespace podcount {

struct TrackerConfig {
  /// Consecutive missed frames after which a track is removed.
  int expiry_frames{5};
  /// Pairs farther apart than this are never matched.
  double max_match_distance{std::numeric_limits<double>::infinity()};

  /// Throws InvalidConfig when expiry_frames < 1 or max_match_distance <= 0.
  void validate() const;
};

struct Track {
  std::int64_t id{0};
  Point2 last_centroid;
  int missed_frames{0};
  std::int64_t first_frame{0};
  std::int64_t last_seen_frame{0};
  std::vector<std::pair<std::int64_t, Point2>> centroid_history;
  /// Frame at which the track was removed; empty while active.
  std::optional<std::int64_t> expired_at;
};

struct Assignment {
  std::size_t detection_index{0};
  std::int64_t track_id{0};

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct FrameAssignment {
  std::int64_t frame_id{0};
  /// Sorted by detection index.
  std::vector<Assignment> assignments;
  std::vector<std::int64_t> new_ids;
  std::vector<std::int64_t> expired_ids;

  friend bool operator==(const FrameAssignment&, const FrameAssignment&) = default;
};

/// Centroid tracker. Each step pairs existing tracks with detections by
/// Euclidean centroid distance, consuming the globally sorted pair list
/// greedily (ties: lower track id, then lower detection index). Unmatched
/// detections open new tracks; a track that misses `expiry_frames`
/// consecutive steps is removed in that step and its id is never reused.
/// Stale tracks stay matchable until they expire.
class CentroidTracker {
 public:
  explicit CentroidTracker(TrackerConfig config = {});

  /// Throws NonMonotonicFrame unless frame_id exceeds the previous step's.
  FrameAssignment step(std::int64_t frame_id,
                       std::span<const BoundingBox> detections);

  /// Non-expired tracks, sorted by id.
  [[nodiscard]] std::vector<Track> active_tracks() const;
  /// Every track ever created (active and expired), sorted by id.
  [[nodiscard]] std::vector<Track> all_tracks() const;
  [[nodiscard]] const TrackerConfig& config() const noexcept { return config_; }

 private:
  TrackerConfig config_;
  std::vector<Track> active_;
  std::vector<Track> expired_;
  std::int64_t next_id_{0};
  std::optional<std::int64_t> last_frame_;
};

struct TrackingResult {
  std::vector<FrameAssignment> frames;
  /// Active and expired tracks with their lifetimes, sorted by id.
  std::vector<Track> tracks;
};

/// Folds CentroidTracker::step over a frame sequence. When `label` is
/// nonempty only detections with that label are tracked; detection indices
/// in the output always refer to positions in the original frame record.
TrackingResult run_sequence(std::span<const FrameRecord> frames,
                            const TrackerConfig& config,
                            std::string_view label = {});

/// Per-observation lines {"frame_id","detection_index","track_id"}.
std::string format_track_records(const TrackingResult& result);
/// Table track_id,first_frame,last_seen_frame,n_observations.
std::string format_track_summary(const TrackingResult& result);

/// Rebuilds frame assignments and track lifetimes from per-observation
/// lines. Centroids are filled from `frames` when given. Expiry frames are
/// not recorded in the file and stay empty. Throws MalformedLine.
TrackingResult parse_track_records(std::string_view text,
                                   std::span<const FrameRecord> frames = {});

}  // namespace podcount
