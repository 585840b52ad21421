#include "podcount/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "podcount/error.hpp"

namespace podcount {

void TrackerConfig::validate() const {
  if (expiry_frames < 1) {
    throw Error(ErrorCode::InvalidConfig, "expiry_frames must be at least 1");
  }
  if (!(max_match_distance > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "max_match_distance must be positive");
  }
}

CentroidTracker::CentroidTracker(TrackerConfig config) : config_(config) {
  config_.validate();
}

FrameAssignment CentroidTracker::step(std::int64_t frame_id,
                                      std::span<const BoundingBox> detections) {
  if (last_frame_ && frame_id <= *last_frame_) {
    throw Error(ErrorCode::NonMonotonicFrame,
                "frame " + std::to_string(frame_id) + " does not follow frame " +
                    std::to_string(*last_frame_));
  }
  last_frame_ = frame_id;

  std::vector<Point2> centers;
  centers.reserve(detections.size());
  for (const auto& b : detections) centers.push_back(centroid(b));

  struct Pair {
    double distance;
    std::size_t track;
    std::size_t detection;
  };
  std::vector<Pair> pairs;
  pairs.reserve(active_.size() * centers.size());
  for (std::size_t t = 0; t < active_.size(); ++t) {
    for (std::size_t d = 0; d < centers.size(); ++d) {
      const double dist = euclidean(active_[t].last_centroid, centers[d]);
      if (dist <= config_.max_match_distance) pairs.push_back({dist, t, d});
    }
  }
  // active_ is kept in id order, so the track index breaks ties by id.
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(a.distance, a.track, a.detection) <
           std::tie(b.distance, b.track, b.detection);
  });

  std::vector<bool> track_used(active_.size(), false);
  std::vector<bool> det_used(centers.size(), false);
  FrameAssignment out;
  out.frame_id = frame_id;
  for (const auto& p : pairs) {
    if (track_used[p.track] || det_used[p.detection]) continue;
    track_used[p.track] = true;
    det_used[p.detection] = true;
    Track& tr = active_[p.track];
    tr.last_centroid = centers[p.detection];
    tr.missed_frames = 0;
    tr.last_seen_frame = frame_id;
    tr.centroid_history.emplace_back(frame_id, centers[p.detection]);
    out.assignments.push_back({p.detection, tr.id});
  }

  // Age unmatched tracks before spawning, so new tracks are never aged.
  std::vector<Track> survivors;
  survivors.reserve(active_.size() + centers.size());
  for (std::size_t t = 0; t < active_.size(); ++t) {
    Track& tr = active_[t];
    if (!track_used[t] && ++tr.missed_frames >= config_.expiry_frames) {
      tr.expired_at = frame_id;
      out.expired_ids.push_back(tr.id);
      expired_.push_back(std::move(tr));
      continue;
    }
    survivors.push_back(std::move(tr));
  }
  active_ = std::move(survivors);

  for (std::size_t d = 0; d < centers.size(); ++d) {
    if (det_used[d]) continue;
    Track tr;
    tr.id = next_id_++;
    tr.last_centroid = centers[d];
    tr.first_frame = frame_id;
    tr.last_seen_frame = frame_id;
    tr.centroid_history.emplace_back(frame_id, centers[d]);
    out.assignments.push_back({d, tr.id});
    out.new_ids.push_back(tr.id);
    active_.push_back(std::move(tr));
  }

  std::sort(out.assignments.begin(), out.assignments.end(),
            [](const Assignment& a, const Assignment& b) {
              return a.detection_index < b.detection_index;
            });
  return out;
}

std::vector<Track> CentroidTracker::active_tracks() const { return active_; }

std::vector<Track> CentroidTracker::all_tracks() const {
  std::vector<Track> all = expired_;
  all.insert(all.end(), active_.begin(), active_.end());
  std::sort(all.begin(), all.end(),
            [](const Track& a, const Track& b) { return a.id < b.id; });
  return all;
}

TrackingResult run_sequence(std::span<const FrameRecord> frames,
                            const TrackerConfig& config,
                            std::string_view label) {
  CentroidTracker tracker(config);
  TrackingResult result;
  result.frames.reserve(frames.size());
  for (const auto& f : frames) {
    std::vector<BoundingBox> boxes;
    std::vector<std::size_t> original;
    for (std::size_t i = 0; i < f.detections.size(); ++i) {
      if (!label.empty() && f.detections[i].label != label) continue;
      boxes.push_back(f.detections[i].box);
      original.push_back(i);
    }
    FrameAssignment fa = tracker.step(f.frame_id, boxes);
    for (auto& a : fa.assignments) a.detection_index = original[a.detection_index];
    result.frames.push_back(std::move(fa));
  }
  result.tracks = tracker.all_tracks();
  return result;
}

std::string format_track_records(const TrackingResult& result) {
  std::ostringstream out;
  for (const auto& f : result.frames) {
    for (const auto& a : f.assignments) {
      nlohmann::json rec = {{"frame_id", f.frame_id},
                            {"detection_index", a.detection_index},
                            {"track_id", a.track_id}};
      out << rec.dump() << '\n';
    }
  }
  return out.str();
}

std::string format_track_summary(const TrackingResult& result) {
  std::ostringstream out;
  out << "track_id,first_frame,last_seen_frame,n_observations\n";
  for (const auto& t : result.tracks) {
    out << t.id << ',' << t.first_frame << ',' << t.last_seen_frame << ','
        << t.centroid_history.size() << '\n';
  }
  return out.str();
}

TrackingResult parse_track_records(std::string_view text,
                                   std::span<const FrameRecord> frames) {
  std::map<std::int64_t, const FrameRecord*> frame_by_id;
  for (const auto& f : frames) frame_by_id[f.frame_id] = &f;

  std::map<std::int64_t, FrameAssignment> by_frame;
  std::map<std::int64_t, Track> by_track;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::int64_t frame_id = 0, track_id = 0;
    std::size_t det = 0;
    try {
      const auto rec = nlohmann::json::parse(line);
      frame_id = rec.at("frame_id").get<std::int64_t>();
      det = rec.at("detection_index").get<std::size_t>();
      track_id = rec.at("track_id").get<std::int64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedLine,
                  "track record line " + std::to_string(line_no) + ": " + e.what());
    }
    auto& fa = by_frame[frame_id];
    fa.frame_id = frame_id;
    fa.assignments.push_back({det, track_id});

    Point2 c{};
    if (const auto it = frame_by_id.find(frame_id); it != frame_by_id.end()) {
      if (det >= it->second->detections.size()) {
        throw Error(ErrorCode::MalformedLine,
                    "track record line " + std::to_string(line_no) +
                        ": detection index out of range");
      }
      c = centroid(it->second->detections[det].box);
    }
    auto [tit, inserted] = by_track.try_emplace(track_id);
    Track& t = tit->second;
    if (inserted) {
      t.id = track_id;
      t.first_frame = frame_id;
      t.last_seen_frame = frame_id;
    }
    t.first_frame = std::min(t.first_frame, frame_id);
    if (frame_id >= t.last_seen_frame) {
      t.last_seen_frame = frame_id;
      t.last_centroid = c;
    }
    t.centroid_history.emplace_back(frame_id, c);
  }

  TrackingResult result;
  for (auto& [id, fa] : by_frame) {
    std::sort(fa.assignments.begin(), fa.assignments.end(),
              [](const Assignment& a, const Assignment& b) {
                return a.detection_index < b.detection_index;
              });
    result.frames.push_back(std::move(fa));
  }
  for (auto& [id, t] : by_track) {
    std::sort(t.centroid_history.begin(), t.centroid_history.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    result.tracks.push_back(std::move(t));
  }
  return result;
}

}  // namespace podcount
