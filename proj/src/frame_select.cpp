#include "podcount/frame_select.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "podcount/error.hpp"

namespace podcount {

namespace {

// floor(num / den) for den > 0.
std::int64_t floor_div(std::int64_t num, std::int64_t den) {
  std::int64_t q = num / den;
  if ((num % den != 0) && (num < 0)) --q;
  return q;
}

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

FrameSelection select_frames(std::int64_t start, std::int64_t end, int n) {
  if (start > end || n < 1) {
    throw Error(ErrorCode::InvalidRange,
                "need start <= end and n >= 1, got [" + std::to_string(start) +
                    ", " + std::to_string(end) + "], n=" + std::to_string(n));
  }
  FrameSelection sel;
  const std::int64_t den = n + 1;
  for (int k = 0; k < n; ++k) {
    // round_half_up(start + span*(k+1)/den) = floor((2*(start*den + span*(k+1)) + den) / (2*den))
    const std::int64_t num = start * den + (end - start) * (k + 1);
    sel.frames.push_back(floor_div(2 * num + den, 2 * den));
  }
  sel.short_range =
      std::adjacent_find(sel.frames.begin(), sel.frames.end()) != sel.frames.end();
  return sel;
}

std::vector<ViewSet> build_view_sets(std::span<const PlotMeta> plots,
                                     int n_per_side,
                                     std::span<const Side> required_sides,
                                     AugmentationConfig augmentation) {
  if (n_per_side < 1) {
    throw Error(ErrorCode::InvalidRange, "views per side must be at least 1");
  }
  if (augmentation.factor < 1 || augmentation.shift < 0) {
    throw Error(ErrorCode::InvalidConfig,
                "augmentation factor must be >= 1 and shift >= 0");
  }
  std::set<Side> required(required_sides.begin(), required_sides.end());
  if (required.empty()) {
    for (const auto& p : plots) required.insert(p.side);
  }

  // Keep plots in first-appearance order.
  std::vector<std::string> order;
  std::map<std::string, std::map<Side, const PlotMeta*>> by_plot;
  for (const auto& p : plots) {
    auto [it, inserted] = by_plot.try_emplace(p.plot_id);
    if (inserted) order.push_back(p.plot_id);
    it->second[p.side] = &p;
  }

  std::vector<ViewSet> out;
  out.reserve(order.size() * static_cast<std::size_t>(augmentation.factor));
  for (const auto& id : order) {
    const auto& sides = by_plot.at(id);
    for (Side s : required) {
      if (!sides.count(s)) {
        throw Error(ErrorCode::MissingSide, "plot '" + id + "' has no side " +
                                                std::string(to_string(s)));
      }
    }
    std::int64_t gt = -1;
    for (Side s : required) {
      const auto pods = sides.at(s)->ground_truth_pods;
      if (gt >= 0 && pods != gt) {
        throw Error(ErrorCode::InconsistentGroundTruth,
                    "plot '" + id + "' sides disagree on pod count");
      }
      gt = pods;
    }
    for (int variant = 0; variant < augmentation.factor; ++variant) {
      const int magnitude = (variant + 1) / 2;
      const std::int64_t offset = static_cast<std::int64_t>(
          (variant % 2 == 1 ? 1 : -1) * magnitude * augmentation.shift);
      ViewSet vs;
      vs.plot_id = id;
      vs.views_per_side = n_per_side;
      vs.sample_index = variant;
      vs.ground_truth_pods = gt;
      for (Side s : required) {
        const PlotMeta& m = *sides.at(s);
        for (auto f : select_frames(m.frame_start, m.frame_end, n_per_side).frames) {
          const auto shifted = std::clamp(f + offset, m.frame_start, m.frame_end);
          vs.views.push_back({s, shifted, std::nullopt});
        }
      }
      out.push_back(std::move(vs));
    }
  }
  return out;
}

std::vector<PlotMeta> ranges_from_tracks(std::span<const PlotMeta> plots,
                                         Side side,
                                         std::span<const Track> tracks) {
  std::vector<PlotMeta> out(plots.begin(), plots.end());
  std::map<std::size_t, std::pair<std::int64_t, std::int64_t>> ranges;
  for (const auto& t : tracks) {
    std::int64_t best_overlap = 0;
    std::size_t best = out.size();
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (out[i].side != side) continue;
      const auto lo = std::max(out[i].frame_start, t.first_frame);
      const auto hi = std::min(out[i].frame_end, t.last_seen_frame);
      const auto overlap = hi - lo + 1;
      if (overlap > best_overlap) {
        best_overlap = overlap;
        best = i;
      }
    }
    if (best == out.size()) continue;
    auto [it, inserted] =
        ranges.try_emplace(best, t.first_frame, t.last_seen_frame);
    if (!inserted) {
      it->second.first = std::min(it->second.first, t.first_frame);
      it->second.second = std::max(it->second.second, t.last_seen_frame);
    }
  }
  for (const auto& [i, r] : ranges) {
    out[i].frame_start = r.first;
    out[i].frame_end = r.second;
  }
  return out;
}

void attach_track_regions(std::span<ViewSet> view_sets,
                          std::span<const SideTracking> sides) {
  for (const auto& st : sides) {
    if (st.tracking == nullptr) continue;
    std::map<std::int64_t, const FrameRecord*> frame_by_id;
    for (const auto& f : st.frames) frame_by_id[f.frame_id] = &f;

    // Observed boxes per track, keyed by frame.
    std::map<std::int64_t, std::map<std::int64_t, BoundingBox>> boxes;
    for (const auto& fa : st.tracking->frames) {
      const auto it = frame_by_id.find(fa.frame_id);
      if (it == frame_by_id.end()) continue;
      for (const auto& a : fa.assignments) {
        boxes[a.track_id].insert_or_assign(
            fa.frame_id, it->second->detections.at(a.detection_index).box);
      }
    }
    // Plot id -> track with the largest overlap with the plot's range.
    std::map<std::string, std::int64_t> plot_track;
    for (const auto& m : st.plots) {
      if (m.side != st.side) continue;
      std::int64_t best_overlap = 0;
      for (const auto& t : st.tracking->tracks) {
        const auto overlap = std::min(m.frame_end, t.last_seen_frame) -
                             std::max(m.frame_start, t.first_frame) + 1;
        if (overlap > best_overlap) {
          best_overlap = overlap;
          plot_track[m.plot_id] = t.id;
        }
      }
    }
    for (auto& vs : view_sets) {
      const auto pt = plot_track.find(vs.plot_id);
      if (pt == plot_track.end()) continue;
      const auto& observed = boxes[pt->second];
      if (observed.empty()) continue;
      for (auto& v : vs.views) {
        if (v.side != st.side) continue;
        auto hit = observed.lower_bound(v.frame);
        if (hit == observed.end()) {
          hit = std::prev(observed.end());
        } else if (hit->first != v.frame && hit != observed.begin()) {
          const auto before = std::prev(hit);
          if (v.frame - before->first <= hit->first - v.frame) hit = before;
        }
        v.roi = hit->second;
      }
    }
  }
}

std::string format_view_manifest(std::span<const ViewSet> view_sets) {
  std::ostringstream out;
  out.precision(17);
  out << "plot_id,side,frame_id,sample_index,ground_truth_pods,views_per_side,"
         "roi_x,roi_y,roi_w,roi_h\n";
  for (const auto& vs : view_sets) {
    for (const auto& v : vs.views) {
      out << vs.plot_id << ',' << to_string(v.side) << ',' << v.frame << ','
          << vs.sample_index << ',' << vs.ground_truth_pods << ','
          << vs.views_per_side << ',';
      if (v.roi) {
        out << v.roi->x() << ',' << v.roi->y() << ',' << v.roi->w() << ','
            << v.roi->h();
      } else {
        out << ",,,";
      }
      out << '\n';
    }
  }
  return out.str();
}

std::vector<ViewSet> parse_view_manifest(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<std::string> header;
  std::vector<ViewSet> out;
  std::map<std::pair<std::string, int>, std::size_t> index;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto cells = split_cells(line);
    if (header.empty()) {
      header = std::move(cells);
      continue;
    }
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) {
      row[header[i]] = cells[i];
    }
    try {
      const std::string plot_id = row.at("plot_id");
      const Side side = parse_side(row.at("side"));
      const std::int64_t frame = std::stoll(row.at("frame_id"));
      const int sample = row.count("sample_index") && !row["sample_index"].empty()
                             ? std::stoi(row["sample_index"])
                             : 0;
      auto [it, inserted] = index.try_emplace({plot_id, sample}, out.size());
      if (inserted) {
        ViewSet vs;
        vs.plot_id = plot_id;
        vs.sample_index = sample;
        if (row.count("ground_truth_pods") && !row["ground_truth_pods"].empty()) {
          vs.ground_truth_pods = std::stoll(row["ground_truth_pods"]);
        }
        if (row.count("views_per_side") && !row["views_per_side"].empty()) {
          vs.views_per_side = std::stoi(row["views_per_side"]);
        }
        out.push_back(std::move(vs));
      }
      View v{side, frame, std::nullopt};
      if (row.count("roi_w") && !row["roi_w"].empty()) {
        v.roi = BoundingBox(std::stod(row.at("roi_x")), std::stod(row.at("roi_y")),
                            std::stod(row.at("roi_w")), std::stod(row.at("roi_h")));
      }
      out[it->second].views.push_back(v);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(ErrorCode::MalformedDocument,
                  "view manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace podcount
