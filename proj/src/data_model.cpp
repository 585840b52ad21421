#include "podcount/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "podcount/error.hpp"

namespace podcount {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::int64_t parse_int(const std::string& s, std::string_view what) {
  std::size_t used = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw Error(ErrorCode::MalformedDocument,
                std::string(what) + " is not an integer: '" + s + "'");
  }
  return v;
}

double number_field(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) {
    throw Error(ErrorCode::MissingField, std::string("missing numeric field '") +
                                             key + "'");
  }
  return it->get<double>();
}

Detection detection_from_json(const json& obj) {
  const double x = number_field(obj, "x");
  const double y = number_field(obj, "y");
  const double w = number_field(obj, "w");
  const double h = number_field(obj, "h");
  Detection det{BoundingBox(x, y, w, h), std::nullopt, std::string(kPodLabel)};
  if (const auto it = obj.find("score"); it != obj.end() && !it->is_null()) {
    if (!it->is_number()) {
      throw Error(ErrorCode::MissingField, "score must be a number");
    }
    const double score = it->get<double>();
    if (!(score >= 0.0 && score <= 1.0)) {
      throw Error(ErrorCode::MissingField, "score outside [0, 1]");
    }
    det.score = score;
  }
  if (const auto it = obj.find("label"); it != obj.end()) {
    if (!it->is_string()) {
      throw Error(ErrorCode::MissingField, "label must be a string");
    }
    det.label = it->get<std::string>();
  }
  return det;
}

json detection_to_json(const Detection& det) {
  json obj = json::object();
  obj["x"] = det.box.x();
  obj["y"] = det.box.y();
  obj["w"] = det.box.w();
  obj["h"] = det.box.h();
  if (det.score) obj["score"] = *det.score;
  obj["label"] = det.label;
  return obj;
}

void parse_region(const json& region, const std::string& image,
                  std::size_t index, AnnotationSet& out) {
  const std::string where =
      "image '" + image + "' region " + std::to_string(index);
  if (!region.is_object()) {
    throw Error(ErrorCode::MalformedDocument, where + " is not an object");
  }
  const auto shape_it = region.find("shape_attributes");
  if (shape_it == region.end() || !shape_it->is_object()) {
    throw Error(ErrorCode::MissingField, where + " lacks shape_attributes");
  }
  const json& shape = *shape_it;
  const auto name_it = shape.find("name");
  if (name_it != shape.end() && name_it->is_string() &&
      name_it->get<std::string>() != "rect") {
    ++out.skipped_regions;
    return;
  }
  std::string label(kPodLabel);
  if (const auto attrs = region.find("region_attributes");
      attrs != region.end() && attrs->is_object()) {
    for (const char* key : {"label", "class", "name"}) {
      const auto it = attrs->find(key);
      if (it != attrs->end() && it->is_string()) {
        label = it->get<std::string>();
        break;
      }
    }
  }
  try {
    const double x = number_field(shape, "x");
    const double y = number_field(shape, "y");
    const double w = number_field(shape, "width");
    const double h = number_field(shape, "height");
    out.images[image].push_back(
        Detection{BoundingBox(x, y, w, h), std::nullopt, std::move(label)});
  } catch (const Error& e) {
    throw Error(ErrorCode::MissingField, where + ": " + e.what());
  }
}

}  // namespace

std::string_view to_string(Side side) noexcept {
  switch (side) {
    case Side::A: return "A";
    case Side::B: return "B";
    case Side::FRONT: return "FRONT";
    case Side::LEFT: return "LEFT";
    case Side::RIGHT: return "RIGHT";
  }
  return "?";
}

Side parse_side(std::string_view name) {
  for (Side s : {Side::A, Side::B, Side::FRONT, Side::LEFT, Side::RIGHT}) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorCode::MalformedDocument,
              "unknown side '" + std::string(name) + "'");
}

AnnotationSet parse_annotations(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedDocument, e.what());
  }
  AnnotationSet out;
  if (doc.is_null()) return out;
  if (!doc.is_object()) {
    throw Error(ErrorCode::MalformedDocument, "top level must be an object");
  }
  // Full VIA project files nest the image table under "_via_img_metadata".
  const json& images = doc.contains("_via_img_metadata")
                           ? doc.at("_via_img_metadata")
                           : doc;
  for (const auto& [key, entry] : images.items()) {
    if (!entry.is_object()) {
      throw Error(ErrorCode::MalformedDocument,
                  "entry '" + key + "' is not an object");
    }
    std::string image = key;
    if (const auto it = entry.find("filename");
        it != entry.end() && it->is_string()) {
      image = it->get<std::string>();
    }
    out.images.try_emplace(image);
    const auto regions = entry.find("regions");
    if (regions == entry.end() || regions->is_null()) continue;
    if (regions->is_array()) {
      for (std::size_t i = 0; i < regions->size(); ++i) {
        parse_region((*regions)[i], image, i, out);
      }
    } else if (regions->is_object()) {
      std::size_t i = 0;
      for (const auto& [_, region] : regions->items()) {
        parse_region(region, image, i++, out);
      }
    } else {
      throw Error(ErrorCode::MalformedDocument,
                  "regions of '" + image + "' must be an array");
    }
  }
  return out;
}

std::string serialize_annotations(const AnnotationSet& set) {
  json doc = json::object();
  for (const auto& [image, dets] : set.images) {
    json regions = json::array();
    for (const auto& d : dets) {
      regions.push_back({{"shape_attributes",
                          {{"name", "rect"},
                           {"x", d.box.x()},
                           {"y", d.box.y()},
                           {"width", d.box.w()},
                           {"height", d.box.h()}}},
                         {"region_attributes", {{"label", d.label}}}});
    }
    doc[image] = {{"filename", image},
                  {"regions", std::move(regions)},
                  {"file_attributes", json::object()}};
  }
  return doc.dump(1) + "\n";
}

std::vector<FrameRecord> parse_detections(std::istream& in) {
  std::vector<FrameRecord> frames;
  std::set<std::int64_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const std::string where = "line " + std::to_string(line_no);
    FrameRecord rec;
    try {
      const json obj = json::parse(body);
      const auto fid = obj.find("frame_id");
      if (fid == obj.end() || !fid->is_number_integer()) {
        throw Error(ErrorCode::MissingField, "frame_id must be an integer");
      }
      rec.frame_id = fid->get<std::int64_t>();
      if (rec.frame_id < 0) {
        throw Error(ErrorCode::MissingField, "frame_id must be nonnegative");
      }
      const auto dets = obj.find("detections");
      if (dets != obj.end() && !dets->is_null()) {
        if (!dets->is_array()) {
          throw Error(ErrorCode::MissingField, "detections must be an array");
        }
        for (const auto& d : *dets) rec.detections.push_back(detection_from_json(d));
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedLine, where + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedLine, where + ": " + e.what());
    }
    if (!seen.insert(rec.frame_id).second) {
      throw Error(ErrorCode::DuplicateFrame,
                  "frame_id " + std::to_string(rec.frame_id) + " at " + where);
    }
    frames.push_back(std::move(rec));
  }
  std::stable_sort(frames.begin(), frames.end(),
                   [](const FrameRecord& a, const FrameRecord& b) {
                     return a.frame_id < b.frame_id;
                   });
  return frames;
}

std::vector<FrameRecord> parse_detections(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_detections(in);
}

void write_detections(std::ostream& out, std::span<const FrameRecord> frames) {
  for (const auto& f : frames) {
    json dets = json::array();
    for (const auto& d : f.detections) dets.push_back(detection_to_json(d));
    json obj = {{"frame_id", f.frame_id}, {"detections", std::move(dets)}};
    out << obj.dump() << '\n';
  }
}

std::string serialize_detections(std::span<const FrameRecord> frames) {
  std::ostringstream out;
  write_detections(out, frames);
  return out.str();
}

std::vector<PlotMeta> parse_plot_meta(std::istream& in) {
  std::vector<PlotMeta> plots;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto cells = split(body, ',');
    if (header.empty()) {
      header = std::move(cells);
      continue;
    }
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::MalformedDocument,
                  "metadata line " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(header.size()));
    }
    PlotMeta m;
    bool have[5] = {false, false, false, false, false};
    for (std::size_t i = 0; i < header.size(); ++i) {
      const auto& col = header[i];
      if (col == "plot_id") {
        m.plot_id = cells[i];
        have[0] = true;
      } else if (col == "side") {
        m.side = parse_side(cells[i]);
        have[1] = true;
      } else if (col == "frame_start") {
        m.frame_start = parse_int(cells[i], "frame_start");
        have[2] = true;
      } else if (col == "frame_end") {
        m.frame_end = parse_int(cells[i], "frame_end");
        have[3] = true;
      } else if (col == "ground_truth_pods") {
        m.ground_truth_pods = parse_int(cells[i], "ground_truth_pods");
        have[4] = true;
      }
    }
    if (!std::all_of(std::begin(have), std::end(have), [](bool b) { return b; })) {
      throw Error(ErrorCode::MissingField,
                  "metadata header needs plot_id, side, frame_start, "
                  "frame_end, ground_truth_pods");
    }
    if (m.frame_start > m.frame_end || m.ground_truth_pods < 0) {
      throw Error(ErrorCode::MalformedDocument,
                  "metadata line " + std::to_string(line_no) +
                      ": needs frame_start <= frame_end and nonnegative pods");
    }
    plots.push_back(std::move(m));
  }
  return plots;
}

void write_plot_meta(std::ostream& out, std::span<const PlotMeta> plots) {
  out << "plot_id,side,frame_start,frame_end,ground_truth_pods\n";
  for (const auto& m : plots) {
    out << m.plot_id << ',' << to_string(m.side) << ',' << m.frame_start << ','
        << m.frame_end << ',' << m.ground_truth_pods << '\n';
  }
}

DatasetStats dataset_stats(std::span<const std::int64_t> counts) {
  if (counts.empty()) {
    throw Error(ErrorCode::EmptyDataset, "no counts to summarize");
  }
  DatasetStats s;
  s.n = counts.size();
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  s.min = static_cast<double>(*lo);
  s.max = static_cast<double>(*hi);
  // Integer sum keeps the mean exact and independent of input order.
  long double sum = 0;
  for (auto c : counts) sum += c;
  s.mean = static_cast<double>(sum / static_cast<long double>(s.n));
  long double ss = 0;
  const long double mean = sum / static_cast<long double>(s.n);
  for (auto c : counts) {
    const long double d = static_cast<long double>(c) - mean;
    ss += d * d;
  }
  s.std_population = static_cast<double>(std::sqrt(ss / s.n));
  s.std_sample =
      s.n > 1 ? static_cast<double>(std::sqrt(ss / (s.n - 1))) : 0.0;
  return s;
}

std::vector<std::int64_t> parse_counts(std::istream& in) {
  std::vector<std::int64_t> counts;
  std::string line;
  std::string first;
  std::ostringstream rest;
  while (std::getline(in, line)) {
    const std::string body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    if (first.empty()) {
      first = body;
      if (body.find("ground_truth_pods") != std::string::npos) {
        std::ostringstream all;
        all << body << '\n' << in.rdbuf();
        std::istringstream table(all.str());
        std::set<std::string> seen;
        for (const auto& m : parse_plot_meta(table)) {
          if (seen.insert(m.plot_id).second) counts.push_back(m.ground_truth_pods);
        }
        return counts;
      }
    }
    for (auto& cell : split(body, ',')) {
      std::istringstream words(cell);
      std::string word;
      while (words >> word) counts.push_back(parse_int(word, "count"));
    }
  }
  return counts;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for '" + path + "'");
}

std::vector<FrameRecord> read_detections_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "'");
  return parse_detections(in);
}

void write_detections_file(const std::string& path,
                           std::span<const FrameRecord> frames) {
  write_text_file(path, serialize_detections(frames));
}

std::vector<PlotMeta> read_plot_meta_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "'");
  return parse_plot_meta(in);
}

void write_plot_meta_file(const std::string& path,
                          std::span<const PlotMeta> plots) {
  std::ostringstream out;
  write_plot_meta(out, plots);
  write_text_file(path, out.str());
}

}  // namespace podcount
