#include "mot3d/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "mot3d/errors.hpp"

namespace mot3d {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view tok, std::size_t line, std::string_view what) {
  tok = trim(tok);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    throw ParseError("invalid " + std::string(what) + " '" + std::string(tok) + "'", line);
  }
  return v;
}

int parse_int(std::string_view tok, std::size_t line, std::string_view what) {
  tok = trim(tok);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError("invalid " + std::string(what) + " '" + std::string(tok) + "'", line);
  }
  return v;
}

void place(std::vector<std::vector<Detection3D>>& frames, Detection3D d) {
  const auto f = static_cast<std::size_t>(d.frame);
  if (frames.size() <= f) frames.resize(f + 1);
  frames[f].push_back(std::move(d));
}

void pad_frames(SequenceBundle& b) {
  const std::size_t n = std::max(b.frames.size(), b.dont_care.size());
  b.frames.resize(n);
  b.dont_care.resize(n);
}

}  // namespace

std::size_t SequenceBundle::object_count() const {
  std::size_t n = 0;
  for (const auto& f : frames) n += f.size();
  return n;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

Box3D kitti_to_canonical(const KittiPose& p) {
  // canonical x = camera z (forward), y = -camera x (left), z = -camera y (up)
  return Box3D{p.z,
               -p.x,
               -p.y + 0.5 * p.h,
               normalize_angle(-p.rotation_y - std::numbers::pi / 2.0),
               p.l,
               p.w,
               p.h};
}

KittiPose canonical_to_kitti(const Box3D& b) {
  return KittiPose{b.height, b.width, b.length, -b.cy, -(b.cz - 0.5 * b.height), b.cx,
                   normalize_angle(-b.yaw - std::numbers::pi / 2.0)};
}

SequenceBundle parse_kitti_labels(std::istream& in, std::string sequence_id) {
  SequenceBundle bundle;
  bundle.sequence_id = std::move(sequence_id);
  std::set<std::pair<int, int>> seen;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string_view> tok;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    tok.clear();
    std::size_t pos = 0;
    while (pos < body.size()) {
      const auto start = body.find_first_not_of(" \t", pos);
      if (start == std::string_view::npos) break;
      const auto end = body.find_first_of(" \t", start);
      tok.push_back(body.substr(start, end == std::string_view::npos ? body.size() - start : end - start));
      pos = end == std::string_view::npos ? body.size() : end;
    }
    if (tok.size() != 17 && tok.size() != 18) {
      throw ParseError("expected 17 or 18 columns, got " + std::to_string(tok.size()), lineno);
    }
    Detection3D d;
    d.frame = parse_int(tok[0], lineno, "frame");
    if (d.frame < 0) throw ParseError("negative frame index", lineno);
    d.track_id = parse_int(tok[1], lineno, "track id");
    d.class_label = std::string(tok[2]);
    KittiPassthrough pt;
    pt.truncated = parse_double(tok[3], lineno, "truncated");
    pt.occluded = parse_int(tok[4], lineno, "occluded");
    pt.alpha = parse_double(tok[5], lineno, "alpha");
    for (std::size_t k = 0; k < 4; ++k) pt.bbox2d[k] = parse_double(tok[6 + k], lineno, "bbox");
    d.passthrough = pt;
    KittiPose pose;
    pose.h = parse_double(tok[10], lineno, "height");
    pose.w = parse_double(tok[11], lineno, "width");
    pose.l = parse_double(tok[12], lineno, "length");
    pose.x = parse_double(tok[13], lineno, "x");
    pose.y = parse_double(tok[14], lineno, "y");
    pose.z = parse_double(tok[15], lineno, "z");
    pose.rotation_y = parse_double(tok[16], lineno, "rotation_y");
    d.box = kitti_to_canonical(pose);
    d.score = tok.size() == 18 ? parse_double(tok[17], lineno, "score") : 1.0;

    if (d.class_label == "DontCare") {
      place(bundle.dont_care, std::move(d));
      continue;
    }
    if (d.track_id >= 0 && !seen.emplace(d.frame, d.track_id).second) {
      throw ParseError("duplicate track id " + std::to_string(d.track_id) + " in frame " + std::to_string(d.frame),
                       lineno);
    }
    place(bundle.frames, std::move(d));
  }
  pad_frames(bundle);
  return bundle;
}

SequenceBundle parse_detections_csv(std::istream& in, std::string sequence_id) {
  SequenceBundle bundle;
  bundle.sequence_id = std::move(sequence_id);

  auto split = [](std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
      const auto comma = s.find(',', start);
      out.push_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return out;
  };

  std::string line;
  std::size_t lineno = 0;
  // Skip leading blank lines; an entirely empty stream is an empty bundle.
  while (std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) return bundle;

  const auto header = split(line);
  std::map<std::string, std::size_t, std::less<>> col;
  for (std::size_t i = 0; i < header.size(); ++i) col.emplace(std::string(header[i]), i);
  static constexpr std::array<const char*, 10> kRequired{"frame", "class", "x", "y", "z",
                                                         "yaw",   "l",     "w", "h", "score"};
  std::array<std::size_t, 10> idx{};
  for (std::size_t k = 0; k < kRequired.size(); ++k) {
    const auto it = col.find(kRequired[k]);
    if (it == col.end()) throw SchemaError(std::string("detection CSV is missing column '") + kRequired[k] + "'");
    idx[k] = it->second;
  }
  const auto id_it = col.find("id");
  std::set<std::pair<int, int>> seen;

  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split(line);
    if (f.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()),
                       lineno);
    }
    Detection3D d;
    d.frame = parse_int(f[idx[0]], lineno, "frame");
    if (d.frame < 0) throw ParseError("negative frame index", lineno);
    d.class_label = std::string(f[idx[1]]);
    if (d.class_label.empty()) throw ParseError("empty class", lineno);
    d.box.cx = parse_double(f[idx[2]], lineno, "x");
    d.box.cy = parse_double(f[idx[3]], lineno, "y");
    d.box.cz = parse_double(f[idx[4]], lineno, "z");
    d.box.yaw = normalize_angle(parse_double(f[idx[5]], lineno, "yaw"));
    d.box.length = parse_double(f[idx[6]], lineno, "l");
    d.box.width = parse_double(f[idx[7]], lineno, "w");
    d.box.height = parse_double(f[idx[8]], lineno, "h");
    d.score = parse_double(f[idx[9]], lineno, "score");
    if (id_it != col.end()) {
      d.track_id = parse_int(f[id_it->second], lineno, "id");
      if (d.track_id >= 0 && !seen.emplace(d.frame, d.track_id).second) {
        throw ParseError("duplicate id " + std::to_string(d.track_id) + " in frame " + std::to_string(d.frame),
                         lineno);
      }
    }
    place(bundle.frames, std::move(d));
  }
  pad_frames(bundle);
  return bundle;
}

SequenceBundle load_sequence(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string stem = path.stem().string();
  try {
    if (path.extension() == ".csv") return parse_detections_csv(in, stem);
    return parse_kitti_labels(in, stem);
  } catch (const ParseError& e) {
    throw ParseError(path.string(), e);
  }
}

void write_kitti_rows(std::ostream& out, std::span<const Detection3D> rows, bool with_score) {
  for (const auto& d : rows) {
    const KittiPassthrough pt = d.passthrough.value_or(KittiPassthrough{});
    const KittiPose p = canonical_to_kitti(d.box);
    out << d.frame << ' ' << d.track_id << ' ' << d.class_label << ' ' << format_double(pt.truncated) << ' '
        << pt.occluded << ' ' << format_double(pt.alpha);
    for (const double v : pt.bbox2d) out << ' ' << format_double(v);
    for (const double v : {p.h, p.w, p.l, p.x, p.y, p.z, p.rotation_y}) out << ' ' << format_double(v);
    if (with_score) out << ' ' << format_double(d.score);
    out << '\n';
  }
}

void write_csv_rows(std::ostream& out, std::span<const Detection3D> rows) {
  out << "frame,id,class,x,y,z,yaw,l,w,h,score\n";
  for (const auto& d : rows) {
    out << d.frame << ',' << d.track_id << ',' << d.class_label;
    for (const double v : {d.box.cx, d.box.cy, d.box.cz, d.box.yaw, d.box.length, d.box.width, d.box.height, d.score}) {
      out << ',' << format_double(v);
    }
    out << '\n';
  }
}

std::vector<Detection3D> to_rows(std::span<const TrackOutput> outputs) {
  std::vector<Detection3D> rows;
  rows.reserve(outputs.size());
  for (const auto& o : outputs) {
    rows.push_back(Detection3D{o.frame, o.class_label, o.box, o.score, o.id, o.passthrough});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Detection3D& a, const Detection3D& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.track_id < b.track_id;
  });
  return rows;
}

std::vector<Detection3D> flatten(const SequenceBundle& bundle) {
  std::vector<Detection3D> rows;
  for (const auto& f : bundle.frames) rows.insert(rows.end(), f.begin(), f.end());
  return rows;
}

void write_results(const std::filesystem::path& stem, std::span<const TrackOutput> outputs, ResultFormat format) {
  const auto rows = to_rows(outputs);
  auto write_file = [](const std::filesystem::path& path, auto&& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    body(out);
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
  };
  if (format == ResultFormat::Kitti || format == ResultFormat::Both) {
    auto path = stem;
    path += ".txt";
    write_file(path, [&](std::ostream& o) { write_kitti_rows(o, rows, true); });
  }
  if (format == ResultFormat::Csv || format == ResultFormat::Both) {
    auto path = stem;
    path += ".csv";
    write_file(path, [&](std::ostream& o) { write_csv_rows(o, rows); });
  }
}

}  // namespace mot3d
