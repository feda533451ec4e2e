#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mot3d/detection.hpp"
#include "mot3d/tracker.hpp"

namespace mot3d {

// One sequence of per-frame rows. frames[t] holds the rows of frame t; frames are contiguous
// from 0 and empty frames are materialized.
struct SequenceBundle {
  std::string sequence_id;
  std::vector<std::vector<Detection3D>> frames;
  std::vector<std::vector<Detection3D>> dont_care;  // KITTI "DontCare" rows, same indexing

  std::size_t frame_count() const { return frames.size(); }
  std::size_t object_count() const;
};

// Pose as written in KITTI tracking labels (camera frame: x right, y down, z forward;
// location at the bottom-face center, rotation_y about the camera y axis).
struct KittiPose {
  double h = 0.0, w = 0.0, l = 0.0;
  double x = 0.0, y = 0.0, z = 0.0;
  double rotation_y = 0.0;
};

Box3D kitti_to_canonical(const KittiPose& pose);
KittiPose canonical_to_kitti(const Box3D& box);

// Space-delimited KITTI tracking rows with 17 columns, or 18 with a trailing score
// (defaults to 1.0). Throws ParseError carrying the offending line number.
SequenceBundle parse_kitti_labels(std::istream& in, std::string sequence_id = {});

// Comma-separated rows with header frame,class,x,y,z,yaw,l,w,h,score in the canonical frame.
// Columns may appear in any order; an optional `id` column fills track_id. Throws SchemaError
// for a missing column and ParseError for malformed values.
SequenceBundle parse_detections_csv(std::istream& in, std::string sequence_id = {});

// Picks the parser from the extension: .csv is CSV, anything else KITTI.
SequenceBundle load_sequence(const std::filesystem::path& path);

// Rows are written in the order given.
void write_kitti_rows(std::ostream& out, std::span<const Detection3D> rows, bool with_score);
void write_csv_rows(std::ostream& out, std::span<const Detection3D> rows);

std::vector<Detection3D> to_rows(std::span<const TrackOutput> outputs);
std::vector<Detection3D> flatten(const SequenceBundle& bundle);

enum class ResultFormat { Kitti, Csv, Both };

// Writes <stem>.txt (KITTI, 18 columns) and/or <stem>.csv, sorted by (frame, id).
// Throws IoError when a target cannot be written.
void write_results(const std::filesystem::path& stem, std::span<const TrackOutput> outputs, ResultFormat format);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace mot3d
