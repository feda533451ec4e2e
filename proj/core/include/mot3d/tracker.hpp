#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mot3d/assignment.hpp"
#include "mot3d/detection.hpp"
#include "mot3d/kalman.hpp"

namespace mot3d {

enum class TrackStatus { Tentative, Confirmed, Dead };

const char* to_string(TrackStatus status);

// Per-class tracker settings. bir_min is also known as F_min and age_max as Age_min in
// the literature; both names refer to the same two knobs.
struct TrackerConfig {
  AffinityMode affinity = AffinityMode::IoU;
  double iou_min = 0.01;   // gate in IoU mode
  double dist_max = 10.0;  // gate in NegDistance mode, meters
  DistanceMode distance_mode = DistanceMode::Ground;
  int bir_min = 3;
  int age_max = 2;
  bool output_coasting = false;
  // Emit Tentative tracks during the first bir_min - 1 frames of a sequence.
  bool startup_exception = true;
  FilterConfig filter;

  double gate() const { return affinity == AffinityMode::IoU ? iou_min : dist_max; }
  // Throws ConfigError when a field is out of range.
  void validate() const;
};

struct TrajectoryRecord {
  int frame = 0;
  Box3D box;
  double score = 0.0;
  bool coasting = false;
};

struct Trajectory {
  int id = 0;
  TrackState state;
  double score = 0.0;
  std::string class_label;
  int hits = 0;               // consecutive matched frames
  int time_since_update = 0;  // frames since last match
  int age = 0;                // frames alive, counting the birth frame
  std::vector<TrajectoryRecord> history;
  TrackStatus status = TrackStatus::Tentative;
  std::optional<KittiPassthrough> passthrough;  // from the latest matched detection
};

// One identity-stamped box emitted for a frame.
struct TrackOutput {
  int frame = 0;
  int id = 0;
  std::string class_label;
  Box3D box;
  double score = 0.0;
  TrackStatus status = TrackStatus::Confirmed;
  bool coasting = false;
  std::optional<KittiPassthrough> passthrough;

  friend bool operator==(const TrackOutput&, const TrackOutput&) = default;
};

// Single-class online tracker: predict, associate, update, then birth/death bookkeeping.
// Not thread-safe; one instance per (sequence, class).
class Tracker {
 public:
  explicit Tracker(TrackerConfig config, int first_id = 1);

  // Frame indices must be strictly increasing; throws UsageError otherwise.
  std::vector<TrackOutput> step(int frame, std::span<const Detection3D> detections);

  const TrackerConfig& config() const { return config_; }
  const std::vector<Trajectory>& active() const { return active_; }
  const std::vector<Trajectory>& finished() const { return finished_; }
  // Dead trajectories accumulated so far; clears the internal list.
  std::vector<Trajectory> flush_finished();
  int frames_processed() const { return frames_processed_; }
  int next_id() const { return next_id_; }

 private:
  bool emits(const Trajectory& t) const;

  TrackerConfig config_;
  KalmanFilter3D filter_;
  std::vector<Trajectory> active_;
  std::vector<Trajectory> finished_;
  int next_id_;
  int frames_processed_ = 0;
  std::optional<int> last_frame_;
};

// One Tracker per class behind a shared id space. Output ids are assigned in order of first
// emission, so they stay unique across classes and carry no gaps from tracks that never showed.
class MultiClassTracker {
 public:
  // Detections whose class has no entry in `configs` are ignored.
  explicit MultiClassTracker(const std::map<std::string, TrackerConfig>& configs);

  std::vector<TrackOutput> step(int frame, std::span<const Detection3D> detections);
  std::size_t active_count() const;
  const std::map<std::string, Tracker>& trackers() const { return trackers_; }

 private:
  std::map<std::string, Tracker> trackers_;
  std::map<std::pair<std::string, int>, int> global_ids_;
  int next_id_ = 1;
  std::vector<Detection3D> scratch_;
};

// frames[t] holds the detections of frame t for one class.
using FrameDetections = std::vector<std::vector<Detection3D>>;

// Runs a fresh tracker over a whole sequence. Output is sorted by (frame, id).
std::vector<TrackOutput> run_sequence(const FrameDetections& frames, const TrackerConfig& config,
                                      int first_id = 1);

// Runs a MultiClassTracker over a whole sequence. Output is sorted by (frame, id).
std::vector<TrackOutput> run_sequence_multiclass(const FrameDetections& frames,
                                                 const std::map<std::string, TrackerConfig>& configs);

}  // namespace mot3d
