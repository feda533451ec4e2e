#include "mot3d/tracker.hpp"

#include <algorithm>
#include <string>

#include "mot3d/errors.hpp"

namespace mot3d {

const char* to_string(TrackStatus status) {
  switch (status) {
    case TrackStatus::Tentative: return "Tentative";
    case TrackStatus::Confirmed: return "Confirmed";
    case TrackStatus::Dead: return "Dead";
  }
  return "Unknown";
}

void TrackerConfig::validate() const {
  if (bir_min < 1) throw ConfigError("bir_min must be >= 1, got " + std::to_string(bir_min));
  if (age_max < 1) throw ConfigError("age_max must be >= 1, got " + std::to_string(age_max));
  if (affinity == AffinityMode::IoU && !(iou_min >= 0.0 && iou_min <= 1.0)) {
    throw ConfigError("iou_min must lie in [0, 1], got " + std::to_string(iou_min));
  }
  if (affinity == AffinityMode::NegDistance && !(dist_max > 0.0)) {
    throw ConfigError("dist_max must be > 0, got " + std::to_string(dist_max));
  }
  if (!(filter.measurement_var > 0.0) || filter.init_observed_var < 0.0 || filter.init_velocity_var < 0.0 ||
      filter.process_observed_var < 0.0 || filter.process_velocity_var < 0.0) {
    throw ConfigError("filter variances must be non-negative and measurement_var > 0");
  }
}

Tracker::Tracker(TrackerConfig config, int first_id)
    : config_(std::move(config)), filter_(config_.filter), next_id_(first_id) {
  config_.validate();
  if (first_id < 1) throw ConfigError("track ids start at 1 or above");
}

bool Tracker::emits(const Trajectory& t) const {
  if (t.status == TrackStatus::Dead) return false;
  if (t.time_since_update == 0) {
    if (t.status == TrackStatus::Confirmed) return true;
    return config_.startup_exception && frames_processed_ <= config_.bir_min - 1;
  }
  return config_.output_coasting && t.status == TrackStatus::Confirmed &&
         t.time_since_update <= config_.age_max;
}

std::vector<TrackOutput> Tracker::step(int frame, std::span<const Detection3D> detections) {
  if (last_frame_ && frame <= *last_frame_) {
    throw UsageError("frame " + std::to_string(frame) + " does not follow frame " +
                     std::to_string(*last_frame_));
  }
  last_frame_ = frame;
  ++frames_processed_;

  for (auto& t : active_) {
    t.state = filter_.predict(t.state);
    ++t.age;
  }

  std::vector<Box3D> track_boxes;
  track_boxes.reserve(active_.size());
  for (const auto& t : active_) track_boxes.push_back(t.state.box());
  std::vector<Box3D> det_boxes;
  det_boxes.reserve(detections.size());
  for (const auto& d : detections) det_boxes.push_back(d.box);

  const AffinityMatrix affinity =
      build_affinity(track_boxes, det_boxes, config_.affinity, config_.distance_mode);
  const AssociationResult assoc = associate(affinity, config_.gate());

  for (const auto& [ti, di] : assoc.matches) {
    Trajectory& t = active_[ti];
    const Detection3D& d = detections[di];
    t.state = filter_.update(t.state, d.box);
    t.score = d.score;
    t.passthrough = d.passthrough;
    ++t.hits;
    t.time_since_update = 0;
    if (t.status == TrackStatus::Tentative && t.hits >= config_.bir_min) t.status = TrackStatus::Confirmed;
  }
  for (const std::size_t ti : assoc.unmatched_trajectories) {
    Trajectory& t = active_[ti];
    ++t.time_since_update;
    t.hits = 0;
    if (t.status == TrackStatus::Tentative || t.time_since_update > config_.age_max) {
      t.status = TrackStatus::Dead;
    }
  }
  for (const std::size_t di : assoc.unmatched_detections) {
    const Detection3D& d = detections[di];
    Trajectory t;
    t.id = next_id_++;
    t.state = filter_.init(d.box);
    t.score = d.score;
    t.class_label = d.class_label;
    t.hits = 1;
    t.age = 1;
    t.status = config_.bir_min <= 1 ? TrackStatus::Confirmed : TrackStatus::Tentative;
    t.passthrough = d.passthrough;
    active_.push_back(std::move(t));
  }

  std::vector<TrackOutput> out;
  for (auto& t : active_) {
    if (t.status == TrackStatus::Dead) continue;
    const bool coasting = t.time_since_update > 0;
    const Box3D box = t.state.box();
    t.history.push_back({frame, box, t.score, coasting});
    if (emits(t)) {
      out.push_back({frame, t.id, t.class_label, box, t.score, t.status, coasting, t.passthrough});
    }
  }

  auto dead = std::stable_partition(active_.begin(), active_.end(),
                                    [](const Trajectory& t) { return t.status != TrackStatus::Dead; });
  std::move(dead, active_.end(), std::back_inserter(finished_));
  active_.erase(dead, active_.end());
  return out;
}

std::vector<Trajectory> Tracker::flush_finished() {
  std::vector<Trajectory> out = std::move(finished_);
  finished_.clear();
  return out;
}

namespace {

void sort_outputs(std::vector<TrackOutput>& outputs) {
  std::stable_sort(outputs.begin(), outputs.end(), [](const TrackOutput& a, const TrackOutput& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.id < b.id;
  });
}

}  // namespace

std::vector<TrackOutput> run_sequence(const FrameDetections& frames, const TrackerConfig& config, int first_id) {
  Tracker tracker(config, first_id);
  std::vector<TrackOutput> all;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    auto out = tracker.step(static_cast<int>(f), frames[f]);
    all.insert(all.end(), std::make_move_iterator(out.begin()), std::make_move_iterator(out.end()));
  }
  sort_outputs(all);
  return all;
}

MultiClassTracker::MultiClassTracker(const std::map<std::string, TrackerConfig>& configs) {
  for (const auto& [label, config] : configs) trackers_.emplace(label, Tracker(config));
}

std::vector<TrackOutput> MultiClassTracker::step(int frame, std::span<const Detection3D> detections) {
  std::vector<TrackOutput> all;
  for (auto& [label, tracker] : trackers_) {
    scratch_.clear();
    for (const auto& d : detections) {
      if (d.class_label == label) scratch_.push_back(d);
    }
    auto out = tracker.step(frame, scratch_);
    std::sort(out.begin(), out.end(), [](const TrackOutput& a, const TrackOutput& b) { return a.id < b.id; });
    for (auto& o : out) {
      const auto [it, fresh] = global_ids_.try_emplace({label, o.id}, next_id_);
      if (fresh) ++next_id_;
      o.id = it->second;
      all.push_back(std::move(o));
    }
    for (const auto& dead : tracker.flush_finished()) global_ids_.erase({label, dead.id});
  }
  sort_outputs(all);
  return all;
}

std::size_t MultiClassTracker::active_count() const {
  std::size_t n = 0;
  for (const auto& [label, tracker] : trackers_) n += tracker.active().size();
  return n;
}

std::vector<TrackOutput> run_sequence_multiclass(const FrameDetections& frames,
                                                 const std::map<std::string, TrackerConfig>& configs) {
  MultiClassTracker tracker(configs);
  std::vector<TrackOutput> all;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    auto out = tracker.step(static_cast<int>(f), frames[f]);
    all.insert(all.end(), std::make_move_iterator(out.begin()), std::make_move_iterator(out.end()));
  }
  sort_outputs(all);
  return all;
}

}  // namespace mot3d
