#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mot3d/metrics.hpp"
#include "mot3d/tracker.hpp"

namespace mot3d {

// KITTI categories followed by the nuScenes ones.
const std::vector<std::string>& known_classes();
bool is_known_class(const std::string& label);

// Operating values per category: IoU_min = 0.01 for Car, Dist_max = 1 for Pedestrian,
// Dist_max = 6 for Cyclist, Dist_max = 10 for everything else; bir_min = 3, age_max = 2.
TrackerConfig default_tracker_config(const std::string& class_label);

struct EvaluationConfig {
  MatchCriterion::Kind criterion = MatchCriterion::Kind::IoU;
  std::vector<double> iou_thresholds{0.25, 0.5, 0.7};
  double dist_threshold = 2.0;
  DistanceMode distance_mode = DistanceMode::Ground;
  int recall_steps = kDefaultRecallSteps;
  // Ground truth of these classes is ignored (not counted, not penalized) when evaluating the key class.
  std::map<std::string, std::vector<std::string>> neighbors{{"Car", {"Van"}}, {"Pedestrian", {"Person_sitting"}}};

  std::vector<MatchCriterion> criteria() const;
};

struct RunConfig {
  std::vector<std::string> classes{"Car", "Pedestrian", "Cyclist"};
  std::map<std::string, TrackerConfig> trackers;  // resolved per class
  EvaluationConfig evaluation;

  TrackerConfig tracker_for(const std::string& class_label) const;
};

RunConfig default_run_config();

// JSON layout:
//   { "classes": [...],
//     "tracker": { "default": {<tracker fields>}, "<Class>": {<tracker fields>} },
//     "evaluation": { "criterion": "iou"|"distance", "iou_thres": [..], "dist_thres": x,
//                     "distance_3d": bool, "recall_steps": n, "neighbors": {"Car": ["Van"]} } }
// Tracker fields: affinity ("iou"|"distance"), iou_min, dist_max, distance_3d, bir_min (alias
// f_min), age_max (alias age_min), output_coasting, startup_exception, angular_velocity,
// orientation_correction, filter {init_observed_var, init_velocity_var, process_observed_var,
// process_velocity_var, measurement_var}. Unknown keys raise ConfigError.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace mot3d
