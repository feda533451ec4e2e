#include "mot3d/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mot3d/errors.hpp"

namespace mot3d {
namespace {

using nlohmann::json;

template <typename T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

void apply_filter(FilterConfig& f, const json& j) {
  if (!j.is_object()) throw ConfigError("'filter' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "init_observed_var") f.init_observed_var = get_as<double>(j, key);
    else if (key == "init_velocity_var") f.init_velocity_var = get_as<double>(j, key);
    else if (key == "process_observed_var") f.process_observed_var = get_as<double>(j, key);
    else if (key == "process_velocity_var") f.process_velocity_var = get_as<double>(j, key);
    else if (key == "measurement_var") f.measurement_var = get_as<double>(j, key);
    else throw ConfigError("unknown filter key '" + key + "'");
  }
}

void apply_tracker(TrackerConfig& c, const json& j) {
  if (!j.is_object()) throw ConfigError("tracker section must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "affinity") {
      const auto mode = get_as<std::string>(j, key);
      if (mode == "iou") c.affinity = AffinityMode::IoU;
      else if (mode == "distance") c.affinity = AffinityMode::NegDistance;
      else throw ConfigError("affinity must be 'iou' or 'distance', got '" + mode + "'");
    } else if (key == "iou_min") {
      c.iou_min = get_as<double>(j, key);
    } else if (key == "dist_max") {
      c.dist_max = get_as<double>(j, key);
    } else if (key == "distance_3d") {
      c.distance_mode = get_as<bool>(j, key) ? DistanceMode::Full : DistanceMode::Ground;
    } else if (key == "bir_min" || key == "f_min") {
      c.bir_min = get_as<int>(j, key);
    } else if (key == "age_max" || key == "age_min") {
      c.age_max = get_as<int>(j, key);
    } else if (key == "output_coasting") {
      c.output_coasting = get_as<bool>(j, key);
    } else if (key == "startup_exception") {
      c.startup_exception = get_as<bool>(j, key);
    } else if (key == "angular_velocity") {
      c.filter.angular_velocity = get_as<bool>(j, key);
    } else if (key == "orientation_correction") {
      c.filter.orientation_correction = get_as<bool>(j, key);
    } else if (key == "filter") {
      apply_filter(c.filter, value);
    } else {
      throw ConfigError("unknown tracker key '" + key + "'");
    }
  }
}

void apply_evaluation(EvaluationConfig& e, const json& j) {
  if (!j.is_object()) throw ConfigError("'evaluation' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "criterion") {
      const auto kind = get_as<std::string>(j, key);
      if (kind == "iou") e.criterion = MatchCriterion::Kind::IoU;
      else if (kind == "distance") e.criterion = MatchCriterion::Kind::Distance;
      else throw ConfigError("criterion must be 'iou' or 'distance', got '" + kind + "'");
    } else if (key == "iou_thres") {
      e.iou_thresholds = value.is_array() ? get_as<std::vector<double>>(j, key)
                                          : std::vector<double>{get_as<double>(j, key)};
    } else if (key == "dist_thres") {
      e.dist_threshold = get_as<double>(j, key);
    } else if (key == "distance_3d") {
      e.distance_mode = get_as<bool>(j, key) ? DistanceMode::Full : DistanceMode::Ground;
    } else if (key == "recall_steps") {
      e.recall_steps = get_as<int>(j, key);
    } else if (key == "neighbors") {
      e.neighbors = get_as<std::map<std::string, std::vector<std::string>>>(j, key);
    } else {
      throw ConfigError("unknown evaluation key '" + key + "'");
    }
  }
  if (e.recall_steps < 1) throw ConfigError("recall_steps must be >= 1");
  if (e.iou_thresholds.empty()) throw ConfigError("iou_thres must not be empty");
  for (const double t : e.iou_thresholds) {
    if (!(t >= 0.0 && t < 1.0)) throw ConfigError("iou_thres values must lie in [0, 1)");
  }
  if (!(e.dist_threshold > 0.0)) throw ConfigError("dist_thres must be > 0");
}

}  // namespace

const std::vector<std::string>& known_classes() {
  static const std::vector<std::string> classes{
      "Car",     "Pedestrian", "Cyclist",   "Van",        "Truck",   "Tram",    "Person_sitting",
      "Misc",    "Trailer",    "Bicycle",   "Motorcycle", "Bus"};
  return classes;
}

bool is_known_class(const std::string& label) {
  const auto& k = known_classes();
  return std::find(k.begin(), k.end(), label) != k.end();
}

TrackerConfig default_tracker_config(const std::string& class_label) {
  TrackerConfig c;
  if (class_label == "Car") {
    c.affinity = AffinityMode::IoU;
    c.iou_min = 0.01;
  } else if (class_label == "Pedestrian") {
    c.affinity = AffinityMode::NegDistance;
    c.dist_max = 1.0;
  } else if (class_label == "Cyclist") {
    c.affinity = AffinityMode::NegDistance;
    c.dist_max = 6.0;
  } else {
    c.affinity = AffinityMode::NegDistance;
    c.dist_max = 10.0;
  }
  return c;
}

std::vector<MatchCriterion> EvaluationConfig::criteria() const {
  std::vector<MatchCriterion> out;
  if (criterion == MatchCriterion::Kind::Distance) {
    out.push_back(MatchCriterion::distance(dist_threshold, distance_mode));
  } else {
    for (const double t : iou_thresholds) out.push_back(MatchCriterion::iou(t));
  }
  return out;
}

TrackerConfig RunConfig::tracker_for(const std::string& class_label) const {
  const auto it = trackers.find(class_label);
  return it != trackers.end() ? it->second : default_tracker_config(class_label);
}

RunConfig default_run_config() {
  RunConfig rc;
  for (const auto& c : known_classes()) rc.trackers.emplace(c, default_tracker_config(c));
  return rc;
}

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");

  RunConfig rc = default_run_config();
  for (const auto& [key, value] : root.items()) {
    if (key != "classes" && key != "tracker" && key != "evaluation") {
      throw ConfigError("unknown top-level key '" + key + "'");
    }
  }
  if (root.contains("classes")) {
    rc.classes = get_as<std::vector<std::string>>(root, "classes");
  }
  if (root.contains("tracker")) {
    const json& t = root.at("tracker");
    if (!t.is_object()) throw ConfigError("'tracker' must be an object");
    std::vector<std::string> labels = known_classes();
    for (const auto& [key, value] : t.items()) {
      if (key != "default" && std::find(labels.begin(), labels.end(), key) == labels.end()) labels.push_back(key);
    }
    for (const auto& label : labels) {
      TrackerConfig c = default_tracker_config(label);
      if (t.contains("default")) apply_tracker(c, t.at("default"));
      if (t.contains(label)) apply_tracker(c, t.at(label));
      c.validate();
      rc.trackers[label] = c;
    }
  }
  if (root.contains("evaluation")) apply_evaluation(rc.evaluation, root.at("evaluation"));
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

}  // namespace mot3d
