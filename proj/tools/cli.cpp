#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "mot3d/errors.hpp"
#include "mot3d/metrics.hpp"
#include "mot3d/tracker.hpp"

namespace mot3d::cli {
namespace fs = std::filesystem;

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception (by index) is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
  return out;
}

std::map<std::string, TrackerConfig> tracker_configs(const RunManifest& m) {
  std::map<std::string, TrackerConfig> configs;
  for (const auto& c : m.config.classes) configs.emplace(c, m.config.tracker_for(c));
  return configs;
}

std::vector<SequenceBundle> load_all(const std::vector<fs::path>& files, int jobs) {
  std::vector<SequenceBundle> bundles(files.size());
  parallel_for(files.size(), jobs, [&](std::size_t i) { bundles[i] = load_sequence(files[i]); });
  return bundles;
}

struct EvaluationData {
  std::vector<GroundTruthSet> gt;  // one per class, aligned with config.classes
  std::vector<HypothesisSet> hyp;
};

EvaluationData load_evaluation_data(const RunManifest& m, std::ostream& out) {
  const auto gt_files = sequence_files(m.ground_truth);
  std::map<std::string, fs::path> result_by_stem;
  for (const auto& f : sequence_files(m.results)) {
    const auto stem = f.stem().string();
    // KITTI text wins over CSV when both exist
    if (!result_by_stem.contains(stem) || f.extension() == ".txt") result_by_stem[stem] = f;
  }

  const auto gts = load_all(gt_files, m.jobs);
  std::vector<fs::path> hyp_files;
  std::vector<std::size_t> hyp_slot;
  for (std::size_t s = 0; s < gt_files.size(); ++s) {
    const auto it = result_by_stem.find(gt_files[s].stem().string());
    if (it == result_by_stem.end()) {
      out << "warning: no results for sequence " << gt_files[s].stem().string() << "; counted as empty\n";
      continue;
    }
    hyp_files.push_back(it->second);
    hyp_slot.push_back(s);
    result_by_stem.erase(it);
  }
  for (const auto& [stem, path] : result_by_stem) {
    out << "warning: results " << path.string() << " have no ground truth; ignored\n";
  }
  const auto hyps_loaded = load_all(hyp_files, m.jobs);
  std::vector<const SequenceBundle*> hyps(gt_files.size(), nullptr);
  for (std::size_t k = 0; k < hyp_slot.size(); ++k) hyps[hyp_slot[k]] = &hyps_loaded[k];

  EvaluationData data;
  for (const auto& label : m.config.classes) {
    std::vector<std::string> neighbours;
    if (const auto it = m.config.evaluation.neighbors.find(label); it != m.config.evaluation.neighbors.end()) {
      neighbours = it->second;
    }
    GroundTruthSet g;
    g.class_label = label;
    HypothesisSet h;
    h.class_label = label;
    for (std::size_t s = 0; s < gts.size(); ++s) {
      SequenceGroundTruth sg;
      sg.name = gts[s].sequence_id;
      sg.frames.resize(gts[s].frame_count());
      sg.ignored.resize(gts[s].frame_count());
      for (std::size_t f = 0; f < gts[s].frame_count(); ++f) {
        for (const auto& d : gts[s].frames[f]) {
          if (d.class_label == label) {
            sg.frames[f].push_back({d.track_id, d.box});
          } else if (std::find(neighbours.begin(), neighbours.end(), d.class_label) != neighbours.end()) {
            sg.ignored[f].push_back(d.box);
          }
        }
      }
      g.sequences.push_back(std::move(sg));

      SequenceHypotheses sh;
      sh.name = gts[s].sequence_id;
      if (hyps[s]) {
        sh.frames.resize(hyps[s]->frame_count());
        for (std::size_t f = 0; f < hyps[s]->frame_count(); ++f) {
          for (const auto& d : hyps[s]->frames[f]) {
            if (d.class_label == label) sh.frames[f].push_back({d.track_id, d.box, d.score});
          }
        }
      }
      h.sequences.push_back(std::move(sh));
    }
    data.gt.push_back(std::move(g));
    data.hyp.push_back(std::move(h));
  }
  return data;
}

std::vector<MetricsReport> build_reports(const RunManifest& m, const EvaluationData& data) {
  const auto criteria = m.config.evaluation.criteria();
  const int steps = m.config.evaluation.recall_steps;
  const std::size_t nc = data.gt.size();
  std::vector<std::optional<ClassReport>> cells(criteria.size() * nc);
  parallel_for(cells.size(), m.jobs, [&](std::size_t i) {
    const std::size_t k = i / nc;
    const std::size_t c = i % nc;
    if (data.gt[c].num_gt() == 0) return;
    cells[i] = evaluate_class(data.gt[c], data.hyp[c], criteria[k], steps);
  });

  std::vector<MetricsReport> reports;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    MetricsReport rep;
    rep.criterion = criteria[k];
    rep.recall_steps = steps;
    for (std::size_t c = 0; c < nc; ++c) {
      auto& cell = cells[k * nc + c];
      if (!cell) {
        rep.skipped.push_back(data.gt[c].class_label);
        continue;
      }
      rep.classes.push_back(std::move(*cell));
    }
    for (const auto& cr : rep.classes) {
      const double w = 1.0 / static_cast<double>(rep.classes.size());
      rep.mean.samota += w * cr.integral.samota;
      rep.mean.amota += w * cr.integral.amota;
      rep.mean.amotp += w * cr.integral.amotp;
    }
    reports.push_back(std::move(rep));
  }
  return reports;
}

std::string file_tag(const MatchCriterion& c) {
  std::ostringstream s;
  s << (c.kind == MatchCriterion::Kind::IoU ? "iou" : "dist") << c.threshold;
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace

void RunManifest::validate() const {
  auto require = [](const fs::path& p, const char* what) {
    if (p.empty() || !fs::exists(p)) throw UsageError(std::string(what) + " path does not exist: " + p.string());
  };
  if (command == "track" || command == "bench") require(detections, "detections");
  if (command == "evaluate" || command == "curves") {
    require(ground_truth, "ground-truth");
    require(results, "results");
  }
  if (config_path) require(*config_path, "config");
  if (config.classes.empty()) throw UsageError("no classes selected");
  for (const auto& c : config.classes) {
    if (!is_known_class(c)) {
      throw UsageError("unknown class '" + c + "'; valid classes: " + join(known_classes(), ", "));
    }
  }
  if (jobs < 1) throw UsageError("--jobs must be >= 1");
  if (repetitions < 3) throw UsageError("--repetitions must be >= 3");
}

std::vector<fs::path> sequence_files(const fs::path& path) {
  if (fs::is_regular_file(path)) return {path};
  if (!fs::is_directory(path)) throw UsageError("not a file or directory: " + path.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(path)) {
    const auto ext = entry.path().extension();
    if (!entry.is_regular_file() || entry.path().filename() == kTrackLogName) continue;
    if (ext == ".txt" || ext == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

int cmd_track(const RunManifest& m, std::ostream& out) {
  m.validate();
  const auto files = sequence_files(m.detections);
  const auto configs = tracker_configs(m);
  fs::create_directories(m.out_dir);

  struct SequenceRun {
    std::string id;
    std::size_t frames = 0, detections = 0, boxes = 0, tracks = 0;
    std::string log;
  };
  std::vector<SequenceRun> runs(files.size());
  parallel_for(files.size(), m.jobs, [&](std::size_t i) {
    const SequenceBundle bundle = load_sequence(files[i]);
    SequenceRun& run = runs[i];
    run.id = bundle.sequence_id;
    run.frames = bundle.frame_count();
    run.detections = bundle.object_count();
    MultiClassTracker tracker(configs);
    std::vector<TrackOutput> all;
    std::ostringstream log;
    for (std::size_t f = 0; f < bundle.frame_count(); ++f) {
      const double t0 = now_seconds();
      auto outputs = tracker.step(static_cast<int>(f), bundle.frames[f]);
      const double dt = now_seconds() - t0;
      log << run.id << ',' << f << ',' << bundle.frames[f].size() << ',' << outputs.size() << ','
          << tracker.active_count() << ',' << static_cast<long long>(dt * 1e6) << '\n';
      all.insert(all.end(), outputs.begin(), outputs.end());
    }
    std::vector<int> ids;
    for (const auto& o : all) ids.push_back(o.id);
    std::sort(ids.begin(), ids.end());
    run.tracks = static_cast<std::size_t>(std::unique(ids.begin(), ids.end()) - ids.begin());
    run.boxes = all.size();
    run.log = log.str();
    write_results(m.out_dir / run.id, all, m.format);
  });

  std::string log = "sequence,frame,detections,outputs,active_tracks,step_us\n";
  std::size_t frames = 0, boxes = 0;
  for (const auto& r : runs) {
    log += r.log;
    frames += r.frames;
    boxes += r.boxes;
    out << r.id << ": " << r.frames << " frames, " << r.detections << " detections, " << r.tracks
        << " trajectories, " << r.boxes << " boxes\n";
  }
  write_text(m.out_dir / kTrackLogName, log);
  out << "tracked " << runs.size() << " sequences (" << frames << " frames, " << boxes << " boxes) into "
      << m.out_dir.string() << '\n';
  return kOk;
}

int cmd_evaluate(const RunManifest& m, std::ostream& out) {
  m.validate();
  const auto data = load_evaluation_data(m, out);
  const auto reports = build_reports(m, data);
  std::string json = "[\n";
  for (std::size_t k = 0; k < reports.size(); ++k) {
    out << report_to_table(reports[k]) << '\n';
    json += report_to_json(reports[k]);
    json += k + 1 < reports.size() ? ",\n" : "\n";
  }
  json += "]\n";
  if (!m.json_out.empty()) {
    if (m.json_out.has_parent_path()) fs::create_directories(m.json_out.parent_path());
    write_text(m.json_out, json);
    out << "report written to " << m.json_out.string() << '\n';
  }
  return kOk;
}

int cmd_curves(const RunManifest& m, std::ostream& out) {
  m.validate();
  const auto data = load_evaluation_data(m, out);
  const auto reports = build_reports(m, data);
  fs::create_directories(m.out_dir);
  for (const auto& rep : reports) {
    for (const auto& cls : rep.classes) {
      const auto rows = emit_curves(cls.sweep);
      const std::string stem = cls.class_label + "_" + file_tag(rep.criterion);
      write_text(m.out_dir / (stem + ".csv"), curves_to_csv(rows));
      if (m.svg) {
        const std::pair<CurveMetric, const char*> charts[] = {
            {CurveMetric::FP, "fp"}, {CurveMetric::FN, "fn"}, {CurveMetric::MOTA, "mota"}, {CurveMetric::SMOTA, "smota"}};
        for (const auto& [metric, tag] : charts) {
          write_text(m.out_dir / (stem + "_" + tag + ".svg"), curve_to_svg(rows, metric));
        }
      }
      out << "wrote " << (m.out_dir / (stem + ".csv")).string() << '\n';
    }
    for (const auto& s : rep.skipped) out << "warning: class '" << s << "' has no ground truth; omitted\n";
  }
  return kOk;
}

int cmd_bench(const RunManifest& m, std::ostream& out) {
  m.validate();
  const auto bundles = load_all(sequence_files(m.detections), m.jobs);
  const auto configs = tracker_configs(m);
  std::size_t frames = 0;
  for (const auto& b : bundles) frames += b.frame_count();

  std::vector<double> seconds;
  for (int r = 0; r < m.repetitions; ++r) {
    const double t0 = now_seconds();
    for (const auto& b : bundles) {
      MultiClassTracker tracker(configs);
      for (std::size_t f = 0; f < b.frame_count(); ++f) tracker.step(static_cast<int>(f), b.frames[f]);
    }
    seconds.push_back(now_seconds() - t0);
  }
  std::sort(seconds.begin(), seconds.end());
  const double median = seconds[seconds.size() / 2];
  const double fps = median > 0.0 ? static_cast<double>(frames) / median : 0.0;
  out << "frames: " << frames << '\n'
      << "repetitions: " << m.repetitions << '\n'
      << "median_seconds: " << median << '\n'
      << "fps: " << fps << '\n';
  return kOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"3D multi-object tracking and evaluation", "mot3d"};
  app.require_subcommand(1);
  RunManifest m;

  std::string config_file;
  std::vector<std::string> classes;
  std::string format = "kitti";
  double iou_min = 0, dist_max = 0, dist_thres = 0;
  int bir_min = 0, age_max = 0, recall_steps = 0;
  std::vector<double> iou_thres;
  std::string criterion;
  bool distance_3d = false;
  std::map<std::string, CLI::Option*> opt;

  auto common = [&](CLI::App* sub) {
    opt[sub->get_name() + "config"] =
        sub->add_option("--config", config_file, "JSON run configuration")->check(CLI::ExistingFile);
    opt[sub->get_name() + "classes"] =
        sub->add_option("--classes", classes, "classes to process (comma separated)")->delimiter(',');
    sub->add_option("--jobs", m.jobs, "worker threads for per-sequence work")->capture_default_str();
  };
  auto tracker_flags = [&](CLI::App* sub) {
    opt[sub->get_name() + "iou"] = sub->add_option("--iou-min", iou_min, "IoU_min association gate");
    opt[sub->get_name() + "dist"] = sub->add_option("--dist-max", dist_max, "Dist_max association gate (m)");
    opt[sub->get_name() + "bir"] = sub->add_option("--bir-min", bir_min, "Bir_min: hits before a track is reported");
    opt[sub->get_name() + "age"] = sub->add_option("--age-max", age_max, "Age_max: misses before a track dies");
  };
  auto eval_flags = [&](CLI::App* sub) {
    sub->add_option("--gt", m.ground_truth, "ground-truth label file or directory")->required()->check(CLI::ExistingPath);
    sub->add_option("--results", m.results, "tracking result file or directory")->required()->check(CLI::ExistingPath);
    opt[sub->get_name() + "iou_thres"] = sub->add_option("--iou-thres", iou_thres, "IoU_thres values")->delimiter(',');
    opt[sub->get_name() + "dist_thres"] = sub->add_option("--dist-thres", dist_thres, "Dist_thres (m)");
    opt[sub->get_name() + "criterion"] =
        sub->add_option("--criterion", criterion, "iou or distance")->check(CLI::IsMember({"iou", "distance"}));
    opt[sub->get_name() + "d3"] = sub->add_flag("--distance-3d", distance_3d, "use 3D center distance");
    opt[sub->get_name() + "steps"] = sub->add_option("--recall-steps", recall_steps, "L recall points (default 40)");
  };

  auto* track = app.add_subcommand("track", "detections to trajectories");
  common(track);
  tracker_flags(track);
  track->add_option("--detections", m.detections, "detection file or directory")->required()->check(CLI::ExistingPath);
  track->add_option("--out", m.out_dir, "output directory")->required();
  track->add_option("--format", format, "kitti, csv or both")->check(CLI::IsMember({"kitti", "csv", "both"}))->capture_default_str();
  bool coasting = false;
  auto* coast_opt = track->add_flag("--coasting", coasting, "also report predicted boxes of unmatched tracks");

  auto* evaluate = app.add_subcommand("evaluate", "score trajectories against ground truth");
  common(evaluate);
  eval_flags(evaluate);
  evaluate->add_option("--json", m.json_out, "write the JSON report here");

  auto* curves = app.add_subcommand("curves", "per-recall metric curves as CSV and SVG");
  common(curves);
  eval_flags(curves);
  curves->add_option("--out", m.out_dir, "output directory")->required();
  curves->add_flag("--svg", m.svg, "also write SVG charts");

  auto* bench = app.add_subcommand("bench", "tracking throughput");
  common(bench);
  tracker_flags(bench);
  bench->add_option("--detections", m.detections, "detection file or directory")->required()->check(CLI::ExistingPath);
  bench->add_option("--repetitions", m.repetitions, "timed repetitions (>= 3)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    m.command = sub->get_name();
    const std::string n = m.command;
    auto given = [&](const std::string& key) {
      const auto it = opt.find(n + key);
      return it != opt.end() && it->second->count() > 0;
    };
    if (given("config")) {
      m.config_path = config_file;
      m.config = load_run_config(config_file);
    } else {
      m.config = default_run_config();
    }
    if (given("classes")) m.config.classes = classes;
    for (const auto& c : m.config.classes) {
      TrackerConfig t = m.config.tracker_for(c);
      if (given("iou")) t.iou_min = iou_min;
      if (given("dist")) t.dist_max = dist_max;
      if (given("bir")) t.bir_min = bir_min;
      if (given("age")) t.age_max = age_max;
      if (m.command == "track" && coast_opt->count()) t.output_coasting = coasting;
      t.validate();
      m.config.trackers[c] = t;
    }
    auto& ev = m.config.evaluation;
    if (given("iou_thres")) ev.iou_thresholds = iou_thres;
    if (given("dist_thres")) ev.dist_threshold = dist_thres;
    if (given("d3")) ev.distance_mode = distance_3d ? DistanceMode::Full : DistanceMode::Ground;
    if (given("steps")) ev.recall_steps = recall_steps;
    if (given("criterion")) {
      ev.criterion = criterion == "iou" ? MatchCriterion::Kind::IoU : MatchCriterion::Kind::Distance;
    } else if (given("dist_thres") && given("iou_thres")) {
      throw UsageError("both --iou-thres and --dist-thres given; choose one with --criterion");
    } else if (given("dist_thres")) {
      ev.criterion = MatchCriterion::Kind::Distance;
    } else if (given("iou_thres")) {
      ev.criterion = MatchCriterion::Kind::IoU;
    }
    if (ev.recall_steps < 1) throw ConfigError("--recall-steps must be >= 1");
    if (!(ev.dist_threshold > 0.0)) throw ConfigError("--dist-thres must be > 0");
    for (const double t : ev.iou_thresholds) {
      if (!(t >= 0.0 && t < 1.0)) throw ConfigError("--iou-thres values must lie in [0, 1)");
    }
    m.format = format == "csv" ? ResultFormat::Csv : format == "both" ? ResultFormat::Both : ResultFormat::Kitti;

    if (m.command == "track") return cmd_track(m, out);
    if (m.command == "evaluate") return cmd_evaluate(m, out);
    if (m.command == "curves") return cmd_curves(m, out);
    return cmd_bench(m, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kData;
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
}

}  // namespace mot3d::cli
