#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"

namespace {

namespace fs = std::filesystem;
const fs::path kData = MOT3D_TEST_DATA_DIR;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run mot3d_cli(std::initializer_list<std::string> args) {
  std::vector<std::string> owned{"mot3d"};
  owned.insert(owned.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : owned) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = mot3d::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mot3d_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(CliTrack, MiniSequenceMatchesGolden) {
  const auto out = scratch("golden");
  const auto r = mot3d_cli({"track", "--detections", (kData / "mini").string(), "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(out / "0000.txt"), slurp(kData / "mini_golden" / "0000.txt"));
  const std::string log = slurp(out / "track_log.csv");
  EXPECT_EQ(log.rfind("sequence,frame,detections,outputs,active_tracks,step_us\n", 0), 0u);
  EXPECT_NE(log.find("0000,1,3,3,3,"), std::string::npos) << log;
}

TEST(CliTrack, DeterministicAcrossJobsAndFormats) {
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  ASSERT_EQ(mot3d_cli({"track", "--detections", (kData / "mini").string(), "--out", a.string(), "--format", "both"}).code, 0);
  ASSERT_EQ(mot3d_cli({"track", "--detections", (kData / "mini").string(), "--out", b.string(), "--format", "both",
                       "--jobs", "4"}).code,
            0);
  EXPECT_EQ(slurp(a / "0000.txt"), slurp(b / "0000.txt"));
  EXPECT_EQ(slurp(a / "0000.csv"), slurp(b / "0000.csv"));
}

TEST(CliTrack, EmptyDetectionDirectory) {
  const auto in = scratch("empty_in");
  const auto out = scratch("empty_out");
  const auto r = mot3d_cli({"track", "--detections", in.string(), "--out", out.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(out / "track_log.csv"), "sequence,frame,detections,outputs,active_tracks,step_us\n");
}

TEST(CliTrack, UnknownClassNamesValidOnes) {
  const auto r = mot3d_cli({"track", "--detections", (kData / "mini").string(), "--out", scratch("bad").string(),
                            "--classes", "Car,Spaceship"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Spaceship"), std::string::npos);
  EXPECT_NE(r.err.find("Car, Pedestrian, Cyclist"), std::string::npos);
}

TEST(CliTrack, FlagOverridesConfig) {
  const auto dir = scratch("cfg");
  {
    std::ofstream cfg(dir / "run.json");
    cfg << R"({"tracker": {"Car": {"bir_min": 1, "startup_exception": false}}})";
  }
  // config alone: bir_min 1, so the spurious frame-1 track is confirmed and reported
  auto r = mot3d_cli({"track", "--detections", (kData / "mini").string(), "--out", (dir / "a").string(), "--config",
                      (dir / "run.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(slurp(dir / "a" / "0000.txt").find("\n1 3 Car"), std::string::npos);
  // --bir-min wins over the config: nothing reaches 3 hits before frame 2
  r = mot3d_cli({"track", "--detections", (kData / "mini").string(), "--out", (dir / "b").string(), "--config",
                 (dir / "run.json").string(), "--bir-min", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string text = slurp(dir / "b" / "0000.txt");
  EXPECT_EQ(text.find("\n1 "), std::string::npos);
  EXPECT_EQ(text.rfind("2 1 Car", 0), 0u);
}

TEST(CliErrors, ExitCodes) {
  EXPECT_EQ(mot3d_cli({}).code, 1);
  EXPECT_EQ(mot3d_cli({"track", "--out", "/tmp/x"}).code, 1);  // missing --detections
  EXPECT_EQ(mot3d_cli({"track", "--detections", "/nonexistent_mot3d", "--out", "/tmp/x"}).code, 1);
  EXPECT_EQ(mot3d_cli({"track", "--detections", (kData / "mini").string(), "--out", "/tmp/x", "--bir-min", "0"}).code, 1);
  EXPECT_EQ(mot3d_cli({"--help"}).code, 0);

  const auto dir = scratch("malformed");
  {
    std::ofstream bad(dir / "0000.txt");
    bad << "0 1 Car 0 0\n";
  }
  const auto r = mot3d_cli({"track", "--detections", dir.string(), "--out", (dir / "out").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 1"), std::string::npos) << r.err;
}

TEST(CliEvaluate, PlantedIdentitySwitch) {
  const auto dir = scratch("eval");
  const auto r = mot3d_cli({"evaluate", "--gt", (kData / "eval_gt").string(), "--results",
                            (kData / "eval_ids").string(), "--classes", "Car", "--json", (dir / "r.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("sAMOTA"), std::string::npos);
  const auto reports = nlohmann::json::parse(slurp(dir / "r.json"));
  ASSERT_EQ(reports.size(), 3u);  // IoU_thres 0.25, 0.5, 0.7
  double prev_mota = 2.0;
  for (const auto& rep : reports) {
    const auto& car = rep["classes"][0];
    EXPECT_EQ(car["class"], "Car");
    const double m = car["full"]["mota"].get<double>();
    EXPECT_LE(m, prev_mota);
    prev_mota = m;
  }
  // the hypothesis on the Van is ignored, not a false positive
  const auto& loose = reports[0]["classes"][0]["full"];
  EXPECT_EQ(loose["ids"], 1);
  EXPECT_EQ(loose["fp"], 0);
  EXPECT_DOUBLE_EQ(loose["mota"].get<double>(), 0.875);
  EXPECT_DOUBLE_EQ(reports[2]["classes"][0]["full"]["mota"].get<double>(), 0.0);
}

TEST(CliEvaluate, GroundTruthAgainstItself) {
  const auto dir = scratch("self");
  const auto r = mot3d_cli({"evaluate", "--gt", (kData / "eval_gt").string(), "--results", (kData / "eval_gt").string(),
                            "--classes", "Car,Pedestrian", "--json", (dir / "r.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("warning: class 'Pedestrian' has no ground truth"), std::string::npos);
  for (const auto& rep : nlohmann::json::parse(slurp(dir / "r.json"))) {
    const auto& car = rep["classes"][0];
    EXPECT_DOUBLE_EQ(car["sAMOTA"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(car["full"]["mota"].get<double>(), 1.0);
    EXPECT_EQ(car["full"]["ids"], 0);
  }
}

TEST(CliEvaluate, TrackOutputDirectoryIsEvaluable) {
  // the run log sits next to the results and must not be read as a sequence
  const auto out = scratch("loop");
  ASSERT_EQ(mot3d_cli({"track", "--detections", (kData / "mini").string(), "--out", out.string()}).code, 0);
  const auto r = mot3d_cli({"evaluate", "--gt", out.string(), "--results", out.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.err.find("warning"), std::string::npos) << r.err;
}

TEST(CliCurves, WritesCsvAndSvg) {
  const auto dir = scratch("curves");
  const auto r = mot3d_cli({"curves", "--gt", (kData / "eval_gt").string(), "--results", (kData / "eval_ids").string(),
                            "--classes", "Car", "--iou-thres", "0.25", "--recall-steps", "8", "--out", dir.string(),
                            "--svg"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = slurp(dir / "Car_iou0.25.csv");
  EXPECT_EQ(csv.rfind("recall,threshold,fp,fn,ids,mota,smota,motp\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 9);
  for (const char* tag : {"fp", "fn", "mota", "smota"}) {
    EXPECT_TRUE(fs::exists(dir / (std::string("Car_iou0.25_") + tag + ".svg"))) << tag;
  }
}

TEST(CliBench, ReportsPositiveFps) {
  const auto r = mot3d_cli({"bench", "--detections", (kData / "mini").string(), "--repetitions", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto pos = r.out.find("fps: ");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_GT(std::stod(r.out.substr(pos + 5)), 0.0);
  EXPECT_EQ(mot3d_cli({"bench", "--detections", (kData / "mini").string(), "--repetitions", "2"}).code, 1);
}

}  // namespace
