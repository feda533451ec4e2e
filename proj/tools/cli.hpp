#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mot3d/config.hpp"
#include "mot3d/io.hpp"

namespace mot3d::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2 };

// Everything a subcommand needs, resolved from flags and the optional JSON config.
struct RunManifest {
  std::string command;
  std::filesystem::path detections;  // track, bench: file or directory of sequences
  std::filesystem::path ground_truth;  // evaluate, curves
  std::filesystem::path results;       // evaluate, curves
  std::filesystem::path out_dir;       // track, curves
  std::filesystem::path json_out;      // evaluate: optional JSON report path
  std::optional<std::filesystem::path> config_path;
  RunConfig config;
  ResultFormat format = ResultFormat::Kitti;
  bool svg = false;
  int jobs = 1;
  int repetitions = 5;

  // Throws UsageError when a referenced input is missing or a class is unknown.
  void validate() const;
};

// Sequence files under `path` (sorted), or the file itself.
// Written next to the results by `track`; never treated as a sequence file.
inline constexpr const char* kTrackLogName = "track_log.csv";

std::vector<std::filesystem::path> sequence_files(const std::filesystem::path& path);

int cmd_track(const RunManifest& m, std::ostream& out);
int cmd_evaluate(const RunManifest& m, std::ostream& out);
int cmd_curves(const RunManifest& m, std::ostream& out);
int cmd_bench(const RunManifest& m, std::ostream& out);

// Parses argv, dispatches, and maps errors to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mot3d::cli
