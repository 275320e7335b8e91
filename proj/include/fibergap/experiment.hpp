#pragma once

#include <string>
#include <vector>

#include "fibergap/config.hpp"

namespace fibergap {

struct ManifestEntry {
  std::string file;
  std::string sha256;
};

struct RunResult {
  int status = 0;  // 0 ok, 1 experiment failure (artifacts still written)
  std::string message;
  std::vector<ManifestEntry> manifest;
};

// Runs cfg.experiment, writing artifacts plus manifest.txt into out_dir.
// ConfigError propagates; numerical failures that still leave artifacts
// (NotConverged, failed checks) come back as status 1.
RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

std::string sha256_file(const std::string& path);

}  // namespace fibergap
