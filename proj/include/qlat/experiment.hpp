#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qlat/cluster.hpp"

namespace qlat {

inline constexpr const char* kLibraryVersion = "0.1.0";

enum class ExitCode : int { ok = 0, contract = 1, config = 2 };

struct PolymerSettings {
  double delta = 0.5;
  double T = 0.0;  // 0: half the admissible T1
  int maxBoxes = 4;
  int maxDiam = 3;
  bool enforceAdmissible = true;
};

struct ExperimentConfig {
  std::string experiment;  // kernel, decompose, mayer, correlate, thermo
  InteractionSpec interaction;
  Box lambda;
  GridSpec grid;
  std::vector<double> t;
  std::vector<double> theta;
  std::string method = "auto";  // auto, dense, sparse
  Budget budget;
  ProbingParams probing;
  std::string outDir = "out";
  std::vector<std::string> formats{"csv", "json"};
  std::uint64_t seed = 12345;
  int maxDiam = -1;  // -1: every box of Lambda
  std::size_t samples = 400;
  std::vector<int> nRange{0, 1, 2};
  PolymerSettings polymer;
  std::string canonical;  // normalised JSON of the effective config
};

// Both throw ConfigError listing every violation found.
ExperimentConfig parse_config(const std::string& path, const std::optional<std::string>& experiment = {});
ExperimentConfig parse_config_text(const std::string& text, const std::optional<std::string>& experiment = {});

struct RunResult {
  ExitCode code = ExitCode::ok;
  std::vector<std::string> artifacts;
  std::vector<std::string> violations;
};

// Writes CSV tables, JSON sidecars, SCHEMA.md and manifest.json under cfg.outDir.
RunResult run_experiment(const ExperimentConfig& cfg);

std::string sha256_file(const std::string& path);

// Column documentation for every table the runner emits.
std::string schema_markdown();

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
};

// Suites: core, decay, cluster, thermo, all.
std::vector<CheckResult> verify_suite(const std::string& suite);

}  // namespace qlat
