// Experiment orchestration: validated configs, a deterministic replica pool,
// persisted run records with bit-exact replay, and CSV/JSON emission.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "percolab/dist.hpp"
#include "percolab/isoperimetry.hpp"
#include "percolab/lattice.hpp"
#include "percolab/renorm.hpp"

namespace percolab {

inline constexpr const char* kVersion = "percolab 0.1.0";

enum class Experiment {
  truncation,       // coupled travel times under rising truncation levels
  mu_continuity,    // time-constant estimates for a law list against a target law
  cheeger_sweep,    // exact small-cluster Cheeger statistics over a p grid
  wulff_sweep,      // boundary-distance norms, Wulff shapes, variational values over a p grid
  surgery_validate, // random path surgeries checked by the independent verifier
  box_classify,     // good-box fractions and per-condition failure counts
};

const char* experiment_name(Experiment e);
Experiment experiment_from_name(const std::string& name);

struct ExperimentConfig {
  Experiment experiment = Experiment::truncation;
  int dimension = 2;
  Coord radius = 0;   // 0 derives the window from n and x
  Coord margin = -1;  // -1 derives the margin
  DistributionSpec law;               // truncation law / mu_continuity target
  std::vector<DistributionSpec> laws; // mu_continuity candidates
  std::vector<double> p_grid;
  Vtx x = make_vtx(1, 0);
  int64_t n = 20;
  std::vector<double> k_list;
  double m0 = 0;  // 0 takes the smallest finite atom of the law
  int64_t replicas = 0;
  uint64_t seed = 1;
  RenormParams renorm;
  std::vector<Vec2> directions;       // wulff_sweep; default 8 compass directions
  double regularize_level = 0;        // 0 uses the sweep's own p
  int guard = 20;
  double stderr_mult = 3.0;

  // Cross-field validation; error messages name the offending field.
  void validate() const;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

// FNV-1a over the canonical JSON serialization, 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

struct RunRecord {
  nlohmann::json config;
  std::string hash;
  std::vector<std::string> columns;            // per-replica metric names
  std::vector<std::vector<double>> rows;       // one row per replica, column order
  nlohmann::json aggregates;                   // flat name -> number, ordered keys
  nlohmann::json extras;                       // shapes and other structured output
  std::vector<std::string> warnings;
  int64_t wall_ms = 0;
  std::string version = kVersion;
  int workers = 1;

  nlohmann::json to_json() const;
  static RunRecord from_json(const nlohmann::json& j);
};

// Runs the experiment with a work-stealing replica pool. Aggregates are
// reduced in replica order, so every worker count yields identical output.
RunRecord run(const ExperimentConfig& cfg, int workers = 1);

// Writes <experiment>-<hash8>.json, .csv (per replica) and -agg.csv into
// out_dir; returns the JSON record path. Every CSV row carries
// (seed, replica|"agg", config hash).
std::string write_record(const RunRecord& rec, const std::string& out_dir);

struct ReplayVerdict {
  bool match = false;
  std::string detail;  // "MATCH" or the first differing field
};

// Re-runs the stored config and compares aggregates bit-exactly.
ReplayVerdict replay(const std::string& record_path, int workers = 1);

// Maps an error to the process exit code: 2 for configuration or precondition
// failures, 3 for no-giant or window-too-small, 1 otherwise.
int exit_code_for(const Error& e);

}  // namespace percolab
