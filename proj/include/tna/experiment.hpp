#pragma once

#include "tna/graph.hpp"
#include "tna/metrics.hpp"
#include "tna/model.hpp"
#include "tna/training.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tna {

enum class RunMode { kNewEdges, kFullGraph, kRollout };

RunMode parse_run_mode(const std::string& text);
std::string to_string(RunMode mode);

struct ExperimentConfig {
  std::string dataset = "dataset";  // label written to outputs
  ModelConfig model = ModelConfig::canonical();
  TrainConfig train;
  RunMode mode = RunMode::kNewEdges;
  double fraction = 1.0;        // harness target share
  double train_fraction = 0.7;  // rollout history share
  std::size_t horizon = 5;
  Binarize binarize;
  std::size_t workers = 1;
  std::size_t full_graph_cap = kFullGraphCap;
  std::filesystem::path output_dir;  // empty: write nothing
  bool save_checkpoints = false;

  /// Checks everything that can be checked before training starts.
  void validate(const TemporalGraph& g) const;
};

struct ExperimentReport {
  RunMode mode = RunMode::kNewEdges;
  HarnessSummary harness;              // harness modes
  std::size_t rollout_start = 0;       // rollout mode
  std::vector<RolloutStep> rollout;    // rollout mode
  std::vector<LossBreakdown> rollout_history;
  std::size_t parameter_count = 0;
  std::vector<std::filesystem::path> written;
};

/// Runs the configured protocol and, when output_dir is set, writes
/// metrics.csv, summary.json, one train_t<k>.csv log per trained model and
/// optional checkpoints. Output bytes depend only on inputs and seed.
ExperimentReport run_experiment(const TemporalGraph& g, const ExperimentConfig& config);

/// Rollout start index floor(train_fraction * T), at least 2.
std::size_t rollout_start(std::size_t length, double train_fraction);

// ---- named datasets -------------------------------------------------------------

/// A public raw edge list and how to cut it into snapshots.
struct DatasetSpec {
  std::string name;
  std::vector<std::string> files;  // accepted raw file names, first match wins
  IngestOptions options;
};

/// "uci" (KONECT opsahl-ucsocial, weekly) and "bitcoina" (SNAP
/// soc-sign-bitcoinalpha, monthly).
const std::vector<DatasetSpec>& known_datasets();

/// Data directory from TNA_DATA_DIR, else "data".
std::filesystem::path default_data_dir();

/// Loads `name` from data_dir: a ready snapshot file <name>.snapshots if
/// present, else the raw file of a known dataset. std::nullopt when neither
/// exists.
std::optional<TemporalGraph> load_named_dataset(const std::string& name, const std::filesystem::path& data_dir);

}  // namespace tna
