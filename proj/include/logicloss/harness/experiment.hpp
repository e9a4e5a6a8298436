#pragma once

// Dataset files, experiment configs and the run driver behind the `train` and `eval`
// commands.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "logicloss/harness/tasks.hpp"
#include "logicloss/model.hpp"
#include "logicloss/trainer.hpp"

namespace logicloss::harness {

// ---------------------------------------------------------------------------
// Line-delimited JSON records
//
// graph:    {"n": 8, "source": 0, "adjacency": [[0, 3, ...], ...], "labels": [0, 3, ...]}
// shortcut: {"id": 0, "class": 2, "label": 2 | null, "x": [..], "rx": [..]}

void write_graphs_jsonl(std::ostream& out, const std::vector<GraphInstance>& graphs);
std::vector<GraphInstance> read_graphs_jsonl(std::istream& in);

void write_shortcut_jsonl(std::ostream& out, const ShortcutTask& task, bool hide_labels);
// Points only; `rule` is left empty. Hidden labels are read back as absent.
ShortcutTask read_shortcut_jsonl(std::istream& in);

// ---------------------------------------------------------------------------
// Config

struct DataConfig {
  std::size_t train_count = 0;  // 0: task default
  std::size_t test_count = 0;
  std::uint64_t seed = 0;
  std::size_t n_vertices = 8;
  std::size_t pairs_per_sample = 10;
  double extra_edge_prob = 0.3;
  std::string train_file;  // optional JSONL inputs
  std::string test_file;
};

struct ExperimentConfig {
  std::string task;             // "shortcut" | "shortest_path"
  std::string constraint_file;  // optional override of the built-in rule (shortcut only)
  MlpSpec model;
  TrainConfig train;
  DataConfig data;
  std::string out_dir;
  std::filesystem::path base_dir;  // relative paths resolve against this

  nlohmann::json to_json() const;
};

// Task defaults: shortcut uses widths (3, 32, 32, 4) with a softmax head and tol 0.01;
// shortest_path uses (n^2, 128, 128, n) with a ReLU regression head, tol 1 in band mode.
ExperimentConfig default_config(const std::string& task);
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Runs

struct TaskData {
  Dataset train;
  Dataset test;
  std::string constraint_source;
};

TaskData build_task_data(const ExperimentConfig& cfg);

struct RunArtifacts {
  std::string run_id;
  std::filesystem::path config_snapshot;
  std::filesystem::path metrics_csv;
  std::filesystem::path checkpoint;
  std::filesystem::path manifest;
  std::filesystem::path constraint_copy;
};

struct RunOutcome {
  TrainResult result;
  RunArtifacts artifacts;  // empty paths when nothing was written
};

// 64-bit FNV-1a of the config snapshot and constraint source, as 16 hex digits.
std::string run_id(const ExperimentConfig& cfg, const std::string& constraint_source);

RunOutcome run_experiment(const ExperimentConfig& cfg, bool write_outputs = true);

MetricsRow evaluate_checkpoint(const ExperimentConfig& cfg, const ModelParameters& model,
                               std::vector<std::string>* tags = nullptr);

}  // namespace logicloss::harness
