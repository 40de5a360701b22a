// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "xmodal/config.hpp"
#include "xmodal/cost_counter.hpp"

#include <filesystem>
#include <vector>

namespace xmodal {

struct TrainLogRow {
  int epoch = 0;
  double lr = 0.0;
  double total = 0.0;
  double id = 0.0;
  double mmd = 0.0;
  double hctri = 0.0;
  double active_classes = 0.0;  // mean per batch
  double mean_class_mmd = 0.0;  // NaN when the alignment term is off
  double seconds = 0.0;
};

struct TrainResult {
  EncoderParams params;
  std::vector<int> label_identities;  // classifier row -> identity
  std::vector<TrainLogRow> log;
  CostCounter cost;
};

struct EvalOutcome {
  EvalReport report;
  SimilarityStats stats;
  FeatureSet embeddings;  // whole test set
};

/// Dataset synthesised from the config; the data stream seed overrides
/// `cfg.data.seed`.
SyntheticDataset make_dataset(const ExperimentConfig& cfg);

/// Trains in memory. On a non-finite loss the last finite parameters are
/// written to the configured checkpoint path before Errc::numeric is thrown.
TrainResult train_model(const ExperimentConfig& cfg, const FeatureSet& train);

EvalOutcome evaluate_model(const ExperimentConfig& cfg, const EncoderParams& params, const FeatureSet& test);

/// Writes train.csv, test.csv and manifest.txt into the data directory.
void cmd_generate(const ExperimentConfig& cfg);
/// Reads the dataset back, refusing files whose checksum differs from the manifest.
SyntheticDataset load_dataset(const std::filesystem::path& dir);
/// Writes checkpoint.bin and train_log.csv.
TrainResult cmd_train(const ExperimentConfig& cfg);
/// Writes eval_report.csv and embeddings.csv.
EvalOutcome cmd_eval(const ExperimentConfig& cfg);

struct SweepRow {
  double rho = 0.0;
  double rank1 = 0.0;
  double map = 0.0;
};

/// One train + eval per rho under output_dir/rho_<rho>, same data and seed
/// for every point; writes margin_sweep.csv.
std::vector<SweepRow> cmd_sweep_margin(const ExperimentConfig& cfg, const std::vector<double>& rhos);

/// Writes `<command>.resolved.cfg` into the output directory.
void write_resolved_config(const ExperimentConfig& cfg, const std::string& command);

}  // namespace xmodal
