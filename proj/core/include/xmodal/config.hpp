// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "xmodal/data.hpp"
#include "xmodal/encoder.hpp"
#include "xmodal/eval.hpp"
#include "xmodal/losses.hpp"
#include "xmodal/optimizer.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace xmodal {

/// Everything one experiment needs. Text form is `key = value`, one per
/// line, sections as dotted prefixes (`data.num_identities = 50`), `#`
/// comments. Unknown keys are errors.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "runs/default";
  std::filesystem::path data_dir;    // empty: output_dir
  std::filesystem::path checkpoint;  // empty: output_dir/checkpoint.bin

  SyntheticSpec data;
  EncoderShape encoder;
  bool retrieve_after_bn = false;
  BatchSpec batch;
  LossConfig loss;
  SgdHyper optim;
  int epochs = 60;
  int eval_trials = 10;
  Similarity similarity = Similarity::Cosine;
  Modality query_modality = Modality::Thermal;

  ExperimentConfig();

  /// Applies one `key=value` assignment.
  void set(std::string_view key, std::string_view value);
  /// Applies an override of the form `key=value`.
  void set_assignment(std::string_view assignment);

  void validate() const;

  std::filesystem::path resolved_data_dir() const;
  std::filesystem::path resolved_checkpoint() const;

  /// Full resolved text form; parse(to_text()) reproduces the config.
  std::string to_text() const;

  static ExperimentConfig parse(std::string_view text);
  static ExperimentConfig load(const std::filesystem::path& path);
};

/// Keys accepted by ExperimentConfig::set, in to_text() order.
const std::vector<std::string>& config_keys();

}  // namespace xmodal
