// SPDX-License-Identifier: Apache-2.0
#ifndef QROBUST_PIPELINE_HPP_
#define QROBUST_PIPELINE_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "qrobust/config.hpp"
#include "qrobust/dataset.hpp"
#include "qrobust/harness.hpp"
#include "qrobust/lexicon.hpp"
#include "qrobust/model.hpp"

// Steps shared by the command-line tool and the acceptance suite. Each step
// reads its inputs from the experiment and the output directory, writes its
// artifacts plus a manifest_<step>.json, and returns the paths it wrote.

namespace qrobust {

inline constexpr const char* kFloatCheckpointFile = "model.qgck";
inline constexpr const char* kQuantizedCheckpointFile = "model.q8.qgck";
inline constexpr const char* kAdvtrainDir = "advtrain";

struct Experiment {
  ExperimentConfig config;
  Dataset train;
  Dataset dev;
  Dataset test;
  /// Built from the training split.
  Vocabulary vocab;
  SynonymIndex index;
  /// Input label -> content hash of the file it came from.
  std::map<std::string, std::string> input_hashes;
};

Experiment load_experiment(const ExperimentConfig& config);

ModelConfig model_config(const Experiment& experiment);
/// Attack seed is derived from the experiment seed.
AttackConfig attack_config(const ExperimentConfig& config);
std::size_t eval_sample_count(const Experiment& experiment);

struct StepOutput {
  std::vector<std::filesystem::path> files;
  /// One human-readable line per notable number.
  std::vector<std::string> summary;
};

StepOutput train_step(const Experiment& experiment, const std::filesystem::path& out);
StepOutput quantize_step(const Experiment& experiment, const std::filesystem::path& out);
/// float vs quantized under one attack.
StepOutput attack_step(const Experiment& experiment, const std::filesystem::path& out,
                       AttackKind kind, EvalMode mode);
StepOutput advtrain_step(const Experiment& experiment, const std::filesystem::path& out);
/// All three attacks over float, quantized and (when present) the
/// adversarially trained model.
StepOutput evaluate_step(const Experiment& experiment, const std::filesystem::path& out,
                         EvalMode mode);
/// Compares evaluation reports; writes comparison.txt and comparison.csv.
StepOutput report_step(const std::vector<std::filesystem::path>& reports,
                       const std::filesystem::path& out, const ExperimentConfig* config);

/// manifest_<step>.json: config echo, seed, input hashes, output hashes.
std::filesystem::path write_manifest(const std::filesystem::path& out, const std::string& step,
                                     const ExperimentConfig& config,
                                     const std::map<std::string, std::string>& input_hashes,
                                     const std::vector<std::filesystem::path>& outputs);

}  // namespace qrobust

#endif  // QROBUST_PIPELINE_HPP_
