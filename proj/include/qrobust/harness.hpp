// SPDX-License-Identifier: Apache-2.0
#ifndef QROBUST_HARNESS_HPP_
#define QROBUST_HARNESS_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qrobust/attacks.hpp"
#include "qrobust/dataset.hpp"

namespace qrobust {

/// Accuracy over the first n examples. n == 0 yields 0 and a warning.
double evaluate_clean(const TextClassifier& model, const Dataset& dataset, std::size_t n,
                      std::string* warning = nullptr);

enum class EvalMode : std::uint8_t { kTransfer, kAdaptive };

std::string_view to_string(EvalMode mode) noexcept;
EvalMode parse_eval_mode(std::string_view name);

/// A model under evaluation. `defense` labels the table row ("none",
/// "quantization", "adversarial-training").
struct ScoredModel {
  std::string id;
  std::string defense;
  const TextClassifier* classifier = nullptr;
  /// Checkpoint size in bytes, 0 when unknown.
  std::uintmax_t checkpoint_bytes = 0;
};

struct AttackBlock {
  AttackKind attack_kind = AttackKind::kTextFooler;
  EvalMode mode = EvalMode::kTransfer;
  double after_attack_accuracy = 0.0;
  double attack_success_rate = 0.0;
  double skip_rate = 0.0;
  /// Over successful attacks.
  double mean_words_changed = 0.0;
  /// Over attacked (non-skipped) examples.
  double mean_queries = 0.0;
  std::size_t correct = 0;
  std::size_t succeeded = 0;
  std::size_t skipped = 0;

  friend bool operator==(const AttackBlock&, const AttackBlock&) = default;
};

struct ModelReport {
  std::string model_id;
  std::string defense;
  std::uintmax_t checkpoint_bytes = 0;
  double clean_accuracy = 0.0;
  std::vector<AttackBlock> attacks;
  /// Index-aligned with the evaluated examples, one list per attack block.
  std::vector<std::vector<AttackResult>> results;

  friend bool operator==(const ModelReport&, const ModelReport&) = default;
};

struct EvaluationReport {
  std::string dataset;
  std::size_t sample_count = 0;
  /// Skipped examples stay in the after-attack denominator.
  bool skipped_in_denominator = true;
  AttackConfig attack_config;
  std::vector<ModelReport> models;
  std::vector<std::string> warnings;

  friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

/// Folds per-example results (one model, one attack) into a block. Throws
/// ContractViolation if the after-attack identity is violated.
AttackBlock summarize(std::span<const AttackResult> results, std::size_t n, AttackKind kind,
                      EvalMode mode);

/// Scores `target` on texts generated against another model. `generated`
/// holds the generating model's results for the same examples.
std::vector<AttackResult> transfer_results(const TextClassifier& target,
                                           std::span<const AttackResult> generated);

/// Evaluates the first n examples under each attack in `kinds`. In transfer
/// mode texts are generated against models[0] and scored on every model; in
/// adaptive mode each model is attacked directly. `attack_config.kind` is
/// overridden per block.
EvaluationReport evaluate_under_attack(const std::vector<ScoredModel>& models,
                                       const Dataset& dataset, const SynonymIndex& index,
                                       const AttackConfig& attack_config,
                                       const std::vector<AttackKind>& kinds, EvalMode mode,
                                       std::size_t n);

/// Convenience form for the float/quantized pair.
EvaluationReport evaluate_under_attack(const TextClassifier& float_model,
                                       const TextClassifier& quantized_model,
                                       const Dataset& dataset, const SynonymIndex& index,
                                       const AttackConfig& attack_config, EvalMode mode,
                                       std::size_t n);

/// Throws ContractViolation on any block whose identity fails to 1e-9.
void check_report(const EvaluationReport& report);

/// Pretty-printed JSON without per-example results.
std::string report_to_json(const EvaluationReport& report);
EvaluationReport report_from_json(std::string_view json);

std::string attack_result_to_json(const AttackResult& result);
AttackResult attack_result_from_json(std::string_view json);

/// One JSON object per line: dataset, example id, attack kind, mode, model
/// id, the config echo and the result itself.
std::string results_to_jsonl(const EvaluationReport& report);

struct ComparisonRow {
  std::size_t report_index = 0;
  std::string model_id;
  std::string defense;
  AttackKind attack_kind = AttackKind::kTextFooler;
  EvalMode mode = EvalMode::kTransfer;
  double clean_accuracy = 0.0;
  double after_attack_accuracy = 0.0;
  /// Against the defense == "none" row with the same attack and mode.
  std::optional<double> delta_vs_baseline;
  /// Against the same (model, defense, attack, mode) row of the first
  /// report that has one; absent on that first row.
  std::optional<double> delta_vs_first;
  /// checkpoint_bytes / baseline checkpoint_bytes.
  std::optional<double> size_ratio;
};

struct Comparison {
  std::string dataset;
  std::size_t sample_count = 0;
  std::vector<ComparisonRow> rows;
};

class ReportMismatch : public std::runtime_error {
 public:
  ReportMismatch(const std::string& what, std::vector<std::string> diff)
      : std::runtime_error(what), diff_(std::move(diff)) {}
  /// "field: left != right" lines.
  const std::vector<std::string>& diff() const noexcept { return diff_; }

 private:
  std::vector<std::string> diff_;
};

/// Throws ReportMismatch when dataset, sample count or attack settings
/// (everything but the attack kind) differ between reports.
Comparison compare_reports(const std::vector<EvaluationReport>& reports);

/// Accuracies in percent with two decimals.
std::string format_table(const Comparison& comparison);
std::string format_csv(const Comparison& comparison);

}  // namespace qrobust

#endif  // QROBUST_HARNESS_HPP_
