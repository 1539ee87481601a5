// SPDX-License-Identifier: Apache-2.0
#ifndef QROBUST_ADVTRAIN_HPP_
#define QROBUST_ADVTRAIN_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "qrobust/attacks.hpp"
#include "qrobust/dataset.hpp"
#include "qrobust/lexicon.hpp"
#include "qrobust/model.hpp"
#include "qrobust/trainer.hpp"

namespace qrobust {

struct AugmentationRecord {
  std::size_t source_index = 0;
  std::string adversarial_text;
  /// Copied from the source example.
  int label = 0;
  AttackStatus status = AttackStatus::kFailed;
  std::size_t queries_used = 0;

  friend bool operator==(const AugmentationRecord&, const AugmentationRecord&) = default;
};

/// ceil(fraction * n), at least 1 for non-empty input. Throws
/// ContractViolation unless 0 < fraction <= 1.
std::size_t augmentation_sample_size(std::size_t n, double fraction);

/// Uniform sample without replacement, ascending, seeded by `seed`.
std::vector<std::size_t> augmentation_sample(std::size_t n, double fraction, std::uint64_t seed);

/// Attacks the sampled training examples (sample seeded by config.seed) and
/// returns the successful ones. `attempts` receives the sample size.
std::vector<AugmentationRecord> generate_augmentation(const TextClassifier& model,
                                                      const Dataset& train, double fraction,
                                                      const SynonymIndex& index,
                                                      const AttackConfig& config,
                                                      std::size_t* attempts = nullptr);

/// Training examples followed by every successful record.
Dataset augmented_dataset(const Dataset& train, const std::vector<AugmentationRecord>& records);

struct AdversarialTrainingRun {
  TransformerClassifier base;
  std::vector<AugmentationRecord> augmentation;
  std::size_t attempts = 0;
  TransformerClassifier model;
  TrainReport base_report;
  TrainReport retrain_report;
};

/// Train on `train`, augment, then retrain from scratch on the augmented
/// corpus with the same config (same seed) and the same vocabulary.
AdversarialTrainingRun adversarial_train(const ModelConfig& config, const Dataset& train,
                                         const Dataset& dev, const Vocabulary& vocab,
                                         const SynonymIndex& index, double fraction,
                                         const AttackConfig& attack_config,
                                         const TrainOptions& options = {});

}  // namespace qrobust

#endif  // QROBUST_ADVTRAIN_HPP_
