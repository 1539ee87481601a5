// SPDX-License-Identifier: Apache-2.0
#include "qrobust/advtrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qrobust/errors.hpp"
#include "qrobust/random.hpp"

namespace qrobust {

std::size_t augmentation_sample_size(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ContractViolation("augmentation fraction must lie in (0, 1], got " +
                            std::to_string(fraction));
  }
  if (n == 0) return 0;
  // Guard against 0.1 * 50 = 5.000000000000001 style overshoot.
  const double exact = fraction * static_cast<double>(n);
  const auto count = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  return std::clamp<std::size_t>(count, 1, n);
}

std::vector<std::size_t> augmentation_sample(std::size_t n, double fraction, std::uint64_t seed) {
  const std::size_t k = augmentation_sample_size(n, fraction);
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  Generator gen(derive_seed(seed, "augmentation-sample"));
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(pool[i], pool[i + uniform_index(gen, n - i)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<AugmentationRecord> generate_augmentation(const TextClassifier& model,
                                                      const Dataset& train, double fraction,
                                                      const SynonymIndex& index,
                                                      const AttackConfig& config,
                                                      std::size_t* attempts) {
  config.validate();
  const auto sample = augmentation_sample(train.size(), fraction, config.seed);
  if (attempts) *attempts = sample.size();
  std::vector<AugmentationRecord> out;
  for (std::size_t i : sample) {
    const Example& ex = train.examples[i];
    const AttackResult r = run_attack(model, {ex.text, ex.label, i}, index, config);
    if (r.status != AttackStatus::kSuccess) continue;
    out.push_back({i, r.perturbed_text, ex.label, r.status, r.queries_used});
  }
  return out;
}

Dataset augmented_dataset(const Dataset& train, const std::vector<AugmentationRecord>& records) {
  Dataset out = train;
  out.name = train.name + "+adv";
  for (const auto& rec : records) {
    if (rec.status != AttackStatus::kSuccess) continue;
    if (rec.source_index >= train.size() || train.examples[rec.source_index].label != rec.label) {
      throw ContractViolation("augmentation record " + std::to_string(rec.source_index) +
                              " does not carry its source label");
    }
    out.examples.push_back({rec.adversarial_text, rec.label});
  }
  return out;
}

AdversarialTrainingRun adversarial_train(const ModelConfig& config, const Dataset& train,
                                         const Dataset& dev, const Vocabulary& vocab,
                                         const SynonymIndex& index, double fraction,
                                         const AttackConfig& attack_config,
                                         const TrainOptions& options) {
  AdversarialTrainingRun run{.base = TransformerClassifier::zeros(config),
                             .model = TransformerClassifier::zeros(config)};
  run.base = qrobust::train(config, train, dev, vocab, options, &run.base_report);
  const FloatTextClassifier target(run.base, vocab);
  run.augmentation =
      generate_augmentation(target, train, fraction, index, attack_config, &run.attempts);
  run.model = qrobust::train(config, augmented_dataset(train, run.augmentation), dev, vocab,
                             options, &run.retrain_report);
  return run;
}

}  // namespace qrobust
