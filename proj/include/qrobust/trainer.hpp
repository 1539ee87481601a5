// SPDX-License-Identifier: Apache-2.0
#ifndef QROBUST_TRAINER_HPP_
#define QROBUST_TRAINER_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "qrobust/dataset.hpp"
#include "qrobust/lexicon.hpp"
#include "qrobust/model.hpp"

namespace qrobust {

struct TrainOptions {
  std::size_t epochs = 12;
  float learning_rate = 0.1f;
  std::size_t batch_size = 8;

  friend bool operator==(const TrainOptions&, const TrainOptions&) = default;
};

struct EncodedExample {
  std::vector<TokenId> ids;
  int label = 0;
};

std::vector<EncodedExample> encode_dataset(const Dataset& dataset, const Vocabulary& vocab);

struct TrainReport {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_dev_accuracy;
  /// 1-based; 0 when no epoch ran.
  std::size_t best_epoch = 0;
  double best_dev_accuracy = 0.0;
};

/// Mini-batch SGD from a seeded initialization. Returns the weights of the
/// epoch with the best dev accuracy (earliest on ties); epochs == 0 returns
/// the initialized model. Deterministic given config.seed.
TransformerClassifier train(const ModelConfig& config, const Dataset& train, const Dataset& dev,
                            const Vocabulary& vocab, const TrainOptions& options,
                            TrainReport* report = nullptr);

double accuracy(const TransformerClassifier& model, std::span<const EncodedExample> examples);

/// Cross-entropy of one example, dropout disabled.
float cross_entropy(const TransformerClassifier& model, std::span<const TokenId> ids, int label);

struct LossAndGradient {
  float loss = 0.0f;
  /// Same layout as the model; every tensor holds d(loss)/d(parameter).
  TransformerClassifier gradient;
};

/// Analytic gradient of cross_entropy, dropout disabled.
LossAndGradient loss_and_gradient(const TransformerClassifier& model, std::span<const TokenId> ids,
                                  int label);

}  // namespace qrobust

#endif  // QROBUST_TRAINER_HPP_
