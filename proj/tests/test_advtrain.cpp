// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "qrobust/advtrain.hpp"
#include "qrobust/checkpoint.hpp"
#include "qrobust/errors.hpp"
#include "support.hpp"

namespace qrobust {
namespace {

using testing::ToySetup;

Dataset head(const Dataset& ds, std::size_t n) {
  Dataset out = ds;
  out.examples.resize(n);
  return out;
}

ModelConfig toy_config() {
  ModelConfig c;
  c.vocab_size = static_cast<std::uint32_t>(ToySetup::get().vocab.size());
  c.seed = 5;
  return c;
}

TrainOptions quick() {
  TrainOptions o;
  o.epochs = 3;
  return o;
}

TEST(SampleSize, CeilingOfFraction) {
  EXPECT_EQ(augmentation_sample_size(10, 1.0), 10u);
  EXPECT_EQ(augmentation_sample_size(50, 0.1), 5u);
  EXPECT_EQ(augmentation_sample_size(600, 0.1), 60u);
  EXPECT_EQ(augmentation_sample_size(51, 0.1), 6u);
  EXPECT_EQ(augmentation_sample_size(3, 0.1), 1u);
  EXPECT_EQ(augmentation_sample_size(0, 0.5), 0u);
}

TEST(SampleSize, FractionOutsideUnitIntervalIsRejected) {
  EXPECT_THROW(augmentation_sample_size(10, 0.0), ContractViolation);
  EXPECT_THROW(augmentation_sample_size(10, 1.5), ContractViolation);
  EXPECT_THROW(augmentation_sample_size(10, -0.1), ContractViolation);
  EXPECT_THROW(augmentation_sample_size(10, std::nan("")), ContractViolation);
}

TEST(Sample, SortedDistinctAndReproducible) {
  const auto a = augmentation_sample(50, 0.1, 17);
  EXPECT_EQ(a, augmentation_sample(50, 0.1, 17));
  ASSERT_EQ(a.size(), 5u);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()).size(), a.size());
  for (std::size_t i : a) EXPECT_LT(i, 50u);
  bool any_differ = false;
  for (std::uint64_t s = 18; s < 28; ++s) any_differ |= augmentation_sample(50, 0.1, s) != a;
  EXPECT_TRUE(any_differ);
  const auto all = augmentation_sample(10, 1.0, 3);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(all[i], i);
}

TEST(Sample, RoughlyUniform) {
  std::vector<std::size_t> hits(20, 0);
  for (std::uint64_t s = 0; s < 2000; ++s) {
    for (std::size_t i : augmentation_sample(20, 0.25, s)) ++hits[i];
  }
  // Each index is picked with probability 1/4; 500 expected, sd about 19.
  for (std::size_t h : hits) {
    EXPECT_GT(h, 400u);
    EXPECT_LT(h, 600u);
  }
}

TEST(Augmentation, FullFractionAttacksEveryExample) {
  const ToySetup& toy = ToySetup::get();
  const FloatTextClassifier model(toy.model, toy.vocab);
  const Dataset ten = head(toy.corpus.train, 10);
  AttackConfig c;
  c.seed = 2;
  std::size_t attempts = 0;
  const auto records = generate_augmentation(model, ten, 1.0, toy.index, c, &attempts);
  EXPECT_EQ(attempts, 10u);
  EXPECT_LE(records.size(), 10u);
  for (const auto& r : records) {
    EXPECT_EQ(r.status, AttackStatus::kSuccess);
    EXPECT_EQ(r.label, ten.examples[r.source_index].label);
    EXPECT_NE(model.classify(tokenize(r.adversarial_text)).predicted_label, r.label);
  }
}

TEST(Augmentation, SampleFollowsAttackSeed) {
  const ToySetup& toy = ToySetup::get();
  const FloatTextClassifier model(toy.model, toy.vocab);
  const Dataset fifty = head(toy.corpus.train, 50);
  AttackConfig c;
  c.seed = 11;
  std::size_t attempts = 0;
  const auto a = generate_augmentation(model, fifty, 0.1, toy.index, c, &attempts);
  EXPECT_EQ(attempts, 5u);
  EXPECT_EQ(a, generate_augmentation(model, fifty, 0.1, toy.index, c));
  const auto sample = augmentation_sample(50, 0.1, c.seed);
  for (const auto& r : a) EXPECT_TRUE(std::binary_search(sample.begin(), sample.end(), r.source_index));
}

TEST(Augmentation, AugmentedDatasetAppendsWithSourceLabels) {
  const Dataset train = head(ToySetup::get().corpus.train, 4);
  const std::vector<AugmentationRecord> records = {
      {1, "the movie was fine", train.examples[1].label, AttackStatus::kSuccess, 9},
      {3, "x", train.examples[3].label, AttackStatus::kFailed, 4},
  };
  const Dataset out = augmented_dataset(train, records);
  ASSERT_EQ(out.size(), 5u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(out.examples[i].text, train.examples[i].text);
  EXPECT_EQ(out.examples[4].text, "the movie was fine");
  EXPECT_EQ(out.examples[4].label, train.examples[1].label);

  std::vector<AugmentationRecord> relabeled = {records[0]};
  relabeled[0].label = 1 - relabeled[0].label;
  EXPECT_THROW(augmented_dataset(train, relabeled), ContractViolation);
  std::vector<AugmentationRecord> dangling = {records[0]};
  dangling[0].source_index = 99;
  EXPECT_THROW(augmented_dataset(train, dangling), ContractViolation);
}

TEST(AdversarialTrain, NoSynonymsRetrainsIdentically) {
  const ToySetup& toy = ToySetup::get();
  const Dataset train = head(toy.corpus.train, 120);
  const AdversarialTrainingRun run = adversarial_train(toy_config(), train, toy.corpus.dev, toy.vocab,
                                                       SynonymIndex{}, 0.2, AttackConfig{}, quick());
  EXPECT_TRUE(run.augmentation.empty());
  EXPECT_EQ(run.attempts, 24u);
  const TransformerClassifier plain = qrobust::train(toy_config(), train, toy.corpus.dev, toy.vocab, quick());
  EXPECT_EQ(serialize_checkpoint(run.model), serialize_checkpoint(plain));
  EXPECT_EQ(serialize_checkpoint(run.base), serialize_checkpoint(plain));
}

TEST(AdversarialTrain, DeterministicAndLabelPreserving) {
  const ToySetup& toy = ToySetup::get();
  const Dataset train = head(toy.corpus.train, 150);
  AttackConfig c;
  c.seed = 4;
  const auto a = adversarial_train(toy_config(), train, toy.corpus.dev, toy.vocab, toy.index, 0.2, c, quick());
  const auto b = adversarial_train(toy_config(), train, toy.corpus.dev, toy.vocab, toy.index, 0.2, c, quick());
  EXPECT_EQ(a.augmentation, b.augmentation);
  EXPECT_EQ(serialize_checkpoint(a.model), serialize_checkpoint(b.model));
  EXPECT_FALSE(a.augmentation.empty());
  EXPECT_NE(serialize_checkpoint(a.model), serialize_checkpoint(a.base));

  const FloatTextClassifier base(a.base, toy.vocab);
  for (const auto& r : a.augmentation) {
    EXPECT_EQ(r.label, train.examples[r.source_index].label);
    EXPECT_NE(base.classify(tokenize(r.adversarial_text)).predicted_label, r.label);
  }
  EXPECT_EQ(a.retrain_report.epoch_loss.size(), quick().epochs);
}

}  // namespace
}  // namespace qrobust
