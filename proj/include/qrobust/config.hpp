// SPDX-License-Identifier: Apache-2.0
#ifndef QROBUST_CONFIG_HPP_
#define QROBUST_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "qrobust/attacks.hpp"
#include "qrobust/harness.hpp"
#include "qrobust/model.hpp"
#include "qrobust/trainer.hpp"

namespace qrobust {

/// Flat "key = value" text. '#' starts a comment, "[section]" prefixes the
/// following keys with "section.", values may be double-quoted. Duplicate
/// keys are a ParseError naming the line.
std::map<std::string, std::string> parse_key_values(std::string_view text);

struct ExperimentConfig {
  std::uint64_t seed = 1;

  std::string dataset = "toy";
  std::filesystem::path train_path = "train.tsv";
  std::filesystem::path dev_path = "dev.tsv";
  std::filesystem::path test_path = "test.tsv";
  std::filesystem::path lexicon_path = "lexicon.txt";
  std::size_t num_classes = 2;

  std::size_t synonyms_k = SynonymIndex::kDefaultK;
  double synonyms_min_cos = SynonymIndex::kDefaultMinCos;

  std::uint32_t max_seq_len = 32;
  std::uint32_t embed_dim = 64;
  std::uint32_t num_layers = 2;
  std::uint32_t num_heads = 4;
  std::uint32_t ffn_dim = 128;
  float dropout = 0.1f;

  TrainOptions train;

  AttackKind attack = AttackKind::kTextFooler;
  EvalMode mode = EvalMode::kTransfer;
  std::size_t max_candidates = SynonymIndex::kDefaultK;
  std::size_t query_budget = 2000;
  std::size_t pso_population = 20;
  std::size_t pso_iterations = 20;
  double pso_mutation_prob = 0.3;

  /// 0 means the whole test split.
  std::size_t eval_samples = 0;
  double adv_fraction = 0.1;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Relative paths are resolved against `base_dir`. Unknown keys and bad
/// values are ParseErrors.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical key = value form; parse_config(format_config(c)) == c.
std::string format_config(const ExperimentConfig& config);

}  // namespace qrobust

#endif  // QROBUST_CONFIG_HPP_
