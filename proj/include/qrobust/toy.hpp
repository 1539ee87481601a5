// SPDX-License-Identifier: Apache-2.0
#ifndef QROBUST_TOY_HPP_
#define QROBUST_TOY_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "qrobust/dataset.hpp"
#include "qrobust/lexicon.hpp"

namespace qrobust::toy {

// Desk-scale binary sentiment corpus (0 = negative, 1 = positive) built
// from a fixed word list. Every sentence carries one or two "strong"
// adjectives of its own polarity. Each strong pair shares a synonym cluster
// with two "lukewarm" words that by default carry no label signal, so a
// lexicon synonym swap erases the evidence; that is what the attacks find.

struct CorpusOptions {
  std::size_t train_size = 600;
  std::size_t dev_size = 200;
  std::size_t test_size = 300;
  /// Probability of an extra clause carrying a lukewarm word.
  double lukewarm_clause_prob = 0.35;
  /// Probability that the lukewarm word comes from the opposite polarity's
  /// clusters.
  double lukewarm_bias = 0.5;
  std::uint64_t seed = 7;
};

struct Corpus {
  Dataset train;
  Dataset dev;
  Dataset test;
};

Corpus make_corpus(const CorpusOptions& options);
Dataset make_split(std::size_t size, const CorpusOptions& options, std::string name, Split split,
                   std::uint64_t stream);

std::span<const std::string_view> strong_words(int polarity);
std::span<const std::string_view> lukewarm_words(int polarity);

/// Bag-of-words oracle: sign of (#strong positive - #strong negative);
/// -1 when the counts tie.
int keyword_label(std::string_view text);

/// Unit vectors clustered by synonym group; every group gets its own axis so
/// cross-group cosines stay far below the default threshold.
EmbeddingStore make_lexicon();

/// "word v1 ... vd" text, the load_embeddings input format.
std::string format_embeddings(const EmbeddingStore& store);

}  // namespace qrobust::toy

#endif  // QROBUST_TOY_HPP_
