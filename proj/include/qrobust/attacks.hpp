// SPDX-License-Identifier: Apache-2.0
#ifndef QROBUST_ATTACKS_HPP_
#define QROBUST_ATTACKS_HPP_

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qrobust/lexicon.hpp"
#include "qrobust/model.hpp"
#include "qrobust/quant.hpp"

namespace qrobust {

/// The only surface attacks see; float and quantized models are attacked
/// through identical code.
class TextClassifier {
 public:
  virtual ~TextClassifier() = default;
  virtual ClassifierOutput classify(std::span<const std::string> tokens) const = 0;
};

class FloatTextClassifier final : public TextClassifier {
 public:
  FloatTextClassifier(const TransformerClassifier& model, const Vocabulary& vocab)
      : model_(model), vocab_(vocab) {}
  ClassifierOutput classify(std::span<const std::string> tokens) const override;

 private:
  const TransformerClassifier& model_;
  const Vocabulary& vocab_;
};

class QuantizedTextClassifier final : public TextClassifier {
 public:
  QuantizedTextClassifier(const QuantizedClassifier& model, const Vocabulary& vocab)
      : model_(model), vocab_(vocab) {}
  ClassifierOutput classify(std::span<const std::string> tokens) const override;

 private:
  const QuantizedClassifier& model_;
  const Vocabulary& vocab_;
};

/// Forwards to another classifier and counts calls.
class CountingClassifier final : public TextClassifier {
 public:
  explicit CountingClassifier(const TextClassifier& inner) : inner_(inner) {}
  ClassifierOutput classify(std::span<const std::string> tokens) const override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_.classify(tokens);
  }
  std::size_t calls() const noexcept { return calls_.load(); }
  void reset() noexcept { calls_ = 0; }

 private:
  const TextClassifier& inner_;
  mutable std::atomic<std::size_t> calls_{0};
};

enum class AttackKind : std::uint8_t { kTextFooler, kPwws, kPso };

std::string_view to_string(AttackKind kind) noexcept;
/// Accepts "textfooler", "pwws" and "pso".
AttackKind parse_attack_kind(std::string_view name);

struct AttackConfig {
  AttackKind kind = AttackKind::kTextFooler;
  std::size_t max_candidates_per_word = SynonymIndex::kDefaultK;
  std::size_t query_budget = 2000;
  std::size_t pso_population = 20;
  std::size_t pso_iterations = 20;
  double pso_mutation_prob = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const AttackConfig&, const AttackConfig&) = default;
};

enum class AttackStatus : std::uint8_t { kSuccess, kFailed, kSkipped };

std::string_view to_string(AttackStatus status) noexcept;
AttackStatus parse_attack_status(std::string_view name);

struct Substitution {
  std::size_t position = 0;
  std::string original;
  std::string replacement;
  friend bool operator==(const Substitution&, const Substitution&) = default;
};

/// Texts are stored in normalized (tokenized, space-joined) form so token
/// positions in `substitutions` index tokenize(text) directly.
struct AttackResult {
  std::string original_text;
  std::string perturbed_text;
  int original_label = 0;
  int original_prediction = 0;
  int final_prediction = 0;
  AttackStatus status = AttackStatus::kFailed;
  std::size_t words_changed = 0;
  std::size_t queries_used = 0;
  /// In commit order.
  std::vector<Substitution> substitutions;

  friend bool operator==(const AttackResult&, const AttackResult&) = default;
};

struct AttackExample {
  std::string text;
  int label = 0;
  /// Position in the evaluated dataset; mixes into the per-example seed.
  std::size_t index = 0;
};

/// score_i = P(y | tokens) - P(y | tokens without i); -inf for non-word
/// tokens. Costs exactly (#word tokens + 1) queries.
std::vector<double> word_importance(const TextClassifier& model,
                                    std::span<const std::string> tokens, int true_label);

struct PwwsCandidate {
  std::size_t position = 0;
  /// P(y | x) - P(y | x with the token replaced by UNK).
  double saliency = 0.0;
  std::string best_synonym;
  /// P(y | x) - P(y | x with the token replaced by best_synonym).
  double best_drop = 0.0;
  bool best_flips = false;
  /// Model output with only this substitution applied.
  ClassifierOutput best_output;
  /// best_drop * softmax(saliency) at this position.
  double priority = 0.0;
};

/// PWWS scoring pass over the unperturbed tokens. Positions without synonyms
/// are omitted. `queries` receives the number of model calls made; returns
/// nullopt when `budget` runs out.
std::optional<std::vector<PwwsCandidate>> pwws_priorities(const TextClassifier& model,
                                                          std::span<const std::string> tokens,
                                                          int true_label, const SynonymIndex& index,
                                                          const AttackConfig& config,
                                                          std::size_t budget, std::size_t* queries);

AttackResult textfooler_attack(const TextClassifier& model, const AttackExample& example,
                               const SynonymIndex& index, const AttackConfig& config);
AttackResult pwws_attack(const TextClassifier& model, const AttackExample& example,
                         const SynonymIndex& index, const AttackConfig& config);
AttackResult pso_attack(const TextClassifier& model, const AttackExample& example,
                        const SynonymIndex& index, const AttackConfig& config);

/// Dispatches on config.kind.
AttackResult run_attack(const TextClassifier& model, const AttackExample& example,
                        const SynonymIndex& index, const AttackConfig& config);

/// Re-derives every AttackResult invariant from scratch, re-running the model
/// on both texts.
bool verify_result(const TextClassifier& model, const SynonymIndex& index,
                   const AttackResult& result);

}  // namespace qrobust

#endif  // QROBUST_ATTACKS_HPP_
