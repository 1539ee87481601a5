// SPDX-License-Identifier: Apache-2.0
#include "qrobust/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "qrobust/errors.hpp"
#include "qrobust/random.hpp"

namespace qrobust {

namespace {

constexpr double kPsoOmegaStart = 0.8;
constexpr double kPsoOmegaEnd = 0.2;

/// Budgeted access to the model; every call counts as one query.
class QueryOracle {
 public:
  QueryOracle(const TextClassifier& model, std::size_t budget) : model_(model), budget_(budget) {}

  std::optional<ClassifierOutput> query(std::span<const std::string> tokens) {
    if (used_ >= budget_) return std::nullopt;
    ++used_;
    return model_.classify(tokens);
  }
  std::size_t used() const noexcept { return used_; }

 private:
  const TextClassifier& model_;
  std::size_t budget_;
  std::size_t used_ = 0;
};

double prob(const ClassifierOutput& out, int label) {
  return out.probabilities.at(static_cast<std::size_t>(label));
}

std::span<const Synonym> candidates_for(const SynonymIndex& index, std::string_view word,
                                        const AttackConfig& config) {
  if (!is_word_token(word)) return {};
  auto list = index.lookup(word);
  return list.first(std::min(list.size(), config.max_candidates_per_word));
}

/// Result skeleton shared by the three attacks.
AttackResult start_result(const std::vector<std::string>& tokens, const AttackExample& example) {
  AttackResult r;
  r.original_text = detokenize(tokens);
  r.perturbed_text = r.original_text;
  r.original_label = example.label;
  return r;
}

void finish(AttackResult& r, const std::vector<std::string>& current, int final_prediction,
            std::size_t queries) {
  r.perturbed_text = detokenize(current);
  r.final_prediction = final_prediction;
  r.words_changed = r.substitutions.size();
  r.queries_used = queries;
  if (r.original_prediction != r.original_label) {
    r.status = AttackStatus::kSkipped;
  } else {
    r.status = final_prediction != r.original_label ? AttackStatus::kSuccess : AttackStatus::kFailed;
  }
}

struct Choice {
  std::size_t candidate = 0;
  ClassifierOutput output;
  bool flips = false;
};

/// Tries each synonym at `position` in similarity order. The first one that
/// flips the label wins; otherwise the one with the lowest P(y), earliest on
/// ties. nullopt when the budget ran out before every candidate was scored.
std::optional<Choice> best_substitution(QueryOracle& oracle, std::vector<std::string> tokens,
                                        std::size_t position, std::span<const Synonym> candidates,
                                        int label, bool* exhausted) {
  std::optional<Choice> best;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    tokens[position] = candidates[c].word;
    auto out = oracle.query(tokens);
    if (!out) {
      *exhausted = true;
      return std::nullopt;
    }
    if (out->predicted_label != label) return Choice{c, std::move(*out), true};
    if (!best || prob(*out, label) < prob(best->output, label)) best = Choice{c, std::move(*out), false};
  }
  return best;
}

/// Positions sorted by descending score, lower position first on ties,
/// skipping non-finite scores.
std::vector<std::size_t> rank_positions(std::span<const double> scores) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isfinite(scores[i])) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

/// Deletion importance relative to `base` = P(y | tokens); nullopt on budget
/// exhaustion.
std::optional<std::vector<double>> deletion_scores(QueryOracle& oracle,
                                                   std::span<const std::string> tokens, int label,
                                                   double base) {
  std::vector<double> scores(tokens.size(), -std::numeric_limits<double>::infinity());
  std::vector<std::string> reduced;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!is_word_token(tokens[i])) continue;
    reduced.assign(tokens.begin(), tokens.end());
    reduced.erase(reduced.begin() + static_cast<std::ptrdiff_t>(i));
    auto out = oracle.query(reduced);
    if (!out) return std::nullopt;
    scores[i] = base - prob(*out, label);
  }
  return scores;
}

/// PWWS scoring against the unperturbed tokens, whose output is `original`.
std::optional<std::vector<PwwsCandidate>> pwws_scores(QueryOracle& oracle,
                                                      std::span<const std::string> tokens,
                                                      int label, const ClassifierOutput& original,
                                                      const SynonymIndex& index,
                                                      const AttackConfig& config) {
  const double base = prob(original, label);
  std::vector<std::size_t> word_positions;
  std::vector<float> saliency;
  std::vector<std::string> trial(tokens.begin(), tokens.end());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!is_word_token(tokens[i])) continue;
    trial[i] = std::string(Vocabulary::kUnkWord);
    auto out = oracle.query(trial);
    trial[i] = tokens[i];
    if (!out) return std::nullopt;
    word_positions.push_back(i);
    saliency.push_back(static_cast<float>(base - prob(*out, label)));
  }
  const std::vector<float> weights = saliency.empty() ? std::vector<float>{} : softmax(saliency);

  std::vector<PwwsCandidate> out;
  for (std::size_t w = 0; w < word_positions.size(); ++w) {
    const std::size_t position = word_positions[w];
    auto candidates = candidates_for(index, tokens[position], config);
    if (candidates.empty()) continue;
    bool exhausted = false;
    auto choice = best_substitution(oracle, trial, position, candidates, label, &exhausted);
    if (exhausted || !choice) return std::nullopt;
    PwwsCandidate c;
    c.position = position;
    c.saliency = saliency[w];
    c.best_synonym = candidates[choice->candidate].word;
    c.best_drop = base - prob(choice->output, label);
    c.best_flips = choice->flips;
    c.best_output = std::move(choice->output);
    c.priority = c.best_drop * static_cast<double>(weights[w]);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

ClassifierOutput FloatTextClassifier::classify(std::span<const std::string> tokens) const {
  return forward(model_, vocab_.encode(tokens));
}

ClassifierOutput QuantizedTextClassifier::classify(std::span<const std::string> tokens) const {
  return forward(model_, vocab_.encode(tokens));
}

std::string_view to_string(AttackKind kind) noexcept {
  switch (kind) {
    case AttackKind::kTextFooler: return "textfooler";
    case AttackKind::kPwws: return "pwws";
    case AttackKind::kPso: return "pso";
  }
  return "unknown";
}

AttackKind parse_attack_kind(std::string_view name) {
  if (name == "textfooler") return AttackKind::kTextFooler;
  if (name == "pwws") return AttackKind::kPwws;
  if (name == "pso") return AttackKind::kPso;
  throw ContractViolation("unknown attack '" + std::string(name) + "'");
}

std::string_view to_string(AttackStatus status) noexcept {
  switch (status) {
    case AttackStatus::kSuccess: return "success";
    case AttackStatus::kFailed: return "failed";
    case AttackStatus::kSkipped: return "skipped";
  }
  return "unknown";
}

AttackStatus parse_attack_status(std::string_view name) {
  if (name == "success") return AttackStatus::kSuccess;
  if (name == "failed") return AttackStatus::kFailed;
  if (name == "skipped") return AttackStatus::kSkipped;
  throw ContractViolation("unknown attack status '" + std::string(name) + "'");
}

void AttackConfig::validate() const {
  if (max_candidates_per_word == 0 || query_budget == 0 || pso_population == 0) {
    throw ContractViolation("attack budgets and sizes must be positive");
  }
  if (!(pso_mutation_prob >= 0.0 && pso_mutation_prob <= 1.0)) {
    throw ContractViolation("pso_mutation_prob must lie in [0, 1]");
  }
}

std::vector<double> word_importance(const TextClassifier& model,
                                    std::span<const std::string> tokens, int true_label) {
  QueryOracle oracle(model, std::numeric_limits<std::size_t>::max());
  const ClassifierOutput original = *oracle.query(tokens);
  return *deletion_scores(oracle, tokens, true_label, prob(original, true_label));
}

AttackResult textfooler_attack(const TextClassifier& model, const AttackExample& example,
                               const SynonymIndex& index, const AttackConfig& config) {
  config.validate();
  const auto tokens = tokenize(example.text);
  AttackResult result = start_result(tokens, example);
  QueryOracle oracle(model, config.query_budget);
  const int label = example.label;

  const ClassifierOutput original = *oracle.query(tokens);
  result.original_prediction = original.predicted_label;
  std::vector<std::string> current = tokens;
  ClassifierOutput current_out = original;
  if (original.predicted_label != label) {
    finish(result, current, original.predicted_label, oracle.used());
    return result;
  }
  auto scores = deletion_scores(oracle, tokens, label, prob(original, label));
  if (!scores) {
    finish(result, current, original.predicted_label, oracle.used());
    return result;
  }

  bool exhausted = false;
  for (std::size_t position : rank_positions(*scores)) {
    auto candidates = candidates_for(index, tokens[position], config);
    if (candidates.empty()) continue;
    auto choice = best_substitution(oracle, current, position, candidates, label, &exhausted);
    if (exhausted) break;
    if (!choice) continue;
    if (!choice->flips && !(prob(choice->output, label) < prob(current_out, label))) continue;
    const std::string& replacement = candidates[choice->candidate].word;
    result.substitutions.push_back({position, tokens[position], replacement});
    current[position] = replacement;
    current_out = std::move(choice->output);
    if (choice->flips) break;
  }
  finish(result, current, current_out.predicted_label, oracle.used());
  return result;
}

std::optional<std::vector<PwwsCandidate>> pwws_priorities(const TextClassifier& model,
                                                          std::span<const std::string> tokens,
                                                          int true_label, const SynonymIndex& index,
                                                          const AttackConfig& config,
                                                          std::size_t budget, std::size_t* queries) {
  QueryOracle oracle(model, budget);
  std::optional<std::vector<PwwsCandidate>> out;
  if (auto original = oracle.query(tokens)) {
    out = pwws_scores(oracle, tokens, true_label, *original, index, config);
  }
  if (queries) *queries = oracle.used();
  return out;
}

AttackResult pwws_attack(const TextClassifier& model, const AttackExample& example,
                         const SynonymIndex& index, const AttackConfig& config) {
  config.validate();
  const auto tokens = tokenize(example.text);
  AttackResult result = start_result(tokens, example);
  const int label = example.label;
  QueryOracle oracle(model, config.query_budget);

  const ClassifierOutput original = *oracle.query(tokens);
  result.original_prediction = original.predicted_label;
  if (original.predicted_label != label) {
    finish(result, tokens, original.predicted_label, oracle.used());
    return result;
  }
  auto priorities = pwws_scores(oracle, tokens, label, original, index, config);
  if (!priorities) {
    finish(result, tokens, original.predicted_label, oracle.used());
    return result;
  }

  std::stable_sort(priorities->begin(), priorities->end(),
                   [](const PwwsCandidate& a, const PwwsCandidate& b) {
                     return a.priority > b.priority;
                   });
  std::vector<std::string> current = tokens;
  ClassifierOutput current_out = original;
  for (const auto& c : *priorities) {
    if (!c.best_flips && !(c.best_drop > 0.0)) continue;
    current[c.position] = c.best_synonym;
    result.substitutions.push_back({c.position, tokens[c.position], c.best_synonym});
    // The first commit was already scored during the priority pass.
    auto out = result.substitutions.size() == 1 ? std::optional(c.best_output) : oracle.query(current);
    if (!out) {
      // Not evaluated; roll the substitution back.
      current[c.position] = tokens[c.position];
      result.substitutions.pop_back();
      break;
    }
    current_out = std::move(*out);
    if (current_out.predicted_label != label) break;
  }
  finish(result, current, current_out.predicted_label, oracle.used());
  return result;
}

AttackResult pso_attack(const TextClassifier& model, const AttackExample& example,
                        const SynonymIndex& index, const AttackConfig& config) {
  config.validate();
  const auto tokens = tokenize(example.text);
  AttackResult result = start_result(tokens, example);
  const int label = example.label;
  QueryOracle oracle(model, config.query_budget);

  auto original = oracle.query(tokens);
  result.original_prediction = original->predicted_label;
  if (original->predicted_label != label) {
    finish(result, tokens, original->predicted_label, oracle.used());
    return result;
  }

  std::vector<std::size_t> positions;
  std::vector<std::span<const Synonym>> choices;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto candidates = candidates_for(index, tokens[i], config);
    if (candidates.empty()) continue;
    positions.push_back(i);
    choices.push_back(candidates);
  }
  if (positions.empty()) {
    finish(result, tokens, original->predicted_label, oracle.used());
    return result;
  }

  using Particle = std::vector<std::uint16_t>;  // 0 keeps the original word
  struct Scored {
    double fitness;
    int prediction;
  };
  std::map<Particle, Scored> seen;
  seen.emplace(Particle(positions.size(), 0), Scored{1.0 - prob(*original, label), label});

  auto materialize = [&](const Particle& p) {
    std::vector<std::string> out = tokens;
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (p[j] != 0) out[positions[j]] = choices[j][p[j] - 1].word;
    }
    return out;
  };
  auto evaluate = [&](const Particle& p) -> std::optional<Scored> {
    if (auto it = seen.find(p); it != seen.end()) return it->second;
    auto out = oracle.query(materialize(p));
    if (!out) return std::nullopt;
    const Scored s{1.0 - prob(*out, label), out->predicted_label};
    seen.emplace(p, s);
    return s;
  };

  Generator gen(config.seed ^ static_cast<std::uint64_t>(example.index));
  auto mutate = [&](Particle& p) {
    const std::size_t j = uniform_index(gen, positions.size());
    p[j] = static_cast<std::uint16_t>(1 + uniform_index(gen, choices[j].size()));
  };

  std::vector<Particle> swarm;
  std::vector<Particle> personal_best;
  std::vector<double> personal_fitness;
  Particle global_best;
  double global_fitness = -1.0;
  std::optional<Particle> winner;

  auto consider = [&](std::size_t i, const Particle& p, const Scored& s) {
    if (s.prediction != label && !winner) winner = p;
    if (i >= personal_best.size()) {
      personal_best.push_back(p);
      personal_fitness.push_back(s.fitness);
    } else if (s.fitness > personal_fitness[i]) {
      personal_best[i] = p;
      personal_fitness[i] = s.fitness;
    }
    if (s.fitness > global_fitness) {
      global_best = p;
      global_fitness = s.fitness;
    }
  };

  bool exhausted = false;
  for (std::size_t i = 0; i < config.pso_population && !winner; ++i) {
    Particle p(positions.size(), 0);
    mutate(p);
    auto s = evaluate(p);
    if (!s) {
      exhausted = true;
      break;
    }
    swarm.push_back(p);
    consider(i, p, *s);
  }

  for (std::size_t t = 0; t < config.pso_iterations && !winner && !exhausted; ++t) {
    const double omega =
        config.pso_iterations > 1
            ? kPsoOmegaStart - (kPsoOmegaStart - kPsoOmegaEnd) * static_cast<double>(t) /
                                   static_cast<double>(config.pso_iterations - 1)
            : kPsoOmegaStart;
    for (std::size_t i = 0; i < swarm.size() && !winner; ++i) {
      Particle& p = swarm[i];
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (bernoulli(gen, omega)) p[j] = personal_best[i][j];
        if (bernoulli(gen, omega)) p[j] = global_best[j];
      }
      if (bernoulli(gen, config.pso_mutation_prob)) mutate(p);
      auto s = evaluate(p);
      if (!s) {
        exhausted = true;
        break;
      }
      consider(i, p, *s);
    }
  }

  if (swarm.empty()) {
    finish(result, tokens, original->predicted_label, oracle.used());
    return result;
  }
  const Particle& chosen = winner ? *winner : global_best;
  for (std::size_t j = 0; j < chosen.size(); ++j) {
    if (chosen[j] == 0) continue;
    result.substitutions.push_back(
        {positions[j], tokens[positions[j]], choices[j][chosen[j] - 1].word});
  }
  finish(result, materialize(chosen), seen.at(chosen).prediction, oracle.used());
  return result;
}

AttackResult run_attack(const TextClassifier& model, const AttackExample& example,
                        const SynonymIndex& index, const AttackConfig& config) {
  switch (config.kind) {
    case AttackKind::kTextFooler: return textfooler_attack(model, example, index, config);
    case AttackKind::kPwws: return pwws_attack(model, example, index, config);
    case AttackKind::kPso: return pso_attack(model, example, index, config);
  }
  throw ContractViolation("unknown attack kind");
}

bool verify_result(const TextClassifier& model, const SynonymIndex& index,
                   const AttackResult& result) {
  const auto original = tokenize(result.original_text);
  const auto perturbed = tokenize(result.perturbed_text);
  if (original.size() != perturbed.size()) return false;
  if (result.words_changed != result.substitutions.size()) return false;

  if (model.classify(original).predicted_label != result.original_prediction) return false;
  if (model.classify(perturbed).predicted_label != result.final_prediction) return false;

  const bool clean_correct = result.original_prediction == result.original_label;
  if ((result.status == AttackStatus::kSkipped) != !clean_correct) return false;
  if (result.status == AttackStatus::kSkipped) {
    return original == perturbed && result.substitutions.empty() &&
           result.final_prediction == result.original_prediction;
  }
  const bool flipped = result.final_prediction != result.original_label;
  if ((result.status == AttackStatus::kSuccess) != flipped) return false;

  std::set<std::size_t> changed;
  for (const auto& s : result.substitutions) {
    if (s.position >= original.size() || !changed.insert(s.position).second) return false;
    if (original[s.position] != s.original || perturbed[s.position] != s.replacement) return false;
    if (s.original == s.replacement || !is_word_token(s.original)) return false;
    if (!index.contains_synonym(s.original, s.replacement)) return false;
  }
  for (std::size_t i = 0; i < original.size(); ++i) {
    if (!changed.contains(i) && original[i] != perturbed[i]) return false;
  }
  return true;
}

}  // namespace qrobust
