// SPDX-License-Identifier: Apache-2.0
#include "qrobust/harness.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "qrobust/errors.hpp"
#include "qrobust/lexicon.hpp"

namespace qrobust {

using Json = nlohmann::ordered_json;

namespace {

constexpr double kIdentityTolerance = 1e-9;

void check_block(const AttackBlock& b, double clean, const std::string& where) {
  const double expected = clean * (1.0 - b.attack_success_rate);
  if (std::abs(b.after_attack_accuracy - expected) > kIdentityTolerance) {
    throw ContractViolation(where + ": after-attack accuracy " +
                            std::to_string(b.after_attack_accuracy) + " != clean*(1-success) " +
                            std::to_string(expected));
  }
  if (b.after_attack_accuracy > clean + kIdentityTolerance) {
    throw ContractViolation(where + ": after-attack accuracy exceeds clean accuracy");
  }
}

std::vector<AttackResult> attack_all(const TextClassifier& model, const Dataset& dataset,
                                     const SynonymIndex& index, const AttackConfig& config,
                                     std::size_t n) {
  std::vector<AttackResult> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Example& ex = dataset.examples[i];
    out.push_back(run_attack(model, {ex.text, ex.label, i}, index, config));
  }
  return out;
}

Json settings_json(const AttackConfig& c) {
  return Json{{"max_candidates_per_word", c.max_candidates_per_word},
              {"query_budget", c.query_budget},
              {"pso_population", c.pso_population},
              {"pso_iterations", c.pso_iterations},
              {"pso_mutation_prob", c.pso_mutation_prob},
              {"seed", c.seed}};
}

AttackConfig settings_from_json(const Json& j) {
  AttackConfig c;
  c.max_candidates_per_word = j.at("max_candidates_per_word").get<std::size_t>();
  c.query_budget = j.at("query_budget").get<std::size_t>();
  c.pso_population = j.at("pso_population").get<std::size_t>();
  c.pso_iterations = j.at("pso_iterations").get<std::size_t>();
  c.pso_mutation_prob = j.at("pso_mutation_prob").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

Json result_json(const AttackResult& r) {
  Json subs = Json::array();
  for (const auto& s : r.substitutions) {
    subs.push_back({{"position", s.position}, {"original", s.original}, {"replacement", s.replacement}});
  }
  return Json{{"original_text", r.original_text},
              {"perturbed_text", r.perturbed_text},
              {"original_label", r.original_label},
              {"original_prediction", r.original_prediction},
              {"final_prediction", r.final_prediction},
              {"status", to_string(r.status)},
              {"words_changed", r.words_changed},
              {"queries_used", r.queries_used},
              {"substitutions", std::move(subs)}};
}

AttackResult result_from(const Json& j) {
  AttackResult r;
  r.original_text = j.at("original_text").get<std::string>();
  r.perturbed_text = j.at("perturbed_text").get<std::string>();
  r.original_label = j.at("original_label").get<int>();
  r.original_prediction = j.at("original_prediction").get<int>();
  r.final_prediction = j.at("final_prediction").get<int>();
  r.status = parse_attack_status(j.at("status").get<std::string>());
  r.words_changed = j.at("words_changed").get<std::size_t>();
  r.queries_used = j.at("queries_used").get<std::size_t>();
  for (const auto& s : j.at("substitutions")) {
    r.substitutions.push_back({s.at("position").get<std::size_t>(),
                               s.at("original").get<std::string>(),
                               s.at("replacement").get<std::string>()});
  }
  return r;
}

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), 0);
  }
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string signed_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.*f", decimals, v);
  return buf;
}

std::string raw(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

double evaluate_clean(const TextClassifier& model, const Dataset& dataset, std::size_t n,
                      std::string* warning) {
  if (n > dataset.size()) {
    throw ContractViolation("sample count " + std::to_string(n) + " exceeds dataset size " +
                            std::to_string(dataset.size()));
  }
  if (n == 0) {
    if (warning) *warning = "empty evaluation: n = 0, accuracy reported as 0";
    return 0.0;
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Example& ex = dataset.examples[i];
    if (model.classify(tokenize(ex.text)).predicted_label == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

std::string_view to_string(EvalMode mode) noexcept {
  return mode == EvalMode::kTransfer ? "transfer" : "adaptive";
}

EvalMode parse_eval_mode(std::string_view name) {
  if (name == "transfer") return EvalMode::kTransfer;
  if (name == "adaptive") return EvalMode::kAdaptive;
  throw ContractViolation("unknown mode '" + std::string(name) + "', expected transfer|adaptive");
}

AttackBlock summarize(std::span<const AttackResult> results, std::size_t n, AttackKind kind,
                      EvalMode mode) {
  if (results.size() != n) {
    throw ContractViolation("summarize: " + std::to_string(results.size()) + " results for n = " +
                            std::to_string(n));
  }
  AttackBlock b{.attack_kind = kind, .mode = mode};
  std::size_t words = 0, queries = 0;
  for (const auto& r : results) {
    switch (r.status) {
      case AttackStatus::kSkipped:
        ++b.skipped;
        continue;
      case AttackStatus::kSuccess:
        ++b.succeeded;
        words += r.words_changed;
        break;
      case AttackStatus::kFailed:
        break;
    }
    ++b.correct;
    queries += r.queries_used;
  }
  if (n == 0) return b;
  const double dn = static_cast<double>(n);
  b.after_attack_accuracy = static_cast<double>(b.correct - b.succeeded) / dn;
  b.attack_success_rate =
      b.correct ? static_cast<double>(b.succeeded) / static_cast<double>(b.correct) : 0.0;
  b.skip_rate = static_cast<double>(b.skipped) / dn;
  b.mean_words_changed =
      b.succeeded ? static_cast<double>(words) / static_cast<double>(b.succeeded) : 0.0;
  b.mean_queries = b.correct ? static_cast<double>(queries) / static_cast<double>(b.correct) : 0.0;
  check_block(b, static_cast<double>(b.correct) / dn, std::string(to_string(kind)));
  return b;
}

std::vector<AttackResult> transfer_results(const TextClassifier& target,
                                           std::span<const AttackResult> generated) {
  std::vector<AttackResult> out;
  out.reserve(generated.size());
  for (const AttackResult& g : generated) {
    AttackResult r;
    r.original_text = g.original_text;
    r.original_label = g.original_label;
    r.original_prediction = target.classify(tokenize(g.original_text)).predicted_label;
    if (r.original_prediction != r.original_label) {
      r.perturbed_text = g.original_text;
      r.final_prediction = r.original_prediction;
      r.status = AttackStatus::kSkipped;
      out.push_back(std::move(r));
      continue;
    }
    r.perturbed_text = g.perturbed_text;
    r.substitutions = g.substitutions;
    r.words_changed = g.words_changed;
    r.queries_used = g.queries_used;
    r.final_prediction = r.perturbed_text == r.original_text
                             ? r.original_prediction
                             : target.classify(tokenize(r.perturbed_text)).predicted_label;
    r.status = r.final_prediction != r.original_label ? AttackStatus::kSuccess
                                                      : AttackStatus::kFailed;
    out.push_back(std::move(r));
  }
  return out;
}

EvaluationReport evaluate_under_attack(const std::vector<ScoredModel>& models,
                                       const Dataset& dataset, const SynonymIndex& index,
                                       const AttackConfig& attack_config,
                                       const std::vector<AttackKind>& kinds, EvalMode mode,
                                       std::size_t n) {
  attack_config.validate();
  if (models.empty()) throw ContractViolation("evaluate_under_attack: no models");
  EvaluationReport report{.dataset = dataset.name, .sample_count = n,
                          .attack_config = attack_config};
  for (const auto& m : models) {
    if (!m.classifier) throw ContractViolation("model " + m.id + " has no classifier");
    std::string warning;
    ModelReport mr{.model_id = m.id, .defense = m.defense, .checkpoint_bytes = m.checkpoint_bytes};
    mr.clean_accuracy = evaluate_clean(*m.classifier, dataset, n, &warning);
    if (!warning.empty()) report.warnings.push_back(m.id + ": " + warning);
    report.models.push_back(std::move(mr));
  }
  for (AttackKind kind : kinds) {
    AttackConfig config = attack_config;
    config.kind = kind;
    std::vector<AttackResult> generated;
    if (mode == EvalMode::kTransfer) {
      generated = attack_all(*models[0].classifier, dataset, index, config, n);
    }
    for (std::size_t m = 0; m < models.size(); ++m) {
      std::vector<AttackResult> results;
      if (mode == EvalMode::kAdaptive) {
        results = attack_all(*models[m].classifier, dataset, index, config, n);
      } else if (m == 0) {
        results = generated;
      } else {
        results = transfer_results(*models[m].classifier, generated);
      }
      ModelReport& mr = report.models[m];
      mr.attacks.push_back(summarize(results, n, kind, mode));
      mr.results.push_back(std::move(results));
    }
  }
  check_report(report);
  return report;
}

EvaluationReport evaluate_under_attack(const TextClassifier& float_model,
                                       const TextClassifier& quantized_model,
                                       const Dataset& dataset, const SynonymIndex& index,
                                       const AttackConfig& attack_config, EvalMode mode,
                                       std::size_t n) {
  return evaluate_under_attack({{"float", "none", &float_model, 0},
                                {"quantized", "quantization", &quantized_model, 0}},
                               dataset, index, attack_config, {attack_config.kind}, mode, n);
}

void check_report(const EvaluationReport& report) {
  for (const auto& m : report.models) {
    for (const auto& b : m.attacks) {
      check_block(b, m.clean_accuracy, m.model_id + "/" + std::string(to_string(b.attack_kind)));
    }
  }
}

std::string report_to_json(const EvaluationReport& report) {
  Json models = Json::array();
  for (const auto& m : report.models) {
    Json attacks = Json::array();
    for (const auto& b : m.attacks) {
      attacks.push_back({{"attack_kind", to_string(b.attack_kind)},
                         {"mode", to_string(b.mode)},
                         {"after_attack_accuracy", b.after_attack_accuracy},
                         {"attack_success_rate", b.attack_success_rate},
                         {"skip_rate", b.skip_rate},
                         {"mean_words_changed", b.mean_words_changed},
                         {"mean_queries", b.mean_queries},
                         {"correct", b.correct},
                         {"succeeded", b.succeeded},
                         {"skipped", b.skipped}});
    }
    models.push_back({{"model_id", m.model_id},
                      {"defense", m.defense},
                      {"checkpoint_bytes", m.checkpoint_bytes},
                      {"clean_accuracy", m.clean_accuracy},
                      {"attacks", std::move(attacks)}});
  }
  const Json j{{"dataset", report.dataset},
               {"sample_count", report.sample_count},
               {"skipped_in_denominator", report.skipped_in_denominator},
               {"attack_settings", settings_json(report.attack_config)},
               {"models", std::move(models)},
               {"warnings", report.warnings}};
  return j.dump(2) + "\n";
}

EvaluationReport report_from_json(std::string_view text) {
  const Json j = parse_json(text);
  try {
    EvaluationReport r;
    r.dataset = j.at("dataset").get<std::string>();
    r.sample_count = j.at("sample_count").get<std::size_t>();
    r.skipped_in_denominator = j.at("skipped_in_denominator").get<bool>();
    r.attack_config = settings_from_json(j.at("attack_settings"));
    for (const auto& jm : j.at("models")) {
      ModelReport m;
      m.model_id = jm.at("model_id").get<std::string>();
      m.defense = jm.at("defense").get<std::string>();
      m.checkpoint_bytes = jm.at("checkpoint_bytes").get<std::uintmax_t>();
      m.clean_accuracy = jm.at("clean_accuracy").get<double>();
      for (const auto& jb : jm.at("attacks")) {
        AttackBlock b;
        b.attack_kind = parse_attack_kind(jb.at("attack_kind").get<std::string>());
        b.mode = parse_eval_mode(jb.at("mode").get<std::string>());
        b.after_attack_accuracy = jb.at("after_attack_accuracy").get<double>();
        b.attack_success_rate = jb.at("attack_success_rate").get<double>();
        b.skip_rate = jb.at("skip_rate").get<double>();
        b.mean_words_changed = jb.at("mean_words_changed").get<double>();
        b.mean_queries = jb.at("mean_queries").get<double>();
        b.correct = jb.at("correct").get<std::size_t>();
        b.succeeded = jb.at("succeeded").get<std::size_t>();
        b.skipped = jb.at("skipped").get<std::size_t>();
        m.attacks.push_back(b);
      }
      r.models.push_back(std::move(m));
    }
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    return r;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed report: ") + e.what(), 0);
  }
}

std::string attack_result_to_json(const AttackResult& result) { return result_json(result).dump(); }

AttackResult attack_result_from_json(std::string_view text) {
  const Json j = parse_json(text);
  try {
    return result_from(j.contains("result") ? j.at("result") : j);
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed attack result: ") + e.what(), 0);
  }
}

std::string results_to_jsonl(const EvaluationReport& report) {
  std::string out;
  for (const auto& m : report.models) {
    for (std::size_t b = 0; b < m.attacks.size() && b < m.results.size(); ++b) {
      Json config = settings_json(report.attack_config);
      config["kind"] = to_string(m.attacks[b].attack_kind);
      for (std::size_t i = 0; i < m.results[b].size(); ++i) {
        const Json line{{"dataset", report.dataset},
                        {"example_id", i},
                        {"attack_kind", to_string(m.attacks[b].attack_kind)},
                        {"mode", to_string(m.attacks[b].mode)},
                        {"model_id", m.model_id},
                        {"config", config},
                        {"result", result_json(m.results[b][i])}};
        out += line.dump();
        out += '\n';
      }
    }
  }
  return out;
}

Comparison compare_reports(const std::vector<EvaluationReport>& reports) {
  if (reports.empty()) throw ContractViolation("compare_reports: no reports");
  const EvaluationReport& first = reports.front();
  const Json ref = settings_json(first.attack_config);
  for (std::size_t r = 1; r < reports.size(); ++r) {
    const EvaluationReport& other = reports[r];
    std::vector<std::string> diff;
    const std::string tag = "report " + std::to_string(r) + " ";
    if (other.dataset != first.dataset) {
      diff.push_back(tag + "dataset: " + first.dataset + " != " + other.dataset);
    }
    if (other.sample_count != first.sample_count) {
      diff.push_back(tag + "sample_count: " + std::to_string(first.sample_count) +
                     " != " + std::to_string(other.sample_count));
    }
    if (other.skipped_in_denominator != first.skipped_in_denominator) {
      diff.push_back(tag + "skipped_in_denominator differs");
    }
    const Json cur = settings_json(other.attack_config);
    for (const auto& [key, value] : ref.items()) {
      if (cur.at(key) != value) {
        diff.push_back(tag + "attack." + key + ": " + value.dump() + " != " + cur.at(key).dump());
      }
    }
    if (!diff.empty()) {
      throw ReportMismatch("reports were produced with different settings", std::move(diff));
    }
  }

  Comparison c{.dataset = first.dataset, .sample_count = first.sample_count};
  using Key = std::tuple<std::string, std::string, AttackKind, EvalMode>;
  std::map<std::pair<AttackKind, EvalMode>, std::size_t> baseline;
  std::map<Key, std::size_t> first_row;
  for (std::size_t r = 0; r < reports.size(); ++r) {
    for (const auto& m : reports[r].models) {
      for (const auto& b : m.attacks) {
        ComparisonRow row{.report_index = r,
                          .model_id = m.model_id,
                          .defense = m.defense,
                          .attack_kind = b.attack_kind,
                          .mode = b.mode,
                          .clean_accuracy = m.clean_accuracy,
                          .after_attack_accuracy = b.after_attack_accuracy};
        if (m.defense == "none") baseline.try_emplace({b.attack_kind, b.mode}, c.rows.size());
        const auto [it, fresh] =
            first_row.try_emplace(Key{m.model_id, m.defense, b.attack_kind, b.mode}, c.rows.size());
        if (!fresh) row.delta_vs_first = b.after_attack_accuracy - c.rows[it->second].after_attack_accuracy;
        c.rows.push_back(std::move(row));
      }
    }
  }
  // Baseline byte counts travel with the model, not the block.
  std::vector<std::uintmax_t> bytes;
  for (const auto& report : reports) {
    for (const auto& m : report.models) {
      for (std::size_t b = 0; b < m.attacks.size(); ++b) bytes.push_back(m.checkpoint_bytes);
    }
  }
  for (std::size_t i = 0; i < c.rows.size(); ++i) {
    auto& row = c.rows[i];
    const auto it = baseline.find({row.attack_kind, row.mode});
    if (it == baseline.end()) continue;
    row.delta_vs_baseline = row.after_attack_accuracy - c.rows[it->second].after_attack_accuracy;
    if (bytes[i] && bytes[it->second]) {
      row.size_ratio = static_cast<double>(bytes[i]) / static_cast<double>(bytes[it->second]);
    }
  }
  return c;
}

std::string format_table(const Comparison& c) {
  const std::vector<std::string> header = {"report", "model",   "defense",  "attack", "mode",
                                           "clean%", "after%",  "d_base",   "d_first", "size"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : c.rows) {
    cells.push_back({std::to_string(r.report_index), r.model_id, r.defense,
                     std::string(to_string(r.attack_kind)), std::string(to_string(r.mode)),
                     fixed(100.0 * r.clean_accuracy, 2), fixed(100.0 * r.after_attack_accuracy, 2),
                     r.delta_vs_baseline ? signed_fixed(100.0 * *r.delta_vs_baseline, 2) : "-",
                     r.delta_vs_first ? signed_fixed(100.0 * *r.delta_vs_first, 2) : "-",
                     r.size_ratio ? fixed(*r.size_ratio, 4) : "-"});
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t k = 0; k < header.size(); ++k) {
    width[k] = header[k].size();
    for (const auto& row : cells) width[k] = std::max(width[k], row[k].size());
  }
  std::ostringstream out;
  out << "dataset " << c.dataset << ", n = " << c.sample_count
      << " (accuracies in %, deltas in points)\n";
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      // Text columns left-aligned, numbers right-aligned.
      const bool left = k >= 1 && k <= 4;
      const std::string pad(width[k] - row[k].size(), ' ');
      out << (k ? "  " : "") << (left ? row[k] + pad : pad + row[k]);
    }
    out << '\n';
  };
  emit(header);
  for (const auto& row : cells) emit(row);
  return out.str();
}

std::string format_csv(const Comparison& c) {
  std::string out =
      "dataset,sample_count,report,model,defense,attack,mode,clean_accuracy,after_attack_accuracy,"
      "delta_vs_baseline,delta_vs_first,size_ratio\n";
  for (const auto& r : c.rows) {
    out += c.dataset + ',' + std::to_string(c.sample_count) + ',' +
           std::to_string(r.report_index) + ',' + r.model_id + ',' + r.defense + ',' +
           std::string(to_string(r.attack_kind)) + ',' + std::string(to_string(r.mode)) + ',' +
           raw(r.clean_accuracy) + ',' + raw(r.after_attack_accuracy) + ',' +
           (r.delta_vs_baseline ? raw(*r.delta_vs_baseline) : "") + ',' +
           (r.delta_vs_first ? raw(*r.delta_vs_first) : "") + ',' +
           (r.size_ratio ? raw(*r.size_ratio) : "") + '\n';
  }
  return out;
}

}  // namespace qrobust
