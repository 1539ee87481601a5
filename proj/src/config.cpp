// SPDX-License-Identifier: Apache-2.0
#include "qrobust/config.hpp"

#include <charconv>
#include <functional>

#include "qrobust/binary_io.hpp"
#include "qrobust/errors.hpp"

namespace qrobust {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ParseError("config key " + std::string(key) + ": bad number '" + std::string(value) + "'",
                     0);
  }
  return out;
}

// Shortest form that parses back to the same value.
template <typename T>
std::string fmt(T v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string quoted(const std::filesystem::path& p) { return '"' + p.generic_string() + '"'; }

}  // namespace

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> out;
  std::string section;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find('\n', start), text.size());
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;

    // Strip a comment that is not inside quotes.
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_quotes = !in_quotes;
      if (line[i] == '#' && !in_quotes) {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw ParseError("malformed section header", line_no);
      section = std::string(trim(line.substr(1, line.size() - 2))) + ".";
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key = value", line_no);
    const std::string key = section + std::string(trim(line.substr(0, eq)));
    std::string_view value = trim(line.substr(eq + 1));
    if (key.empty() || key.back() == '.') throw ParseError("empty key", line_no);
    if (!value.empty() && value.front() == '"') {
      if (value.size() < 2 || value.back() != '"') throw ParseError("unterminated string", line_no);
      value = value.substr(1, value.size() - 2);
    }
    if (!out.emplace(key, std::string(value)).second) {
      throw ParseError("duplicate key " + key, line_no);
    }
    if (end == text.size()) break;
  }
  return out;
}

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  auto path = [&](std::filesystem::path& dst) {
    return [&dst, &base_dir](std::string_view v) {
      std::filesystem::path p(v);
      dst = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    };
  };
  auto size = [](std::size_t& dst) {
    return [&dst](std::string_view v) { dst = parse_number<std::size_t>("", v); };
  };
  auto u32 = [](std::uint32_t& dst) {
    return [&dst](std::string_view v) { dst = parse_number<std::uint32_t>("", v); };
  };
  auto real = [](double& dst) {
    return [&dst](std::string_view v) { dst = parse_number<double>("", v); };
  };
  auto real32 = [](float& dst) {
    return [&dst](std::string_view v) { dst = parse_number<float>("", v); };
  };

  const std::map<std::string, std::function<void(std::string_view)>, std::less<>> handlers = {
      {"seed", [&](std::string_view v) { c.seed = parse_number<std::uint64_t>("seed", v); }},
      {"data.name", [&](std::string_view v) { c.dataset = std::string(v); }},
      {"data.train", path(c.train_path)},
      {"data.dev", path(c.dev_path)},
      {"data.test", path(c.test_path)},
      {"data.lexicon", path(c.lexicon_path)},
      {"data.num_classes", size(c.num_classes)},
      {"synonyms.k", size(c.synonyms_k)},
      {"synonyms.min_cos", real(c.synonyms_min_cos)},
      {"model.max_seq_len", u32(c.max_seq_len)},
      {"model.embed_dim", u32(c.embed_dim)},
      {"model.num_layers", u32(c.num_layers)},
      {"model.num_heads", u32(c.num_heads)},
      {"model.ffn_dim", u32(c.ffn_dim)},
      {"model.dropout", real32(c.dropout)},
      {"train.epochs", size(c.train.epochs)},
      {"train.learning_rate", real32(c.train.learning_rate)},
      {"train.batch_size", size(c.train.batch_size)},
      {"attack.kind", [&](std::string_view v) { c.attack = parse_attack_kind(v); }},
      {"attack.mode", [&](std::string_view v) { c.mode = parse_eval_mode(v); }},
      {"attack.max_candidates", size(c.max_candidates)},
      {"attack.query_budget", size(c.query_budget)},
      {"attack.pso_population", size(c.pso_population)},
      {"attack.pso_iterations", size(c.pso_iterations)},
      {"attack.pso_mutation_prob", real(c.pso_mutation_prob)},
      {"eval.samples", size(c.eval_samples)},
      {"advtrain.fraction", real(c.adv_fraction)},
  };

  for (const auto& [key, value] : parse_key_values(text)) {
    const auto it = handlers.find(key);
    if (it == handlers.end()) throw ParseError("unknown config key " + key, 0);
    try {
      it->second(value);
    } catch (const ParseError&) {
      throw ParseError("config key " + key + ": bad value '" + value + "'", 0);
    } catch (const ContractViolation& e) {
      throw ParseError("config key " + key + ": " + e.what(), 0);
    }
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path), path.parent_path());
}

std::string format_config(const ExperimentConfig& c) {
  std::string out;
  auto line = [&](std::string_view key, const std::string& value) {
    out.append(key).append(" = ").append(value).push_back('\n');
  };
  line("seed", std::to_string(c.seed));
  out += "\n[data]\n";
  line("name", '"' + c.dataset + '"');
  line("train", quoted(c.train_path));
  line("dev", quoted(c.dev_path));
  line("test", quoted(c.test_path));
  line("lexicon", quoted(c.lexicon_path));
  line("num_classes", std::to_string(c.num_classes));
  out += "\n[synonyms]\n";
  line("k", std::to_string(c.synonyms_k));
  line("min_cos", fmt(c.synonyms_min_cos));
  out += "\n[model]\n";
  line("max_seq_len", std::to_string(c.max_seq_len));
  line("embed_dim", std::to_string(c.embed_dim));
  line("num_layers", std::to_string(c.num_layers));
  line("num_heads", std::to_string(c.num_heads));
  line("ffn_dim", std::to_string(c.ffn_dim));
  line("dropout", fmt(c.dropout));
  out += "\n[train]\n";
  line("epochs", std::to_string(c.train.epochs));
  line("learning_rate", fmt(c.train.learning_rate));
  line("batch_size", std::to_string(c.train.batch_size));
  out += "\n[attack]\n";
  line("kind", std::string(to_string(c.attack)));
  line("mode", std::string(to_string(c.mode)));
  line("max_candidates", std::to_string(c.max_candidates));
  line("query_budget", std::to_string(c.query_budget));
  line("pso_population", std::to_string(c.pso_population));
  line("pso_iterations", std::to_string(c.pso_iterations));
  line("pso_mutation_prob", fmt(c.pso_mutation_prob));
  out += "\n[eval]\n";
  line("samples", std::to_string(c.eval_samples));
  out += "\n[advtrain]\n";
  line("fraction", fmt(c.adv_fraction));
  return out;
}

}  // namespace qrobust
