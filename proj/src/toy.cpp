// SPDX-License-Identifier: Apache-2.0
#include "qrobust/toy.hpp"

#include <array>
#include <charconv>
#include <vector>

#include "qrobust/errors.hpp"
#include "qrobust/random.hpp"

namespace qrobust::toy {

namespace {

using Words = std::vector<std::string_view>;

struct SentimentCluster {
  std::array<std::string_view, 2> strong;
  std::array<std::string_view, 2> lukewarm;
};

constexpr std::array<SentimentCluster, 6> kPositive = {{
    {{"good", "great"}, {"fine", "decent"}},
    {{"excellent", "superb"}, {"solid", "adequate"}},
    {{"wonderful", "delightful"}, {"pleasant", "nice"}},
    {{"brilliant", "masterful"}, {"clever", "competent"}},
    {{"beautiful", "stunning"}, {"pretty", "tidy"}},
    {{"fun", "enjoyable"}, {"watchable", "passable"}},
}};

constexpr std::array<SentimentCluster, 6> kNegative = {{
    {{"bad", "awful"}, {"rough", "uneven"}},
    {{"terrible", "horrible"}, {"messy", "clumsy"}},
    {{"boring", "dull"}, {"slow", "quiet"}},
    {{"stupid", "pointless"}, {"odd", "strange"}},
    {{"ugly", "hideous"}, {"plain", "simple"}},
    {{"weak", "lame"}, {"modest", "soft"}},
}};

const std::vector<Words>& noun_clusters() {
  static const std::vector<Words> k = {
      {"movie", "film", "picture", "flick"},
      {"story", "plot", "narrative", "tale"},
      {"acting", "performances", "cast", "actors"},
      {"director", "filmmaker", "auteur"},
      {"ending", "finale", "conclusion"},
      {"script", "screenplay", "dialogue", "writing"},
      {"music", "score", "soundtrack"},
      {"scenes", "sequences", "moments"},
      {"characters", "roles", "figures"},
      {"effects", "visuals", "graphics"},
      {"pacing", "rhythm", "tempo"},
      {"camera", "cinematography", "photography"},
      {"costumes", "sets", "design"},
      {"actor", "actress", "lead", "star"},
      {"sequel", "remake", "reboot"},
      {"humor", "comedy", "jokes"},
      {"drama", "tension", "suspense"},
      {"theme", "message", "idea"},
  };
  return k;
}

const std::vector<Words>& other_clusters() {
  static const std::vector<Words> k = {
      {"was", "felt", "seemed"},
      {"is", "feels", "seems"},
      {"really", "truly", "very", "quite"},
      {"completely", "totally", "utterly"},
      {"watched", "saw", "viewed"},
      {"today", "yesterday", "tonight"},
      {"audience", "viewers", "crowd"},
      {"theater", "cinema"},
      {"friends", "family", "kids"},
      {"weekend", "evening", "night"},
      {"overall", "ultimately", "altogether"},
      {"book", "novel", "source"},
      {"year", "season", "decade"},
  };
  return k;
}

const Words& singletons() {
  static const Words k = {"the", "a", "this", "and", "but", "i", "it", "with", "of", "to",
                          "my", "at", "in", "for", "although", "still", "also", "just",
                          "its", "from", "by", "as", "that", "so", "we", "after"};
  return k;
}

template <typename T>
const T& pick(Generator& gen, const std::vector<T>& items) {
  return items[uniform_index(gen, items.size())];
}

std::string_view pick_word(Generator& gen, const std::vector<Words>& clusters) {
  return pick(gen, pick(gen, clusters));
}

std::string_view strong_word(Generator& gen, int polarity) {
  const auto& clusters = polarity ? kPositive : kNegative;
  return clusters[uniform_index(gen, clusters.size())].strong[uniform_index(gen, 2)];
}

std::string_view lukewarm_word(Generator& gen, int label, double bias) {
  const int source = bernoulli(gen, bias) ? 1 - label : label;
  const auto& clusters = source ? kPositive : kNegative;
  return clusters[uniform_index(gen, clusters.size())].lukewarm[uniform_index(gen, 2)];
}

std::string sentence(Generator& gen, int label, const CorpusOptions& options) {
  static const std::vector<Words> verb = {other_clusters()[0], other_clusters()[1]};
  static const std::vector<Words> intensifier = {other_clusters()[2], other_clusters()[3]};
  static const std::vector<Words> watched = {other_clusters()[4]};
  static const std::vector<Words> when = {other_clusters()[5], other_clusters()[9]};
  static const std::vector<Words> opener = {other_clusters()[10]};
  const auto& nouns = noun_clusters();

  std::vector<std::string_view> w;
  auto clause = [&](std::string_view adjective) {
    w.push_back("the");
    w.push_back(pick_word(gen, nouns));
    w.push_back(pick_word(gen, verb));
    if (bernoulli(gen, 0.4)) w.push_back(pick_word(gen, intensifier));
    w.push_back(adjective);
  };

  switch (uniform_index(gen, 4)) {
    case 0:
      clause(strong_word(gen, label));
      break;
    case 1:
      clause(strong_word(gen, label));
      w.push_back("and");
      clause(strong_word(gen, label));
      break;
    case 2:
      w.insert(w.end(), {"i", pick_word(gen, watched), "this", pick_word(gen, nouns),
                         pick_word(gen, when), "and", "it", pick_word(gen, verb)});
      if (bernoulli(gen, 0.4)) w.push_back(pick_word(gen, intensifier));
      w.push_back(strong_word(gen, label));
      break;
    default:
      w.push_back(pick_word(gen, opener));
      clause(strong_word(gen, label));
      break;
  }
  if (bernoulli(gen, options.lukewarm_clause_prob)) {
    w.push_back("but");
    clause(lukewarm_word(gen, label, options.lukewarm_bias));
  }
  const double end = uniform01(gen);
  if (end < 0.5) {
    w.push_back(".");
  } else if (end < 0.6) {
    w.push_back("!");
  }

  std::string text;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const bool punct = w[i] == "." || w[i] == "!";
    if (i && !punct) text.push_back(' ');
    text += w[i];
  }
  return text;
}

}  // namespace

Dataset make_split(std::size_t size, const CorpusOptions& options, std::string name, Split split,
                   std::uint64_t stream) {
  Dataset ds;
  ds.name = std::move(name);
  ds.split = split;
  ds.num_classes = 2;
  Generator gen(derive_seed(options.seed ^ stream, "toy-corpus"));
  ds.examples.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    const int label = static_cast<int>(i % 2 == 0 ? uniform_index(gen, 2) : 1 - ds.examples.back().label);
    ds.examples.push_back({sentence(gen, label, options), label});
  }
  return ds;
}

Corpus make_corpus(const CorpusOptions& options) {
  return {make_split(options.train_size, options, "toy", Split::kTrain, 1),
          make_split(options.dev_size, options, "toy", Split::kDev, 2),
          make_split(options.test_size, options, "toy", Split::kTest, 3)};
}

std::span<const std::string_view> strong_words(int polarity) {
  static const auto collect = [](const auto& clusters, bool strong) {
    std::vector<std::string_view> out;
    for (const auto& c : clusters) {
      const auto& pair = strong ? c.strong : c.lukewarm;
      out.insert(out.end(), pair.begin(), pair.end());
    }
    return out;
  };
  static const std::vector<std::string_view> pos = collect(kPositive, true);
  static const std::vector<std::string_view> neg = collect(kNegative, true);
  return polarity ? pos : neg;
}

std::span<const std::string_view> lukewarm_words(int polarity) {
  static const auto collect = [](const auto& clusters) {
    std::vector<std::string_view> out;
    for (const auto& c : clusters) out.insert(out.end(), c.lukewarm.begin(), c.lukewarm.end());
    return out;
  };
  static const std::vector<std::string_view> pos = collect(kPositive);
  static const std::vector<std::string_view> neg = collect(kNegative);
  return polarity ? pos : neg;
}

int keyword_label(std::string_view text) {
  int score = 0;
  for (const auto& token : tokenize(text)) {
    for (int polarity : {0, 1}) {
      for (auto w : strong_words(polarity)) {
        if (token == w) score += polarity ? 1 : -1;
      }
    }
  }
  return score > 0 ? 1 : score < 0 ? 0 : -1;
}

EmbeddingStore make_lexicon() {
  std::vector<Words> groups;
  for (const auto* clusters : {&kPositive, &kNegative}) {
    for (const auto& c : *clusters) {
      groups.push_back({c.strong[0], c.strong[1], c.lukewarm[0], c.lukewarm[1]});
    }
  }
  for (const auto& c : noun_clusters()) groups.push_back(c);
  for (const auto& c : other_clusters()) groups.push_back(c);
  for (auto w : singletons()) groups.push_back({w});

  const std::size_t dim = groups.size();
  constexpr double kSpread = 0.07;
  Generator gen(derive_seed(20240917, "toy-lexicon"));
  std::vector<std::pair<std::string, std::vector<float>>> entries;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (auto word : groups[g]) {
      std::vector<float> v(dim);
      for (auto& x : v) x = static_cast<float>(kSpread * normal01(gen));
      v[g] += 1.0f;
      entries.emplace_back(std::string(word), std::move(v));
    }
  }
  return EmbeddingStore(dim, entries);
}

std::string format_embeddings(const EmbeddingStore& store) {
  std::string out;
  char buf[32];
  for (const auto& word : store.words()) {
    out += word;
    for (float v : store.vector(word)) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out.push_back(' ');
      out.append(buf, ptr);
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace qrobust::toy
