// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "qrobust/errors.hpp"
#include "qrobust/lexicon.hpp"
#include "qrobust/random.hpp"
#include "qrobust/toy.hpp"
#include "support.hpp"

namespace qrobust {
namespace {

using Tokens = std::vector<std::string>;

double norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += double{x} * x;
  return std::sqrt(s);
}

// Brute force over every stored word, sorted by (-cosine, word).
std::vector<Synonym> brute_force_synonyms(const EmbeddingStore& store, std::string_view word,
                                          std::size_t k, double min_cos) {
  std::vector<Synonym> all;
  if (!store.contains(word)) return all;
  for (const std::string& other : store.words()) {
    if (other == word) continue;
    const double c = store.cosine(word, other);
    if (c >= min_cos) all.push_back({other, c});
  }
  std::sort(all.begin(), all.end(), [](const Synonym& a, const Synonym& b) {
    return a.similarity != b.similarity ? a.similarity > b.similarity : a.word < b.word;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

TEST(Tokenize, PeelsTrailingPunctuation) {
  EXPECT_EQ(tokenize("A refreshingly novel ride."), (Tokens{"a", "refreshingly", "novel", "ride", "."}));
}

TEST(Tokenize, EmptyAndWhitespaceOnly) {
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize(" \t\n ").empty());
}

TEST(Tokenize, KeepsInternalApostrophe) {
  EXPECT_EQ(tokenize("don't stop"), (Tokens{"don't", "stop"}));
}

TEST(Tokenize, LeadingPunctuationAndCase) {
  EXPECT_EQ(tokenize("\"Great\" FUN!!"), (Tokens{"\"", "great", "\"", "fun", "!", "!"}));
}

TEST(Tokenize, DetokenizeRoundTripPreservesWords) {
  for (const char* text : {"A refreshingly novel ride.", "(well, it's fine)", "x", "...", ""}) {
    const Tokens t = tokenize(text);
    EXPECT_EQ(tokenize(detokenize(t)), t) << text;
  }
}

TEST(Tokenize, WordTokensOnlyHaveAlphabeticCore) {
  EXPECT_TRUE(is_word_token("don't"));
  EXPECT_TRUE(is_word_token("ride"));
  EXPECT_FALSE(is_word_token("."));
  EXPECT_FALSE(is_word_token("42"));
  EXPECT_FALSE(is_word_token(""));
}

TEST(Vocabulary, ReservedIdsAndBijection) {
  const std::vector<Tokens> lists = {{"b", "a", "."}, {"a", "c"}};
  const Vocabulary v = Vocabulary::build(lists);
  EXPECT_EQ(v.id("<pad>"), Vocabulary::kPad);
  EXPECT_EQ(v.id("<unk>"), Vocabulary::kUnk);
  EXPECT_EQ(v.size(), 6u);
  for (TokenId id = 2; id < static_cast<TokenId>(v.size()); ++id) EXPECT_EQ(v.id(v.word(id)), id);
  EXPECT_EQ(v.id("zzz"), Vocabulary::kUnk);
  EXPECT_FALSE(v.contains("zzz"));
  EXPECT_EQ(v.encode(Tokens{"a", "zzz"}), (std::vector<TokenId>{v.id("a"), Vocabulary::kUnk}));
}

TEST(Vocabulary, SerializeRoundTrip) {
  const Vocabulary v = Vocabulary::from_words({"good", "bad", "fine"});
  const Vocabulary back = Vocabulary::parse(v.serialize());
  ASSERT_EQ(back.size(), v.size());
  for (TokenId id = 0; id < static_cast<TokenId>(v.size()); ++id) EXPECT_EQ(back.word(id), v.word(id));
}

TEST(Vocabulary, DuplicateAndReservedWordsAreSkipped) {
  const Vocabulary v = Vocabulary::from_words({"a", "a", "<unk>", "b"});
  EXPECT_EQ(v.size(), 4u);
  EXPECT_EQ(v.id("a"), 2);
  EXPECT_EQ(v.id("b"), 3);
}

TEST(Embeddings, ThreeLineFileIsNormalized) {
  const EmbeddingStore s = parse_embeddings("a 3 4\nb 0 2\nc -1 -1\n");
  EXPECT_EQ(s.size(), 3u);
  EXPECT_EQ(s.dimension(), 2u);
  for (const std::string& w : s.words()) EXPECT_NEAR(norm(s.vector(w)), 1.0, 1e-5) << w;
  EXPECT_NEAR(s.vector("a")[0], 0.6, 1e-6);
}

TEST(Embeddings, OrthogonalWordsHaveZeroCosine) {
  const EmbeddingStore s = parse_embeddings("cat 1 0\ndog 0 1\n");
  EXPECT_EQ(s.cosine("cat", "dog"), 0.0);
  EXPECT_NEAR(s.cosine("cat", "cat"), 1.0, 1e-12);
  EXPECT_EQ(s.cosine("cat", "absent"), 0.0);
}

TEST(Embeddings, MalformedFloatCitesLine) {
  std::string text;
  for (int i = 1; i <= 6; ++i) text += "w" + std::to_string(i) + " 1 0\n";
  text += "w7 1 zero\n";
  try {
    parse_embeddings(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 7u);
  }
}

TEST(Embeddings, InconsistentDimensionCitesLine) {
  try {
    parse_embeddings("a 1 0\nb 1 0 0\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Embeddings, DuplicateLastWinsAndIsCounted) {
  const EmbeddingStore s = parse_embeddings("a 1 0\nb 0 1\na 0 5\n");
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(s.duplicate_count(), 1u);
  EXPECT_NEAR(s.cosine("a", "b"), 1.0, 1e-12);
}

TEST(Embeddings, LoadFromFile) {
  testing::TempDir dir("lexicon");
  const auto path = dir.path() / "vec.txt";
  std::ofstream(path) << toy::format_embeddings(toy::make_lexicon());
  const EmbeddingStore s = load_embeddings(path);
  EXPECT_EQ(s.content_key(), toy::make_lexicon().content_key());
  EXPECT_THROW(load_embeddings(dir.path() / "missing.txt"), IoError);
}

TEST(NearestSynonyms, AbsentQueryIsEmpty) {
  const EmbeddingStore s = parse_embeddings("a 1 0\n");
  EXPECT_TRUE(nearest_synonyms(s, "zzz", 5, 0.5).empty());
}

TEST(NearestSynonyms, DuplicateVectorOnly) {
  const EmbeddingStore s = parse_embeddings("a 1 0\nb 1 0\nc 0 1\n");
  const auto syn = nearest_synonyms(s, "a", 5, 0.5);
  ASSERT_EQ(syn.size(), 1u);
  EXPECT_EQ(syn[0].word, "b");
  EXPECT_NEAR(syn[0].similarity, 1.0, 1e-12);
}

TEST(NearestSynonyms, TieBreaksLexicographically) {
  const EmbeddingStore s = parse_embeddings("q 1 0\nzeta 1 1\nalpha 1 -1\n");
  const auto syn = nearest_synonyms(s, "q", 1, 0.5);
  ASSERT_EQ(syn.size(), 1u);
  EXPECT_EQ(syn[0].word, "alpha");
}

TEST(NearestSynonyms, PreconditionsAreChecked) {
  const EmbeddingStore s = parse_embeddings("a 1 0\n");
  EXPECT_THROW(nearest_synonyms(s, "a", 0, 0.5), ContractViolation);
  EXPECT_THROW(nearest_synonyms(s, "a", 3, 1.5), ContractViolation);
  EXPECT_THROW(nearest_synonyms(s, "a", 3, -0.1), ContractViolation);
}

TEST(NearestSynonyms, MatchesBruteForceOnRandomStore) {
  Generator gen(41);
  std::vector<std::pair<std::string, std::vector<float>>> entries;
  for (int i = 0; i < 60; ++i) {
    std::vector<float> v(3);
    for (float& x : v) x = static_cast<float>(uniform(gen, -1.0f, 1.0f));
    entries.emplace_back("w" + std::to_string(i), v);
  }
  const EmbeddingStore s(3, entries);
  for (const std::string& w : s.words()) {
    for (std::size_t k : {1u, 4u, 100u}) {
      for (double c : {0.0, 0.5, 0.9}) {
        const auto got = nearest_synonyms(s, w, k, c);
        EXPECT_EQ(got, brute_force_synonyms(s, w, k, c)) << w << " k=" << k << " c=" << c;
        for (const Synonym& syn : got) {
          EXPECT_NE(syn.word, w);
          EXPECT_GE(syn.similarity, c);
        }
      }
    }
  }
}

TEST(BuildIndex, LookupEqualsOnTheFlyForRandomWords) {
  const EmbeddingStore store = toy::make_lexicon();
  const Vocabulary vocab = Vocabulary::from_words(std::vector<std::string>(store.words().begin(), store.words().end()));
  const SynonymIndex index = build_index(store, vocab, 8, 0.5);
  Generator gen(42);
  for (int i = 0; i < 50; ++i) {
    const std::string& w = vocab.words()[uniform_index(gen, vocab.words().size())];
    const auto got = index.lookup(w);
    EXPECT_EQ(std::vector<Synonym>(got.begin(), got.end()), nearest_synonyms(store, w, 8, 0.5)) << w;
  }
}

TEST(BuildIndex, EmptyStoreGivesEmptyLists) {
  const Vocabulary vocab = Vocabulary::from_words({"good", "bad"});
  const SynonymIndex index = build_index(EmbeddingStore{}, vocab, 8, 0.5);
  for (const std::string& w : vocab.words()) EXPECT_TRUE(index.lookup(w).empty());
  EXPECT_TRUE(index.lookup("never-seen").empty());
}

TEST(BuildIndex, UnitThresholdKeepsOnlyDuplicates) {
  const EmbeddingStore store = parse_embeddings("a 1 0\nb 1 0\nc 1 0.01\nd 0 1\n");
  const Vocabulary vocab = Vocabulary::from_words({"a", "b", "c", "d"});
  const SynonymIndex index = build_index(store, vocab, 8, 1.0);
  ASSERT_EQ(index.lookup("a").size(), 1u);
  EXPECT_EQ(index.lookup("a")[0].word, "b");
  EXPECT_TRUE(index.lookup("c").empty());
  EXPECT_TRUE(index.lookup("d").empty());
}

TEST(BuildIndex, ListsAreBoundedAndSorted) {
  const EmbeddingStore store = toy::make_lexicon();
  const Vocabulary vocab = Vocabulary::from_words(std::vector<std::string>(store.words().begin(), store.words().end()));
  const SynonymIndex index = build_index(store, vocab, 3, 0.5);
  for (const std::string& w : vocab.words()) {
    const auto syn = index.lookup(w);
    EXPECT_LE(syn.size(), 3u);
    for (std::size_t i = 0; i < syn.size(); ++i) {
      EXPECT_NE(syn[i].word, w);
      EXPECT_GE(syn[i].similarity, 0.5);
      if (i > 0) {
        EXPECT_GE(syn[i - 1].similarity, syn[i].similarity);
      }
    }
  }
}

TEST(BuildIndex, SerializationIsDeterministicAndRoundTrips) {
  const EmbeddingStore store = toy::make_lexicon();
  const Vocabulary vocab = testing::ToySetup::get().vocab;
  const std::string a = build_index(store, vocab, 8, 0.5).serialize(7);
  const std::string b = build_index(store, vocab, 8, 0.5).serialize(7);
  EXPECT_EQ(a, b);
  std::uint64_t key = 0;
  const SynonymIndex back = SynonymIndex::deserialize(a, &key);
  EXPECT_EQ(key, 7u);
  EXPECT_EQ(back.serialize(7), a);
}

TEST(BuildIndex, CacheIsReusedAndRefreshedWhenStale) {
  testing::TempDir dir("index_cache");
  const auto cache = dir.path() / "index.qgsy";
  const EmbeddingStore store = toy::make_lexicon();
  const Vocabulary& vocab = testing::ToySetup::get().vocab;
  const SynonymIndex first = load_or_build_index(cache, store, vocab, 8, 0.5);
  ASSERT_TRUE(std::filesystem::exists(cache));
  EXPECT_EQ(load_or_build_index(cache, store, vocab, 8, 0.5).serialize(), first.serialize());
  const SynonymIndex narrow = load_or_build_index(cache, store, vocab, 2, 0.5);
  EXPECT_EQ(narrow.k(), 2u);
  EXPECT_EQ(narrow.serialize(), build_index(store, vocab, 2, 0.5).serialize());
}

TEST(ToyLexicon, EveryStrongWordHasASynonym) {
  const SynonymIndex& index = testing::ToySetup::get().index;
  for (int polarity : {0, 1}) {
    for (std::string_view w : toy::strong_words(polarity)) {
      EXPECT_FALSE(index.lookup(w).empty()) << w;
    }
  }
}

}  // namespace
}  // namespace qrobust
