// SPDX-License-Identifier: Apache-2.0
#ifndef QROBUST_LEXICON_HPP_
#define QROBUST_LEXICON_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace qrobust {

using TokenId = std::int32_t;

/// Lowercases, splits on whitespace, and peels leading/trailing punctuation
/// into one-character tokens. Internal punctuation ("don't") is kept.
std::vector<std::string> tokenize(std::string_view text);

/// Joins tokens with single spaces; tokenize(detokenize(t)) == t for any
/// output t of tokenize.
std::string detokenize(std::span<const std::string> tokens);

/// True for tokens with an alphabetic core; only these are attackable.
bool is_word_token(std::string_view token) noexcept;

class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr std::string_view kPadWord = "<pad>";
  static constexpr std::string_view kUnkWord = "<unk>";

  Vocabulary();

  /// Collects every distinct token, assigning ids >= 2 in lexicographic order.
  static Vocabulary build(std::span<const std::vector<std::string>> token_lists);
  static Vocabulary from_words(std::vector<std::string> words);

  TokenId id(std::string_view word) const;
  const std::string& word(TokenId id) const;
  bool contains(std::string_view word) const;
  std::size_t size() const noexcept { return words_.size(); }
  std::vector<TokenId> encode(std::span<const std::string> tokens) const;

  /// Non-reserved words in id order.
  std::span<const std::string> words() const noexcept {
    return std::span<const std::string>(words_).subspan(2);
  }

  /// One word per line, ids implied by line order starting at 2.
  std::string serialize() const;
  static Vocabulary parse(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> ids_;
};

/// Unit-normalized word vectors.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  /// Vectors are normalized; later duplicates replace earlier ones.
  EmbeddingStore(std::size_t dimension,
                 std::span<const std::pair<std::string, std::vector<float>>> entries);

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return words_.size(); }
  std::size_t duplicate_count() const noexcept { return duplicates_; }
  bool contains(std::string_view word) const;
  /// Empty span when absent.
  std::span<const float> vector(std::string_view word) const;
  /// Sorted word list.
  std::span<const std::string> words() const noexcept { return words_; }

  /// Cosine similarity of two stored words; 0 if either is absent.
  double cosine(std::string_view a, std::string_view b) const;

  std::string content_key() const;

 private:
  std::size_t index_of(std::string_view word) const;

  std::size_t dimension_ = 0;
  std::size_t duplicates_ = 0;
  std::vector<std::string> words_;
  std::vector<float> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Parses "word v1 ... vd" lines. Throws ParseError with the line number.
EmbeddingStore parse_embeddings(std::string_view text);
EmbeddingStore load_embeddings(const std::filesystem::path& path);

struct Synonym {
  std::string word;
  double similarity = 0.0;
  friend bool operator==(const Synonym&, const Synonym&) = default;
};

/// Top-k words by cosine (excluding `word` itself) with similarity >= min_cos,
/// ties broken by lexicographic order. Absent word gives an empty list.
std::vector<Synonym> nearest_synonyms(const EmbeddingStore& store, std::string_view word,
                                      std::size_t k, double min_cos);

class SynonymIndex {
 public:
  static constexpr std::size_t kDefaultK = 8;
  static constexpr double kDefaultMinCos = 0.5;

  SynonymIndex() = default;

  std::span<const Synonym> lookup(std::string_view word) const;
  bool contains_synonym(std::string_view word, std::string_view candidate) const;
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t k() const noexcept { return k_; }
  double min_cos() const noexcept { return min_cos_; }

  /// "QGSY" binary form; byte-identical for identical inputs.
  std::string serialize(std::uint64_t key = 0) const;
  static SynonymIndex deserialize(std::string_view bytes, std::uint64_t* key = nullptr);

  friend SynonymIndex build_index(const EmbeddingStore& store, const Vocabulary& vocab,
                                  std::size_t k, double min_cos);

  /// Manual construction, used by tests and small tools.
  void set(std::string word, std::vector<Synonym> synonyms);

 private:
  std::size_t k_ = kDefaultK;
  double min_cos_ = kDefaultMinCos;
  std::map<std::string, std::vector<Synonym>, std::less<>> entries_;
};

/// Precomputes nearest_synonyms for every vocabulary word.
SynonymIndex build_index(const EmbeddingStore& store, const Vocabulary& vocab, std::size_t k,
                         double min_cos);

/// Loads a cached index when its key matches the inputs, otherwise builds
/// and rewrites the cache file.
SynonymIndex load_or_build_index(const std::filesystem::path& cache, const EmbeddingStore& store,
                                 const Vocabulary& vocab, std::size_t k, double min_cos);

}  // namespace qrobust

#endif  // QROBUST_LEXICON_HPP_
