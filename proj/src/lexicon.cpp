// SPDX-License-Identifier: Apache-2.0
#include "qrobust/lexicon.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

#include "qrobust/binary_io.hpp"
#include "qrobust/errors.hpp"
#include "qrobust/random.hpp"

namespace qrobust {

namespace {

bool is_space(unsigned char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_punct(unsigned char c) noexcept { return c < 0x80 && std::ispunct(c); }

char lower(unsigned char c) noexcept {
  return static_cast<char>(c < 0x80 ? std::tolower(c) : c);
}

constexpr char kIndexMagic[4] = {'Q', 'G', 'S', 'Y'};
constexpr std::uint16_t kIndexVersion = 1;

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t end = i;
    while (end < text.size() && !is_space(static_cast<unsigned char>(text[end]))) ++end;
    if (end == i) break;

    std::string_view chunk = text.substr(i, end - i);
    std::size_t lead = 0;
    while (lead < chunk.size() && is_punct(static_cast<unsigned char>(chunk[lead]))) ++lead;
    std::size_t trail = chunk.size();
    while (trail > lead && is_punct(static_cast<unsigned char>(chunk[trail - 1]))) --trail;

    for (std::size_t p = 0; p < lead; ++p) tokens.emplace_back(1, chunk[p]);
    if (trail > lead) {
      std::string core;
      core.reserve(trail - lead);
      for (std::size_t p = lead; p < trail; ++p) core.push_back(lower(static_cast<unsigned char>(chunk[p])));
      tokens.push_back(std::move(core));
    }
    for (std::size_t p = trail; p < chunk.size(); ++p) {
      if (p >= lead) tokens.emplace_back(1, chunk[p]);
    }
    i = end;
  }
  return tokens;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

bool is_word_token(std::string_view token) noexcept {
  return std::any_of(token.begin(), token.end(), [](char ch) {
    const auto c = static_cast<unsigned char>(ch);
    return c >= 0x80 || std::isalpha(c);
  });
}

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary() {
  words_ = {std::string(kPadWord), std::string(kUnkWord)};
  ids_.emplace(kPadWord, kPad);
  ids_.emplace(kUnkWord, kUnk);
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> token_lists) {
  std::set<std::string> distinct;
  for (const auto& tokens : token_lists) distinct.insert(tokens.begin(), tokens.end());
  return from_words({distinct.begin(), distinct.end()});
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
  Vocabulary v;
  for (auto& w : words) {
    if (w.empty() || w == kPadWord || w == kUnkWord || v.ids_.contains(w)) continue;
    v.ids_.emplace(w, static_cast<TokenId>(v.words_.size()));
    v.words_.push_back(std::move(w));
  }
  return v;
}

TokenId Vocabulary::id(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::word(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size()) {
    throw ContractViolation("token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(words_.size()));
  }
  return words_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view word) const { return ids_.contains(std::string(word)); }

std::vector<TokenId> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<TokenId> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& w : words()) {
    out += w;
    out.push_back('\n');
  }
  return out;
}

Vocabulary Vocabulary::parse(std::string_view text) {
  std::vector<std::string> words;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    if (end > start) words.emplace_back(text.substr(start, end - start));
    start = end + 1;
  }
  return from_words(std::move(words));
}

void Vocabulary::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

Vocabulary Vocabulary::load(const std::filesystem::path& path) { return parse(read_file(path)); }

// ---------------------------------------------------------------------------

EmbeddingStore::EmbeddingStore(std::size_t dimension,
                               std::span<const std::pair<std::string, std::vector<float>>> entries)
    : dimension_(dimension) {
  std::map<std::string, std::vector<float>> merged;
  for (const auto& [word, vec] : entries) {
    if (vec.size() != dimension) {
      throw ContractViolation("embedding for '" + word + "' has dimension " +
                              std::to_string(vec.size()) + ", expected " +
                              std::to_string(dimension));
    }
    if (!merged.insert_or_assign(word, vec).second) ++duplicates_;
  }
  words_.reserve(merged.size());
  vectors_.reserve(merged.size() * dimension);
  for (auto& [word, vec] : merged) {
    double norm = 0.0;
    for (float v : vec) norm += static_cast<double>(v) * v;
    norm = std::sqrt(norm);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw ContractViolation("embedding for '" + word + "' cannot be normalized");
    }
    index_.emplace(word, words_.size());
    words_.push_back(word);
    for (float v : vec) vectors_.push_back(static_cast<float>(v / norm));
  }
}

std::size_t EmbeddingStore::index_of(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? words_.size() : it->second;
}

bool EmbeddingStore::contains(std::string_view word) const { return index_of(word) < words_.size(); }

std::span<const float> EmbeddingStore::vector(std::string_view word) const {
  const std::size_t i = index_of(word);
  if (i == words_.size()) return {};
  return {vectors_.data() + i * dimension_, dimension_};
}

double EmbeddingStore::cosine(std::string_view a, std::string_view b) const {
  auto va = vector(a);
  auto vb = vector(b);
  if (va.empty() || vb.empty()) return 0.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < dimension_; ++i) {
    dot += static_cast<double>(va[i]) * vb[i];
    na += static_cast<double>(va[i]) * va[i];
    nb += static_cast<double>(vb[i]) * vb[i];
  }
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

std::string EmbeddingStore::content_key() const {
  ByteWriter w;
  w.u64(dimension_);
  for (std::size_t i = 0; i < words_.size(); ++i) {
    w.str16(words_[i]);
    for (std::size_t d = 0; d < dimension_; ++d) w.f32(vectors_[i * dimension_ + d]);
  }
  return w.take();
}

EmbeddingStore parse_embeddings(std::string_view text) {
  std::vector<std::pair<std::string, std::vector<float>>> entries;
  std::size_t dimension = 0;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = text.substr(start, end - start);
    start = end + 1;

    std::vector<std::string_view> fields;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && is_space(static_cast<unsigned char>(line[i]))) ++i;
      std::size_t j = i;
      while (j < line.size() && !is_space(static_cast<unsigned char>(line[j]))) ++j;
      if (j > i) fields.push_back(line.substr(i, j - i));
      i = j;
    }
    if (fields.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (fields.size() < 2) throw ParseError("embedding line has no vector", line_no);

    std::vector<float> vec;
    vec.reserve(fields.size() - 1);
    for (std::size_t f = 1; f < fields.size(); ++f) {
      float v = 0.0f;
      auto [ptr, ec] = std::from_chars(fields[f].data(), fields[f].data() + fields[f].size(), v);
      if (ec != std::errc{} || ptr != fields[f].data() + fields[f].size() || !std::isfinite(v)) {
        throw ParseError("malformed float '" + std::string(fields[f]) + "'", line_no);
      }
      vec.push_back(v);
    }
    if (dimension == 0) dimension = vec.size();
    if (vec.size() != dimension) {
      throw ParseError("inconsistent dimension " + std::to_string(vec.size()) + ", expected " +
                           std::to_string(dimension),
                       line_no);
    }
    if (std::all_of(vec.begin(), vec.end(), [](float v) { return v == 0.0f; })) {
      throw ParseError("zero vector cannot be normalized", line_no);
    }
    entries.emplace_back(std::string(fields[0]), std::move(vec));
    if (end == text.size()) break;
  }
  return EmbeddingStore(dimension, entries);
}

EmbeddingStore load_embeddings(const std::filesystem::path& path) {
  return parse_embeddings(read_file(path));
}

std::vector<Synonym> nearest_synonyms(const EmbeddingStore& store, std::string_view word,
                                      std::size_t k, double min_cos) {
  if (k < 1) throw ContractViolation("nearest_synonyms requires k >= 1");
  if (!(min_cos >= 0.0 && min_cos <= 1.0)) {
    throw ContractViolation("nearest_synonyms requires 0 <= min_cos <= 1");
  }
  if (!store.contains(word)) return {};

  // Absorbs the rounding left over from normalizing in float.
  constexpr double kTolerance = 1e-9;
  std::vector<Synonym> found;
  for (const auto& candidate : store.words()) {
    if (candidate == word) continue;
    const double cos = store.cosine(word, candidate);
    if (cos + kTolerance >= min_cos) found.push_back({candidate, cos});
  }
  // words() is sorted, so a stable sort keeps lexicographic order among ties.
  std::stable_sort(found.begin(), found.end(),
                   [](const Synonym& a, const Synonym& b) { return a.similarity > b.similarity; });
  if (found.size() > k) found.resize(k);
  return found;
}

// ---------------------------------------------------------------------------

std::span<const Synonym> SynonymIndex::lookup(std::string_view word) const {
  auto it = entries_.find(word);
  if (it == entries_.end()) return {};
  return it->second;
}

bool SynonymIndex::contains_synonym(std::string_view word, std::string_view candidate) const {
  auto list = lookup(word);
  return std::any_of(list.begin(), list.end(),
                     [&](const Synonym& s) { return s.word == candidate; });
}

void SynonymIndex::set(std::string word, std::vector<Synonym> synonyms) {
  entries_.insert_or_assign(std::move(word), std::move(synonyms));
}

std::string SynonymIndex::serialize(std::uint64_t key) const {
  ByteWriter w;
  w.raw(std::string_view(kIndexMagic, 4));
  w.u16(kIndexVersion);
  w.u64(key);
  w.u32(static_cast<std::uint32_t>(k_));
  w.u64(std::bit_cast<std::uint64_t>(min_cos_));
  w.u32(static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [word, list] : entries_) {
    w.str16(word);
    w.u16(static_cast<std::uint16_t>(list.size()));
    for (const auto& s : list) {
      w.str16(s.word);
      w.u64(std::bit_cast<std::uint64_t>(s.similarity));
    }
  }
  return w.take();
}

SynonymIndex SynonymIndex::deserialize(std::string_view bytes, std::uint64_t* key) {
  ByteReader r(bytes);
  SynonymIndex index;
  try {
    if (r.raw(4) != std::string_view(kIndexMagic, 4)) throw ParseError("bad synonym index magic", 0);
    if (r.u16() != kIndexVersion) throw ParseError("unsupported synonym index version", 0);
    const std::uint64_t stored_key = r.u64();
    if (key) *key = stored_key;
    index.k_ = r.u32();
    index.min_cos_ = std::bit_cast<double>(r.u64());
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
      std::string word = r.str16();
      const std::uint16_t n = r.u16();
      std::vector<Synonym> list;
      list.reserve(n);
      for (std::uint16_t j = 0; j < n; ++j) {
        std::string syn = r.str16();
        list.push_back({std::move(syn), std::bit_cast<double>(r.u64())});
      }
      index.entries_.emplace(std::move(word), std::move(list));
    }
  } catch (const ByteReader::TruncatedInput&) {
    throw ParseError("truncated synonym index", 0);
  }
  return index;
}

SynonymIndex build_index(const EmbeddingStore& store, const Vocabulary& vocab, std::size_t k,
                         double min_cos) {
  SynonymIndex index;
  index.k_ = k;
  index.min_cos_ = min_cos;
  for (const auto& word : vocab.words()) {
    index.entries_.emplace(word, nearest_synonyms(store, word, k, min_cos));
  }
  return index;
}

SynonymIndex load_or_build_index(const std::filesystem::path& cache, const EmbeddingStore& store,
                                 const Vocabulary& vocab, std::size_t k, double min_cos) {
  ByteWriter key_bytes;
  key_bytes.raw(store.content_key());
  key_bytes.raw(vocab.serialize());
  key_bytes.u64(k);
  key_bytes.u64(std::bit_cast<std::uint64_t>(min_cos));
  const std::uint64_t key = fnv1a64(key_bytes.bytes());

  if (std::filesystem::exists(cache)) {
    try {
      std::uint64_t stored = 0;
      SynonymIndex index = SynonymIndex::deserialize(read_file(cache), &stored);
      if (stored == key) return index;
    } catch (const ParseError&) {
      // stale or corrupt; rebuilt below
    }
  }
  SynonymIndex index = build_index(store, vocab, k, min_cos);
  write_file(cache, index.serialize(key));
  return index;
}

}  // namespace qrobust
