#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lexnorm/text_prep.hpp"

namespace lexnorm {

using TokenId = std::int32_t;
using TokenIds = std::vector<TokenId>;

// Word-start marker carried by the first unit of every word.
inline constexpr std::string_view kWordMarker = "\xE2\x96\x81";  // U+2581

// n_mask label at positions that are themselves <mask>.
inline constexpr int kIgnore = -1;

class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kMask = 2;
  static constexpr TokenId kSpace = 3;
  static constexpr std::size_t kNumSpecials = 4;

  // `units` excludes the specials; they are prepended in the fixed order
  // <pad>, <unk>, <mask>, <space>.
  static Vocabulary from_units(const std::vector<std::string>& units);
  static Vocabulary from_json(const nlohmann::json& j);
  static Vocabulary load(const std::string& path);
  nlohmann::json to_json() const;
  void save(const std::string& path) const;

  std::size_t size() const { return units_.size(); }
  const std::string& unit(TokenId id) const { return units_.at(static_cast<std::size_t>(id)); }
  // kUnk when absent.
  TokenId id_of(const std::string& unit) const;
  bool contains(const std::string& unit) const { return index_.count(unit) > 0; }
  bool is_special(TokenId id) const { return id >= 0 && static_cast<std::size_t>(id) < kNumSpecials; }
  bool is_word_start(TokenId id) const;
  std::uint64_t hash() const { return hash_; }

  // Greedy longest match, left to right. Unseen characters become <unk>.
  TokenIds tokenize_word(const std::string& word) const;
  // Splits on spaces first, so "công an" yields two word-start units.
  TokenIds tokenize_phrase(const std::string& phrase) const;

 private:
  std::vector<std::string> units_;
  std::unordered_map<std::string, TokenId> index_;
  std::size_t max_unit_chars_ = 1;
  std::uint64_t hash_ = 0;
};

// Pair-merge vocabulary over corpus words (phrases are split on spaces).
// Every character gets both a word-start and a continuation unit.
Vocabulary train_subword_vocab(const std::vector<Words>& corpus, std::size_t target_size);

struct WordSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

struct AlignedExample {
  TokenIds source_ids;
  TokenIds target_ids;
  std::vector<int> n_mask;
  std::vector<WordSpan> word_spans;

  std::size_t size() const { return source_ids.size(); }
};

// Tokenizes each word on both sides and pads the shorter side of every
// span at its end: sources with <mask>, targets with <space>.
AlignedExample align_pair(const WordPair& pair, const Vocabulary& vocab, int max_n_mask = 3);

// For each non-mask source token, the number of <mask> tokens that follow
// it; kIgnore at mask positions.
std::vector<int> n_mask_labels(const TokenIds& source_ids);

// Inserts n_mask[i] masks after token i (the inverse of n_mask_labels).
TokenIds insert_masks(const TokenIds& tokens, const std::vector<int>& n_mask);

// Drops <space> and <pad>, merges continuation units into words. Strict mode
// throws DanglingContinuation when a continuation unit opens a word; lenient
// mode starts a new word instead and also drops <mask>/<unk>.
Words detokenize(const TokenIds& ids, const Vocabulary& vocab, bool strict = true);

}  // namespace lexnorm
