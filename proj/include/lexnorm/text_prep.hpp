#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "lexnorm/errors.hpp"
#include "lexnorm/random.hpp"

namespace lexnorm {

using Words = std::vector<std::string>;

// A sentence in noisy (source) and standard (target) form, aligned word by
// word. A target word may contain internal spaces for 1-n expansions
// ("ca" -> "công an").
class WordPair {
 public:
  WordPair() = default;
  WordPair(Words source, Words target);

  const Words& source() const { return source_; }
  const Words& target() const { return target_; }
  std::size_t size() const { return source_.size(); }

 private:
  Words source_;
  Words target_;
};

class Lexicon {
 public:
  static Lexicon from_json(const nlohmann::json& j);
  static Lexicon load(const std::string& path);
  nlohmann::json to_json() const;

  // Frequency order: index 0 is the most common word.
  const Words& canonical_words() const { return canonical_; }
  bool contains(const std::string& word) const { return canonical_set_.count(word) > 0; }

  const std::map<std::string, std::string>& abbreviation_table() const { return abbrev_; }
  const std::map<std::string, std::string>& teencode_table() const { return teencode_; }
  const std::map<char32_t, char32_t>& diacritic_map() const { return diacritics_; }

  // NSW forms that normalize to `standard`, sorted.
  const Words& abbreviations_of(const std::string& standard) const;
  const Words& teencodes_of(const std::string& standard) const;

  bool is_marked(char32_t cp) const { return diacritics_.count(cp) > 0; }
  char32_t base_of(char32_t cp) const;

 private:
  Words canonical_;
  std::unordered_set<std::string> canonical_set_;
  std::map<std::string, std::string> abbrev_;
  std::map<std::string, std::string> teencode_;
  std::map<char32_t, char32_t> diacritics_;
  std::unordered_map<std::string, Words> abbrev_inv_;
  std::unordered_map<std::string, Words> teencode_inv_;
};

struct CorruptionConfig {
  double p_abbrev = 0.16;
  double p_teencode = 0.09;
  double p_repeat_suffix = 0.04;
  double p_typo = 0.03;
  // Word-level removal of every diacritic (the "unmarked" NSW class).
  double p_unmark = 0.045;
  // Character-level stripping applied on top of the operators above.
  double p_diacritic_char = 0.0;
  std::uint64_t rng_seed = 13;

  void validate() const;
  nlohmann::json to_json() const;
  static CorruptionConfig from_json(const nlohmann::json& j);
};

// Lowercase, split on whitespace, and give every punctuation run and every
// emoji its own element.
Words case_fold_and_separate(const std::string& text);

bool is_punctuation(const std::string& word);

// Replace each marked character by its base with probability `proportion`.
std::string strip_diacritics(const std::string& word, double proportion, const Lexicon& lexicon,
                             Rng& rng);

// One operator at most per word, tried in priority order
// abbreviation > teencode > repeated suffix > typo > unmark.
WordPair corrupt_sentence(const Words& words, const CorruptionConfig& config,
                          const Lexicon& lexicon, Rng& rng);

// Returns the input followed by a copy whose sources are stripped at
// proportion p. Targets are unchanged.
std::vector<WordPair> augment_with_diacritic_removal(const std::vector<WordPair>& dataset,
                                                     double p, const Lexicon& lexicon, Rng& rng);

// Sizes for an (a, b, c) split of n items; the first part absorbs rounding.
std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& ratios);

template <typename T>
struct Split {
  std::vector<T> train;
  std::vector<T> dev;
  std::vector<T> test;
};

template <typename T>
Split<T> split_dataset(const std::vector<T>& items, const std::array<double, 3>& ratios, Rng& rng) {
  if (items.empty()) throw EmptyDataset();
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const auto sizes = split_sizes(items.size(), ratios);
  Split<T> out;
  std::size_t k = 0;
  for (; k < sizes[0]; ++k) out.train.push_back(items[order[k]]);
  for (; k < sizes[0] + sizes[1]; ++k) out.dev.push_back(items[order[k]]);
  for (; k < order.size(); ++k) out.test.push_back(items[order[k]]);
  return out;
}

// Random sentences over the canonical vocabulary with Zipfian word
// frequencies and occasional punctuation/emoticons.
struct SentenceConfig {
  double zipf_exponent = 1.0;
  double mean_words = 10.0;
  std::size_t min_words = 2;
  std::size_t max_words = 40;
  double p_inner_punct = 0.06;
  double p_final_punct = 0.5;
};

class SentenceGenerator {
 public:
  SentenceGenerator(const Lexicon& lexicon, SentenceConfig config);
  Words sample(Rng& rng) const;
  double word_probability(std::size_t rank) const { return probs_[rank]; }
  // Expected share of emitted elements that are lexicon words.
  double expected_word_share() const;

 private:
  const Lexicon* lexicon_;
  SentenceConfig config_;
  std::vector<double> probs_;
  std::vector<double> cumulative_;
};

// Probability that a single lexicon word comes out corrupted.
double corruption_probability(const std::string& word, const CorruptionConfig& config,
                              const Lexicon& lexicon);

// Expected fraction of non-standard words in a generated corpus.
double expected_nsw_rate(const Lexicon& lexicon, const SentenceGenerator& generator,
                         const CorruptionConfig& config);

}  // namespace lexnorm
