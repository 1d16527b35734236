#pragma once

#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lexnorm/align_tok.hpp"
#include "lexnorm/dataset.hpp"

namespace lexnorm {

// Weak source ids shared with the rule attention network.
enum class RuleId : int { kRegex = 0, kDictionary = 1, kStudent = 2 };
inline constexpr int kNumSources = 3;

struct WeakPrediction {
  RuleId rule_id = RuleId::kRegex;
  std::size_t word_index = 0;
  std::optional<std::string> prediction;  // nullopt means ABSTAIN

  bool abstains() const { return !prediction.has_value(); }
};

// NSW -> standard word lookup restricted to one-to-one word mappings.
class DictionaryRule {
 public:
  DictionaryRule() = default;
  // Entries whose value spans several words are dropped and reported in
  // `warnings`. A value with internal spaces is accepted only when it is a
  // single segmented word of `lexicon` (e.g. "công ty").
  DictionaryRule(const std::map<std::string, std::string>& entries, const Lexicon* lexicon = nullptr);

  static DictionaryRule from_json(const nlohmann::json& j, const Lexicon* lexicon = nullptr);
  static DictionaryRule load(const std::string& path, const Lexicon* lexicon = nullptr);
  nlohmann::json to_json() const;

  const std::map<std::string, std::string>& entries() const { return entries_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  std::optional<std::string> lookup(const std::string& word) const;
  std::vector<WeakPrediction> apply(const Words& words) const;

 private:
  std::map<std::string, std::string> entries_;
  std::vector<std::string> warnings_;
};

// Ordered full-word patterns; the first one that matches rewrites the word.
class RegexRule {
 public:
  struct Pattern {
    std::string pattern;
    std::string replacement;
  };

  RegexRule() = default;
  explicit RegexRule(std::vector<Pattern> patterns);

  static RegexRule from_json(const nlohmann::json& j);
  static RegexRule load(const std::string& path);
  // Collapses a repeated final letter ("đẹppp" -> "đẹp", "vuiiii" -> "vui").
  static RegexRule default_rules();
  nlohmann::json to_json() const;

  std::optional<std::string> rewrite(const std::string& word) const;
  std::vector<WeakPrediction> apply(const Words& words) const;

 private:
  std::vector<Pattern> patterns_;
  std::vector<std::wregex> compiled_;
};

// A token-level weak label: the vocabulary id a source votes for at one
// position, or nullopt when it abstains.
using TokenVote = std::optional<TokenId>;

// Aligns each word-level prediction into its span exactly as align_pair
// would, padding with <space>. Throws SpanOverflow when the prediction
// needs more tokens than the span holds.
std::vector<TokenVote> expand_to_subwords(const std::vector<WeakPrediction>& predictions,
                                          const std::vector<WordSpan>& spans, const Vocabulary& vocab);

// Word-level rule columns: the rule's rewrite where it fires, the input word
// elsewhere.
Words rule_column(const std::vector<WeakPrediction>& predictions, const Words& input);
// Inverse of rule_column: a word differing from the input means the rule fired.
std::vector<WeakPrediction> predictions_from_column(RuleId rule, const Words& column, const Words& input);

struct RuleSet {
  RegexRule regex;
  DictionaryRule dictionary;
};

void precompute_rule_columns(std::vector<LabeledRow>& rows, const RuleSet& rules);
void precompute_rule_columns(std::vector<UnlabeledRow>& rows, const RuleSet& rules);

// Seed dictionary drawn from the lexicon's NSW tables: `coverage` of the
// forms, with `error_rate` of the chosen entries pointing at a wrong word.
DictionaryRule make_seed_dictionary(const Lexicon& lexicon, double coverage, double error_rate, Rng& rng);

}  // namespace lexnorm
