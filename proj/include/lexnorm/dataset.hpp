#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lexnorm/text_prep.hpp"

namespace lexnorm {

// One labeled sentence: original/normalized strings plus the aligned word
// lists. Rule columns are filled by precompute_rule_columns.
struct LabeledRow {
  std::string original;
  std::string normalized;
  Words input;
  Words output;
  std::optional<Words> regex_rule;
  std::optional<Words> dict_rule;

  WordPair pair() const { return WordPair(input, output); }
  static LabeledRow from_pair(const WordPair& pair);
};

// One unlabeled sentence with its provenance fields.
struct UnlabeledRow {
  std::string dataset;
  std::string type;
  std::int64_t sent_idx = 0;
  std::int64_t idx = 0;
  std::string original;
  Words input;
  std::optional<Words> regex_rule;
  std::optional<Words> dict_rule;
};

// Withheld normalization of an unlabeled row, kept in a separate file.
struct GoldRow {
  std::int64_t idx = 0;
  Words input;
  Words output;
};

std::string join_words(const Words& words);

nlohmann::json to_json(const LabeledRow& row);
nlohmann::json to_json(const UnlabeledRow& row);
nlohmann::json to_json(const GoldRow& row);
LabeledRow labeled_from_json(const nlohmann::json& j);
UnlabeledRow unlabeled_from_json(const nlohmann::json& j);
GoldRow gold_from_json(const nlohmann::json& j);

// Line-oriented JSON. `on_error(line_no, message)` is called for lines that
// fail to parse; when absent the first bad line throws DataError.
using LineErrorHandler = std::function<void(std::size_t, const std::string&)>;
std::vector<nlohmann::json> read_jsonl(const std::string& path, const LineErrorHandler& on_error = {});

template <typename Row>
void write_jsonl(const std::string& path, const std::vector<Row>& rows);

std::vector<LabeledRow> read_labeled(const std::string& path);
std::vector<UnlabeledRow> read_unlabeled(const std::string& path);
std::vector<GoldRow> read_gold(const std::string& path);

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::string& path, const std::string& contents);

// Synthetic stand-in for a labeled normalization corpus plus an unlabeled
// pool. Each sentence draws from its own generator stream.
struct CorpusConfig {
  std::size_t n_labeled = 10463;
  std::size_t n_unlabeled = 40000;
  SentenceConfig sentences;
  CorruptionConfig corruption;
  std::uint64_t seed = 13;

  nlohmann::json to_json() const;
  static CorpusConfig from_json(const nlohmann::json& j);
};

struct SyntheticCorpus {
  std::vector<LabeledRow> labeled;
  std::vector<UnlabeledRow> unlabeled;
  std::vector<GoldRow> unlabeled_gold;
};

SyntheticCorpus generate_corpus(const Lexicon& lexicon, const CorpusConfig& config);

std::uint64_t fnv1a(std::string_view data, std::uint64_t hash = 0xcbf29ce484222325ULL);

}  // namespace lexnorm
