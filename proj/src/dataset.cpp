#include "lexnorm/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace lexnorm {

namespace {

nlohmann::json maybe_words(const std::optional<Words>& w) {
  return w ? nlohmann::json(*w) : nlohmann::json();
}

std::optional<Words> read_optional_words(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<Words>();
}

nlohmann::json as_json(const nlohmann::json& j) { return j; }
nlohmann::json as_json(const LabeledRow& r) { return to_json(r); }
nlohmann::json as_json(const UnlabeledRow& r) { return to_json(r); }
nlohmann::json as_json(const GoldRow& r) { return to_json(r); }

template <typename Row, typename Parse>
std::vector<Row> read_rows(const std::string& path, Parse parse) {
  std::vector<Row> out;
  std::size_t line = 0;
  for (const auto& j : read_jsonl(path)) {
    ++line;
    try {
      out.push_back(parse(j));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(line) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::string join_words(const Words& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

LabeledRow LabeledRow::from_pair(const WordPair& pair) {
  LabeledRow row;
  row.original = join_words(pair.source());
  row.normalized = join_words(pair.target());
  row.input = pair.source();
  row.output = pair.target();
  return row;
}

nlohmann::json to_json(const LabeledRow& row) {
  nlohmann::json j = {{"original", row.original},
                      {"normalized", row.normalized},
                      {"input", row.input},
                      {"output", row.output}};
  if (row.regex_rule) j["regex_rule"] = maybe_words(row.regex_rule);
  if (row.dict_rule) j["dict_rule"] = maybe_words(row.dict_rule);
  return j;
}

nlohmann::json to_json(const UnlabeledRow& row) {
  nlohmann::json j = {{"dataset", row.dataset},   {"type", row.type},
                      {"sent_idx", row.sent_idx}, {"idx", row.idx},
                      {"original", row.original}, {"input", row.input}};
  if (row.regex_rule) j["regex_rule"] = maybe_words(row.regex_rule);
  if (row.dict_rule) j["dict_rule"] = maybe_words(row.dict_rule);
  return j;
}

nlohmann::json to_json(const GoldRow& row) {
  return {{"idx", row.idx}, {"input", row.input}, {"output", row.output}};
}

LabeledRow labeled_from_json(const nlohmann::json& j) {
  LabeledRow row;
  row.input = j.at("input").get<Words>();
  row.output = j.at("output").get<Words>();
  row.original = j.value("original", join_words(row.input));
  row.normalized = j.value("normalized", join_words(row.output));
  row.regex_rule = read_optional_words(j, "regex_rule");
  row.dict_rule = read_optional_words(j, "dict_rule");
  (void)row.pair();  // validates the word-by-word invariants
  return row;
}

UnlabeledRow unlabeled_from_json(const nlohmann::json& j) {
  UnlabeledRow row;
  row.input = j.at("input").get<Words>();
  row.dataset = j.value("dataset", "");
  row.type = j.value("type", "");
  row.sent_idx = j.value("sent_idx", std::int64_t{0});
  row.idx = j.value("idx", std::int64_t{0});
  row.original = j.value("original", join_words(row.input));
  row.regex_rule = read_optional_words(j, "regex_rule");
  row.dict_rule = read_optional_words(j, "dict_rule");
  for (const auto& w : row.input) {
    if (w.empty()) throw DataError("empty word in unlabeled row");
  }
  return row;
}

GoldRow gold_from_json(const nlohmann::json& j) {
  GoldRow row;
  // Labeled rows carry no idx.
  row.idx = j.value("idx", std::int64_t{-1});
  row.input = j.at("input").get<Words>();
  row.output = j.at("output").get<Words>();
  (void)WordPair(row.input, row.output);
  return row;
}

std::vector<nlohmann::json> read_jsonl(const std::string& path, const LineErrorHandler& on_error) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      if (!on_error) throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
      on_error(line_no, e.what());
    }
  }
  return out;
}

template <typename Row>
void write_jsonl(const std::string& path, const std::vector<Row>& rows) {
  std::ostringstream out;
  for (const auto& r : rows) out << as_json(r).dump() << '\n';
  write_file_atomic(path, out.str());
}

template void write_jsonl(const std::string&, const std::vector<LabeledRow>&);
template void write_jsonl(const std::string&, const std::vector<UnlabeledRow>&);
template void write_jsonl(const std::string&, const std::vector<GoldRow>&);
template void write_jsonl(const std::string&, const std::vector<nlohmann::json>&);

std::vector<LabeledRow> read_labeled(const std::string& path) {
  return read_rows<LabeledRow>(path, labeled_from_json);
}

std::vector<UnlabeledRow> read_unlabeled(const std::string& path) {
  return read_rows<UnlabeledRow>(path, unlabeled_from_json);
}

std::vector<GoldRow> read_gold(const std::string& path) {
  return read_rows<GoldRow>(path, gold_from_json);
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << contents;
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

nlohmann::json CorpusConfig::to_json() const {
  return {{"n_labeled", n_labeled},
          {"n_unlabeled", n_unlabeled},
          {"seed", seed},
          {"sentences",
           {{"zipf_exponent", sentences.zipf_exponent},
            {"mean_words", sentences.mean_words},
            {"min_words", sentences.min_words},
            {"max_words", sentences.max_words},
            {"p_inner_punct", sentences.p_inner_punct},
            {"p_final_punct", sentences.p_final_punct}}},
          {"corruption", corruption.to_json()}};
}

CorpusConfig CorpusConfig::from_json(const nlohmann::json& j) {
  CorpusConfig c;
  c.n_labeled = j.value("n_labeled", c.n_labeled);
  c.n_unlabeled = j.value("n_unlabeled", c.n_unlabeled);
  c.seed = j.value("seed", c.seed);
  if (j.contains("sentences")) {
    const auto& s = j.at("sentences");
    c.sentences.zipf_exponent = s.value("zipf_exponent", c.sentences.zipf_exponent);
    c.sentences.mean_words = s.value("mean_words", c.sentences.mean_words);
    c.sentences.min_words = s.value("min_words", c.sentences.min_words);
    c.sentences.max_words = s.value("max_words", c.sentences.max_words);
    c.sentences.p_inner_punct = s.value("p_inner_punct", c.sentences.p_inner_punct);
    c.sentences.p_final_punct = s.value("p_final_punct", c.sentences.p_final_punct);
  }
  if (j.contains("corruption")) c.corruption = CorruptionConfig::from_json(j.at("corruption"));
  return c;
}

SyntheticCorpus generate_corpus(const Lexicon& lexicon, const CorpusConfig& config) {
  config.corruption.validate();
  const SentenceGenerator generator(lexicon, config.sentences);
  SyntheticCorpus corpus;
  corpus.labeled.reserve(config.n_labeled);
  for (std::size_t i = 0; i < config.n_labeled; ++i) {
    Rng rng = make_rng(config.seed, {1, i});
    const Words clean = generator.sample(rng);
    corpus.labeled.push_back(LabeledRow::from_pair(corrupt_sentence(clean, config.corruption, lexicon, rng)));
  }
  corpus.unlabeled.reserve(config.n_unlabeled);
  for (std::size_t i = 0; i < config.n_unlabeled; ++i) {
    Rng rng = make_rng(config.seed, {2, i});
    const Words clean = generator.sample(rng);
    const WordPair pair = corrupt_sentence(clean, config.corruption, lexicon, rng);
    UnlabeledRow row;
    row.dataset = "synthetic";
    row.type = "train";
    row.sent_idx = static_cast<std::int64_t>(i);
    row.idx = static_cast<std::int64_t>(i);
    row.original = join_words(pair.source());
    row.input = pair.source();
    corpus.unlabeled.push_back(std::move(row));
    corpus.unlabeled_gold.push_back({static_cast<std::int64_t>(i), pair.source(), pair.target()});
  }
  return corpus;
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t hash) {
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace lexnorm
