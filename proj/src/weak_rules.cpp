#include "lexnorm/weak_rules.hpp"

#include <fstream>

#include "lexnorm/utf8.hpp"

namespace lexnorm {

namespace {

std::wstring widen(const std::string& s) {
  const auto cps = utf8::decode(s);
  return std::wstring(cps.begin(), cps.end());
}

std::string narrow(const std::wstring& s) {
  std::u32string cps;
  cps.reserve(s.size());
  for (wchar_t c : s) cps.push_back(static_cast<char32_t>(c));
  return utf8::encode(cps);
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// DictionaryRule

DictionaryRule::DictionaryRule(const std::map<std::string, std::string>& entries, const Lexicon* lexicon) {
  for (const auto& [nsw, standard] : entries) {
    if (nsw.empty() || standard.empty()) {
      warnings_.push_back("dropped empty dictionary entry");
      continue;
    }
    if (nsw.find(' ') != std::string::npos) {
      warnings_.push_back("dropped multi-word key '" + nsw + "'");
      continue;
    }
    if (standard.find(' ') != std::string::npos && !(lexicon && lexicon->contains(standard))) {
      warnings_.push_back("dropped 1-n entry '" + nsw + "' -> '" + standard + "'");
      continue;
    }
    entries_.emplace(nsw, standard);
  }
}

DictionaryRule DictionaryRule::from_json(const nlohmann::json& j, const Lexicon* lexicon) {
  try {
    return DictionaryRule(j.get<std::map<std::string, std::string>>(), lexicon);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("dictionary: ") + e.what());
  }
}

DictionaryRule DictionaryRule::load(const std::string& path, const Lexicon* lexicon) {
  return from_json(read_json_file(path), lexicon);
}

nlohmann::json DictionaryRule::to_json() const { return entries_; }

std::optional<std::string> DictionaryRule::lookup(const std::string& word) const {
  auto it = entries_.find(word);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<WeakPrediction> DictionaryRule::apply(const Words& words) const {
  std::vector<WeakPrediction> out;
  out.reserve(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) out.push_back({RuleId::kDictionary, i, lookup(words[i])});
  return out;
}

// ---------------------------------------------------------------------------
// RegexRule

RegexRule::RegexRule(std::vector<Pattern> patterns) : patterns_(std::move(patterns)) {
  for (const auto& p : patterns_) {
    try {
      compiled_.emplace_back(widen(p.pattern), std::regex_constants::ECMAScript);
    } catch (const std::regex_error& e) {
      throw InvalidPattern("invalid pattern '" + p.pattern + "': " + e.what());
    }
  }
}

RegexRule RegexRule::from_json(const nlohmann::json& j) {
  std::vector<Pattern> patterns;
  try {
    for (const auto& p : j) {
      patterns.push_back({p.at("pattern").get<std::string>(), p.at("replacement").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("regex rules: ") + e.what());
  }
  return RegexRule(std::move(patterns));
}

RegexRule RegexRule::load(const std::string& path) { return from_json(read_json_file(path)); }

RegexRule RegexRule::default_rules() {
  return RegexRule(std::vector<Pattern>{{
      "(.+?)([a-zàáảãạăằắẳẵặâầấẩẫậèéẻẽẹêềếểễệìíỉĩịòóỏõọôồốổỗộơờớởỡợùúủũụưừứửữựỳýỷỹỵđ])\\2+",
      "$1$2",
  }});
}

nlohmann::json RegexRule::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : patterns_) j.push_back({{"pattern", p.pattern}, {"replacement", p.replacement}});
  return j;
}

std::optional<std::string> RegexRule::rewrite(const std::string& word) const {
  const std::wstring w = widen(word);
  for (std::size_t i = 0; i < compiled_.size(); ++i) {
    std::wsmatch m;
    if (std::regex_match(w, m, compiled_[i])) return narrow(m.format(widen(patterns_[i].replacement)));
  }
  return std::nullopt;
}

std::vector<WeakPrediction> RegexRule::apply(const Words& words) const {
  std::vector<WeakPrediction> out;
  out.reserve(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) out.push_back({RuleId::kRegex, i, rewrite(words[i])});
  return out;
}

// ---------------------------------------------------------------------------

std::vector<TokenVote> expand_to_subwords(const std::vector<WeakPrediction>& predictions,
                                          const std::vector<WordSpan>& spans, const Vocabulary& vocab) {
  const std::size_t n = spans.empty() ? 0 : spans.back().end;
  std::vector<TokenVote> out(n);
  for (const auto& p : predictions) {
    if (p.word_index >= spans.size()) throw DataError("weak prediction refers to a missing word");
    if (p.abstains()) continue;
    const WordSpan& span = spans[p.word_index];
    const TokenIds ids = vocab.tokenize_phrase(*p.prediction);
    if (ids.size() > span.size()) {
      throw SpanOverflow("'" + *p.prediction + "' needs " + std::to_string(ids.size()) +
                         " tokens but its span holds " + std::to_string(span.size()));
    }
    for (std::size_t k = 0; k < span.size(); ++k) {
      out[span.begin + k] = k < ids.size() ? ids[k] : Vocabulary::kSpace;
    }
  }
  return out;
}

Words rule_column(const std::vector<WeakPrediction>& predictions, const Words& input) {
  Words out = input;
  for (const auto& p : predictions) {
    if (!p.abstains()) out.at(p.word_index) = *p.prediction;
  }
  return out;
}

std::vector<WeakPrediction> predictions_from_column(RuleId rule, const Words& column, const Words& input) {
  if (column.size() != input.size()) throw LengthMismatch("rule column length differs from input");
  std::vector<WeakPrediction> out;
  out.reserve(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    WeakPrediction p{rule, i, std::nullopt};
    if (column[i] != input[i]) p.prediction = column[i];
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

template <typename Row>
void fill_columns(std::vector<Row>& rows, const RuleSet& rules) {
  for (auto& row : rows) {
    row.regex_rule = rule_column(rules.regex.apply(row.input), row.input);
    row.dict_rule = rule_column(rules.dictionary.apply(row.input), row.input);
  }
}

}  // namespace

void precompute_rule_columns(std::vector<LabeledRow>& rows, const RuleSet& rules) { fill_columns(rows, rules); }
void precompute_rule_columns(std::vector<UnlabeledRow>& rows, const RuleSet& rules) { fill_columns(rows, rules); }

DictionaryRule make_seed_dictionary(const Lexicon& lexicon, double coverage, double error_rate, Rng& rng) {
  if (!(coverage >= 0.0 && coverage <= 1.0) || !(error_rate >= 0.0 && error_rate <= 1.0)) {
    throw ConfigError("dictionary coverage and error rate must lie in [0, 1]");
  }
  std::map<std::string, std::string> all;
  for (const auto* table : {&lexicon.abbreviation_table(), &lexicon.teencode_table()}) {
    for (const auto& [nsw, standard] : *table) all.emplace(nsw, standard);
  }
  std::vector<std::pair<std::string, std::string>> forms(all.begin(), all.end());
  std::shuffle(forms.begin(), forms.end(), rng);
  forms.resize(static_cast<std::size_t>(coverage * static_cast<double>(forms.size()) + 0.5));
  const auto& words = lexicon.canonical_words();
  std::map<std::string, std::string> chosen;
  for (auto& [nsw, standard] : forms) {
    if (uniform01(rng) < error_rate) {
      std::string wrong = standard;
      while (wrong == standard) {
        wrong = words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)];
      }
      standard = wrong;
    }
    chosen.emplace(nsw, standard);
  }
  return DictionaryRule(chosen, &lexicon);
}

}  // namespace lexnorm
