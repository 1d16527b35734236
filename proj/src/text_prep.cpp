#include "lexnorm/text_prep.hpp"

#include <cmath>
#include <fstream>

#include "lexnorm/utf8.hpp"

namespace lexnorm {

namespace {

const Words kNoForms;

const std::vector<std::string> kInnerPunct = {",", ",", ",", "...", "!", "?", ":))", "=))"};
const std::vector<std::string> kFinalPunct = {".", ".", "!", "!!", "?", ":)", ":))", "…", "😂", "😡"};

bool contains_space(const std::string& s) { return s.find(' ') != std::string::npos; }

int draw_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

std::string apply_typo(const std::string& word, Rng& rng) {
  auto cps = utf8::decode(word);
  const int n = static_cast<int>(cps.size());
  bool swap = uniform01(rng) < 0.5;
  if (swap) {
    std::vector<int> candidates;
    for (int i = 0; i + 1 < n; ++i) {
      if (cps[i] != cps[i + 1]) candidates.push_back(i);
    }
    if (candidates.empty()) {
      swap = false;
    } else {
      const int i = candidates[draw_int(rng, 0, static_cast<int>(candidates.size()) - 1)];
      std::swap(cps[i], cps[i + 1]);
    }
  }
  if (!swap) {
    const int i = draw_int(rng, 0, n - 1);
    cps.insert(cps.begin() + i, cps[i]);
  }
  return utf8::encode(cps);
}

bool ends_with_letter(const std::string& word) {
  const auto cps = utf8::decode(word);
  if (cps.empty()) return false;
  const char32_t last = cps.back();
  return utf8::classify(last) == utf8::CharClass::kWord && !(last >= U'0' && last <= U'9');
}

bool has_marks(const std::string& word, const Lexicon& lexicon) {
  for (char32_t cp : utf8::decode(word)) {
    if (lexicon.is_marked(cp)) return true;
  }
  return false;
}

struct Applicability {
  bool abbrev, teencode, repeat, typo, unmark;
};

Applicability applicable(const std::string& word, const Lexicon& lexicon) {
  return {
      !lexicon.abbreviations_of(word).empty(),
      !lexicon.teencodes_of(word).empty(),
      ends_with_letter(word),
      !contains_space(word) && utf8::length(word) >= 2,
      has_marks(word, lexicon),
  };
}

}  // namespace

WordPair::WordPair(Words source, Words target) : source_(std::move(source)), target_(std::move(target)) {
  if (source_.size() != target_.size()) {
    throw LengthMismatch("WordPair: source has " + std::to_string(source_.size()) +
                         " words, target has " + std::to_string(target_.size()));
  }
  for (std::size_t i = 0; i < source_.size(); ++i) {
    if (source_[i].empty() || target_[i].empty()) {
      throw DataError("WordPair: empty word at position " + std::to_string(i));
    }
  }
}

// ---------------------------------------------------------------------------
// Lexicon

Lexicon Lexicon::from_json(const nlohmann::json& j) {
  Lexicon lex;
  try {
    for (const auto& w : j.at("canonical_words")) {
      auto word = w.get<std::string>();
      if (word.empty()) throw DataError("lexicon: empty canonical word");
      if (lex.canonical_set_.insert(word).second) lex.canonical_.push_back(word);
    }
    for (const auto& [k, v] : j.at("abbreviation_table").items()) lex.abbrev_[k] = v.get<std::string>();
    for (const auto& [k, v] : j.at("teencode_table").items()) lex.teencode_[k] = v.get<std::string>();
    for (const auto& [k, v] : j.at("diacritic_map").items()) {
      const auto from = utf8::decode(k);
      const auto to = utf8::decode(v.get<std::string>());
      if (from.size() != 1 || to.size() != 1) {
        throw DataError("lexicon: diacritic_map entries must map one character to one character");
      }
      lex.diacritics_[from[0]] = to[0];
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("lexicon: ") + e.what());
  }
  for (const auto* table : {&lex.abbrev_, &lex.teencode_}) {
    for (const auto& [nsw, standard] : *table) {
      if (!lex.contains(standard)) {
        throw DataError("lexicon: '" + nsw + "' maps to '" + standard + "' which is not canonical");
      }
    }
  }
  for (const auto& [from, to] : lex.diacritics_) {
    if (lex.diacritics_.count(to)) {
      throw DataError("lexicon: diacritic_map is not idempotent at U+" + std::to_string(from));
    }
  }
  for (const auto& [nsw, standard] : lex.abbrev_) lex.abbrev_inv_[standard].push_back(nsw);
  for (const auto& [nsw, standard] : lex.teencode_) lex.teencode_inv_[standard].push_back(nsw);
  return lex;
}

Lexicon Lexicon::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("lexicon " + path + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json Lexicon::to_json() const {
  nlohmann::json dmap = nlohmann::json::object();
  for (const auto& [from, to] : diacritics_) dmap[utf8::encode(from)] = utf8::encode(to);
  return {{"canonical_words", canonical_},
          {"abbreviation_table", abbrev_},
          {"teencode_table", teencode_},
          {"diacritic_map", dmap}};
}

const Words& Lexicon::abbreviations_of(const std::string& standard) const {
  auto it = abbrev_inv_.find(standard);
  return it == abbrev_inv_.end() ? kNoForms : it->second;
}

const Words& Lexicon::teencodes_of(const std::string& standard) const {
  auto it = teencode_inv_.find(standard);
  return it == teencode_inv_.end() ? kNoForms : it->second;
}

char32_t Lexicon::base_of(char32_t cp) const {
  auto it = diacritics_.find(cp);
  return it == diacritics_.end() ? cp : it->second;
}

// ---------------------------------------------------------------------------
// CorruptionConfig

void CorruptionConfig::validate() const {
  for (double p : {p_abbrev, p_teencode, p_repeat_suffix, p_typo, p_unmark, p_diacritic_char}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("corruption probabilities must lie in [0, 1]");
  }
}

nlohmann::json CorruptionConfig::to_json() const {
  return {{"p_abbrev", p_abbrev},         {"p_teencode", p_teencode},
          {"p_repeat_suffix", p_repeat_suffix}, {"p_typo", p_typo},
          {"p_unmark", p_unmark},         {"p_diacritic_char", p_diacritic_char},
          {"rng_seed", rng_seed}};
}

CorruptionConfig CorruptionConfig::from_json(const nlohmann::json& j) {
  CorruptionConfig c;
  c.p_abbrev = j.value("p_abbrev", c.p_abbrev);
  c.p_teencode = j.value("p_teencode", c.p_teencode);
  c.p_repeat_suffix = j.value("p_repeat_suffix", c.p_repeat_suffix);
  c.p_typo = j.value("p_typo", c.p_typo);
  c.p_unmark = j.value("p_unmark", c.p_unmark);
  c.p_diacritic_char = j.value("p_diacritic_char", c.p_diacritic_char);
  c.rng_seed = j.value("rng_seed", c.rng_seed);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Operations

Words case_fold_and_separate(const std::string& text) {
  using utf8::CharClass;
  Words out;
  std::u32string current;
  CharClass current_class = CharClass::kSpace;
  auto flush = [&] {
    if (!current.empty()) out.push_back(utf8::encode(current));
    current.clear();
    current_class = CharClass::kSpace;
  };
  for (char32_t raw : utf8::decode(text)) {
    const char32_t cp = utf8::to_lower(raw);
    const CharClass cls = utf8::classify(cp);
    switch (cls) {
      case CharClass::kSpace:
        flush();
        break;
      case CharClass::kJoiner:
        // Variation selectors, ZWJ and skin tones stay with their emoji.
        if (current_class == CharClass::kEmoji) {
          current.push_back(cp);
        } else {
          if (current_class != CharClass::kPunct) flush();
          current.push_back(cp);
          current_class = CharClass::kPunct;
        }
        break;
      case CharClass::kEmoji:
        if (!(current_class == CharClass::kEmoji && !current.empty() && current.back() == 0x200D)) {
          flush();
        }
        current.push_back(cp);
        current_class = CharClass::kEmoji;
        break;
      case CharClass::kWord:
      case CharClass::kPunct:
        if (current_class != cls) flush();
        current.push_back(cp);
        current_class = cls;
        break;
    }
  }
  flush();
  return out;
}

bool is_punctuation(const std::string& word) {
  if (word.empty()) return false;
  for (char32_t cp : utf8::decode(word)) {
    if (utf8::classify(cp) == utf8::CharClass::kWord) return false;
  }
  return true;
}

std::string strip_diacritics(const std::string& word, double proportion, const Lexicon& lexicon,
                             Rng& rng) {
  if (proportion <= 0.0) return word;
  auto cps = utf8::decode(word);
  for (auto& cp : cps) {
    if (!lexicon.is_marked(cp)) continue;
    if (proportion >= 1.0 || uniform01(rng) < proportion) cp = lexicon.base_of(cp);
  }
  return utf8::encode(cps);
}

namespace {

std::string corrupt_word(const std::string& word, const CorruptionConfig& config,
                         const Lexicon& lexicon, Rng& rng) {
  const Applicability app = applicable(word, lexicon);
  auto fires = [&](bool ok, double p) { return ok && p > 0.0 && uniform01(rng) < p; };
  auto pick = [&](const Words& forms) {
    return forms[draw_int(rng, 0, static_cast<int>(forms.size()) - 1)];
  };
  std::string out = word;
  if (fires(app.abbrev, config.p_abbrev)) {
    out = pick(lexicon.abbreviations_of(word));
  } else if (fires(app.teencode, config.p_teencode)) {
    out = pick(lexicon.teencodes_of(word));
  } else if (fires(app.repeat, config.p_repeat_suffix)) {
    auto cps = utf8::decode(word);
    const int extra = draw_int(rng, 1, 3);
    cps.append(static_cast<std::size_t>(extra), cps.back());
    out = utf8::encode(cps);
  } else if (fires(app.typo, config.p_typo)) {
    out = apply_typo(word, rng);
  } else if (fires(app.unmark, config.p_unmark)) {
    out = strip_diacritics(word, 1.0, lexicon, rng);
  }
  if (config.p_diacritic_char > 0.0) out = strip_diacritics(out, config.p_diacritic_char, lexicon, rng);
  return out;
}

}  // namespace

WordPair corrupt_sentence(const Words& words, const CorruptionConfig& config,
                          const Lexicon& lexicon, Rng& rng) {
  Words source;
  source.reserve(words.size());
  for (const auto& w : words) {
    if (is_punctuation(w)) {
      source.push_back(w);
      continue;
    }
    if (!lexicon.contains(w)) throw UnknownWord(w);
    source.push_back(corrupt_word(w, config, lexicon, rng));
  }
  return WordPair(std::move(source), words);
}

std::vector<WordPair> augment_with_diacritic_removal(const std::vector<WordPair>& dataset,
                                                     double p, const Lexicon& lexicon, Rng& rng) {
  if (dataset.empty()) throw EmptyDataset();
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("diacritic proportion must lie in [0, 1]");
  std::vector<WordPair> out = dataset;
  out.reserve(2 * dataset.size());
  for (const auto& pair : dataset) {
    Words stripped;
    stripped.reserve(pair.size());
    for (const auto& w : pair.source()) stripped.push_back(strip_diacritics(w, p, lexicon, rng));
    out.emplace_back(std::move(stripped), pair.target());
  }
  return out;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& ratios) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9 || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0) {
    throw ConfigError("split ratios must be nonnegative and sum to 1");
  }
  const auto dev = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[1]));
  const auto test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[2]));
  const std::size_t rest = dev + test > n ? 0 : n - dev - test;
  return {rest, std::min(dev, n), n - rest - std::min(dev, n)};
}

// ---------------------------------------------------------------------------
// Sentence generation

SentenceGenerator::SentenceGenerator(const Lexicon& lexicon, SentenceConfig config)
    : lexicon_(&lexicon), config_(config) {
  const auto& words = lexicon.canonical_words();
  if (words.empty()) throw EmptyDataset();
  if (config_.min_words < 1 || config_.max_words < config_.min_words ||
      config_.mean_words < static_cast<double>(config_.min_words)) {
    throw ConfigError("sentence length settings are inconsistent");
  }
  probs_.resize(words.size());
  double z = 0.0;
  for (std::size_t r = 0; r < words.size(); ++r) {
    probs_[r] = 1.0 / std::pow(static_cast<double>(r + 1), config_.zipf_exponent);
    z += probs_[r];
  }
  double acc = 0.0;
  for (auto& p : probs_) {
    p /= z;
    acc += p;
    cumulative_.push_back(acc);
  }
}

Words SentenceGenerator::sample(Rng& rng) const {
  const double lambda = config_.mean_words - static_cast<double>(config_.min_words);
  std::size_t n = config_.min_words;
  if (lambda > 0.0) n += static_cast<std::size_t>(std::poisson_distribution<int>(lambda)(rng));
  n = std::min(config_.max_words, n);
  const auto& vocab = lexicon_->canonical_words();
  Words out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && uniform01(rng) < config_.p_inner_punct) {
      out.push_back(kInnerPunct[draw_int(rng, 0, static_cast<int>(kInnerPunct.size()) - 1)]);
    }
    const double u = uniform01(rng);
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    const auto rank = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()),
                                            vocab.size() - 1);
    out.push_back(vocab[rank]);
  }
  if (uniform01(rng) < config_.p_final_punct) {
    out.push_back(kFinalPunct[draw_int(rng, 0, static_cast<int>(kFinalPunct.size()) - 1)]);
  }
  return out;
}

double SentenceGenerator::expected_word_share() const {
  // E[n] under the clamped Poisson length model.
  const double lambda = config_.mean_words - static_cast<double>(config_.min_words);
  const std::size_t cap = config_.max_words - config_.min_words;
  double pmf = std::exp(-lambda);
  double mean_extra = 0.0;
  double mass = 0.0;
  for (std::size_t k = 0; k < cap; ++k) {
    mean_extra += static_cast<double>(k) * pmf;
    mass += pmf;
    pmf *= lambda / static_cast<double>(k + 1);
  }
  mean_extra += static_cast<double>(cap) * (1.0 - mass);
  const double n = static_cast<double>(config_.min_words) + mean_extra;
  const double punct = (n - 1.0) * config_.p_inner_punct + config_.p_final_punct;
  return n / (n + punct);
}

double corruption_probability(const std::string& word, const CorruptionConfig& config,
                              const Lexicon& lexicon) {
  const Applicability app = applicable(word, lexicon);
  double untouched = 1.0;
  double p = 0.0;
  for (auto [ok, prob] : {std::pair{app.abbrev, config.p_abbrev},
                          std::pair{app.teencode, config.p_teencode},
                          std::pair{app.repeat, config.p_repeat_suffix},
                          std::pair{app.typo, config.p_typo},
                          std::pair{app.unmark, config.p_unmark}}) {
    if (!ok) continue;
    p += untouched * prob;
    untouched *= 1.0 - prob;
  }
  if (config.p_diacritic_char > 0.0) {
    // A word left alone can still change through character stripping.
    std::size_t marked = 0;
    for (char32_t cp : utf8::decode(word)) marked += lexicon.is_marked(cp) ? 1 : 0;
    const double any = 1.0 - std::pow(1.0 - config.p_diacritic_char, static_cast<double>(marked));
    p += untouched * any;
  }
  return p;
}

double expected_nsw_rate(const Lexicon& lexicon, const SentenceGenerator& generator,
                         const CorruptionConfig& config) {
  const auto& words = lexicon.canonical_words();
  double per_word = 0.0;
  for (std::size_t r = 0; r < words.size(); ++r) {
    per_word += generator.word_probability(r) * corruption_probability(words[r], config, lexicon);
  }
  return per_word * generator.expected_word_share();
}

}  // namespace lexnorm
