#include "lexnorm/align_tok.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "lexnorm/dataset.hpp"
#include "lexnorm/utf8.hpp"

namespace lexnorm {

namespace {

const std::vector<std::string> kSpecialUnits = {"<pad>", "<unk>", "<mask>", "<space>"};

bool starts_with_marker(const std::string& unit) {
  return unit.size() >= kWordMarker.size() && unit.compare(0, kWordMarker.size(), kWordMarker) == 0;
}

std::vector<std::string> split_spaces(const std::string& phrase) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : phrase) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary Vocabulary::from_units(const std::vector<std::string>& units) {
  Vocabulary v;
  v.units_ = kSpecialUnits;
  for (const auto& u : units) {
    if (u.empty()) throw DataError("vocabulary: empty unit");
    v.units_.push_back(u);
  }
  std::uint64_t h = fnv1a("lexnorm-vocab-v1");
  for (std::size_t i = 0; i < v.units_.size(); ++i) {
    const auto& u = v.units_[i];
    if (!v.index_.emplace(u, static_cast<TokenId>(i)).second) {
      throw DataError("vocabulary: duplicate unit '" + u + "'");
    }
    h = fnv1a(u, h);
    h = fnv1a(std::string_view("\0", 1), h);
    if (i >= kNumSpecials) {
      std::string_view body(u);
      if (starts_with_marker(u)) body.remove_prefix(kWordMarker.size());
      v.max_unit_chars_ = std::max(v.max_unit_chars_, utf8::length(body));
    }
  }
  v.hash_ = h;
  return v;
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  try {
    const auto all = j.at("units").get<std::vector<std::string>>();
    if (all.size() < kNumSpecials || !std::equal(kSpecialUnits.begin(), kSpecialUnits.end(), all.begin())) {
      throw DataError("vocabulary: special units must come first in the fixed order");
    }
    return from_units(std::vector<std::string>(all.begin() + kNumSpecials, all.end()));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("vocabulary: ") + e.what());
  }
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("vocabulary " + path + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json Vocabulary::to_json() const {
  return {{"format", "lexnorm-vocab"},
          {"version", 1},
          {"specials", {{"pad", kPad}, {"unk", kUnk}, {"mask", kMask}, {"space", kSpace}}},
          {"word_marker", std::string(kWordMarker)},
          {"units", units_}};
}

void Vocabulary::save(const std::string& path) const { write_file_atomic(path, to_json().dump(1) + "\n"); }

TokenId Vocabulary::id_of(const std::string& unit) const {
  auto it = index_.find(unit);
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::is_word_start(TokenId id) const {
  return !is_special(id) && starts_with_marker(unit(id));
}

TokenIds Vocabulary::tokenize_word(const std::string& word) const {
  const auto cps = utf8::decode(word);
  TokenIds out;
  std::size_t pos = 0;
  while (pos < cps.size()) {
    const std::string prefix = pos == 0 ? std::string(kWordMarker) : std::string();
    const std::size_t longest = std::min(max_unit_chars_, cps.size() - pos);
    bool found = false;
    for (std::size_t len = longest; len >= 1; --len) {
      auto it = index_.find(prefix + utf8::encode(std::u32string_view(cps).substr(pos, len)));
      if (it != index_.end() && it->second >= static_cast<TokenId>(kNumSpecials)) {
        out.push_back(it->second);
        pos += len;
        found = true;
        break;
      }
    }
    if (!found) {
      out.push_back(kUnk);
      ++pos;
    }
  }
  return out;
}

TokenIds Vocabulary::tokenize_phrase(const std::string& phrase) const {
  TokenIds out;
  for (const auto& piece : split_spaces(phrase)) {
    const auto ids = tokenize_word(piece);
    out.insert(out.end(), ids.begin(), ids.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

Vocabulary train_subword_vocab(const std::vector<Words>& corpus, std::size_t target_size) {
  std::map<std::string, long> counts;
  for (const auto& sentence : corpus) {
    for (const auto& w : sentence) {
      for (auto& piece : split_spaces(w)) ++counts[piece];
    }
  }
  if (counts.empty()) throw EmptyDataset();

  struct Type {
    std::vector<std::string> symbols;
    long count;
  };
  std::vector<Type> types;
  std::set<std::string> alphabet;
  for (const auto& [word, n] : counts) {
    Type t{{}, n};
    const auto cps = utf8::decode(word);
    for (std::size_t i = 0; i < cps.size(); ++i) {
      const std::string ch = utf8::encode(cps[i]);
      alphabet.insert(ch);
      alphabet.insert(std::string(kWordMarker) + ch);
      t.symbols.push_back(i == 0 ? std::string(kWordMarker) + ch : ch);
    }
    types.push_back(std::move(t));
  }
  if (target_size < alphabet.size() + Vocabulary::kNumSpecials) {
    throw TargetTooSmall("target vocabulary size " + std::to_string(target_size) +
                         " is below alphabet size " + std::to_string(alphabet.size()) + " + 4 specials");
  }

  std::vector<std::string> units(alphabet.begin(), alphabet.end());
  std::set<std::string> known(alphabet.begin(), alphabet.end());
  while (units.size() + Vocabulary::kNumSpecials < target_size) {
    std::map<std::pair<std::string, std::string>, long> pairs;
    for (const auto& t : types) {
      for (std::size_t i = 0; i + 1 < t.symbols.size(); ++i) pairs[{t.symbols[i], t.symbols[i + 1]}] += t.count;
    }
    if (pairs.empty()) break;
    // Highest count wins; ties go to the lexicographically first pair.
    auto best = pairs.begin();
    for (auto it = pairs.begin(); it != pairs.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    const auto [left, right] = best->first;
    const std::string merged = left + right;
    for (auto& t : types) {
      std::vector<std::string> next;
      next.reserve(t.symbols.size());
      for (std::size_t i = 0; i < t.symbols.size(); ++i) {
        if (i + 1 < t.symbols.size() && t.symbols[i] == left && t.symbols[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(t.symbols[i]);
        }
      }
      t.symbols = std::move(next);
    }
    if (known.insert(merged).second) units.push_back(merged);
  }
  return Vocabulary::from_units(units);
}

// ---------------------------------------------------------------------------
// Alignment

AlignedExample align_pair(const WordPair& pair, const Vocabulary& vocab, int max_n_mask) {
  AlignedExample ex;
  for (std::size_t w = 0; w < pair.size(); ++w) {
    TokenIds src = vocab.tokenize_phrase(pair.source()[w]);
    TokenIds tgt = vocab.tokenize_phrase(pair.target()[w]);
    const std::size_t begin = ex.source_ids.size();
    if (src.size() < tgt.size()) {
      const std::size_t masks = tgt.size() - src.size();
      if (static_cast<int>(masks) > max_n_mask) {
        throw MaskOverflow("'" + pair.source()[w] + "' -> '" + pair.target()[w] + "' needs " +
                           std::to_string(masks) + " masks, limit is " + std::to_string(max_n_mask));
      }
      src.insert(src.end(), masks, Vocabulary::kMask);
    } else {
      tgt.insert(tgt.end(), src.size() - tgt.size(), Vocabulary::kSpace);
    }
    ex.source_ids.insert(ex.source_ids.end(), src.begin(), src.end());
    ex.target_ids.insert(ex.target_ids.end(), tgt.begin(), tgt.end());
    ex.word_spans.push_back({begin, ex.source_ids.size()});
  }
  ex.n_mask = n_mask_labels(ex.source_ids);
  return ex;
}

std::vector<int> n_mask_labels(const TokenIds& source_ids) {
  std::vector<int> labels(source_ids.size(), 0);
  for (std::size_t i = 0; i < source_ids.size(); ++i) {
    if (source_ids[i] == Vocabulary::kMask) {
      labels[i] = kIgnore;
      continue;
    }
    int n = 0;
    for (std::size_t k = i + 1; k < source_ids.size() && source_ids[k] == Vocabulary::kMask; ++k) ++n;
    labels[i] = n;
  }
  return labels;
}

TokenIds insert_masks(const TokenIds& tokens, const std::vector<int>& n_mask) {
  if (tokens.size() != n_mask.size()) throw LengthMismatch("insert_masks: size mismatch");
  TokenIds out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out.push_back(tokens[i]);
    out.insert(out.end(), static_cast<std::size_t>(std::max(0, n_mask[i])), Vocabulary::kMask);
  }
  return out;
}

Words detokenize(const TokenIds& ids, const Vocabulary& vocab, bool strict) {
  Words out;
  bool open = false;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const TokenId id = ids[i];
    if (id == Vocabulary::kSpace || id == Vocabulary::kPad) continue;
    if (id == Vocabulary::kMask || id == Vocabulary::kUnk) {
      if (!strict) continue;
      if (id == Vocabulary::kMask) throw DataError("detokenize: <mask> in target-side ids");
      if (!open) {
        out.emplace_back();
        open = true;
      }
      out.back() += "\xEF\xBF\xBD";
      continue;
    }
    const std::string& u = vocab.unit(id);
    if (starts_with_marker(u)) {
      out.push_back(u.substr(kWordMarker.size()));
      open = true;
    } else if (open) {
      out.back() += u;
    } else if (strict) {
      throw DanglingContinuation("continuation unit '" + u + "' at position " + std::to_string(i) +
                                 " does not follow a word start");
    } else {
      out.push_back(u);
      open = true;
    }
  }
  return out;
}

}  // namespace lexnorm
