#include "lexnorm/orchestrator.hpp"

#include <chrono>

#include "lexnorm/audit.hpp"
#include "lexnorm/errors.hpp"

namespace lexnorm {

namespace {

// Stream tags for make_rng; each phase of each iteration draws independently.
enum Tag : std::uint64_t {
  kTagSplit = 1,
  kTagAugment,
  kTagInit,
  kTagStep1,
  kTagDownsample,
  kTagRanInit,
  kTagRan,
  kTagSoft,
  kTagFinetune,
  kTagSelfTrain,
  kTagRanLabeled,
};

constexpr std::size_t kChunk = 64;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Writes `phrase` into `span` padded with <space>; false when it does not fit.
bool fill_span_vote(std::vector<TokenVote>& votes, const WordSpan& span, const std::string& phrase,
                    const Vocabulary& vocab) {
  WeakPrediction p{RuleId::kRegex, 0, phrase};
  std::vector<TokenVote> local;
  try {
    local = expand_to_subwords({p}, {WordSpan{0, span.size()}}, vocab);
  } catch (const SpanOverflow&) {
    return false;
  }
  for (std::size_t k = 0; k < span.size(); ++k) votes[span.begin + k] = local[k];
  return true;
}

const std::optional<Words>& column_of(const LabeledRow& row, int rule) {
  return rule == static_cast<int>(RuleId::kRegex) ? row.regex_rule : row.dict_rule;
}

const std::optional<Words>& column_of(const UnlabeledRow& row, int rule) {
  return rule == static_cast<int>(RuleId::kRegex) ? row.regex_rule : row.dict_rule;
}

IterationRecord make_record(int iteration, const RunConfig& config, const StudentModel& student,
                            const PreparedData& data, std::chrono::steady_clock::time_point t0) {
  IterationRecord rec;
  rec.iteration = iteration;
  rec.regime = to_string(config.regime);
  rec.dev = evaluate_rows(student, data.vocab, data.dev);
  rec.seconds = seconds_since(t0);
  return rec;
}

void weak_supervision_iteration(const RunConfig& config, const PreparedData& data, RunState& state, int it) {
  const auto t0 = std::chrono::steady_clock::now();
  StudentModel& student = state.student;
  // Step 2: sample D_pseudo, lay it out, and collect p and h.
  Rng ds_rng = make_rng(config.seed, {kTagDownsample, static_cast<std::uint64_t>(it)});
  const auto pseudo_rows = downsample(data.unlabeled, config.n_downsample, ds_rng);
  const auto layouts = build_pseudo_layouts(student, data.vocab, pseudo_rows);
  std::vector<TokenIds> pseudo_inputs;
  std::vector<std::array<std::vector<TokenVote>, kNumRules>> pseudo_votes;
  for (const auto& l : layouts) {
    pseudo_inputs.push_back(l.source_ids);
    pseudo_votes.push_back(l.votes);
  }
  std::vector<RanInstance> pseudo = make_instances(student, pseudo_inputs, pseudo_votes, nullptr);

  // Step 3: teacher on D_pseudo (entropy) then D_L (cross-entropy).
  Rng lab_rng = make_rng(config.seed, {kTagRanLabeled, static_cast<std::uint64_t>(it)});
  std::vector<std::size_t> all(data.train.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto picked = downsample(all, std::min(config.ran_labeled_max, all.size()), lab_rng);
  std::vector<TokenIds> lab_inputs, lab_gold;
  std::vector<std::array<std::vector<TokenVote>, kNumRules>> lab_votes;
  for (std::size_t i : picked) {
    const AlignedExample& ex = data.train_aligned[i];
    lab_inputs.push_back(ex.source_ids);
    lab_gold.push_back(ex.target_ids);
    lab_votes.push_back(gold_layout_votes(data.train[i], ex, data.vocab));
  }
  std::vector<RanInstance> labeled = make_instances(student, lab_inputs, lab_votes, &lab_gold);
  if (!state.ran) {
    Rng init = make_rng(config.seed, {kTagRanInit});
    state.ran.emplace(config.ran, config.student.embed_dim, init);
  }
  Rng ran_rng = make_rng(config.seed, {kTagRan, static_cast<std::uint64_t>(it)});
  const RanTrainStats ran_stats = train_ran(*state.ran, pseudo, labeled, ran_rng);
  labeled.clear();
  labeled.shrink_to_fit();

  const std::vector<SoftLabel> q = teacher_label(*state.ran, pseudo);
  std::array<double, kNumSources> attn_sum{};
  std::array<std::size_t, kNumSources> attn_n{};
  std::size_t fired_tokens = 0;
  for (const auto& inst : pseudo) {
    const RanWeights w = state.ran->attention(inst.h);
    for (int j = 0; j < kNumRules; ++j) {
      if (inst.votes[static_cast<std::size_t>(j)]) {
        attn_sum[static_cast<std::size_t>(j)] += w.rule[static_cast<std::size_t>(j)];
        ++attn_n[static_cast<std::size_t>(j)];
      }
    }
    attn_sum[2] += w.student;
    ++attn_n[2];
    if (inst.fired() > 0) ++fired_tokens;
  }
  const std::size_t n_pseudo_tokens = pseudo.size();
  pseudo.clear();
  pseudo.shrink_to_fit();

  // Step 4: student on soft labels.
  std::vector<SoftExample> soft;
  std::size_t row = 0;
  for (const auto& ids : pseudo_inputs) {
    SoftExample ex;
    ex.source_ids = ids;
    ex.q.resize(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(data.vocab.size()));
    for (std::size_t t = 0; t < ids.size(); ++t) ex.q.row(static_cast<Eigen::Index>(t)) = q[row++].transpose();
    if (config.pseudo_mask_targets) ex.n_mask = n_mask_labels(ids);
    soft.push_back(std::move(ex));
  }
  Rng soft_rng = make_rng(config.seed, {kTagSoft, static_cast<std::uint64_t>(it)});
  const auto soft_stats = train_on_soft_labels(student, soft, config.epochs_pseudo, soft_rng);
  soft.clear();

  // Step 5: fine-tune on D_L.
  Rng ft_rng = make_rng(config.seed, {kTagFinetune, static_cast<std::uint64_t>(it)});
  fine_tune(student, data.train_aligned, config.epochs_finetune, ft_rng);

  IterationRecord rec = make_record(it, config, student, data, t0);
  nlohmann::json attn = nlohmann::json::object();
  const char* names[kNumSources] = {"regex", "dictionary", "student"};
  for (int j = 0; j < kNumSources; ++j) {
    const auto n = attn_n[static_cast<std::size_t>(j)];
    attn[names[j]] = n ? attn_sum[static_cast<std::size_t>(j)] / static_cast<double>(n) : 0.0;
  }
  rec.details = {{"pseudo_sentences", pseudo_rows.size()},
                 {"pseudo_tokens", n_pseudo_tokens},
                 {"rule_fired_tokens", fired_tokens},
                 {"ran_unsup_loss", ran_stats.unsup_loss},
                 {"ran_sup_loss", ran_stats.sup_loss},
                 {"mean_attention", attn},
                 {"soft_label_loss", soft_stats.empty() ? 0.0 : soft_stats.back().loss}};
  state.history.push_back(std::move(rec));
}

void self_training_iteration(const RunConfig& config, const PreparedData& data, RunState& state, int it) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng ds_rng = make_rng(config.seed, {kTagDownsample, static_cast<std::uint64_t>(it)});
  const auto slice = downsample(data.unlabeled, config.n_downsample, ds_rng);
  std::vector<Words> inputs;
  for (const auto& r : slice) inputs.push_back(r.input);
  const auto preds = normalize_batch(state.student, data.vocab, inputs, kChunk);
  const std::size_t before = state.pool_inputs.size();
  state.pool_inputs.insert(state.pool_inputs.end(), inputs.begin(), inputs.end());
  state.pool_outputs.insert(state.pool_outputs.end(), preds.begin(), preds.end());

  std::vector<AlignedExample> pool = data.train_aligned;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < state.pool_inputs.size(); ++i) {
    try {
      pool.push_back(align_pair(WordPair(state.pool_inputs[i], state.pool_outputs[i]), data.vocab,
                                config.student.max_n_mask));
    } catch (const DataError&) {
      ++skipped;
    }
  }
  Rng st_rng = make_rng(config.seed, {kTagSelfTrain, static_cast<std::uint64_t>(it)});
  train_supervised(state.student, pool, config.epochs_pseudo, st_rng);

  IterationRecord rec = make_record(it, config, state.student, data, t0);
  rec.details = {{"pool_added", state.pool_inputs.size() - before},
                 {"pool_size", state.pool_inputs.size()},
                 {"unalignable_pseudo_labels", skipped}};
  state.history.push_back(std::move(rec));
}

}  // namespace

nlohmann::json IterationRecord::to_json() const {
  return {{"iteration", iteration}, {"regime", regime}, {"dev", dev.to_json()}, {"details", details}};
}

IterationRecord IterationRecord::from_json(const nlohmann::json& j) {
  IterationRecord r;
  r.iteration = j.at("iteration").get<int>();
  r.regime = j.at("regime").get<std::string>();
  r.dev = MetricsReport::from_json(j.at("dev"));
  r.details = j.at("details");
  return r;
}

PreparedData prepare_data(const std::vector<LabeledRow>& labeled, std::vector<UnlabeledRow> unlabeled,
                          const RuleSet& rules, const RunConfig& config, const Lexicon* lexicon) {
  config.validate();
  if (labeled.empty()) throw EmptyDataset();
  PreparedData data;
  Rng split_rng = make_rng(config.split_seed, {kTagSplit});
  auto split = split_dataset(labeled, {0.8, 0.1, 0.1}, split_rng);
  std::vector<LabeledRow> train = std::move(split.train);
  if (config.p_diacritic > 0.0) {
    if (!lexicon) throw ConfigError("diacritic augmentation needs the lexicon");
    std::vector<WordPair> pairs;
    for (const auto& r : train) pairs.push_back(r.pair());
    Rng aug_rng = make_rng(config.split_seed, {kTagAugment});
    train.clear();
    for (const auto& p : augment_with_diacritic_removal(pairs, config.p_diacritic, *lexicon, aug_rng)) {
      train.push_back(LabeledRow::from_pair(p));
    }
  }
  data.dev = std::move(split.dev);
  data.test = std::move(split.test);
  precompute_rule_columns(train, rules);
  precompute_rule_columns(data.dev, rules);
  precompute_rule_columns(data.test, rules);
  precompute_rule_columns(unlabeled, rules);

  std::vector<Words> corpus;
  for (const auto& r : train) {
    corpus.push_back(r.input);
    corpus.push_back(r.output);
  }
  for (const auto& r : unlabeled) corpus.push_back(r.input);
  data.vocab = train_subword_vocab(corpus, config.vocab_size);

  for (auto& r : train) {
    try {
      data.train_aligned.push_back(align_pair(r.pair(), data.vocab, config.student.max_n_mask));
      data.train.push_back(std::move(r));
    } catch (const MaskOverflow&) {
      ++data.dropped_overflow;
    }
  }
  if (data.train.empty()) throw EmptyDataset();
  data.unlabeled = std::move(unlabeled);
  return data;
}

MetricsReport evaluate_rows(const StudentModel& model, const Vocabulary& vocab, const std::vector<LabeledRow>& rows) {
  std::vector<Words> src, tgt;
  for (const auto& r : rows) {
    src.push_back(r.input);
    tgt.push_back(r.output);
  }
  return evaluate(src, tgt, normalize_batch(model, vocab, src, kChunk));
}

RunState train_step1(const RunConfig& config, const PreparedData& data) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng init = make_rng(config.seed, {kTagInit});
  StudentConfig sc = config.student;
  sc.seed = config.seed;
  RunState state{0, StudentModel(sc, data.vocab.size(), init), std::nullopt, {}, {}, {}};
  Rng rng = make_rng(config.seed, {kTagStep1});
  const auto epochs = train_supervised(state.student, data.train_aligned, config.epochs_student, rng);
  IterationRecord rec = make_record(0, config, state.student, data, t0);
  rec.regime = "step1";
  nlohmann::json losses = nlohmann::json::array();
  for (const auto& e : epochs) losses.push_back({{"loss", e.loss}, {"token_accuracy", e.token_accuracy}});
  rec.details = {{"epochs", losses}, {"dropped_overflow", data.dropped_overflow}};
  state.history.push_back(std::move(rec));
  return state;
}

RunState run_iterations(const RunConfig& config, const PreparedData& data, RunState state,
                        const IterationHook& on_iteration) {
  if (config.regime == Regime::kStudent) return state;
  for (int it = state.completed_iterations + 1; it <= config.iterations; ++it) {
    if (config.regime == Regime::kWeakSupervision) {
      weak_supervision_iteration(config, data, state, it);
    } else {
      self_training_iteration(config, data, state, it);
    }
    state.completed_iterations = it;
    if (on_iteration) on_iteration(state);
  }
  return state;
}

RunResult run_regime(const RunConfig& config, const PreparedData& data, RunState start,
                     const IterationHook& on_iteration) {
  RunResult result;
  result.state = run_iterations(config, data, std::move(start), on_iteration);
  result.dev = evaluate_rows(result.state.student, data.vocab, data.dev);
  result.test = evaluate_rows(result.state.student, data.vocab, data.test);
  return result;
}

RunResult run_student_baseline(const RunConfig& config, const PreparedData& data) {
  RunConfig c = config;
  c.regime = Regime::kStudent;
  return run_regime(c, data, train_step1(c, data));
}

RunResult run_self_training(const RunConfig& config, const PreparedData& data) {
  RunConfig c = config;
  c.regime = Regime::kSelfTraining;
  return run_regime(c, data, train_step1(c, data));
}

RunResult run_weak_supervision(const RunConfig& config, const PreparedData& data) {
  RunConfig c = config;
  c.regime = Regime::kWeakSupervision;
  return run_regime(c, data, train_step1(c, data));
}

std::vector<PseudoLayout> build_pseudo_layouts(const StudentModel& model, const Vocabulary& vocab,
                                               const std::vector<UnlabeledRow>& rows) {
  std::vector<PseudoLayout> out;
  out.reserve(rows.size());
  const int cap = model.config().max_n_mask;
  const std::size_t max_len = static_cast<std::size_t>(model.config().max_len);
  for (std::size_t start = 0; start < rows.size(); start += kChunk) {
    const std::size_t stop = std::min(rows.size(), start + kChunk);
    std::vector<std::vector<TokenIds>> word_tokens;
    std::vector<TokenIds> plain;
    for (std::size_t s = start; s < stop; ++s) {
      std::vector<TokenIds> per_word;
      TokenIds flat;
      for (const auto& w : rows[s].input) {
        per_word.push_back(vocab.tokenize_phrase(w));
        flat.insert(flat.end(), per_word.back().begin(), per_word.back().end());
      }
      word_tokens.push_back(std::move(per_word));
      plain.push_back(std::move(flat));
    }
    const StudentPrediction pred = model.predict(plain);
    for (std::size_t b = 0; b < plain.size(); ++b) {
      const UnlabeledRow& row = rows[start + b];
      std::vector<std::optional<TokenIds>> rule_ids[kNumRules];
      for (int j = 0; j < kNumRules; ++j) {
        rule_ids[j].resize(row.input.size());
        const auto& col = column_of(row, j);
        if (!col) continue;
        for (std::size_t w = 0; w < row.input.size(); ++w) {
          if ((*col)[w] != row.input[w]) rule_ids[j][w] = vocab.tokenize_phrase((*col)[w]);
        }
      }
      std::vector<int> extra(row.input.size(), 0);
      std::size_t t = 0;
      std::size_t total = 0;
      for (std::size_t w = 0; w < row.input.size(); ++w) {
        int predicted = 0;
        for (std::size_t k = 0; k < word_tokens[b][w].size(); ++k, ++t) {
          Eigen::Index best;
          pred.mask_probs.row(static_cast<Eigen::Index>(pred.offsets[b] + t)).maxCoeff(&best);
          predicted += static_cast<int>(best);
        }
        const int n_tok = static_cast<int>(word_tokens[b][w].size());
        int need = predicted;
        for (int j = 0; j < kNumRules; ++j) {
          if (rule_ids[j][w]) need = std::max(need, static_cast<int>(rule_ids[j][w]->size()) - n_tok);
        }
        extra[w] = std::min(need, cap);
        total += static_cast<std::size_t>(n_tok + extra[w]);
      }
      if (total > max_len) std::fill(extra.begin(), extra.end(), 0);
      PseudoLayout layout;
      for (std::size_t w = 0; w < row.input.size(); ++w) {
        const std::size_t begin = layout.source_ids.size();
        layout.source_ids.insert(layout.source_ids.end(), word_tokens[b][w].begin(), word_tokens[b][w].end());
        layout.source_ids.insert(layout.source_ids.end(), static_cast<std::size_t>(extra[w]), Vocabulary::kMask);
        layout.spans.push_back({begin, layout.source_ids.size()});
      }
      for (int j = 0; j < kNumRules; ++j) {
        auto& votes = layout.votes[static_cast<std::size_t>(j)];
        votes.assign(layout.source_ids.size(), std::nullopt);
        const auto& col = column_of(row, j);
        if (!col) continue;
        for (std::size_t w = 0; w < row.input.size(); ++w) {
          if (rule_ids[j][w]) fill_span_vote(votes, layout.spans[w], (*col)[w], vocab);
        }
      }
      out.push_back(std::move(layout));
    }
  }
  return out;
}

std::array<std::vector<TokenVote>, kNumRules> gold_layout_votes(const LabeledRow& row, const AlignedExample& ex,
                                                                const Vocabulary& vocab) {
  std::array<std::vector<TokenVote>, kNumRules> votes;
  for (int j = 0; j < kNumRules; ++j) {
    auto& v = votes[static_cast<std::size_t>(j)];
    v.assign(ex.size(), std::nullopt);
    const auto& col = column_of(row, j);
    if (!col) continue;
    for (const auto& p : predictions_from_column(static_cast<RuleId>(j), *col, row.input)) {
      if (!p.abstains()) fill_span_vote(v, ex.word_spans[p.word_index], *p.prediction, vocab);
    }
  }
  return votes;
}

std::vector<RanInstance> make_instances(const StudentModel& model, const std::vector<TokenIds>& inputs,
                                        const std::vector<std::array<std::vector<TokenVote>, kNumRules>>& votes,
                                        const std::vector<TokenIds>* gold) {
  std::vector<RanInstance> out;
  for (std::size_t start = 0; start < inputs.size(); start += kChunk) {
    const std::size_t stop = std::min(inputs.size(), start + kChunk);
    const std::vector<TokenIds> chunk(inputs.begin() + static_cast<std::ptrdiff_t>(start),
                                      inputs.begin() + static_cast<std::ptrdiff_t>(stop));
    const StudentPrediction pred = model.predict(chunk);
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      for (std::size_t t = 0; t < chunk[b].size(); ++t) {
        const Eigen::Index r = static_cast<Eigen::Index>(pred.offsets[b] + t);
        RanInstance inst;
        inst.h = pred.hidden.row(r).transpose();
        inst.p = pred.token_probs.row(r).transpose();
        for (int j = 0; j < kNumRules; ++j) {
          inst.votes[static_cast<std::size_t>(j)] = votes[start + b][static_cast<std::size_t>(j)][t];
        }
        if (gold) inst.gold = (*gold)[start + b][t];
        out.push_back(std::move(inst));
      }
    }
  }
  return out;
}

}  // namespace lexnorm
