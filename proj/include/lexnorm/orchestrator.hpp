#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lexnorm/config.hpp"
#include "lexnorm/dataset.hpp"
#include "lexnorm/metrics.hpp"
#include "lexnorm/ran_teacher.hpp"
#include "lexnorm/student.hpp"
#include "lexnorm/weak_rules.hpp"

namespace lexnorm {

// Everything the three regimes share: the split, the vocabulary, the aligned
// labeled training set and the unlabeled pool with its rule columns.
struct PreparedData {
  Vocabulary vocab;
  std::vector<LabeledRow> train;
  std::vector<LabeledRow> dev;
  std::vector<LabeledRow> test;
  std::vector<AlignedExample> train_aligned;
  std::vector<UnlabeledRow> unlabeled;
  std::size_t dropped_overflow = 0;  // labeled pairs that needed too many masks
};

// Splits D_L 8:1:1, augments the training part with diacritic-stripped
// copies when p_diacritic > 0, trains the vocabulary and fills rule columns.
PreparedData prepare_data(const std::vector<LabeledRow>& labeled, std::vector<UnlabeledRow> unlabeled,
                          const RuleSet& rules, const RunConfig& config, const Lexicon* lexicon);

// Uniform sample without replacement. Throws SampleTooLarge when n > |pool|.
template <typename T>
std::vector<T> downsample(const std::vector<T>& pool, std::size_t n, Rng& rng) {
  if (n > pool.size()) {
    throw SampleTooLarge("cannot sample " + std::to_string(n) + " of " + std::to_string(pool.size()) + " rows");
  }
  std::vector<std::size_t> idx(pool.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<T> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(pool[idx[i]]);
  return out;
}

struct IterationRecord {
  int iteration = 0;  // 0 is Step 1
  std::string regime;
  MetricsReport dev;
  double seconds = 0.0;
  nlohmann::json details = nlohmann::json::object();

  nlohmann::json to_json() const;
  static IterationRecord from_json(const nlohmann::json& j);
};

// Resumable position inside a run.
struct RunState {
  int completed_iterations = 0;
  StudentModel student;
  std::optional<RanModel> ran;
  // Self-training pool of hard pseudo-labels (input, prediction).
  std::vector<Words> pool_inputs;
  std::vector<Words> pool_outputs;
  std::vector<IterationRecord> history;
};

struct RunResult {
  RunState state;
  MetricsReport dev;
  MetricsReport test;
};

using IterationHook = std::function<void(const RunState&)>;

// Step 1: a fresh student trained on the labeled training set.
RunState train_step1(const RunConfig& config, const PreparedData& data);

// Runs the remaining iterations of the configured regime from `start`.
RunState run_iterations(const RunConfig& config, const PreparedData& data, RunState start,
                        const IterationHook& on_iteration = {});

// Continues from `start` (Step 1 output or a resumed state) up to
// config.iterations and evaluates on dev and test. The student regime ignores
// iterations.
RunResult run_regime(const RunConfig& config, const PreparedData& data, RunState start,
                     const IterationHook& on_iteration = {});

RunResult run_student_baseline(const RunConfig& config, const PreparedData& data);
RunResult run_self_training(const RunConfig& config, const PreparedData& data);
RunResult run_weak_supervision(const RunConfig& config, const PreparedData& data);

MetricsReport evaluate_rows(const StudentModel& model, const Vocabulary& vocab, const std::vector<LabeledRow>& rows);

// Token layout used for teacher instances on unlabeled text: predicted masks
// at span ends, widened to fit rule rewrites up to max_n_mask.
struct PseudoLayout {
  TokenIds source_ids;
  std::vector<WordSpan> spans;
  std::array<std::vector<TokenVote>, kNumRules> votes;
};

std::vector<PseudoLayout> build_pseudo_layouts(const StudentModel& model, const Vocabulary& vocab,
                                               const std::vector<UnlabeledRow>& rows);

// Rule votes over a gold alignment; rules whose rewrite overflows its span
// abstain there.
std::array<std::vector<TokenVote>, kNumRules> gold_layout_votes(const LabeledRow& row, const AlignedExample& ex,
                                                                const Vocabulary& vocab);

// Teacher instances for every token of the given layouts; `gold` supplies
// per-sentence target ids when present.
std::vector<RanInstance> make_instances(const StudentModel& model, const std::vector<TokenIds>& inputs,
                                        const std::vector<std::array<std::vector<TokenVote>, kNumRules>>& votes,
                                        const std::vector<TokenIds>* gold);

}  // namespace lexnorm
