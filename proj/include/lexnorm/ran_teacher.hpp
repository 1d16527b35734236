#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "lexnorm/optim.hpp"
#include "lexnorm/random.hpp"
#include "lexnorm/weak_rules.hpp"

namespace lexnorm {

inline constexpr int kNumRules = 2;  // heuristic sources: regex, dictionary

struct RanConfig {
  int rule_dim = 128;
  int hidden = 0;  // width of f's hidden layer; 0 means rule_dim
  double lr_max = 1e-2;
  double lr_min = 1e-5;
  double warmup_frac = 0.1;
  int epochs_unsup = 1;
  int epochs_sup = 1;
  int batch_size = 256;
  double grad_clip = 0.0;
  // Count the student among the fired sources when sizing the uniform slot.
  bool student_in_rule_count = false;
  std::uint64_t seed = 13;

  int hidden_width() const { return hidden > 0 ? hidden : rule_dim; }
  void validate() const;
  nlohmann::json to_json() const;
  static RanConfig from_json(const nlohmann::json& j);
};

// One token position seen by the teacher.
struct RanInstance {
  Vector h;                                 // student hidden state
  std::array<TokenVote, kNumRules> votes;   // one-hot class per fired rule
  Vector p;                                 // student distribution over K classes
  int gold = -1;                            // supervised target, -1 when unknown

  int fired() const;
  Eigen::Index classes() const { return p.size(); }
};

using SoftLabel = Vector;

struct RanWeights {
  std::array<double, kNumRules> rule{};
  double student = 0.0;
};

class RanModel {
 public:
  RanModel() = default;
  RanModel(const RanConfig& config, int input_dim, Rng& rng);

  const RanConfig& config() const { return config_; }
  RanConfig& mutable_config() { return config_; }
  int input_dim() const { return input_dim_; }

  std::vector<Matrix>& params() { return params_; }
  const std::vector<Matrix>& params() const { return params_; }
  const std::vector<ParamInfo>& param_info() const { return info_; }
  Adam& optimizer() { return adam_; }
  const Adam& optimizer() const { return adam_; }

  // Rows are rule ids 0 (regex), 1 (dictionary), 2 (student).
  const Matrix& rule_embeddings() const { return params_[4]; }
  Matrix& rule_embeddings() { return params_[4]; }

  // f(h), the projection of a hidden state into rule-embedding space.
  Vector project(const Vector& h) const;
  // sigma(f(h) . e_rule)
  double attention_weight(const Vector& h, RuleId rule) const;
  RanWeights attention(const Vector& h) const;

 private:
  RanConfig config_;
  int input_dim_ = 0;
  std::vector<Matrix> params_;  // w1, b1, w2, b2, rule embeddings
  std::vector<ParamInfo> info_;
  Adam adam_;
};

// Number of weight slots sharing the unit mass: fired rules, the student,
// and one more when the student is counted among the rules.
int weight_slots(const RanInstance& instance, bool student_in_rule_count);

// Convex mixture of fired one-hots, the student distribution, and the
// uniform distribution with the leftover weight.
SoftLabel aggregate(const RanInstance& instance, const RanWeights& weights, bool student_in_rule_count = false);

// Sum of entropies -sum_k q_k log q_k.
double unsup_loss(const std::vector<SoftLabel>& q);
// Sum of -log q_y.
double sup_loss(const std::vector<SoftLabel>& q, const std::vector<int>& gold);

enum class RanObjective { kEntropy, kCrossEntropy };

// Summed objective over `batch` evaluated through the attention network;
// gradients are added to `grads` when non-null.
double ran_objective(const RanModel& model, const std::vector<const RanInstance*>& batch, RanObjective objective,
                     std::vector<Matrix>* grads);

// Warmup to lr_max, then exponential decay reaching lr_min on the last step.
double ran_learning_rate(const RanConfig& config, long step, long total_steps);

struct RanTrainStats {
  std::vector<double> unsup_loss;  // mean per instance, one entry per epoch
  std::vector<double> sup_loss;
};

// Entropy phase on `pseudo`, then cross-entropy phase on `labeled`.
RanTrainStats train_ran(RanModel& model, const std::vector<RanInstance>& pseudo,
                        const std::vector<RanInstance>& labeled, Rng& rng);

std::vector<SoftLabel> teacher_label(const RanModel& model, const std::vector<RanInstance>& instances);

}  // namespace lexnorm
