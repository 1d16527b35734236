#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lexnorm/align_tok.hpp"
#include "lexnorm/optim.hpp"
#include "lexnorm/random.hpp"

namespace lexnorm {

enum ParamGroup : int { kGroupEmbeddings = 0, kGroupEncoder = 1, kGroupHeads = 2 };

struct StudentConfig {
  int embed_dim = 64;  // d_o
  int ff_dim = 128;
  int layers = 2;
  int max_len = 256;
  int max_n_mask = 3;
  double lr_embeddings = 5e-3;
  double lr_encoder = 2e-3;
  double lr_heads = 1e-3;
  double grad_clip = 5.0;
  double mask_loss_weight = 1.0;
  int epochs = 5;
  int batch_size = 32;
  std::uint64_t seed = 13;

  void validate() const;
  nlohmann::json to_json() const;
  static StudentConfig from_json(const nlohmann::json& j);
};

// Logits and cached activations of one batch. Sentences are concatenated
// row-wise; sentence s occupies rows [offsets[s], offsets[s+1]).
struct StudentForward {
  std::vector<std::size_t> offsets;
  TokenIds ids;
  struct Layer {
    Matrix x_in, q, k, v, ctx, x_mid, pre_ff, x_out;
    std::vector<Matrix> attn;
  };
  std::vector<Layer> layers;
  Matrix hidden;
  Matrix token_logits;
  Matrix mask_logits;

  std::size_t sentences() const { return offsets.size() - 1; }
  std::size_t length(std::size_t s) const { return offsets[s + 1] - offsets[s]; }
};

// Per-token distributions and last-layer states for a batch.
struct StudentPrediction {
  std::vector<std::size_t> offsets;
  Matrix hidden;
  Matrix token_probs;
  Matrix mask_probs;
};

struct SoftExample {
  TokenIds source_ids;
  Matrix q;                 // one row per token, a distribution over the vocabulary
  std::vector<int> n_mask;  // optional mask-count targets, kIgnore to skip
};

struct LossWeights {
  double token = 1.0;
  double mask = 1.0;
};

struct EpochStats {
  double loss = 0.0;
  double token_accuracy = 0.0;
};

class StudentModel {
 public:
  StudentModel() = default;
  // Seeded init. The <space> embedding row and head column are redrawn from
  // the per-coordinate mean/std of the remaining rows.
  StudentModel(const StudentConfig& config, std::size_t vocab_size, Rng& rng);

  const StudentConfig& config() const { return config_; }
  StudentConfig& mutable_config() { return config_; }
  std::size_t vocab_size() const { return vocab_size_; }
  int mask_classes() const { return config_.max_n_mask + 1; }

  std::vector<Matrix>& params() { return params_; }
  const std::vector<Matrix>& params() const { return params_; }
  const std::vector<ParamInfo>& param_info() const { return info_; }
  Adam& optimizer() { return adam_; }
  const Adam& optimizer() const { return adam_; }

  const Matrix& embeddings() const { return params_[0]; }
  const Matrix& token_head() const { return params_[params_.size() - 4]; }

  StudentForward forward(const std::vector<TokenIds>& batch) const;
  // Accumulates parameter gradients for upstream logit gradients.
  void backward(const StudentForward& fwd, const Matrix& d_token_logits, const Matrix& d_mask_logits,
                std::vector<Matrix>& grads) const;
  StudentPrediction predict(const std::vector<TokenIds>& batch) const;

  // One optimizer step on `grads` with the per-group rates.
  void apply_gradients(std::vector<Matrix>& grads);

 private:
  StudentConfig config_;
  std::size_t vocab_size_ = 0;
  std::vector<Matrix> params_;
  std::vector<ParamInfo> info_;
  Adam adam_;
};

// Mean token cross-entropy over all positions plus mean mask-count
// cross-entropy over non-ignored positions. Gradients are added to `grads`
// when it is non-null.
double supervised_loss(const StudentModel& model, const std::vector<const AlignedExample*>& batch,
                       const LossWeights& weights, std::vector<Matrix>* grads, double* token_accuracy = nullptr);

// Mean soft-label cross-entropy -sum_k q_k log p_k over positions, plus the
// optional mask-count term. Throws InvalidSoftLabel for rows off the simplex
// by more than 1e-6.
double soft_label_loss(const StudentModel& model, const std::vector<const SoftExample*>& batch,
                       const LossWeights& weights, std::vector<Matrix>* grads);

void validate_soft_labels(const SoftExample& example, std::size_t vocab_size);

using EpochCallback = std::function<void(int epoch, const EpochStats&)>;

std::vector<EpochStats> train_supervised(StudentModel& model, const std::vector<AlignedExample>& data, int epochs,
                                         Rng& rng, const EpochCallback& on_epoch = {});
std::vector<EpochStats> train_on_soft_labels(StudentModel& model, const std::vector<SoftExample>& data,
                                             int epochs, Rng& rng, const EpochCallback& on_epoch = {});
// Same mechanics as train_supervised.
std::vector<EpochStats> fine_tune(StudentModel& model, const std::vector<AlignedExample>& data, int epochs, Rng& rng,
                                  const EpochCallback& on_epoch = {});

StudentPrediction predict_pseudo(const StudentModel& model, const std::vector<TokenIds>& batch);

// Tokenize, estimate masks per token, fill, and read back one output per
// input word. A span that decodes to nothing keeps the input word.
Words normalize_sentence(const StudentModel& model, const Vocabulary& vocab, const Words& words);
std::vector<Words> normalize_batch(const StudentModel& model, const Vocabulary& vocab,
                                   const std::vector<Words>& sentences, std::size_t batch_size = 64);

// Argmax over the vocabulary with the special units that cannot appear in
// output text removed.
TokenId output_argmax(const Eigen::Ref<const RowVector>& probs);

}  // namespace lexnorm
