#include "lexnorm/student.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lexnorm/audit.hpp"
#include "lexnorm/errors.hpp"

namespace lexnorm {

namespace {

constexpr std::size_t kPerLayer = 8;
enum LayerSlot { kWq = 0, kWk, kWv, kWo, kW1, kB1, kW2, kB2 };

std::size_t layer_index(std::size_t layer, LayerSlot slot) { return 2 + layer * kPerLayer + slot; }

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  // Column-major fill order is part of the determinism contract.
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
  return m;
}

// Redraw one row from the per-coordinate Gaussian of all other rows.
void redraw_from_population(Matrix& m, Eigen::Index row, Rng& rng) {
  const Eigen::Index n = m.rows() - 1;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    double mean = 0.0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      if (r != row) mean += m(r, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      if (r != row) var += (m(r, c) - mean) * (m(r, c) - mean);
    var /= static_cast<double>(n);
    std::normal_distribution<double> dist(mean, std::sqrt(var));
    m(row, c) = dist(rng);
  }
}

double cross_entropy_rows(const Matrix& logits, const std::vector<int>& targets, double scale, Matrix* grad,
                          std::size_t* correct) {
  double loss = 0.0;
  Matrix probs(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    const RowVector e = (logits.row(r).array() - mx).exp();
    const double z = e.sum();
    probs.row(r) = e / z;
    const int y = targets[static_cast<std::size_t>(r)];
    if (y < 0) continue;
    loss -= (logits(r, y) - mx - std::log(z)) * scale;
    if (grad) {
      RowVector g = probs.row(r);
      g(y) -= 1.0;
      grad->row(r) += scale * g;
    }
    if (correct) {
      Eigen::Index best;
      logits.row(r).maxCoeff(&best);
      if (best == y) ++*correct;
    }
  }
  audit::check_rows(probs);
  return loss;
}

std::vector<int> flatten_ids(const std::vector<const AlignedExample*>& batch, bool mask) {
  std::vector<int> out;
  for (const auto* ex : batch) {
    if (mask) {
      out.insert(out.end(), ex->n_mask.begin(), ex->n_mask.end());
    } else {
      out.insert(out.end(), ex->target_ids.begin(), ex->target_ids.end());
    }
  }
  return out;
}

template <typename Example, typename LossFn>
std::vector<EpochStats> run_epochs(StudentModel& model, const std::vector<Example>& data, int epochs, Rng& rng,
                                   const EpochCallback& on_epoch, LossFn loss_fn) {
  std::vector<EpochStats> stats;
  if (epochs <= 0 || data.empty()) return stats;
  const std::size_t bs = static_cast<std::size_t>(std::max(1, model.config().batch_size));
  std::vector<std::size_t> order(data.size());
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    EpochStats es;
    double weight = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      std::vector<const Example*> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + bs); ++k) batch.push_back(&data[order[k]]);
      auto grads = zeros_like(model.params());
      double acc = 0.0;
      const double loss = loss_fn(batch, grads, acc);
      model.apply_gradients(grads);
      es.loss += loss * static_cast<double>(batch.size());
      es.token_accuracy += acc * static_cast<double>(batch.size());
      weight += static_cast<double>(batch.size());
    }
    es.loss /= weight;
    es.token_accuracy /= weight;
    stats.push_back(es);
    if (on_epoch) on_epoch(epoch, es);
  }
  return stats;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void StudentConfig::validate() const {
  if (embed_dim <= 0 || ff_dim <= 0 || layers < 0 || max_len <= 0) {
    throw ConfigError("student dimensions must be positive");
  }
  if (max_n_mask < 0) throw ConfigError("max_n_mask must be >= 0");
  if (!(lr_embeddings > 0 && lr_encoder > 0 && lr_heads > 0)) throw ConfigError("learning rates must be > 0");
  if (batch_size <= 0) throw ConfigError("batch_size must be > 0");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
}

nlohmann::json StudentConfig::to_json() const {
  return {{"embed_dim", embed_dim},   {"ff_dim", ff_dim},
          {"layers", layers},         {"max_len", max_len},
          {"max_n_mask", max_n_mask}, {"lr_embeddings", lr_embeddings},
          {"lr_encoder", lr_encoder}, {"lr_heads", lr_heads},
          {"grad_clip", grad_clip},   {"mask_loss_weight", mask_loss_weight},
          {"epochs", epochs},         {"batch_size", batch_size},
          {"seed", seed}};
}

StudentConfig StudentConfig::from_json(const nlohmann::json& j) {
  StudentConfig c;
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.ff_dim = j.value("ff_dim", c.ff_dim);
  c.layers = j.value("layers", c.layers);
  c.max_len = j.value("max_len", c.max_len);
  c.max_n_mask = j.value("max_n_mask", c.max_n_mask);
  c.lr_embeddings = j.value("lr_embeddings", c.lr_embeddings);
  c.lr_encoder = j.value("lr_encoder", c.lr_encoder);
  c.lr_heads = j.value("lr_heads", c.lr_heads);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.mask_loss_weight = j.value("mask_loss_weight", c.mask_loss_weight);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Model

StudentModel::StudentModel(const StudentConfig& config, std::size_t vocab_size, Rng& rng)
    : config_(config), vocab_size_(vocab_size) {
  config_.validate();
  if (vocab_size <= Vocabulary::kSpace) throw ConfigError("vocabulary must include the special units");
  const Eigen::Index d = config_.embed_dim;
  const Eigen::Index f = config_.ff_dim;
  const Eigen::Index v = static_cast<Eigen::Index>(vocab_size);
  const Eigen::Index m = mask_classes();
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));

  auto add = [&](const std::string& name, int group, Matrix value) {
    info_.push_back({name, group});
    params_.push_back(std::move(value));
  };
  Matrix emb = gaussian(v, d, 0.3, rng);
  redraw_from_population(emb, Vocabulary::kSpace, rng);
  add("embeddings", kGroupEmbeddings, std::move(emb));
  add("positions", kGroupEmbeddings, gaussian(config_.max_len, d, 0.1, rng));
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    add(p + "wq", kGroupEncoder, gaussian(d, d, sd, rng));
    add(p + "wk", kGroupEncoder, gaussian(d, d, sd, rng));
    add(p + "wv", kGroupEncoder, gaussian(d, d, sd, rng));
    add(p + "wo", kGroupEncoder, gaussian(d, d, 0.5 * sd, rng));
    add(p + "w1", kGroupEncoder, gaussian(d, f, sd, rng));
    add(p + "b1", kGroupEncoder, Matrix::Zero(1, f));
    add(p + "w2", kGroupEncoder, gaussian(f, d, 0.5 / std::sqrt(static_cast<double>(f)), rng));
    add(p + "b2", kGroupEncoder, Matrix::Zero(1, d));
  }
  Matrix head = gaussian(d, v, sd, rng);
  Matrix head_t = head.transpose();
  redraw_from_population(head_t, Vocabulary::kSpace, rng);
  add("token_head.w", kGroupHeads, head_t.transpose());
  add("token_head.b", kGroupHeads, Matrix::Zero(1, v));
  add("mask_head.w", kGroupHeads, gaussian(d, m, sd, rng));
  add("mask_head.b", kGroupHeads, Matrix::Zero(1, m));
  adam_.reset(params_);
}

StudentForward StudentModel::forward(const std::vector<TokenIds>& batch) const {
  StudentForward fw;
  fw.offsets.push_back(0);
  for (const auto& s : batch) {
    if (s.size() > static_cast<std::size_t>(config_.max_len)) {
      throw SequenceTooLong("sequence of " + std::to_string(s.size()) + " tokens exceeds max_len " +
                            std::to_string(config_.max_len));
    }
    for (TokenId id : s) {
      if (id < 0 || static_cast<std::size_t>(id) >= vocab_size_) throw DataError("token id out of range");
    }
    fw.ids.insert(fw.ids.end(), s.begin(), s.end());
    fw.offsets.push_back(fw.ids.size());
  }
  const Eigen::Index n = static_cast<Eigen::Index>(fw.ids.size());
  const Eigen::Index d = config_.embed_dim;
  const Matrix& emb = params_[0];
  const Matrix& pos = params_[1];
  Matrix x(n, d);
  for (std::size_t s = 0; s < fw.sentences(); ++s) {
    for (std::size_t t = fw.offsets[s]; t < fw.offsets[s + 1]; ++t) {
      x.row(static_cast<Eigen::Index>(t)) =
          emb.row(fw.ids[t]) + pos.row(static_cast<Eigen::Index>(t - fw.offsets[s]));
    }
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (int l = 0; l < config_.layers; ++l) {
    const std::size_t L = static_cast<std::size_t>(l);
    StudentForward::Layer ly;
    ly.x_in = std::move(x);
    ly.q = ly.x_in * params_[layer_index(L, kWq)];
    ly.k = ly.x_in * params_[layer_index(L, kWk)];
    ly.v = ly.x_in * params_[layer_index(L, kWv)];
    ly.ctx.resize(n, d);
    for (std::size_t s = 0; s < fw.sentences(); ++s) {
      const Eigen::Index b = static_cast<Eigen::Index>(fw.offsets[s]);
      const Eigen::Index len = static_cast<Eigen::Index>(fw.length(s));
      if (len == 0) {
        ly.attn.emplace_back();
        continue;
      }
      Matrix scores = ly.q.middleRows(b, len) * ly.k.middleRows(b, len).transpose() * scale;
      Matrix a = softmax_rows(scores);
      ly.ctx.middleRows(b, len) = a * ly.v.middleRows(b, len);
      ly.attn.push_back(std::move(a));
    }
    ly.x_mid = ly.x_in + ly.ctx * params_[layer_index(L, kWo)];
    ly.pre_ff = (ly.x_mid * params_[layer_index(L, kW1)]).rowwise() + params_[layer_index(L, kB1)].row(0);
    Matrix ff = ly.pre_ff.cwiseMax(0.0) * params_[layer_index(L, kW2)];
    ff.rowwise() += params_[layer_index(L, kB2)].row(0);
    ly.x_out = ly.x_mid + ff;
    x = ly.x_out;
    fw.layers.push_back(std::move(ly));
  }
  fw.hidden = std::move(x);
  const std::size_t h0 = params_.size() - 4;
  fw.token_logits = (fw.hidden * params_[h0]).rowwise() + params_[h0 + 1].row(0);
  fw.mask_logits = (fw.hidden * params_[h0 + 2]).rowwise() + params_[h0 + 3].row(0);
  return fw;
}

void StudentModel::backward(const StudentForward& fw, const Matrix& d_tok, const Matrix& d_mask,
                            std::vector<Matrix>& grads) const {
  const std::size_t h0 = params_.size() - 4;
  grads[h0] += fw.hidden.transpose() * d_tok;
  grads[h0 + 1] += d_tok.colwise().sum();
  grads[h0 + 2] += fw.hidden.transpose() * d_mask;
  grads[h0 + 3] += d_mask.colwise().sum();
  Matrix dx = d_tok * params_[h0].transpose() + d_mask * params_[h0 + 2].transpose();

  const Eigen::Index d = config_.embed_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (int l = config_.layers - 1; l >= 0; --l) {
    const std::size_t L = static_cast<std::size_t>(l);
    const auto& ly = fw.layers[L];
    // Feed-forward block.
    const Matrix relu = ly.pre_ff.cwiseMax(0.0);
    grads[layer_index(L, kW2)] += relu.transpose() * dx;
    grads[layer_index(L, kB2)] += dx.colwise().sum();
    Matrix dpre = (dx * params_[layer_index(L, kW2)].transpose()).cwiseProduct(
        (ly.pre_ff.array() > 0.0).cast<double>().matrix());
    grads[layer_index(L, kW1)] += ly.x_mid.transpose() * dpre;
    grads[layer_index(L, kB1)] += dpre.colwise().sum();
    Matrix dmid = dx + dpre * params_[layer_index(L, kW1)].transpose();
    // Attention block.
    grads[layer_index(L, kWo)] += ly.ctx.transpose() * dmid;
    const Matrix dctx = dmid * params_[layer_index(L, kWo)].transpose();
    Matrix dq = Matrix::Zero(dctx.rows(), d);
    Matrix dk = Matrix::Zero(dctx.rows(), d);
    Matrix dv = Matrix::Zero(dctx.rows(), d);
    for (std::size_t s = 0; s < fw.sentences(); ++s) {
      const Eigen::Index b = static_cast<Eigen::Index>(fw.offsets[s]);
      const Eigen::Index len = static_cast<Eigen::Index>(fw.length(s));
      if (len == 0) continue;
      const Matrix& a = ly.attn[s];
      const Matrix dc = dctx.middleRows(b, len);
      const Matrix da = dc * ly.v.middleRows(b, len).transpose();
      dv.middleRows(b, len) = a.transpose() * dc;
      const Eigen::VectorXd row_dot = (da.cwiseProduct(a)).rowwise().sum();
      const Matrix ds = a.cwiseProduct(da.colwise() - row_dot) * scale;
      dq.middleRows(b, len) = ds * ly.k.middleRows(b, len);
      dk.middleRows(b, len) = ds.transpose() * ly.q.middleRows(b, len);
    }
    grads[layer_index(L, kWq)] += ly.x_in.transpose() * dq;
    grads[layer_index(L, kWk)] += ly.x_in.transpose() * dk;
    grads[layer_index(L, kWv)] += ly.x_in.transpose() * dv;
    dx = dmid + dq * params_[layer_index(L, kWq)].transpose() + dk * params_[layer_index(L, kWk)].transpose() +
         dv * params_[layer_index(L, kWv)].transpose();
  }
  for (std::size_t s = 0; s < fw.sentences(); ++s) {
    for (std::size_t t = fw.offsets[s]; t < fw.offsets[s + 1]; ++t) {
      const Eigen::Index r = static_cast<Eigen::Index>(t);
      grads[0].row(fw.ids[t]) += dx.row(r);
      grads[1].row(static_cast<Eigen::Index>(t - fw.offsets[s])) += dx.row(r);
    }
  }
}

StudentPrediction StudentModel::predict(const std::vector<TokenIds>& batch) const {
  StudentForward fw = forward(batch);
  StudentPrediction out;
  out.offsets = fw.offsets;
  out.hidden = std::move(fw.hidden);
  out.token_probs = softmax_rows(fw.token_logits);
  out.mask_probs = softmax_rows(fw.mask_logits);
  audit::check_rows(out.token_probs);
  audit::check_rows(out.mask_probs);
  return out;
}

void StudentModel::apply_gradients(std::vector<Matrix>& grads) {
  clip_global_norm(grads, config_.grad_clip);
  std::vector<double> lrs;
  lrs.reserve(info_.size());
  for (const auto& p : info_) {
    lrs.push_back(p.group == kGroupEmbeddings ? config_.lr_embeddings
                  : p.group == kGroupEncoder  ? config_.lr_encoder
                                              : config_.lr_heads);
  }
  adam_.step(params_, grads, lrs);
}

// ---------------------------------------------------------------------------
// Losses

double supervised_loss(const StudentModel& model, const std::vector<const AlignedExample*>& batch,
                       const LossWeights& weights, std::vector<Matrix>* grads, double* token_accuracy) {
  std::vector<TokenIds> inputs;
  for (const auto* ex : batch) inputs.push_back(ex->source_ids);
  const StudentForward fw = model.forward(inputs);
  const std::vector<int> tok_targets = flatten_ids(batch, false);
  const std::vector<int> mask_targets = flatten_ids(batch, true);
  const std::size_t n = tok_targets.size();
  const std::size_t n_mask = static_cast<std::size_t>(
      std::count_if(mask_targets.begin(), mask_targets.end(), [](int y) { return y >= 0; }));
  for (int y : mask_targets) {
    if (y >= model.mask_classes()) throw DataError("mask-count label exceeds max_n_mask");
  }

  Matrix d_tok, d_mask;
  if (grads) {
    d_tok = Matrix::Zero(fw.token_logits.rows(), fw.token_logits.cols());
    d_mask = Matrix::Zero(fw.mask_logits.rows(), fw.mask_logits.cols());
  }
  std::size_t correct = 0;
  double loss = 0.0;
  if (n > 0 && weights.token != 0.0) {
    loss += cross_entropy_rows(fw.token_logits, tok_targets, weights.token / static_cast<double>(n),
                               grads ? &d_tok : nullptr, &correct);
  } else if (token_accuracy) {
    cross_entropy_rows(fw.token_logits, tok_targets, 0.0, nullptr, &correct);
  }
  if (n_mask > 0 && weights.mask != 0.0) {
    loss += cross_entropy_rows(fw.mask_logits, mask_targets, weights.mask / static_cast<double>(n_mask),
                               grads ? &d_mask : nullptr, nullptr);
  }
  if (token_accuracy) *token_accuracy = n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
  if (grads) model.backward(fw, d_tok, d_mask, *grads);
  return loss;
}

void validate_soft_labels(const SoftExample& ex, std::size_t vocab_size) {
  if (static_cast<std::size_t>(ex.q.rows()) != ex.source_ids.size() ||
      static_cast<std::size_t>(ex.q.cols()) != vocab_size) {
    throw InvalidSoftLabel("soft label shape does not match the example");
  }
  if (!ex.n_mask.empty() && ex.n_mask.size() != ex.source_ids.size()) {
    throw InvalidSoftLabel("mask-count targets do not match the example length");
  }
  for (Eigen::Index r = 0; r < ex.q.rows(); ++r) {
    const double s = ex.q.row(r).sum();
    if (!(std::abs(s - 1.0) <= 1e-6) || ex.q.row(r).minCoeff() < 0.0) {
      throw InvalidSoftLabel("soft label row " + std::to_string(r) + " is not a distribution (sum " +
                             std::to_string(s) + ")");
    }
  }
}

double soft_label_loss(const StudentModel& model, const std::vector<const SoftExample*>& batch,
                       const LossWeights& weights, std::vector<Matrix>* grads) {
  std::vector<TokenIds> inputs;
  std::vector<int> mask_targets;
  for (const auto* ex : batch) {
    validate_soft_labels(*ex, model.vocab_size());
    inputs.push_back(ex->source_ids);
    if (ex->n_mask.empty()) {
      mask_targets.insert(mask_targets.end(), ex->source_ids.size(), kIgnore);
    } else {
      mask_targets.insert(mask_targets.end(), ex->n_mask.begin(), ex->n_mask.end());
    }
  }
  const StudentForward fw = model.forward(inputs);
  const Eigen::Index n = fw.token_logits.rows();
  Matrix q(n, fw.token_logits.cols());
  for (std::size_t s = 0; s < batch.size(); ++s) {
    q.middleRows(static_cast<Eigen::Index>(fw.offsets[s]), static_cast<Eigen::Index>(fw.length(s))) =
        batch[s]->q;
  }
  double loss = 0.0;
  Matrix d_tok, d_mask;
  if (grads) {
    d_tok = Matrix::Zero(fw.token_logits.rows(), fw.token_logits.cols());
    d_mask = Matrix::Zero(fw.mask_logits.rows(), fw.mask_logits.cols());
  }
  if (n > 0 && weights.token != 0.0) {
    const double scale = weights.token / static_cast<double>(n);
    const Matrix logp = log_softmax_rows(fw.token_logits);
    const Matrix probs = logp.array().exp().matrix();
    audit::check_rows(probs);
    loss -= scale * q.cwiseProduct(logp).sum();
    // The gradient of -sum q log softmax(z) is softmax(z) * sum(q) - q.
    if (grads) {
      const Eigen::ArrayXd q_mass = q.rowwise().sum().array();
      d_tok = scale * (probs.array().colwise() * q_mass - q.array()).matrix();
    }
  }
  const std::size_t n_mask = static_cast<std::size_t>(
      std::count_if(mask_targets.begin(), mask_targets.end(), [](int y) { return y >= 0; }));
  if (n_mask > 0 && weights.mask != 0.0) {
    loss += cross_entropy_rows(fw.mask_logits, mask_targets, weights.mask / static_cast<double>(n_mask),
                               grads ? &d_mask : nullptr, nullptr);
  }
  if (grads) model.backward(fw, d_tok, d_mask, *grads);
  return loss;
}

// ---------------------------------------------------------------------------
// Training

std::vector<EpochStats> train_supervised(StudentModel& model, const std::vector<AlignedExample>& data, int epochs,
                                         Rng& rng, const EpochCallback& on_epoch) {
  const LossWeights w{1.0, model.config().mask_loss_weight};
  return run_epochs(model, data, epochs, rng, on_epoch,
                    [&](const std::vector<const AlignedExample*>& batch, std::vector<Matrix>& grads, double& acc) {
                      return supervised_loss(model, batch, w, &grads, &acc);
                    });
}

std::vector<EpochStats> train_on_soft_labels(StudentModel& model, const std::vector<SoftExample>& data,
                                             int epochs, Rng& rng, const EpochCallback& on_epoch) {
  for (const auto& ex : data) validate_soft_labels(ex, model.vocab_size());
  const LossWeights w{1.0, model.config().mask_loss_weight};
  return run_epochs(model, data, epochs, rng, on_epoch,
                    [&](const std::vector<const SoftExample*>& batch, std::vector<Matrix>& grads, double& acc) {
                      acc = 0.0;
                      return soft_label_loss(model, batch, w, &grads);
                    });
}

std::vector<EpochStats> fine_tune(StudentModel& model, const std::vector<AlignedExample>& data, int epochs, Rng& rng,
                                  const EpochCallback& on_epoch) {
  return train_supervised(model, data, epochs, rng, on_epoch);
}

StudentPrediction predict_pseudo(const StudentModel& model, const std::vector<TokenIds>& batch) {
  return model.predict(batch);
}

// ---------------------------------------------------------------------------
// Inference

TokenId output_argmax(const Eigen::Ref<const RowVector>& probs) {
  TokenId best = Vocabulary::kSpace;
  double best_p = -1.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    if (k == Vocabulary::kPad || k == Vocabulary::kUnk || k == Vocabulary::kMask) continue;
    if (probs(k) > best_p) {
      best_p = probs(k);
      best = static_cast<TokenId>(k);
    }
  }
  return best;
}

std::vector<Words> normalize_batch(const StudentModel& model, const Vocabulary& vocab,
                                   const std::vector<Words>& sentences, std::size_t batch_size) {
  std::vector<Words> out;
  out.reserve(sentences.size());
  const std::size_t max_len = static_cast<std::size_t>(model.config().max_len);
  for (std::size_t start = 0; start < sentences.size(); start += std::max<std::size_t>(1, batch_size)) {
    const std::size_t stop = std::min(sentences.size(), start + std::max<std::size_t>(1, batch_size));
    // Pass 1: mask counts on the plain tokenization.
    std::vector<std::vector<TokenIds>> word_tokens;
    std::vector<TokenIds> plain;
    for (std::size_t s = start; s < stop; ++s) {
      std::vector<TokenIds> per_word;
      TokenIds flat;
      for (const auto& w : sentences[s]) {
        per_word.push_back(vocab.tokenize_phrase(w));
        flat.insert(flat.end(), per_word.back().begin(), per_word.back().end());
      }
      word_tokens.push_back(std::move(per_word));
      plain.push_back(std::move(flat));
    }
    const StudentPrediction first = model.predict(plain);
    // Pass 2: fill the masked layout.
    std::vector<TokenIds> masked;
    std::vector<std::vector<WordSpan>> spans;
    for (std::size_t b = 0; b < plain.size(); ++b) {
      std::vector<int> counts(plain[b].size(), 0);
      for (std::size_t t = 0; t < plain[b].size(); ++t) {
        Eigen::Index best;
        first.mask_probs.row(static_cast<Eigen::Index>(first.offsets[b] + t)).maxCoeff(&best);
        counts[t] = static_cast<int>(best);
      }
      std::size_t total = plain[b].size();
      for (int c : counts) total += static_cast<std::size_t>(c);
      if (total > max_len) std::fill(counts.begin(), counts.end(), 0);
      TokenIds seq;
      std::vector<WordSpan> sp;
      std::size_t t = 0;
      for (const auto& wt : word_tokens[b]) {
        const std::size_t begin = seq.size();
        for (TokenId id : wt) {
          seq.push_back(id);
          seq.insert(seq.end(), static_cast<std::size_t>(counts[t]), Vocabulary::kMask);
          ++t;
        }
        sp.push_back({begin, seq.size()});
      }
      masked.push_back(std::move(seq));
      spans.push_back(std::move(sp));
    }
    const StudentPrediction second = model.predict(masked);
    for (std::size_t b = 0; b < masked.size(); ++b) {
      const Words& src = sentences[start + b];
      Words words;
      for (std::size_t w = 0; w < src.size(); ++w) {
        TokenIds ids;
        for (std::size_t t = spans[b][w].begin; t < spans[b][w].end; ++t) {
          ids.push_back(output_argmax(second.token_probs.row(static_cast<Eigen::Index>(second.offsets[b] + t))));
        }
        const Words pieces = detokenize(ids, vocab, false);
        std::string joined;
        for (std::size_t k = 0; k < pieces.size(); ++k) joined += (k ? " " : "") + pieces[k];
        words.push_back(joined.empty() ? src[w] : joined);
      }
      out.push_back(std::move(words));
    }
  }
  return out;
}

Words normalize_sentence(const StudentModel& model, const Vocabulary& vocab, const Words& words) {
  return normalize_batch(model, vocab, {words}, 1).front();
}

}  // namespace lexnorm
