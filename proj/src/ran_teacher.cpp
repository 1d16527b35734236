#include "lexnorm/ran_teacher.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lexnorm/audit.hpp"
#include "lexnorm/errors.hpp"

namespace lexnorm {

namespace {

constexpr double kLogFloor = 1e-300;

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
  return m;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Projection {
  Matrix z;       // tanh hidden layer
  Matrix f;       // projected states
  Matrix a;       // attention weights, one column per source
};

Projection project_batch(const RanModel& model, const std::vector<const RanInstance*>& batch) {
  const auto& p = model.params();
  Matrix h(static_cast<Eigen::Index>(batch.size()), model.input_dim());
  for (std::size_t i = 0; i < batch.size(); ++i) h.row(static_cast<Eigen::Index>(i)) = batch[i]->h.transpose();
  Projection out;
  out.z = h * p[0];
  out.z.rowwise() += p[1].row(0);
  out.z = out.z.array().tanh().matrix();
  out.f = out.z * p[2];
  out.f.rowwise() += p[3].row(0);
  out.a = (out.f * p[4].transpose()).unaryExpr([](double x) { return sigmoid(x); });
  return out;
}

RanWeights weights_row(const Matrix& a, Eigen::Index r) {
  RanWeights w;
  for (int j = 0; j < kNumRules; ++j) w.rule[static_cast<std::size_t>(j)] = a(r, j);
  w.student = a(r, static_cast<Eigen::Index>(RuleId::kStudent));
  return w;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void RanConfig::validate() const {
  if (rule_dim <= 0 || hidden < 0) throw ConfigError("rule embedding dimensionality must be > 0");
  if (!(lr_max > 0 && lr_min > 0 && lr_min <= lr_max)) throw ConfigError("need 0 < ran lr_min <= lr_max");
  if (!(warmup_frac >= 0 && warmup_frac <= 1)) throw ConfigError("ran warmup_frac must lie in [0, 1]");
  if (epochs_unsup < 0 || epochs_sup < 0 || batch_size <= 0) throw ConfigError("bad ran epochs or batch size");
}

nlohmann::json RanConfig::to_json() const {
  return {{"rule_dim", rule_dim},         {"hidden", hidden},
          {"lr_max", lr_max},             {"lr_min", lr_min},
          {"warmup_frac", warmup_frac},   {"epochs_unsup", epochs_unsup},
          {"epochs_sup", epochs_sup},     {"batch_size", batch_size},
          {"grad_clip", grad_clip},       {"student_in_rule_count", student_in_rule_count},
          {"seed", seed}};
}

RanConfig RanConfig::from_json(const nlohmann::json& j) {
  RanConfig c;
  c.rule_dim = j.value("rule_dim", c.rule_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.lr_max = j.value("lr_max", c.lr_max);
  c.lr_min = j.value("lr_min", c.lr_min);
  c.warmup_frac = j.value("warmup_frac", c.warmup_frac);
  c.epochs_unsup = j.value("epochs_unsup", c.epochs_unsup);
  c.epochs_sup = j.value("epochs_sup", c.epochs_sup);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.student_in_rule_count = j.value("student_in_rule_count", c.student_in_rule_count);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Model

int RanInstance::fired() const {
  int n = 0;
  for (const auto& v : votes) n += v.has_value() ? 1 : 0;
  return n;
}

RanModel::RanModel(const RanConfig& config, int input_dim, Rng& rng) : config_(config), input_dim_(input_dim) {
  config_.validate();
  if (input_dim <= 0) throw ConfigError("ran input dimension must be > 0");
  const int hid = config_.hidden_width();
  const int d = config_.rule_dim;
  info_ = {{"f.w1", 0}, {"f.b1", 0}, {"f.w2", 0}, {"f.b2", 0}, {"rule_embeddings", 1}};
  params_.push_back(gaussian(input_dim, hid, 1.0 / std::sqrt(static_cast<double>(input_dim)), rng));
  params_.push_back(Matrix::Zero(1, hid));
  params_.push_back(gaussian(hid, d, 1.0 / std::sqrt(static_cast<double>(hid)), rng));
  params_.push_back(Matrix::Zero(1, d));
  params_.push_back(gaussian(kNumSources, d, 1.0 / std::sqrt(static_cast<double>(d)), rng));
  adam_.reset(params_);
}

Vector RanModel::project(const Vector& h) const {
  if (h.size() != input_dim_) throw DataError("hidden state has the wrong dimensionality");
  const Vector z = (params_[0].transpose() * h + params_[1].row(0).transpose()).array().tanh().matrix();
  return params_[2].transpose() * z + params_[3].row(0).transpose();
}

double RanModel::attention_weight(const Vector& h, RuleId rule) const {
  return sigmoid(project(h).dot(params_[4].row(static_cast<Eigen::Index>(rule)).transpose()));
}

RanWeights RanModel::attention(const Vector& h) const {
  const Vector f = project(h);
  RanWeights w;
  for (int j = 0; j < kNumRules; ++j) w.rule[static_cast<std::size_t>(j)] = sigmoid(f.dot(params_[4].row(j)));
  w.student = sigmoid(f.dot(params_[4].row(static_cast<Eigen::Index>(RuleId::kStudent))));
  return w;
}

// ---------------------------------------------------------------------------
// Aggregation and losses

int weight_slots(const RanInstance& instance, bool student_in_rule_count) {
  return instance.fired() + 1 + (student_in_rule_count ? 1 : 0);
}

SoftLabel aggregate(const RanInstance& instance, const RanWeights& weights, bool student_in_rule_count) {
  const Eigen::Index k = instance.classes();
  const double z = static_cast<double>(weight_slots(instance, student_in_rule_count));
  double leftover = z - weights.student;
  SoftLabel q = weights.student * instance.p;
  for (int j = 0; j < kNumRules; ++j) {
    const auto& vote = instance.votes[static_cast<std::size_t>(j)];
    if (!vote) continue;
    if (*vote < 0 || *vote >= k) throw DataError("rule vote outside the label space");
    q(*vote) += weights.rule[static_cast<std::size_t>(j)];
    leftover -= weights.rule[static_cast<std::size_t>(j)];
  }
  q.array() += leftover / static_cast<double>(k);
  q /= z;
  return q;
}

double unsup_loss(const std::vector<SoftLabel>& q) {
  double loss = 0.0;
  for (const auto& row : q) {
    for (Eigen::Index k = 0; k < row.size(); ++k) {
      if (row(k) > 0.0) loss -= row(k) * std::log(row(k));
    }
  }
  return loss;
}

double sup_loss(const std::vector<SoftLabel>& q, const std::vector<int>& gold) {
  if (q.size() != gold.size()) throw LengthMismatch("soft labels and gold labels differ in count");
  double loss = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) loss -= std::log(std::max(q[i](gold[i]), kLogFloor));
  return loss;
}

double ran_objective(const RanModel& model, const std::vector<const RanInstance*>& batch, RanObjective objective,
                     std::vector<Matrix>* grads) {
  if (batch.empty()) return 0.0;
  const bool flag = model.config().student_in_rule_count;
  const Projection pr = project_batch(model, batch);
  Matrix d_a = Matrix::Zero(pr.a.rows(), pr.a.cols());
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const RanInstance& inst = *batch[i];
    const Eigen::Index r = static_cast<Eigen::Index>(i);
    const SoftLabel q = aggregate(inst, weights_row(pr.a, r), flag);
    audit::check_vector(q);
    const double z = static_cast<double>(weight_slots(inst, flag));
    const double inv_k = 1.0 / static_cast<double>(inst.classes());
    if (objective == RanObjective::kEntropy) {
      const Eigen::ArrayXd logq = q.array().max(kLogFloor).log();
      loss -= (q.array() * logq).sum();
      const double mean_log = logq.mean();
      for (int j = 0; j < kNumRules; ++j) {
        const auto& vote = inst.votes[static_cast<std::size_t>(j)];
        if (vote) d_a(r, j) = -(logq(*vote) - mean_log) / z;
      }
      d_a(r, static_cast<Eigen::Index>(RuleId::kStudent)) = -((inst.p.array() * logq).sum() - mean_log) / z;
    } else {
      if (inst.gold < 0 || inst.gold >= inst.classes()) throw DataError("supervised RAN instance lacks a gold label");
      const double qy = std::max(q(inst.gold), kLogFloor);
      loss -= std::log(qy);
      for (int j = 0; j < kNumRules; ++j) {
        const auto& vote = inst.votes[static_cast<std::size_t>(j)];
        if (vote) d_a(r, j) = -((*vote == inst.gold ? 1.0 : 0.0) - inv_k) / (z * qy);
      }
      d_a(r, static_cast<Eigen::Index>(RuleId::kStudent)) = -(inst.p(inst.gold) - inv_k) / (z * qy);
    }
  }
  if (grads) {
    const auto& p = model.params();
    const Matrix d_s = d_a.cwiseProduct(pr.a.cwiseProduct((1.0 - pr.a.array()).matrix()));
    (*grads)[4] += d_s.transpose() * pr.f;
    const Matrix d_f = d_s * p[4];
    (*grads)[2] += pr.z.transpose() * d_f;
    (*grads)[3] += d_f.colwise().sum();
    const Matrix d_pre = (d_f * p[2].transpose()).cwiseProduct((1.0 - pr.z.array().square()).matrix());
    Matrix h(static_cast<Eigen::Index>(batch.size()), model.input_dim());
    for (std::size_t i = 0; i < batch.size(); ++i) h.row(static_cast<Eigen::Index>(i)) = batch[i]->h.transpose();
    (*grads)[0] += h.transpose() * d_pre;
    (*grads)[1] += d_pre.colwise().sum();
  }
  return loss;
}

double ran_learning_rate(const RanConfig& config, long step, long total_steps) {
  if (total_steps <= 1) return config.lr_max;
  const long warmup = std::max<long>(1, std::lround(config.warmup_frac * static_cast<double>(total_steps)));
  if (step < warmup) return config.lr_max * static_cast<double>(step + 1) / static_cast<double>(warmup);
  const long decay_steps = total_steps - warmup;
  if (decay_steps <= 0) return config.lr_max;
  const double frac = static_cast<double>(step - warmup + 1) / static_cast<double>(decay_steps);
  return config.lr_max * std::pow(config.lr_min / config.lr_max, frac);
}

namespace {

std::vector<double> run_phase(RanModel& model, const std::vector<RanInstance>& data, int epochs,
                              RanObjective objective, Rng& rng) {
  std::vector<double> per_epoch;
  if (epochs <= 0 || data.empty()) return per_epoch;
  const std::size_t bs = static_cast<std::size_t>(model.config().batch_size);
  const long batches = static_cast<long>((data.size() + bs - 1) / bs);
  const long total = batches * epochs;
  model.optimizer().reset(model.params());
  std::vector<std::size_t> order(data.size());
  long step = 0;
  for (int e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      std::vector<const RanInstance*> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + bs); ++k) batch.push_back(&data[order[k]]);
      auto grads = zeros_like(model.params());
      sum += ran_objective(model, batch, objective, &grads);
      for (auto& g : grads) g /= static_cast<double>(batch.size());
      clip_global_norm(grads, model.config().grad_clip);
      const double lr = ran_learning_rate(model.config(), step++, total);
      model.optimizer().step(model.params(), grads, std::vector<double>(grads.size(), lr));
    }
    per_epoch.push_back(sum / static_cast<double>(data.size()));
  }
  return per_epoch;
}

}  // namespace

RanTrainStats train_ran(RanModel& model, const std::vector<RanInstance>& pseudo,
                        const std::vector<RanInstance>& labeled, Rng& rng) {
  RanTrainStats stats;
  stats.unsup_loss = run_phase(model, pseudo, model.config().epochs_unsup, RanObjective::kEntropy, rng);
  stats.sup_loss = run_phase(model, labeled, model.config().epochs_sup, RanObjective::kCrossEntropy, rng);
  return stats;
}

std::vector<SoftLabel> teacher_label(const RanModel& model, const std::vector<RanInstance>& instances) {
  std::vector<SoftLabel> out;
  out.reserve(instances.size());
  const std::size_t chunk = 1024;
  for (std::size_t start = 0; start < instances.size(); start += chunk) {
    std::vector<const RanInstance*> batch;
    for (std::size_t k = start; k < std::min(instances.size(), start + chunk); ++k) batch.push_back(&instances[k]);
    const Projection pr = project_batch(model, batch);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      SoftLabel q = aggregate(*batch[i], weights_row(pr.a, static_cast<Eigen::Index>(i)),
                              model.config().student_in_rule_count);
      audit::check_vector(q);
      out.push_back(std::move(q));
    }
  }
  return out;
}

}  // namespace lexnorm
