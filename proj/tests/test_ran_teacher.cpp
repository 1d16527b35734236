#include <gtest/gtest.h>

#include <cmath>

#include "grad_check.hpp"
#include "lexnorm/ran_teacher.hpp"

namespace lexnorm {
namespace {

RanConfig small_config() {
  RanConfig c;
  c.rule_dim = 6;
  c.hidden = 5;
  return c;
}

Vector random_distribution(Rng& rng, Eigen::Index k) {
  Vector p(k);
  for (Eigen::Index i = 0; i < k; ++i) p(i) = 0.05 + uniform01(rng);
  return p / p.sum();
}

RanInstance random_instance(Rng& rng, int dim, Eigen::Index k) {
  RanInstance inst;
  inst.h = Vector(dim);
  for (int i = 0; i < dim; ++i) inst.h(i) = 2.0 * uniform01(rng) - 1.0;
  for (auto& v : inst.votes) {
    if (rng() % 3 != 0) v = static_cast<TokenId>(rng() % static_cast<std::uint64_t>(k));
  }
  inst.p = random_distribution(rng, k);
  inst.gold = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
  return inst;
}

bool is_distribution(const SoftLabel& q) { return std::abs(q.sum() - 1.0) <= 1e-9 && q.minCoeff() >= 0.0; }

TEST(Aggregate, HandEvaluatedExample) {
  RanInstance inst;
  inst.votes[0] = 0;
  inst.p = Vector::Constant(2, 0.5);
  RanWeights w;
  w.rule = {1.0, 0.0};
  w.student = 1.0;
  const SoftLabel q = aggregate(inst, w);
  EXPECT_NEAR(q(0), 0.75, 1e-15);
  EXPECT_NEAR(q(1), 0.25, 1e-15);
}

TEST(Aggregate, OnlyStudentFires) {
  Rng rng(1);
  RanInstance inst;
  inst.p = random_distribution(rng, 5);
  RanWeights w;
  w.student = 0.3;
  const SoftLabel q = aggregate(inst, w);
  const Vector expected = 0.3 * inst.p + 0.7 * Vector::Constant(5, 0.2);
  EXPECT_LE((q - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(weight_slots(inst, false), 1);
  EXPECT_EQ(weight_slots(inst, true), 2);
}

TEST(Aggregate, MajorityVoteAndUniformReductions) {
  Rng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng() % 9);
    const RanInstance inst = random_instance(rng, 3, k);
    RanWeights ones;
    ones.rule = {1.0, 1.0};
    ones.student = 1.0;
    Vector vote = inst.p;
    for (const auto& v : inst.votes) {
      if (v) vote(*v) += 1.0;
    }
    vote /= static_cast<double>(inst.fired() + 1);
    ASSERT_LE((aggregate(inst, ones) - vote).cwiseAbs().maxCoeff(), 1e-12);

    const SoftLabel u = aggregate(inst, RanWeights{});
    ASSERT_LE((u - Vector::Constant(k, 1.0 / static_cast<double>(k))).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Aggregate, ValidAndMonotone) {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const RanInstance inst = random_instance(rng, 3, 6);
    RanWeights w;
    w.rule = {uniform01(rng), uniform01(rng)};
    w.student = uniform01(rng);
    const SoftLabel q = aggregate(inst, w);
    ASSERT_TRUE(is_distribution(q));
    for (int j = 0; j < kNumRules; ++j) {
      const auto& v = inst.votes[static_cast<std::size_t>(j)];
      if (!v) continue;
      RanWeights up = w;
      up.rule[static_cast<std::size_t>(j)] = std::min(1.0, w.rule[static_cast<std::size_t>(j)] + 0.2);
      EXPECT_GE(aggregate(inst, up)(*v), q(*v) - 1e-15);
    }
  }
}

TEST(Aggregate, AgreeingSourcesWinArgmax) {
  RanInstance inst;
  inst.votes = {TokenVote(2), TokenVote(2)};
  inst.p = Vector::Constant(4, 0.1);
  inst.p(2) = 0.7;
  RanWeights w;
  w.rule = {0.2, 0.4};
  w.student = 0.1;
  Eigen::Index best;
  aggregate(inst, w).maxCoeff(&best);
  EXPECT_EQ(best, 2);
}

TEST(Aggregate, RejectsVoteOutsideLabelSpace) {
  RanInstance inst;
  inst.votes[1] = 7;
  inst.p = Vector::Constant(3, 1.0 / 3.0);
  EXPECT_THROW(aggregate(inst, RanWeights{}), DataError);
}

TEST(Losses, ClosedForms) {
  SoftLabel one_hot = Vector::Zero(4);
  one_hot(1) = 1.0;
  const SoftLabel uniform = Vector::Constant(4, 0.25);
  EXPECT_NEAR(unsup_loss({one_hot}), 0.0, 1e-15);
  EXPECT_NEAR(unsup_loss({uniform}), std::log(4.0), 1e-12);
  EXPECT_NEAR(unsup_loss({uniform, uniform}), 2.0 * std::log(4.0), 1e-12);
  EXPECT_NEAR(sup_loss({one_hot}, {1}), 0.0, 1e-15);
  EXPECT_NEAR(sup_loss({uniform}, {3}), std::log(4.0), 1e-12);
}

TEST(Attention, ZeroEmbeddingsGiveOneHalf) {
  Rng rng(4);
  RanModel model(small_config(), 7, rng);
  model.rule_embeddings().setZero();
  const RanInstance inst = random_instance(rng, 7, 3);
  const RanWeights w = model.attention(inst.h);
  EXPECT_DOUBLE_EQ(w.rule[0], 0.5);
  EXPECT_DOUBLE_EQ(w.rule[1], 0.5);
  EXPECT_DOUBLE_EQ(w.student, 0.5);
  EXPECT_DOUBLE_EQ(model.attention_weight(inst.h, RuleId::kDictionary), 0.5);
  EXPECT_THROW(model.project(Vector::Zero(3)), DataError);
}

TEST(Attention, StrictlyInsideUnitInterval) {
  Rng rng(5);
  RanModel model(small_config(), 7, rng);
  for (int i = 0; i < 200; ++i) {
    const RanInstance inst = random_instance(rng, 7, 3);
    for (RuleId r : {RuleId::kRegex, RuleId::kDictionary, RuleId::kStudent}) {
      const double a = model.attention_weight(inst.h, r);
      EXPECT_GT(a, 0.0);
      EXPECT_LT(a, 1.0);
    }
  }
}

double objective_gradient_error(std::uint64_t seed, RanObjective objective, bool student_in_rule_count) {
  Rng rng(seed);
  RanConfig c = small_config();
  c.student_in_rule_count = student_in_rule_count;
  RanModel model(c, 7, rng);
  std::vector<RanInstance> data;
  for (int i = 0; i < 6; ++i) data.push_back(random_instance(rng, 7, 5));
  std::vector<const RanInstance*> batch;
  for (const auto& d : data) batch.push_back(&d);
  std::vector<Matrix> grads = zeros_like(model.params());
  ran_objective(model, batch, objective, &grads);
  auto loss = [&] { return ran_objective(model, batch, objective, nullptr); };
  return testing::finite_difference(model.params(), grads, loss, rng, 10).max_rel_error;
}

TEST(Gradients, EntropyObjective) {
  for (std::uint64_t s = 1; s <= 6; ++s) {
    EXPECT_LE(objective_gradient_error(s, RanObjective::kEntropy, s % 2 == 0), 1e-3) << s;
  }
}

TEST(Gradients, CrossEntropyObjective) {
  for (std::uint64_t s = 11; s <= 16; ++s) {
    EXPECT_LE(objective_gradient_error(s, RanObjective::kCrossEntropy, s % 2 == 0), 1e-3) << s;
  }
}

TEST(Gradients, ObjectiveMatchesLossFunctions) {
  Rng rng(8);
  RanModel model(small_config(), 7, rng);
  std::vector<RanInstance> data;
  for (int i = 0; i < 10; ++i) data.push_back(random_instance(rng, 7, 4));
  std::vector<const RanInstance*> batch;
  std::vector<int> gold;
  for (const auto& d : data) {
    batch.push_back(&d);
    gold.push_back(d.gold);
  }
  const auto q = teacher_label(model, data);
  EXPECT_NEAR(ran_objective(model, batch, RanObjective::kEntropy, nullptr), unsup_loss(q), 1e-10);
  EXPECT_NEAR(ran_objective(model, batch, RanObjective::kCrossEntropy, nullptr), sup_loss(q, gold), 1e-10);
}

TEST(Schedule, Endpoints) {
  const RanConfig c;
  const long total = 1000;
  EXPECT_LT(ran_learning_rate(c, 0, total), c.lr_max);
  EXPECT_DOUBLE_EQ(ran_learning_rate(c, 99, total), 1e-2);
  EXPECT_NEAR(ran_learning_rate(c, total - 1, total), 1e-5, 1e-18);
  double prev = ran_learning_rate(c, 99, total);
  for (long s = 100; s < total; ++s) {
    const double lr = ran_learning_rate(c, s, total);
    EXPECT_LE(lr, prev);
    prev = lr;
  }
}

TEST(Training, ZeroEpochsLeaveParametersUnchanged) {
  Rng rng(9);
  RanConfig c = small_config();
  c.epochs_unsup = 0;
  c.epochs_sup = 0;
  RanModel model(c, 7, rng);
  const std::vector<Matrix> before = model.params();
  std::vector<RanInstance> data;
  for (int i = 0; i < 20; ++i) data.push_back(random_instance(rng, 7, 4));
  const RanTrainStats stats = train_ran(model, data, data, rng);
  EXPECT_TRUE(stats.unsup_loss.empty());
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(model.params()[i], before[i]);
}

TEST(Training, TeacherLabelsAreDistributionsAndDeterministic) {
  Rng a(10), b(10);
  RanModel m1(small_config(), 7, a), m2(small_config(), 7, b);
  std::vector<RanInstance> data;
  for (int i = 0; i < 300; ++i) data.push_back(random_instance(a, 7, 6));
  Rng t1(1), t2(1);
  train_ran(m1, data, data, t1);
  train_ran(m2, data, data, t2);
  const auto q1 = teacher_label(m1, data);
  const auto q2 = teacher_label(m2, data);
  for (std::size_t i = 0; i < q1.size(); ++i) {
    EXPECT_TRUE(is_distribution(q1[i]));
    EXPECT_EQ(q1[i], q2[i]);
  }
}

TEST(Training, SupervisedPhaseLowersCrossEntropy) {
  Rng rng(12);
  RanConfig c = small_config();
  c.epochs_unsup = 0;
  c.epochs_sup = 20;
  c.batch_size = 32;
  RanModel model(c, 7, rng);
  std::vector<RanInstance> data;
  for (int i = 0; i < 400; ++i) {
    RanInstance inst = random_instance(rng, 7, 5);
    inst.votes[0] = inst.gold;  // regex always right
    inst.votes[1] = (inst.gold + 1) % 5;  // dictionary always wrong
    data.push_back(inst);
  }
  const RanTrainStats stats = train_ran(model, {}, data, rng);
  ASSERT_EQ(stats.sup_loss.size(), 20u);
  EXPECT_LT(stats.sup_loss.back(), stats.sup_loss.front());
  double regex = 0.0, dict = 0.0;
  for (const auto& d : data) {
    const RanWeights w = model.attention(d.h);
    regex += w.rule[0];
    dict += w.rule[1];
  }
  EXPECT_GT(regex, dict);
}

TEST(Config, JsonRoundTripAndValidation) {
  RanConfig c = small_config();
  c.lr_max = 3e-3;
  c.student_in_rule_count = true;
  EXPECT_EQ(RanConfig::from_json(c.to_json()).to_json(), c.to_json());
  c.rule_dim = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace lexnorm
