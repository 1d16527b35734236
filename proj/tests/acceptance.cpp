// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails. Pass criterion numbers as
// arguments to run a subset.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "grad_check.hpp"
#include "lexnorm/audit.hpp"
#include "lexnorm/orchestrator.hpp"
#include "lexnorm/text_prep.hpp"
#include "metric_oracle.hpp"

namespace lexnorm {
namespace {

// Pinned tolerances and thresholds.
constexpr std::size_t kAlignPairs = 10000;
constexpr double kAlignSeconds = 30.0;
constexpr int kReductionInstances = 1000;
constexpr double kReductionTol = 1e-12;
constexpr int kGradInstances = 20;
constexpr double kGradTol = 1e-3;
constexpr double kDistTol = 1e-9;
constexpr int kMetricTriples = 1000;
constexpr int kTwoRuleSeeds = 5;
constexpr int kTwoRuleNeeded = 4;
constexpr double kTwoRuleSeconds = 300.0;
constexpr int kBenchSeeds = 5;
constexpr double kBenchMinGain = 0.01;
constexpr double kBenchMinIntegrity = 0.95;
constexpr double kBenchSeconds = 900.0;
constexpr int kAugSeeds = 3;
constexpr double kAugMinGain = 0.05;

const Lexicon& lexicon() {
  static const Lexicon lex = Lexicon::load(std::string(LEXNORM_DATA_DIR) + "/lexicon_vi.json");
  return lex;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1 and 2: alignment invariants and mask reinsertion

struct AlignResult {
  Outcome invariants;
  Outcome reinsertion;
};

Words flatten_phrases(const Words& words) {
  Words flat;
  for (const auto& w : words) {
    std::size_t start = 0;
    while (true) {
      const auto sp = w.find(' ', start);
      flat.push_back(w.substr(start, sp - start));
      if (sp == std::string::npos) break;
      start = sp + 1;
    }
  }
  return flat;
}

AlignResult alignment_criteria() {
  const auto t0 = std::chrono::steady_clock::now();
  CorpusConfig cc;
  cc.n_labeled = kAlignPairs;
  cc.n_unlabeled = 0;
  cc.seed = 101;
  const SyntheticCorpus corpus = generate_corpus(lexicon(), cc);
  std::vector<Words> words;
  for (const auto& r : corpus.labeled) {
    words.push_back(r.input);
    words.push_back(r.output);
  }
  const Vocabulary vocab = train_subword_vocab(words, 800);
  std::size_t ok = 0, rebuilt = 0, total = 0;
  for (const auto& r : corpus.labeled) {
    ++total;
    // A generous mask cap so that every pair aligns.
    const AlignedExample ex = align_pair(r.pair(), vocab, 64);
    bool good = ex.source_ids.size() == ex.target_ids.size() && ex.n_mask.size() == ex.source_ids.size() &&
                ex.word_spans.size() == r.input.size();
    std::size_t pos = 0;
    for (const auto& span : ex.word_spans) {
      good = good && span.begin == pos && span.end > span.begin;
      pos = span.end;
    }
    good = good && pos == ex.size();
    good = good && detokenize(ex.target_ids, vocab) == flatten_phrases(r.output);
    ok += good;

    TokenIds plain;
    std::vector<int> counts;
    for (std::size_t i = 0; i < ex.size(); ++i) {
      if (ex.source_ids[i] == Vocabulary::kMask) continue;
      plain.push_back(ex.source_ids[i]);
      counts.push_back(ex.n_mask[i]);
    }
    rebuilt += insert_masks(plain, counts) == ex.source_ids;
  }
  const double secs = seconds_since(t0);
  AlignResult out;
  out.invariants.pass = total >= kAlignPairs && ok == total && secs < kAlignSeconds;
  out.invariants.detail = std::to_string(ok) + "/" + std::to_string(total) + " pairs, " + fmt("%.1f s", secs);
  out.reinsertion.pass = total >= kAlignPairs && rebuilt == total;
  out.reinsertion.detail = std::to_string(rebuilt) + "/" + std::to_string(total) + " sources rebuilt";
  return out;
}

// ---------------------------------------------------------------------------
// 3: RAN reductions

Vector random_distribution(Rng& rng, Eigen::Index k) {
  Vector p(k);
  for (Eigen::Index i = 0; i < k; ++i) p(i) = 0.01 + uniform01(rng);
  return p / p.sum();
}

Outcome ran_reductions() {
  Rng rng(303);
  double worst_vote = 0.0, worst_uniform = 0.0;
  for (int i = 0; i < kReductionInstances; ++i) {
    RanInstance inst;
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng() % 30);
    for (auto& v : inst.votes) {
      if (rng() % 3) v = static_cast<TokenId>(rng() % static_cast<std::uint64_t>(k));
    }
    inst.p = random_distribution(rng, k);
    RanWeights ones;
    ones.rule = {1.0, 1.0};
    ones.student = 1.0;
    // Brute-force vote: count each source's mass class by class.
    Vector vote = Vector::Zero(k);
    for (Eigen::Index c = 0; c < k; ++c) {
      double mass = inst.p(c);
      for (const auto& v : inst.votes) mass += (v && *v == c) ? 1.0 : 0.0;
      vote(c) = mass / static_cast<double>(1 + inst.fired());
    }
    worst_vote = std::max(worst_vote, (aggregate(inst, ones) - vote).cwiseAbs().maxCoeff());
    const Vector u = Vector::Constant(k, 1.0 / static_cast<double>(k));
    worst_uniform = std::max(worst_uniform, (aggregate(inst, RanWeights{}) - u).cwiseAbs().maxCoeff());
  }
  Outcome o;
  o.pass = worst_vote <= kReductionTol && worst_uniform <= kReductionTol;
  o.detail = "majority dev " + fmt("%.2e", worst_vote) + ", uniform dev " + fmt("%.2e", worst_uniform);
  return o;
}

// ---------------------------------------------------------------------------
// 4: gradient checks

StudentConfig grad_student_config(Rng& rng) {
  StudentConfig c;
  c.embed_dim = 4 + static_cast<int>(rng() % 6);
  c.ff_dim = 4 + static_cast<int>(rng() % 10);
  c.layers = 1 + static_cast<int>(rng() % 2);
  c.max_len = 16;
  c.max_n_mask = 2;
  return c;
}

TokenIds random_ids(Rng& rng, std::size_t len, std::size_t vocab) {
  TokenIds t(len);
  for (auto& id : t) id = static_cast<TokenId>(1 + rng() % (vocab - 1));
  return t;
}

double student_grad_error(std::uint64_t seed, int kind) {
  Rng rng(seed);
  const std::size_t vocab = 8 + rng() % 12;
  StudentModel model(grad_student_config(rng), vocab, rng);
  const std::size_t sentences = 1 + rng() % 3;
  std::vector<Matrix> grads = zeros_like(model.params());
  std::function<double()> loss;
  std::vector<AlignedExample> hard;
  std::vector<SoftExample> soft;
  for (std::size_t s = 0; s < sentences; ++s) {
    const std::size_t len = 1 + rng() % 7;
    if (kind < 2) {
      AlignedExample ex;
      ex.source_ids = random_ids(rng, len, vocab);
      ex.target_ids = random_ids(rng, len, vocab);
      for (std::size_t i = 0; i < len; ++i) ex.n_mask.push_back(i == 0 ? 1 : static_cast<int>(rng() % 3) - 1);
      hard.push_back(std::move(ex));
    } else {
      SoftExample ex;
      ex.source_ids = random_ids(rng, len, vocab);
      ex.q = Matrix(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(vocab));
      for (Eigen::Index r = 0; r < ex.q.rows(); ++r) {
        ex.q.row(r) = random_distribution(rng, ex.q.cols()).transpose();
      }
      soft.push_back(std::move(ex));
    }
  }
  if (kind < 2) {
    std::vector<const AlignedExample*> batch;
    for (const auto& e : hard) batch.push_back(&e);
    const LossWeights w = kind == 0 ? LossWeights{1.0, 0.0} : LossWeights{0.0, 1.0};
    supervised_loss(model, batch, w, &grads);
    loss = [&model, batch, w] { return supervised_loss(model, batch, w, nullptr); };
  } else {
    std::vector<const SoftExample*> batch;
    for (const auto& e : soft) batch.push_back(&e);
    soft_label_loss(model, batch, {1.0, 0.0}, &grads);
    loss = [&model, batch] { return soft_label_loss(model, batch, {1.0, 0.0}, nullptr); };
  }
  return testing::finite_difference(model.params(), grads, loss, rng).max_rel_error;
}

double ran_grad_error(std::uint64_t seed, RanObjective objective) {
  Rng rng(seed);
  RanConfig c;
  c.rule_dim = 3 + static_cast<int>(rng() % 6);
  c.hidden = 3 + static_cast<int>(rng() % 6);
  c.student_in_rule_count = rng() % 2 == 0;
  const int dim = 3 + static_cast<int>(rng() % 8);
  RanModel model(c, dim, rng);
  std::vector<RanInstance> data(2 + rng() % 6);
  for (auto& inst : data) {
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng() % 8);
    inst.h = Vector(dim);
    for (int i = 0; i < dim; ++i) inst.h(i) = 2.0 * uniform01(rng) - 1.0;
    for (auto& v : inst.votes) {
      if (rng() % 3) v = static_cast<TokenId>(rng() % static_cast<std::uint64_t>(k));
    }
    inst.p = random_distribution(rng, k);
    inst.gold = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
  }
  std::vector<const RanInstance*> batch;
  for (const auto& d : data) batch.push_back(&d);
  std::vector<Matrix> grads = zeros_like(model.params());
  ran_objective(model, batch, objective, &grads);
  auto loss = [&] { return ran_objective(model, batch, objective, nullptr); };
  return testing::finite_difference(model.params(), grads, loss, rng, 10).max_rel_error;
}

Outcome gradient_checks() {
  const char* names[] = {"token CE", "mask CE", "soft CE", "RAN entropy", "RAN CE"};
  double worst[5] = {0, 0, 0, 0, 0};
  for (int i = 0; i < kGradInstances; ++i) {
    const std::uint64_t seed = 4000 + static_cast<std::uint64_t>(i);
    for (int kind = 0; kind < 3; ++kind) worst[kind] = std::max(worst[kind], student_grad_error(seed, kind));
    worst[3] = std::max(worst[3], ran_grad_error(seed, RanObjective::kEntropy));
    worst[4] = std::max(worst[4], ran_grad_error(seed, RanObjective::kCrossEntropy));
  }
  Outcome o;
  o.pass = true;
  std::ostringstream d;
  d << kGradInstances << " instances each; max rel err";
  for (int k = 0; k < 5; ++k) {
    o.pass = o.pass && worst[k] <= kGradTol;
    d << (k ? ", " : " ") << names[k] << " " << fmt("%.1e", worst[k]);
  }
  o.detail = d.str();
  return o;
}

// ---------------------------------------------------------------------------
// 6: metric oracle

Outcome metric_oracle() {
  Rng rng(606);
  int agree = 0;
  for (int i = 0; i < kMetricTriples; ++i) {
    const testing::Triple t = testing::random_triple(rng);
    const MetricsReport r = evaluate(t.source, t.target, t.predicted);
    const testing::Recount o = testing::recount(t.source, t.target, t.predicted);
    // Ratios from the recount, with the documented zero-denominator conventions.
    const double recall = o.need ? static_cast<double>(o.tp) / static_cast<double>(o.need) : 1.0;
    const double precision = o.pred ? static_cast<double>(o.tp) / static_cast<double>(o.pred) : (o.need ? 0.0 : 1.0);
    const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    const double integ = o.keep ? static_cast<double>(o.kept) / static_cast<double>(o.keep) : 1.0;
    const double acc = o.tokens ? static_cast<double>(o.correct) / static_cast<double>(o.tokens) : 0.0;
    agree += r.prf.recall == recall && r.prf.precision == precision && r.prf.f1 == f1 && r.integrity == integ &&
             r.accuracy == acc;
  }
  Outcome out;
  out.pass = agree == kMetricTriples;
  out.detail = std::to_string(agree) + "/" + std::to_string(kMetricTriples) + " triples exact";
  return out;
}

// ---------------------------------------------------------------------------
// 7: two-rule experiment

// Binary labels; rule 0 is right 95% of the time, rule 1 30% (worse than
// chance), the student 70%. Each rule fires on 90% of instances.
std::vector<RanInstance> two_rule_instances(Rng& rng, std::size_t n, int dim) {
  std::vector<RanInstance> out(n);
  for (auto& inst : out) {
    inst.gold = static_cast<int>(rng() % 2);
    inst.h = Vector(dim);
    for (int i = 0; i < dim; ++i) inst.h(i) = 2.0 * uniform01(rng) - 1.0;
    const double acc[kNumRules] = {0.95, 0.30};
    for (int j = 0; j < kNumRules; ++j) {
      if (uniform01(rng) < 0.9) {
        inst.votes[static_cast<std::size_t>(j)] = uniform01(rng) < acc[j] ? inst.gold : 1 - inst.gold;
      }
    }
    const int guess = uniform01(rng) < 0.7 ? inst.gold : 1 - inst.gold;
    inst.p = Vector(2);
    inst.p(guess) = 0.6 + 0.3 * uniform01(rng);
    inst.p(1 - guess) = 1.0 - inst.p(guess);
  }
  return out;
}

Outcome two_rule_experiment() {
  const auto t0 = std::chrono::steady_clock::now();
  int wins = 0;
  std::ostringstream d;
  for (int s = 1; s <= kTwoRuleSeeds; ++s) {
    Rng rng = make_rng(static_cast<std::uint64_t>(s), {0x7255});
    const int dim = 16;
    const auto pseudo = two_rule_instances(rng, 4000, dim);
    const auto labeled = two_rule_instances(rng, 1000, dim);
    const auto held_out = two_rule_instances(rng, 2000, dim);
    RanConfig c = RunConfig::desk().ran;
    RanModel model(c, dim, rng);
    train_ran(model, pseudo, labeled, rng);
    double reliable = 0.0, unreliable = 0.0;
    for (const auto& inst : held_out) {
      const RanWeights w = model.attention(inst.h);
      reliable += w.rule[0];
      unreliable += w.rule[1];
    }
    reliable /= static_cast<double>(held_out.size());
    unreliable /= static_cast<double>(held_out.size());
    wins += reliable > unreliable;
    d << (s > 1 ? "; " : "") << "seed " << s << " " << fmt("%.3f", reliable) << " vs " << fmt("%.3f", unreliable);
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = wins >= kTwoRuleNeeded && secs < kTwoRuleSeconds;
  o.detail = std::to_string(wins) + "/" + std::to_string(kTwoRuleSeeds) + " seeds (" + d.str() + "), " +
             fmt("%.1f s", secs);
  return o;
}

// ---------------------------------------------------------------------------
// 8: synthetic benchmark

struct BenchmarkSeed {
  MetricsReport student, self_training, weak_supervision;
};

// The three regimes share one Step 1 student per seed: each regime starts
// from the same D_L-trained model, as in the training procedure.
BenchmarkSeed benchmark_seed(std::uint64_t seed) {
  CorpusConfig cc;
  cc.n_labeled = 2000;
  cc.n_unlabeled = 20000;
  cc.seed = seed;
  const SyntheticCorpus corpus = generate_corpus(lexicon(), cc);
  Rng dict_rng = make_rng(seed, {0xD1C7});
  RuleSet rules{RegexRule::default_rules(), make_seed_dictionary(lexicon(), 0.4, 0.05, dict_rng)};
  RunConfig config = RunConfig::desk();
  config.seed = seed;
  config.split_seed = seed;
  const PreparedData data = prepare_data(corpus.labeled, corpus.unlabeled, rules, config, &lexicon());
  const RunState step1 = train_step1(config, data);
  BenchmarkSeed out;
  out.student = evaluate_rows(step1.student, data.vocab, data.test);
  config.regime = Regime::kSelfTraining;
  out.self_training = run_regime(config, data, step1).test;
  config.regime = Regime::kWeakSupervision;
  out.weak_supervision = run_regime(config, data, step1).test;
  return out;
}

Outcome synthetic_benchmark() {
  const auto t0 = std::chrono::steady_clock::now();
  double f1[3] = {0, 0, 0}, integ[3] = {0, 0, 0};
  for (int s = 1; s <= kBenchSeeds; ++s) {
    const BenchmarkSeed b = benchmark_seed(static_cast<std::uint64_t>(s));
    const MetricsReport* r[3] = {&b.student, &b.self_training, &b.weak_supervision};
    for (int k = 0; k < 3; ++k) {
      f1[k] += r[k]->prf.f1 / kBenchSeeds;
      integ[k] += r[k]->integrity / kBenchSeeds;
    }
    std::cerr << "  benchmark seed " << s << ": student " << b.student.prf.f1 << ", self_training "
              << b.self_training.prf.f1 << ", weak_supervision " << b.weak_supervision.prf.f1 << " ("
              << seconds_since(t0) << " s)\n";
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = f1[2] >= f1[1] && f1[2] - f1[0] >= kBenchMinGain && secs <= kBenchSeconds;
  for (double i : integ) o.pass = o.pass && i >= kBenchMinIntegrity;
  o.detail = "mean F1 student " + fmt("%.4f", f1[0]) + ", self_training " + fmt("%.4f", f1[1]) +
             ", weak_supervision " + fmt("%.4f", f1[2]) + "; integrity " + fmt("%.4f", integ[0]) + "/" +
             fmt("%.4f", integ[1]) + "/" + fmt("%.4f", integ[2]) + "; " + fmt("%.0f s", secs);
  return o;
}

// ---------------------------------------------------------------------------
// 9: diacritic augmentation

double stripped_test_f1(std::uint64_t seed, double p) {
  CorpusConfig cc;
  cc.n_labeled = 2000;
  cc.n_unlabeled = 0;
  cc.seed = 900 + seed;
  const SyntheticCorpus corpus = generate_corpus(lexicon(), cc);
  RunConfig config = RunConfig::desk();
  config.regime = Regime::kStudent;
  config.seed = seed;
  config.split_seed = seed;
  config.p_diacritic = p;
  const PreparedData data = prepare_data(corpus.labeled, {}, RuleSet{}, config, &lexicon());
  const RunState step1 = train_step1(config, data);
  std::vector<LabeledRow> stripped = data.test;
  Rng rng(seed);
  for (auto& row : stripped) {
    for (auto& w : row.input) w = strip_diacritics(w, 1.0, lexicon(), rng);
  }
  return evaluate_rows(step1.student, data.vocab, stripped).prf.f1;
}

Outcome augmentation_trend() {
  double without = 0.0, with = 0.0;
  for (int s = 1; s <= kAugSeeds; ++s) {
    without += stripped_test_f1(static_cast<std::uint64_t>(s), 0.0) / kAugSeeds;
    with += stripped_test_f1(static_cast<std::uint64_t>(s), 1.0) / kAugSeeds;
  }
  Outcome o;
  o.pass = with - without >= kAugMinGain;
  o.detail = "stripped-test F1 p=0 " + fmt("%.4f", without) + ", p=1 " + fmt("%.4f", with);
  return o;
}

// ---------------------------------------------------------------------------
// 10: determinism

std::string full_report(std::uint64_t seed) {
  CorpusConfig cc;
  cc.n_labeled = 400;
  cc.n_unlabeled = 1500;
  cc.seed = 1000 + seed;
  const SyntheticCorpus corpus = generate_corpus(lexicon(), cc);
  Rng dict_rng = make_rng(seed, {0xD1C7});
  RuleSet rules{RegexRule::default_rules(), make_seed_dictionary(lexicon(), 0.4, 0.05, dict_rng)};
  RunConfig config = RunConfig::desk();
  config.seed = seed;
  config.iterations = 2;
  config.n_downsample = 256;
  const PreparedData data = prepare_data(corpus.labeled, corpus.unlabeled, rules, config, &lexicon());
  const RunResult r = run_regime(config, data, train_step1(config, data));
  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : r.state.history) history.push_back(h.to_json());
  return nlohmann::json{{"dev", r.dev.to_json()}, {"test", r.test.to_json()}, {"history", history}}.dump(1);
}

Outcome determinism() {
  const std::string a = full_report(7);
  const std::string b = full_report(7);
  Outcome o;
  o.pass = a == b;
  o.detail = std::to_string(a.size()) + "-byte reports " + (o.pass ? "identical" : "differ");
  return o;
}

// ---------------------------------------------------------------------------
// 5: distribution audit over every end-to-end run above

Outcome distribution_audit(bool any_e2e) {
  const audit::Summary s = audit::summary();
  Outcome o;
  o.pass = any_e2e && s.rows > 0 && s.violations == 0 && s.max_sum_deviation <= kDistTol && s.min_entry >= 0.0;
  o.detail = std::to_string(s.rows) + " rows audited, " + std::to_string(s.violations) + " violations, max |sum-1| " +
             fmt("%.2e", s.max_sum_deviation) + ", min entry " + fmt("%.2e", s.min_entry);
  if (!any_e2e) o.detail += " (no end-to-end criterion selected)";
  return o;
}

}  // namespace
}  // namespace lexnorm

int main(int argc, char** argv) {
  using namespace lexnorm;
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::stoi(argv[i]));
  auto want = [&](int c) { return wanted.empty() || wanted.count(c) > 0; };

  const char* names[] = {"",
                         "alignment invariants",
                         "n_mask reinsertion",
                         "RAN reductions",
                         "gradient checks",
                         "distribution validity",
                         "metric oracle",
                         "rule-reliability learning",
                         "synthetic benchmark ordering",
                         "diacritic augmentation trend",
                         "determinism"};
  std::map<int, Outcome> results;
  auto timed = [&](int id, const std::function<Outcome()>& f) {
    if (!want(id)) return;
    const auto t0 = std::chrono::steady_clock::now();
    std::cerr << "running " << id << " (" << names[id] << ")\n";
    results[id] = f();
    std::cerr << "  done in " << seconds_since(t0) << " s\n";
  };

  audit::reset();
  if (want(1) || want(2)) {
    const auto t0 = std::chrono::steady_clock::now();
    std::cerr << "running 1-2 (alignment)\n";
    const AlignResult a = alignment_criteria();
    if (want(1)) results[1] = a.invariants;
    if (want(2)) results[2] = a.reinsertion;
    std::cerr << "  done in " << seconds_since(t0) << " s\n";
  }
  timed(3, ran_reductions);
  timed(4, gradient_checks);
  timed(6, metric_oracle);
  timed(7, two_rule_experiment);
  // The audit covers the end-to-end runs only.
  audit::reset();
  timed(8, synthetic_benchmark);
  timed(9, augmentation_trend);
  timed(10, determinism);
  if (want(5)) results[5] = distribution_audit(want(8) || want(9) || want(10));

  int failed = 0;
  for (const auto& [id, o] : results) {
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << names[id] << "): " << o.detail << "\n";
    failed += !o.pass;
  }
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << results.size() - static_cast<std::size_t>(failed) << "/"
            << results.size() << "\n";
  return failed ? 1 : 0;
}
