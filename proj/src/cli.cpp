#include "lexnorm/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "lexnorm/audit.hpp"
#include "lexnorm/checkpoint.hpp"
#include "lexnorm/config.hpp"
#include "lexnorm/dataset.hpp"
#include "lexnorm/errors.hpp"
#include "lexnorm/metrics.hpp"
#include "lexnorm/orchestrator.hpp"
#include "lexnorm/weak_rules.hpp"

namespace lexnorm {

namespace {

namespace fs = std::filesystem;

constexpr const char* kCodeVersion = "lexnorm 1.0.0";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const std::string& path, bool config) {
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    if (config) throw ConfigError(path + ": " + e.what());
    throw DataError(path + ": " + e.what());
  }
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash(const std::string& path) { return path.empty() ? "" : hash_hex(fnv1a(read_file(path))); }

std::string default_data(const std::string& name) { return std::string(LEXNORM_DATA_DIR) + "/" + name; }

// ---------------------------------------------------------------------------
// gen-corpus

struct GenOptions {
  std::string lexicon = default_data("lexicon_vi.json");
  std::string config;
  std::string out = "corpus";
  std::uint64_t seed = 13;
  std::size_t n_labeled = 0;
  std::size_t n_unlabeled = 0;
  double dict_coverage = 0.4;
  double dict_error_rate = 0.05;
  double p_diacritic_char = -1.0;
};

int cmd_gen_corpus(const GenOptions& o) {
  const Lexicon lexicon = Lexicon::load(o.lexicon);
  CorpusConfig cc = o.config.empty() ? CorpusConfig{} : CorpusConfig::from_json(read_json(o.config, true));
  cc.seed = o.seed;
  if (o.n_labeled) cc.n_labeled = o.n_labeled;
  if (o.n_unlabeled) cc.n_unlabeled = o.n_unlabeled;
  if (o.p_diacritic_char >= 0.0) cc.corruption.p_diacritic_char = o.p_diacritic_char;
  const SyntheticCorpus corpus = generate_corpus(lexicon, cc);
  fs::create_directories(o.out);
  write_jsonl(o.out + "/labeled.jsonl", corpus.labeled);
  write_jsonl(o.out + "/unlabeled.jsonl", corpus.unlabeled);
  write_jsonl(o.out + "/unlabeled_gold.sealed.jsonl", corpus.unlabeled_gold);
  Rng dict_rng = make_rng(o.seed, {0xD1C7});
  const DictionaryRule dict = make_seed_dictionary(lexicon, o.dict_coverage, o.dict_error_rate, dict_rng);
  write_file_atomic(o.out + "/dictionary.json", dict.to_json().dump(1) + "\n");
  write_file_atomic(o.out + "/regex_rules.json", RegexRule::default_rules().to_json().dump(1) + "\n");
  nlohmann::json meta = cc.to_json();
  meta["dictionary_coverage"] = o.dict_coverage;
  meta["dictionary_error_rate"] = o.dict_error_rate;
  write_file_atomic(o.out + "/corpus_config.json", meta.dump(1) + "\n");
  std::cout << "wrote " << corpus.labeled.size() << " labeled and " << corpus.unlabeled.size()
            << " unlabeled rows to " << o.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  std::string regime;
  std::string labeled;
  std::string unlabeled;
  std::string dictionary;
  std::string regex;
  std::string lexicon = default_data("lexicon_vi.json");
  std::string config;
  std::string preset = "desk";
  std::string out = "run";
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  std::optional<double> p_diacritic;
  std::optional<std::size_t> n_downsample;
  bool resume = false;
  int stop_after = -1;
};

RunConfig resolve_config(const TrainOptions& o) {
  nlohmann::json flat = o.preset == "full" ? RunConfig::full().to_json() : RunConfig::desk().to_json();
  if (o.preset != "full" && o.preset != "desk") throw ConfigError("unknown preset '" + o.preset + "'");
  if (!o.config.empty()) {
    const nlohmann::json file = read_json(o.config, true);
    if (!file.is_object()) throw ConfigError("config file must hold a JSON object");
    for (const auto& [k, v] : file.items()) flat[k] = v;
  }
  flat = apply_env_overrides(flat, environment_with_prefix());
  if (!o.regime.empty()) flat["regime"] = o.regime;
  if (o.seed) flat["seed"] = *o.seed;
  if (o.iterations) flat["iterations"] = *o.iterations;
  if (o.p_diacritic) flat["p_diacritic"] = *o.p_diacritic;
  if (o.n_downsample) flat["n_downsample"] = *o.n_downsample;
  return RunConfig::from_json(flat);
}

nlohmann::json history_json(const RunState& state) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : state.history) rows.push_back(r.to_json());
  return rows;
}

std::string checkpoint_path(const std::string& out, int iteration) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "iter_%03d.ckpt", iteration);
  return out + "/checkpoints/" + buf;
}

void save_state(const std::string& out, const RunState& state, const RunConfig& config, const Vocabulary& vocab) {
  Checkpoint ck;
  ck.meta["completed_iterations"] = state.completed_iterations;
  ck.meta["config"] = config.to_json();
  ck.meta["vocab_hash"] = hash_hex(vocab.hash());
  ck.meta["history"] = history_json(state);
  nlohmann::json seconds = nlohmann::json::array();
  for (const auto& r : state.history) seconds.push_back(r.seconds);
  ck.meta["seconds"] = seconds;
  ck.meta["pool_inputs"] = state.pool_inputs;
  ck.meta["pool_outputs"] = state.pool_outputs;
  store_student(ck, state.student);
  if (state.ran) store_ran(ck, *state.ran);
  ck.save(checkpoint_path(out, state.completed_iterations));
  std::ostringstream rows;
  for (const auto& r : state.history) rows << r.to_json().dump() << "\n";
  write_file_atomic(out + "/metrics.jsonl", rows.str());
}

RunState load_state(const std::string& path, const RunConfig& config, const Vocabulary& vocab) {
  const Checkpoint ck = Checkpoint::load(path);
  if (ck.meta.at("vocab_hash").get<std::string>() != hash_hex(vocab.hash())) {
    throw DataError("checkpoint " + path + " was written for a different vocabulary");
  }
  nlohmann::json saved = ck.meta.at("config");
  nlohmann::json now = config.to_json();
  if (saved != now) throw ConfigError("checkpoint " + path + " was written with a different config");
  RunState state{ck.meta.at("completed_iterations").get<int>(), restore_student(ck), std::nullopt, {}, {}, {}};
  if (ck.meta.contains("ran")) state.ran = restore_ran(ck);
  state.pool_inputs = ck.meta.at("pool_inputs").get<std::vector<Words>>();
  state.pool_outputs = ck.meta.at("pool_outputs").get<std::vector<Words>>();
  const auto& hist = ck.meta.at("history");
  const auto& secs = ck.meta.at("seconds");
  for (std::size_t i = 0; i < hist.size(); ++i) {
    IterationRecord r = IterationRecord::from_json(hist[i]);
    r.seconds = secs[i].get<double>();
    state.history.push_back(std::move(r));
  }
  return state;
}

std::optional<std::string> latest_checkpoint(const std::string& out) {
  const fs::path dir = fs::path(out) / "checkpoints";
  if (!fs::exists(dir)) return std::nullopt;
  std::optional<std::string> best;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("iter_", 0) != 0 || e.path().extension() != ".ckpt") continue;
    if (!best || name > fs::path(*best).filename().string()) best = e.path().string();
  }
  return best;
}

int cmd_train(const TrainOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig config = resolve_config(o);
  if (o.labeled.empty()) throw ConfigError("--labeled is required");
  if (config.regime != Regime::kStudent && o.unlabeled.empty()) throw ConfigError("--unlabeled is required");
  if (config.regime == Regime::kWeakSupervision && o.dictionary.empty()) {
    throw ConfigError("--dictionary is required for weak_supervision");
  }
  const bool need_lexicon = config.p_diacritic > 0.0 || !o.dictionary.empty();
  std::optional<Lexicon> lexicon;
  if (need_lexicon) lexicon = Lexicon::load(o.lexicon);

  const auto labeled = read_labeled(o.labeled);
  std::vector<UnlabeledRow> unlabeled;
  if (!o.unlabeled.empty()) unlabeled = read_unlabeled(o.unlabeled);
  if (config.regime != Regime::kStudent && config.n_downsample > unlabeled.size()) {
    throw SampleTooLarge("n_downsample " + std::to_string(config.n_downsample) + " exceeds |D_U| = " +
                         std::to_string(unlabeled.size()));
  }
  RuleSet rules;
  rules.regex = o.regex.empty() ? RegexRule::default_rules() : RegexRule::load(o.regex);
  if (!o.dictionary.empty()) {
    rules.dictionary = DictionaryRule::load(o.dictionary, lexicon ? &*lexicon : nullptr);
    for (const auto& w : rules.dictionary.warnings()) std::cerr << "warning: " << w << "\n";
  }
  const PreparedData data = prepare_data(labeled, std::move(unlabeled), rules, config, lexicon ? &*lexicon : nullptr);

  fs::create_directories(o.out);
  write_file_atomic(o.out + "/config.json", config.to_json().dump(1) + "\n");
  data.vocab.save(o.out + "/vocab.json");

  RunState state;
  std::optional<std::string> resumed_from;
  if (o.resume) resumed_from = latest_checkpoint(o.out);
  if (resumed_from) {
    state = load_state(*resumed_from, config, data.vocab);
    std::cerr << "resuming from " << *resumed_from << "\n";
  } else {
    state = train_step1(config, data);
    save_state(o.out, state, config, data.vocab);
  }
  auto hook = [&](const RunState& s) {
    save_state(o.out, s, config, data.vocab);
    const auto& r = s.history.back();
    std::cerr << "iteration " << r.iteration << ": dev f1 " << r.dev.prf.f1 << " (" << r.seconds << " s)\n";
  };
  if (o.stop_after >= 0 && o.stop_after < config.iterations && config.regime != Regime::kStudent) {
    RunConfig partial = config;
    partial.iterations = o.stop_after;
    state = run_iterations(partial, data, std::move(state), hook);
    std::cerr << "stopped after " << state.completed_iterations << " iterations\n";
    return kExitOk;
  }
  RunResult result = run_regime(config, data, std::move(state), hook);

  nlohmann::json report = {{"regime", to_string(config.regime)},
                           {"seed", config.seed},
                           {"iterations_completed", result.state.completed_iterations},
                           {"dev", result.dev.to_json()},
                           {"test", result.test.to_json()},
                           {"history", history_json(result.state)}};
  write_file_atomic(o.out + "/report.json", report.dump(1) + "\n");
  Checkpoint final_ck;
  store_student(final_ck, result.state.student, "student", false);
  if (result.state.ran) store_ran(final_ck, *result.state.ran, "ran", false);
  final_ck.meta["vocab_hash"] = hash_hex(data.vocab.hash());
  final_ck.save(o.out + "/model.ckpt");

  const audit::Summary audit = audit::summary();
  nlohmann::json timings = nlohmann::json::array();
  for (const auto& r : result.state.history) timings.push_back({{"iteration", r.iteration}, {"seconds", r.seconds}});
  nlohmann::json manifest = {
      {"code_version", kCodeVersion},
      {"config", config.to_json()},
      {"seed", config.seed},
      {"datasets",
       {{"labeled", file_hash(o.labeled)},
        {"unlabeled", file_hash(o.unlabeled)},
        {"dictionary", file_hash(o.dictionary)},
        {"regex", file_hash(o.regex)}}},
      {"vocab_hash", hash_hex(data.vocab.hash())},
      {"resumed_from", resumed_from ? nlohmann::json(*resumed_from) : nlohmann::json()},
      {"metric_rows", history_json(result.state)},
      {"timings", {{"iterations", timings}, {"total_seconds", std::chrono::duration<double>(
                                                                  std::chrono::steady_clock::now() - t0)
                                                                  .count()}}},
      {"distribution_audit",
       {{"rows", audit.rows}, {"violations", audit.violations}, {"max_sum_deviation", audit.max_sum_deviation}}}};
  write_file_atomic(o.out + "/manifest.json", manifest.dump(1) + "\n");
  std::cout << report.at("test").dump() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// label

struct LabelOptions {
  std::string checkpoint;
  std::string vocab;
  std::string input;
  std::string out;
};

int cmd_label(const LabelOptions& o) {
  const Checkpoint ck = Checkpoint::load(o.checkpoint);
  const Vocabulary vocab = Vocabulary::load(o.vocab);
  if (ck.meta.contains("vocab_hash") && ck.meta.at("vocab_hash").get<std::string>() != hash_hex(vocab.hash())) {
    throw DataError("vocabulary does not match the checkpoint");
  }
  const StudentModel model = restore_student(ck);
  std::size_t bad = 0;
  std::vector<nlohmann::json> rows;
  std::vector<Words> inputs;
  std::size_t line_no = 0;
  std::ifstream in(o.input);
  if (!in) throw DataError("cannot open " + o.input);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      Words w = j.at("input").get<Words>();
      for (const auto& x : w) {
        if (x.empty()) throw DataError("empty word");
      }
      rows.push_back(std::move(j));
      inputs.push_back(std::move(w));
    } catch (const std::exception& e) {
      ++bad;
      std::cerr << o.input << ":" << line_no << ": skipped: " << e.what() << "\n";
    }
  }
  const auto preds = normalize_batch(model, vocab, inputs);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i]["normalized"] = preds[i];
  write_jsonl(o.out, rows);
  std::cerr << "labeled " << rows.size() << " rows, skipped " << bad << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvalOptions {
  std::string pred;
  std::string gold;
  std::string out;
};

int cmd_evaluate(const EvalOptions& o) {
  const auto pred = read_jsonl(o.pred);
  const auto gold = read_gold(o.gold);
  if (pred.size() != gold.size()) {
    throw RowMismatch("prediction file has " + std::to_string(pred.size()) + " rows, gold has " +
                      std::to_string(gold.size()));
  }
  std::vector<Words> src, tgt, out;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    try {
      const Words input = pred[i].at("input").get<Words>();
      if (input != gold[i].input) throw RowMismatch("row " + std::to_string(i + 1) + " inputs differ");
      src.push_back(gold[i].input);
      tgt.push_back(gold[i].output);
      out.push_back(pred[i].at("normalized").get<Words>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(o.pred + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  const MetricsReport report = evaluate(src, tgt, out);
  const std::string text = report.to_json().dump(1) + "\n";
  std::cout << text;
  if (!o.out.empty()) write_file_atomic(o.out, text);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Weakly supervised lexical normalization"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* g = app.add_subcommand("gen-corpus", "generate a synthetic labeled/unlabeled corpus");
  g->add_option("--lexicon", gen.lexicon, "lexicon JSON");
  g->add_option("--config", gen.config, "corpus config JSON");
  g->add_option("--out", gen.out, "output directory");
  g->add_option("--seed", gen.seed, "generator seed");
  g->add_option("--n", gen.n_labeled, "labeled rows");
  g->add_option("--n-unlabeled", gen.n_unlabeled, "unlabeled rows");
  g->add_option("--dict-coverage", gen.dict_coverage, "share of NSW forms in the seed dictionary");
  g->add_option("--dict-error-rate", gen.dict_error_rate, "share of wrong dictionary entries");
  g->add_option("--p-diacritic-char", gen.p_diacritic_char, "character-level diacritic stripping");

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "train one regime and write a run directory");
  t->add_option("--regime", tr.regime, "student | self_training | weak_supervision");
  t->add_option("--labeled", tr.labeled, "labeled JSONL");
  t->add_option("--unlabeled", tr.unlabeled, "unlabeled JSONL");
  t->add_option("--dictionary", tr.dictionary, "dictionary JSON");
  t->add_option("--regex", tr.regex, "regex rules JSON");
  t->add_option("--lexicon", tr.lexicon, "lexicon JSON (augmentation, dictionary checks)");
  t->add_option("--config", tr.config, "flat JSON config");
  t->add_option("--preset", tr.preset, "desk | full");
  t->add_option("--out", tr.out, "run directory");
  t->add_option("--seed", tr.seed, "training seed");
  t->add_option("--iterations", tr.iterations, "self-training iterations T");
  t->add_option("--p-diacritic", tr.p_diacritic, "diacritic-removal augmentation proportion");
  t->add_option("--n-downsample", tr.n_downsample, "D_pseudo size per iteration");
  t->add_flag("--resume", tr.resume, "continue from the newest checkpoint in --out");
  t->add_option("--stop-after", tr.stop_after, "stop after this many iterations (resume later)");

  LabelOptions lb;
  auto* l = app.add_subcommand("label", "normalize every row of a JSONL file");
  l->add_option("--checkpoint", lb.checkpoint, "model checkpoint")->required();
  l->add_option("--vocab", lb.vocab, "vocabulary JSON")->required();
  l->add_option("--input", lb.input, "input JSONL")->required();
  l->add_option("--out", lb.out, "output JSONL")->required();

  EvalOptions ev;
  auto* e = app.add_subcommand("evaluate", "score predictions against gold");
  e->add_option("--pred", ev.pred, "predicted JSONL (input, normalized)")->required();
  e->add_option("--gold", ev.gold, "gold JSONL (input, output)")->required();
  e->add_option("--out", ev.out, "report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*g) return cmd_gen_corpus(gen);
    if (*t) return cmd_train(tr);
    if (*l) return cmd_label(lb);
    if (*e) return cmd_evaluate(ev);
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return kExitConfig;
  } catch (const DataError& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return kExitData;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}

}  // namespace lexnorm
