#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lexnorm/metrics.hpp"
#include "metric_oracle.hpp"

namespace fs = std::filesystem;

namespace lexnorm {
namespace {

const std::string kCli = LEXNORM_CLI_PATH;

int run(const std::string& args) {
  const int status = std::system((kCli + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<nlohmann::json> read_lines(const fs::path& p) {
  std::vector<nlohmann::json> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

class CliTest : public ::testing::Test {
 protected:
  static fs::path root() {
    static const fs::path dir = [] {
      fs::path d = fs::temp_directory_path() / ("lexnorm_cli_" + std::to_string(::getpid()));
      fs::remove_all(d);
      fs::create_directories(d);
      return d;
    }();
    return dir;
  }

  static fs::path corpus() {
    static const fs::path dir = [] {
      const fs::path d = root() / "corpus";
      EXPECT_EQ(run("gen-corpus --out " + d.string() + " --seed 5 --n 150 --n-unlabeled 120"), 0);
      return d;
    }();
    return dir;
  }

  static fs::path tiny_config() {
    const fs::path p = root() / "tiny.json";
    if (!fs::exists(p)) {
      write_text(p, R"({"iterations": 2, "n_downsample": 40, "epochs_student": 1, "epochs_pseudo": 1,
        "epochs_finetune": 1, "vocab_size": 300, "ran_labeled_max": 40, "student.embed_dim": 16,
        "student.ff_dim": 24, "student.layers": 1, "ran.rule_dim": 8})");
    }
    return p;
  }

  static std::string train_args(const std::string& regime, const fs::path& out) {
    const fs::path c = corpus();
    return "train --regime " + regime + " --labeled " + (c / "labeled.jsonl").string() + " --unlabeled " +
           (c / "unlabeled.jsonl").string() + " --dictionary " + (c / "dictionary.json").string() + " --regex " +
           (c / "regex_rules.json").string() + " --config " + tiny_config().string() + " --seed 3 --out " +
           out.string();
  }
};

TEST_F(CliTest, GenCorpusWritesRowsDeterministically) {
  const fs::path c = corpus();
  EXPECT_EQ(read_lines(c / "labeled.jsonl").size(), 150u);
  EXPECT_EQ(read_lines(c / "unlabeled.jsonl").size(), 120u);
  for (const char* f : {"dictionary.json", "regex_rules.json", "corpus_config.json", "unlabeled_gold.sealed.jsonl"}) {
    EXPECT_TRUE(fs::exists(c / f)) << f;
  }
  const auto row = read_lines(c / "labeled.jsonl").front();
  for (const char* key : {"original", "normalized", "input", "output"}) EXPECT_TRUE(row.contains(key)) << key;
  EXPECT_EQ(row.at("input").size(), row.at("output").size());

  const fs::path again = root() / "corpus_again";
  ASSERT_EQ(run("gen-corpus --out " + again.string() + " --seed 5 --n 150 --n-unlabeled 120"), 0);
  EXPECT_EQ(slurp(c / "labeled.jsonl"), slurp(again / "labeled.jsonl"));
  EXPECT_EQ(slurp(c / "unlabeled.jsonl"), slurp(again / "unlabeled.jsonl"));
  EXPECT_EQ(slurp(c / "dictionary.json"), slurp(again / "dictionary.json"));
}

TEST_F(CliTest, TrainLabelEvaluatePipeline) {
  const fs::path run_dir = root() / "ws";
  ASSERT_EQ(run(train_args("weak_supervision", run_dir)), 0);
  for (const char* f : {"report.json", "manifest.json", "model.ckpt", "vocab.json", "config.json", "metrics.jsonl"}) {
    EXPECT_TRUE(fs::exists(run_dir / f)) << f;
  }
  const auto report = nlohmann::json::parse(slurp(run_dir / "report.json"));
  EXPECT_EQ(report.at("iterations_completed").get<int>(), 2);
  const auto manifest = nlohmann::json::parse(slurp(run_dir / "manifest.json"));
  EXPECT_EQ(manifest.at("distribution_audit").at("violations").get<long>(), 0);
  EXPECT_GT(manifest.at("distribution_audit").at("rows").get<long>(), 0);

  const fs::path labeled = run_dir / "labeled_out.jsonl";
  ASSERT_EQ(run("label --checkpoint " + (run_dir / "model.ckpt").string() + " --vocab " +
                (run_dir / "vocab.json").string() + " --input " + (corpus() / "labeled.jsonl").string() + " --out " +
                labeled.string()),
            0);
  const auto preds = read_lines(labeled);
  const auto gold = read_lines(corpus() / "labeled.jsonl");
  ASSERT_EQ(preds.size(), gold.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    EXPECT_EQ(preds[i].at("normalized").size(), gold[i].at("input").size());
  }

  const fs::path eval_out = run_dir / "eval.json";
  ASSERT_EQ(run("evaluate --pred " + labeled.string() + " --gold " + (corpus() / "labeled.jsonl").string() +
                " --out " + eval_out.string()),
            0);
  // Cross-check against the independent recount.
  std::vector<Words> src, tgt, prd;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    src.push_back(gold[i].at("input").get<Words>());
    tgt.push_back(gold[i].at("output").get<Words>());
    prd.push_back(preds[i].at("normalized").get<Words>());
  }
  const testing::Recount o = testing::recount(src, tgt, prd);
  const auto ev = nlohmann::json::parse(slurp(eval_out));
  const MetricsReport r = MetricsReport::from_json(ev);
  EXPECT_EQ(r.counts.need_norm, static_cast<std::uint64_t>(o.need));
  EXPECT_EQ(r.counts.tp_need_norm, static_cast<std::uint64_t>(o.tp));
  EXPECT_EQ(r.counts.pred_need_norm, static_cast<std::uint64_t>(o.pred));
  EXPECT_EQ(r.counts.tp_need_no_norm, static_cast<std::uint64_t>(o.kept));
  EXPECT_EQ(r.counts.tp_token, static_cast<std::uint64_t>(o.correct));
}

TEST_F(CliTest, EvaluateIdentityAndOracle) {
  const auto gold = read_lines(corpus() / "labeled.jsonl");
  std::ostringstream ident, oracle;
  for (const auto& g : gold) {
    ident << nlohmann::json{{"input", g.at("input")}, {"normalized", g.at("input")}}.dump() << "\n";
    oracle << nlohmann::json{{"input", g.at("input")}, {"normalized", g.at("output")}}.dump() << "\n";
  }
  write_text(root() / "ident.jsonl", ident.str());
  write_text(root() / "oracle.jsonl", oracle.str());
  const std::string g = (corpus() / "labeled.jsonl").string();
  ASSERT_EQ(run("evaluate --pred " + (root() / "ident.jsonl").string() + " --gold " + g + " --out " +
                (root() / "ident_eval.json").string()),
            0);
  ASSERT_EQ(run("evaluate --pred " + (root() / "oracle.jsonl").string() + " --gold " + g + " --out " +
                (root() / "oracle_eval.json").string()),
            0);
  const MetricsReport id = MetricsReport::from_json(nlohmann::json::parse(slurp(root() / "ident_eval.json")));
  const MetricsReport best = MetricsReport::from_json(nlohmann::json::parse(slurp(root() / "oracle_eval.json")));
  EXPECT_DOUBLE_EQ(id.integrity, 1.0);
  EXPECT_EQ(id.counts.tp_need_norm, 0u);
  EXPECT_DOUBLE_EQ(best.prf.f1, 1.0);
  EXPECT_DOUBLE_EQ(best.accuracy, 1.0);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run("train --regime nonsense --labeled x"), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("train --regime student --labeled /nonexistent/labeled.jsonl"), 2);
  const fs::path broken = root() / "broken.jsonl";
  write_text(broken, "{\"input\": [\"a\"], \"normalized\": [\"a\"]}\n");
  EXPECT_EQ(run("evaluate --pred " + broken.string() + " --gold " + (corpus() / "labeled.jsonl").string()), 2);
  // n_downsample larger than D_U is a configuration error.
  const fs::path big = root() / "big.json";
  write_text(big, R"({"n_downsample": 100000})");
  const fs::path c = corpus();
  EXPECT_EQ(run("train --regime self_training --labeled " + (c / "labeled.jsonl").string() + " --unlabeled " +
                (c / "unlabeled.jsonl").string() + " --config " + big.string() + " --out " +
                (root() / "big_run").string()),
            1);
}

TEST_F(CliTest, ResumeGivesIdenticalReport) {
  const fs::path straight = root() / "straight";
  const fs::path split = root() / "split";
  ASSERT_EQ(run(train_args("weak_supervision", straight)), 0);
  ASSERT_EQ(run(train_args("weak_supervision", split) + " --stop-after 1"), 0);
  EXPECT_FALSE(fs::exists(split / "report.json"));
  ASSERT_EQ(run(train_args("weak_supervision", split) + " --resume"), 0);
  EXPECT_EQ(slurp(straight / "report.json"), slurp(split / "report.json"));
  const auto manifest = nlohmann::json::parse(slurp(split / "manifest.json"));
  EXPECT_FALSE(manifest.at("resumed_from").is_null());
}

TEST_F(CliTest, SameSeedByteIdenticalReports) {
  const fs::path a = root() / "st_a";
  const fs::path b = root() / "st_b";
  ASSERT_EQ(run(train_args("self_training", a)), 0);
  ASSERT_EQ(run(train_args("self_training", b)), 0);
  EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));
}

}  // namespace
}  // namespace lexnorm
