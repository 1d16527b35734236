#include "lexnorm/config.hpp"

#include <algorithm>
#include <cctype>

#include "lexnorm/errors.hpp"

extern char** environ;

namespace lexnorm {

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::kStudent:
      return "student";
    case Regime::kSelfTraining:
      return "self_training";
    case Regime::kWeakSupervision:
      return "weak_supervision";
  }
  return "unknown";
}

Regime parse_regime(const std::string& name) {
  if (name == "student") return Regime::kStudent;
  if (name == "self_training") return Regime::kSelfTraining;
  if (name == "weak_supervision") return Regime::kWeakSupervision;
  throw ConfigError("unknown regime '" + name + "' (student, self_training, weak_supervision)");
}

void RunConfig::validate() const {
  if (iterations < 0) throw ConfigError("iterations must be >= 0");
  if (n_downsample == 0) throw ConfigError("n_downsample must be > 0");
  if (epochs_student < 0 || epochs_pseudo < 0 || epochs_finetune < 0) throw ConfigError("epochs must be >= 0");
  if (!(p_diacritic >= 0.0 && p_diacritic <= 1.0)) throw ConfigError("p_diacritic must lie in [0, 1]");
  if (vocab_size <= Vocabulary::kNumSpecials) throw ConfigError("vocab_size too small");
  student.validate();
  ran.validate();
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = {{"regime", to_string(regime)},
                      {"iterations", iterations},
                      {"n_downsample", n_downsample},
                      {"epochs_student", epochs_student},
                      {"epochs_pseudo", epochs_pseudo},
                      {"epochs_finetune", epochs_finetune},
                      {"seed", seed},
                      {"split_seed", split_seed},
                      {"p_diacritic", p_diacritic},
                      {"vocab_size", vocab_size},
                      {"ran_labeled_max", ran_labeled_max},
                      {"pseudo_mask_targets", pseudo_mask_targets}};
  const nlohmann::json sj = student.to_json();
  const nlohmann::json rj = ran.to_json();
  for (const auto& [k, v] : sj.items()) j["student." + k] = v;
  for (const auto& [k, v] : rj.items()) j["ran." + k] = v;
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c = desk();
  nlohmann::json student_j = c.student.to_json();
  nlohmann::json ran_j = c.ran.to_json();
  const nlohmann::json defaults = c.to_json();
  try {
    for (const auto& [key, value] : j.items()) {
      if (!defaults.contains(key)) throw ConfigError("unknown config key '" + key + "'");
      if (key.rfind("student.", 0) == 0) {
        student_j[key.substr(8)] = value;
      } else if (key.rfind("ran.", 0) == 0) {
        ran_j[key.substr(4)] = value;
      }
    }
    c.regime = parse_regime(j.value("regime", to_string(c.regime)));
    c.iterations = j.value("iterations", c.iterations);
    c.n_downsample = j.value("n_downsample", c.n_downsample);
    c.epochs_student = j.value("epochs_student", c.epochs_student);
    c.epochs_pseudo = j.value("epochs_pseudo", c.epochs_pseudo);
    c.epochs_finetune = j.value("epochs_finetune", c.epochs_finetune);
    c.seed = j.value("seed", c.seed);
    c.split_seed = j.value("split_seed", c.split_seed);
    c.p_diacritic = j.value("p_diacritic", c.p_diacritic);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.ran_labeled_max = j.value("ran_labeled_max", c.ran_labeled_max);
    c.pseudo_mask_targets = j.value("pseudo_mask_targets", c.pseudo_mask_targets);
    c.student = StudentConfig::from_json(student_j);
    c.ran = RanConfig::from_json(ran_j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig RunConfig::desk() {
  RunConfig c;
  c.iterations = 6;
  c.n_downsample = 1024;
  c.epochs_student = 6;
  c.epochs_pseudo = 3;
  c.epochs_finetune = 1;
  c.vocab_size = 800;
  c.ran_labeled_max = 512;
  c.student.embed_dim = 48;
  c.student.ff_dim = 96;
  c.student.layers = 2;
  c.ran.rule_dim = 32;
  c.ran.epochs_unsup = 2;
  c.ran.epochs_sup = 2;
  return c;
}

RunConfig RunConfig::full() {
  RunConfig c;
  c.iterations = 10;
  c.n_downsample = 8096;
  c.epochs_student = 5;
  c.epochs_pseudo = 5;
  c.epochs_finetune = 5;
  c.vocab_size = 2000;
  c.ran_labeled_max = 8096;
  c.student.lr_embeddings = 5e-5;
  c.student.lr_encoder = 2e-5;
  c.student.lr_heads = 1e-5;
  c.student.embed_dim = 64;
  c.ran.rule_dim = 128;
  return c;
}

nlohmann::json apply_env_overrides(nlohmann::json flat, const std::map<std::string, std::string>& env) {
  const nlohmann::json all_keys = RunConfig::desk().to_json();
  for (const auto& item : all_keys.items()) {
    const std::string& key = item.key();
    std::string var = "LEXNORM_" + key;
    std::transform(var.begin(), var.end(), var.begin(), [](unsigned char ch) {
      return ch == '.' ? '_' : static_cast<char>(std::toupper(ch));
    });
    auto it = env.find(var);
    if (it == env.end()) continue;
    try {
      flat[key] = nlohmann::json::parse(it->second);
    } catch (const nlohmann::json::exception&) {
      flat[key] = it->second;
    }
  }
  return flat;
}

std::map<std::string, std::string> environment_with_prefix(const std::string& prefix) {
  std::map<std::string, std::string> out;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry(*e);
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    const std::string name = entry.substr(0, eq);
    if (name.rfind(prefix, 0) == 0) out.emplace(name, entry.substr(eq + 1));
  }
  return out;
}

}  // namespace lexnorm
