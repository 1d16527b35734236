#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "lexnorm/ran_teacher.hpp"
#include "lexnorm/student.hpp"

namespace lexnorm {

enum class Regime { kStudent, kSelfTraining, kWeakSupervision };

std::string to_string(Regime regime);
Regime parse_regime(const std::string& name);

struct RunConfig {
  Regime regime = Regime::kWeakSupervision;
  int iterations = 10;
  std::size_t n_downsample = 512;
  int epochs_student = 5;
  int epochs_pseudo = 5;
  int epochs_finetune = 5;
  std::uint64_t seed = 13;
  // Seed of the 8:1:1 split of D_L, kept apart so every training seed sees
  // the same partition.
  std::uint64_t split_seed = 13;
  double p_diacritic = 0.0;
  std::size_t vocab_size = 800;
  // Labeled sentences fed to the supervised teacher phase per iteration.
  std::size_t ran_labeled_max = 1024;
  // Train the mask-count head on the teacher-side layout during Step 4.
  bool pseudo_mask_targets = true;
  StudentConfig student;
  RanConfig ran;

  void validate() const;

  // Flat key/value form: top-level keys plus "student.*" and "ran.*".
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);

  // Desk-scale defaults sized for a single CPU core.
  static RunConfig desk();
  // Full-scale values: T = 10, n_downsample = 8096, rule dim 128 and the
  // small per-group Adam rates of a pretrained encoder.
  static RunConfig full();
};

// Applies LEXNORM_<KEY> variables (key upper-cased, dots as underscores) on
// top of a flat config. Values parse as JSON when possible, else as strings.
nlohmann::json apply_env_overrides(nlohmann::json flat, const std::map<std::string, std::string>& env);
std::map<std::string, std::string> environment_with_prefix(const std::string& prefix = "LEXNORM_");

}  // namespace lexnorm
