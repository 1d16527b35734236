#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "lexnorm/text_prep.hpp"

namespace lexnorm {

struct EvalCounts {
  std::uint64_t need_norm = 0;
  std::uint64_t pred_need_norm = 0;
  std::uint64_t tp_need_norm = 0;
  std::uint64_t need_no_norm = 0;
  std::uint64_t tp_need_no_norm = 0;
  std::uint64_t n_token = 0;
  std::uint64_t tp_token = 0;

  EvalCounts& operator+=(const EvalCounts& o);
  bool operator==(const EvalCounts& o) const = default;
};

EvalCounts count_sentence(const Words& source, const Words& target, const Words& predicted);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// precision is 1 when nothing needed or received a change, 0 when only the
// prediction side is empty; recall is 1 when nothing needed a change; F1 is 0
// when precision + recall is 0.
Prf precision_recall_f1(const EvalCounts& c);
// 1 when there is nothing to preserve.
double integrity(const EvalCounts& c);
// Micro average: total correct tokens over total tokens.
double sentence_accuracy(const EvalCounts& c);

struct MetricsReport {
  EvalCounts counts;
  Prf prf;
  double integrity = 1.0;
  double accuracy = 0.0;

  nlohmann::json to_json() const;
  // Ratios are recomputed from the stored counts.
  static MetricsReport from_json(const nlohmann::json& j);
};

MetricsReport evaluate(const std::vector<Words>& sources, const std::vector<Words>& targets,
                       const std::vector<Words>& predictions);

}  // namespace lexnorm
