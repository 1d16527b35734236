#include "lexnorm/metrics.hpp"

namespace lexnorm {

EvalCounts& EvalCounts::operator+=(const EvalCounts& o) {
  need_norm += o.need_norm;
  pred_need_norm += o.pred_need_norm;
  tp_need_norm += o.tp_need_norm;
  need_no_norm += o.need_no_norm;
  tp_need_no_norm += o.tp_need_no_norm;
  n_token += o.n_token;
  tp_token += o.tp_token;
  return *this;
}

EvalCounts count_sentence(const Words& source, const Words& target, const Words& predicted) {
  if (source.size() != target.size() || source.size() != predicted.size()) {
    throw LengthMismatch("source/target/prediction lengths " + std::to_string(source.size()) + "/" +
                         std::to_string(target.size()) + "/" + std::to_string(predicted.size()));
  }
  EvalCounts c;
  c.n_token = source.size();
  for (std::size_t i = 0; i < source.size(); ++i) {
    const bool needs = source[i] != target[i];
    const bool changed = predicted[i] != source[i];
    const bool correct = predicted[i] == target[i];
    if (changed) ++c.pred_need_norm;
    if (correct) ++c.tp_token;
    if (needs) {
      ++c.need_norm;
      if (correct) ++c.tp_need_norm;
    } else {
      ++c.need_no_norm;
      if (!changed) ++c.tp_need_no_norm;
    }
  }
  return c;
}

Prf precision_recall_f1(const EvalCounts& c) {
  Prf r;
  r.recall = c.need_norm ? static_cast<double>(c.tp_need_norm) / static_cast<double>(c.need_norm) : 1.0;
  if (c.pred_need_norm) {
    r.precision = static_cast<double>(c.tp_need_norm) / static_cast<double>(c.pred_need_norm);
  } else {
    r.precision = c.need_norm == 0 ? 1.0 : 0.0;
  }
  const double s = r.precision + r.recall;
  r.f1 = s > 0.0 ? 2.0 * r.precision * r.recall / s : 0.0;
  return r;
}

double integrity(const EvalCounts& c) {
  return c.need_no_norm ? static_cast<double>(c.tp_need_no_norm) / static_cast<double>(c.need_no_norm) : 1.0;
}

double sentence_accuracy(const EvalCounts& c) {
  return c.n_token ? static_cast<double>(c.tp_token) / static_cast<double>(c.n_token) : 0.0;
}

nlohmann::json MetricsReport::to_json() const {
  return {{"precision", prf.precision},
          {"recall", prf.recall},
          {"f1", prf.f1},
          {"integrity", integrity},
          {"accuracy", accuracy},
          {"counts",
           {{"need_norm", counts.need_norm},
            {"pred_need_norm", counts.pred_need_norm},
            {"tp_need_norm", counts.tp_need_norm},
            {"need_no_norm", counts.need_no_norm},
            {"tp_need_no_norm", counts.tp_need_no_norm},
            {"n_token", counts.n_token},
            {"tp_token", counts.tp_token}}}};
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  const auto& c = j.at("counts");
  MetricsReport r;
  r.counts.need_norm = c.at("need_norm").get<std::uint64_t>();
  r.counts.pred_need_norm = c.at("pred_need_norm").get<std::uint64_t>();
  r.counts.tp_need_norm = c.at("tp_need_norm").get<std::uint64_t>();
  r.counts.need_no_norm = c.at("need_no_norm").get<std::uint64_t>();
  r.counts.tp_need_no_norm = c.at("tp_need_no_norm").get<std::uint64_t>();
  r.counts.n_token = c.at("n_token").get<std::uint64_t>();
  r.counts.tp_token = c.at("tp_token").get<std::uint64_t>();
  r.prf = precision_recall_f1(r.counts);
  r.integrity = lexnorm::integrity(r.counts);
  r.accuracy = sentence_accuracy(r.counts);
  return r;
}

MetricsReport evaluate(const std::vector<Words>& sources, const std::vector<Words>& targets,
                       const std::vector<Words>& predictions) {
  if (sources.size() != targets.size() || sources.size() != predictions.size()) {
    throw RowMismatch("evaluation needs equal numbers of source, target and predicted rows");
  }
  MetricsReport r;
  for (std::size_t i = 0; i < sources.size(); ++i) r.counts += count_sentence(sources[i], targets[i], predictions[i]);
  r.prf = precision_recall_f1(r.counts);
  r.integrity = integrity(r.counts);
  r.accuracy = sentence_accuracy(r.counts);
  return r;
}

}  // namespace lexnorm
