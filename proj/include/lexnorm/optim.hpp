#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace lexnorm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

struct ParamInfo {
  std::string name;
  int group = 0;
};

std::vector<Matrix> zeros_like(const std::vector<Matrix>& params);

// Scales all gradients so their joint L2 norm is at most max_norm. Returns
// the norm before scaling. max_norm <= 0 disables clipping.
double clip_global_norm(std::vector<Matrix>& grads, double max_norm);

// Adam with bias correction; the learning rate is given per tensor.
class Adam {
 public:
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void reset(const std::vector<Matrix>& params);
  void step(std::vector<Matrix>& params, const std::vector<Matrix>& grads, const std::vector<double>& lrs);

  long steps() const { return t_; }
  std::vector<Matrix>& first_moment() { return m_; }
  std::vector<Matrix>& second_moment() { return v_; }
  const std::vector<Matrix>& first_moment() const { return m_; }
  const std::vector<Matrix>& second_moment() const { return v_; }
  void set_steps(long t) { t_ = t; }

 private:
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long t_ = 0;
};

// Row-wise softmax, stable against large logits.
Matrix softmax_rows(const Matrix& logits);
// Row-wise log-softmax.
Matrix log_softmax_rows(const Matrix& logits);

}  // namespace lexnorm
