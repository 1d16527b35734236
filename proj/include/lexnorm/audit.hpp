#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace lexnorm::audit {

// Process-wide record of every probability row the library emits. End-to-end
// runs read it back to confirm that no row ever left the simplex.
struct Summary {
  std::uint64_t rows = 0;
  std::uint64_t violations = 0;
  double max_sum_deviation = 0.0;
  double min_entry = 0.0;
};

inline constexpr double kTolerance = 1e-9;

// Each row of `probs` must be a distribution.
void check_rows(const Eigen::MatrixXd& probs);
void check_vector(const Eigen::VectorXd& probs);

Summary summary();
void reset();

}  // namespace lexnorm::audit
