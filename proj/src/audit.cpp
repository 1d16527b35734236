#include "lexnorm/audit.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

namespace lexnorm::audit {

namespace {

std::mutex g_mutex;
Summary g_summary;

void record(std::uint64_t rows, std::uint64_t bad, double dev, double min_entry) {
  std::lock_guard<std::mutex> lock(g_mutex);
  if (g_summary.rows == 0) g_summary.min_entry = min_entry;
  g_summary.rows += rows;
  g_summary.violations += bad;
  g_summary.max_sum_deviation = std::max(g_summary.max_sum_deviation, dev);
  g_summary.min_entry = std::min(g_summary.min_entry, min_entry);
}

}  // namespace

void check_rows(const Eigen::MatrixXd& probs) {
  if (probs.rows() == 0) return;
  std::uint64_t bad = 0;
  double worst = 0.0;
  double min_entry = probs.minCoeff();
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    const double dev = std::abs(probs.row(r).sum() - 1.0);
    const bool negative = probs.row(r).minCoeff() < 0.0;
    if (!(dev <= kTolerance) || negative) ++bad;
    worst = std::max(worst, std::isfinite(dev) ? dev : 1e300);
  }
  record(static_cast<std::uint64_t>(probs.rows()), bad, worst, min_entry);
}

void check_vector(const Eigen::VectorXd& probs) { check_rows(probs.transpose()); }

Summary summary() {
  std::lock_guard<std::mutex> lock(g_mutex);
  return g_summary;
}

void reset() {
  std::lock_guard<std::mutex> lock(g_mutex);
  g_summary = Summary{};
}

}  // namespace lexnorm::audit
