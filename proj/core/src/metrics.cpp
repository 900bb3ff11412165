#include "fedapm/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "fedapm/errors.hpp"

namespace fedapm {

double binary_auc(std::span<const double> scores, std::span<const int> labels, int positive_label) {
  require(scores.size() == labels.size(), "binary_auc: size mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo;
    while (hi < n && scores[order[hi]] == scores[order[lo]]) ++hi;
    const double midrank = 0.5 * static_cast<double>(lo + 1 + hi);
    for (std::size_t k = lo; k < hi; ++k) {
      if (labels[order[k]] == positive_label) {
        rank_sum += midrank;
        ++n_pos;
      }
    }
    lo = hi;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ContractViolation("binary_auc: need both classes");
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

ClassificationMetrics evaluate_metrics(const Matrix& scores, std::span<const int> labels) {
  const auto n = static_cast<std::size_t>(scores.rows());
  const int classes = static_cast<int>(scores.cols());
  require(n == labels.size(), "evaluate_metrics: one label per score row");
  require(n > 0, "evaluate_metrics: no samples");
  require(classes >= 2, "evaluate_metrics: need at least two classes");
  for (int y : labels) require(y >= 0 && y < classes, "evaluate_metrics: label out of range");

  ClassificationMetrics out;
  std::vector<int> predicted(n);
  std::vector<long> tp(classes, 0), fp(classes, 0), support(classes, 0);
  long correct = 0;
  for (std::size_t k = 0; k < n; ++k) {
    Eigen::Index best = 0;
    scores.row(static_cast<Eigen::Index>(k)).maxCoeff(&best);
    predicted[k] = static_cast<int>(best);
    ++support[labels[k]];
    if (predicted[k] == labels[k]) {
      ++correct;
      ++tp[labels[k]];
    } else {
      ++fp[predicted[k]];
    }
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(n);

  double f1_sum = 0.0, auc_sum = 0.0;
  int present = 0;
  std::vector<double> column(n);
  for (int c = 0; c < classes; ++c) {
    if (support[c] == 0) {
      out.warnings.push_back("class " + std::to_string(c) + " absent from labels; excluded");
      continue;
    }
    ++present;
    const double denom = static_cast<double>(2 * tp[c] + fp[c] + (support[c] - tp[c]));
    f1_sum += 2.0 * static_cast<double>(tp[c]) / denom;
    if (support[c] == static_cast<long>(n)) {
      out.warnings.push_back("class " + std::to_string(c) + " has no negatives; AUC taken as 0.5");
      auc_sum += 0.5;
      continue;
    }
    for (std::size_t k = 0; k < n; ++k) column[k] = scores(static_cast<Eigen::Index>(k), c);
    auc_sum += binary_auc(column, labels, c);
  }
  for (int c = 0; c < classes; ++c) {
    if (support[c] > 0 && tp[c] == 0 && fp[c] == 0) {
      out.warnings.push_back("class " + std::to_string(c) + " never predicted; F1 set to 0");
    }
  }
  out.macro_f1 = f1_sum / present;
  out.auc = auc_sum / present;
  return out;
}

}  // namespace fedapm
