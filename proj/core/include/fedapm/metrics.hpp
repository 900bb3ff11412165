#pragma once

#include <span>
#include <string>
#include <vector>

#include "fedapm/numcore.hpp"

namespace fedapm {

struct ClassificationMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double auc = 0.0;  // unweighted mean of one-vs-rest ROC areas
  std::vector<std::string> warnings;
};

// scores: samples x classes, rows need not be normalized. Classes absent from the labels
// are left out of the macro averages (with a warning); a class with no true and no
// predicted positives scores F1 = 0 (also warned).
ClassificationMetrics evaluate_metrics(const Matrix& scores, std::span<const int> labels);

// ROC area for "label == positive_label" against the rest; ties count one half (midranks).
double binary_auc(std::span<const double> scores, std::span<const int> labels, int positive_label);

}  // namespace fedapm
