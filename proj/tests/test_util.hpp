#pragma once

#include <vector>

#include "fedapm/numcore.hpp"
#include "fedapm/rng.hpp"

namespace fedapm::testing {

inline LocalObjective random_softmax(std::uint64_t seed, int samples, int features, int classes,
                                     Strategy strategy = Strategy::output, int hidden = 3,
                                     int personal_features = 1, double alpha = 1.0) {
  Rng rng(seed);
  Matrix x(samples, features);
  for (int r = 0; r < samples; ++r) {
    for (int c = 0; c < features; ++c) x(r, c) = standard_normal(rng);
  }
  std::vector<int> y(static_cast<std::size_t>(samples));
  for (auto& label : y) label = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(classes)));
  SoftmaxLayout layout;
  layout.features = features;
  layout.classes = classes;
  layout.hidden = hidden;
  layout.personal_features = personal_features;
  layout.strategy = strategy;
  return LocalObjective::softmax(layout, std::move(x), std::move(y), alpha);
}

inline Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = standard_normal(rng);
  }
  return m;
}

inline LocalObjective random_quadratic(std::uint64_t seed, int rows, int shared, int personal,
                                       double alpha = 1.0) {
  Rng rng(seed);
  Matrix a = random_matrix(rows, shared, rng);
  Matrix b = random_matrix(rows, personal, rng);
  Eigen::VectorXd y = random_normal(rows, rng);
  return LocalObjective::quadratic(std::move(a), std::move(b), std::move(y), alpha);
}

inline ParamVec vec(std::initializer_list<double> xs) {
  ParamVec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v[k++] = x;
  return v;
}

// Largest relative deviation, with the denominator floored at 1e-3 so near-zero
// components compare absolutely.
inline double rel_err(const ParamVec& a, const ParamVec& b) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const double denom = std::max({std::abs(a[k]), std::abs(b[k]), 1e-3});
    worst = std::max(worst, std::abs(a[k] - b[k]) / denom);
  }
  return worst;
}

}  // namespace fedapm::testing
