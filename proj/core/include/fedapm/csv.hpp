#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fedapm {

// One CSV line. Accuracy, F1 and AUC are NaN for regression problems; the theory columns
// are NaN for methods without a Lagrangian.
struct MetricsRow {
  int round = 0;
  std::string method;
  std::uint64_t seed = 0;
  double train_loss = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
  double drift = 0.0;
  double lagrangian = 0.0;
  double lyapunov = 0.0;
  double descent_lhs = 0.0;
  double descent_rhs = 0.0;
  double relerr_lhs = 0.0;
  double relerr_rhs = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  double r3 = 0.0;
  double r4 = 0.0;
};

inline constexpr std::string_view kCsvHeader =
    "round,method,seed,train_loss,accuracy,f1,auc,drift,lagrangian,lyapunov,descent_lhs,"
    "descent_rhs,relerr_lhs,relerr_rhs,r1,r2,r3,r4";

// Header plus one line per row; reals printed with 12 significant digits.
std::string emit_csv(std::span<const MetricsRow> rows);

// Inverse of emit_csv. Throws ContractViolation on a wrong header or malformed line.
std::vector<MetricsRow> parse_csv(std::string_view text);

std::string format_real(double x);

}  // namespace fedapm
