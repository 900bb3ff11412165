#include "fedapm/csv.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "fedapm/errors.hpp"

namespace fedapm {

std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::string emit_csv(std::span<const MetricsRow> rows) {
  std::string out(kCsvHeader);
  out += '\n';
  if (rows.empty()) return out;
  const std::string& method = rows.front().method;
  for (const auto& r : rows) {
    if (r.method != method) throw ContractViolation("emit_csv: rows mix methods");
    out += std::to_string(r.round);
    out += ',';
    out += r.method;
    out += ',';
    out += std::to_string(r.seed);
    for (double x : {r.train_loss, r.accuracy, r.f1, r.auc, r.drift, r.lagrangian, r.lyapunov,
                     r.descent_lhs, r.descent_rhs, r.relerr_lhs, r.relerr_rhs, r.r1, r.r2, r.r3, r.r4}) {
      out += ',';
      out += format_real(x);
    }
    out += '\n';
  }
  return out;
}

namespace {

double parse_real(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return HUGE_VAL;
  if (s == "-inf") return -HUGE_VAL;
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ContractViolation("parse_csv: bad number '" + s + "'");
  return x;
}

}  // namespace

std::vector<MetricsRow> parse_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw ContractViolation("parse_csv: unexpected header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 18) throw ContractViolation("parse_csv: expected 18 columns");
    MetricsRow r;
    r.round = std::stoi(cells[0]);
    r.method = cells[1];
    r.seed = std::stoull(cells[2]);
    double* fields[] = {&r.train_loss, &r.accuracy, &r.f1, &r.auc, &r.drift,
                        &r.lagrangian, &r.lyapunov, &r.descent_lhs, &r.descent_rhs, &r.relerr_lhs,
                        &r.relerr_rhs, &r.r1, &r.r2, &r.r3, &r.r4};
    for (std::size_t k = 0; k < 15; ++k) *fields[k] = parse_real(cells[k + 3]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace fedapm
