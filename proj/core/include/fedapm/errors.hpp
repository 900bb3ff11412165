#pragma once

#include <stdexcept>
#include <string>

namespace fedapm {

// Caller broke a documented precondition (dimensions, ranges).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class InvalidObjective : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// A local iterate became non-finite. Carries the client and round that produced it.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int client, int round, const std::string& what)
      : std::runtime_error("client " + std::to_string(client) + ", round " +
                           std::to_string(round) + ": " + what),
        client_(client),
        round_(round) {}
  int client() const noexcept { return client_; }
  int round() const noexcept { return round_; }

 private:
  int client_;
  int round_;
};

inline void require(bool condition, const char* message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace fedapm
