#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace adhmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Point (q, p) of the lifted phase space R^d x R^d.
struct PhaseState {
  Vector q;
  Vector p;

  PhaseState() = default;
  PhaseState(Vector position, Vector momentum);

  Eigen::Index dim() const { return q.size(); }
  bool finite() const { return q.allFinite() && p.allFinite(); }
};

/// Thrown for invalid user input: bad model parameters, malformed configs,
/// out-of-range arguments. Carries every problem found, not just the first.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::string message);
  explicit ConfigError(std::vector<std::string> messages);

  const std::vector<std::string>& messages() const { return messages_; }

 private:
  std::vector<std::string> messages_;
};

class SamplingError : public std::runtime_error {
 public:
  SamplingError(const std::string& what, long attempts)
      : std::runtime_error(what), attempts_(attempts) {}
  long attempts() const { return attempts_; }

 private:
  long attempts_;
};

enum class LeapfrogStage { first_half_kick, drift, second_half_kick };

const char* to_string(LeapfrogStage stage);

class IntegrationError : public std::runtime_error {
 public:
  explicit IntegrationError(LeapfrogStage stage);
  LeapfrogStage stage() const { return stage_; }

 private:
  LeapfrogStage stage_;
};

/// The high-accuracy flow drifted beyond its energy gate.
class ReferenceFlowError : public std::runtime_error {
 public:
  ReferenceFlowError(double drift, double tolerance);
  double drift() const { return drift_; }

 private:
  double drift_;
};

}  // namespace adhmc
