#include "adhmc/types.hpp"

namespace adhmc {

PhaseState::PhaseState(Vector position, Vector momentum)
    : q(std::move(position)), p(std::move(momentum)) {
  if (q.size() < 1 || q.size() != p.size()) {
    throw ConfigError("PhaseState: q and p must have equal length d >= 1");
  }
}

static std::string join(const std::vector<std::string>& messages) {
  std::string out;
  for (const auto& m : messages) {
    if (!out.empty()) out += "; ";
    out += m;
  }
  return out;
}

ConfigError::ConfigError(std::string message)
    : std::runtime_error(message), messages_{std::move(message)} {}

ConfigError::ConfigError(std::vector<std::string> messages)
    : std::runtime_error(join(messages)), messages_(std::move(messages)) {}

const char* to_string(LeapfrogStage stage) {
  switch (stage) {
    case LeapfrogStage::first_half_kick:
      return "first half kick";
    case LeapfrogStage::drift:
      return "drift";
    case LeapfrogStage::second_half_kick:
      return "second half kick";
  }
  return "unknown";
}

IntegrationError::IntegrationError(LeapfrogStage stage)
    : std::runtime_error(std::string("non-finite value in leapfrog ") +
                         to_string(stage)),
      stage_(stage) {}

ReferenceFlowError::ReferenceFlowError(double drift, double tolerance)
    : std::runtime_error("reference flow energy drift " +
                         std::to_string(drift) + " exceeds " +
                         std::to_string(tolerance)),
      drift_(drift) {}

}  // namespace adhmc
