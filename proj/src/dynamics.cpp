#include "mars/dynamics.hpp"

#include <string>

namespace mars {

namespace detail {
void throw_non_finite(const char* op, double value) {
  throw DomainError(std::string(op) + ": non-finite input " + std::to_string(value));
}
}  // namespace detail

void MemristiveConstants::validate() const {
  if (!(kp0 > 0 && eta_p > 0 && kd0 > 0 && eta_d > 0)) {
    throw ConfigError("memristive constants must all be strictly positive");
  }
}

void RescaleConstants::validate() const {
  if (!(lower < upper)) throw ConfigError("rescale: lower bound must be below upper bound");
  if (!(steepness > 0)) throw ConfigError("rescale: steepness must be positive");
}

void DynamicsScalars::validate() const {
  if (!(delta > 0)) throw ConfigError("delta must be positive");
  if (!(gamma > 0 && gamma <= 1)) throw ConfigError("gamma must lie in (0, 1]");
}

double fixed_point(double z, const MemristiveConstants& c) {
  const double kp = potentiation_rate(z, c);
  const double kd = depression_rate(z, c);
  return kp / (kp + kd);
}

}  // namespace mars
