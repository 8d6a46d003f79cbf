#pragma once

// Elementwise memristive dynamics: potentiation/depression rates, the bounded
// RESCALE sigmoid and the linear-recurrence coefficients they induce once the
// recurrent weights are removed.
//
// Rates are exponentials. They stay tractable on RESCALE outputs, which live in
// (0.35, 1.15); evaluating them on raw pre-activations with |z| >> 10 overflows.

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <span>

#include "mars/errors.hpp"

namespace mars {

struct MemristiveConstants {
  double kp0 = 1e-4;
  double eta_p = 10.0;
  double kd0 = 0.5;
  double eta_d = 1.0;

  void validate() const;
  friend bool operator==(const MemristiveConstants&, const MemristiveConstants&) = default;
};

struct RescaleConstants {
  double lower = 0.35;
  double upper = 1.15;
  double steepness = 1.0;

  void validate() const;
};

struct DynamicsScalars {
  double gamma = 1.0;
  double delta = 0.1;

  void validate() const;
};

/// Smallest value a log-space coefficient `a` is clamped to.
inline constexpr double kCoefficientFloor = 1e-12;

namespace detail {
void throw_non_finite(const char* op, double value);
}

template <typename Scalar>
Scalar potentiation_rate(Scalar z, const MemristiveConstants& c) {
  if (!std::isfinite(z)) detail::throw_non_finite("potentiation_rate", static_cast<double>(z));
  return static_cast<Scalar>(c.kp0) * std::exp(static_cast<Scalar>(c.eta_p) * z);
}

template <typename Scalar>
Scalar depression_rate(Scalar z, const MemristiveConstants& c) {
  if (!std::isfinite(z)) detail::throw_non_finite("depression_rate", static_cast<double>(z));
  return static_cast<Scalar>(c.kd0) * std::exp(-static_cast<Scalar>(c.eta_d) * z);
}

template <typename Scalar>
Scalar rescale(Scalar z, const RescaleConstants& r) {
  if (!std::isfinite(z)) detail::throw_non_finite("rescale", static_cast<double>(z));
  const auto lo = static_cast<Scalar>(r.lower);
  const auto span = static_cast<Scalar>(r.upper - r.lower);
  return span / (Scalar(1) + std::exp(-z * static_cast<Scalar>(r.steepness))) + lo;
}

template <typename Scalar>
void potentiation_rate(std::span<const Scalar> z, std::span<Scalar> out,
                       const MemristiveConstants& c) {
  if (z.size() != out.size()) throw StructuralError("potentiation_rate: size mismatch");
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = potentiation_rate(z[i], c);
}

template <typename Scalar>
void depression_rate(std::span<const Scalar> z, std::span<Scalar> out,
                     const MemristiveConstants& c) {
  if (z.size() != out.size()) throw StructuralError("depression_rate: size mismatch");
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = depression_rate(z[i], c);
}

namespace detail {
template <typename Scalar>
using ConstArrayMap = Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>>;
template <typename Scalar>
using ArrayMap = Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>;
}  // namespace detail

/// In-place allowed (z and out may alias).
template <typename Scalar>
void rescale(std::span<const Scalar> z, std::span<Scalar> out, const RescaleConstants& r) {
  if (z.size() != out.size()) throw StructuralError("rescale: size mismatch");
  const auto n = static_cast<Eigen::Index>(z.size());
  const auto lo = static_cast<Scalar>(r.lower);
  const auto span = static_cast<Scalar>(r.upper - r.lower);
  const auto s = static_cast<Scalar>(r.steepness);
  detail::ArrayMap<Scalar>(out.data(), n) =
      span / (Scalar(1) + (-s * detail::ConstArrayMap<Scalar>(z.data(), n)).exp()) + lo;
}

/// Coefficients of h_{t+1} = a * h_t + b obtained from the memristive update with
/// no recurrent weights:
///   a = gamma - delta * (K_p(z) + K_d(z)),   b = delta * K_p(z).
///
/// Entries of `a` at or below zero leave the real log-space regime; they are
/// clamped to kCoefficientFloor and counted. Returns the clamp count.
/// `z` may alias `a`.
template <typename Scalar>
std::size_t mars_coefficients(std::span<const Scalar> z, const MemristiveConstants& c,
                              const DynamicsScalars& d, std::span<Scalar> a,
                              std::span<Scalar> b) {
  if (z.size() != a.size() || z.size() != b.size()) {
    throw StructuralError("mars_coefficients: size mismatch");
  }
  const auto n = static_cast<Eigen::Index>(z.size());
  const auto zs = detail::ConstArrayMap<Scalar>(z.data(), n);
  auto as = detail::ArrayMap<Scalar>(a.data(), n);
  auto bs = detail::ArrayMap<Scalar>(b.data(), n);
  const auto floor = static_cast<Scalar>(kCoefficientFloor);
  const auto delta = static_cast<Scalar>(d.delta);
  // b first: z may alias a
  bs = delta * static_cast<Scalar>(c.kp0) * (static_cast<Scalar>(c.eta_p) * zs).exp();
  as = static_cast<Scalar>(d.gamma) -
       (bs + delta * static_cast<Scalar>(c.kd0) * (-static_cast<Scalar>(c.eta_d) * zs).exp());
  const auto clamped = static_cast<std::size_t>((as <= floor).count());
  if (clamped) as = (as <= floor).select(floor, as);
  return clamped;
}

/// Limit of h_{t+1} = a h_t + b for constant z and gamma = 1: K_p / (K_p + K_d).
double fixed_point(double z, const MemristiveConstants& c);

}  // namespace mars
