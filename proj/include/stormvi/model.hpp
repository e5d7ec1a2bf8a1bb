#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>

// Causal network over co-registered grid cells:
//
//   leak ──┬──> wind ──┐
//   prior ─┘           ├──> damage ──┐
//   leak ──┬──> flood ─┘             ├──> observation (DPM)
//   prior ─┘      └──────────────────┘
//
// Wind and flood intensities are lognormal given their prior estimates,
// damage is a Bernoulli node with a logistic activation over the hazard
// values, and the observation is lognormal given flood and damage. Every
// predictor carries a unit-Gaussian noise input and a constant leak input;
// noises are never given posteriors, they are marginalized analytically
// (E(eps) = 0, E(eps^2) = 1).

namespace stormvi {

enum class NodeKind { Continuous, Binary, Observed };

enum class HazardNode { Wind, Flood };

// Graph variant per location. NoBd drops the damage node (no building
// footprint), which reduces the observation's parent set to {flood}.
enum class GraphVariant { Full, NoBd };

// First and second raw moments of a node under its posterior.
struct MomentPair {
  double mean = 0.0;
  double second_moment = 0.0;

  double variance() const { return second_moment - mean * mean; }
  bool valid() const {
    return std::isfinite(mean) && std::isfinite(second_moment) &&
           second_moment + 1e-12 >= mean * mean;
  }
};

#define STORMVI_EDGE_WEIGHT_FIELDS(X) \
  X(prior_to_wind)                    \
  X(noise_to_wind)                    \
  X(leak_to_wind)                     \
  X(prior_to_flood)                   \
  X(noise_to_flood)                   \
  X(leak_to_flood)                    \
  X(flood_to_bd)                      \
  X(wind_to_bd)                       \
  X(noise_to_bd)                      \
  X(leak_to_bd)                       \
  X(flood_to_obs)                     \
  X(bd_to_obs)                        \
  X(noise_to_obs)                     \
  X(leak_to_obs)

// Global edge weights, shared by all locations. noise_to_* must stay
// nonzero (they are conditional standard deviations).
struct EdgeWeights {
#define X(name) double name = 0.0;
  STORMVI_EDGE_WEIGHT_FIELDS(X)
#undef X

  static constexpr int count = 14;
  static const std::array<double EdgeWeights::*, count>& members();
  static const std::array<const char*, count>& names();

  double& operator[](int i) { return this->*(members()[i]); }
  double operator[](int i) const { return this->*(members()[i]); }

  // Throws std::invalid_argument on non-finite entries or zero noise weights.
  void validate() const;
};

// Per-location variational state: Bernoulli damage probability, lognormal
// log-mean/log-sd for each hazard, and the bound tightening point.
struct LocationPosterior {
  double damage_prob = 0.5;
  double wind_log_mean = 0.0;
  double wind_log_sd = 0.5;
  double flood_log_mean = 0.0;
  double flood_log_sd = 0.5;
  double bound_gamma = 1.0;
};

// E(x) and E(x^2) of a lognormal with log-mean mu and log-sd sigma.
// Throws std::invalid_argument on non-finite input or sigma < 0.
MomentPair lognormal_moments(double mu, double sigma);

// Curvature coefficient of the logistic quadratic bound,
// g(gamma) = tanh(gamma/2) / (4 gamma), with g(0+) = 1/8.
double jaakkola_g(double gamma);

// Quadratic upper bound on log(1 + e^z), tight at |z| = gamma.
// Requires gamma > 0 (gamma = 0 is handled by the g limit).
double quadratic_bound_log1pexp(double z, double gamma);

struct WeightedParent {
  double weight = 0.0;
  MomentPair moments;
};

// Moments of z = sum_k w_k x_k + w_eps * eps + w_0 for independent parents
// and unit-Gaussian noise:
//   E(z)   = sum w_k E(x_k) + w_0
//   E(z^2) = sum w_k^2 E(x_k^2) + w_eps^2 + w_0^2
//            + 2 w_0 sum w_k E(x_k) + sum_{r != s} w_r w_s E(x_r) E(x_s)
MomentPair linear_predictor_moments(std::span<const WeightedParent> parents,
                                    double noise_weight, double leak_weight);

// Numerically stable log(1 + e^z) and logistic function.
double log1pexp(double z);
double sigmoid(double z);

}  // namespace stormvi
