#include "stormvi/model.hpp"

#include <cmath>
#include <stdexcept>

namespace stormvi {

const std::array<double EdgeWeights::*, EdgeWeights::count>&
EdgeWeights::members() {
  static const std::array<double EdgeWeights::*, count> table = {
#define X(name) &EdgeWeights::name,
      STORMVI_EDGE_WEIGHT_FIELDS(X)
#undef X
  };
  return table;
}

const std::array<const char*, EdgeWeights::count>& EdgeWeights::names() {
  static const std::array<const char*, count> table = {
#define X(name) #name,
      STORMVI_EDGE_WEIGHT_FIELDS(X)
#undef X
  };
  return table;
}

void EdgeWeights::validate() const {
  for (int i = 0; i < count; ++i) {
    if (!std::isfinite((*this)[i]))
      throw std::invalid_argument(std::string("non-finite edge weight: ") +
                                  names()[i]);
  }
  if (noise_to_wind == 0.0 || noise_to_flood == 0.0 || noise_to_bd == 0.0 ||
      noise_to_obs == 0.0)
    throw std::invalid_argument("noise weights must be nonzero");
}

MomentPair lognormal_moments(double mu, double sigma) {
  if (!std::isfinite(mu) || !std::isfinite(sigma) || sigma < 0.0)
    throw std::invalid_argument("lognormal_moments: bad (mu, sigma)");
  const double s2 = sigma * sigma;
  return {std::exp(mu + 0.5 * s2), std::exp(2.0 * mu + 2.0 * s2)};
}

double jaakkola_g(double gamma) {
  if (!std::isfinite(gamma) || gamma < 0.0)
    throw std::invalid_argument("jaakkola_g: gamma must be >= 0");
  if (gamma < 1e-8) return 0.125 - gamma * gamma / 96.0;
  return std::tanh(0.5 * gamma) / (4.0 * gamma);
}

double quadratic_bound_log1pexp(double z, double gamma) {
  const double g = jaakkola_g(gamma);
  return g * (z * z - gamma * gamma) + 0.5 * (z - gamma) + log1pexp(gamma);
}

MomentPair linear_predictor_moments(std::span<const WeightedParent> parents,
                                    double noise_weight, double leak_weight) {
  double lin = 0.0;    // sum w_k E(x_k)
  double quad = 0.0;   // sum w_k^2 E(x_k^2)
  double cross = 0.0;  // sum_{r != s} w_r w_s E(x_r) E(x_s)
  for (const auto& p : parents) {
    if (!p.moments.valid())
      throw std::invalid_argument("linear_predictor_moments: invalid moments");
    lin += p.weight * p.moments.mean;
    quad += p.weight * p.weight * p.moments.second_moment;
  }
  for (std::size_t r = 0; r < parents.size(); ++r)
    for (std::size_t s = r + 1; s < parents.size(); ++s)
      cross += 2.0 * parents[r].weight * parents[r].moments.mean *
               parents[s].weight * parents[s].moments.mean;

  MomentPair out;
  out.mean = lin + leak_weight;
  out.second_moment = quad + noise_weight * noise_weight +
                      leak_weight * leak_weight + 2.0 * leak_weight * lin +
                      cross;
  return out;
}

double log1pexp(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace stormvi
