#pragma once

#include <span>

#include "stormvi/geodata.hpp"
#include "stormvi/model.hpp"

// Per-location variational lower bound and its analytic weight gradients.
// Sign convention: ELBO = E_q[log p] - E_q[log q], so
// total = obs_term + continuous_terms + discrete_term_bound - entropy_term.

namespace stormvi {

struct ElboBreakdown {
  double obs_term = 0.0;
  double continuous_terms = 0.0;
  double discrete_term_bound = 0.0;
  double entropy_term = 0.0;        // variable part of E_q[log q]
  double dropped_constants = 0.0;   // C1 + C2, diagnostics only
  double total = 0.0;
};

struct WeightGradient {
#define X(name) double name = 0.0;
  STORMVI_EDGE_WEIGHT_FIELDS(X)
#undef X

  static constexpr int count = EdgeWeights::count;
  static const std::array<double WeightGradient::*, count>& members();
  double& operator[](int i) { return this->*(members()[i]); }
  double operator[](int i) const { return this->*(members()[i]); }
};

// Expected lognormal log-density of y given parents {flood, damage}.
// Pass damage = nullptr for pruned locations, where the parent set is
// {flood} alone. Throws std::invalid_argument if y <= 0.
double obs_loglik_term(double y, const EdgeWeights& w, const MomentPair& flood,
                       const MomentPair* damage);

// Expected log-density of hazard node i under q(x_i) = LN(mu, sigma^2),
// with conditional log x_i ~ N(w_prior * a + w_leak, w_noise^2).
// Throws std::invalid_argument if sigma <= 0.
double continuous_node_term(HazardNode node, const EdgeWeights& w, double a,
                            double mu, double sigma);

// Quadratic lower bound on the damage node's expected log-likelihood,
//   q E(z) - [g(gamma)(E(z^2) - gamma^2) + (E(z) - gamma)/2 + log(1+e^gamma)],
// with z the logistic predictor over {flood, wind}. Requires 0 < q < 1 and
// gamma > 0.
double discrete_node_bound(const EdgeWeights& w, const MomentPair& flood,
                           const MomentPair& wind, double q_bd, double gamma);

// Variable part of E_q[log q]; the constant C2 lives in dropped_constants.
double entropy_term(const LocationPosterior& posterior,
                    GraphVariant variant = GraphVariant::Full);

ElboBreakdown elbo_location(const LocationRecord& record,
                            const LocationPosterior& posterior,
                            const EdgeWeights& weights,
                            GraphVariant variant = GraphVariant::Full);

struct BatchItem {
  const LocationRecord* record = nullptr;
  const LocationPosterior* posterior = nullptr;
  GraphVariant variant = GraphVariant::Full;
};

// Analytic gradient of the summed ELBO over the batch, multiplied by
// `scale` (callers pass N/m for an unbiased full-dataset estimate).
// Posteriors and bound parameters are held fixed.
WeightGradient elbo_gradient(std::span<const BatchItem> batch,
                             const EdgeWeights& weights, double scale = 1.0);

}  // namespace stormvi
