#include "stormvi/elbo.hpp"

#include <cmath>
#include <stdexcept>

namespace stormvi {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2*pi)
constexpr double kHalfLog2PiE = 1.4189385332046727418;  // 0.5 * log(2*pi*e)

MomentPair bd_predictor_moments(const EdgeWeights& w, const MomentPair& flood,
                                const MomentPair& wind) {
  const WeightedParent parents[2] = {{w.flood_to_bd, flood},
                                     {w.wind_to_bd, wind}};
  return linear_predictor_moments(parents, w.noise_to_bd, w.leak_to_bd);
}

}  // namespace

const std::array<double WeightGradient::*, WeightGradient::count>&
WeightGradient::members() {
  static const std::array<double WeightGradient::*, count> table = {
#define X(name) &WeightGradient::name,
      STORMVI_EDGE_WEIGHT_FIELDS(X)
#undef X
  };
  return table;
}

double obs_loglik_term(double y, const EdgeWeights& w, const MomentPair& flood,
                       const MomentPair* damage) {
  if (!(y > 0.0)) throw std::invalid_argument("obs_loglik_term: y must be > 0");
  const double t = std::log(y) - w.leak_to_obs;
  const double s2 = w.noise_to_obs * w.noise_to_obs;
  const double wf = w.flood_to_obs;
  double quad = t * t - 2.0 * t * wf * flood.mean +
                wf * wf * flood.second_moment;
  if (damage) {
    const double wb = w.bd_to_obs;
    quad += -2.0 * t * wb * damage->mean + wb * wb * damage->second_moment +
            2.0 * wf * wb * flood.mean * damage->mean;
  }
  return -std::log(y) - std::log(std::abs(w.noise_to_obs)) - kHalfLog2Pi -
         quad / (2.0 * s2);
}

double continuous_node_term(HazardNode node, const EdgeWeights& w, double a,
                            double mu, double sigma) {
  if (!(sigma > 0.0))
    throw std::invalid_argument("continuous_node_term: sigma must be > 0");
  const double wp = node == HazardNode::Wind ? w.prior_to_wind : w.prior_to_flood;
  const double wn = node == HazardNode::Wind ? w.noise_to_wind : w.noise_to_flood;
  const double wl = node == HazardNode::Wind ? w.leak_to_wind : w.leak_to_flood;
  const double m = wp * a + wl;
  const double r = mu - m;
  return -mu - std::log(std::abs(wn)) - kHalfLog2Pi -
         (sigma * sigma + r * r) / (2.0 * wn * wn);
}

double discrete_node_bound(const EdgeWeights& w, const MomentPair& flood,
                           const MomentPair& wind, double q_bd, double gamma) {
  if (!(q_bd > 0.0 && q_bd < 1.0))
    throw std::invalid_argument("discrete_node_bound: q_bd must be in (0,1)");
  if (!(gamma > 0.0))
    throw std::invalid_argument("discrete_node_bound: gamma must be > 0");
  const MomentPair z = bd_predictor_moments(w, flood, wind);
  const double g = jaakkola_g(gamma);
  const double expected_softplus = g * (z.second_moment - gamma * gamma) +
                                   0.5 * (z.mean - gamma) + log1pexp(gamma);
  return q_bd * z.mean - expected_softplus;
}

double entropy_term(const LocationPosterior& p, GraphVariant variant) {
  double out = -(p.wind_log_mean + std::log(p.wind_log_sd)) -
               (p.flood_log_mean + std::log(p.flood_log_sd));
  if (variant == GraphVariant::Full) {
    const double q = p.damage_prob;
    out += q * std::log(q) + (1.0 - q) * std::log(1.0 - q);
  }
  return out;
}

ElboBreakdown elbo_location(const LocationRecord& record,
                            const LocationPosterior& posterior,
                            const EdgeWeights& weights, GraphVariant variant) {
  const MomentPair flood =
      lognormal_moments(posterior.flood_log_mean, posterior.flood_log_sd);
  const MomentPair wind =
      lognormal_moments(posterior.wind_log_mean, posterior.wind_log_sd);

  ElboBreakdown out;
  out.continuous_terms =
      continuous_node_term(HazardNode::Wind, weights, record.wind_prior,
                           posterior.wind_log_mean, posterior.wind_log_sd) +
      continuous_node_term(HazardNode::Flood, weights, record.flood_prior,
                           posterior.flood_log_mean, posterior.flood_log_sd);
  if (variant == GraphVariant::Full) {
    const MomentPair damage = {posterior.damage_prob, posterior.damage_prob};
    out.obs_term = obs_loglik_term(record.dpm, weights, flood, &damage);
    out.discrete_term_bound = discrete_node_bound(
        weights, flood, wind, posterior.damage_prob, posterior.bound_gamma);
  } else {
    out.obs_term = obs_loglik_term(record.dpm, weights, flood, nullptr);
  }
  out.entropy_term = entropy_term(posterior, variant);

  // C1: log-densities of the marginalized unit-Gaussian noises (4 noise
  // inputs on the full graph, 3 without the damage node); C2: the constant
  // part of the two lognormal posterior entropies.
  const int noise_nodes = variant == GraphVariant::Full ? 4 : 3;
  out.dropped_constants = -noise_nodes * kHalfLog2PiE - 2.0 * kHalfLog2PiE;

  out.total = out.obs_term + out.continuous_terms + out.discrete_term_bound -
              out.entropy_term;
  return out;
}

WeightGradient elbo_gradient(std::span<const BatchItem> batch,
                             const EdgeWeights& w, double scale) {
  WeightGradient g;
  for (const BatchItem& item : batch) {
    const LocationRecord& rec = *item.record;
    const LocationPosterior& p = *item.posterior;
    const bool full = item.variant == GraphVariant::Full;
    const MomentPair flood = lognormal_moments(p.flood_log_mean, p.flood_log_sd);
    const MomentPair wind = lognormal_moments(p.wind_log_mean, p.wind_log_sd);
    const double q = p.damage_prob;

    // observation node
    {
      const double t = std::log(rec.dpm) - w.leak_to_obs;
      const double sn = w.noise_to_obs;
      const double s2 = sn * sn;
      const double wf = w.flood_to_obs;
      const double wb = w.bd_to_obs;
      double lin = wf * flood.mean;                       // sum w_k E(x_k)
      double quad = t * t - 2.0 * t * wf * flood.mean +
                    wf * wf * flood.second_moment;
      g.flood_to_obs +=
          (t * flood.mean - wf * flood.second_moment -
           (full ? wb * flood.mean * q : 0.0)) / s2;
      if (full) {
        lin += wb * q;
        quad += -2.0 * t * wb * q + wb * wb * q +
                2.0 * wf * wb * flood.mean * q;
        g.bd_to_obs += (t * q - wb * q - wf * flood.mean * q) / s2;
      }
      g.leak_to_obs += (t - lin) / s2;
      g.noise_to_obs += -1.0 / sn + quad / (s2 * sn);
    }

    // hazard nodes
    {
      const double rw =
          p.wind_log_mean - (w.prior_to_wind * rec.wind_prior + w.leak_to_wind);
      const double sw = w.noise_to_wind;
      g.prior_to_wind += rw * rec.wind_prior / (sw * sw);
      g.leak_to_wind += rw / (sw * sw);
      g.noise_to_wind +=
          -1.0 / sw +
          (p.wind_log_sd * p.wind_log_sd + rw * rw) / (sw * sw * sw);

      const double rf = p.flood_log_mean -
                        (w.prior_to_flood * rec.flood_prior + w.leak_to_flood);
      const double sf = w.noise_to_flood;
      g.prior_to_flood += rf * rec.flood_prior / (sf * sf);
      g.leak_to_flood += rf / (sf * sf);
      g.noise_to_flood +=
          -1.0 / sf +
          (p.flood_log_sd * p.flood_log_sd + rf * rf) / (sf * sf * sf);
    }

    // damage node bound; gamma and q are held fixed
    if (full) {
      const double jg = jaakkola_g(p.bound_gamma);
      const double wf = w.flood_to_bd;
      const double ww = w.wind_to_bd;
      const double w0 = w.leak_to_bd;
      g.flood_to_bd +=
          q * flood.mean -
          jg * (2.0 * wf * flood.second_moment + 2.0 * w0 * flood.mean +
                2.0 * ww * flood.mean * wind.mean) -
          0.5 * flood.mean;
      g.wind_to_bd +=
          q * wind.mean -
          jg * (2.0 * ww * wind.second_moment + 2.0 * w0 * wind.mean +
                2.0 * wf * flood.mean * wind.mean) -
          0.5 * wind.mean;
      g.noise_to_bd += -jg * 2.0 * w.noise_to_bd;
      g.leak_to_bd +=
          q - jg * (2.0 * w0 + 2.0 * wf * flood.mean + 2.0 * ww * wind.mean) -
          0.5;
    }
  }
  for (int i = 0; i < WeightGradient::count; ++i) g[i] *= scale;
  return g;
}

}  // namespace stormvi
