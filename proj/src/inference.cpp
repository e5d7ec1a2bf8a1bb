#include "stormvi/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "stormvi/errors.hpp"
#include "stormvi/oracle.hpp"
#include "stormvi/parallel.hpp"
#include "stormvi/rng.hpp"

namespace stormvi {

namespace {

constexpr double kQClamp = 1e-6;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Objective for one hazard node's (mu, sigma), holding everything else
// fixed and dropping terms that do not involve them:
//   h(mu, sigma) = A E(x) + B E(x^2)
//                  - (sigma^2 + (mu - m)^2) / (2 se2) + log sigma
// with E(x) = exp(mu + sigma^2/2), E(x^2) = exp(2 mu + 2 sigma^2). A collects
// the coefficients linear in E(x) from the observation term and the damage
// bound, B those linear in E(x^2); B <= 0 whenever (A, B) != (0, 0), so the
// objective is bounded above.
struct CoordObjective {
  double A = 0.0;
  double B = 0.0;
  double m = 0.0;
  double se2 = 1.0;

  double value(double mu, double sigma) const {
    const double d = mu - m;
    double v = -(sigma * sigma + d * d) / (2.0 * se2) + std::log(sigma);
    if (A != 0.0 || B != 0.0) {
      const double a2 = 2.0 * mu + 2.0 * sigma * sigma;
      if (a2 > 700.0) return kNegInf;
      v += A * std::exp(mu + 0.5 * sigma * sigma) + B * std::exp(a2);
    }
    return std::isfinite(v) ? v : kNegInf;
  }
};

CoordObjective coord_objective(HazardNode node, const LocationRecord& rec,
                               const LocationPosterior& p,
                               const EdgeWeights& w, GraphVariant variant) {
  CoordObjective obj;
  const bool full = variant == GraphVariant::Full;
  const double s2y = w.noise_to_obs * w.noise_to_obs;
  const double t = std::log(rec.dpm) - w.leak_to_obs;
  const double jg = full ? jaakkola_g(p.bound_gamma) : 0.0;

  if (node == HazardNode::Flood) {
    obj.m = w.prior_to_flood * rec.flood_prior + w.leak_to_flood;
    obj.se2 = w.noise_to_flood * w.noise_to_flood;
    obj.A = w.flood_to_obs * t / s2y;
    obj.B = -w.flood_to_obs * w.flood_to_obs / (2.0 * s2y);
    if (full) {
      const double e1w =
          lognormal_moments(p.wind_log_mean, p.wind_log_sd).mean;
      obj.A += -w.flood_to_obs * w.bd_to_obs * p.damage_prob / s2y +
               w.flood_to_bd * (p.damage_prob - 0.5) -
               2.0 * jg * w.flood_to_bd * (w.leak_to_bd + w.wind_to_bd * e1w);
      obj.B += -jg * w.flood_to_bd * w.flood_to_bd;
    }
  } else {
    obj.m = w.prior_to_wind * rec.wind_prior + w.leak_to_wind;
    obj.se2 = w.noise_to_wind * w.noise_to_wind;
    if (full) {
      const double e1f =
          lognormal_moments(p.flood_log_mean, p.flood_log_sd).mean;
      obj.A = w.wind_to_bd * (p.damage_prob - 0.5) -
              2.0 * jg * w.wind_to_bd * (w.leak_to_bd + w.flood_to_bd * e1f);
      obj.B = -jg * w.wind_to_bd * w.wind_to_bd;
    }
  }
  return obj;
}

// Damped Newton with backtracking on a single coordinate. Returns the new
// value; sets *improved if the objective strictly increased.
double ascend_mu(const CoordObjective& obj, double mu, double sigma,
                 double h0, bool* improved, bool* stuck) {
  const double e1 = std::exp(mu + 0.5 * sigma * sigma);
  const double e2 = std::exp(2.0 * mu + 2.0 * sigma * sigma);
  const double d1 = obj.A * e1 + 2.0 * obj.B * e2 - (mu - obj.m) / obj.se2;
  const double d2 = obj.A * e1 + 4.0 * obj.B * e2 - 1.0 / obj.se2;
  if (std::abs(d1) < 1e-12 * (1.0 + std::abs(mu))) return mu;
  double step = d2 < -1e-12 ? -d1 / d2 : d1;
  step = std::clamp(step, -2.0, 2.0);
  for (int i = 0; i < 40; ++i) {
    const double h = obj.value(mu + step, sigma);
    if (h > h0) {
      *improved = true;
      return mu + step;
    }
    step *= 0.5;
  }
  if (std::abs(d1) > 1e-6) *stuck = true;
  return mu;
}

double ascend_sigma(const CoordObjective& obj, double mu, double sigma,
                    double h0, bool* improved, bool* stuck) {
  const double v = sigma * sigma;
  const double e1 = std::exp(mu + 0.5 * v);
  const double e2 = std::exp(2.0 * mu + 2.0 * v);
  // Work in theta = log sigma to keep sigma positive.
  const double d1 =
      (obj.A * e1 + 4.0 * obj.B * e2 - 1.0 / obj.se2) * v + 1.0;
  const double d2 = obj.A * e1 * (v * v + 2.0 * v) +
                    obj.B * e2 * (16.0 * v * v + 8.0 * v) - 2.0 * v / obj.se2;
  if (std::abs(d1) < 1e-12) return sigma;
  double step = d2 < -1e-12 ? -d1 / d2 : d1;
  step = std::clamp(step, -2.0, 2.0);
  const double theta = std::log(sigma);
  for (int i = 0; i < 40; ++i) {
    const double cand = std::exp(theta + step);
    const double h = obj.value(mu, cand);
    if (h > h0) {
      *improved = true;
      return cand;
    }
    step *= 0.5;
  }
  if (std::abs(d1) > 1e-6) *stuck = true;
  return sigma;
}

void refresh_location(const LocationRecord& rec, GraphVariant variant,
                      LocationPosterior& p, const EdgeWeights& w, int sweeps) {
  if (variant == GraphVariant::Full) {
    for (int s = 0; s < sweeps; ++s) {
      const MomentPair flood =
          lognormal_moments(p.flood_log_mean, p.flood_log_sd);
      const MomentPair wind = lognormal_moments(p.wind_log_mean, p.wind_log_sd);
      p.bound_gamma = update_gamma(flood, wind, w);
      p.damage_prob = update_q_bd(rec, p, w);
      ContinuousUpdate f =
          update_continuous_posterior(HazardNode::Flood, rec, p, w, variant);
      p.flood_log_mean = f.mu;
      p.flood_log_sd = f.sigma;
      ContinuousUpdate u =
          update_continuous_posterior(HazardNode::Wind, rec, p, w, variant);
      p.wind_log_mean = u.mu;
      p.wind_log_sd = u.sigma;
    }
  } else {
    // Pruned graph: flood only couples to y, wind is fully decoupled, so a
    // single pass lands on the coordinate optimum.
    ContinuousUpdate f =
        update_continuous_posterior(HazardNode::Flood, rec, p, w, variant);
    p.flood_log_mean = f.mu;
    p.flood_log_sd = f.sigma;
    p.wind_log_mean = w.prior_to_wind * rec.wind_prior + w.leak_to_wind;
    p.wind_log_sd = std::abs(w.noise_to_wind);
  }
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

void emit_progress(std::ostream* progress, int epoch, double elbo,
                   double seconds) {
  if (!progress) return;
  char line[96];
  std::snprintf(line, sizeof line, "%d\t%.10g\t%.3f\n", epoch, elbo, seconds);
  (*progress) << line << std::flush;
}

}  // namespace

ActiveSet prune(const LocationTable& table) {
  ActiveSet out;
  for (int i = 0; i < static_cast<int>(table.records.size()); ++i) {
    const LocationRecord& rec = table.records[i];
    const bool has_obs = std::isfinite(rec.dpm) && rec.dpm > 0.0;
    if (!rec.has_footprint && !has_obs) continue;
    out.index.push_back(i);
    out.variant.push_back(rec.has_footprint ? GraphVariant::Full
                                            : GraphVariant::NoBd);
    if (!rec.has_footprint) ++out.bd_pruned;
  }
  return out;
}

ActiveSet all_active(const LocationTable& table) {
  ActiveSet out;
  out.index.resize(table.records.size());
  std::iota(out.index.begin(), out.index.end(), 0);
  out.variant.assign(table.records.size(), GraphVariant::Full);
  return out;
}

double update_gamma(const MomentPair& flood, const MomentPair& wind,
                    const EdgeWeights& w) {
  const WeightedParent parents[2] = {{w.flood_to_bd, flood},
                                     {w.wind_to_bd, wind}};
  const MomentPair z =
      linear_predictor_moments(parents, w.noise_to_bd, w.leak_to_bd);
  return std::sqrt(std::max(z.second_moment, 1e-16));
}

double update_q_bd(const LocationRecord& rec, const LocationPosterior& p,
                   const EdgeWeights& w) {
  const MomentPair flood = lognormal_moments(p.flood_log_mean, p.flood_log_sd);
  const MomentPair wind = lognormal_moments(p.wind_log_mean, p.wind_log_sd);
  const double z_mean = w.flood_to_bd * flood.mean + w.wind_to_bd * wind.mean +
                        w.leak_to_bd;
  const double t = std::log(rec.dpm) - w.leak_to_obs;
  const double s2y = w.noise_to_obs * w.noise_to_obs;
  const double from_obs =
      w.bd_to_obs * (2.0 * t - w.bd_to_obs - 2.0 * w.flood_to_obs * flood.mean) /
      (2.0 * s2y);
  const double q = sigmoid(z_mean + from_obs);
  return std::clamp(q, kQClamp, 1.0 - kQClamp);
}

ContinuousUpdate update_continuous_posterior(HazardNode node,
                                             const LocationRecord& rec,
                                             const LocationPosterior& p,
                                             const EdgeWeights& w,
                                             GraphVariant variant) {
  const CoordObjective obj = coord_objective(node, rec, p, w, variant);
  ContinuousUpdate out;
  if (obj.A == 0.0 && obj.B == 0.0) {
    // Decoupled node: exact optimum is the prior conditional.
    out.mu = obj.m;
    out.sigma = std::sqrt(obj.se2);
    return out;
  }
  double mu = node == HazardNode::Flood ? p.flood_log_mean : p.wind_log_mean;
  double sigma = node == HazardNode::Flood ? p.flood_log_sd : p.wind_log_sd;
  double h = obj.value(mu, sigma);
  bool stuck = false;
  for (int it = 0; it < 30; ++it) {
    bool improved = false;
    mu = ascend_mu(obj, mu, sigma, h, &improved, &stuck);
    double h2 = improved ? obj.value(mu, sigma) : h;
    bool improved_sigma = false;
    sigma = ascend_sigma(obj, mu, sigma, h2, &improved_sigma, &stuck);
    if (improved_sigma) h2 = obj.value(mu, sigma);
    const bool progressed = h2 > h + 1e-13 * (1.0 + std::abs(h));
    h = h2;
    if (!progressed) break;
  }
  out.mu = mu;
  out.sigma = sigma;
  out.line_search_ok = !stuck;
  return out;
}

long long e_step(const LocationTable& table, const ActiveSet& active,
                 std::span<const int> positions,
                 std::vector<LocationPosterior>& posteriors,
                 const EdgeWeights& weights, int sweeps, int threads) {
  const int n = static_cast<int>(positions.size());
  parallel_for(n, threads, [&](int begin, int end) {
    for (int k = begin; k < end; ++k) {
      const int pos = positions[k];
      refresh_location(table.records[active.index[pos]], active.variant[pos],
                       posteriors[pos], weights, sweeps);
    }
  });
  return n;
}

EdgeWeights m_step(std::span<const BatchItem> batch, const EdgeWeights& weights,
                   const OptimizerConfig& config, int active_count,
                   long long step_index) {
  const double scale = static_cast<double>(active_count) /
                       static_cast<double>(batch.size());
  const WeightGradient g = elbo_gradient(batch, weights, scale);
  for (int i = 0; i < WeightGradient::count; ++i)
    if (!std::isfinite(g[i]))
      throw NumericError(std::string("non-finite gradient in ") +
                         EdgeWeights::names()[i]);
  const double rho = config.rho_decay
                         ? config.rho / std::sqrt(static_cast<double>(step_index))
                         : config.rho;
  EdgeWeights out = weights;
  for (int i = 0; i < EdgeWeights::count; ++i)
    out[i] += rho * g[i] / static_cast<double>(active_count);
  if (config.nonneg_causal) {
    out.flood_to_bd = std::max(out.flood_to_bd, 0.0);
    out.wind_to_bd = std::max(out.wind_to_bd, 0.0);
    out.flood_to_obs = std::max(out.flood_to_obs, 0.0);
    out.bd_to_obs = std::max(out.bd_to_obs, 0.0);
  }
  return out;
}

MinibatchSchedule::MinibatchSchedule(int n, int m) : m_(m) {
  if (m < 1 || m > n)
    throw std::invalid_argument("minibatch size must be in [1, active count]");
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0);
}

std::span<const int> MinibatchSchedule::sample_minibatch(std::mt19937_64& rng) {
  const int n = static_cast<int>(order_.size());
  // Fresh permutation at the start of every epoch (and if sampled past the
  // end without a reset).
  if (cursor_ == 0 || cursor_ >= n) {
    std::shuffle(order_.begin(), order_.end(), rng);
    cursor_ = 0;
  }
  const int take = std::min(m_, n - cursor_);
  std::span<const int> batch(order_.data() + cursor_, take);
  cursor_ += take;
  return batch;
}

EdgeWeights init_weights(std::uint64_t seed) {
  std::mt19937_64 rng = substream(seed, 0, 1);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  EdgeWeights w;
  for (int i = 0; i < EdgeWeights::count; ++i) w[i] = u(rng);
  w.prior_to_wind = 1.0;
  w.prior_to_flood = 1.0;
  w.noise_to_wind = 1.0;
  w.noise_to_flood = 1.0;
  w.noise_to_bd = 1.0;
  w.noise_to_obs = 1.0;
  // Label-free training stalls in a saddle when the causal couplings start
  // near zero (q stays flat, so nothing differentiates damage from noise).
  // Start them well inside the sign-constrained cone instead.
  w.flood_to_bd = 0.5;
  w.wind_to_bd = 1.0;
  w.bd_to_obs = 0.5;
  w.flood_to_obs = 0.3;
  w.leak_to_bd = -2.0;
  return w;
}

EdgeWeights init_weights(const LocationTable& table, const ActiveSet& active,
                         std::uint64_t seed) {
  EdgeWeights w = init_weights(seed);
  if (active.size() == 0) return w;
  double sum_ly = 0.0, sum_ly2 = 0.0, sum_xf = 0.0, sum_xw = 0.0;
  for (int k = 0; k < active.size(); ++k) {
    const LocationRecord& rec = table.records[active.index[k]];
    const double ly = std::log(rec.dpm);
    sum_ly += ly;
    sum_ly2 += ly * ly;
    // hazard point guesses at face value; the clamp keeps pathological prior
    // layers from producing astronomical leaks
    sum_xf += std::exp(std::clamp(rec.flood_prior, -8.0, 8.0));
    sum_xw += std::exp(std::clamp(rec.wind_prior, -8.0, 8.0));
  }
  const double n = active.size();
  const double mean_ly = sum_ly / n;
  const double var_ly = std::max(0.0, sum_ly2 / n - mean_ly * mean_ly);
  const double mean_xf = sum_xf / n;
  const double mean_xw = sum_xw / n;
  // center the observation chain on the observed log level and spread
  w.leak_to_obs = mean_ly - w.flood_to_obs * mean_xf;
  w.noise_to_obs = std::clamp(std::sqrt(var_ly), 0.25, 2.0);
  // mean damage activation starts at sigmoid(-2), not at whatever the mean
  // hazard load happens to produce
  w.leak_to_bd = -2.0 - w.flood_to_bd * mean_xf - w.wind_to_bd * mean_xw;
  w.validate();
  return w;
}

std::vector<LocationPosterior> init_posteriors(const LocationTable& table,
                                               const ActiveSet& active,
                                               const EdgeWeights& w) {
  std::vector<LocationPosterior> out(active.index.size());
  for (int k = 0; k < active.size(); ++k) {
    const LocationRecord& rec = table.records[active.index[k]];
    LocationPosterior& p = out[k];
    p.damage_prob = 0.5;
    p.wind_log_mean = w.prior_to_wind * rec.wind_prior + w.leak_to_wind;
    p.wind_log_sd = 0.5;
    p.flood_log_mean = w.prior_to_flood * rec.flood_prior + w.leak_to_flood;
    p.flood_log_sd = 0.5;
    p.bound_gamma = 1.0;
  }
  return out;
}

double full_data_elbo(const LocationTable& table, const ActiveSet& active,
                      const std::vector<LocationPosterior>& posteriors,
                      const EdgeWeights& weights, int threads) {
  const int n = active.size();
  threads = std::max(1, std::min(threads, n == 0 ? 1 : n));
  const int chunk = (n + threads - 1) / threads;
  std::vector<double> partial(threads, 0.0);
  parallel_for(n, threads, [&](int begin, int end) {
    double sum = 0.0;
    for (int k = begin; k < end; ++k)
      sum += elbo_location(table.records[active.index[k]], posteriors[k],
                           weights, active.variant[k])
                 .total;
    partial[begin / chunk] += sum;
  });
  double total = 0.0;
  for (double s : partial) total += s;
  return total;
}

namespace {

struct EmHooks {
  // Refresh posteriors for the given positions; returns refresh count.
  virtual long long refresh(std::span<const int> positions,
                            std::vector<LocationPosterior>& posteriors,
                            const EdgeWeights& weights, int epoch) = 0;
  virtual ~EmHooks() = default;
};

FitResult em_loop(const LocationTable& table, const ActiveSet& active,
                  const OptimizerConfig& config, std::ostream* progress,
                  bool per_batch_refresh, EmHooks& hooks) {
  const auto start = std::chrono::steady_clock::now();
  if (active.size() == 0) throw std::invalid_argument("empty active set");

  FitResult fit;
  fit.active = active;
  fit.pruned_count = active.bd_pruned;
  fit.weights = init_weights(table, active, config.seed);
  fit.weights.validate();
  fit.posteriors = init_posteriors(table, active, fit.weights);

  const int n = active.size();
  const int m = std::min(config.batch_size, n);
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  std::mt19937_64 rng = substream(config.seed, 0, 2);

  fit.estep_location_updates += hooks.refresh(all, fit.posteriors, fit.weights, 0);
  double elbo = full_data_elbo(table, active, fit.posteriors, fit.weights,
                               config.threads);
  fit.elbo_history.emplace_back(0, elbo);
  emit_progress(progress, 0, elbo, elapsed_seconds(start));

  MinibatchSchedule schedule(n, m);
  std::vector<BatchItem> batch;
  batch.reserve(m);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    schedule.reset_epoch();
    while (!schedule.epoch_done()) {
      const std::span<const int> picks = schedule.sample_minibatch(rng);
      if (per_batch_refresh) {
        fit.estep_location_updates += hooks.refresh(
            config.estep_scope == EStepScope::AllActive
                ? std::span<const int>(all)
                : picks,
            fit.posteriors, fit.weights, epoch);
      }
      batch.clear();
      for (int pos : picks)
        batch.push_back({&table.records[active.index[pos]],
                         &fit.posteriors[pos], active.variant[pos]});
      fit.weights = m_step(batch, fit.weights, config, n,
                           fit.weight_updates + 1);
      ++fit.weight_updates;
    }
    // Sync posteriors with the epoch's final weights before measuring.
    fit.estep_location_updates +=
        hooks.refresh(all, fit.posteriors, fit.weights, epoch);

    const double prev = elbo;
    elbo = full_data_elbo(table, active, fit.posteriors, fit.weights,
                          config.threads);
    fit.elbo_history.emplace_back(epoch, elbo);
    emit_progress(progress, epoch, elbo, elapsed_seconds(start));
    if (std::abs(elbo - prev) <=
        config.elbo_rel_tol * std::max(1.0, std::abs(prev))) {
      fit.converged = true;
      break;
    }
  }
  fit.wall_time_seconds = elapsed_seconds(start);
  return fit;
}

struct ViHooks final : EmHooks {
  const LocationTable& table;
  const ActiveSet& active;
  const OptimizerConfig& config;
  ViHooks(const LocationTable& t, const ActiveSet& a, const OptimizerConfig& c)
      : table(t), active(a), config(c) {}
  long long refresh(std::span<const int> positions,
                    std::vector<LocationPosterior>& posteriors,
                    const EdgeWeights& weights, int) override {
    return e_step(table, active, positions, posteriors, weights, config.sweeps,
                  config.threads);
  }
};

struct McmcHooks final : EmHooks {
  const LocationTable& table;
  const ActiveSet& active;
  const OptimizerConfig& config;
  McmcEmOptions mcmc;
  McmcHooks(const LocationTable& t, const ActiveSet& a,
            const OptimizerConfig& c, const McmcEmOptions& o)
      : table(t), active(a), config(c), mcmc(o) {}
  long long refresh(std::span<const int> positions,
                    std::vector<LocationPosterior>& posteriors,
                    const EdgeWeights& weights, int epoch) override {
    const int n = static_cast<int>(positions.size());
    parallel_for(n, config.threads, [&](int begin, int end) {
      for (int k = begin; k < end; ++k) {
        const int pos = positions[k];
        const LocationRecord& rec = table.records[active.index[pos]];
        std::mt19937_64 rng =
            substream(config.seed, active.index[pos], 0x4d43u + epoch);
        const McmcSummary s =
            mcmc_posterior(rec, weights, mcmc.samples, mcmc.burn_in, rng,
                           active.variant[pos]);
        LocationPosterior& p = posteriors[pos];
        p.flood_log_mean = s.flood_log_mean;
        p.flood_log_sd = std::max(s.flood_log_sd, 1e-4);
        p.wind_log_mean = s.wind_log_mean;
        p.wind_log_sd = std::max(s.wind_log_sd, 1e-4);
        if (active.variant[pos] == GraphVariant::Full) {
          p.damage_prob = std::clamp(s.q_bd, kQClamp, 1.0 - kQClamp);
          p.bound_gamma = update_gamma(
              lognormal_moments(p.flood_log_mean, p.flood_log_sd),
              lognormal_moments(p.wind_log_mean, p.wind_log_sd), weights);
        }
      }
    });
    return n;
  }
};

}  // namespace

FitResult run_em(const LocationTable& table, const ActiveSet& active,
                 const OptimizerConfig& config, std::ostream* progress) {
  ViHooks hooks(table, active, config);
  return em_loop(table, active, config, progress, /*per_batch_refresh=*/true,
                 hooks);
}

FitResult run_mcmc_em(const LocationTable& table, const ActiveSet& active,
                      const OptimizerConfig& config, const McmcEmOptions& mcmc,
                      std::ostream* progress) {
  McmcHooks hooks(table, active, config, mcmc);
  // Chains are refreshed once per epoch; per-update refresh would resample
  // every chain after every minibatch.
  return em_loop(table, active, config, progress, /*per_batch_refresh=*/false,
                 hooks);
}

}  // namespace stormvi
