#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <utility>
#include <vector>

#include "stormvi/elbo.hpp"
#include "stormvi/geodata.hpp"
#include "stormvi/model.hpp"

namespace stormvi {

// Whether each minibatch weight update is preceded by a posterior refresh of
// the whole active set or of the batch alone. AllActive matches the model's
// EM description (closed-form posterior updates, stochastic M-step only) and
// makes epoch cost scale with the number of weight updates.
enum class EStepScope { AllActive, BatchOnly };

struct OptimizerConfig {
  double rho = 1e-2;          // learning rate; preconditioner is the identity
  bool rho_decay = false;     // rho_t = rho / sqrt(t)
  int batch_size = 256;
  int max_epochs = 200;
  double elbo_rel_tol = 1e-5;
  std::uint64_t seed = 0;
  int sweeps = 3;             // E-step coordinate sweeps per location
  EStepScope estep_scope = EStepScope::AllActive;
  bool nonneg_causal = true;  // project cross-node causal weights to >= 0
  int threads = 1;
};

// Active locations after (optional) pruning, with per-location graph tags.
struct ActiveSet {
  std::vector<int> index;             // positions into table.records
  std::vector<GraphVariant> variant;  // parallel to index
  int bd_pruned = 0;

  int size() const { return static_cast<int>(index.size()); }
};

// Drops the damage node where there is no building footprint; locations with
// neither a usable observation nor a footprint are removed entirely.
ActiveSet prune(const LocationTable& table);

// No pruning: every record keeps the full graph.
ActiveSet all_active(const LocationTable& table);

struct FitResult {
  EdgeWeights weights;
  ActiveSet active;
  std::vector<LocationPosterior> posteriors;  // parallel to active.index
  std::vector<std::pair<int, double>> elbo_history;  // (epoch, full-data ELBO)
  double wall_time_seconds = 0.0;
  int pruned_count = 0;
  bool converged = false;
  long long estep_location_updates = 0;
  long long weight_updates = 0;
};

// --------------------------- coordinate updates ---------------------------

// Tightest bound point, gamma = sqrt(E(z^2)) of the damage predictor.
double update_gamma(const MomentPair& flood, const MomentPair& wind,
                    const EdgeWeights& weights);

// Exact coordinate maximizer of the bound-relaxed ELBO in q_bd,
// q = sigmoid(delta), clamped to [1e-6, 1 - 1e-6].
double update_q_bd(const LocationRecord& record,
                   const LocationPosterior& posterior,
                   const EdgeWeights& weights);

struct ContinuousUpdate {
  double mu = 0.0;
  double sigma = 0.0;
  bool line_search_ok = true;
};

// Maximizes the per-location ELBO over (mu_i, sigma_i) by safeguarded damped
// Newton on each coordinate with backtracking; never decreases the ELBO. On
// line-search failure the previous value is kept and flagged.
ContinuousUpdate update_continuous_posterior(HazardNode node,
                                             const LocationRecord& record,
                                             const LocationPosterior& posterior,
                                             const EdgeWeights& weights,
                                             GraphVariant variant =
                                                 GraphVariant::Full);

// Cycles gamma -> q_bd -> (mu_F, sigma_F) -> (mu_W, sigma_W) for `sweeps`
// passes on every listed location (positions index into active.index).
// Returns the number of per-location refreshes performed.
long long e_step(const LocationTable& table, const ActiveSet& active,
                 std::span<const int> positions,
                 std::vector<LocationPosterior>& posteriors,
                 const EdgeWeights& weights, int sweeps, int threads = 1);

// One SGD ascent step on the mean per-location ELBO: the N/m-scaled batch
// gradient is divided by the active count so rho is dataset-size invariant.
// Throws NumericError on a non-finite gradient.
EdgeWeights m_step(std::span<const BatchItem> batch, const EdgeWeights& weights,
                   const OptimizerConfig& config, int active_count,
                   long long step_index);

// Shuffle-and-partition minibatch schedule; every active location appears
// exactly once per epoch. Throws std::invalid_argument if m > n.
class MinibatchSchedule {
 public:
  MinibatchSchedule(int n, int m);
  std::span<const int> sample_minibatch(std::mt19937_64& rng);
  bool epoch_done() const { return cursor_ >= static_cast<int>(order_.size()); }
  void reset_epoch() { cursor_ = 0; }

 private:
  std::vector<int> order_;
  int m_;
  int cursor_ = 0;
};

// Generic start: small random leaks, unit noise weights, causal couplings
// well inside the nonnegative cone.
EdgeWeights init_weights(std::uint64_t seed);

// Label-free data-aware start used by the drivers: the generic weights with
// the observation chain moment-matched to the observed log y and the damage
// leak placed so the mean activation starts at a low base rate. Keeps
// minibatch trajectories short regardless of batch size.
EdgeWeights init_weights(const LocationTable& table, const ActiveSet& active,
                         std::uint64_t seed);

std::vector<LocationPosterior> init_posteriors(const LocationTable& table,
                                               const ActiveSet& active,
                                               const EdgeWeights& weights);

// Sum of per-location ELBO totals over the active set.
double full_data_elbo(const LocationTable& table, const ActiveSet& active,
                      const std::vector<LocationPosterior>& posteriors,
                      const EdgeWeights& weights, int threads = 1);

// EM/SVI driver. Writes per-epoch progress lines "epoch\tELBO\tseconds" to
// *progress when given. Deterministic for a fixed seed and thread count.
FitResult run_em(const LocationTable& table, const ActiveSet& active,
                 const OptimizerConfig& config,
                 std::ostream* progress = nullptr);

struct McmcEmOptions {
  int samples = 300;
  int burn_in = 150;
};

// EM with the variational E-step replaced by per-location MCMC moment
// estimation; the M-step and reporting are shared with run_em, and the
// recorded ELBO is evaluated at the moment-matched posteriors.
FitResult run_mcmc_em(const LocationTable& table, const ActiveSet& active,
                      const OptimizerConfig& config,
                      const McmcEmOptions& mcmc,
                      std::ostream* progress = nullptr);

}  // namespace stormvi
