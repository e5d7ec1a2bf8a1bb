#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "stormvi/inference.hpp"
#include "stormvi/oracle.hpp"
#include "stormvi/rng.hpp"
#include "test_util.hpp"

using namespace stormvi;

namespace {

// Weights in the generator's neighborhood, jittered per instance.
EdgeWeights jittered_weights(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uni = [&](double a, double b) { return a + (b - a) * u01(rng); };
  EdgeWeights w = scenario_default_weights();
  w.flood_to_bd += uni(-0.1, 0.15);
  w.wind_to_bd += uni(-0.2, 0.2);
  w.leak_to_bd += uni(-0.5, 0.5);
  w.flood_to_obs += uni(-0.1, 0.1);
  w.bd_to_obs += uni(-0.1, 0.1);
  w.leak_to_obs += uni(-0.2, 0.2);
  w.noise_to_obs *= uni(0.8, 1.25);
  w.noise_to_wind *= uni(0.9, 1.2);
  w.noise_to_flood *= uni(0.9, 1.2);
  return w;
}

LocationRecord forward_record(const EdgeWeights& w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  LocationRecord rec;
  rec.wind_prior = u(rng);
  rec.flood_prior = u(rng);
  rec.has_footprint = true;
  const ForwardSample s = sample_forward(w, rec.wind_prior, rec.flood_prior, rng);
  rec.dpm = s.y;
  return rec;
}

}  // namespace

TEST_SUITE("oracle") {

TEST_CASE("forward sampler golden draw") {
  const EdgeWeights w = scenario_default_weights();
  auto rng = substream(42, 7, 1);
  const ForwardSample s = sample_forward(w, 0.4, -0.2, rng);
  CHECK(s.x_wind == doctest::Approx(1.3536843932555338).epsilon(1e-14));
  CHECK(s.x_flood == doctest::Approx(1.0622786977325582).epsilon(1e-14));
  CHECK(s.x_bd == 0);
  CHECK(s.y == doctest::Approx(2.0973330763195417).epsilon(1e-14));

  // without a building the hazard draws are identical and damage is forced off
  auto rng2 = substream(42, 7, 1);
  const ForwardSample t = sample_forward(w, 0.4, -0.2, rng2, false);
  CHECK(t.x_wind == s.x_wind);
  CHECK(t.x_flood == s.x_flood);
  CHECK(t.x_bd == 0);
  CHECK(t.y == doctest::Approx(0.74917113881120256).epsilon(1e-14));
}

TEST_CASE("forward sampler saturates with the damage leak") {
  EdgeWeights w = scenario_default_weights();
  w.leak_to_bd = 50.0;
  auto rng = substream(1, 2, 3);
  for (int i = 0; i < 50; ++i)
    CHECK(sample_forward(w, 0.0, 0.0, rng).x_bd == 1);
  w.leak_to_bd = -50.0;
  for (int i = 0; i < 50; ++i)
    CHECK(sample_forward(w, 0.0, 0.0, rng).x_bd == 0);
}

TEST_CASE("forward sampler matches analytic moments") {
  const EdgeWeights w = scenario_default_weights();
  const double aw = 0.3, af = -0.1;
  auto rng = substream(9, 0, 0);
  const long n = 200000;
  double s_lw = 0.0, s_lw2 = 0.0, s_bd = 0.0, s_pact = 0.0, s_y = 0.0;
  for (long i = 0; i < n; ++i) {
    const ForwardSample s = sample_forward(w, aw, af, rng);
    const double lw = std::log(s.x_wind);
    s_lw += lw;
    s_lw2 += lw * lw;
    s_bd += s.x_bd;
    s_pact += bd_activation_prob(w.flood_to_bd * s.x_flood +
                                     w.wind_to_bd * s.x_wind + w.leak_to_bd,
                                 std::abs(w.noise_to_bd));
    s_y += s.y;
  }
  const double mW = w.prior_to_wind * aw + w.leak_to_wind;
  const double mean_lw = s_lw / n;
  const double sd_lw = std::sqrt(s_lw2 / n - mean_lw * mean_lw);
  CHECK(std::abs(mean_lw - mW) < 4.0 * std::abs(w.noise_to_wind) / std::sqrt((double)n));
  CHECK(sd_lw == doctest::Approx(std::abs(w.noise_to_wind)).epsilon(0.02));

  // empirical damage rate against the noise-integrated activation
  CHECK(std::abs(s_bd / n - s_pact / n) < 4.0 * 0.5 / std::sqrt((double)n));
  CHECK(s_y / n > 0.0);
}

TEST_CASE("activation probability quadrature anchors") {
  CHECK(bd_activation_prob(1.0, 1.0) ==
        doctest::Approx(0.69673467014368307).epsilon(1e-10));
  CHECK(bd_activation_prob(0.5, 2.0) ==
        doctest::Approx(0.57524253173763296).epsilon(1e-10));
  CHECK(bd_activation_prob(0.0, 0.7) == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(bd_activation_prob(2.0, 1.3) + bd_activation_prob(-2.0, 1.3) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(bd_activation_prob(1.7, 1e-12) ==
        doctest::Approx(sigmoid(1.7)).epsilon(1e-9));
  CHECK(std::abs(bd_activation_prob(3.0, 50.0) - 0.5) < 0.06);
  double prev = 0.0;
  for (double m = -4.0; m <= 4.0; m += 0.5) {
    const double p = bd_activation_prob(m, 0.9);
    CHECK(p > prev);
    prev = p;
  }
}

TEST_CASE("chain sampler preconditions") {
  std::mt19937_64 rng(3);
  const EdgeWeights w = scenario_default_weights();
  LocationRecord rec;
  rec.dpm = 1.0;
  rec.has_footprint = true;
  CHECK_THROWS_AS(mcmc_posterior(rec, w, 100, 100, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(mcmc_posterior(rec, w, 100, -1, rng), std::invalid_argument);
}

TEST_CASE("chain sampler on a decoupled model recovers the priors") {
  EdgeWeights w;
  w.prior_to_wind = 1.0;
  w.noise_to_wind = 0.5;
  w.prior_to_flood = 1.0;
  w.noise_to_flood = 0.5;
  w.noise_to_bd = 1.0;
  w.noise_to_obs = 1.0;
  LocationRecord rec;
  rec.dpm = 1.3;
  rec.wind_prior = 0.4;
  rec.flood_prior = -0.3;
  rec.has_footprint = true;
  std::mt19937_64 rng(11);
  const McmcSummary s = mcmc_posterior(rec, w, 60000, 10000, rng);
  CHECK(std::abs(s.q_bd - 0.5) < 0.02);  // E[sigmoid(eps)] over N(0,1)
  CHECK(std::abs(s.flood_log_mean - (-0.3)) < 0.03);
  CHECK(s.flood_log_sd == doctest::Approx(0.5).epsilon(0.1));
  CHECK(std::abs(s.wind_log_mean - 0.4) < 0.03);
  CHECK(!s.acceptance_warning);
  CHECK(s.accept_flood > 0.2);
  CHECK(s.accept_flood < 0.7);
  CHECK(s.accept_noise > 0.2);
  CHECK(s.accept_noise < 0.7);
}

TEST_CASE("chain sampler without a building") {
  const EdgeWeights w = scenario_default_weights();
  LocationRecord rec;
  rec.dpm = 0.9;
  rec.wind_prior = 0.2;
  rec.flood_prior = 0.1;
  rec.has_footprint = false;
  std::mt19937_64 rng(13);
  const McmcSummary s =
      mcmc_posterior(rec, w, 40000, 5000, rng, GraphVariant::NoBd);
  CHECK(s.q_bd == 0.0);
  CHECK(s.accept_wind == 1.0);
  CHECK(s.accept_noise == 1.0);
  const double mW = w.prior_to_wind * rec.wind_prior + w.leak_to_wind;
  CHECK(std::abs(s.wind_log_mean - mW) < 0.03);  // straight prior draws
  CHECK(std::isfinite(s.flood_log_mean));
  CHECK(s.flood_log_sd > 0.0);
}

TEST_CASE("dense integration rejects bad grids and runaway posteriors") {
  const EdgeWeights w = scenario_default_weights();
  std::mt19937_64 rng(17);
  LocationRecord rec = forward_record(w, rng);
  CHECK_THROWS_AS(brute_force_posterior(rec, w, 7), std::invalid_argument);
  CHECK_THROWS_AS(brute_force_posterior(rec, w, 201), std::invalid_argument);

  EdgeWeights tight = w;
  tight.noise_to_obs = 0.1;
  LocationRecord far = rec;
  far.dpm = std::exp(60.0);  // posterior walks off the prior's ten-sigma box
  CHECK_THROWS_AS(brute_force_posterior(far, tight, 120), NumericError);
}

TEST_CASE("dense integration refines and matches closed forms") {
  const EdgeWeights base = scenario_default_weights();
  std::mt19937_64 rng(19);
  for (int i = 0; i < 5; ++i) {
    const LocationRecord rec = forward_record(base, rng);
    const BruteForcePosterior a = brute_force_posterior(rec, base, 100);
    const BruteForcePosterior b = brute_force_posterior(rec, base, 200);
    CHECK(std::abs(a.q_bd - b.q_bd) < 1e-3);
    CHECK(std::abs(a.flood_log_mean - b.flood_log_mean) < 1e-3);
    CHECK(std::abs(a.wind_log_mean - b.wind_log_mean) < 1e-3);
    CHECK(a.flood_log_sd > 0.0);
    CHECK(b.wind_log_sd > 0.0);
  }

  // damage decoupled from data: its posterior is the prior activation
  EdgeWeights w = base;
  w.flood_to_bd = 0.0;
  w.wind_to_bd = 0.0;
  w.bd_to_obs = 0.0;
  w.leak_to_bd = -0.7;
  const LocationRecord rec = forward_record(w, rng);
  const BruteForcePosterior p = brute_force_posterior(rec, w, 150);
  CHECK(p.q_bd ==
        doctest::Approx(bd_activation_prob(-0.7, std::abs(w.noise_to_bd)))
            .epsilon(1e-6));

  // flood decoupled from the observation: posterior equals the prior
  EdgeWeights wf = base;
  wf.flood_to_obs = 0.0;
  wf.flood_to_bd = 0.0;
  LocationRecord rec2 = forward_record(wf, rng);
  const BruteForcePosterior p2 = brute_force_posterior(rec2, wf, 150);
  const double mF = wf.prior_to_flood * rec2.flood_prior + wf.leak_to_flood;
  CHECK(p2.flood_log_mean == doctest::Approx(mF).epsilon(1e-6));
  CHECK(p2.flood_log_sd ==
        doctest::Approx(std::abs(wf.noise_to_flood)).epsilon(1e-4));
}

TEST_CASE("observation shrinks the flood posterior") {
  const EdgeWeights w = scenario_default_weights();
  std::mt19937_64 rng(23);
  const LocationRecord rec = forward_record(w, rng);
  const BruteForcePosterior p = brute_force_posterior(rec, w, 150);
  CHECK(p.flood_log_sd < std::abs(w.noise_to_flood));
}

TEST_CASE("chain sampler agrees with dense integration") {
  std::mt19937_64 gen(29);
  for (int i = 0; i < 5; ++i) {
    const EdgeWeights w = jittered_weights(gen);
    const LocationRecord rec = forward_record(w, gen);
    const BruteForcePosterior bf = brute_force_posterior(rec, w, 150);
    auto rng = substream(4000, i, 5);
    const McmcSummary mc = mcmc_posterior(rec, w, 200000, 20000, rng);
    CHECK(std::abs(mc.q_bd - bf.q_bd) < 0.02);
    CHECK(std::abs(mc.flood_log_mean - bf.flood_log_mean) < 0.03);
    CHECK(std::abs(mc.wind_log_mean - bf.wind_log_mean) < 0.03);
    CHECK(mc.flood_log_sd == doctest::Approx(bf.flood_log_sd).epsilon(0.15));
  }
}

TEST_CASE("synthetic scenario reproducibility and shape") {
  const EdgeWeights spec = scenario_default_weights();
  CHECK_NOTHROW(spec.validate());
  CHECK(spec.flood_to_bd >= 0.0);
  CHECK(spec.wind_to_bd >= 0.0);
  CHECK(spec.leak_to_bd < 0.0);

  const SyntheticScenario a = make_scenario(2500, 0.6, spec, 5);
  const SyntheticScenario b = make_scenario(2500, 0.6, spec, 5);
  CHECK(a.dpm.nrows * a.dpm.ncols == 2500);
  CHECK(a.table.records.size() == 2500);
  REQUIRE(a.dpm.values.size() == b.dpm.values.size());
  for (size_t i = 0; i < a.dpm.values.size(); ++i)
    CHECK(a.dpm.values[i] == b.dpm.values[i]);
  for (size_t i = 0; i < a.x_bd.size(); ++i) CHECK(a.x_bd[i] == b.x_bd[i]);

  const SyntheticScenario c = make_scenario(2500, 0.6, spec, 6);
  bool any_diff = false;
  for (size_t i = 0; i < c.dpm.values.size() && !any_diff; ++i)
    any_diff = c.dpm.values[i] != a.dpm.values[i];
  CHECK(any_diff);

  // odd cell counts still factor into an exact grid
  const SyntheticScenario odd = make_scenario(3000, 0.5, spec, 1);
  CHECK(odd.dpm.nrows * odd.dpm.ncols == 3000);
  CHECK(odd.table.records.size() == 3000);
}

TEST_CASE("synthetic scenario statistics and labeling") {
  const SyntheticScenario sc =
      make_scenario(10000, 0.6, scenario_default_weights(), 5);
  int footprints = 0, damaged = 0, labeled = 0;
  for (size_t i = 0; i < sc.table.records.size(); ++i) {
    const LocationRecord& rec = sc.table.records[i];
    const int cell = rec.row * sc.table.ncols + rec.col;
    if (rec.has_footprint) {
      ++footprints;
      damaged += sc.x_bd[cell];
      REQUIRE(rec.label.has_value());
      CHECK(*rec.label == sc.x_bd[cell]);
      ++labeled;
    } else {
      CHECK(!rec.label.has_value());
      CHECK(sc.x_bd[cell] == 0);
    }
    CHECK(rec.dpm == sc.dpm.values[cell]);
    CHECK(rec.dpm > 0.0);
    CHECK(rec.flood_prior ==
          doctest::Approx(std::log(sc.flood_prior.values[cell]))
              .epsilon(1e-12));
  }
  // Bernoulli(0.6) mask, five sigma of slack
  CHECK(std::abs(footprints / 10000.0 - 0.6) < 5.0 * 0.0049);
  CHECK(labeled == footprints);
  // generator is calibrated into a 2-20% damage base rate band (with margin)
  const double base_rate = (double)damaged / footprints;
  CHECK(base_rate > 0.02);
  CHECK(base_rate < 0.25);
}

TEST_CASE("scenario tables flow through the raster path") {
  const SyntheticScenario sc =
      make_scenario(900, 0.5, scenario_default_weights(), 3);
  CHECK(sc.dpm.same_geometry(sc.flood_prior));
  CHECK(sc.dpm.same_geometry(sc.wind_prior));
  CHECK(sc.dpm.same_geometry(sc.footprint));
  const LocationTable rebuilt =
      build_location_table(sc.dpm, sc.flood_prior, sc.wind_prior, sc.footprint);
  REQUIRE(rebuilt.records.size() == sc.table.records.size());
  for (size_t i = 0; i < rebuilt.records.size(); ++i) {
    CHECK(rebuilt.records[i].dpm == sc.table.records[i].dpm);
    CHECK(rebuilt.records[i].has_footprint ==
          sc.table.records[i].has_footprint);
    CHECK(rebuilt.records[i].wind_prior ==
          doctest::Approx(sc.table.records[i].wind_prior).epsilon(1e-14));
  }
}

}  // TEST_SUITE
