#include "stormvi/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "stormvi/errors.hpp"
#include "stormvi/rng.hpp"

namespace stormvi {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_bernoulli(double z, int bd) {
  return bd ? -log1pexp(-z) : -log1pexp(z);
}

// Random-walk coordinate with burn-in-only scale adaptation toward 0.44.
struct RwCoord {
  double scale;
  int window_tries = 0;
  int window_accepts = 0;
  long long tries = 0;
  long long accepts = 0;

  explicit RwCoord(double s) : scale(s) {}

  template <typename LogTarget>
  void step(double& x, double lp_now, LogTarget lp, bool adapting,
            std::mt19937_64& rng) {
    std::normal_distribution<double> prop(0.0, scale);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double cand = x + prop(rng);
    const double lp_cand = lp(cand);
    bool accept = false;
    if (lp_cand > lp_now) {
      accept = true;
    } else {
      accept = std::log(unif(rng)) < lp_cand - lp_now;
    }
    if (accept) x = cand;
    if (adapting) {
      ++window_tries;
      window_accepts += accept;
      if (window_tries == 40) {
        const double rate = window_accepts / 40.0;
        scale *= std::exp(rate - 0.44);
        window_tries = 0;
        window_accepts = 0;
      }
    } else {
      ++tries;
      accepts += accept;
    }
  }

  double rate() const {
    return tries == 0 ? 0.0 : static_cast<double>(accepts) / tries;
  }
};

struct RunningMoments {
  long long n = 0;
  double sum = 0.0;
  double sumsq = 0.0;
  void add(double x) {
    ++n;
    sum += x;
    sumsq += x * x;
  }
  double mean() const { return n ? sum / n : 0.0; }
  double sd() const {
    if (!n) return 0.0;
    const double m = mean();
    return std::sqrt(std::max(sumsq / n - m * m, 0.0));
  }
};

}  // namespace

ForwardSample sample_forward(const EdgeWeights& w, double a_wind,
                             double a_flood, std::mt19937_64& rng,
                             bool with_building) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  ForwardSample s;
  s.x_wind =
      std::exp(w.prior_to_wind * a_wind + w.noise_to_wind * gauss(rng) +
               w.leak_to_wind);
  s.x_flood =
      std::exp(w.prior_to_flood * a_flood + w.noise_to_flood * gauss(rng) +
               w.leak_to_flood);
  if (with_building) {
    const double z = w.flood_to_bd * s.x_flood + w.wind_to_bd * s.x_wind +
                     w.noise_to_bd * gauss(rng) + w.leak_to_bd;
    s.x_bd = unif(rng) < sigmoid(z) ? 1 : 0;
  }
  s.y = std::exp(w.flood_to_obs * s.x_flood + w.bd_to_obs * s.x_bd +
                 w.noise_to_obs * gauss(rng) + w.leak_to_obs);
  return s;
}

double bd_activation_prob(double z_mean, double noise_scale) {
  // Trapezoid over eps in [-8, 8]; the Gaussian factor decays to ~5e-15 at
  // the ends, so the rule is spectrally accurate here.
  constexpr int kPoints = 321;
  constexpr double kLim = 8.0;
  const double h = 2.0 * kLim / (kPoints - 1);
  const double inv_sqrt2pi = 0.39894228040143267794;
  double sum = 0.0;
  for (int i = 0; i < kPoints; ++i) {
    const double eps = -kLim + i * h;
    const double f =
        sigmoid(z_mean + noise_scale * eps) * std::exp(-0.5 * eps * eps);
    sum += (i == 0 || i == kPoints - 1) ? 0.5 * f : f;
  }
  return std::clamp(sum * h * inv_sqrt2pi, 0.0, 1.0);
}

McmcSummary mcmc_posterior(const LocationRecord& rec, const EdgeWeights& w,
                           int n_samples, int burn_in, std::mt19937_64& rng,
                           GraphVariant variant) {
  if (n_samples <= burn_in || burn_in < 0)
    throw std::invalid_argument("mcmc: need n_samples > burn_in >= 0");
  w.validate();

  const double m_f = w.prior_to_flood * rec.flood_prior + w.leak_to_flood;
  const double s_f = std::abs(w.noise_to_flood);
  const double m_w = w.prior_to_wind * rec.wind_prior + w.leak_to_wind;
  const double s_w = std::abs(w.noise_to_wind);
  const double t = std::log(rec.dpm) - w.leak_to_obs;
  const double s2y = w.noise_to_obs * w.noise_to_obs;
  const bool full = variant == GraphVariant::Full;

  double u_f = m_f;
  double u_w = m_w;
  double eps = 0.0;
  int bd = 0;

  const auto z_of = [&](double uf, double uw, double e) {
    return w.flood_to_bd * std::exp(uf) + w.wind_to_bd * std::exp(uw) +
           w.noise_to_bd * e + w.leak_to_bd;
  };
  const auto lp_flood = [&](double uf) {
    const double d = uf - m_f;
    const double r = t - w.flood_to_obs * std::exp(uf) - w.bd_to_obs * bd;
    double lp = -d * d / (2.0 * s_f * s_f) - r * r / (2.0 * s2y);
    if (full) lp += log_bernoulli(z_of(uf, u_w, eps), bd);
    return lp;
  };
  const auto lp_wind = [&](double uw) {
    const double d = uw - m_w;
    return -d * d / (2.0 * s_w * s_w) +
           log_bernoulli(z_of(u_f, uw, eps), bd);
  };
  const auto lp_eps = [&](double e) {
    return -0.5 * e * e + log_bernoulli(z_of(u_f, u_w, e), bd);
  };

  RwCoord rw_f(0.5 * s_f);
  RwCoord rw_w(0.5 * s_w);
  RwCoord rw_e(1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  RunningMoments mom_f, mom_w;
  double q_sum = 0.0;
  long long kept = 0;

  for (int it = 0; it < n_samples; ++it) {
    const bool adapting = it < burn_in;
    rw_f.step(u_f, lp_flood(u_f), lp_flood, adapting, rng);
    if (full) {
      rw_w.step(u_w, lp_wind(u_w), lp_wind, adapting, rng);
      rw_e.step(eps, lp_eps(eps), lp_eps, adapting, rng);
      const double t_res = t - w.flood_to_obs * std::exp(u_f);
      const double obs_shift =
          w.bd_to_obs * (2.0 * t_res - w.bd_to_obs) / (2.0 * s2y);
      const double p1 = sigmoid(z_of(u_f, u_w, eps) + obs_shift);
      bd = unif(rng) < p1 ? 1 : 0;
      if (!adapting) {
        q_sum += p1;
      }
    } else {
      u_w = m_w + s_w * gauss(rng);
    }
    if (!adapting) {
      mom_f.add(u_f);
      mom_w.add(u_w);
      ++kept;
    }
  }

  McmcSummary out;
  out.flood_log_mean = mom_f.mean();
  out.flood_log_sd = mom_f.sd();
  out.wind_log_mean = mom_w.mean();
  out.wind_log_sd = mom_w.sd();
  out.q_bd = full ? q_sum / kept : 0.0;
  out.accept_flood = rw_f.rate();
  out.accept_wind = full ? rw_w.rate() : 1.0;
  out.accept_noise = full ? rw_e.rate() : 1.0;
  const auto bad = [](double r) { return r < 0.05 || r > 0.95; };
  out.acceptance_warning =
      bad(out.accept_flood) || (full && (bad(out.accept_wind) ||
                                         bad(out.accept_noise)));
  return out;
}

BruteForcePosterior brute_force_posterior(const LocationRecord& rec,
                                          const EdgeWeights& w,
                                          int grid_size) {
  if (grid_size < 8 || grid_size > 200)
    throw std::invalid_argument("grid_size must be in [8, 200]");
  w.validate();

  const int n = grid_size;
  const double m_f = w.prior_to_flood * rec.flood_prior + w.leak_to_flood;
  const double s_f = std::abs(w.noise_to_flood);
  const double m_w = w.prior_to_wind * rec.wind_prior + w.leak_to_wind;
  const double s_w = std::abs(w.noise_to_wind);
  const double t = std::log(rec.dpm) - w.leak_to_obs;
  const double s2y = w.noise_to_obs * w.noise_to_obs;
  const bool full = rec.has_footprint;

  const double span_f = 20.0 * s_f / n;
  const double span_w = 20.0 * s_w / n;
  std::vector<double> uf(n), uw(n), lp_f(n), lp_w(n), ll0(n), ll1(n);
  for (int j = 0; j < n; ++j) {
    uf[j] = m_f - 10.0 * s_f + (j + 0.5) * span_f;
    uw[j] = m_w - 10.0 * s_w + (j + 0.5) * span_w;
    const double df = uf[j] - m_f;
    const double dw = uw[j] - m_w;
    lp_f[j] = -df * df / (2.0 * s_f * s_f);
    lp_w[j] = -dw * dw / (2.0 * s_w * s_w);
    const double xf = std::exp(uf[j]);
    const double r0 = t - w.flood_to_obs * xf;
    const double r1 = r0 - w.bd_to_obs;
    ll0[j] = -r0 * r0 / (2.0 * s2y);
    ll1[j] = -r1 * r1 / (2.0 * s2y);
  }

  BruteForcePosterior out;
  if (!full) {
    // Wind decouples entirely; flood reduces to a 1-D integral.
    std::vector<double> lp(n);
    double lp_max = kNegInf;
    for (int j = 0; j < n; ++j) {
      lp[j] = lp_f[j] + ll0[j];
      lp_max = std::max(lp_max, lp[j]);
    }
    double mass = 0.0, edge = 0.0, s1 = 0.0, s2 = 0.0;
    for (int j = 0; j < n; ++j) {
      const double p = std::exp(lp[j] - lp_max);
      mass += p;
      if (j == 0 || j == n - 1) edge += p;
      s1 += p * uf[j];
      s2 += p * uf[j] * uf[j];
    }
    if (edge > 0.01 * mass)
      throw NumericError("brute force: posterior mass reaches grid boundary");
    out.flood_log_mean = s1 / mass;
    out.flood_log_sd =
        std::sqrt(std::max(s2 / mass - out.flood_log_mean * out.flood_log_mean,
                           0.0));
    out.wind_log_mean = m_w;
    out.wind_log_sd = s_w;
    return out;
  }

  // Cache the noise-integrated activation per grid cell through zbar.
  std::vector<double> lcell0(static_cast<size_t>(n) * n);
  std::vector<double> lcell1(static_cast<size_t>(n) * n);
  double lp_max = kNegInf;
  for (int j = 0; j < n; ++j) {
    const double xf = std::exp(uf[j]);
    for (int k = 0; k < n; ++k) {
      const double zbar = w.flood_to_bd * xf +
                          w.wind_to_bd * std::exp(uw[k]) + w.leak_to_bd;
      const double pact = bd_activation_prob(zbar, std::abs(w.noise_to_bd));
      const double base = lp_f[j] + lp_w[k];
      const size_t idx = static_cast<size_t>(j) * n + k;
      lcell0[idx] = pact < 1.0 ? base + ll0[j] + std::log1p(-pact) : kNegInf;
      lcell1[idx] = pact > 0.0 ? base + ll1[j] + std::log(pact) : kNegInf;
      lp_max = std::max({lp_max, lcell0[idx], lcell1[idx]});
    }
  }

  double mass = 0.0, mass1 = 0.0, edge = 0.0;
  double sf1 = 0.0, sf2 = 0.0, sw1 = 0.0, sw2 = 0.0;
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      const size_t idx = static_cast<size_t>(j) * n + k;
      const double p0 = std::exp(lcell0[idx] - lp_max);
      const double p1 = std::exp(lcell1[idx] - lp_max);
      const double p = p0 + p1;
      mass += p;
      mass1 += p1;
      if (j == 0 || j == n - 1 || k == 0 || k == n - 1) edge += p;
      sf1 += p * uf[j];
      sf2 += p * uf[j] * uf[j];
      sw1 += p * uw[k];
      sw2 += p * uw[k] * uw[k];
    }
  }
  if (edge > 0.01 * mass)
    throw NumericError("brute force: posterior mass reaches grid boundary");
  out.q_bd = mass1 / mass;
  out.flood_log_mean = sf1 / mass;
  out.flood_log_sd = std::sqrt(
      std::max(sf2 / mass - out.flood_log_mean * out.flood_log_mean, 0.0));
  out.wind_log_mean = sw1 / mass;
  out.wind_log_sd = std::sqrt(
      std::max(sw2 / mass - out.wind_log_mean * out.wind_log_mean, 0.0));
  return out;
}

EdgeWeights scenario_default_weights() {
  EdgeWeights w;
  w.prior_to_wind = 1.0;
  w.noise_to_wind = 0.1;
  w.leak_to_wind = 0.0;
  w.prior_to_flood = 1.0;
  w.noise_to_flood = 0.25;
  w.leak_to_flood = 0.0;
  w.flood_to_bd = 0.4;
  w.wind_to_bd = 1.4;
  w.noise_to_bd = 0.3;
  w.leak_to_bd = -8.0;
  w.flood_to_obs = 0.45;
  w.bd_to_obs = 0.55;
  w.noise_to_obs = 0.5;
  w.leak_to_obs = -0.8;
  return w;
}

namespace {

struct BumpField {
  struct Bump {
    double cx, cy, r, amp;
  };
  std::vector<Bump> bumps;
  double base = 0.2;

  static BumpField random(double width, double height, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ux(0.0, width);
    std::uniform_real_distribution<double> uy(0.0, height);
    std::uniform_real_distribution<double> ur(0.15, 0.35);
    std::uniform_real_distribution<double> ua(0.25, 0.65);
    const double extent = std::max(width, height);
    BumpField f;
    for (int i = 0; i < 6; ++i)
      f.bumps.push_back({ux(rng), uy(rng), ur(rng) * extent, ua(rng)});
    return f;
  }

  double at(double x, double y) const {
    double a = base;
    for (const Bump& b : bumps) {
      const double dx = x - b.cx;
      const double dy = y - b.cy;
      a += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.r * b.r));
    }
    return a;
  }
};

}  // namespace

SyntheticScenario make_scenario(int n_cells, double footprint_fraction,
                                const EdgeWeights& weight_spec,
                                std::uint64_t seed) {
  if (n_cells < 1) throw std::invalid_argument("n_cells must be >= 1");
  if (!(footprint_fraction >= 0.0 && footprint_fraction <= 1.0))
    throw std::invalid_argument("footprint_fraction must be in [0, 1]");
  weight_spec.validate();

  int nrows = static_cast<int>(std::sqrt(static_cast<double>(n_cells)));
  while (nrows > 1 && n_cells % nrows != 0) --nrows;
  const int ncols = n_cells / nrows;

  SyntheticScenario sc;
  sc.seed = seed;
  sc.true_weights = weight_spec;

  const double cs = 30.0;
  GridRaster proto;
  proto.ncols = ncols;
  proto.nrows = nrows;
  proto.xllcorner = 0.0;
  proto.yllcorner = 0.0;
  proto.cellsize = cs;
  proto.nodata_value = -9999.0;
  proto.values.assign(static_cast<size_t>(nrows) * ncols, 0.0);
  sc.dpm = proto;
  sc.flood_prior = proto;
  sc.wind_prior = proto;
  sc.footprint = proto;

  std::mt19937_64 field_rng = substream(seed, 0, 10);
  const BumpField wind_field =
      BumpField::random(ncols * cs, nrows * cs, field_rng);
  const BumpField flood_field =
      BumpField::random(ncols * cs, nrows * cs, field_rng);

  std::mt19937_64 mask_rng = substream(seed, 0, 11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  sc.x_wind.resize(sc.dpm.values.size());
  sc.x_flood.resize(sc.dpm.values.size());
  sc.x_bd.assign(sc.dpm.values.size(), 0);

  // Standardize each field over the grid so the damage base rate stays in
  // its calibrated band regardless of how the random bumps landed.
  std::vector<double> a_wind(sc.dpm.values.size());
  std::vector<double> a_flood(sc.dpm.values.size());
  for (int row = 0; row < nrows; ++row) {
    for (int col = 0; col < ncols; ++col) {
      const size_t cell = static_cast<size_t>(row) * ncols + col;
      const double x = (col + 0.5) * cs;
      const double y = (nrows - 1 - row + 0.5) * cs;
      a_wind[cell] = wind_field.at(x, y);
      a_flood[cell] = flood_field.at(x, y);
    }
  }
  const auto standardize = [](std::vector<double>& a, double mean, double sd) {
    const size_t n = a.size();
    double s1 = 0.0, s2 = 0.0;
    for (double v : a) {
      s1 += v;
      s2 += v * v;
    }
    const double m = s1 / n;
    const double cur = std::sqrt(std::max(s2 / n - m * m, 0.0));
    for (double& v : a)
      v = cur > 1e-12 ? mean + sd * (v - m) / cur : mean;
  };
  standardize(a_wind, 0.7, 0.8);
  standardize(a_flood, 0.7, 0.35);

  for (int row = 0; row < nrows; ++row) {
    for (int col = 0; col < ncols; ++col) {
      const size_t cell = static_cast<size_t>(row) * ncols + col;
      const double a_w = a_wind[cell];
      const double a_f = a_flood[cell];
      sc.wind_prior.values[cell] = std::exp(a_w);
      sc.flood_prior.values[cell] = std::exp(a_f);
      const bool building = unif(mask_rng) < footprint_fraction;
      sc.footprint.values[cell] = building ? 1.0 : 0.0;
      std::mt19937_64 cell_rng = substream(seed, static_cast<int>(cell), 12);
      const ForwardSample s =
          sample_forward(weight_spec, a_w, a_f, cell_rng, building);
      sc.x_wind[cell] = s.x_wind;
      sc.x_flood[cell] = s.x_flood;
      sc.x_bd[cell] = s.x_bd;
      sc.dpm.values[cell] = s.y;
    }
  }

  sc.table = build_location_table(sc.dpm, sc.flood_prior, sc.wind_prior,
                                  sc.footprint);
  for (LocationRecord& rec : sc.table.records) {
    const size_t cell = static_cast<size_t>(rec.row) * ncols + rec.col;
    if (rec.has_footprint) rec.label = sc.x_bd[cell];
  }
  return sc;
}

}  // namespace stormvi
