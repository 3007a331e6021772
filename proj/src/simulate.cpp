#include "paneltk/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <thread>

namespace paneltk {

// ---------------------------------------------------------------------------
// DgpConfig

void DgpConfig::validate() const {
  if (n_units < 1) fail(Errc::invalid_config, "n_units must be positive");
  if (n_periods < 2) fail(Errc::invalid_config, "n_periods must be at least 2");
  if (never_treated_share < 0.0 || never_treated_share > 1.0)
    fail(Errc::invalid_config, "never_treated_share must be in [0, 1]");
  if (never_treated_share < 1.0 && cohort_adoption_periods.empty())
    fail(Errc::invalid_config, "no cohorts given and never_treated_share < 1");
  for (std::size_t i = 0; i < cohort_adoption_periods.size(); ++i) {
    const int e = cohort_adoption_periods[i];
    if (i > 0 && e <= cohort_adoption_periods[i - 1])
      fail(Errc::invalid_config, "cohort periods must be strictly increasing");
    // adoption at the first period would leave no reference lead
    if (e <= first_period || e > last_period())
      fail(Errc::invalid_config,
           "cohort period " + std::to_string(e) +
               " must lie in (first_period, last_period]");
    auto it = effect_paths.find(e);
    if (it == effect_paths.end())
      fail(Errc::invalid_config,
           "no effect path for cohort " + std::to_string(e));
    const std::size_t need = static_cast<std::size_t>(last_period() - e) + 1;
    if (it->second.size() < need)
      fail(Errc::invalid_config,
           "effect path for cohort " + std::to_string(e) + " must cover " +
               std::to_string(need) + " lags");
  }
  if (!cohort_shares.empty()) {
    if (cohort_shares.size() != cohort_adoption_periods.size())
      fail(Errc::invalid_config, "cohort_shares length must match cohorts");
    double total = 0.0;
    for (double s : cohort_shares) {
      if (s < 0.0) fail(Errc::invalid_config, "cohort shares must be nonnegative");
      total += s;
    }
    if (total <= 0.0 && never_treated_share < 1.0)
      fail(Errc::invalid_config, "cohort shares sum to zero");
  }
  for (const auto& [cohort, leads] : lead_paths) {
    if (effect_paths.find(cohort) == effect_paths.end())
      fail(Errc::invalid_config,
           "lead path for unknown cohort " + std::to_string(cohort));
    for (const auto& [ell, _] : leads)
      if (ell >= 0)
        fail(Errc::invalid_config, "lead paths must use negative periods");
  }
  if (unit_effect_sd < 0 || time_effect_sd < 0 || noise_sd < 0)
    fail(Errc::invalid_config, "standard deviations must be nonnegative");
  for (const auto& cov : covariates)
    if (cov.sd < 0 || cov.name.empty())
      fail(Errc::invalid_config, "bad covariate spec");
}

double DgpConfig::true_effect(int cohort, int ell) const {
  if (ell >= 0) {
    const auto& path = effect_paths.at(cohort);
    return path[static_cast<std::size_t>(ell)];
  }
  auto it = lead_paths.find(cohort);
  if (it == lead_paths.end()) return 0.0;
  auto jt = it->second.find(ell);
  return jt == it->second.end() ? 0.0 : jt->second;
}

// ---------------------------------------------------------------------------
// seeding

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t replication) {
  return splitmix64(master_seed ^ splitmix64(replication + 1));
}

const char* estimator_name(McEstimator e) {
  return e == McEstimator::fe ? "fe" : "iw";
}

// ---------------------------------------------------------------------------
// generate_panel

GeneratedPanel generate_panel(const DgpConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int n = config.n_units;
  const int T = config.n_periods;

  // draw order is fixed: cohort assignment, unit effects, time effects,
  // covariates (unit-major), noise (unit-major)
  std::vector<std::optional<int>> assignment(static_cast<std::size_t>(n));
  const std::size_t n_cohorts = config.cohort_adoption_periods.size();
  std::vector<double> probs(n_cohorts, 0.0);
  double share_total = 0.0;
  if (!config.cohort_shares.empty()) {
    for (double s : config.cohort_shares) share_total += s;
    for (std::size_t j = 0; j < n_cohorts; ++j)
      probs[j] = (1.0 - config.never_treated_share) *
                 (config.cohort_shares[j] / share_total);
  } else if (n_cohorts > 0) {
    for (std::size_t j = 0; j < n_cohorts; ++j)
      probs[j] = (1.0 - config.never_treated_share) /
                 static_cast<double>(n_cohorts);
  }
  for (int u = 0; u < n; ++u) {
    const double draw = unif(rng);
    double cum = config.never_treated_share;
    if (draw >= cum) {
      for (std::size_t j = 0; j < n_cohorts; ++j) {
        cum += probs[j];
        if (draw < cum || j + 1 == n_cohorts) {
          assignment[static_cast<std::size_t>(u)] =
              config.cohort_adoption_periods[j];
          break;
        }
      }
    }
  }

  std::vector<double> alpha(static_cast<std::size_t>(n));
  for (auto& a : alpha) a = config.unit_effect_sd * gauss(rng);
  std::vector<double> lambda(static_cast<std::size_t>(T));
  for (auto& l : lambda) l = config.time_effect_sd * gauss(rng);

  std::vector<std::vector<double>> z(config.covariates.size());
  for (std::size_t c = 0; c < z.size(); ++c) {
    z[c].resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(T));
    for (auto& v : z[c]) v = config.covariates[c].sd * gauss(rng);
  }
  std::vector<double> eps(static_cast<std::size_t>(n) *
                          static_cast<std::size_t>(T));
  for (auto& e : eps) e = config.noise_sd * gauss(rng);

  std::vector<int> periods(static_cast<std::size_t>(T));
  for (int p = 0; p < T; ++p) periods[static_cast<std::size_t>(p)] =
      config.first_period + p;

  int width = 1;
  for (int v = n - 1; v >= 10; v /= 10) ++width;

  PanelBuilder b(periods);
  for (const auto& cov : config.covariates) b.add_covariate(cov.name);
  for (int u = 0; u < n; ++u) {
    std::string id = std::to_string(u);
    id = "u" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id;
    Adoption a;
    if (assignment[static_cast<std::size_t>(u)])
      a.wave = *assignment[static_cast<std::size_t>(u)];
    b.add_unit(id, id, a);
  }
  std::map<std::pair<int, int>, std::size_t> realized;  // (cohort, raw ell)
  for (int u = 0; u < n; ++u) {
    for (int p = 0; p < T; ++p) {
      const std::size_t cell = static_cast<std::size_t>(u) *
                                   static_cast<std::size_t>(T) +
                               static_cast<std::size_t>(p);
      const int t = periods[static_cast<std::size_t>(p)];
      double y = alpha[static_cast<std::size_t>(u)] +
                 lambda[static_cast<std::size_t>(p)] + eps[cell];
      for (std::size_t c = 0; c < z.size(); ++c) {
        y += config.covariates[c].coefficient * z[c][cell];
        b.set_covariate(u, t, config.covariates[c].name, z[c][cell]);
      }
      if (assignment[static_cast<std::size_t>(u)]) {
        const int cohort = *assignment[static_cast<std::size_t>(u)];
        const int ell = t - cohort;
        y += config.true_effect(cohort, ell);
        ++realized[{cohort, ell}];
      }
      b.set_outcome(u, t, y);
    }
  }

  GeneratedPanel out{b.build(), {}};
  for (const auto& [key, count] : realized) {
    out.truth.cells.push_back(CattCell{key.first, key.second});
    out.truth.cell_counts.push_back(count);
  }
  const Eigen::Index k = static_cast<Eigen::Index>(out.truth.cells.size());
  out.truth.delta.resize(k);
  for (Eigen::Index i = 0; i < k; ++i)
    out.truth.delta[i] = config.true_effect(out.truth.cells[i].cohort,
                                            out.truth.cells[i].ell);
  out.truth.vcov = Eigen::MatrixXd::Zero(k, k);
  out.truth.n_obs = static_cast<std::size_t>(n) * static_cast<std::size_t>(T);
  out.truth.n_units = static_cast<std::size_t>(n);
  out.truth.n_clusters = static_cast<std::size_t>(n);
  return out;
}

// ---------------------------------------------------------------------------
// true_iw_target

std::map<std::string, double> true_iw_target(const DgpConfig& config,
                                             const CohortMap& cohorts,
                                             const EventStudySpec& spec) {
  spec.validate();
  // pooled cell counts and effect mass, same rules as the estimator
  std::map<CattCell, double> count, mass;
  for (const auto& [key, c] : cohorts.cell_counts) {
    const auto eff = spec.effective_ell(key.second);
    if (!eff) continue;
    const CattCell cell{key.first, *eff};
    count[cell] += static_cast<double>(c);
    mass[cell] += static_cast<double>(c) * config.true_effect(key.first, key.second);
  }
  for (auto it = count.begin(); it != count.end();) {
    if (it->second < 2.0) {
      mass.erase(it->first);
      it = count.erase(it);
    } else {
      ++it;
    }
  }

  std::map<std::string, double> out;
  for (const Bin& bin : spec.bins) {
    std::map<int, double> ell_total;
    for (const auto& [cell, c] : count)
      if (bin.contains(cell.ell)) ell_total[cell.ell] += c;
    if (ell_total.empty()) continue;
    double nu = 0.0;
    for (const auto& [cell, c] : count) {
      if (!bin.contains(cell.ell)) continue;
      const double tau_cell = mass[cell] / c;       // pooled-cell mean effect
      nu += tau_cell * (c / ell_total[cell.ell]);   // share within the period
    }
    out[bin.label()] = nu / static_cast<double>(ell_total.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo

namespace {

struct RepOutcome {
  bool ok = false;
  std::vector<double> estimate, se;  // aligned with spec.bins
};

struct RepResult {
  std::map<std::string, double> truth;
  std::map<McEstimator, RepOutcome> by_estimator;
};

RepResult run_replication(const DgpConfig& config, const EventStudySpec& spec,
                          const std::vector<McEstimator>& estimators,
                          std::uint64_t master_seed, int r) {
  DgpConfig cfg = config;
  cfg.seed = derive_seed(master_seed, static_cast<std::uint64_t>(r));
  GeneratedPanel gen = generate_panel(cfg);
  CohortMap cm = build_cohorts(gen.panel);
  RepResult result;
  result.truth = true_iw_target(cfg, cm, spec);

  for (McEstimator which : estimators) {
    RepOutcome out;
    try {
      EstimateTable table = (which == McEstimator::fe)
                                ? estimate_fe(gen.panel, cm, spec)
                                : estimate_iw(gen.panel, cm, spec).table;
      out.ok = true;
      for (const Bin& b : spec.bins) {
        const auto idx = table.index_of(b.label());
        if (!idx) {
          out.estimate.push_back(std::numeric_limits<double>::quiet_NaN());
          out.se.push_back(std::numeric_limits<double>::quiet_NaN());
        } else {
          out.estimate.push_back(table.estimates[static_cast<Eigen::Index>(*idx)]);
          out.se.push_back(table.std_errors[static_cast<Eigen::Index>(*idx)]);
        }
      }
    } catch (const Error&) {
      out.ok = false;
    }
    result.by_estimator[which] = std::move(out);
  }
  return result;
}

}  // namespace

McSummary run_monte_carlo(const DgpConfig& config, const EventStudySpec& spec,
                          int replications,
                          const std::vector<McEstimator>& estimators,
                          int threads) {
  if (replications < 1)
    fail(Errc::invalid_config, "replications must be at least 1");
  spec.validate();

  std::vector<RepResult> results(static_cast<std::size_t>(replications));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= replications) break;
      results[static_cast<std::size_t>(r)] =
          run_replication(config, spec, estimators, config.seed, r);
    }
  };
  const int extra = std::max(0, std::min(threads, replications) - 1);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(extra));
  for (int i = 0; i < extra; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  McSummary summary;
  summary.replications = replications;
  for (McEstimator which : estimators) summary.failures[which] = 0;

  for (McEstimator which : estimators) {
    for (std::size_t bi = 0; bi < spec.bins.size(); ++bi) {
      const std::string label = spec.bins[bi].label();
      std::vector<double> est, se, tru;
      for (const RepResult& rep : results) {
        const auto it = rep.by_estimator.find(which);
        if (it == rep.by_estimator.end() || !it->second.ok) continue;
        const double e = it->second.estimate[bi];
        const auto t = rep.truth.find(label);
        if (!std::isfinite(e) || t == rep.truth.end()) continue;
        est.push_back(e);
        se.push_back(it->second.se[bi]);
        tru.push_back(t->second);
      }
      if (est.empty()) continue;
      McBinSummary row;
      row.estimator = which;
      row.bin = label;
      const double n = static_cast<double>(est.size());
      for (std::size_t i = 0; i < est.size(); ++i) {
        row.mean_estimate += est[i];
        row.truth += tru[i];
        row.bias += est[i] - tru[i];
        row.mean_se += se[i];
        if (std::abs(est[i] - tru[i]) <= 1.96 * se[i]) row.coverage95 += 1.0;
      }
      row.mean_estimate /= n;
      row.truth /= n;
      row.bias /= n;
      row.mean_se /= n;
      row.coverage95 /= n;
      if (est.size() > 1) {
        double ss = 0.0;
        for (double e : est) ss += (e - row.mean_estimate) * (e - row.mean_estimate);
        row.sd = std::sqrt(ss / (n - 1.0));
      }
      summary.per_bin.push_back(row);
    }
  }
  for (const RepResult& rep : results)
    for (const auto& [which, out] : rep.by_estimator)
      if (!out.ok) ++summary.failures[which];
  return summary;
}

}  // namespace paneltk
