#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "paneltk/eventstudy.hpp"
#include "paneltk/panel.hpp"

namespace paneltk {

struct CovariateSpec {
  std::string name;
  double coefficient = 0.0;
  double sd = 1.0;  // iid normal draw per observation
};

// Generative model for a staggered-adoption panel:
//   Y_it = alpha_i + lambda_t + tau_{E_i, t - E_i} 1{t >= E_i} + gamma'Z_it + eps_it
// Each unit draws its cohort (or never-treated status) from the configured
// shares; cluster ids equal unit ids.
struct DgpConfig {
  int n_units = 0;
  int n_periods = 0;
  int first_period = 1;
  std::vector<int> cohort_adoption_periods;
  double never_treated_share = 0.0;
  std::vector<double> cohort_shares;  // optional; default equal split
  std::map<int, std::vector<double>> effect_paths;   // cohort -> tau, ell = 0,1,...
  std::map<int, std::map<int, double>> lead_paths;   // cohort -> ell (<0) -> tau
  double unit_effect_sd = 0.0;
  double time_effect_sd = 0.0;
  double noise_sd = 0.0;
  std::vector<CovariateSpec> covariates;
  std::uint64_t seed = 0;

  void validate() const;
  int last_period() const { return first_period + n_periods - 1; }
  double true_effect(int cohort, int ell) const;  // 0 when untreated/no lead
};

struct GeneratedPanel {
  PanelDataset panel;
  CattMatrix truth;  // tau at every realized raw (cohort, ell) cell; zero vcov
};

GeneratedPanel generate_panel(const DgpConfig& config);

// Ground-truth per-bin target: the share-weighted average of true effects
// over the realized panel's cell counts, with the same endpoint pooling and
// small-cell rule the estimator applies. Keys are bin labels.
std::map<std::string, double> true_iw_target(const DgpConfig& config,
                                             const CohortMap& cohorts,
                                             const EventStudySpec& spec);

enum class McEstimator { fe, iw };

struct McBinSummary {
  McEstimator estimator;
  std::string bin;
  double truth = 0.0;          // mean of per-replication targets
  double mean_estimate = 0.0;
  double bias = 0.0;           // mean of (estimate - per-replication target)
  double sd = 0.0;             // empirical SD of estimates
  double mean_se = 0.0;
  double coverage95 = 0.0;     // |estimate - target| <= 1.96 se
};

struct McSummary {
  std::vector<McBinSummary> per_bin;
  int replications = 0;
  std::map<McEstimator, int> failures;
};

// Replication r runs on seed splitmix64(master_seed ^ (r+1)); results are
// aggregated in replication order, so thread count never changes the output.
McSummary run_monte_carlo(const DgpConfig& config, const EventStudySpec& spec,
                          int replications,
                          const std::vector<McEstimator>& estimators,
                          int threads = 1);

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t replication);

const char* estimator_name(McEstimator e);

}  // namespace paneltk
