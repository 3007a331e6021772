#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "paneltk/panel.hpp"
#include "paneltk/regress.hpp"

namespace paneltk {

// A set of consecutive relative periods estimated and reported together.
struct Bin {
  std::vector<int> ells;  // sorted, consecutive

  std::string label() const;
  bool contains(int ell) const;
  int min() const { return ells.front(); }
  int max() const { return ells.back(); }
  bool is_lead() const { return max() < 0; }
};

// What happens to observations whose relative period lies beyond the window:
// pooled into the nearest endpoint bin, or left without an indicator (they
// then act like controls).
enum class EndpointRule { pool, drop_indicator };

struct EventStudySpec {
  std::vector<Bin> bins = default_bins();
  int reference_period = -1;
  EndpointRule endpoint_rule = EndpointRule::pool;
  std::vector<std::string> controls;
  std::string cluster_column = "cluster";

  // Singleton bins for every relative period in [-3, 3] except -1.
  static std::vector<Bin> default_bins();

  // Singleton bins for every relative period in [lead_min, lag_max] except
  // the reference period.
  static EventStudySpec window(int lead_min, int lag_max, int ref = -1);

  void validate() const;
  int window_min() const;
  int window_max() const;

  // The relative period an observation loads on: the raw value inside the
  // window, the clamped endpoint under POOL, or nothing (reference period,
  // dropped endpoint, or a hole between bins).
  std::optional<int> effective_ell(int raw_ell) const;
  const Bin* bin_of(int ell) const;
};

struct CattCell {
  int cohort = 0;
  int ell = 0;  // effective relative period

  friend bool operator==(const CattCell& a, const CattCell& b) {
    return a.cohort == b.cohort && a.ell == b.ell;
  }
  friend bool operator<(const CattCell& a, const CattCell& b) {
    return a.cohort != b.cohort ? a.cohort < b.cohort : a.ell < b.ell;
  }
  std::string label() const;
};

// Cohort-by-relative-period treatment effect estimates with joint covariance.
struct CattMatrix {
  std::vector<CattCell> cells;           // sorted (cohort, ell)
  Eigen::VectorXd delta;
  Eigen::MatrixXd vcov;
  std::vector<std::size_t> cell_counts;  // estimation rows per cell
  std::size_t n_obs = 0, n_units = 0, n_clusters = 0;
  std::vector<std::string> warnings;

  std::optional<double> value(int cohort, int ell) const;
  std::optional<std::size_t> cell_index(int cohort, int ell) const;
};

// Cohort sample shares for one bin, normalized within each relative period.
struct WeightVector {
  Bin bin;
  std::vector<CattCell> cells;  // ell within bin
  Eigen::VectorXd shares;       // sum_e shares(e, ell) = 1 for each ell
  std::vector<std::string> warnings;

  std::map<int, double> cohort_weights() const;  // averaged over the bin
};

struct EstimateTable {
  std::vector<std::string> labels;
  Eigen::VectorXd estimates;
  Eigen::VectorXd std_errors;
  Eigen::MatrixXd vcov;
  std::size_t n_obs = 0, n_units = 0, n_clusters = 0;
  int dof_residual = 0;
  std::vector<std::string> warnings;

  std::optional<std::size_t> index_of(const std::string& label) const;
};

enum class IndicatorMode { fe_bins, catt_cells };

// One indicator column per bin (FE) or per populated (cohort, ell) cell
// (CATT). Never-treated and reference-period observations get zero rows.
// Rows cover observations with outcome and all controls observed.
DesignMatrix build_relative_indicators(const PanelDataset& dataset,
                                       const CohortMap& cohorts,
                                       const EventStudySpec& spec,
                                       IndicatorMode mode);

// Two-way fixed effects event study: demeaned indicators + controls, OLS,
// cluster-robust SEs.
EstimateTable estimate_fe(const PanelDataset& dataset, const CohortMap& cohorts,
                          const EventStudySpec& spec);

// Saturated cohort x relative-period regression. Cells with fewer than 2
// estimation rows stay in the regression but are dropped from the returned
// matrix with a warning.
CattMatrix estimate_catt(const PanelDataset& dataset, const CohortMap& cohorts,
                         const EventStudySpec& spec);

// Cohort shares of treated observations at each relative period of the bin,
// computed from observed-outcome cell counts; cells with fewer than 2
// observations are renormalized out.
WeightVector estimate_weights(const CohortMap& cohorts,
                              const EventStudySpec& spec, const Bin& bin);

// The interaction-weighted estimator: per bin, the share-weighted average of
// cell estimates, averaged over the bin's relative periods. Weights are
// treated as fixed in the covariance.
EstimateTable iw_aggregate(const CattMatrix& catt,
                           const std::vector<WeightVector>& weights,
                           const EventStudySpec& spec);

// Convenience wrapper: estimate_catt + estimate_weights + iw_aggregate.
struct IwResult {
  EstimateTable table;
  CattMatrix catt;
  std::vector<WeightVector> weights;
};
IwResult estimate_iw(const PanelDataset& dataset, const CohortMap& cohorts,
                     const EventStudySpec& spec);

// Joint Wald test that all lead-bin coefficients are zero.
WaldResult pretrend_test(const EstimateTable& table, const EventStudySpec& spec);

}  // namespace paneltk
