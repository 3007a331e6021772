#pragma once

#include <string>
#include <vector>

#include "paneltk/eventstudy.hpp"
#include "paneltk/panel.hpp"

namespace paneltk {

// Interaction difference-in-differences design: a unit-constant group dummy,
// a time-varying status dummy, their interaction, controls, and time fixed
// effects, estimated by random-effects feasible GLS.
struct DidSpec {
  std::string treatment_group;   // e.g. a workplace-law dummy, constant per unit
  std::string treatment_status;  // time-varying dummy
  std::vector<std::string> controls;
  bool include_time_fe = true;

  std::string interaction_label() const {
    return treatment_group + ":" + treatment_status;
  }
};

struct VarianceComponents {
  double sigma_u2 = 0.0;      // unit random-intercept variance, >= 0
  double sigma_e2 = 0.0;      // idiosyncratic variance, > 0
  std::vector<double> theta;  // per-unit quasi-demeaning fraction
  std::vector<std::string> warnings;
};

// Moment-based components: sigma_e^2 from the within-unit residual variance,
// sigma_u^2 from the between-unit residual variance minus sigma_e^2 / T-bar,
// floored at zero. theta_i = 1 - sqrt(sigma_e^2 / (sigma_e^2 + T_i sigma_u^2)).
VarianceComponents estimate_variance_components(const PanelDataset& dataset,
                                                const DidSpec& spec);

// Quasi-demeans outcome and regressors by theta_i, runs OLS with time
// dummies, clusters by unit. The overload with explicit components supports
// limit studies (theta = 0 is pooled OLS, theta -> 1 approaches within-FE).
EstimateTable estimate_did(const PanelDataset& dataset, const DidSpec& spec);
EstimateTable estimate_did(const PanelDataset& dataset, const DidSpec& spec,
                           const VarianceComponents& components);

}  // namespace paneltk
