#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "paneltk/did.hpp"
#include "paneltk/eventstudy.hpp"
#include "paneltk/simulate.hpp"

namespace paneltk {

using Json = nlohmann::ordered_json;

// Numbers are written with 17 significant digits so CSV output rereads to
// the same double and identical runs produce identical bytes.
std::string format_double(double v);

std::string to_csv(const EstimateTable& table);
std::string to_csv(const CattMatrix& catt);
std::string to_csv(const McSummary& summary);

Json to_json(const EstimateTable& table);
Json to_json(const CattMatrix& catt);
Json to_json(const McSummary& summary);
Json to_json(const WaldResult& wald, const std::vector<std::string>& labels);

// Generated panel in the load_panel CSV schema (unit,period,outcome,cluster,
// adoption[,covariates...]).
std::string panel_to_csv(const PanelDataset& panel);

// Key-value DgpConfig file: `key = value` lines, `#` comments. Lists are
// comma separated; effect paths use `effect_path.<cohort>`, lead paths
// `lead_path.<cohort> = <ell>:<tau>,...`, covariates
// `covariate.<name> = <coefficient>[,<sd>]`.
DgpConfig load_dgp_config(const std::string& path);

// Table-3 style listing: estimate with significance stars over the standard
// error, one row per label, the reference period shown as a zero row.
void write_text_table(std::ostream& os, const EstimateTable& table,
                      const EventStudySpec* spec = nullptr);

std::string significance_stars(double estimate, double std_error);

}  // namespace paneltk
