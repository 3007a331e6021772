#include "paneltk/eventstudy.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace paneltk {

// ---------------------------------------------------------------------------
// Bin / EventStudySpec

std::string Bin::label() const {
  if (ells.size() == 1) return std::to_string(ells.front());
  return std::to_string(ells.front()) + ":" + std::to_string(ells.back());
}

bool Bin::contains(int ell) const {
  return std::binary_search(ells.begin(), ells.end(), ell);
}

std::vector<Bin> EventStudySpec::default_bins() {
  std::vector<Bin> bins;
  for (int ell = -3; ell <= 3; ++ell)
    if (ell != -1) bins.push_back(Bin{{ell}});
  return bins;
}

EventStudySpec EventStudySpec::window(int lead_min, int lag_max, int ref) {
  if (lead_min > lag_max)
    fail(Errc::invalid_config, "window is empty");
  EventStudySpec spec;
  spec.bins.clear();
  spec.reference_period = ref;
  for (int ell = lead_min; ell <= lag_max; ++ell)
    if (ell != ref) spec.bins.push_back(Bin{{ell}});
  if (spec.bins.empty())
    fail(Errc::invalid_config, "window contains only the reference period");
  return spec;
}

void EventStudySpec::validate() const {
  if (bins.empty()) fail(Errc::invalid_config, "spec has no bins");
  std::set<int> seen;
  for (const Bin& b : bins) {
    if (b.ells.empty()) fail(Errc::invalid_config, "empty bin");
    for (std::size_t i = 0; i < b.ells.size(); ++i) {
      if (i > 0 && b.ells[i] != b.ells[i - 1] + 1)
        fail(Errc::invalid_config,
             "bin " + b.label() + " is not a consecutive range");
      if (!seen.insert(b.ells[i]).second)
        fail(Errc::invalid_config,
             "relative period " + std::to_string(b.ells[i]) +
                 " appears in more than one bin");
      if (b.ells[i] == reference_period)
        fail(Errc::invalid_config,
             "reference period " + std::to_string(reference_period) +
                 " must not be in a bin");
    }
  }
}

int EventStudySpec::window_min() const {
  int m = bins.front().min();
  for (const Bin& b : bins) m = std::min(m, b.min());
  return m;
}

int EventStudySpec::window_max() const {
  int m = bins.front().max();
  for (const Bin& b : bins) m = std::max(m, b.max());
  return m;
}

std::optional<int> EventStudySpec::effective_ell(int raw_ell) const {
  if (raw_ell == reference_period) return std::nullopt;
  const int lo = window_min(), hi = window_max();
  int ell = raw_ell;
  if (raw_ell < lo || raw_ell > hi) {
    if (endpoint_rule == EndpointRule::drop_indicator) return std::nullopt;
    ell = std::clamp(raw_ell, lo, hi);
  }
  if (bin_of(ell) == nullptr) return std::nullopt;  // hole between bins
  return ell;
}

const Bin* EventStudySpec::bin_of(int ell) const {
  for (const Bin& b : bins)
    if (b.contains(ell)) return &b;
  return nullptr;
}

// ---------------------------------------------------------------------------
// CattMatrix / WeightVector / EstimateTable

std::string CattCell::label() const {
  return "e" + std::to_string(cohort) + ":l" + std::to_string(ell);
}

std::optional<std::size_t> CattMatrix::cell_index(int cohort, int ell) const {
  const CattCell key{cohort, ell};
  auto it = std::lower_bound(cells.begin(), cells.end(), key);
  if (it == cells.end() || !(*it == key)) return std::nullopt;
  return static_cast<std::size_t>(it - cells.begin());
}

std::optional<double> CattMatrix::value(int cohort, int ell) const {
  auto idx = cell_index(cohort, ell);
  if (!idx) return std::nullopt;
  return delta[static_cast<Eigen::Index>(*idx)];
}

std::map<int, double> WeightVector::cohort_weights() const {
  std::set<int> ells;
  for (const CattCell& c : cells) ells.insert(c.ell);
  std::map<int, double> out;
  if (ells.empty()) return out;
  for (std::size_t i = 0; i < cells.size(); ++i)
    out[cells[i].cohort] += shares[static_cast<Eigen::Index>(i)];
  for (auto& [_, w] : out) w /= static_cast<double>(ells.size());
  return out;
}

std::optional<std::size_t> EstimateTable::index_of(
    const std::string& label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels.begin());
}

// ---------------------------------------------------------------------------
// estimation frame: rows with outcome and all controls observed

namespace {

struct Frame {
  std::vector<RowKey> rows;
  Eigen::VectorXd y;
  Eigen::MatrixXd controls;  // aligned with control names
  std::vector<int> unit_code, period_code;
  std::vector<std::string> cluster;
  std::size_t n_units = 0, n_clusters = 0;
};

Frame collect_frame(const PanelDataset& d, const std::vector<std::string>& controls) {
  std::vector<std::size_t> cov_idx;
  cov_idx.reserve(controls.size());
  for (const auto& name : controls) cov_idx.push_back(d.covariate_index(name));

  Frame f;
  std::vector<double> yv;
  std::vector<std::vector<double>> cv(controls.size());
  for (std::size_t u = 0; u < d.n_units(); ++u) {
    for (std::size_t p = 0; p < d.n_periods(); ++p) {
      const auto& out = d.outcome(u, p);
      if (!out) continue;
      bool complete = true;
      for (std::size_t c = 0; c < cov_idx.size(); ++c)
        if (!d.covariate(cov_idx[c], u, p)) { complete = false; break; }
      if (!complete) continue;
      f.rows.push_back({u, p});
      yv.push_back(*out);
      for (std::size_t c = 0; c < cov_idx.size(); ++c)
        cv[c].push_back(*d.covariate(cov_idx[c], u, p));
      f.unit_code.push_back(static_cast<int>(u));
      f.period_code.push_back(static_cast<int>(p));
      f.cluster.push_back(d.cluster_ids()[u]);
    }
  }
  if (f.rows.empty()) fail(Errc::empty_design, "no complete observations");
  f.y = Eigen::Map<Eigen::VectorXd>(yv.data(), static_cast<Eigen::Index>(yv.size()));
  f.controls.resize(static_cast<Eigen::Index>(f.rows.size()),
                    static_cast<Eigen::Index>(controls.size()));
  for (std::size_t c = 0; c < cv.size(); ++c)
    f.controls.col(static_cast<Eigen::Index>(c)) =
        Eigen::Map<Eigen::VectorXd>(cv[c].data(),
                                    static_cast<Eigen::Index>(cv[c].size()));
  f.n_units = std::set<int>(f.unit_code.begin(), f.unit_code.end()).size();
  f.n_clusters = std::set<std::string>(f.cluster.begin(), f.cluster.end()).size();
  return f;
}

std::optional<int> cohort_of_row(const PanelDataset& d, const RowKey& r) {
  const Adoption& a = d.adoption()[r.unit];
  if (a.never()) return std::nullopt;
  return *a.wave;
}

}  // namespace

// ---------------------------------------------------------------------------
// build_relative_indicators

DesignMatrix build_relative_indicators(const PanelDataset& dataset,
                                       const CohortMap& cohorts,
                                       const EventStudySpec& spec,
                                       IndicatorMode mode) {
  spec.validate();
  Frame f = collect_frame(dataset, spec.controls);
  const Eigen::Index n = static_cast<Eigen::Index>(f.rows.size());

  DesignMatrix dm;
  dm.rows = f.rows;

  if (mode == IndicatorMode::fe_bins) {
    dm.values = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(spec.bins.size()));
    for (const Bin& b : spec.bins) dm.names.push_back(b.label());
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& rel = cohorts.rel(f.rows[i].unit, f.rows[i].period);
      if (!rel) continue;
      const auto eff = spec.effective_ell(*rel);
      if (!eff) continue;
      for (std::size_t bi = 0; bi < spec.bins.size(); ++bi)
        if (spec.bins[bi].contains(*eff)) {
          dm.values(i, static_cast<Eigen::Index>(bi)) = 1.0;
          break;
        }
    }
    for (std::size_t bi = 0; bi < spec.bins.size(); ++bi)
      if (dm.values.col(static_cast<Eigen::Index>(bi)).sum() == 0.0)
        fail(Errc::empty_bin,
             "bin " + spec.bins[bi].label() + " matches no observation");
    return dm;
  }

  // CATT cells: collect populated (cohort, effective ell) pairs first.
  std::vector<std::optional<CattCell>> row_cell(f.rows.size());
  std::set<CattCell> cell_set;
  for (std::size_t i = 0; i < f.rows.size(); ++i) {
    const auto& rel = cohorts.rel(f.rows[i].unit, f.rows[i].period);
    if (!rel) continue;
    const auto eff = spec.effective_ell(*rel);
    if (!eff) continue;
    const auto cohort = cohort_of_row(dataset, f.rows[i]);
    row_cell[i] = CattCell{*cohort, *eff};
    cell_set.insert(*row_cell[i]);
  }
  std::vector<CattCell> cells(cell_set.begin(), cell_set.end());
  dm.values = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(cells.size()));
  for (const CattCell& c : cells) dm.names.push_back(c.label());
  for (std::size_t i = 0; i < f.rows.size(); ++i) {
    if (!row_cell[i]) continue;
    const auto it = std::lower_bound(cells.begin(), cells.end(), *row_cell[i]);
    dm.values(static_cast<Eigen::Index>(i),
              static_cast<Eigen::Index>(it - cells.begin())) = 1.0;
  }
  return dm;
}

// ---------------------------------------------------------------------------
// shared FE/CATT regression path

namespace {

struct RegressionParts {
  Frame frame;
  DesignMatrix design;       // indicators + controls, demeaned
  std::vector<double> indicator_counts;
  std::size_t n_indicators = 0;
  FitResult fit;
  Eigen::MatrixXd vcov;
};

RegressionParts run_two_way_regression(const PanelDataset& dataset,
                                       const CohortMap& cohorts,
                                       const EventStudySpec& spec,
                                       IndicatorMode mode) {
  RegressionParts parts;
  parts.design = build_relative_indicators(dataset, cohorts, spec, mode);
  parts.frame = collect_frame(dataset, spec.controls);
  parts.n_indicators = parts.design.names.size();
  for (Eigen::Index j = 0; j < parts.design.values.cols(); ++j)
    parts.indicator_counts.push_back(parts.design.values.col(j).sum());

  // append controls, then demean everything jointly with the outcome
  const Eigen::Index n = parts.design.values.rows();
  const Eigen::Index k_ind = parts.design.values.cols();
  const Eigen::Index k_ctl = parts.frame.controls.cols();
  Eigen::MatrixXd all(n, k_ind + k_ctl + 1);
  all.leftCols(k_ind) = parts.design.values;
  all.middleCols(k_ind, k_ctl) = parts.frame.controls;
  all.col(k_ind + k_ctl) = parts.frame.y;
  two_way_within_inplace(all, parts.frame.unit_code, parts.frame.period_code);

  parts.design.values = all.leftCols(k_ind + k_ctl);
  for (const auto& name : spec.controls) parts.design.names.push_back(name);
  const Eigen::VectorXd y_within = all.col(k_ind + k_ctl);

  const std::size_t n_periods_distinct =
      std::set<int>(parts.frame.period_code.begin(), parts.frame.period_code.end())
          .size();
  AbsorbedEffects absorbed;
  absorbed.names = {"unit", "period"};
  absorbed.parameter_count =
      static_cast<int>(parts.frame.n_units + n_periods_distinct) - 1;

  parts.fit = solve_ols(parts.design, y_within, absorbed);
  parts.vcov = cluster_robust_vcov(parts.fit, parts.design, parts.frame.cluster);
  return parts;
}

}  // namespace

EstimateTable estimate_fe(const PanelDataset& dataset, const CohortMap& cohorts,
                          const EventStudySpec& spec) {
  RegressionParts parts =
      run_two_way_regression(dataset, cohorts, spec, IndicatorMode::fe_bins);

  EstimateTable t;
  t.labels = parts.fit.coef_names;
  t.estimates = parts.fit.coefficients;
  t.vcov = parts.vcov;
  t.std_errors = parts.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  t.n_obs = parts.frame.rows.size();
  t.n_units = parts.frame.n_units;
  t.n_clusters = parts.frame.n_clusters;
  t.dof_residual = parts.fit.dof_residual;
  for (const auto& name : parts.fit.dropped_columns)
    t.warnings.push_back("column '" + name + "' dropped for collinearity");
  return t;
}

CattMatrix estimate_catt(const PanelDataset& dataset, const CohortMap& cohorts,
                         const EventStudySpec& spec) {
  if (cohorts.cohorts.empty())
    fail(Errc::no_cohorts, "no treated cohorts in panel");
  RegressionParts parts =
      run_two_way_regression(dataset, cohorts, spec, IndicatorMode::catt_cells);

  CattMatrix cm;
  cm.n_obs = parts.frame.rows.size();
  cm.n_units = parts.frame.n_units;
  cm.n_clusters = parts.frame.n_clusters;
  for (const auto& name : parts.fit.dropped_columns)
    cm.warnings.push_back("cell '" + name + "' dropped for collinearity");

  // retained cell coefficients, minus cells with fewer than 2 rows
  std::vector<Eigen::Index> keep;
  for (std::size_t j = 0; j < parts.fit.coef_names.size(); ++j) {
    const std::string& name = parts.fit.coef_names[j];
    auto pos = std::find(parts.design.names.begin(),
                         parts.design.names.begin() +
                             static_cast<std::ptrdiff_t>(parts.n_indicators),
                         name);
    const std::size_t col = static_cast<std::size_t>(
        pos - parts.design.names.begin());
    if (col >= parts.n_indicators) continue;  // a control column
    if (parts.indicator_counts[col] < 2.0) {
      cm.warnings.push_back("cell '" + name + "' has fewer than 2 observations; dropped");
      continue;
    }
    keep.push_back(static_cast<Eigen::Index>(j));
    // recover the cell from its label: e<cohort>:l<ell>
    const auto colon = name.find(":l");
    CattCell cell;
    cell.cohort = std::stoi(name.substr(1, colon - 1));
    cell.ell = std::stoi(name.substr(colon + 2));
    cm.cells.push_back(cell);
    cm.cell_counts.push_back(
        static_cast<std::size_t>(parts.indicator_counts[col]));
  }
  const Eigen::Index k = static_cast<Eigen::Index>(keep.size());
  cm.delta.resize(k);
  cm.vcov.resize(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    cm.delta[a] = parts.fit.coefficients[keep[a]];
    for (Eigen::Index b = 0; b < k; ++b)
      cm.vcov(a, b) = parts.vcov(keep[a], keep[b]);
  }
  return cm;
}

// ---------------------------------------------------------------------------
// weights and aggregation

WeightVector estimate_weights(const CohortMap& cohorts,
                              const EventStudySpec& spec, const Bin& bin) {
  spec.validate();
  // pool raw relative periods onto effective ones, then count per cell
  std::map<CattCell, std::size_t> counts;
  for (const auto& [key, count] : cohorts.cell_counts) {
    const auto eff = spec.effective_ell(key.second);
    if (!eff || !bin.contains(*eff)) continue;
    counts[CattCell{key.first, *eff}] += count;
  }
  WeightVector w;
  w.bin = bin;
  std::map<int, std::size_t> ell_totals;
  for (auto it = counts.begin(); it != counts.end();) {
    if (it->second < 2) {
      w.warnings.push_back("cell '" + it->first.label() +
                           "' has fewer than 2 observations; dropped from weights");
      it = counts.erase(it);
    } else {
      ell_totals[it->first.ell] += it->second;
      ++it;
    }
  }
  if (counts.empty())
    fail(Errc::empty_bin, "bin " + bin.label() + " has no treated observations");
  w.shares.resize(static_cast<Eigen::Index>(counts.size()));
  Eigen::Index i = 0;
  for (const auto& [cell, count] : counts) {
    w.cells.push_back(cell);
    w.shares[i++] = static_cast<double>(count) /
                    static_cast<double>(ell_totals[cell.ell]);
  }
  return w;
}

EstimateTable iw_aggregate(const CattMatrix& catt,
                           const std::vector<WeightVector>& weights,
                           const EventStudySpec& spec) {
  spec.validate();
  if (weights.size() != spec.bins.size())
    fail(Errc::cell_mismatch, "one WeightVector per bin required");

  const Eigen::Index n_cells = static_cast<Eigen::Index>(catt.cells.size());
  const Eigen::Index n_bins = static_cast<Eigen::Index>(spec.bins.size());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n_cells, n_bins);

  for (Eigen::Index bi = 0; bi < n_bins; ++bi) {
    const WeightVector& wv = weights[static_cast<std::size_t>(bi)];
    if (!(wv.bin.ells == spec.bins[static_cast<std::size_t>(bi)].ells))
      fail(Errc::cell_mismatch, "weight vector order does not match spec bins");
    std::set<int> populated;
    for (const CattCell& c : wv.cells) populated.insert(c.ell);
    const double n_ell = static_cast<double>(populated.size());
    for (std::size_t ci = 0; ci < wv.cells.size(); ++ci) {
      const auto idx = catt.cell_index(wv.cells[ci].cohort, wv.cells[ci].ell);
      if (!idx)
        fail(Errc::cell_mismatch, "weight cell '" + wv.cells[ci].label() +
                                      "' is missing from the CATT matrix");
      w(static_cast<Eigen::Index>(*idx), bi) =
          wv.shares[static_cast<Eigen::Index>(ci)] / n_ell;
    }
    // reverse coverage: every CATT cell in this bin must carry a weight
    for (std::size_t ci = 0; ci < catt.cells.size(); ++ci)
      if (wv.bin.contains(catt.cells[ci].ell) &&
          std::find(wv.cells.begin(), wv.cells.end(), catt.cells[ci]) ==
              wv.cells.end())
        fail(Errc::cell_mismatch, "CATT cell '" + catt.cells[ci].label() +
                                      "' has no weight in bin " + wv.bin.label());
  }

  EstimateTable t;
  for (const Bin& b : spec.bins) t.labels.push_back(b.label());
  t.estimates = w.transpose() * catt.delta;
  t.vcov = w.transpose() * catt.vcov * w;
  t.vcov = 0.5 * (t.vcov + t.vcov.transpose()).eval();
  t.std_errors = t.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  t.n_obs = catt.n_obs;
  t.n_units = catt.n_units;
  t.n_clusters = catt.n_clusters;
  t.warnings = catt.warnings;
  for (const WeightVector& wv : weights)
    t.warnings.insert(t.warnings.end(), wv.warnings.begin(), wv.warnings.end());
  return t;
}

IwResult estimate_iw(const PanelDataset& dataset, const CohortMap& cohorts,
                     const EventStudySpec& spec) {
  IwResult r;
  r.catt = estimate_catt(dataset, cohorts, spec);
  for (const Bin& b : spec.bins)
    r.weights.push_back(estimate_weights(cohorts, spec, b));
  r.table = iw_aggregate(r.catt, r.weights, spec);
  return r;
}

WaldResult pretrend_test(const EstimateTable& table, const EventStudySpec& spec) {
  std::vector<Eigen::Index> idx;
  for (const Bin& b : spec.bins) {
    if (!b.is_lead()) continue;
    const auto pos = table.index_of(b.label());
    if (pos) idx.push_back(static_cast<Eigen::Index>(*pos));
  }
  if (idx.empty())
    fail(Errc::empty_bin, "no lead bins present in the estimate table");
  Eigen::VectorXd beta(static_cast<Eigen::Index>(idx.size()));
  Eigen::MatrixXd v(static_cast<Eigen::Index>(idx.size()),
                    static_cast<Eigen::Index>(idx.size()));
  for (std::size_t a = 0; a < idx.size(); ++a) {
    beta[static_cast<Eigen::Index>(a)] = table.estimates[idx[a]];
    for (std::size_t b = 0; b < idx.size(); ++b)
      v(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          table.vcov(idx[a], idx[b]);
  }
  return wald_test(beta, v);
}

}  // namespace paneltk
