#include "paneltk/did.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace paneltk {

namespace {

struct DidFrame {
  std::vector<RowKey> rows;
  Eigen::VectorXd y;
  DesignMatrix design;            // interaction, group, status, controls, time FE, const
  std::vector<int> unit_code;
  std::vector<std::string> unit_label;
  std::size_t n_units = 0;
};

DidFrame collect_did_frame(const PanelDataset& d, const DidSpec& spec,
                           bool include_const) {
  const std::size_t gi = d.covariate_index(spec.treatment_group);
  const std::size_t si = d.covariate_index(spec.treatment_status);
  std::vector<std::size_t> ci;
  for (const auto& name : spec.controls) ci.push_back(d.covariate_index(name));

  DidFrame f;
  std::vector<double> yv, gv, sv;
  std::vector<std::vector<double>> cv(ci.size());
  std::vector<std::size_t> period_of_row;
  for (std::size_t u = 0; u < d.n_units(); ++u) {
    for (std::size_t p = 0; p < d.n_periods(); ++p) {
      if (!d.outcome(u, p) || !d.covariate(gi, u, p) || !d.covariate(si, u, p))
        continue;
      bool complete = true;
      for (std::size_t c = 0; c < ci.size(); ++c)
        if (!d.covariate(ci[c], u, p)) { complete = false; break; }
      if (!complete) continue;
      f.rows.push_back({u, p});
      yv.push_back(*d.outcome(u, p));
      gv.push_back(*d.covariate(gi, u, p));
      sv.push_back(*d.covariate(si, u, p));
      for (std::size_t c = 0; c < ci.size(); ++c)
        cv[c].push_back(*d.covariate(ci[c], u, p));
      f.unit_code.push_back(static_cast<int>(u));
      f.unit_label.push_back(d.unit_ids()[u]);
      period_of_row.push_back(p);
    }
  }
  if (f.rows.empty()) fail(Errc::empty_design, "no complete observations");
  const Eigen::Index n = static_cast<Eigen::Index>(f.rows.size());
  f.y = Eigen::Map<Eigen::VectorXd>(yv.data(), n);
  f.n_units = std::set<int>(f.unit_code.begin(), f.unit_code.end()).size();

  // treatment_group must be constant within unit
  std::map<int, double> group_of_unit;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto [it, inserted] = group_of_unit.try_emplace(f.unit_code[i], gv[i]);
    if (!inserted && it->second != gv[i])
      fail(Errc::invalid_config, "column '" + spec.treatment_group +
                                     "' varies within a unit");
  }

  std::set<std::size_t> period_set(period_of_row.begin(), period_of_row.end());
  std::vector<std::size_t> fe_periods(period_set.begin(), period_set.end());
  if (!fe_periods.empty()) fe_periods.erase(fe_periods.begin());  // reference

  const std::size_t k = 3 + ci.size() +
                        (spec.include_time_fe ? fe_periods.size() : 0) +
                        (include_const ? 1 : 0);
  f.design.values = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(k));
  f.design.rows = f.rows;
  Eigen::Index col = 0;
  f.design.names.push_back(spec.interaction_label());
  for (Eigen::Index i = 0; i < n; ++i) f.design.values(i, col) = gv[i] * sv[i];
  ++col;
  f.design.names.push_back(spec.treatment_group);
  for (Eigen::Index i = 0; i < n; ++i) f.design.values(i, col) = gv[i];
  ++col;
  f.design.names.push_back(spec.treatment_status);
  for (Eigen::Index i = 0; i < n; ++i) f.design.values(i, col) = sv[i];
  ++col;
  for (std::size_t c = 0; c < ci.size(); ++c, ++col) {
    f.design.names.push_back(spec.controls[c]);
    f.design.values.col(col) =
        Eigen::Map<Eigen::VectorXd>(cv[c].data(), n);
  }
  if (spec.include_time_fe) {
    for (std::size_t p : fe_periods) {
      f.design.names.push_back("t" + std::to_string(d.periods()[p]));
      for (Eigen::Index i = 0; i < n; ++i)
        if (period_of_row[static_cast<std::size_t>(i)] == p)
          f.design.values(i, col) = 1.0;
      ++col;
    }
  }
  if (include_const) {
    f.design.names.push_back("const");
    f.design.values.col(col).setOnes();
  }
  return f;
}

// per-unit row lists, in unit-code order
std::map<int, std::vector<Eigen::Index>> unit_rows(const DidFrame& f) {
  std::map<int, std::vector<Eigen::Index>> out;
  for (std::size_t i = 0; i < f.unit_code.size(); ++i)
    out[f.unit_code[i]].push_back(static_cast<Eigen::Index>(i));
  return out;
}

}  // namespace

VarianceComponents estimate_variance_components(const PanelDataset& dataset,
                                                const DidSpec& spec) {
  DidFrame f = collect_did_frame(dataset, spec, /*include_const=*/false);
  const auto groups = unit_rows(f);
  const Eigen::Index n = f.y.size();
  const std::size_t n_units = groups.size();

  std::size_t max_t = 0;
  for (const auto& [_, idx] : groups) max_t = std::max(max_t, idx.size());
  if (max_t < 2)
    fail(Errc::degenerate_panel, "every unit has a single observation");

  VarianceComponents vc;

  // within step: demean y and X by unit, regress, residual variance
  Eigen::VectorXd yw = f.y;
  Eigen::MatrixXd xw = f.design.values;
  for (const auto& [_, idx] : groups) {
    double ymean = 0.0;
    Eigen::RowVectorXd xmean = Eigen::RowVectorXd::Zero(xw.cols());
    for (Eigen::Index i : idx) {
      ymean += yw[i];
      xmean += xw.row(i);
    }
    ymean /= static_cast<double>(idx.size());
    xmean /= static_cast<double>(idx.size());
    for (Eigen::Index i : idx) {
      yw[i] -= ymean;
      xw.row(i) -= xmean;
    }
  }
  // keep only columns with within variation
  DesignMatrix within;
  within.rows = f.rows;
  std::vector<Eigen::Index> wcols;
  for (Eigen::Index j = 0; j < xw.cols(); ++j)
    if (xw.col(j).norm() > 1e-12 * std::sqrt(static_cast<double>(n)))
      wcols.push_back(j);
  double ssr_w = 0.0;
  Eigen::Index rank_w = 0;
  if (!wcols.empty()) {
    within.values.resize(n, static_cast<Eigen::Index>(wcols.size()));
    for (std::size_t j = 0; j < wcols.size(); ++j) {
      within.values.col(static_cast<Eigen::Index>(j)) = xw.col(wcols[j]);
      within.names.push_back(f.design.names[static_cast<std::size_t>(wcols[j])]);
    }
    FitResult fw = solve_ols(within, yw);
    ssr_w = fw.residuals.squaredNorm();
    rank_w = static_cast<Eigen::Index>(fw.coef_names.size());
  } else {
    ssr_w = yw.squaredNorm();
  }
  const double dof_w = static_cast<double>(n) - static_cast<double>(n_units) -
                       static_cast<double>(rank_w);
  if (dof_w <= 0.0)
    fail(Errc::degenerate_panel, "no degrees of freedom in the within step");
  vc.sigma_e2 = ssr_w / dof_w;

  // between step: regression on unit means, plus intercept
  const Eigen::Index nu = static_cast<Eigen::Index>(n_units);
  Eigen::VectorXd yb(nu);
  DesignMatrix between;
  between.values.resize(nu, f.design.values.cols() + 1);
  between.names = f.design.names;
  between.names.push_back("const");
  double t_bar = 0.0;
  Eigen::Index r = 0;
  for (const auto& [_, idx] : groups) {
    double ymean = 0.0;
    Eigen::RowVectorXd xmean = Eigen::RowVectorXd::Zero(f.design.values.cols());
    for (Eigen::Index i : idx) {
      ymean += f.y[i];
      xmean += f.design.values.row(i);
    }
    yb[r] = ymean / static_cast<double>(idx.size());
    between.values.row(r).head(f.design.values.cols()) =
        xmean / static_cast<double>(idx.size());
    between.values(r, f.design.values.cols()) = 1.0;
    t_bar += static_cast<double>(idx.size());
    ++r;
  }
  t_bar /= static_cast<double>(n_units);

  double s_b2 = 0.0;
  bool have_between = false;
  FitResult fb;
  try {
    fb = solve_ols(between, yb);
    const double dof_b = static_cast<double>(nu) -
                         static_cast<double>(fb.coef_names.size());
    if (dof_b > 0.0) {
      s_b2 = fb.residuals.squaredNorm() / dof_b;
      have_between = true;
    }
  } catch (const Error&) {
    // fall through: no between information
  }
  if (!have_between) {
    vc.sigma_u2 = 0.0;
    vc.warnings.push_back("between step has no degrees of freedom; sigma_u2 set to 0");
  } else {
    vc.sigma_u2 = s_b2 - vc.sigma_e2 / t_bar;
    if (vc.sigma_u2 < 0.0) {
      vc.warnings.push_back("moment estimate of sigma_u2 was negative; floored at 0");
      vc.sigma_u2 = 0.0;
    }
  }

  vc.theta.assign(dataset.n_units(), 0.0);
  for (const auto& [unit, idx] : groups) {
    const double t_i = static_cast<double>(idx.size());
    const double denom = vc.sigma_e2 + t_i * vc.sigma_u2;
    double theta =
        denom > 0.0 ? 1.0 - std::sqrt(vc.sigma_e2 / denom) : 0.0;
    // theta < 1 strictly, or unit-constant columns become unidentifiable
    vc.theta[static_cast<std::size_t>(unit)] = std::min(theta, 1.0 - 1e-10);
  }
  return vc;
}

EstimateTable estimate_did(const PanelDataset& dataset, const DidSpec& spec) {
  return estimate_did(dataset, spec, estimate_variance_components(dataset, spec));
}

EstimateTable estimate_did(const PanelDataset& dataset, const DidSpec& spec,
                           const VarianceComponents& components) {
  DidFrame f = collect_did_frame(dataset, spec, /*include_const=*/true);

  // the group dummy needs variation across units, or beta_1 and beta_2
  // cannot be separated from the status and constant columns
  std::set<double> group_values;
  const Eigen::Index gcol = f.design.column_index(spec.treatment_group);
  for (Eigen::Index i = 0; i < f.y.size(); ++i)
    group_values.insert(f.design.values(i, gcol));
  if (group_values.size() < 2)
    fail(Errc::collinear_interaction,
         "column '" + spec.treatment_group +
             "' has no variation across units; the interaction is collinear");

  // quasi-demean outcome and regressors by the unit's theta
  Eigen::VectorXd y = f.y;
  Eigen::MatrixXd x = f.design.values;
  for (const auto& [unit, idx] : unit_rows(f)) {
    if (static_cast<std::size_t>(unit) >= components.theta.size())
      fail(Errc::invalid_config, "variance components do not cover all units");
    const double theta = components.theta[static_cast<std::size_t>(unit)];
    if (theta == 0.0) continue;
    double ymean = 0.0;
    Eigen::RowVectorXd xmean = Eigen::RowVectorXd::Zero(x.cols());
    for (Eigen::Index i : idx) {
      ymean += y[i];
      xmean += x.row(i);
    }
    ymean /= static_cast<double>(idx.size());
    xmean /= static_cast<double>(idx.size());
    for (Eigen::Index i : idx) {
      y[i] -= theta * ymean;
      x.row(i) -= theta * xmean;
    }
  }

  DesignMatrix gls;
  gls.names = f.design.names;
  gls.values = std::move(x);
  gls.rows = f.rows;
  FitResult fit = solve_ols(gls, y);
  Eigen::MatrixXd vcov = cluster_robust_vcov(fit, gls, f.unit_label);

  EstimateTable t;
  t.labels = fit.coef_names;
  t.estimates = fit.coefficients;
  t.vcov = vcov;
  t.std_errors = vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  t.n_obs = f.rows.size();
  t.n_units = f.n_units;
  t.n_clusters = f.n_units;
  t.dof_residual = fit.dof_residual;
  for (const auto& name : fit.dropped_columns)
    t.warnings.push_back("column '" + name + "' dropped for collinearity");
  t.warnings.insert(t.warnings.end(), components.warnings.begin(),
                    components.warnings.end());
  return t;
}

}  // namespace paneltk
