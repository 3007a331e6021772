#include "paneltk/regress.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <map>

namespace paneltk {

Eigen::Index DesignMatrix::column_index(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end())
    fail(Errc::missing_column, "design has no column '" + name + "'");
  return static_cast<Eigen::Index>(it - names.begin());
}

Eigen::MatrixXd FitResult::xtx_inverse() const {
  const Eigen::Index k = r_factor.rows();
  Eigen::MatrixXd rinv =
      r_factor.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  return rinv * rinv.transpose();
}

double FitResult::coefficient(const std::string& name) const {
  auto it = std::find(coef_names.begin(), coef_names.end(), name);
  if (it == coef_names.end())
    fail(Errc::missing_column, "no coefficient named '" + name + "'");
  return coefficients[it - coef_names.begin()];
}

namespace {
constexpr double kPivotTol = 1e-10;
}

FitResult solve_ols(const DesignMatrix& design, const Eigen::VectorXd& y,
                    const AbsorbedEffects& absorbed) {
  const Eigen::Index n = design.values.rows();
  const Eigen::Index p = design.values.cols();
  if (n == 0 || p == 0)
    fail(Errc::empty_design, "design matrix is empty");
  if (y.size() != n)
    fail(Errc::invalid_config, "outcome length does not match design rows");

  // Householder QR, columns entered in design order. v_k is the (full-length)
  // reflector vector with zeros above position k; H_k = I - coef_k v_k v_k'.
  std::vector<Eigen::VectorXd> reflectors;
  std::vector<double> reflector_coefs;
  std::vector<Eigen::Index> kept;
  FitResult fit;
  Eigen::MatrixXd rcols(n, p);  // R columns for retained regressors
  Eigen::VectorXd qty = y;
  double max_pivot = 0.0;

  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::VectorXd c = design.values.col(j);
    for (std::size_t k = 0; k < reflectors.size(); ++k)
      c -= reflectors[k] * (reflector_coefs[k] * reflectors[k].dot(c));
    const Eigen::Index r = static_cast<Eigen::Index>(kept.size());
    const double pivot = (r < n) ? c.tail(n - r).norm() : 0.0;
    if (pivot <= kPivotTol * std::max(max_pivot, pivot)) {
      fit.dropped_columns.push_back(design.names[j]);
      continue;
    }
    max_pivot = std::max(max_pivot, pivot);
    const double beta = (c[r] >= 0.0) ? -pivot : pivot;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    v.tail(n - r) = c.tail(n - r);
    v[r] -= beta;
    const double vsq = v.squaredNorm();
    rcols.col(r).setZero();
    rcols.col(r).head(r) = c.head(r);
    rcols(r, r) = beta;
    if (vsq > 0.0) {
      reflectors.push_back(std::move(v));
      reflector_coefs.push_back(2.0 / vsq);
      qty -= reflectors.back() *
             (reflector_coefs.back() * reflectors.back().dot(qty));
    } else {
      // tail is exactly beta*e_r already; identity reflector
      reflectors.push_back(Eigen::VectorXd::Zero(n));
      reflector_coefs.push_back(0.0);
    }
    kept.push_back(j);
    fit.coef_names.push_back(design.names[j]);
  }

  const Eigen::Index rank = static_cast<Eigen::Index>(kept.size());
  if (rank == 0)
    fail(Errc::all_columns_collinear, "all design columns are collinear");

  fit.r_factor = rcols.topLeftCorner(rank, rank);
  fit.coefficients = fit.r_factor.triangularView<Eigen::Upper>().solve(
      qty.head(rank));

  Eigen::MatrixXd xk(n, rank);
  for (Eigen::Index k = 0; k < rank; ++k) xk.col(k) = design.values.col(kept[k]);
  fit.residuals = y - xk * fit.coefficients;
  fit.dof_residual =
      static_cast<int>(n - rank) - absorbed.parameter_count;
  fit.absorbed_effects = absorbed.names;
  return fit;
}

// ---------------------------------------------------------------------------
// two-way within transformation

namespace {

std::vector<int> dense_codes(const std::vector<int>& labels, int& n_groups) {
  std::map<int, int> code;
  for (int v : labels) code.emplace(v, 0);
  int next = 0;
  for (auto& [_, c] : code) c = next++;
  n_groups = next;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = code[labels[i]];
  return out;
}

}  // namespace

void two_way_within_inplace(Eigen::Ref<Eigen::MatrixXd> columns,
                            const std::vector<int>& unit,
                            const std::vector<int>& period) {
  const Eigen::Index n = columns.rows();
  if (static_cast<std::size_t>(n) != unit.size() ||
      static_cast<std::size_t>(n) != period.size())
    fail(Errc::invalid_config, "group label length does not match rows");
  if (n == 0) return;

  int nu = 0, nt = 0;
  const std::vector<int> ucode = dense_codes(unit, nu);
  const std::vector<int> tcode = dense_codes(period, nt);
  std::vector<double> usum(nu), tsum(nt);
  std::vector<int> ucount(nu, 0), tcount(nt, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    ++ucount[ucode[i]];
    ++tcount[tcode[i]];
  }

  constexpr int kMaxSweeps = 10000;
  constexpr double kTol = 1e-10;
  for (Eigen::Index col = 0; col < columns.cols(); ++col) {
    auto v = columns.col(col);
    int sweep = 0;
    for (; sweep < kMaxSweeps; ++sweep) {
      double max_mean = 0.0;
      std::fill(usum.begin(), usum.end(), 0.0);
      for (Eigen::Index i = 0; i < n; ++i) usum[ucode[i]] += v[i];
      for (int g = 0; g < nu; ++g) {
        usum[g] /= ucount[g];
        max_mean = std::max(max_mean, std::abs(usum[g]));
      }
      for (Eigen::Index i = 0; i < n; ++i) v[i] -= usum[ucode[i]];
      std::fill(tsum.begin(), tsum.end(), 0.0);
      for (Eigen::Index i = 0; i < n; ++i) tsum[tcode[i]] += v[i];
      for (int g = 0; g < nt; ++g) {
        tsum[g] /= tcount[g];
        max_mean = std::max(max_mean, std::abs(tsum[g]));
      }
      for (Eigen::Index i = 0; i < n; ++i) v[i] -= tsum[tcode[i]];
      if (max_mean < kTol) break;
    }
    if (sweep == kMaxSweeps)
      fail(Errc::non_convergence,
           "two-way demeaning did not converge in 10000 sweeps");
  }
}

Eigen::VectorXd two_way_within(const Eigen::VectorXd& values,
                               const std::vector<int>& unit,
                               const std::vector<int>& period) {
  Eigen::MatrixXd m = values;
  two_way_within_inplace(m, unit, period);
  return m.col(0);
}

// ---------------------------------------------------------------------------
// cluster-robust covariance

Eigen::MatrixXd cluster_robust_vcov(const FitResult& fit,
                                    const DesignMatrix& design,
                                    const std::vector<std::string>& cluster) {
  const Eigen::Index n = design.values.rows();
  if (static_cast<std::size_t>(n) != cluster.size())
    fail(Errc::invalid_config, "cluster label length does not match rows");
  if (fit.residuals.size() != n)
    fail(Errc::invalid_config, "fit does not match design rows");

  const Eigen::Index k = static_cast<Eigen::Index>(fit.coef_names.size());
  Eigen::MatrixXd xk(n, k);
  for (Eigen::Index j = 0; j < k; ++j)
    xk.col(j) = design.values.col(design.column_index(fit.coef_names[j]));

  std::map<std::string, std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < n; ++i) groups[cluster[i]].push_back(i);
  const std::size_t g_count = groups.size();
  if (g_count < 2)
    fail(Errc::single_cluster, "clustered covariance needs at least 2 clusters");
  if (fit.dof_residual <= 0)
    fail(Errc::insufficient_dof,
         "no residual degrees of freedom for the CR1 correction");

  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (const auto& [_, idx] : groups) {
    Eigen::VectorXd score = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i : idx) score += xk.row(i).transpose() * fit.residuals[i];
    meat.noalias() += score * score.transpose();
  }

  const double g = static_cast<double>(g_count);
  const double nn = static_cast<double>(n);
  const double correction =
      (g / (g - 1.0)) * ((nn - 1.0) / static_cast<double>(fit.dof_residual));
  const Eigen::MatrixXd bread = fit.xtx_inverse();
  Eigen::MatrixXd v = correction * bread * meat * bread;
  return 0.5 * (v + v.transpose());
}

// ---------------------------------------------------------------------------
// Wald test

WaldResult wald_test(const Eigen::VectorXd& coefficients,
                     const Eigen::MatrixXd& vcov) {
  const Eigen::Index k = coefficients.size();
  if (k == 0 || vcov.rows() != k || vcov.cols() != k)
    fail(Errc::invalid_config, "coefficient/vcov dimensions do not match");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(vcov);
  if (!lu.isInvertible())
    fail(Errc::singular_vcov, "vcov submatrix is singular");
  WaldResult w;
  w.statistic = std::max(0.0, coefficients.dot(lu.solve(coefficients)));
  w.dof = static_cast<int>(k);
  boost::math::chi_squared dist(static_cast<double>(w.dof));
  w.p_value = boost::math::cdf(boost::math::complement(dist, w.statistic));
  return w;
}

double z_test_p_value(double estimate, double std_error) {
  if (!(std_error > 0.0)) return estimate == 0.0 ? 1.0 : 0.0;
  boost::math::normal dist;
  const double z = std::abs(estimate / std_error);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, z));
}

}  // namespace paneltk
