#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <string>
#include <vector>

#include "paneltk/errors.hpp"

namespace paneltk {

struct RowKey {
  std::size_t unit = 0;
  std::size_t period = 0;
};

// Named, fully observed regressor columns; rows with missing values are
// excluded before construction.
struct DesignMatrix {
  std::vector<std::string> names;
  Eigen::MatrixXd values;        // rows x columns
  std::vector<RowKey> rows;      // row -> (unit, period)

  std::size_t n_rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t n_cols() const { return names.size(); }
  Eigen::Index column_index(const std::string& name) const;
};

// Fixed-effect dimensions removed by demeaning before the solve; their
// parameter count enters the residual degrees of freedom.
struct AbsorbedEffects {
  std::vector<std::string> names;
  int parameter_count = 0;
};

struct FitResult {
  std::vector<std::string> coef_names;   // retained columns, design order
  Eigen::VectorXd coefficients;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd r_factor;              // upper triangular, X'X = R'R
  int dof_residual = 0;
  std::vector<std::string> dropped_columns;
  std::vector<std::string> absorbed_effects;

  Eigen::MatrixXd xtx_inverse() const;   // R^{-1} R^{-T}
  double coefficient(const std::string& name) const;
};

// Least squares via sequential Householder QR. Columns are entered in design
// order; a column whose pivot falls below 1e-10 times the largest retained
// pivot is dropped (so among collinear columns the last-entered one goes).
FitResult solve_ols(const DesignMatrix& design, const Eigen::VectorXd& y,
                    const AbsorbedEffects& absorbed = {});

// Removes unit and period means jointly by alternating demeaning, iterated
// until the largest group mean in a sweep is below 1e-10. Group labels are
// arbitrary integer codes. Convergence is measured on absolute changes, so
// callers should keep inputs at reasonable magnitudes.
void two_way_within_inplace(Eigen::Ref<Eigen::MatrixXd> columns,
                            const std::vector<int>& unit,
                            const std::vector<int>& period);
Eigen::VectorXd two_way_within(const Eigen::VectorXd& values,
                               const std::vector<int>& unit,
                               const std::vector<int>& period);

// CR1 sandwich: c * (X'X)^-1 (sum_g X_g' e_g e_g' X_g) (X'X)^-1 with
// c = [G/(G-1)] * [(N-1)/(N-K)], K counting absorbed parameters.
Eigen::MatrixXd cluster_robust_vcov(const FitResult& fit,
                                    const DesignMatrix& design,
                                    const std::vector<std::string>& cluster);

struct WaldResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

// W = b' V^-1 b against the chi-squared upper tail.
WaldResult wald_test(const Eigen::VectorXd& coefficients,
                     const Eigen::MatrixXd& vcov);

// Two-sided normal p-value for a single coefficient (display helper).
double z_test_p_value(double estimate, double std_error);

}  // namespace paneltk
