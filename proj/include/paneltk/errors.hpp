#pragma once

#include <stdexcept>
#include <string>

namespace paneltk {

// Failure codes, split between input/data problems (the CLI exits 3) and
// estimation-time problems (exit 4).
enum class Errc {
  // data / input
  missing_column,
  duplicate_observation,
  non_integer_period,
  empty_dataset,
  non_biennial_waves,
  empty_after_filter,
  missing_region_column,
  invalid_adoption,
  inconsistent_unit_field,
  invalid_config,
  // estimation
  empty_design,
  all_columns_collinear,
  non_convergence,
  single_cluster,
  singular_vcov,
  empty_bin,
  no_cohorts,
  cell_mismatch,
  degenerate_panel,
  collinear_interaction,
  insufficient_dof,
};

const char* errc_name(Errc code);
bool is_data_error(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace paneltk
