#include "paneltk/errors.hpp"

namespace paneltk {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::missing_column: return "MissingColumn";
    case Errc::duplicate_observation: return "DuplicateObservation";
    case Errc::non_integer_period: return "NonIntegerPeriod";
    case Errc::empty_dataset: return "EmptyDataset";
    case Errc::non_biennial_waves: return "NonBiennialWaves";
    case Errc::empty_after_filter: return "EmptyAfterFilter";
    case Errc::missing_region_column: return "MissingRegionColumn";
    case Errc::invalid_adoption: return "InvalidAdoption";
    case Errc::inconsistent_unit_field: return "InconsistentUnitField";
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::empty_design: return "EmptyDesign";
    case Errc::all_columns_collinear: return "AllColumnsCollinear";
    case Errc::non_convergence: return "NonConvergence";
    case Errc::single_cluster: return "SingleCluster";
    case Errc::singular_vcov: return "SingularVcov";
    case Errc::empty_bin: return "EmptyBin";
    case Errc::no_cohorts: return "NoCohorts";
    case Errc::cell_mismatch: return "CellMismatch";
    case Errc::degenerate_panel: return "DegeneratePanel";
    case Errc::collinear_interaction: return "CollinearInteraction";
    case Errc::insufficient_dof: return "InsufficientDof";
  }
  return "UnknownError";
}

bool is_data_error(Errc code) {
  switch (code) {
    case Errc::missing_column:
    case Errc::duplicate_observation:
    case Errc::non_integer_period:
    case Errc::empty_dataset:
    case Errc::non_biennial_waves:
    case Errc::empty_after_filter:
    case Errc::missing_region_column:
    case Errc::invalid_adoption:
    case Errc::inconsistent_unit_field:
    case Errc::invalid_config:
      return true;
    default:
      return false;
  }
}

}  // namespace paneltk
