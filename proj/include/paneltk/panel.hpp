#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "paneltk/errors.hpp"

namespace paneltk {

// Adoption status of one unit. `wave` holds E_i when the unit adopts inside
// the observed period grid. Units without an in-sample wave act as controls;
// `post_sample` records whether adoption happens after the last wave (those
// units are estimated exactly like never-treated ones).
struct Adoption {
  std::optional<int> wave;
  bool post_sample = false;

  bool never() const { return !wave.has_value(); }
};

// Rectangular unit x period panel. Immutable after construction; every
// operation that restricts the sample returns a new dataset.
class PanelDataset {
 public:
  std::size_t n_units() const { return unit_ids_.size(); }
  std::size_t n_periods() const { return periods_.size(); }
  std::size_t n_cells() const { return unit_ids_.size() * periods_.size(); }

  const std::vector<std::string>& unit_ids() const { return unit_ids_; }
  const std::vector<std::string>& cluster_ids() const { return cluster_ids_; }
  const std::vector<int>& periods() const { return periods_; }
  const std::vector<Adoption>& adoption() const { return adoption_; }

  const std::optional<double>& outcome(std::size_t u, std::size_t p) const {
    return outcome_[u * periods_.size() + p];
  }

  const std::vector<std::string>& covariate_names() const { return cov_names_; }
  bool has_covariate(const std::string& name) const;
  const std::optional<double>& covariate(std::size_t cov, std::size_t u,
                                         std::size_t p) const {
    return cov_values_[cov][u * periods_.size() + p];
  }
  std::size_t covariate_index(const std::string& name) const;

  bool has_region() const { return has_region_; }
  const std::optional<std::string>& region(std::size_t u, std::size_t p) const {
    return region_[u * periods_.size() + p];
  }

  std::optional<std::size_t> period_position(int period) const;

  // Keeps the listed units (indices into unit order), all periods.
  PanelDataset select_units(const std::vector<std::size_t>& keep) const;

  friend class PanelBuilder;

 private:
  PanelDataset() = default;

  std::vector<std::string> unit_ids_;
  std::vector<std::string> cluster_ids_;
  std::vector<int> periods_;
  std::map<int, std::size_t> period_pos_;
  std::vector<Adoption> adoption_;
  std::vector<std::optional<double>> outcome_;
  std::vector<std::string> cov_names_;
  std::vector<std::vector<std::optional<double>>> cov_values_;
  std::vector<std::optional<std::string>> region_;
  bool has_region_ = false;
};

// Incremental constructor for PanelDataset; validates on build().
class PanelBuilder {
 public:
  explicit PanelBuilder(std::vector<int> periods);

  // Returns the unit's index. Re-adding an id is an error.
  std::size_t add_unit(const std::string& unit_id, const std::string& cluster_id,
                       Adoption adoption);

  void add_covariate(const std::string& name);
  void enable_region();

  void set_outcome(std::size_t unit, int period, double value);
  void set_covariate(std::size_t unit, int period, const std::string& name,
                     double value);
  void set_region(std::size_t unit, int period, const std::string& region);

  PanelDataset build();

 private:
  std::size_t cell(std::size_t unit, int period) const;

  PanelDataset d_;
  std::map<std::string, std::size_t> unit_index_;
  std::map<std::string, std::size_t> cov_index_;
  bool built_ = false;
};

// Adoption-wave cohort structure. `cohorts` and `never_treated` partition the
// unit indices; relative_time is t - E_i on the full grid for treated units.
struct CohortMap {
  std::map<int, std::vector<std::size_t>> cohorts;
  std::vector<std::size_t> never_treated;
  std::vector<std::optional<int>> relative_time;  // unit-major grid
  // (cohort, raw relative period) -> rows with an observed outcome
  std::map<std::pair<int, int>, std::size_t> cell_counts;
  std::size_t n_units = 0;
  std::size_t n_periods = 0;

  const std::optional<int>& rel(std::size_t u, std::size_t p) const {
    return relative_time[u * n_periods + p];
  }
};

// Column-name mapping for CSV ingestion. `covariates` lists extra numeric
// columns to load. When both adoption and law_year are given, adoption wins.
struct CsvSchema {
  std::string unit = "unit";
  std::string period = "period";
  std::string outcome = "outcome";
  std::string cluster = "cluster";
  std::optional<std::string> region;
  std::optional<std::string> adoption;
  std::optional<std::string> law_year;
  std::vector<std::string> covariates;
};

PanelDataset load_panel(const std::string& path, const CsvSchema& schema);

// Maps a law year onto the biennial wave treated first: the smallest wave w
// with law_year in {w, w-1}. Years before the grid map to the first wave;
// years after the last wave return nullopt (not treated within sample).
std::optional<int> map_law_year_to_wave(int law_year,
                                        const std::vector<int>& wave_years);

CohortMap build_cohorts(const PanelDataset& dataset);

// Keeps units with at least min_consecutive consecutive observed outcomes
// (consecutive in the period grid; a missing outcome breaks the run). The
// default matches the 9-wave convention for biennial survey panels.
PanelDataset filter_balanced(const PanelDataset& dataset,
                             int min_consecutive = 9);

// Drops units whose observed region value changes across periods.
PanelDataset drop_movers(const PanelDataset& dataset);

}  // namespace paneltk
