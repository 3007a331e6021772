#include "paneltk/panel.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace paneltk {

namespace {

std::optional<int> parse_int(const std::string& s) {
  int v = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// Plain comma-split; the schema forbids embedded commas and quoting.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

bool is_never_token(const std::string& s) {
  if (s.empty()) return true;
  std::string up = s;
  std::transform(up.begin(), up.end(), up.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  return up == "NEVER" || up == "NA";
}

}  // namespace

// ---------------------------------------------------------------------------
// PanelDataset

bool PanelDataset::has_covariate(const std::string& name) const {
  return std::find(cov_names_.begin(), cov_names_.end(), name) !=
         cov_names_.end();
}

std::size_t PanelDataset::covariate_index(const std::string& name) const {
  auto it = std::find(cov_names_.begin(), cov_names_.end(), name);
  if (it == cov_names_.end())
    fail(Errc::missing_column, "covariate '" + name + "' not in dataset");
  return static_cast<std::size_t>(it - cov_names_.begin());
}

std::optional<std::size_t> PanelDataset::period_position(int period) const {
  auto it = period_pos_.find(period);
  if (it == period_pos_.end()) return std::nullopt;
  return it->second;
}

PanelDataset PanelDataset::select_units(
    const std::vector<std::size_t>& keep) const {
  PanelDataset out;
  out.periods_ = periods_;
  out.period_pos_ = period_pos_;
  out.cov_names_ = cov_names_;
  out.has_region_ = has_region_;
  const std::size_t P = periods_.size();
  out.cov_values_.resize(cov_names_.size());
  for (std::size_t u : keep) {
    out.unit_ids_.push_back(unit_ids_[u]);
    out.cluster_ids_.push_back(cluster_ids_[u]);
    out.adoption_.push_back(adoption_[u]);
    for (std::size_t p = 0; p < P; ++p) {
      out.outcome_.push_back(outcome_[u * P + p]);
      out.region_.push_back(region_[u * P + p]);
    }
    for (std::size_t c = 0; c < cov_names_.size(); ++c)
      for (std::size_t p = 0; p < P; ++p)
        out.cov_values_[c].push_back(cov_values_[c][u * P + p]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// PanelBuilder

PanelBuilder::PanelBuilder(std::vector<int> periods) {
  if (periods.empty()) fail(Errc::empty_dataset, "no periods given");
  for (std::size_t i = 1; i < periods.size(); ++i)
    if (periods[i] <= periods[i - 1])
      fail(Errc::invalid_config, "periods must be strictly increasing");
  d_.periods_ = std::move(periods);
  for (std::size_t i = 0; i < d_.periods_.size(); ++i)
    d_.period_pos_[d_.periods_[i]] = i;
}

std::size_t PanelBuilder::add_unit(const std::string& unit_id,
                                   const std::string& cluster_id,
                                   Adoption adoption) {
  if (unit_index_.count(unit_id))
    fail(Errc::inconsistent_unit_field, "unit '" + unit_id + "' added twice");
  if (adoption.wave.has_value()) {
    const auto& per = d_.periods_;
    bool member = d_.period_pos_.count(*adoption.wave) > 0;
    if (!member) {
      // Post-sample adopters are controls within sample; store as NEVER+flag.
      if (*adoption.wave > per.back()) {
        adoption.wave.reset();
        adoption.post_sample = true;
      } else {
        fail(Errc::invalid_adoption,
             "unit '" + unit_id + "': adoption period " +
                 std::to_string(*adoption.wave) + " is not in the period grid");
      }
    }
  }
  const std::size_t idx = d_.unit_ids_.size();
  unit_index_[unit_id] = idx;
  d_.unit_ids_.push_back(unit_id);
  d_.cluster_ids_.push_back(cluster_id);
  d_.adoption_.push_back(adoption);
  const std::size_t P = d_.periods_.size();
  d_.outcome_.resize((idx + 1) * P);
  d_.region_.resize((idx + 1) * P);
  for (auto& col : d_.cov_values_) col.resize((idx + 1) * P);
  return idx;
}

void PanelBuilder::add_covariate(const std::string& name) {
  if (cov_index_.count(name))
    fail(Errc::invalid_config, "covariate '" + name + "' added twice");
  cov_index_[name] = d_.cov_names_.size();
  d_.cov_names_.push_back(name);
  d_.cov_values_.emplace_back(d_.unit_ids_.size() * d_.periods_.size());
}

void PanelBuilder::enable_region() { d_.has_region_ = true; }

std::size_t PanelBuilder::cell(std::size_t unit, int period) const {
  auto it = d_.period_pos_.find(period);
  if (it == d_.period_pos_.end())
    fail(Errc::invalid_config,
         "period " + std::to_string(period) + " not in the period grid");
  return unit * d_.periods_.size() + it->second;
}

void PanelBuilder::set_outcome(std::size_t unit, int period, double value) {
  d_.outcome_[cell(unit, period)] = value;
}

void PanelBuilder::set_covariate(std::size_t unit, int period,
                                 const std::string& name, double value) {
  auto it = cov_index_.find(name);
  if (it == cov_index_.end())
    fail(Errc::missing_column, "covariate '" + name + "' not declared");
  d_.cov_values_[it->second][cell(unit, period)] = value;
}

void PanelBuilder::set_region(std::size_t unit, int period,
                              const std::string& region) {
  if (!d_.has_region_) fail(Errc::missing_region_column, "region not enabled");
  d_.region_[cell(unit, period)] = region;
}

PanelDataset PanelBuilder::build() {
  if (built_) fail(Errc::invalid_config, "build() called twice");
  built_ = true;
  if (d_.unit_ids_.empty()) fail(Errc::empty_dataset, "dataset has no units");
  return std::move(d_);
}

// ---------------------------------------------------------------------------
// load_panel

PanelDataset load_panel(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in)
    fail(Errc::empty_dataset, "cannot open file '" + path + "'");

  std::string line;
  if (!std::getline(in, line))
    fail(Errc::empty_dataset, "file '" + path + "' is empty");
  const std::vector<std::string> header = split_csv_line(strip_cr(line));

  auto find_col = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      fail(Errc::missing_column,
           "column '" + name + "' not found in header of '" + path + "'");
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t c_unit = find_col(schema.unit);
  const std::size_t c_period = find_col(schema.period);
  const std::size_t c_outcome = find_col(schema.outcome);
  const std::size_t c_cluster = find_col(schema.cluster);
  std::optional<std::size_t> c_region, c_adopt, c_law;
  if (schema.region) c_region = find_col(*schema.region);
  if (schema.adoption) c_adopt = find_col(*schema.adoption);
  if (schema.law_year && !schema.adoption) c_law = find_col(*schema.law_year);
  std::vector<std::size_t> c_covs;
  for (const auto& name : schema.covariates) c_covs.push_back(find_col(name));

  struct Row {
    std::string unit, cluster;
    int period = 0;
    std::optional<double> outcome;
    std::optional<std::string> region;
    // raw adoption/law field: integer, or nullopt for NEVER
    std::optional<int> timing;
    bool timing_present = false;
    std::vector<std::optional<double>> covs;
  };

  std::vector<Row> rows;
  std::vector<std::string> unit_order;
  std::set<std::string> unit_seen;
  std::set<int> period_set;
  std::set<std::pair<std::string, int>> obs_seen;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() < header.size())
      fail(Errc::missing_column, "row " + std::to_string(line_no) + " of '" +
                                     path + "' has " + std::to_string(f.size()) +
                                     " fields, header has " +
                                     std::to_string(header.size()));
    Row r;
    r.unit = f[c_unit];
    r.cluster = f[c_cluster];
    auto period = parse_int(f[c_period]);
    if (!period)
      fail(Errc::non_integer_period,
           "row " + std::to_string(line_no) + ": period '" + f[c_period] +
               "' is not an integer");
    r.period = *period;
    r.outcome = parse_double(f[c_outcome]);
    if (c_region) {
      const std::string& reg = f[*c_region];
      if (!reg.empty()) r.region = reg;
    }
    if (c_adopt || c_law) {
      const std::string& tok = f[c_adopt ? *c_adopt : *c_law];
      r.timing_present = true;
      if (is_never_token(tok)) {
        r.timing = std::nullopt;
      } else {
        auto y = parse_int(tok);
        if (!y)
          fail(Errc::invalid_adoption, "row " + std::to_string(line_no) +
                                           ": adoption value '" + tok +
                                           "' is neither an integer nor NEVER");
        r.timing = *y;
      }
    }
    for (std::size_t c : c_covs) r.covs.push_back(parse_double(f[c]));

    if (!obs_seen.insert({r.unit, r.period}).second)
      fail(Errc::duplicate_observation,
           "duplicate observation for unit '" + r.unit + "' at period " +
               std::to_string(r.period));
    if (unit_seen.insert(r.unit).second) unit_order.push_back(r.unit);
    period_set.insert(r.period);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) fail(Errc::empty_dataset, "file '" + path + "' has no rows");

  const std::vector<int> periods(period_set.begin(), period_set.end());

  // Per-unit cluster and timing values must agree across rows.
  std::map<std::string, std::string> unit_cluster;
  std::map<std::string, std::optional<int>> unit_timing;
  std::map<std::string, bool> unit_timing_present;
  for (const Row& r : rows) {
    auto [it, inserted] = unit_cluster.try_emplace(r.unit, r.cluster);
    if (!inserted && it->second != r.cluster)
      fail(Errc::inconsistent_unit_field,
           "unit '" + r.unit + "' has conflicting cluster ids '" + it->second +
               "' and '" + r.cluster + "'");
    if (r.timing_present) {
      auto [jt, ins2] = unit_timing.try_emplace(r.unit, r.timing);
      if (!ins2 && jt->second != r.timing)
        fail(Errc::inconsistent_unit_field,
             "unit '" + r.unit + "' has conflicting adoption values");
      unit_timing_present[r.unit] = true;
    }
  }

  PanelBuilder b(periods);
  if (c_region) b.enable_region();
  for (const auto& name : schema.covariates) b.add_covariate(name);

  for (const auto& uid : unit_order) {
    Adoption a;
    if (unit_timing_present.count(uid) && unit_timing[uid].has_value()) {
      const int y = *unit_timing[uid];
      if (c_law) {
        a.wave = map_law_year_to_wave(y, periods);
        if (!a.wave) a.post_sample = true;
      } else {
        a.wave = y;  // validated (and possibly reflagged) by add_unit
      }
    }
    b.add_unit(uid, unit_cluster[uid], a);
  }

  std::map<std::string, std::size_t> unit_idx;
  for (std::size_t i = 0; i < unit_order.size(); ++i)
    unit_idx[unit_order[i]] = i;

  for (const Row& r : rows) {
    const std::size_t u = unit_idx[r.unit];
    if (r.outcome) b.set_outcome(u, r.period, *r.outcome);
    if (r.region) b.set_region(u, r.period, *r.region);
    for (std::size_t c = 0; c < r.covs.size(); ++c)
      if (r.covs[c])
        b.set_covariate(u, r.period, schema.covariates[c], *r.covs[c]);
  }
  return b.build();
}

// ---------------------------------------------------------------------------
// map_law_year_to_wave

std::optional<int> map_law_year_to_wave(int law_year,
                                        const std::vector<int>& wave_years) {
  if (wave_years.size() < 2)
    fail(Errc::non_biennial_waves, "need at least two waves");
  for (std::size_t i = 1; i < wave_years.size(); ++i)
    if (wave_years[i] - wave_years[i - 1] != 2)
      fail(Errc::non_biennial_waves,
           "waves are not biennial: " + std::to_string(wave_years[i - 1]) +
               " -> " + std::to_string(wave_years[i]));
  if (law_year < wave_years.front() - 1) return wave_years.front();
  for (int w : wave_years)
    if (law_year == w || law_year == w - 1) return w;
  return std::nullopt;  // law passed after the last wave
}

// ---------------------------------------------------------------------------
// build_cohorts

// Relative time counts grid steps (waves), not raw label differences, so a
// biennial panel reports ell = -1 for the wave before adoption. On a grid
// with unit spacing the two coincide.
CohortMap build_cohorts(const PanelDataset& dataset) {
  CohortMap cm;
  cm.n_units = dataset.n_units();
  cm.n_periods = dataset.n_periods();
  cm.relative_time.assign(cm.n_units * cm.n_periods, std::nullopt);
  for (std::size_t u = 0; u < cm.n_units; ++u) {
    const Adoption& a = dataset.adoption()[u];
    if (a.never()) {
      cm.never_treated.push_back(u);
      continue;
    }
    cm.cohorts[*a.wave].push_back(u);
    const auto adoption_pos = dataset.period_position(*a.wave);
    for (std::size_t p = 0; p < cm.n_periods; ++p) {
      const int ell = static_cast<int>(p) - static_cast<int>(*adoption_pos);
      cm.relative_time[u * cm.n_periods + p] = ell;
      if (dataset.outcome(u, p).has_value())
        ++cm.cell_counts[{*a.wave, ell}];
    }
  }
  return cm;
}

// ---------------------------------------------------------------------------
// filter_balanced

PanelDataset filter_balanced(const PanelDataset& dataset, int min_consecutive) {
  if (min_consecutive < 2)
    fail(Errc::invalid_config, "min_consecutive must be at least 2");
  std::vector<std::size_t> keep;
  const std::size_t P = dataset.n_periods();
  for (std::size_t u = 0; u < dataset.n_units(); ++u) {
    int run = 0, best = 0;
    for (std::size_t p = 0; p < P; ++p) {
      run = dataset.outcome(u, p).has_value() ? run + 1 : 0;
      best = std::max(best, run);
    }
    if (best >= min_consecutive) keep.push_back(u);
  }
  if (keep.empty())
    fail(Errc::empty_after_filter,
         "no unit has " + std::to_string(min_consecutive) +
             " consecutive observed outcomes");
  return dataset.select_units(keep);
}

// ---------------------------------------------------------------------------
// drop_movers

PanelDataset drop_movers(const PanelDataset& dataset) {
  if (!dataset.has_region())
    fail(Errc::missing_region_column, "dataset has no region column");
  std::vector<std::size_t> keep;
  const std::size_t P = dataset.n_periods();
  for (std::size_t u = 0; u < dataset.n_units(); ++u) {
    std::set<std::string> regions;
    for (std::size_t p = 0; p < P; ++p)
      if (dataset.region(u, p).has_value()) regions.insert(*dataset.region(u, p));
    if (regions.size() <= 1) keep.push_back(u);
  }
  return dataset.select_units(keep);
}

}  // namespace paneltk
