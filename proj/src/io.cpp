#include "paneltk/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace paneltk {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// CSV

std::string to_csv(const EstimateTable& table) {
  std::string out = "label,estimate,se,n\n";
  for (std::size_t i = 0; i < table.labels.size(); ++i) {
    out += table.labels[i] + ',' +
           format_double(table.estimates[static_cast<Eigen::Index>(i)]) + ',' +
           format_double(table.std_errors[static_cast<Eigen::Index>(i)]) + ',' +
           std::to_string(table.n_obs) + '\n';
  }
  return out;
}

std::string to_csv(const CattMatrix& catt) {
  std::string out = "label,estimate,se,n\n";
  for (std::size_t i = 0; i < catt.cells.size(); ++i) {
    const Eigen::Index k = static_cast<Eigen::Index>(i);
    out += catt.cells[i].label() + ',' + format_double(catt.delta[k]) + ',' +
           format_double(std::sqrt(std::max(0.0, catt.vcov(k, k)))) + ',' +
           std::to_string(catt.cell_counts[i]) + '\n';
  }
  return out;
}

std::string to_csv(const McSummary& summary) {
  std::string out =
      "estimator,bin,truth,mean_estimate,bias,sd,mean_se,coverage95\n";
  for (const McBinSummary& row : summary.per_bin) {
    out += std::string(estimator_name(row.estimator)) + ',' + row.bin + ',' +
           format_double(row.truth) + ',' + format_double(row.mean_estimate) +
           ',' + format_double(row.bias) + ',' + format_double(row.sd) + ',' +
           format_double(row.mean_se) + ',' + format_double(row.coverage95) +
           '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

Json to_json(const EstimateTable& table) {
  Json j;
  j["labels"] = table.labels;
  Json est = Json::array(), se = Json::array();
  for (Eigen::Index i = 0; i < table.estimates.size(); ++i) {
    est.push_back(table.estimates[i]);
    se.push_back(table.std_errors[i]);
  }
  j["estimates"] = std::move(est);
  j["std_errors"] = std::move(se);
  j["vcov"] = matrix_to_json(table.vcov);
  j["n_obs"] = table.n_obs;
  j["n_units"] = table.n_units;
  j["n_clusters"] = table.n_clusters;
  j["dof_residual"] = table.dof_residual;
  j["warnings"] = table.warnings;
  return j;
}

Json to_json(const CattMatrix& catt) {
  Json j;
  Json cells = Json::array();
  for (std::size_t i = 0; i < catt.cells.size(); ++i) {
    const Eigen::Index k = static_cast<Eigen::Index>(i);
    Json cell;
    cell["cohort"] = catt.cells[i].cohort;
    cell["ell"] = catt.cells[i].ell;
    cell["estimate"] = catt.delta[k];
    cell["se"] = std::sqrt(std::max(0.0, catt.vcov(k, k)));
    cell["n"] = catt.cell_counts[i];
    cells.push_back(std::move(cell));
  }
  j["cells"] = std::move(cells);
  j["vcov"] = matrix_to_json(catt.vcov);
  j["n_obs"] = catt.n_obs;
  j["n_units"] = catt.n_units;
  j["n_clusters"] = catt.n_clusters;
  j["warnings"] = catt.warnings;
  return j;
}

Json to_json(const McSummary& summary) {
  Json j;
  j["replications"] = summary.replications;
  Json failures;
  for (const auto& [which, count] : summary.failures)
    failures[estimator_name(which)] = count;
  j["failures"] = std::move(failures);
  Json bins = Json::array();
  for (const McBinSummary& row : summary.per_bin) {
    Json r;
    r["estimator"] = estimator_name(row.estimator);
    r["bin"] = row.bin;
    r["truth"] = row.truth;
    r["mean_estimate"] = row.mean_estimate;
    r["bias"] = row.bias;
    r["sd"] = row.sd;
    r["mean_se"] = row.mean_se;
    r["coverage95"] = row.coverage95;
    bins.push_back(std::move(r));
  }
  j["bins"] = std::move(bins);
  return j;
}

Json to_json(const WaldResult& wald, const std::vector<std::string>& labels) {
  Json j;
  j["statistic"] = wald.statistic;
  j["dof"] = wald.dof;
  j["p_value"] = wald.p_value;
  j["leads"] = labels;
  return j;
}

// ---------------------------------------------------------------------------
// panel CSV

std::string panel_to_csv(const PanelDataset& panel) {
  std::string out = "unit,period,outcome,cluster,adoption";
  for (const auto& name : panel.covariate_names()) out += ',' + name;
  out += '\n';
  for (std::size_t u = 0; u < panel.n_units(); ++u) {
    const Adoption& a = panel.adoption()[u];
    const std::string adoption =
        a.never() ? std::string("NEVER") : std::to_string(*a.wave);
    for (std::size_t p = 0; p < panel.n_periods(); ++p) {
      const auto& y = panel.outcome(u, p);
      out += panel.unit_ids()[u] + ',' + std::to_string(panel.periods()[p]) +
             ',' + (y ? format_double(*y) : std::string()) + ',' +
             panel.cluster_ids()[u] + ',' + adoption;
      for (std::size_t c = 0; c < panel.covariate_names().size(); ++c) {
        const auto& z = panel.covariate(c, u, p);
        out += ',' + (z ? format_double(*z) : std::string());
      }
      out += '\n';
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// DgpConfig file

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep)) out.push_back(trim(tok));
  return out;
}

double to_double(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(Errc::invalid_config, "bad numeric value '" + s + "' for " + key);
  }
}

int to_int(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(Errc::invalid_config, "bad integer value '" + s + "' for " + key);
  }
}

}  // namespace

DgpConfig load_dgp_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::invalid_config, "cannot open config '" + path + "'");
  DgpConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(Errc::invalid_config, "line " + std::to_string(line_no) +
                                     ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "n_units") cfg.n_units = to_int(value, key);
    else if (key == "n_periods") cfg.n_periods = to_int(value, key);
    else if (key == "first_period") cfg.first_period = to_int(value, key);
    else if (key == "never_treated_share")
      cfg.never_treated_share = to_double(value, key);
    else if (key == "unit_effect_sd") cfg.unit_effect_sd = to_double(value, key);
    else if (key == "time_effect_sd") cfg.time_effect_sd = to_double(value, key);
    else if (key == "noise_sd") cfg.noise_sd = to_double(value, key);
    else if (key == "seed") {
      try {
        std::size_t pos = 0;
        cfg.seed = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
      } catch (const std::exception&) {
        fail(Errc::invalid_config, "bad seed value '" + value + "'");
      }
    }
    else if (key == "cohort_periods") {
      for (const auto& tok : split(value, ','))
        cfg.cohort_adoption_periods.push_back(to_int(tok, key));
    } else if (key == "cohort_shares") {
      for (const auto& tok : split(value, ','))
        cfg.cohort_shares.push_back(to_double(tok, key));
    } else if (key.rfind("effect_path.", 0) == 0) {
      const int cohort = to_int(key.substr(12), key);
      for (const auto& tok : split(value, ','))
        cfg.effect_paths[cohort].push_back(to_double(tok, key));
    } else if (key.rfind("lead_path.", 0) == 0) {
      const int cohort = to_int(key.substr(10), key);
      for (const auto& tok : split(value, ',')) {
        const auto colon = tok.find(':');
        if (colon == std::string::npos)
          fail(Errc::invalid_config, key + ": expected '<ell>:<tau>'");
        cfg.lead_paths[cohort][to_int(trim(tok.substr(0, colon)), key)] =
            to_double(trim(tok.substr(colon + 1)), key);
      }
    } else if (key.rfind("covariate.", 0) == 0) {
      CovariateSpec cov;
      cov.name = key.substr(10);
      const auto parts = split(value, ',');
      if (parts.empty() || parts.size() > 2)
        fail(Errc::invalid_config, key + ": expected '<coefficient>[,<sd>]'");
      cov.coefficient = to_double(parts[0], key);
      if (parts.size() == 2) cov.sd = to_double(parts[1], key);
      cfg.covariates.push_back(cov);
    } else {
      fail(Errc::invalid_config, "unknown config key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// text table

std::string significance_stars(double estimate, double std_error) {
  const double p = z_test_p_value(estimate, std_error);
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.1) return "*";
  return "";
}

void write_text_table(std::ostream& os, const EstimateTable& table,
                      const EventStudySpec* spec) {
  struct Row {
    std::string label, estimate, se;
    int sort_key = 0;
    bool reference = false;
  };
  std::vector<Row> rows;
  std::vector<bool> used(table.labels.size(), false);

  if (spec != nullptr) {
    for (const Bin& b : spec->bins) {
      const auto idx = table.index_of(b.label());
      if (!idx) continue;
      used[*idx] = true;
      const Eigen::Index k = static_cast<Eigen::Index>(*idx);
      Row r;
      r.label = b.label();
      r.sort_key = b.min();
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.4f%s", table.estimates[k],
                    significance_stars(table.estimates[k], table.std_errors[k])
                        .c_str());
      r.estimate = buf;
      std::snprintf(buf, sizeof(buf), "(%.4f)", table.std_errors[k]);
      r.se = buf;
      rows.push_back(std::move(r));
    }
    Row ref;
    ref.label = std::to_string(spec->reference_period);
    ref.sort_key = spec->reference_period;
    ref.estimate = "0";
    ref.se = "(reference)";
    ref.reference = true;
    rows.push_back(std::move(ref));
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.sort_key < b.sort_key; });
  }
  for (std::size_t i = 0; i < table.labels.size(); ++i) {
    if (used[i]) continue;
    const Eigen::Index k = static_cast<Eigen::Index>(i);
    Row r;
    r.label = table.labels[i];
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f%s", table.estimates[k],
                  significance_stars(table.estimates[k], table.std_errors[k])
                      .c_str());
    r.estimate = buf;
    std::snprintf(buf, sizeof(buf), "(%.4f)", table.std_errors[k]);
    r.se = buf;
    rows.push_back(std::move(r));
  }

  std::size_t w = 5;
  for (const Row& r : rows) w = std::max(w, r.label.size());
  os << std::left << std::setw(static_cast<int>(w) + 2) << "label"
     << std::setw(14) << "estimate" << "se\n";
  for (const Row& r : rows)
    os << std::left << std::setw(static_cast<int>(w) + 2) << r.label
       << std::setw(14) << r.estimate << r.se << "\n";
  os << "N = " << table.n_obs << ", units = " << table.n_units
     << ", clusters = " << table.n_clusters << "\n";
  os << "*** p<0.01, ** p<0.05, * p<0.1\n";
  for (const auto& warning : table.warnings) os << "warning: " << warning << "\n";
}

}  // namespace paneltk
