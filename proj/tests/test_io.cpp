#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cctype>
#include <cstdlib>
#include <random>
#include <sstream>

#include "paneltk/io.hpp"
#include "test_util.hpp"

using namespace paneltk;
using testutil::TempDir;
using testutil::write_file;

TEST_CASE("doubles survive the CSV formatting round trip") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss;
  for (int i = 0; i < 200; ++i) {
    const double x = gauss(rng) * std::pow(10.0, static_cast<int>(rng() % 8) - 4);
    const std::string s = format_double(x);
    CHECK(std::strtod(s.c_str(), nullptr) == x);
  }
}

namespace {

// six window rows shaped like a published event-study column
EstimateTable sample_table() {
  EstimateTable t;
  t.labels = {"-3", "-2", "0", "1", "2", "3"};
  t.estimates.resize(6);
  t.estimates << -0.022, -0.0588, 0.0422, 0.029, 0.005, -0.010;
  Eigen::VectorXd se(6);
  se << 0.029, 0.026, 0.021, 0.024, 0.024, 0.024;
  t.std_errors = se;
  t.vcov = se.array().square().matrix().asDiagonal();
  t.n_obs = 1000;
  t.n_units = 100;
  t.n_clusters = 100;
  return t;
}

}  // namespace

TEST_CASE("estimate tables serialize to CSV and JSON") {
  const EstimateTable t = sample_table();
  const std::string csv = to_csv(t);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "label,estimate,se,n");
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 6);

  const Json j = to_json(t);
  CHECK(j["labels"].size() == 6);
  CHECK(j["vcov"].size() == 6);
  CHECK(j["vcov"][0].size() == 6);
  CHECK(j["n_clusters"] == 100);
  CHECK(j["estimates"][2].get<double>() == doctest::Approx(0.0422));
}

TEST_CASE("catt matrices serialize with cell metadata") {
  CattMatrix catt;
  catt.cells = {{1999, 0}, {2001, 1}};
  catt.delta.resize(2);
  catt.delta << 0.06, -0.011;
  catt.vcov = Eigen::MatrixXd::Identity(2, 2) * 0.0016;
  catt.cell_counts = {40, 25};
  catt.n_obs = 500;
  const Json j = to_json(catt);
  CHECK(j["cells"][0]["cohort"] == 1999);
  CHECK(j["cells"][1]["ell"] == 1);
  CHECK(j["cells"][1]["n"] == 25);
  const std::string csv = to_csv(catt);
  CHECK(csv.find("e1999:l0") != std::string::npos);
  CHECK(csv.find(",40") != std::string::npos);
}

TEST_CASE("generated panels round-trip through the CSV loader") {
  DgpConfig cfg = testutil::basic_config(9);
  cfg.covariates.push_back({"z1", 0.4, 1.0});
  GeneratedPanel gen = generate_panel(cfg);
  TempDir dir("paneltk_io_a");
  write_file(dir.file("panel.csv"), panel_to_csv(gen.panel));

  CsvSchema schema;
  schema.adoption = "adoption";
  schema.covariates = {"z1"};
  PanelDataset loaded = load_panel(dir.file("panel.csv"), schema);
  REQUIRE(loaded.n_units() == gen.panel.n_units());
  REQUIRE(loaded.periods() == gen.panel.periods());
  for (std::size_t u = 0; u < loaded.n_units(); ++u) {
    CHECK(loaded.unit_ids()[u] == gen.panel.unit_ids()[u]);
    CHECK(loaded.adoption()[u].never() == gen.panel.adoption()[u].never());
    if (!loaded.adoption()[u].never())
      CHECK(*loaded.adoption()[u].wave == *gen.panel.adoption()[u].wave);
    for (std::size_t p = 0; p < loaded.n_periods(); ++p) {
      CHECK(*loaded.outcome(u, p) == *gen.panel.outcome(u, p));
      CHECK(*loaded.covariate(0, u, p) == *gen.panel.covariate(0, u, p));
    }
  }
}

TEST_CASE("DGP config files parse into validated configs") {
  TempDir dir("paneltk_io_b");
  write_file(dir.file("dgp.conf"),
             "# toy configuration\n"
             "n_units = 80\n"
             "n_periods = 8\n"
             "first_period = 1\n"
             "cohort_periods = 3, 5\n"
             "never_treated_share = 0.4\n"
             "cohort_shares = 0.6, 0.4\n"
             "effect_path.3 = 0.1, 0.2, 0.3, 0.4, 0.5, 0.6\n"
             "effect_path.5 = 0.05, 0.05, 0.05, 0.05\n"
             "lead_path.3 = -2:0.01\n"
             "unit_effect_sd = 0.3\n"
             "time_effect_sd = 0.2\n"
             "noise_sd = 0.05\n"
             "covariate.z1 = 0.5, 1.5\n"
             "seed = 12345\n");
  const DgpConfig cfg = load_dgp_config(dir.file("dgp.conf"));
  CHECK(cfg.n_units == 80);
  CHECK(cfg.cohort_adoption_periods == std::vector<int>{3, 5});
  CHECK(cfg.effect_paths.at(3).size() == 6);
  CHECK(cfg.lead_paths.at(3).at(-2) == doctest::Approx(0.01));
  CHECK(cfg.covariates.size() == 1);
  CHECK(cfg.covariates[0].sd == doctest::Approx(1.5));
  CHECK(cfg.seed == 12345);

  write_file(dir.file("bad.conf"), "n_units = eighty\n");
  CHECK_THROWS_AS(load_dgp_config(dir.file("bad.conf")), Error);
  write_file(dir.file("unknown.conf"), "n_units = 8\nwhat = 3\n");
  CHECK_THROWS_AS(load_dgp_config(dir.file("unknown.conf")), Error);
}

TEST_CASE("text tables carry stars and the normalized reference row") {
  const EstimateTable t = sample_table();
  EventStudySpec spec;  // window [-3, 3], ref -1
  std::ostringstream os;
  write_text_table(os, t, &spec);
  const std::string text = os.str();
  CHECK(text.find("-0.0588**") != std::string::npos);   // p close to 0.024
  CHECK(text.find("0.0422**") != std::string::npos);    // p close to 0.044
  CHECK(text.find("(reference)") != std::string::npos);
  CHECK(text.find("*** p<0.01, ** p<0.05, * p<0.1") != std::string::npos);
  // seven period rows: the six estimated bins plus the normalized -1 row,
  // in ascending relative-period order
  int period_rows = 0;
  std::istringstream lines(text);
  std::string line;
  std::vector<std::string> first_tokens;
  while (std::getline(lines, line)) {
    const std::string head = line.substr(0, line.find(' '));
    if (!head.empty() && (head[0] == '-' || std::isdigit(head[0]))) {
      ++period_rows;
      first_tokens.push_back(head);
    }
  }
  CHECK(period_rows == 7);
  CHECK(first_tokens == std::vector<std::string>{"-3", "-2", "-1", "0", "1",
                                                 "2", "3"});
}

TEST_CASE("significance stars follow the usual cutoffs") {
  CHECK(significance_stars(2.8, 1.0) == "***");
  CHECK(significance_stars(2.2, 1.0) == "**");
  CHECK(significance_stars(1.7, 1.0) == "*");
  CHECK(significance_stars(1.0, 1.0) == "");
  CHECK(significance_stars(-2.8, 1.0) == "***");
}

TEST_CASE("Monte Carlo summaries serialize") {
  McSummary mc;
  mc.replications = 10;
  mc.failures[McEstimator::fe] = 0;
  mc.failures[McEstimator::iw] = 1;
  McBinSummary row;
  row.estimator = McEstimator::iw;
  row.bin = "0";
  row.truth = 0.04;
  row.mean_estimate = 0.041;
  row.bias = 0.001;
  row.sd = 0.01;
  row.mean_se = 0.011;
  row.coverage95 = 0.9;
  mc.per_bin.push_back(row);
  const Json j = to_json(mc);
  CHECK(j["replications"] == 10);
  CHECK(j["failures"]["iw"] == 1);
  CHECK(j["bins"][0]["bin"] == "0");
  const std::string csv = to_csv(mc);
  CHECK(csv.rfind("estimator,bin,truth,", 0) == 0);
  CHECK(csv.find("iw,0,") != std::string::npos);
}
