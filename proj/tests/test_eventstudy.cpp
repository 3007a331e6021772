#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "paneltk/eventstudy.hpp"
#include "paneltk/simulate.hpp"
#include "test_util.hpp"

using namespace paneltk;

namespace {

// window spanning every observed relative period, so nothing pools
EventStudySpec full_window(const CohortMap& cohorts) {
  int lo = 0, hi = 0;
  for (const auto& [cell, _] : cohorts.cell_counts) {
    lo = std::min(lo, cell.second);
    hi = std::max(hi, cell.second);
  }
  EventStudySpec spec = EventStudySpec::window(lo, hi, -1);
  return spec;
}

// simple two-cohort panel with constant effects and no noise
DgpConfig zero_noise_config(std::uint64_t seed, double effect) {
  DgpConfig cfg;
  cfg.n_units = 60;
  cfg.n_periods = 8;
  cfg.cohort_adoption_periods = {4, 6};
  cfg.never_treated_share = 0.4;
  for (int e : cfg.cohort_adoption_periods)
    cfg.effect_paths[e] = std::vector<double>(
        static_cast<std::size_t>(cfg.last_period() - e + 1), effect);
  cfg.unit_effect_sd = 0.5;
  cfg.time_effect_sd = 0.3;
  cfg.noise_sd = 0.0;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("indicator rows: reference, never-treated, and endpoint handling") {
  DgpConfig cfg = zero_noise_config(3, 0.5);
  GeneratedPanel gen = generate_panel(cfg);
  CohortMap cm = build_cohorts(gen.panel);
  EventStudySpec spec;  // default window [-3, 3], ref -1, pooled endpoints

  DesignMatrix dm =
      build_relative_indicators(gen.panel, cm, spec, IndicatorMode::fe_bins);
  REQUIRE(dm.names.size() == 6);
  CHECK(dm.names == std::vector<std::string>{"-3", "-2", "0", "1", "2", "3"});

  const Eigen::Index pooled_col = dm.column_index("3");
  bool checked_ref = false, checked_never = false, checked_pool = false;
  for (std::size_t i = 0; i < dm.rows.size(); ++i) {
    const auto& rel = cm.rel(dm.rows[i].unit, dm.rows[i].period);
    const Eigen::Index row = static_cast<Eigen::Index>(i);
    if (!rel) {
      CHECK(dm.values.row(row).cwiseAbs().maxCoeff() == 0.0);
      checked_never = true;
    } else if (*rel == -1) {
      CHECK(dm.values.row(row).cwiseAbs().maxCoeff() == 0.0);
      checked_ref = true;
    } else if (*rel > 3) {
      CHECK(dm.values(row, pooled_col) == 1.0);
      CHECK(dm.values.row(row).sum() == 1.0);
      checked_pool = true;
    }
  }
  CHECK(checked_ref);
  CHECK(checked_never);
  CHECK(checked_pool);

  EventStudySpec drop = spec;
  drop.endpoint_rule = EndpointRule::drop_indicator;
  DesignMatrix dm2 =
      build_relative_indicators(gen.panel, cm, drop, IndicatorMode::fe_bins);
  for (std::size_t i = 0; i < dm2.rows.size(); ++i) {
    const auto& rel = cm.rel(dm2.rows[i].unit, dm2.rows[i].period);
    if (rel && (*rel > 3 || *rel < -3))
      CHECK(dm2.values.row(static_cast<Eigen::Index>(i)).cwiseAbs().maxCoeff() ==
            0.0);
  }
}

TEST_CASE("a bin matching nothing raises EmptyBin") {
  DgpConfig cfg = zero_noise_config(5, 0.5);
  GeneratedPanel gen = generate_panel(cfg);
  CohortMap cm = build_cohorts(gen.panel);
  EventStudySpec spec = EventStudySpec::window(-3, 3, -1);
  spec.endpoint_rule = EndpointRule::drop_indicator;
  spec.bins.push_back(Bin{{40}});  // beyond any observable lag
  CHECK_THROWS_AS(
      build_relative_indicators(gen.panel, cm, spec, IndicatorMode::fe_bins),
      Error);
}

TEST_CASE("zero-noise constant effect is recovered exactly by the FE path") {
  DgpConfig cfg = zero_noise_config(7, 0.5);
  GeneratedPanel gen = generate_panel(cfg);
  CohortMap cm = build_cohorts(gen.panel);
  EstimateTable t = estimate_fe(gen.panel, cm, EventStudySpec{});
  for (std::size_t i = 0; i < t.labels.size(); ++i) {
    const int ell = std::stoi(t.labels[i]);
    const double expected = ell >= 0 ? 0.5 : 0.0;
    CHECK(t.estimates[static_cast<Eigen::Index>(i)] ==
          doctest::Approx(expected).epsilon(1e-8));
  }
}

TEST_CASE("homogeneous noisy DGP: estimates sit within two SEs of the truth") {
  DgpConfig cfg;
  cfg.n_units = 500;
  cfg.n_periods = 10;
  cfg.cohort_adoption_periods = {4, 5, 6, 7};
  cfg.never_treated_share = 0.5;
  for (int e : cfg.cohort_adoption_periods)
    cfg.effect_paths[e] = std::vector<double>(
        static_cast<std::size_t>(cfg.last_period() - e + 1), 0.04);
  cfg.unit_effect_sd = 0.2;
  cfg.time_effect_sd = 0.1;
  cfg.noise_sd = 0.05;
  cfg.seed = 100;
  GeneratedPanel gen = generate_panel(cfg);
  CohortMap cm = build_cohorts(gen.panel);
  EstimateTable t = estimate_fe(gen.panel, cm, EventStudySpec{});
  for (std::size_t i = 0; i < t.labels.size(); ++i) {
    const int ell = std::stoi(t.labels[i]);
    const double truth = ell >= 0 ? 0.04 : 0.0;
    const Eigen::Index k = static_cast<Eigen::Index>(i);
    CHECK(std::abs(t.estimates[k] - truth) <= 2.0 * t.std_errors[k]);
  }
}

TEST_CASE("single treated cohort: CATT equals the FE path") {
  DgpConfig cfg;
  cfg.n_units = 80;
  cfg.n_periods = 8;
  cfg.cohort_adoption_periods = {5};
  cfg.never_treated_share = 0.5;
  cfg.effect_paths[5] = {0.3, 0.35, 0.4, 0.45};
  cfg.unit_effect_sd = 0.4;
  cfg.time_effect_sd = 0.2;
  cfg.noise_sd = 0.1;
  cfg.seed = 21;
  GeneratedPanel gen = generate_panel(cfg);
  CohortMap cm = build_cohorts(gen.panel);
  EventStudySpec spec = full_window(cm);

  EstimateTable fe = estimate_fe(gen.panel, cm, spec);
  CattMatrix catt = estimate_catt(gen.panel, cm, spec);
  REQUIRE(std::set<int>{5} == [&] {
    std::set<int> cohorts;
    for (const auto& c : catt.cells) cohorts.insert(c.cohort);
    return cohorts;
  }());
  for (const CattCell& cell : catt.cells) {
    const auto fe_idx = fe.index_of(std::to_string(cell.ell));
    REQUIRE(fe_idx.has_value());
    CHECK(*catt.value(cell.cohort, cell.ell) ==
          doctest::Approx(fe.estimates[static_cast<Eigen::Index>(*fe_idx)])
              .epsilon(1e-10));
  }

  // and the aggregate coincides with the FE estimates bin by bin
  IwResult iw = estimate_iw(gen.panel, cm, spec);
  for (std::size_t i = 0; i < iw.table.labels.size(); ++i) {
    const auto fe_idx = fe.index_of(iw.table.labels[i]);
    REQUIRE(fe_idx.has_value());
    CHECK(std::abs(iw.table.estimates[static_cast<Eigen::Index>(i)] -
                   fe.estimates[static_cast<Eigen::Index>(*fe_idx)]) < 1e-8);
  }
}

TEST_CASE("zero-noise cohort effects are recovered cell by cell") {
  DgpConfig cfg;
  cfg.n_units = 90;
  cfg.n_periods = 9;
  cfg.cohort_adoption_periods = {3, 5, 7};
  cfg.never_treated_share = 0.35;
  cfg.effect_paths[3] = {0.10, 0.20, 0.30, 0.40, 0.50, 0.60, 0.70};
  cfg.effect_paths[5] = {0.05, 0.05, 0.05, 0.05, 0.05};
  cfg.effect_paths[7] = {-0.10, -0.15, -0.20};
  cfg.lead_paths[3][-2] = 0.02;
  cfg.unit_effect_sd = 0.6;
  cfg.time_effect_sd = 0.4;
  cfg.noise_sd = 0.0;
  cfg.seed = 33;
  GeneratedPanel gen = generate_panel(cfg);
  CohortMap cm = build_cohorts(gen.panel);
  CattMatrix catt = estimate_catt(gen.panel, cm, full_window(cm));
  REQUIRE_FALSE(catt.cells.empty());
  for (const CattCell& cell : catt.cells)
    CHECK(*catt.value(cell.cohort, cell.ell) ==
          doctest::Approx(cfg.true_effect(cell.cohort, cell.ell))
              .epsilon(1e-8));
}

TEST_CASE("early cohorts lack deep leads in the five-cohort layout") {
  DgpConfig cfg;
  cfg.n_units = 200;
  cfg.n_periods = 11;
  cfg.cohort_adoption_periods = {2, 4, 6, 8, 10};
  cfg.never_treated_share = 0.4;
  for (int e : cfg.cohort_adoption_periods)
    cfg.effect_paths[e] = std::vector<double>(
        static_cast<std::size_t>(cfg.last_period() - e + 1), 0.1);
  cfg.noise_sd = 0.05;
  cfg.seed = 55;
  GeneratedPanel gen = generate_panel(cfg);
  CohortMap cm = build_cohorts(gen.panel);
  CattMatrix catt = estimate_catt(gen.panel, cm, EventStudySpec{});
  std::set<int> cohorts;
  for (const auto& c : catt.cells) cohorts.insert(c.cohort);
  CHECK(cohorts.size() == 5);
  // the earliest cohort adopts at the second period: ell = -3 unobservable
  CHECK_FALSE(catt.value(2, -3).has_value());
  CHECK(catt.value(2, -2).has_value() == false);  // only ell = -1 precedes
  CHECK(catt.value(8, -3).has_value());
}

TEST_CASE("cohort shares at a single period") {
  PanelBuilder b({1, 2, 3, 4});
  Adoption a2;
  a2.wave = 2;
  Adoption a3;
  a3.wave = 3;
  // cohort 2 has two units, cohort 3 has three
  for (int i = 0; i < 2; ++i)
    b.add_unit("a" + std::to_string(i), "a" + std::to_string(i), a2);
  for (int i = 0; i < 3; ++i)
    b.add_unit("b" + std::to_string(i), "b" + std::to_string(i), a3);
  b.add_unit("n", "n", Adoption{});
  for (std::size_t u = 0; u < 6; ++u)
    for (int p = 1; p <= 4; ++p) b.set_outcome(u, p, 0.0);
  CohortMap cm = build_cohorts(b.build());

  EventStudySpec spec = EventStudySpec::window(-2, 1, -1);
  WeightVector w = estimate_weights(cm, spec, Bin{{0}});
  const auto weights = w.cohort_weights();
  REQUIRE(weights.size() == 2);
  CHECK(weights.at(2) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(weights.at(3) == doctest::Approx(0.6).epsilon(1e-12));

  // single cohort: weight 1
  PanelBuilder b2({1, 2, 3});
  Adoption a;
  a.wave = 2;
  b2.add_unit("x", "x", a);
  b2.add_unit("y", "y", a);
  b2.add_unit("n", "n", Adoption{});
  for (std::size_t u = 0; u < 3; ++u)
    for (int p = 1; p <= 3; ++p) b2.set_outcome(u, p, 0.0);
  CohortMap cm2 = build_cohorts(b2.build());
  WeightVector w2 =
      estimate_weights(cm2, EventStudySpec::window(-2, 1, -1), Bin{{0}});
  CHECK(w2.cohort_weights().at(2) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("weights match a brute-force tabulation on random panels") {
  std::mt19937_64 rng(111);
  for (int trial = 0; trial < 25; ++trial) {
    DgpConfig cfg;
    cfg.n_units = 40 + static_cast<int>(rng() % 60);
    cfg.n_periods = 8;
    cfg.cohort_adoption_periods = {3, 5, 6};
    cfg.never_treated_share = 0.3;
    for (int e : cfg.cohort_adoption_periods)
      cfg.effect_paths[e] = std::vector<double>(
          static_cast<std::size_t>(cfg.last_period() - e + 1), 0.1);
    cfg.noise_sd = 0.1;
    cfg.seed = rng();
    GeneratedPanel gen = generate_panel(cfg);
    CohortMap cm = build_cohorts(gen.panel);
    EventStudySpec spec;  // [-3, 3] pooled

    for (const Bin& bin : spec.bins) {
      WeightVector w = estimate_weights(cm, spec, bin);
      // oracle: count pooled observations per cohort directly
      std::map<std::pair<int, int>, std::size_t> counts;
      for (std::size_t u = 0; u < gen.panel.n_units(); ++u) {
        if (gen.panel.adoption()[u].never()) continue;
        const int cohort = *gen.panel.adoption()[u].wave;
        for (std::size_t p = 0; p < gen.panel.n_periods(); ++p) {
          const auto eff = spec.effective_ell(*cm.rel(u, p));
          if (eff && bin.contains(*eff)) ++counts[{cohort, *eff}];
        }
      }
      std::map<int, std::size_t> totals;
      for (const auto& [key, c] : counts)
        if (c >= 2) totals[key.second] += c;
      double sum = 0.0;
      for (std::size_t i = 0; i < w.cells.size(); ++i) {
        const auto key = std::make_pair(w.cells[i].cohort, w.cells[i].ell);
        REQUIRE(counts.count(key) == 1);
        const double expected = static_cast<double>(counts[key]) /
                                static_cast<double>(totals[w.cells[i].ell]);
        CHECK(w.shares[static_cast<Eigen::Index>(i)] ==
              doctest::Approx(expected).epsilon(1e-12));
        CHECK(w.shares[static_cast<Eigen::Index>(i)] >= 0.0);
        sum += w.shares[static_cast<Eigen::Index>(i)];
      }
      // shares sum to one within every populated relative period
      std::set<int> ells;
      for (const auto& c : w.cells) ells.insert(c.ell);
      CHECK(sum == doctest::Approx(static_cast<double>(ells.size()))
                       .epsilon(1e-12));
      double weight_sum = 0.0;
      for (const auto& [_, v] : w.cohort_weights()) weight_sum += v;
      CHECK(weight_sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("aggregation is a weighted mean of the cell estimates") {
  CattMatrix catt;
  catt.cells = {{2, 0}, {3, 0}};
  catt.delta.resize(2);
  catt.delta << 1.0, 2.0;
  catt.vcov = Eigen::MatrixXd::Zero(2, 2);
  catt.cell_counts = {4, 6};

  WeightVector w;
  w.bin = Bin{{0}};
  w.cells = {{2, 0}, {3, 0}};
  w.shares.resize(2);
  w.shares << 0.4, 0.6;

  EventStudySpec spec;
  spec.bins = {Bin{{0}}};
  EstimateTable t = iw_aggregate(catt, {w}, spec);
  REQUIRE(t.labels == std::vector<std::string>{"0"});
  CHECK(t.estimates[0] == doctest::Approx(1.6).epsilon(1e-14));

  // equal cell estimates collapse to the common value under any weights
  catt.delta << 0.7, 0.7;
  EstimateTable t2 = iw_aggregate(catt, {w}, spec);
  CHECK(t2.estimates[0] == doctest::Approx(0.7).epsilon(1e-14));
}

TEST_CASE("aggregation rejects mismatched cells") {
  CattMatrix catt;
  catt.cells = {{2, 0}};
  catt.delta.resize(1);
  catt.delta << 1.0;
  catt.vcov = Eigen::MatrixXd::Zero(1, 1);
  catt.cell_counts = {4};
  WeightVector w;
  w.bin = Bin{{0}};
  w.cells = {{2, 0}, {3, 0}};
  w.shares.resize(2);
  w.shares << 0.4, 0.6;
  EventStudySpec spec;
  spec.bins = {Bin{{0}}};
  CHECK_THROWS_AS(iw_aggregate(catt, {w}, spec), Error);
}

TEST_CASE("zero-noise heterogeneous panel: the aggregate hits the known target") {
  DgpConfig cfg;
  cfg.n_units = 120;
  cfg.n_periods = 10;
  cfg.cohort_adoption_periods = {4, 6, 8};
  cfg.never_treated_share = 0.4;
  cfg.effect_paths[4] = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  cfg.effect_paths[6] = {0.05, 0.10, 0.15, 0.20, 0.25};
  cfg.effect_paths[8] = {-0.1, -0.1, -0.1};
  cfg.unit_effect_sd = 0.3;
  cfg.time_effect_sd = 0.3;
  cfg.noise_sd = 0.0;
  cfg.seed = 77;
  GeneratedPanel gen = generate_panel(cfg);
  CohortMap cm = build_cohorts(gen.panel);
  EventStudySpec spec = full_window(cm);
  IwResult iw = estimate_iw(gen.panel, cm, spec);
  const auto target = true_iw_target(cfg, cm, spec);
  for (std::size_t i = 0; i < iw.table.labels.size(); ++i) {
    REQUIRE(target.count(iw.table.labels[i]) == 1);
    CHECK(iw.table.estimates[static_cast<Eigen::Index>(i)] ==
          doctest::Approx(target.at(iw.table.labels[i])).epsilon(1e-8));
  }
}

TEST_CASE("convexity: singleton-bin aggregates stay inside the cell range") {
  DgpConfig cfg = testutil::basic_config(131, 0.05, 0.2);
  GeneratedPanel gen = generate_panel(cfg);
  CohortMap cm = build_cohorts(gen.panel);
  EventStudySpec spec;
  IwResult iw = estimate_iw(gen.panel, cm, spec);
  for (std::size_t bi = 0; bi < spec.bins.size(); ++bi) {
    const Bin& bin = spec.bins[bi];
    double lo = 1e300, hi = -1e300;
    for (const CattCell& cell : iw.catt.cells)
      if (bin.contains(cell.ell)) {
        lo = std::min(lo, *iw.catt.value(cell.cohort, cell.ell));
        hi = std::max(hi, *iw.catt.value(cell.cohort, cell.ell));
      }
    const auto idx = iw.table.index_of(bin.label());
    REQUIRE(idx.has_value());
    const double nu = iw.table.estimates[static_cast<Eigen::Index>(*idx)];
    CHECK(nu >= lo - 1e-12);
    CHECK(nu <= hi + 1e-12);
  }
}

TEST_CASE("adding a constant to the outcome moves no estimate") {
  DgpConfig cfg = testutil::basic_config(151);
  GeneratedPanel gen = generate_panel(cfg);
  CohortMap cm = build_cohorts(gen.panel);
  EventStudySpec spec;
  EstimateTable fe = estimate_fe(gen.panel, cm, spec);
  EstimateTable iw = estimate_iw(gen.panel, cm, spec).table;

  // rebuild the same panel with the outcome shifted by a constant
  PanelBuilder b(gen.panel.periods());
  for (std::size_t u = 0; u < gen.panel.n_units(); ++u)
    b.add_unit(gen.panel.unit_ids()[u], gen.panel.cluster_ids()[u],
               gen.panel.adoption()[u]);
  for (std::size_t u = 0; u < gen.panel.n_units(); ++u)
    for (std::size_t p = 0; p < gen.panel.n_periods(); ++p)
      b.set_outcome(u, gen.panel.periods()[p], *gen.panel.outcome(u, p) + 25.0);
  PanelDataset shifted = b.build();
  CohortMap cm2 = build_cohorts(shifted);
  EstimateTable fe2 = estimate_fe(shifted, cm2, spec);
  EstimateTable iw2 = estimate_iw(shifted, cm2, spec).table;
  CHECK((fe.estimates - fe2.estimates).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((iw.estimates - iw2.estimates).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("shifting the calendar relabels cohorts without changing estimates") {
  DgpConfig cfg = testutil::basic_config(171);
  DgpConfig moved = cfg;
  moved.first_period = cfg.first_period + 100;
  moved.cohort_adoption_periods.clear();
  moved.effect_paths.clear();
  for (int e : cfg.cohort_adoption_periods) {
    moved.cohort_adoption_periods.push_back(e + 100);
    moved.effect_paths[e + 100] = cfg.effect_paths.at(e);
  }
  GeneratedPanel a = generate_panel(cfg);
  GeneratedPanel b = generate_panel(moved);
  EventStudySpec spec;
  EstimateTable ta = estimate_iw(a.panel, build_cohorts(a.panel), spec).table;
  EstimateTable tb = estimate_iw(b.panel, build_cohorts(b.panel), spec).table;
  REQUIRE(ta.labels == tb.labels);
  for (Eigen::Index i = 0; i < ta.estimates.size(); ++i)
    CHECK(ta.estimates[i] == tb.estimates[i]);  // bitwise
}

TEST_CASE("multi-period bins average their member periods") {
  DgpConfig cfg;
  cfg.n_units = 100;
  cfg.n_periods = 9;
  cfg.cohort_adoption_periods = {4, 6};
  cfg.never_treated_share = 0.4;
  cfg.effect_paths[4] = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  cfg.effect_paths[6] = {0.05, 0.10, 0.15, 0.20};
  cfg.unit_effect_sd = 0.4;
  cfg.time_effect_sd = 0.2;
  cfg.noise_sd = 0.0;
  cfg.seed = 191;
  GeneratedPanel gen = generate_panel(cfg);
  CohortMap cm = build_cohorts(gen.panel);

  EventStudySpec spec;
  spec.bins = {Bin{{-3}}, Bin{{-2}}, Bin{{0}}, Bin{{1}}, Bin{{2, 3}}};
  spec.validate();

  IwResult iw = estimate_iw(gen.panel, cm, spec);
  const auto target = true_iw_target(cfg, cm, spec);
  const auto idx = iw.table.index_of("2:3");
  REQUIRE(idx.has_value());
  CHECK(iw.table.estimates[static_cast<Eigen::Index>(*idx)] ==
        doctest::Approx(target.at("2:3")).epsilon(1e-8));

  // hand-assembled Eq.-3 structure: average the two per-period weighted sums
  const WeightVector& w = iw.weights[4];
  double per_ell[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < w.cells.size(); ++i) {
    const double d = *iw.catt.value(w.cells[i].cohort, w.cells[i].ell);
    per_ell[w.cells[i].ell - 2] += d * w.shares[static_cast<Eigen::Index>(i)];
  }
  CHECK(iw.table.estimates[static_cast<Eigen::Index>(*idx)] ==
        doctest::Approx(0.5 * (per_ell[0] + per_ell[1])).epsilon(1e-10));

  // the FE path pools the binned periods into one indicator
  EstimateTable fe = estimate_fe(gen.panel, cm, spec);
  CHECK(fe.index_of("2:3").has_value());
}

TEST_CASE("pretrend test on exact zeros and under a real lead effect") {
  SUBCASE("exact zero leads give p = 1") {
    EstimateTable t;
    t.labels = {"-3", "-2", "0"};
    t.estimates = Eigen::VectorXd::Zero(3);
    t.std_errors = Eigen::VectorXd::Ones(3);
    t.vcov = Eigen::MatrixXd::Identity(3, 3);
    EventStudySpec spec;
    const WaldResult w = pretrend_test(t, spec);
    CHECK(w.statistic == 0.0);
    CHECK(w.dof == 2);
    CHECK(w.p_value == doctest::Approx(1.0));
  }

  SUBCASE("a large true lead effect is rejected") {
    DgpConfig cfg;
    cfg.n_units = 800;
    cfg.n_periods = 10;
    cfg.cohort_adoption_periods = {5, 7};
    cfg.never_treated_share = 0.5;
    for (int e : cfg.cohort_adoption_periods) {
      cfg.effect_paths[e] = std::vector<double>(
          static_cast<std::size_t>(cfg.last_period() - e + 1), 0.04);
      cfg.lead_paths[e][-2] = -0.06;
    }
    cfg.unit_effect_sd = 0.1;
    cfg.time_effect_sd = 0.1;
    cfg.noise_sd = 0.05;
    cfg.seed = 313;
    GeneratedPanel gen = generate_panel(cfg);
    CohortMap cm = build_cohorts(gen.panel);
    EstimateTable t = estimate_fe(gen.panel, cm, EventStudySpec{});
    const WaldResult w = pretrend_test(t, EventStudySpec{});
    CHECK(w.p_value < 0.05);
  }
}

TEST_CASE("a cell with a single observation is dropped and renormalized") {
  // cohort 3 has one unit, cohort 2 has several; with exactly one unit the
  // cohort-3 cells have one observation per relative period
  PanelBuilder b({1, 2, 3, 4});
  Adoption a2;
  a2.wave = 2;
  Adoption a3;
  a3.wave = 3;
  for (int i = 0; i < 4; ++i)
    b.add_unit("a" + std::to_string(i), "a" + std::to_string(i), a2);
  b.add_unit("solo", "solo", a3);
  for (int i = 0; i < 4; ++i)
    b.add_unit("n" + std::to_string(i), "n" + std::to_string(i), Adoption{});
  std::mt19937_64 rng(400);
  std::normal_distribution<double> gauss;
  for (std::size_t u = 0; u < 9; ++u)
    for (int p = 1; p <= 4; ++p) b.set_outcome(u, p, gauss(rng));
  PanelDataset d = b.build();
  CohortMap cm = build_cohorts(d);
  EventStudySpec spec = EventStudySpec::window(-2, 2, -1);

  CattMatrix catt = estimate_catt(d, cm, spec);
  for (const CattCell& cell : catt.cells) CHECK(cell.cohort == 2);
  CHECK_FALSE(catt.warnings.empty());

  WeightVector w = estimate_weights(cm, spec, Bin{{0}});
  REQUIRE(w.cells.size() == 1);
  CHECK(w.cells[0].cohort == 2);
  CHECK(w.shares[0] == doctest::Approx(1.0).epsilon(1e-12));
}
