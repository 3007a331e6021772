#include "paneltk/cli.hpp"

#include <CLI11.hpp>

#include <boost/math/distributions/normal.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "paneltk/version.hpp"

namespace paneltk::cli {

namespace fs = std::filesystem;

Json RunManifest::to_json() const {
  Json j;
  j["command"] = command;
  j["tool_version"] = kVersion;
  j["inputs"] = inputs;
  j["parameters"] = parameters;
  if (seed) j["seed"] = *seed;
  j["outputs"] = outputs;
  j["wall_time_seconds"] = wall_time_seconds;
  return j;
}

namespace {

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

void write_file(const fs::path& path, const std::string& content,
                RunManifest* manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::invalid_config, "cannot write '" + path.string() + "'");
  out << content;
  if (manifest) manifest->outputs.push_back(path.string());
}

void write_manifest(const fs::path& dir, RunManifest manifest, double seconds) {
  manifest.wall_time_seconds = seconds;
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out)
    fail(Errc::invalid_config, "cannot write manifest in '" + dir.string() + "'");
  out << manifest.to_json().dump(2) << '\n';
}

// Columns are the documented names; adoption wins over law_year when both
// are present in the header.
CsvSchema detect_schema(const std::string& path, const std::string& cluster,
                        const std::vector<std::string>& controls) {
  std::ifstream in(path);
  if (!in) fail(Errc::empty_dataset, "cannot open file '" + path + "'");
  std::string header;
  if (!std::getline(in, header))
    fail(Errc::empty_dataset, "file '" + path + "' is empty");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  std::vector<std::string> cols;
  std::stringstream ss(header);
  std::string tok;
  while (std::getline(ss, tok, ',')) cols.push_back(tok);
  auto has = [&](const std::string& name) {
    return std::find(cols.begin(), cols.end(), name) != cols.end();
  };
  CsvSchema schema;
  schema.cluster = cluster;
  schema.covariates = controls;
  if (has("adoption")) schema.adoption = "adoption";
  else if (has("law_year")) schema.law_year = "law_year";
  if (has("region")) schema.region = "region";
  return schema;
}

std::pair<int, int> parse_window(const std::string& window) {
  const auto comma = window.find(',');
  if (comma != std::string::npos) {
    try {
      std::size_t p1 = 0, p2 = 0;
      const std::string a = window.substr(0, comma);
      const std::string b = window.substr(comma + 1);
      const int lo = std::stoi(a, &p1);
      const int hi = std::stoi(b, &p2);
      if (p1 == a.size() && p2 == b.size() && lo <= hi) return {lo, hi};
    } catch (const std::exception&) {
    }
  }
  throw CLI::ValidationError("--window", "expected '<lead>,<lag>' integers");
}

int default_threads() {
  if (const char* env = std::getenv("PANELTK_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return 1;
}

struct EstimateArgs {
  std::string input, method, out_dir;
  std::string window = "-3,3";
  int ref = -1;
  std::string endpoint = "pool";
  std::string cluster = "cluster";
  std::vector<std::string> controls;
  std::string group, status;
  int balanced = 0;
  bool drop_movers_flag = false;
};

struct SimulateArgs {
  std::string config, out_csv;
};

struct MonteCarloArgs {
  std::string config, out_dir;
  int reps = 200;
  std::vector<std::string> methods{"fe", "iw"};
  std::string window = "-3,3";
  int ref = -1;
  double ci = 0.90;
  int threads = default_threads();
};

EventStudySpec build_spec(const EstimateArgs& args) {
  const auto [lo, hi] = parse_window(args.window);
  EventStudySpec spec = EventStudySpec::window(lo, hi, args.ref);
  spec.endpoint_rule = args.endpoint == "drop" ? EndpointRule::drop_indicator
                                               : EndpointRule::pool;
  spec.controls = args.controls;
  spec.cluster_column = args.cluster;
  spec.validate();
  return spec;
}

int cmd_estimate(const EstimateArgs& args) {
  Timer timer;
  RunManifest manifest;
  manifest.command = "estimate";
  manifest.inputs = {args.input};
  manifest.parameters["method"] = args.method;
  manifest.parameters["window"] = args.window;
  manifest.parameters["ref"] = args.ref;
  manifest.parameters["endpoint"] = args.endpoint;
  manifest.parameters["cluster"] = args.cluster;
  manifest.parameters["controls"] = args.controls;
  manifest.parameters["balanced"] = args.balanced;
  manifest.parameters["drop_movers"] = args.drop_movers_flag;
  if (args.method == "did") {
    manifest.parameters["group"] = args.group;
    manifest.parameters["status"] = args.status;
  }

  const fs::path out_dir(args.out_dir);
  fs::create_directories(out_dir);

  std::vector<std::string> load_columns = args.controls;
  if (args.method == "did") {
    load_columns.push_back(args.group);
    load_columns.push_back(args.status);
  }
  PanelDataset panel =
      load_panel(args.input, detect_schema(args.input, args.cluster, load_columns));
  if (args.balanced > 0) panel = filter_balanced(panel, args.balanced);
  if (args.drop_movers_flag) panel = drop_movers(panel);

  EstimateTable table;
  std::optional<Json> pretrends;
  std::optional<CattMatrix> catt;

  if (args.method == "fe" || args.method == "iw") {
    const EventStudySpec spec = build_spec(args);
    const CohortMap cohorts = build_cohorts(panel);
    if (args.method == "fe") {
      table = estimate_fe(panel, cohorts, spec);
    } else {
      IwResult iw = estimate_iw(panel, cohorts, spec);
      table = iw.table;
      catt = std::move(iw.catt);
    }
    std::vector<std::string> leads;
    for (const Bin& b : spec.bins)
      if (b.is_lead() && table.index_of(b.label())) leads.push_back(b.label());
    if (leads.empty()) {
      Json j;
      j["note"] = "no lead bins in the estimation window";
      pretrends = std::move(j);
    } else {
      pretrends = to_json(pretrend_test(table, spec), leads);
    }
    write_text_table(std::cout, table, &spec);
  } else {
    DidSpec spec;
    spec.treatment_group = args.group;
    spec.treatment_status = args.status;
    spec.controls = args.controls;
    table = estimate_did(panel, spec);
    write_text_table(std::cout, table, nullptr);
  }

  write_file(out_dir / "estimates.csv", to_csv(table), &manifest);
  write_file(out_dir / "estimates.json", to_json(table).dump(2) + "\n", &manifest);
  if (pretrends)
    write_file(out_dir / "pretrends.json", pretrends->dump(2) + "\n", &manifest);
  if (catt) {
    write_file(out_dir / "catt.csv", to_csv(*catt), &manifest);
    write_file(out_dir / "catt.json", to_json(*catt).dump(2) + "\n", &manifest);
  }
  write_manifest(out_dir, manifest, timer.seconds());
  return 0;
}

int cmd_simulate(const SimulateArgs& args) {
  Timer timer;
  RunManifest manifest;
  manifest.command = "simulate";
  manifest.inputs = {args.config};
  manifest.parameters["out"] = args.out_csv;

  const DgpConfig config = load_dgp_config(args.config);
  manifest.seed = config.seed;
  const fs::path out_csv(args.out_csv);
  const fs::path out_dir =
      out_csv.has_parent_path() ? out_csv.parent_path() : fs::path(".");
  fs::create_directories(out_dir);

  GeneratedPanel gen = generate_panel(config);
  write_file(out_csv, panel_to_csv(gen.panel), &manifest);

  Json truth;
  Json cohorts;
  for (const auto& [cohort, path] : config.effect_paths) {
    Json c;
    c["path"] = path;
    Json leads;
    const auto lead = config.lead_paths.find(cohort);
    if (lead != config.lead_paths.end())
      for (const auto& [ell, tau] : lead->second)
        leads[std::to_string(ell)] = tau;
    c["leads"] = std::move(leads);
    cohorts[std::to_string(cohort)] = std::move(c);
  }
  truth["cohorts"] = std::move(cohorts);
  Json unit_counts;
  std::size_t never = 0;
  std::map<int, std::size_t> by_cohort;
  for (const Adoption& a : gen.panel.adoption())
    a.never() ? ++never : ++by_cohort[*a.wave];
  for (const auto& [cohort, count] : by_cohort)
    unit_counts[std::to_string(cohort)] = count;
  unit_counts["never"] = never;
  truth["realized_units"] = std::move(unit_counts);
  Json cells = Json::array();
  for (std::size_t i = 0; i < gen.truth.cells.size(); ++i) {
    Json cell;
    cell["cohort"] = gen.truth.cells[i].cohort;
    cell["ell"] = gen.truth.cells[i].ell;
    cell["n"] = gen.truth.cell_counts[i];
    cell["tau"] = gen.truth.delta[static_cast<Eigen::Index>(i)];
    cells.push_back(std::move(cell));
  }
  truth["realized_cells"] = std::move(cells);
  write_file(out_dir / "truth.json", truth.dump(2) + "\n", &manifest);
  write_manifest(out_dir, manifest, timer.seconds());
  return 0;
}

int cmd_montecarlo(const MonteCarloArgs& args) {
  Timer timer;
  RunManifest manifest;
  manifest.command = "montecarlo";
  manifest.inputs = {args.config};
  manifest.parameters["reps"] = args.reps;
  manifest.parameters["methods"] = args.methods;
  manifest.parameters["window"] = args.window;
  manifest.parameters["ref"] = args.ref;
  manifest.parameters["ci"] = args.ci;

  const DgpConfig config = load_dgp_config(args.config);
  manifest.seed = config.seed;
  const fs::path out_dir(args.out_dir);
  fs::create_directories(out_dir);

  EstimateArgs spec_args;
  spec_args.window = args.window;
  spec_args.ref = args.ref;
  EventStudySpec spec = build_spec(spec_args);

  std::vector<McEstimator> estimators;
  for (const std::string& m : args.methods)
    estimators.push_back(m == "fe" ? McEstimator::fe : McEstimator::iw);

  const McSummary summary =
      run_monte_carlo(config, spec, args.reps, estimators, args.threads);

  write_file(out_dir / "mc_summary.csv", to_csv(summary), &manifest);
  write_file(out_dir / "mc_summary.json", to_json(summary).dump(2) + "\n",
             &manifest);

  boost::math::normal gauss;
  const double z = boost::math::quantile(gauss, 0.5 + args.ci / 2.0);
  std::string plot = "bin,method,estimate,ci_lo,ci_hi\n";
  for (const McBinSummary& row : summary.per_bin) {
    plot += row.bin + ',' + estimator_name(row.estimator) + ',' +
            format_double(row.mean_estimate) + ',' +
            format_double(row.mean_estimate - z * row.mean_se) + ',' +
            format_double(row.mean_estimate + z * row.mean_se) + '\n';
  }
  write_file(out_dir / "plot_data.csv", plot, &manifest);
  write_manifest(out_dir, manifest, timer.seconds());

  for (const McBinSummary& row : summary.per_bin)
    std::cout << estimator_name(row.estimator) << "  bin " << row.bin
              << "  mean " << row.mean_estimate << "  bias " << row.bias
              << "  sd " << row.sd << "  coverage " << row.coverage95 << "\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"staggered-adoption event studies on panel data"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  EstimateArgs est_args;
  auto* est = app.add_subcommand(
      "estimate", "estimate an event study or DiD model from a panel CSV");
  est->add_option("--input", est_args.input, "panel CSV file")->required();
  est->add_option("--method", est_args.method, "fe, iw, or did")
      ->required()
      ->check(CLI::IsMember({"fe", "iw", "did"}));
  est->add_option("--window", est_args.window,
                  "relative-period window '<lead>,<lag>' (default -3,3)");
  est->add_option("--ref", est_args.ref, "reference relative period");
  est->add_option("--endpoint", est_args.endpoint,
                  "observations beyond the window: pool or drop")
      ->check(CLI::IsMember({"pool", "drop"}));
  est->add_option("--cluster", est_args.cluster, "cluster column name");
  est->add_option("--controls", est_args.controls, "control column names")
      ->delimiter(',');
  est->add_option("--group", est_args.group,
                  "unit-constant treatment dummy column (did)");
  est->add_option("--status", est_args.status,
                  "time-varying treatment dummy column (did)");
  est->add_option("--balanced", est_args.balanced,
                  "keep units with at least this many consecutive waves");
  est->add_flag("--drop-movers", est_args.drop_movers_flag,
                "drop units whose region changes");
  est->add_option("--out", est_args.out_dir, "output directory")->required();

  SimulateArgs sim_args;
  auto* sim = app.add_subcommand("simulate",
                                 "generate a synthetic staggered-adoption panel");
  sim->add_option("--config", sim_args.config, "DGP config file")->required();
  sim->add_option("--out", sim_args.out_csv, "output panel CSV path")->required();

  MonteCarloArgs mc_args;
  auto* mc = app.add_subcommand(
      "montecarlo", "compare estimators against the generating truth");
  mc->add_option("--config", mc_args.config, "DGP config file")->required();
  mc->add_option("--reps", mc_args.reps, "number of replications")
      ->check(CLI::PositiveNumber);
  mc->add_option("--methods", mc_args.methods, "estimators to run (fe,iw)")
      ->delimiter(',')
      ->check(CLI::IsMember({"fe", "iw"}));
  mc->add_option("--window", mc_args.window, "relative-period window");
  mc->add_option("--ref", mc_args.ref, "reference relative period");
  mc->add_option("--ci", mc_args.ci, "confidence level for plot data")
      ->check(CLI::Range(0.0, 1.0));
  mc->add_option("--threads", mc_args.threads,
                 "worker threads (default $PANELTK_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  mc->add_option("--out", mc_args.out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (est->parsed()) {
      if (est_args.method == "did" &&
          (est_args.group.empty() || est_args.status.empty())) {
        std::cerr << "estimate --method did requires --group and --status\n";
        return 2;
      }
      return cmd_estimate(est_args);
    }
    if (sim->parsed()) return cmd_simulate(sim_args);
    if (mc->parsed()) return cmd_montecarlo(mc_args);
    return 2;
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << errc_name(e.code()) << ": " << e.what() << "\n";
    return is_data_error(e.code()) ? 3 : 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace paneltk::cli
