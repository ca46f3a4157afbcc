#include "slowfast/cli.hpp"

#include "slowfast/boundary_layer.hpp"
#include "slowfast/csv.hpp"
#include "slowfast/errors.hpp"
#include "slowfast/problem.hpp"
#include "slowfast/reduced.hpp"
#include "slowfast/riccati_full.hpp"
#include "slowfast/sde.hpp"
#include "slowfast/tikhonov.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace slowfast::cli {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

struct Options {
  std::string command;
  std::string problem;
  double epsilon = 0.1;
  std::string epsilons = "0.1,0.05,0.025,0.0125";
  long paths = 10000;
  double step = 0.0;  ///< 0 selects eps / 20
  std::uint64_t seed = 12345;
  int grid = 2001;
  std::string out = "runs";
  bool force = false;
  std::string x0;  ///< empty selects all ones
  std::string gains = "reduced";
  double tau_max = 0.0;  ///< 0 selects 20 / |closed-loop abscissa|
  std::string integral_orders = "1,2";
};

/// Bad command-line input (exit 4) as opposed to solver failures (exit 3).
struct ArgumentError {
  ErrorCode code;
  std::string message;
};

std::vector<double> parse_list(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ArgumentError{ErrorCode::InvalidProblem,
                          std::string(flag) + ": cannot parse '" + item + "'"};
    }
  }
  if (out.empty()) throw ArgumentError{ErrorCode::InvalidProblem, std::string(flag) + " is empty"};
  return out;
}

std::string fnv1a_hex8(const std::string& s) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : s) {
    h ^= c;
    h *= 16777619u;
  }
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", h);
  return buf;
}

std::string utc_stamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

fs::path make_run_dir(const Options& o, const std::string& manifest_text) {
  const std::string base = o.command + "_" + utc_stamp() + "_" + fnv1a_hex8(manifest_text);
  fs::path dir = fs::path(o.out) / base;
  for (int i = 1; fs::exists(dir); ++i) dir = fs::path(o.out) / (base + "-" + std::to_string(i));
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw Error(ErrorCode::InvalidProblem, "cannot write " + path.string());
}

ojson matrix_json(const Matrix& m) {
  ojson rows = ojson::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ojson row = ojson::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

ojson blocks_json(const RiccatiBlocks& b) {
  return {{"P11", matrix_json(b.P11)}, {"P12", matrix_json(b.P12)}, {"P22", matrix_json(b.P22)}};
}

ojson estimate_json(const CostEstimate& e) {
  return {{"mean", e.mean}, {"se", e.std_error}, {"n_paths", e.n_paths},
          {"n_exploded", e.n_exploded}};
}

std::string summary_line(const ojson& fields) {
  std::string s;
  for (const auto& [k, v] : fields.items()) {
    if (!s.empty()) s += ' ';
    s += k + "=" + (v.is_string() ? v.get<std::string>() : v.dump());
  }
  return s;
}

/// Everything that determines the outputs, fully resolved.
ojson manifest(const Options& o, const ProblemData& data, const std::vector<double>& eps_list,
               const Vector& x0, double step) {
  ojson m;
  m["command"] = o.command;
  m["problem_path"] = o.problem;
  m["problem"] = ojson::parse(problem_to_json_text(data));
  m["force"] = o.force;
  const std::string& c = o.command;
  if (c == "solve-full" || c == "composite" || c == "simulate" || c == "cost-gap") {
    m["epsilon"] = o.epsilon;
  }
  if (c == "sweep") {
    m["epsilons"] = eps_list;
    m["integral_orders"] = parse_list(o.integral_orders, "--integral-orders");
  }
  if (c == "sweep" || c == "composite") m["grid"] = o.grid;
  if (c == "boundary" || c == "composite") m["tau_max"] = o.tau_max;
  if (c == "simulate" || c == "cost-gap") {
    m["paths"] = o.paths;
    m["step"] = step;
    m["seed"] = o.seed;
    m["x0"] = std::vector<double>(x0.data(), x0.data() + x0.size());
  }
  if (c == "simulate") m["gains"] = o.gains;
  return m;
}

ojson validation_json(const ValidationReport& r) {
  auto check = [](const CheckResult& c) { return ojson{{"pass", c.pass}, {"value", c.value}}; };
  return {{"q_positive", check(r.q_positive)},
          {"r_positive", check(r.r_positive)},
          {"a22_invertible", check(r.a22_invertible)},
          {"fast_pair_l2_stable",
           {{"pass", r.fast_pair_l2_stable.l2_stable},
            {"spectral_abscissa", r.fast_pair_l2_stable.spectral_abscissa}}},
          {"overall_pass", r.overall_pass}};
}

int execute(const Options& o, std::ostream& out) {
  ProblemData data;
  try {
    data = load_problem(o.problem);
  } catch (const Error& e) {
    throw ArgumentError{e.code(), e.what()};
  }

  // Argument checks that would otherwise surface as solver errors.
  std::vector<double> eps_list;
  if (o.command == "sweep") {
    eps_list = parse_list(o.epsilons, "--epsilons");
    for (size_t i = 0; i < eps_list.size(); ++i) {
      if (!(eps_list[i] >= 1e-4 && eps_list[i] <= 1.0) ||
          (i > 0 && !(eps_list[i] < eps_list[i - 1]))) {
        throw ArgumentError{ErrorCode::EpsilonOutOfRange,
                            "--epsilons must be strictly decreasing in [1e-4, 1]"};
      }
    }
    for (double j : parse_list(o.integral_orders, "--integral-orders")) {
      if (!(j >= 1) || j != static_cast<int>(j)) {
        throw ArgumentError{ErrorCode::InvalidProblem, "--integral-orders must be positive integers"};
      }
    }
  }
  if (!(o.epsilon > 0.0 && o.epsilon <= 1.0)) {
    throw ArgumentError{ErrorCode::EpsilonOutOfRange, "--epsilon must lie in (0, 1]"};
  }
  const double step = o.step > 0.0 ? o.step : o.epsilon / 20.0;
  Vector x0 = Vector::Ones(data.n());
  if (o.command == "simulate" || o.command == "cost-gap") {
    if (!(step <= 0.1 * o.epsilon * (1.0 + 1e-12))) {
      throw ArgumentError{ErrorCode::StepTooLarge, "--step must not exceed epsilon / 10"};
    }
    if (o.paths < 1) throw ArgumentError{ErrorCode::InvalidProblem, "--paths must be >= 1"};
    if (!o.x0.empty()) {
      const std::vector<double> v = parse_list(o.x0, "--x0");
      if (static_cast<int>(v.size()) != data.n()) {
        throw ArgumentError{ErrorCode::DimensionMismatch, "--x0 needs n1 + n2 entries"};
      }
      x0 = Eigen::Map<const Vector>(v.data(), data.n());
    }
  }
  if (o.grid < 2) throw ArgumentError{ErrorCode::InvalidProblem, "--grid must be >= 2"};

  const ValidationReport report = validate(data);
  const ojson man = manifest(o, data, eps_list, x0, step);
  const std::string man_text = man.dump(2) + "\n";

  if (o.command == "validate") {
    const fs::path dir = make_run_dir(o, man_text);
    write_text(dir / "manifest.json", man_text);
    write_text(dir / "validation.json", validation_json(report).dump(2) + "\n");
    if (report.overall_pass) {
      out << "PASS out=" << dir.string() << '\n';
      return kOk;
    }
    out << "FAIL " << failed_checks(report) << " out=" << dir.string() << '\n';
    return kValidationFailed;
  }
  if (!report.overall_pass && !o.force) {
    out << "FAIL " << failed_checks(report) << " (use --force to run anyway)\n";
    return kValidationFailed;
  }

  // Solve first so that failed runs leave no partial output directory.
  std::vector<std::pair<std::string, std::string>> files;
  auto add = [&](const std::string& name, auto&& fn) {
    std::ostringstream s;
    fn(s);
    files.emplace_back(name, s.str());
  };
  ojson summary;
  summary["command"] = o.command;

  if (o.command == "solve-full") {
    const RiccatiTrajectory traj = solve_full(data, o.epsilon);
    add("full.csv", [&](std::ostream& s) { write_full_csv(s, traj); });
    const RiccatiBlocks p0 = traj.at(0);
    add("summary.json", [&](std::ostream& s) {
      s << ojson{{"epsilon", o.epsilon}, {"steps", traj.size() - 1},
                 {"min_step", traj.min_step()}, {"P_at_0", blocks_json(p0)}}
                   .dump(2)
        << '\n';
    });
    summary["epsilon"] = o.epsilon;
    summary["steps"] = traj.size() - 1;
    summary["P11_00_at_0"] = p0.P11(0, 0);
  } else if (o.command == "solve-reduced") {
    const ReducedSolution red = solve_reduced_dre(data);
    add("reduced.csv", [&](std::ostream& s) { write_reduced_csv(s, red); });
    const ReducedResiduals res = residuals_reduced(red, data);
    add("summary.json", [&](std::ostream& s) {
      s << ojson{{"steps", red.size() - 1},
                 {"P_at_0", blocks_json({red.P11bar()[0], red.P12bar()[0], red.P22bar()[0]})},
                 {"residual_g1", res.g1},
                 {"residual_g2", res.g2}}
                   .dump(2)
        << '\n';
    });
    summary["steps"] = red.size() - 1;
    summary["P11_00_at_0"] = red.P11bar()[0](0, 0);
    summary["residual_g1"] = res.g1;
    summary["residual_g2"] = res.g2;
  } else if (o.command == "boundary") {
    const ReducedSolution red = solve_reduced_dre(data);
    const BoundaryTrajectory layer = terminal_boundary_layer(red, o.tau_max);
    add("boundary.csv", [&](std::ostream& s) { write_boundary_csv(s, layer); });
    auto rate = [](double r) { return std::isfinite(r) ? ojson(r) : ojson(nullptr); };
    const ojson info{{"tau_max", layer.tau_max()},
                     {"fitted_rate_12", rate(layer.fitted_rate_12)},
                     {"fitted_rate_22", rate(layer.fitted_rate_22)},
                     {"gamma_hat", std::abs(red.closed_loop_abscissa().back())}};
    add("summary.json", [&](std::ostream& s) { s << info.dump(2) << '\n'; });
    for (const auto& [k, v] : info.items()) summary[k] = v;
  } else if (o.command == "composite") {
    const ReducedSolution red = solve_reduced_dre(data);
    const CompositeApproximation comp(red, terminal_boundary_layer(red, o.tau_max), o.epsilon);
    const std::vector<double> grid = uniform_grid(data.T, o.grid);
    add("composite.csv", [&](std::ostream& s) {
      std::vector<std::string> header{"t"};
      csv::add_matrix_columns(header, "P11", data.n1, data.n1);
      csv::add_matrix_columns(header, "P12", data.n1, data.n2);
      csv::add_matrix_columns(header, "P22", data.n2, data.n2);
      csv::write_row(s, header);
      for (double t : grid) {
        const RiccatiBlocks b = comp.evaluate(t);
        std::vector<std::string> row{csv::format(t)};
        csv::add_matrix_values(row, b.P11);
        csv::add_matrix_values(row, b.P12);
        csv::add_matrix_values(row, b.P22);
        csv::write_row(s, row);
      }
    });
    summary["epsilon"] = o.epsilon;
    summary["points"] = o.grid;
  } else if (o.command == "sweep") {
    std::vector<int> orders;
    for (double j : parse_list(o.integral_orders, "--integral-orders")) {
      orders.push_back(static_cast<int>(j));
    }
    const ErrorTable table = sweep_epsilon(data, eps_list, o.grid, orders);
    std::optional<ConvergenceSlopes> slopes;
    if (eps_list.size() >= 3) {
      try {
        slopes = fit_convergence_order(table);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoiseFloor) throw;
      }
    }
    add("error_table.csv", [&](std::ostream& s) { write_error_table_csv(s, table); });
    add("slopes.json", [&](std::ostream& s) { write_slopes_json(s, table, slopes); });
    summary["epsilons"] = eps_list.size();
    if (slopes) {
      summary["slope_11"] = slopes->slope_11;
      summary["slope_12"] = slopes->slope_12;
      summary["slope_22"] = slopes->slope_22;
    } else {
      summary["slopes"] = "none";
    }
  } else if (o.command == "simulate") {
    const std::vector<double> grid = simulation_grid(data, o.epsilon, step);
    GainSchedule gains;
    if (o.gains == "zero") {
      gains = zero_gains(data);
    } else if (o.gains == "full") {
      gains = full_gains(solve_full(data, o.epsilon), data, grid);
    } else {
      gains = reduced_gain_schedule(solve_reduced_dre(data), grid);
    }
    const StatePath path = simulate_path(data, o.epsilon, gains, x0, step, o.seed, 0);
    const CostEstimate est = mc_cost(data, o.epsilon, gains, x0, o.paths, step, o.seed);
    add("path.csv", [&](std::ostream& s) { write_path_csv(s, path); });
    add("cost.json", [&](std::ostream& s) {
      ojson j = estimate_json(est);
      j["gains"] = gains.label;
      j["epsilon"] = o.epsilon;
      j["step"] = step;
      j["seed"] = o.seed;
      s << j.dump(2) << '\n';
    });
    summary["gains"] = gains.label;
    summary["mean"] = est.mean;
    summary["se"] = est.std_error;
  } else if (o.command == "cost-gap") {
    const CostGapReport r = cost_gap_experiment(data, o.epsilon, x0, o.paths, step, o.seed);
    add("cost_gap.json", [&](std::ostream& s) { write_cost_gap_json(s, r); });
    summary["V_eps"] = r.V_eps;
    summary["V_bar"] = r.V_bar;
    summary["gap_mc"] = r.gap_mc;
    summary["gap_value"] = r.gap_value;
  }

  const fs::path dir = make_run_dir(o, man_text);
  write_text(dir / "manifest.json", man_text);
  for (const auto& [name, text] : files) write_text(dir / name, text);
  summary["out"] = dir.string();
  out << summary_line(summary) << '\n';
  return kOk;
}

void error_line(std::ostream& err, std::string_view code, const std::string& message) {
  std::string m;
  for (char c : message) {
    if (c == '"' || c == '\\') m += '\\';
    m += (c == '\n') ? ' ' : c;
  }
  err << "error code=" << code << " message=\"" << m << "\"\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Slow-fast stochastic LQ Riccati toolkit"};
  app.require_subcommand(1);
  struct Spec {
    const char* name;
    const char* help;
  };
  const Spec specs[] = {
      {"validate", "check the standing assumptions on a problem"},
      {"solve-full", "integrate the full partitioned Riccati system at one epsilon"},
      {"solve-reduced", "integrate the reduced Riccati equation"},
      {"boundary", "integrate the terminal boundary layer and fit its decay"},
      {"composite", "evaluate reduced + boundary-layer composite on a grid"},
      {"sweep", "epsilon ladder: composite errors and convergence slopes"},
      {"simulate", "Euler-Maruyama paths and Monte Carlo cost for one gain schedule"},
      {"cost-gap", "value and cost gaps between full and reduced feedback"},
  };
  for (const Spec& s : specs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--problem", o.problem, "problem JSON file")->required();
    sub->add_option("--out", o.out, "output root directory")->capture_default_str();
    sub->add_flag("--force", o.force, "run solvers even if validation fails");
    const std::string n = s.name;
    if (n == "solve-full" || n == "composite" || n == "simulate" || n == "cost-gap") {
      sub->add_option("--epsilon", o.epsilon, "time-scale ratio")->capture_default_str();
    }
    if (n == "sweep") {
      sub->add_option("--epsilons", o.epsilons, "comma-separated decreasing ladder")
          ->capture_default_str();
      sub->add_option("--integral-orders", o.integral_orders, "orders j of the integral check")
          ->capture_default_str();
    }
    if (n == "sweep" || n == "composite") {
      sub->add_option("--grid", o.grid, "points of the uniform comparison grid")
          ->capture_default_str();
    }
    if (n == "boundary" || n == "composite") {
      sub->add_option("--tau-max", o.tau_max, "stretched-time horizon (0: 20 / gamma)")
          ->capture_default_str();
    }
    if (n == "simulate" || n == "cost-gap") {
      sub->add_option("--paths", o.paths, "Monte Carlo paths")->capture_default_str();
      sub->add_option("--step", o.step, "Euler-Maruyama step (0: epsilon / 20)")
          ->capture_default_str();
      sub->add_option("--seed", o.seed, "RNG seed")->capture_default_str();
      sub->add_option("--x0", o.x0, "comma-separated initial state (default all ones)");
    }
    if (n == "simulate") {
      sub->add_option("--gains", o.gains, "reduced | full | zero")
          ->check(CLI::IsMember({"reduced", "full", "zero"}))
          ->capture_default_str();
    }
    sub->callback([&o, n] { o.command = n; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    error_line(err, "BadArguments", e.what());
    return kBadArguments;
  }

  try {
    return execute(o, out);
  } catch (const ArgumentError& e) {
    error_line(err, to_string(e.code), e.message);
    return kBadArguments;
  } catch (const Error& e) {
    error_line(err, to_string(e.code()), e.what());
    return kSolverError;
  } catch (const std::exception& e) {
    error_line(err, "Internal", e.what());
    return kSolverError;
  }
}

}  // namespace slowfast::cli
