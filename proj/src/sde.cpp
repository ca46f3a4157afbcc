#include "slowfast/sde.hpp"

#include "slowfast/csv.hpp"
#include "slowfast/errors.hpp"
#include "slowfast/philox.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace slowfast {

namespace {

constexpr double kExplosion = 1e8;
constexpr long kMomentBlock = 256;

/// Closed-loop coefficients on the simulation grid, shared read-only by all
/// paths.
struct ClosedLoop {
  int n1 = 0, n2 = 0;
  double h = 0.0;
  std::vector<double> times;
  std::vector<Matrix> drift;   ///< A + B F_i
  std::vector<Matrix> noise;   ///< C + D F_i
  std::vector<Matrix> weight;  ///< Q + F_i' R F_i
  std::vector<Matrix> gain;    ///< [F1_i F2_i]
  Vector x0;
  Philox4x32 rng{std::uint64_t{0}};
};

ClosedLoop close_loop(const ProblemData& data, double epsilon, const GainSchedule& gains,
                      const Vector& x0, double step, std::uint64_t seed) {
  data.check();
  check_epsilon(epsilon);
  if (x0.size() != data.n()) {
    throw Error(ErrorCode::DimensionMismatch, "x0 must have n1 + n2 entries");
  }
  ClosedLoop c;
  c.n1 = data.n1;
  c.n2 = data.n2;
  c.times = simulation_grid(data, epsilon, step);
  c.h = data.T / static_cast<double>(c.times.size() - 1);
  c.x0 = x0;
  c.rng = Philox4x32(seed);
  const ScaledCoefficients sc = scaled_coefficients(data, epsilon);
  const size_t m = c.times.size();
  c.drift.resize(m);
  c.noise.resize(m);
  c.weight.resize(m);
  c.gain.resize(m);
  for (size_t i = 0; i < m; ++i) {
    const FeedbackGains g = gains.at(c.times[i]);
    Matrix f(data.k, data.n());
    f << g.F1, g.F2;
    c.gain[i] = f;
    c.drift[i] = sc.A + sc.B * f;
    c.noise[i] = sc.C + sc.D * f;
    c.weight[i] = data.Q + f.transpose() * data.R * f;
  }
  return c;
}

struct PathRecorder {
  std::vector<Vector>* states = nullptr;
  std::vector<double>* sq_norms = nullptr;
};

/// One Euler-Maruyama path. Returns the cost, NaN if the path exploded.
double run_path(const ClosedLoop& c, long path, const PathRecorder& rec = {}) {
  const auto n = static_cast<std::uint32_t>(c.times.size() - 1);
  const auto p = static_cast<std::uint64_t>(path);
  const auto lo = static_cast<std::uint32_t>(p);
  const auto hi = static_cast<std::uint32_t>(p >> 32);
  const double sqrt_h = std::sqrt(c.h);
  Vector x = c.x0;
  Vector next(x.size());
  if (rec.states) rec.states->push_back(x);
  if (rec.sq_norms) rec.sq_norms->push_back(x.squaredNorm());
  double prev = x.dot(c.weight[0] * x);
  double sum = 0.0;
  for (std::uint32_t i = 0; i < n; ++i) {
    const double dw = sqrt_h * c.rng.normal({i, lo, hi, 0u});
    next.noalias() = x + c.h * (c.drift[i] * x) + dw * (c.noise[i] * x);
    x.swap(next);
    if (!x.allFinite() || x.norm() > kExplosion) {
      return std::numeric_limits<double>::quiet_NaN();
    }
    if (rec.states) rec.states->push_back(x);
    if (rec.sq_norms) rec.sq_norms->push_back(x.squaredNorm());
    const double cur = x.dot(c.weight[i + 1] * x);
    sum += 0.5 * c.h * (prev + cur);
    prev = cur;
  }
  return 0.5 * sum;
}

CostEstimate summarize(const std::vector<double>& costs, double step, std::uint64_t seed) {
  long used = 0;
  double mean = 0.0;
  for (double v : costs) {
    if (std::isnan(v)) continue;
    ++used;
    mean += v;
  }
  const long exploded = static_cast<long>(costs.size()) - used;
  if (used == 0) {
    throw Error(ErrorCode::AllPathsExploded, "every simulated path exploded",
                std::nullopt, static_cast<double>(exploded));
  }
  mean /= static_cast<double>(used);
  double ss = 0.0;
  for (double v : costs) {
    if (!std::isnan(v)) ss += (v - mean) * (v - mean);
  }
  const double var = used > 1 ? ss / static_cast<double>(used - 1) : 0.0;
  return {mean, std::sqrt(var / static_cast<double>(used)), used, exploded, step, seed};
}

void check_paths(long n_paths) {
  if (n_paths < 1) throw Error(ErrorCode::InvalidProblem, "n_paths must be >= 1");
}

}  // namespace

FeedbackGains GainSchedule::at(double t) const {
  if (grid.empty()) throw Error(ErrorCode::DimensionMismatch, "empty gain schedule");
  if (t <= grid.front()) return {F1.front(), F2.front()};
  if (t >= grid.back()) return {F1.back(), F2.back()};
  const auto it = std::upper_bound(grid.begin(), grid.end(), t);
  const size_t j = static_cast<size_t>(it - grid.begin());
  if (grid[j - 1] == t) return {F1[j - 1], F2[j - 1]};
  const double w = (t - grid[j - 1]) / (grid[j] - grid[j - 1]);
  return {(1.0 - w) * F1[j - 1] + w * F1[j], (1.0 - w) * F2[j - 1] + w * F2[j]};
}

GainSchedule zero_gains(const ProblemData& data) {
  return {{0.0, data.T},
          {Matrix::Zero(data.k, data.n1), Matrix::Zero(data.k, data.n1)},
          {Matrix::Zero(data.k, data.n2), Matrix::Zero(data.k, data.n2)},
          "zero"};
}

GainSchedule full_gains(const RiccatiTrajectory& traj, const ProblemData& data,
                        const std::vector<double>& grid) {
  GainSchedule s{grid, {}, {}, "full-optimal"};
  for (double t : grid) {
    const FeedbackGains g = feedback_gains_full(traj.evaluate(t), traj.epsilon(), data);
    s.F1.push_back(g.F1);
    s.F2.push_back(g.F2);
  }
  return s;
}

GainSchedule reduced_gain_schedule(const ReducedSolution& reduced,
                                   const std::vector<double>& grid) {
  GainSchedule s{grid, {}, {}, "reduced"};
  for (double t : grid) {
    const FeedbackGains g = reduced.gains_at(t);
    s.F1.push_back(g.F1);
    s.F2.push_back(g.F2);
  }
  return s;
}

std::vector<double> simulation_grid(const ProblemData& data, double epsilon, double step) {
  check_epsilon(epsilon);
  if (!(step > 0.0) || step > 0.1 * epsilon * (1.0 + 1e-12)) {
    throw Error(ErrorCode::StepTooLarge,
                "Euler-Maruyama step must lie in (0, eps/10]", std::nullopt, step);
  }
  const auto n = static_cast<long>(std::ceil(data.T / step * (1.0 - 1e-12)));
  std::vector<double> g(static_cast<size_t>(n + 1));
  for (long i = 0; i <= n; ++i) g[i] = data.T * static_cast<double>(i) / static_cast<double>(n);
  return g;
}

StatePath simulate_path(const ProblemData& data, double epsilon, const GainSchedule& gains,
                        const Vector& x0, double step, std::uint64_t seed, long path_index) {
  const ClosedLoop c = close_loop(data, epsilon, gains, x0, step, seed);
  std::vector<Vector> states;
  states.reserve(c.times.size());
  StatePath out;
  out.seed = seed;
  out.path_index = path_index;
  out.cost = run_path(c, path_index, {&states, nullptr});
  out.exploded = std::isnan(out.cost);
  for (size_t i = 0; i < states.size(); ++i) {
    out.times.push_back(c.times[i]);
    out.X1.push_back(states[i].head(c.n1));
    out.X2.push_back(states[i].tail(c.n2));
    out.U.push_back(c.gain[i] * states[i]);
  }
  return out;
}

std::vector<double> path_costs(const ProblemData& data, double epsilon,
                               const GainSchedule& gains, const Vector& x0, long n_paths,
                               double step, std::uint64_t seed) {
  check_paths(n_paths);
  const ClosedLoop c = close_loop(data, epsilon, gains, x0, step, seed);
  std::vector<double> costs(static_cast<size_t>(n_paths));
#pragma omp parallel for schedule(static)
  for (long p = 0; p < n_paths; ++p) costs[p] = run_path(c, p);
  return costs;
}

CostEstimate mc_cost(const ProblemData& data, double epsilon, const GainSchedule& gains,
                     const Vector& x0, long n_paths, double step, std::uint64_t seed) {
  return summarize(path_costs(data, epsilon, gains, x0, n_paths, step, seed), step, seed);
}

CostEstimate mc_cost_difference(const ProblemData& data, double epsilon,
                                const GainSchedule& a, const GainSchedule& b,
                                const Vector& x0, long n_paths, double step,
                                std::uint64_t seed) {
  std::vector<double> ca = path_costs(data, epsilon, a, x0, n_paths, step, seed);
  const std::vector<double> cb = path_costs(data, epsilon, b, x0, n_paths, step, seed);
  for (size_t i = 0; i < ca.size(); ++i) ca[i] -= cb[i];  // NaN propagates
  return summarize(ca, step, seed);
}

std::vector<double> mc_second_moment(const ProblemData& data, double epsilon,
                                     const GainSchedule& gains, const Vector& x0,
                                     long n_paths, double step, std::uint64_t seed) {
  check_paths(n_paths);
  const ClosedLoop c = close_loop(data, epsilon, gains, x0, step, seed);
  const size_t m = c.times.size();
  const long blocks = (n_paths + kMomentBlock - 1) / kMomentBlock;
  std::vector<std::vector<double>> partial(static_cast<size_t>(blocks),
                                           std::vector<double>(m, 0.0));
  std::vector<long> used(static_cast<size_t>(blocks), 0);
#pragma omp parallel for schedule(dynamic)
  for (long b = 0; b < blocks; ++b) {
    std::vector<double> sq;
    sq.reserve(m);
    for (long p = b * kMomentBlock; p < std::min(n_paths, (b + 1) * kMomentBlock); ++p) {
      sq.clear();
      if (std::isnan(run_path(c, p, {nullptr, &sq}))) continue;
      for (size_t i = 0; i < m; ++i) partial[b][i] += sq[i];
      ++used[b];
    }
  }
  std::vector<double> out(m, 0.0);
  long total = 0;
  for (long b = 0; b < blocks; ++b) {
    for (size_t i = 0; i < m; ++i) out[i] += partial[b][i];
    total += used[b];
  }
  if (total == 0) throw Error(ErrorCode::AllPathsExploded, "every simulated path exploded");
  for (double& v : out) v /= static_cast<double>(total);
  return out;
}

namespace reference {

CostEstimate mc_cost_serial(const ProblemData& data, double epsilon,
                            const GainSchedule& gains, const Vector& x0, long n_paths,
                            double step, std::uint64_t seed) {
  check_paths(n_paths);
  const ClosedLoop c = close_loop(data, epsilon, gains, x0, step, seed);
  std::vector<double> costs;
  costs.reserve(static_cast<size_t>(n_paths));
  for (long p = 0; p < n_paths; ++p) costs.push_back(run_path(c, p));
  return summarize(costs, step, seed);
}

}  // namespace reference

CostGapReport cost_gap_experiment(const ProblemData& data, double epsilon, const Vector& x0,
                                  long n_paths, double step, std::uint64_t seed) {
  const RiccatiTrajectory full = solve_full(data, epsilon);
  const ReducedSolution reduced = solve_reduced_dre(data);
  const std::vector<double> grid = simulation_grid(data, epsilon, step);
  const GainSchedule g_full = full_gains(full, data, grid);
  const GainSchedule g_red = reduced_gain_schedule(reduced, grid);

  CostGapReport r;
  r.epsilon = epsilon;
  r.V_eps = 0.5 * x0.dot(assemble_P(full.at(0), epsilon) * x0);
  const Vector x1 = x0.head(data.n1);
  r.V_bar = 0.5 * x1.dot(reduced.P11bar().front() * x1);
  std::vector<double> c_red = path_costs(data, epsilon, g_red, x0, n_paths, step, seed);
  const std::vector<double> c_opt = path_costs(data, epsilon, g_full, x0, n_paths, step, seed);
  r.J_reduced = summarize(c_red, step, seed);
  r.J_optimal = summarize(c_opt, step, seed);
  for (size_t i = 0; i < c_red.size(); ++i) c_red[i] -= c_opt[i];
  r.J_difference = summarize(c_red, step, seed);
  r.gap_mc = r.J_reduced.mean - r.V_eps;
  r.gap_mc_se = r.J_reduced.std_error;
  r.gap_value = r.V_eps - r.V_bar;
  return r;
}

void write_path_csv(std::ostream& out, const StatePath& path) {
  std::vector<std::string> header{"t"};
  auto names = [&](const char* base, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) header.push_back(std::string(base) + "_" + std::to_string(i));
  };
  const Eigen::Index n1 = path.X1.empty() ? 0 : path.X1.front().size();
  const Eigen::Index n2 = path.X2.empty() ? 0 : path.X2.front().size();
  const Eigen::Index k = path.U.empty() ? 0 : path.U.front().size();
  names("X1", n1);
  names("X2", n2);
  names("U", k);
  csv::write_row(out, header);
  for (size_t i = 0; i < path.times.size(); ++i) {
    std::vector<std::string> row{csv::format(path.times[i])};
    for (const Vector* v : {&path.X1[i], &path.X2[i], &path.U[i]}) {
      for (Eigen::Index j = 0; j < v->size(); ++j) row.push_back(csv::format((*v)(j)));
    }
    csv::write_row(out, row);
  }
}

namespace {
nlohmann::ordered_json estimate_json(const CostEstimate& e) {
  nlohmann::ordered_json j;
  j["mean"] = e.mean;
  j["se"] = e.std_error;
  j["n_paths"] = e.n_paths;
  j["n_exploded"] = e.n_exploded;
  return j;
}
}  // namespace

void write_cost_gap_json(std::ostream& out, const CostGapReport& r) {
  nlohmann::ordered_json doc;
  doc["epsilon"] = r.epsilon;
  doc["V_eps"] = r.V_eps;
  doc["V_bar"] = r.V_bar;
  doc["J_reduced"] = estimate_json(r.J_reduced);
  doc["J_optimal"] = estimate_json(r.J_optimal);
  doc["J_difference"] = estimate_json(r.J_difference);
  doc["gaps"] = {{"J_reduced_minus_V_eps", r.gap_mc},
                 {"J_reduced_minus_V_eps_se", r.gap_mc_se},
                 {"V_eps_minus_V_bar", r.gap_value}};
  doc["step"] = r.J_optimal.step;
  doc["seed"] = r.J_optimal.seed;
  out << doc.dump(2) << '\n';
}

}  // namespace slowfast
