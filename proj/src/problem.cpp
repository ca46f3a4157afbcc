#include "slowfast/problem.hpp"

#include "slowfast/errors.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

namespace slowfast {

namespace {

using nlohmann::json;

void expect_shape(const Matrix& m, int rows, int cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(name) + " expected " + std::to_string(rows) + "x" +
                    std::to_string(cols) + ", got " + std::to_string(m.rows()) +
                    "x" + std::to_string(m.cols()));
  }
}

constexpr std::array<const char*, 14> kMatrixKeys = {
    "A11", "A12", "A21", "A22", "B1", "B2", "C11",
    "C12", "C21", "C22", "D1",  "D2", "Q",   "R"};

Matrix* matrix_field(ProblemData& d, const std::string& key) {
  if (key == "A11") return &d.A11;
  if (key == "A12") return &d.A12;
  if (key == "A21") return &d.A21;
  if (key == "A22") return &d.A22;
  if (key == "B1") return &d.B1;
  if (key == "B2") return &d.B2;
  if (key == "C11") return &d.C11;
  if (key == "C12") return &d.C12;
  if (key == "C21") return &d.C21;
  if (key == "C22") return &d.C22;
  if (key == "D1") return &d.D1;
  if (key == "D2") return &d.D2;
  if (key == "Q") return &d.Q;
  if (key == "R") return &d.R;
  return nullptr;
}

Matrix matrix_from_json(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty()) {
    throw Error(ErrorCode::InvalidProblem,
                name + " must be a non-empty array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array() || j[0].empty()) {
    throw Error(ErrorCode::InvalidProblem, name + " rows must be arrays");
  }
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorCode::InvalidProblem, name + " has ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& v = row[static_cast<size_t>(c)];
      if (!v.is_number()) {
        throw Error(ErrorCode::InvalidProblem, name + " entries must be numbers");
      }
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

int positive_int(const json& doc, const char* key) {
  const json& v = doc.at(key);
  if (!v.is_number_integer() || v.get<long long>() <= 0) {
    throw Error(ErrorCode::InvalidProblem,
                std::string(key) + " must be a positive integer");
  }
  return v.get<int>();
}

}  // namespace

void ProblemData::check() const {
  if (n1 <= 0 || n2 <= 0 || k <= 0) {
    throw Error(ErrorCode::DimensionMismatch, "n1, n2, k must be positive");
  }
  expect_shape(A11, n1, n1, "A11");
  expect_shape(A12, n1, n2, "A12");
  expect_shape(A21, n2, n1, "A21");
  expect_shape(A22, n2, n2, "A22");
  expect_shape(B1, n1, k, "B1");
  expect_shape(B2, n2, k, "B2");
  expect_shape(C11, n1, n1, "C11");
  expect_shape(C12, n1, n2, "C12");
  expect_shape(C21, n2, n1, "C21");
  expect_shape(C22, n2, n2, "C22");
  expect_shape(D1, n1, k, "D1");
  expect_shape(D2, n2, k, "D2");
  expect_shape(Q, n(), n(), "Q");
  expect_shape(R, k, k, "R");
  if (!(T > 0.0) || !std::isfinite(T)) {
    throw Error(ErrorCode::InvalidProblem, "T must be positive and finite");
  }
  if (!is_symmetric(Q)) throw Error(ErrorCode::InvalidProblem, "Q not symmetric");
  if (!is_symmetric(R)) throw Error(ErrorCode::InvalidProblem, "R not symmetric");
  for (const Matrix* m : {&A11, &A12, &A21, &A22, &B1, &B2, &C11, &C12, &C21,
                          &C22, &D1, &D2}) {
    if (!m->allFinite()) {
      throw Error(ErrorCode::InvalidProblem, "non-finite coefficient");
    }
  }
}

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) {
    throw Error(ErrorCode::EpsilonOutOfRange,
                "epsilon must lie in (0, 1], got " + std::to_string(epsilon),
                std::nullopt, epsilon);
  }
}

ValidationReport validate(const ProblemData& data) {
  data.check();
  ValidationReport report{};
  const double q_min = min_eigenvalue(data.Q);
  const double r_min = min_eigenvalue(data.R);
  report.q_positive = {q_min > 1e-10, q_min};
  report.r_positive = {r_min > 1e-10, r_min};
  const double cond = condition_number(data.A22);
  report.a22_invertible = {cond <= kConditionLimit, cond};
  report.fast_pair_l2_stable = is_l2_stable(data.A22, data.C22);
  report.overall_pass = report.q_positive.pass && report.r_positive.pass &&
                        report.a22_invertible.pass &&
                        report.fast_pair_l2_stable.l2_stable;
  return report;
}

std::string failed_checks(const ValidationReport& report) {
  std::string out;
  auto add = [&out](bool pass, const char* name) {
    if (pass) return;
    if (!out.empty()) out += ' ';
    out += name;
  };
  add(report.q_positive.pass, "q_positive");
  add(report.r_positive.pass, "r_positive");
  add(report.a22_invertible.pass, "a22_invertible");
  add(report.fast_pair_l2_stable.l2_stable, "fast_pair_l2_stable");
  return out;
}

ScaledCoefficients scaled_coefficients(const ProblemData& data,
                                       double epsilon) {
  check_epsilon(epsilon);
  data.check();
  const int n1 = data.n1, n2 = data.n2, n = data.n(), k = data.k;
  const double inv = 1.0 / epsilon;
  const double inv_sqrt = 1.0 / std::sqrt(epsilon);
  ScaledCoefficients s{epsilon, Matrix(n, n), Matrix(n, k), Matrix(n, n),
                       Matrix(n, k)};
  s.A.topLeftCorner(n1, n1) = data.A11;
  s.A.topRightCorner(n1, n2) = data.A12;
  s.A.bottomLeftCorner(n2, n1) = inv * data.A21;
  s.A.bottomRightCorner(n2, n2) = inv * data.A22;
  s.B.topRows(n1) = data.B1;
  s.B.bottomRows(n2) = inv * data.B2;
  s.C.topLeftCorner(n1, n1) = data.C11;
  s.C.topRightCorner(n1, n2) = data.C12;
  s.C.bottomLeftCorner(n2, n1) = inv_sqrt * data.C21;
  s.C.bottomRightCorner(n2, n2) = inv_sqrt * data.C22;
  s.D.topRows(n1) = data.D1;
  s.D.bottomRows(n2) = inv_sqrt * data.D2;
  return s;
}

ReducedCoefficients reduced_coefficients(const ProblemData& data) {
  data.check();
  if (condition_number(data.A22) > kConditionLimit) {
    throw Error(ErrorCode::SingularA22, "A22 is singular or ill-conditioned");
  }
  Eigen::FullPivLU<Matrix> lu(data.A22);
  const Matrix inv_a21 = lu.solve(data.A21);  // A22^{-1} A21
  const Matrix inv_b2 = lu.solve(data.B2);    // A22^{-1} B2
  const Matrix q12 = data.Q12();
  const Matrix q22 = data.Q22();

  ReducedCoefficients r;
  r.As = data.A11 - data.A12 * inv_a21;
  r.Bs = data.B1 - data.A12 * inv_b2;
  r.C1s = data.C11 - data.C12 * inv_a21;
  r.C2s = data.C21 - data.C22 * inv_a21;
  r.D1s = data.D1 - data.C12 * inv_b2;
  r.D2s = data.D2 - data.C22 * inv_b2;
  r.Qs = symmetrize(data.Q11() - q12 * inv_a21 - inv_a21.transpose() * q12.transpose() +
                    inv_a21.transpose() * q22 * inv_a21);
  r.Ls = inv_b2.transpose() * (q22 * inv_a21 - q12.transpose());
  r.Rs = symmetrize(data.R + inv_b2.transpose() * q22 * inv_b2);
  return r;
}

ProblemData problem_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidProblem, std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) {
    throw Error(ErrorCode::InvalidProblem, "problem document must be an object");
  }
  for (const auto& [key, value] : doc.items()) {
    const bool scalar = key == "n1" || key == "n2" || key == "k" || key == "T";
    bool matrix = false;
    for (const char* m : kMatrixKeys) matrix = matrix || key == m;
    if (!scalar && !matrix) {
      throw Error(ErrorCode::InvalidProblem, "unknown key '" + key + "'");
    }
  }
  ProblemData d;
  try {
    d.n1 = positive_int(doc, "n1");
    d.n2 = positive_int(doc, "n2");
    d.k = positive_int(doc, "k");
    if (!doc.at("T").is_number()) {
      throw Error(ErrorCode::InvalidProblem, "T must be a number");
    }
    d.T = doc.at("T").get<double>();
    for (const char* key : kMatrixKeys) {
      *matrix_field(d, key) = matrix_from_json(doc.at(key), key);
    }
  } catch (const json::out_of_range& e) {
    throw Error(ErrorCode::InvalidProblem, std::string("missing key: ") + e.what());
  }
  d.check();
  return d;
}

ProblemData load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::InvalidProblem, "cannot open " + path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return problem_from_json_text(buffer.str());
}

std::string problem_to_json_text(const ProblemData& data) {
  json doc;
  doc["n1"] = data.n1;
  doc["n2"] = data.n2;
  doc["k"] = data.k;
  doc["T"] = data.T;
  ProblemData copy = data;
  for (const char* key : kMatrixKeys) doc[key] = matrix_to_json(*matrix_field(copy, key));
  return doc.dump(2) + "\n";
}

void save_problem(const ProblemData& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidProblem, "cannot write " + path.string());
  out << problem_to_json_text(data);
}

}  // namespace slowfast
