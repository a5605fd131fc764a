#include "phsem/generator.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include "phsem/errors.hpp"

namespace phsem {

std::string ValidationReport::summary() const {
  std::ostringstream out;
  if (ok()) {
    out << "valid";
  } else {
    out << "invalid generator:";
    for (const auto& issue : issues) out << ' ' << issue.message << ';';
  }
  for (const auto& w : warnings) out << " warning: " << w << ';';
  return out.str();
}

SubIntensityMatrix SubIntensityMatrix::checked(Matrix entries) {
  auto report = validate_generator(entries);
  if (!report.ok()) throw InputError(report.summary());
  return SubIntensityMatrix(std::move(entries));
}

InitialDistribution::InitialDistribution(Vector probabilities)
    : probabilities_(std::move(probabilities)) {
  if (probabilities_.size() == 0) throw InputError("initial distribution is empty");
  for (Eigen::Index i = 0; i < probabilities_.size(); ++i) {
    if (!std::isfinite(probabilities_(i)) || probabilities_(i) < 0.0) {
      throw InputError("initial distribution entry " + std::to_string(i + 1) +
                       " is negative or non-finite");
    }
  }
  const double total = probabilities_.sum();
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "initial distribution sums to " << total << ", expected 1";
    throw InputError(msg.str());
  }
}

ValidationReport validate_generator(const Matrix& m) {
  ValidationReport report;
  using Kind = GeneratorIssue::Kind;
  if (m.rows() != m.cols()) {
    report.issues.push_back({Kind::NotSquare, 0, 0, "matrix is not square"});
    return report;
  }
  const auto n = static_cast<int>(m.rows());
  for (int i = 0; i < n; ++i) {
    double row_sum = 0.0;
    double row_scale = 0.0;
    bool finite = true;
    for (int j = 0; j < n; ++j) {
      const double v = m(i, j);
      if (!std::isfinite(v)) {
        report.issues.push_back({Kind::NonFinite, i + 1, j + 1,
                                 "non-finite entry at (" + std::to_string(i + 1) + "," +
                                     std::to_string(j + 1) + ")"});
        finite = false;
        continue;
      }
      row_sum += v;
      row_scale = std::max(row_scale, std::abs(v));
      if (i != j && v < 0.0) {
        report.issues.push_back({Kind::NegativeOffDiagonal, i + 1, j + 1,
                                 "negative off-diagonal at (" + std::to_string(i + 1) + "," +
                                     std::to_string(j + 1) + ")"});
      }
    }
    if (!finite) continue;
    if (m(i, i) > 0.0) {
      report.issues.push_back({Kind::PositiveDiagonal, i + 1, i + 1,
                               "positive diagonal at (" + std::to_string(i + 1) + "," +
                                   std::to_string(i + 1) + ")"});
    }
    if (row_sum > 1e-12 * std::max(1.0, row_scale)) {
      report.issues.push_back(
          {Kind::PositiveRowSum, i + 1, 0, "positive row sum in row " + std::to_string(i + 1)});
    } else if (m(i, i) == 0.0) {
      report.warnings.push_back("state " + std::to_string(i + 1) + " is absorbing-in-disguise");
    }
  }
  return report;
}

Vector exit_rates(const SubIntensityMatrix& m) {
  auto report = validate_generator(m);
  if (!report.ok()) throw InputError(report.summary());
  Vector rates = -(m.entries().rowwise().sum());
  return rates.cwiseMax(0.0);
}

namespace {

// Degree / theta pairs from Higham (2005), "The scaling and squaring method
// for the matrix exponential revisited".
constexpr std::array<double, 5> kTheta = {1.495585217958292e-2, 2.539398330063230e-1,
                                          9.504178996162932e-1, 2.097847961257068e0,
                                          5.371920351148152e0};

void pade_terms(const Matrix& a, int degree, Matrix& u, Matrix& v) {
  const auto n = a.rows();
  const Matrix id = Matrix::Identity(n, n);
  const Matrix a2 = a * a;
  switch (degree) {
    case 3: {
      constexpr double b[] = {120.0, 60.0, 12.0, 1.0};
      u = a * (b[3] * a2 + b[1] * id);
      v = b[2] * a2 + b[0] * id;
      return;
    }
    case 5: {
      constexpr double b[] = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
      const Matrix a4 = a2 * a2;
      u = a * (b[5] * a4 + b[3] * a2 + b[1] * id);
      v = b[4] * a4 + b[2] * a2 + b[0] * id;
      return;
    }
    case 7: {
      constexpr double b[] = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                              25200.0,    1512.0,    56.0,      1.0};
      const Matrix a4 = a2 * a2;
      const Matrix a6 = a4 * a2;
      u = a * (b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
      v = b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
      return;
    }
    case 9: {
      constexpr double b[] = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                              2162160.0,     110880.0,     3960.0,       90.0,        1.0};
      const Matrix a4 = a2 * a2;
      const Matrix a6 = a4 * a2;
      const Matrix a8 = a6 * a2;
      u = a * (b[9] * a8 + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
      v = b[8] * a8 + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
      return;
    }
    default: {
      constexpr double b[] = {64764752532480000.0,
                              32382376266240000.0,
                              7771770303897600.0,
                              1187353796428800.0,
                              129060195264000.0,
                              10559470521600.0,
                              670442572800.0,
                              33522128640.0,
                              1323241920.0,
                              40840800.0,
                              960960.0,
                              16380.0,
                              182.0,
                              1.0};
      const Matrix a4 = a2 * a2;
      const Matrix a6 = a4 * a2;
      u = a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
               b[3] * a2 + b[1] * id);
      v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 +
          b[0] * id;
      return;
    }
  }
}

void check_inputs(const Matrix& m, double t) {
  if (m.rows() != m.cols()) throw InputError("matrix exponential of a non-square matrix");
  if (!std::isfinite(t) || t < 0.0) throw DomainError("matrix exponential needs finite t >= 0");
  if (!m.allFinite()) throw NumericalError("matrix exponential of a matrix with non-finite entries");
}

// Pade approximant of exp(a / 2^squarings); returns the number of squarings
// still owed.
Matrix pade_of_scaled(const Matrix& a, int& squarings) {
  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
  static constexpr int kDegrees[] = {3, 5, 7, 9};
  for (int i = 0; i < 4; ++i) {
    if (norm <= kTheta[i]) {
      Matrix u, v;
      pade_terms(a, kDegrees[i], u, v);
      squarings = 0;
      return (v - u).partialPivLu().solve(v + u);
    }
  }
  squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / kTheta[4]))));
  const Matrix scaled = a / std::ldexp(1.0, squarings);
  Matrix u, v;
  pade_terms(scaled, 13, u, v);
  return (v - u).partialPivLu().solve(v + u);
}

}  // namespace

Matrix matrix_exponential(const Matrix& m, double t) {
  check_inputs(m, t);
  if (m.rows() == 0) return m;
  int squarings = 0;
  Matrix result = pade_of_scaled(t * m, squarings);
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

ScaledExponential scaled_matrix_exponential(const Matrix& m, double t) {
  check_inputs(m, t);
  ScaledExponential out;
  if (m.rows() == 0) return out;
  int squarings = 0;
  out.mantissa = pade_of_scaled(t * m, squarings);
  constexpr double kLow = 1e-150;
  constexpr double kHigh = 1e150;
  for (int i = 0; i < squarings; ++i) {
    out.mantissa = out.mantissa * out.mantissa;
    out.log_scale *= 2.0;
    const double peak = out.mantissa.cwiseAbs().maxCoeff();
    if (peak > 0.0 && (peak < kLow || peak > kHigh)) {
      out.mantissa /= peak;
      out.log_scale += std::log(peak);
    }
  }
  return out;
}

}  // namespace phsem
