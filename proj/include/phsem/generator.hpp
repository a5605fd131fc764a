#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace phsem {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// External state label: 1..n are transient, n+1 is absorbing. Internally the
// library uses 0-based indices with n as the absorbing index.
struct StateId {
  int index = 1;

  static StateId from_internal(int internal) { return StateId{internal + 1}; }
  int internal() const { return index - 1; }
  bool is_absorbing(int n) const { return index == n + 1; }
  friend bool operator==(StateId, StateId) = default;
};

struct GeneratorIssue {
  enum class Kind { NotSquare, NonFinite, NegativeOffDiagonal, PositiveDiagonal, PositiveRowSum };
  Kind kind;
  int row;  // 1-based, 0 when not applicable
  int col;
  std::string message;
};

struct ValidationReport {
  std::vector<GeneratorIssue> issues;
  std::vector<std::string> warnings;

  bool ok() const { return issues.empty(); }
  std::string summary() const;
};

// Transient block of a phase-type generator. Construction does not validate;
// use validate_generator or SubIntensityMatrix::checked.
class SubIntensityMatrix {
 public:
  SubIntensityMatrix() = default;
  explicit SubIntensityMatrix(Matrix entries) : entries_(std::move(entries)) {}

  // Throws InputError with the validation summary when invalid.
  static SubIntensityMatrix checked(Matrix entries);

  int size() const { return static_cast<int>(entries_.rows()); }
  const Matrix& entries() const { return entries_; }
  double operator()(int row, int col) const { return entries_(row, col); }

 private:
  Matrix entries_;
};

class InitialDistribution {
 public:
  InitialDistribution() = default;
  // Throws InputError unless entries are nonnegative and sum to 1 within 1e-12.
  explicit InitialDistribution(Vector probabilities);

  int size() const { return static_cast<int>(probabilities_.size()); }
  const Vector& probabilities() const { return probabilities_; }
  double operator[](int i) const { return probabilities_(i); }

 private:
  Vector probabilities_;
};

ValidationReport validate_generator(const Matrix& m);
inline ValidationReport validate_generator(const SubIntensityMatrix& m) {
  return validate_generator(m.entries());
}

// lambda = -Lambda * 1, clipped at zero for round-off. Throws InputError on
// an invalid generator.
Vector exit_rates(const SubIntensityMatrix& m);

// exp(t * m) by scaling and squaring with a degree-adaptive Pade approximant.
Matrix matrix_exponential(const Matrix& m, double t);

// exp(t * m) == exp(log_scale) * mantissa. Keeps the mantissa in range when
// t * m is so large that the plain exponential underflows.
struct ScaledExponential {
  Matrix mantissa;
  double log_scale = 0.0;
};
ScaledExponential scaled_matrix_exponential(const Matrix& m, double t);

}  // namespace phsem
