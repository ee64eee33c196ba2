#pragma once

// Dense complex linear algebra shared by the solvers.

#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace nepbroyden {

using Index = Eigen::Index;

template <typename Real>
using Complex = std::complex<Real>;

template <typename Real>
using ComplexMatrix = Eigen::Matrix<Complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Real>
using ComplexVector = Eigen::Matrix<Complex<Real>, Eigen::Dynamic, 1>;

/// Raised when a linear-algebra kernel cannot proceed (singular matrix,
/// vector already in a span, failed eigendecomposition).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a quasi-Newton update cannot be formed.
class BreakdownError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on violated preconditions of solver inputs.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename Real>
constexpr Real machine_epsilon() {
  return std::numeric_limits<Real>::epsilon();
}

/// LU factorization with partial pivoting that rejects matrices which are
/// singular to working precision. Factor once, solve many times.
template <typename Real>
class LuFactorization {
 public:
  using Matrix = ComplexMatrix<Real>;
  using Vector = ComplexVector<Real>;

  LuFactorization() = default;
  explicit LuFactorization(const Matrix& a);

  Index size() const { return lu_.rows(); }

  Matrix solve(const Matrix& b) const;
  Vector solve(const Vector& b) const;
  /// Solves A^H x = b with the same factors.
  Vector solve_adjoint(const Vector& b) const;
  Matrix inverse() const;

 private:
  Eigen::PartialPivLU<Matrix> lu_;
};

/// Solves A X = B. Throws NumericalError("singular matrix") when A is
/// singular to working precision.
template <typename Real>
ComplexMatrix<Real> lu_solve(const ComplexMatrix<Real>& a, const ComplexMatrix<Real>& b);

template <typename Real>
struct SmallestEigenpair {
  Complex<Real> value;
  ComplexVector<Real> vector;  // unit 2-norm
};

/// Eigenvalue of minimal modulus and its eigenvector from a full dense
/// eigendecomposition. Ties go to the first one in the solver's order.
template <typename Real>
SmallestEigenpair<Real> eig_smallest(const ComplexMatrix<Real>& a);

template <typename Real>
struct GramSchmidtResult {
  ComplexVector<Real> q;  // new orthonormal direction
  ComplexVector<Real> h;  // coefficients X^H w
  Real beta;              // ||w - X h||
};

/// Orthogonalizes w against the orthonormal columns of X (modified
/// Gram-Schmidt, one reorthogonalization pass). Throws
/// NumericalError("vector in span") when beta < 1e-12 ||w||.
template <typename Real>
GramSchmidtResult<Real> gram_schmidt_append(const ComplexMatrix<Real>& x,
                                            const ComplexVector<Real>& w);

/// Solves (shift I - S) y = rhs for upper triangular S.
template <typename Real>
ComplexVector<Real> shifted_triangular_solve(const ComplexMatrix<Real>& s,
                                             Complex<Real> shift,
                                             const ComplexVector<Real>& rhs);

/// Converts between precisions (used for single/double comparisons).
template <typename To, typename From>
ComplexMatrix<To> cast_matrix(const ComplexMatrix<From>& m) {
  return m.template cast<Complex<To>>();
}

template <typename To, typename From>
ComplexVector<To> cast_vector(const ComplexVector<From>& v) {
  return v.template cast<Complex<To>>();
}

}  // namespace nepbroyden
