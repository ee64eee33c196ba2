#include "nepbroyden/numerics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace nepbroyden {

namespace {

template <typename Real>
void check_pivots(const ComplexMatrix<Real>& lu) {
  const Index n = lu.rows();
  if (n == 0) return;
  Real max_pivot = 0;
  Real min_pivot = std::numeric_limits<Real>::infinity();
  for (Index i = 0; i < n; ++i) {
    const Real p = std::abs(lu(i, i));
    max_pivot = std::max(max_pivot, p);
    min_pivot = std::min(min_pivot, p);
  }
  if (!(max_pivot > 0) || !(min_pivot > static_cast<Real>(n) * machine_epsilon<Real>() * max_pivot)) {
    throw NumericalError("singular matrix");
  }
}

}  // namespace

template <typename Real>
LuFactorization<Real>::LuFactorization(const Matrix& a) {
  if (a.rows() != a.cols()) throw InputError("lu: matrix must be square");
  lu_.compute(a);
  check_pivots<Real>(lu_.matrixLU());
}

template <typename Real>
auto LuFactorization<Real>::solve(const Matrix& b) const -> Matrix {
  if (b.rows() != size()) throw InputError("lu: right-hand side has wrong row count");
  return lu_.solve(b);
}

template <typename Real>
auto LuFactorization<Real>::solve(const Vector& b) const -> Vector {
  if (b.rows() != size()) throw InputError("lu: right-hand side has wrong row count");
  return lu_.solve(b);
}

template <typename Real>
auto LuFactorization<Real>::solve_adjoint(const Vector& b) const -> Vector {
  if (b.rows() != size()) throw InputError("lu: right-hand side has wrong row count");
  return lu_.adjoint().solve(b);
}

template <typename Real>
auto LuFactorization<Real>::inverse() const -> Matrix {
  return lu_.inverse();
}

template <typename Real>
ComplexMatrix<Real> lu_solve(const ComplexMatrix<Real>& a, const ComplexMatrix<Real>& b) {
  return LuFactorization<Real>(a).solve(b);
}

template <typename Real>
SmallestEigenpair<Real> eig_smallest(const ComplexMatrix<Real>& a) {
  if (a.rows() != a.cols() || a.rows() == 0) throw InputError("eig_smallest: matrix must be square and nonempty");
  Eigen::ComplexEigenSolver<ComplexMatrix<Real>> solver(a, true);
  if (solver.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const auto& values = solver.eigenvalues();
  Index best = 0;
  for (Index i = 1; i < values.size(); ++i) {
    if (std::abs(values(i)) < std::abs(values(best))) best = i;
  }
  ComplexVector<Real> v = solver.eigenvectors().col(best);
  v /= v.norm();
  return {values(best), std::move(v)};
}

template <typename Real>
GramSchmidtResult<Real> gram_schmidt_append(const ComplexMatrix<Real>& x,
                                            const ComplexVector<Real>& w) {
  if (x.cols() > 0 && x.rows() != w.rows()) throw InputError("gram_schmidt_append: dimension mismatch");
  const Real wnorm = w.norm();
  ComplexVector<Real> q = w;
  ComplexVector<Real> h = ComplexVector<Real>::Zero(x.cols());
  for (int pass = 0; pass < 2; ++pass) {
    for (Index j = 0; j < x.cols(); ++j) {
      const Complex<Real> coeff = x.col(j).dot(q);
      h(j) += coeff;
      q -= coeff * x.col(j);
    }
  }
  const Real beta = q.norm();
  if (!(beta > Real(1e-12) * wnorm) || wnorm == 0) throw NumericalError("vector in span");
  q /= beta;
  return {std::move(q), std::move(h), beta};
}

template <typename Real>
ComplexVector<Real> shifted_triangular_solve(const ComplexMatrix<Real>& s,
                                             Complex<Real> shift,
                                             const ComplexVector<Real>& rhs) {
  ComplexMatrix<Real> shifted = -s;
  shifted.diagonal().array() += shift;
  return shifted.template triangularView<Eigen::Upper>().solve(rhs);
}

#define NEPBROYDEN_INSTANTIATE(Real)                                                                  \
  template class LuFactorization<Real>;                                                               \
  template ComplexMatrix<Real> lu_solve<Real>(const ComplexMatrix<Real>&, const ComplexMatrix<Real>&); \
  template SmallestEigenpair<Real> eig_smallest<Real>(const ComplexMatrix<Real>&);                    \
  template GramSchmidtResult<Real> gram_schmidt_append<Real>(const ComplexMatrix<Real>&,              \
                                                             const ComplexVector<Real>&);             \
  template ComplexVector<Real> shifted_triangular_solve<Real>(const ComplexMatrix<Real>&, Complex<Real>, \
                                                              const ComplexVector<Real>&);

NEPBROYDEN_INSTANTIATE(float)
NEPBROYDEN_INSTANTIATE(double)

#undef NEPBROYDEN_INSTANTIATE

}  // namespace nepbroyden
