#pragma once

// Computes a minimal (index one) invariant pair (X, S) one eigenpair at a
// time. Each new eigenpair solves the augmented NEP
//
//   [M(lambda) U(lambda); X^H 0] [v; u] = 0,   U(lambda) = M(lambda) X (lambda I - S)^{-1},
//
// with the structured Broyden iteration, which keeps already locked
// eigenvalues from being found again.

#include <optional>
#include <string>
#include <vector>

#include "nepbroyden/structured.hpp"

namespace nepbroyden {

struct ColumnInfo {
  double residual = 0;   // solver residual when the column was locked
  int iterations = 0;    // structured Broyden steps spent on it
  bool conjugate = false;  // appended by conjugate symmetry, no solve
};

template <typename Real>
struct InvariantPair {
  ComplexMatrix<Real> x;  // n x p, orthonormal columns
  ComplexMatrix<Real> s;  // p x p, upper triangular
  std::vector<ColumnInfo> info;

  static InvariantPair empty(Index n);
  Index n() const { return x.rows(); }
  Index size() const { return x.cols(); }
  ComplexVector<Real> eigenvalues() const { return s.diagonal(); }
  DeflationContext<Real> context() const { return DeflationContext<Real>::from_pair(x, s); }
};

template <typename Real>
struct StartingTriplet {
  ComplexVector<Real> v;
  ComplexVector<Real> u;
  Complex<Real> lambda{};
};

/// Min-modulus eigenvector of [M1 U1; X^H 0], projected so X^H v = 0 and
/// scaled jointly with u so that c^H v = 1. lambda is sigma.
template <typename Real>
StartingTriplet<Real> starting_triplet(const NepProblem<Real>& nep, const DeflationContext<Real>& ctx,
                                       Complex<Real> sigma, const ComplexVector<Real>& c,
                                       const ComplexMatrix<Real>& m1, const ComplexMatrix<Real>& u1);

/// f1 = M'(sigma) (v1 + X (sigma I - S)^{-1} u1) - U1 (sigma I - S)^{-1} u1,
/// the last column of the initial W block.
template <typename Real>
ComplexVector<Real> starting_f(const NepProblem<Real>& nep, const DeflationContext<Real>& ctx,
                               Complex<Real> sigma, const ComplexVector<Real>& v1,
                               const ComplexVector<Real>& u1, const ComplexMatrix<Real>& u1_block);

/// Appends (v / beta, [u / beta; lambda]) with beta = ||v||.
template <typename Real>
InvariantPair<Real> extend_pair(InvariantPair<Real> pair, const ComplexVector<Real>& v,
                                const ComplexVector<Real>& u, Complex<Real> lambda, ColumnInfo info = {});

template <typename Real>
struct ConjugateExtension {
  InvariantPair<Real> pair;
  bool added = false;
  bool span_warning = false;  // conj(v) already in span(X)
};

/// Given an eigenvector y of M for a non-real lambda, appends (conj y, conj lambda):
/// y is orthogonalized against X as conj(y) = X h + beta q and the new S column is
/// ((conj(lambda) I - S) h / beta, conj(lambda)). Real lambda is a no-op.
template <typename Real>
ConjugateExtension<Real> conjugate_extend(InvariantPair<Real> pair, const ComplexVector<Real>& y,
                                          Complex<Real> lambda);

struct InvarianceReport {
  double max_residual = 0;
  std::vector<double> column_residuals;
  // Columns whose eigenvalue repeats an earlier diagonal entry (within 1e-8).
  // They are checked by a contour integral instead and excluded from max_residual.
  std::vector<Index> collided_columns;
  double max_collided_residual = 0;
};

template <typename Real>
InvarianceReport invariance_report(const NepProblem<Real>& nep, const InvariantPair<Real>& pair);

/// max_j ||M(S_jj) X_j + U_j(S_jj) S_{<j, j}|| / ||X_j|| over non-colliding columns.
template <typename Real>
double invariance_residual(const NepProblem<Real>& nep, const InvariantPair<Real>& pair) {
  return invariance_report(nep, pair).max_residual;
}

template <typename Real>
struct DeflationOptions {
  SolverOptions solver;
  // Approximation of M(sigma); assembled from the problem when absent.
  std::optional<ComplexMatrix<Real>> m1;
  bool use_conjugate_symmetry = true;
  unsigned long long seed = 1;  // perturbation of failed starts
};

template <typename Real>
struct DeflationResult {
  InvariantPair<Real> pair;
  std::vector<ConvergenceHistory> histories;  // one per solve (including retries)
  std::vector<std::string> warnings;
  bool complete = false;  // p_target columns locked
};

/// Locks p_target eigenpairs near sigma. M(sigma) and its inverse are formed
/// once and reused for every extension. A failed solve is retried once from a
/// perturbed start; a second failure stops and returns the partial pair.
template <typename Real>
DeflationResult<Real> deflated_broyden(const NepProblem<Real>& nep, Complex<Real> sigma,
                                       const ComplexVector<Real>& c, Index p_target,
                                       const DeflationOptions<Real>& opts = {});

}  // namespace nepbroyden
