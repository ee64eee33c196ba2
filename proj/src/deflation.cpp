#include "nepbroyden/deflation.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace nepbroyden {

template <typename Real>
InvariantPair<Real> InvariantPair<Real>::empty(Index n) {
  InvariantPair pair;
  pair.x = ComplexMatrix<Real>(n, 0);
  pair.s = ComplexMatrix<Real>(0, 0);
  return pair;
}

namespace {

// v <- (I - X X^H) v, then (v, u) <- (v, u) / (c^H v).
template <typename Real>
void normalize_start(const DeflationContext<Real>& ctx, const ComplexVector<Real>& c, ComplexVector<Real>& v,
                     ComplexVector<Real>& u) {
  for (int pass = 0; pass < 2 && ctx.p() > 0; ++pass) v -= ctx.x * (ctx.x.adjoint() * v);
  const Complex<Real> scale = c.dot(v);
  if (!(std::abs(scale) > Real(1e-12) * v.norm())) {
    throw NumericalError("normalization vector orthogonal to candidate");
  }
  v /= scale;
  u /= scale;
}

template <typename Real>
StartingTriplet<Real> raw_triplet(const NepProblem<Real>& nep, const DeflationContext<Real>& ctx,
                                  Complex<Real> sigma, const ComplexVector<Real>& c,
                                  const ComplexMatrix<Real>& m1, const ComplexMatrix<Real>& u1) {
  const Index n = nep.size();
  const Index p = ctx.p();
  if (m1.rows() != n || m1.cols() != n) throw InputError("starting_triplet: M1 must be n x n");
  if (u1.rows() != n || u1.cols() != p) throw InputError("starting_triplet: U1 must be n x p");
  if (c.size() != n) throw InputError("starting_triplet: c has wrong dimension");
  if (p >= n) throw InputError("starting_triplet: X already spans the whole space");

  ComplexMatrix<Real> g = ComplexMatrix<Real>::Zero(n + p, n + p);
  g.topLeftCorner(n, n) = m1;
  g.topRightCorner(n, p) = u1;
  g.bottomLeftCorner(p, n) = ctx.x.adjoint();
  const auto eig = eig_smallest(g);

  StartingTriplet<Real> t;
  t.v = eig.vector.head(n);
  t.u = eig.vector.tail(p);
  t.lambda = sigma;
  return t;
}

}  // namespace

template <typename Real>
StartingTriplet<Real> starting_triplet(const NepProblem<Real>& nep, const DeflationContext<Real>& ctx,
                                       Complex<Real> sigma, const ComplexVector<Real>& c,
                                       const ComplexMatrix<Real>& m1, const ComplexMatrix<Real>& u1) {
  StartingTriplet<Real> t = raw_triplet(nep, ctx, sigma, c, m1, u1);
  normalize_start(ctx, c, t.v, t.u);
  return t;
}

template <typename Real>
ComplexVector<Real> starting_f(const NepProblem<Real>& nep, const DeflationContext<Real>& ctx,
                               Complex<Real> sigma, const ComplexVector<Real>& v1,
                               const ComplexVector<Real>& u1, const ComplexMatrix<Real>& u1_block) {
  if (ctx.p() == 0) return derivative_action(nep, sigma, v1);
  check_shift(ctx.s, sigma);
  const ComplexVector<Real> y = shifted_triangular_solve(ctx.s, sigma, u1);
  return derivative_action(nep, sigma, ComplexVector<Real>(v1 + ctx.x * y)) - u1_block * y;
}

template <typename Real>
InvariantPair<Real> extend_pair(InvariantPair<Real> pair, const ComplexVector<Real>& v,
                                const ComplexVector<Real>& u, Complex<Real> lambda, ColumnInfo info) {
  const Index n = pair.n();
  const Index p = pair.size();
  if (v.size() != n || u.size() != p) throw InputError("extend_pair: dimension mismatch");
  const Real beta = v.norm();
  if (!(beta >= Real(1e-12))) throw InputError("trivial extension");
  if (p > 0 && (pair.x.adjoint() * v).norm() > Real(1e-8) * beta) {
    throw InputError("extend_pair: v is not orthogonal to X");
  }
  pair.x.conservativeResize(n, p + 1);
  pair.x.col(p) = v / beta;
  pair.s.conservativeResize(p + 1, p + 1);
  pair.s.row(p).setZero();
  pair.s.col(p).head(p) = u / beta;
  pair.s(p, p) = lambda;
  pair.info.push_back(info);
  return pair;
}

template <typename Real>
ConjugateExtension<Real> conjugate_extend(InvariantPair<Real> pair, const ComplexVector<Real>& y,
                                          Complex<Real> lambda) {
  ConjugateExtension<Real> out;
  if (!(std::abs(lambda.imag()) > Real(1e-10) * std::abs(lambda))) {
    out.pair = std::move(pair);
    return out;
  }
  const Index p = pair.size();
  GramSchmidtResult<Real> gs;
  try {
    gs = gram_schmidt_append(pair.x, ComplexVector<Real>(y.conjugate()));
  } catch (const NumericalError&) {
    out.pair = std::move(pair);
    out.span_warning = true;
    return out;
  }
  const Complex<Real> mu = std::conj(lambda);
  // conj(y) = X h + beta q is an eigenvector for mu, so q extends the pair with
  // top block (mu I - S) h / beta.
  ComplexMatrix<Real> shifted = -pair.s;
  shifted.diagonal().array() += mu;
  const ComplexVector<Real> top = shifted.template triangularView<Eigen::Upper>() * gs.h / gs.beta;

  ColumnInfo info;
  info.conjugate = true;
  if (!pair.info.empty()) info.residual = pair.info.back().residual;
  pair.x.conservativeResize(pair.n(), p + 1);
  pair.x.col(p) = gs.q;
  pair.s.conservativeResize(p + 1, p + 1);
  pair.s.row(p).setZero();
  pair.s.col(p).head(p) = top;
  pair.s(p, p) = mu;
  pair.info.push_back(info);
  out.pair = std::move(pair);
  out.added = true;
  return out;
}

namespace {

// Column j of the block residual (1/2 pi i) oint M(xi) X (xi I - S)^{-1} dxi, as a sum
// of small circles around groups of (nearly) coinciding diagonal entries. Robust when
// (lambda I - S) is close to singular.
template <typename Real>
ComplexVector<Real> contour_column_residual(const NepProblem<Real>& nep, const InvariantPair<Real>& pair,
                                            Index j, Real cluster_tol, int nodes) {
  const Index m = j + 1;
  const ComplexMatrix<Real> x = pair.x.leftCols(m);
  const ComplexMatrix<Real> s = pair.s.topLeftCorner(m, m);
  ComplexVector<Real> ej = ComplexVector<Real>::Zero(m);
  ej(j) = Real(1);

  std::vector<int> group(static_cast<std::size_t>(m), -1);
  std::vector<Complex<Real>> centers;
  for (Index i = 0; i < m; ++i) {
    for (std::size_t g = 0; g < centers.size(); ++g) {
      if (std::abs(s(i, i) - centers[g]) <= cluster_tol * (Real(1) + std::abs(centers[g]))) {
        group[static_cast<std::size_t>(i)] = static_cast<int>(g);
        break;
      }
    }
    if (group[static_cast<std::size_t>(i)] < 0) {
      group[static_cast<std::size_t>(i)] = static_cast<int>(centers.size());
      centers.push_back(s(i, i));
    }
  }

  ComplexVector<Real> acc = ComplexVector<Real>::Zero(nep.size());
  for (std::size_t g = 0; g < centers.size(); ++g) {
    Real spread = 0;
    Real gap = Real(2);
    for (Index i = 0; i < m; ++i) {
      const Real d = std::abs(s(i, i) - centers[g]);
      if (group[static_cast<std::size_t>(i)] == static_cast<int>(g)) {
        spread = std::max(spread, d);
      } else {
        gap = std::min(gap, d);
      }
    }
    const Real radius = std::max(Real(0.5) * gap, Real(4) * spread);
    for (int k = 0; k < nodes; ++k) {
      const Complex<Real> e = std::polar(Real(1), Real(2) * std::numbers::pi_v<Real> * Real(k) / Real(nodes));
      const Complex<Real> xi = centers[g] + radius * e;
      // dxi / (2 pi i) = radius e dtheta / (2 pi)
      acc += (radius * e / Real(nodes)) * nep.apply(xi, x * shifted_triangular_solve(s, xi, ej));
    }
  }
  return acc;
}

}  // namespace

template <typename Real>
InvarianceReport invariance_report(const NepProblem<Real>& nep, const InvariantPair<Real>& pair) {
  InvarianceReport report;
  const Real collide_tol = Real(1e-8);
  for (Index j = 0; j < pair.size(); ++j) {
    const Complex<Real> lambda = pair.s(j, j);
    bool collides = false;
    for (Index i = 0; i < j; ++i) {
      if (std::abs(pair.s(i, i) - lambda) <= collide_tol * (Real(1) + std::abs(lambda))) collides = true;
    }
    const Real xnorm = pair.x.col(j).norm();
    if (collides) {
      const ComplexVector<Real> r = contour_column_residual(nep, pair, j, collide_tol, 64);
      const double res = static_cast<double>(r.norm() / xnorm);
      report.column_residuals.push_back(res);
      report.collided_columns.push_back(j);
      report.max_collided_residual = std::max(report.max_collided_residual, res);
      continue;
    }
    const auto ctx = DeflationContext<Real>::from_pair(pair.x.leftCols(j), pair.s.topLeftCorner(j, j));
    const ComplexVector<Real> r = deflated_residual(nep, ctx, lambda, ComplexVector<Real>(pair.x.col(j)),
                                                    ComplexVector<Real>(pair.s.col(j).head(j)));
    const double res = static_cast<double>(r.norm() / xnorm);
    report.column_residuals.push_back(res);
    report.max_residual = std::max(report.max_residual, res);
  }
  return report;
}

template <typename Real>
DeflationResult<Real> deflated_broyden(const NepProblem<Real>& nep, Complex<Real> sigma,
                                       const ComplexVector<Real>& c, Index p_target,
                                       const DeflationOptions<Real>& opts) {
  using Vector = ComplexVector<Real>;
  using Matrix = ComplexMatrix<Real>;
  if (p_target < 1) throw InputError("deflated_broyden: p_target must be at least 1");
  const Index n = nep.size();
  if (c.size() != n) throw InputError("deflated_broyden: c has wrong dimension");

  const Matrix m1 = opts.m1 ? *opts.m1 : assemble_or_probe(nep, sigma);
  if (m1.rows() != n || m1.cols() != n) throw InputError("deflated_broyden: M1 must be n x n");
  const Matrix t1 = LuFactorization<Real>(m1).inverse();

  DeflationResult<Real> out;
  out.pair = InvariantPair<Real>::empty(n);
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal;

  while (out.pair.size() < p_target) {
    const Index p = out.pair.size();
    if (p >= n) {
      out.warnings.push_back("X spans the whole space; no further eigenvalues can be locked");
      return out;
    }
    const DeflationContext<Real> ctx = out.pair.context();

    Matrix u1(n, p);
    if (p > 0) {
      check_shift(ctx.s, sigma);
      Matrix y(p, p);
      for (Index j = 0; j < p; ++j) {
        Vector ej = Vector::Zero(p);
        ej(j) = Real(1);
        y.col(j) = shifted_triangular_solve(ctx.s, sigma, ej);
      }
      u1 = nep.apply_block(sigma, Matrix(ctx.x * y));
    }

    Matrix c_block(n, p + 1);
    c_block.leftCols(p) = ctx.x;
    c_block.col(p) = c;

    const StartingTriplet<Real> raw = raw_triplet(nep, ctx, sigma, c, m1, u1);

    std::optional<StructuredResult<Real>> solved;
    for (int attempt = 0; attempt < 2 && !solved; ++attempt) {
      try {
        StartingTriplet<Real> start = raw;
        if (attempt == 1) {
          Vector noise(n);
          for (Index i = 0; i < n; ++i) noise(i) = Complex<Real>(Real(normal(rng)), Real(normal(rng)));
          start.v += (Real(1e-2) * start.v.norm() / noise.norm()) * noise;
        }
        normalize_start(ctx, c, start.v, start.u);
        Matrix w1(n, p + 1);
        w1.leftCols(p) = u1;
        w1.col(p) = starting_f(nep, ctx, sigma, start.v, start.u, u1);
        auto state = init_structured(nep, ctx, start.v, start.u, start.lambda, t1, std::move(w1), c_block);
        auto result = solve_structured(std::move(state), nep, ctx, opts.solver);
        out.histories.push_back(result.history);
        if (result.history.converged) {
          solved = std::move(result);
        } else {
          out.warnings.push_back("extension " + std::to_string(p + 1) + ": no convergence (attempt " +
                                 std::to_string(attempt + 1) + ")");
        }
      } catch (const std::exception& e) {
        out.warnings.push_back("extension " + std::to_string(p + 1) + ": " + e.what());
      }
    }
    if (!solved) return out;

    const auto& st = solved->state;
    ColumnInfo info;
    info.residual = static_cast<double>(st.r.norm());
    info.iterations = st.k;
    out.pair = extend_pair(std::move(out.pair), st.v, st.u, st.lambda, info);

    if (opts.use_conjugate_symmetry && nep.conjugate_symmetric() && out.pair.size() < p_target) {
      // Eigenvector of M for lambda: v + X (lambda I - S)^{-1} u with the pre-extension pair.
      Vector y = st.v;
      if (p > 0) y += ctx.x * shifted_triangular_solve(ctx.s, st.lambda, st.u);
      auto ext = conjugate_extend(std::move(out.pair), y, st.lambda);
      out.pair = std::move(ext.pair);
      if (ext.span_warning) out.warnings.push_back("conjugate eigenvector already in span(X)");
    }
  }
  out.complete = true;
  return out;
}

#define NEPBROYDEN_INSTANTIATE(Real)                                                                   \
  template struct InvariantPair<Real>;                                                                 \
  template StartingTriplet<Real> starting_triplet<Real>(const NepProblem<Real>&,                       \
                                                        const DeflationContext<Real>&, Complex<Real>,  \
                                                        const ComplexVector<Real>&,                    \
                                                        const ComplexMatrix<Real>&,                    \
                                                        const ComplexMatrix<Real>&);                   \
  template ComplexVector<Real> starting_f<Real>(const NepProblem<Real>&, const DeflationContext<Real>&, \
                                                Complex<Real>, const ComplexVector<Real>&,             \
                                                const ComplexVector<Real>&, const ComplexMatrix<Real>&); \
  template InvariantPair<Real> extend_pair<Real>(InvariantPair<Real>, const ComplexVector<Real>&,      \
                                                 const ComplexVector<Real>&, Complex<Real>, ColumnInfo); \
  template ConjugateExtension<Real> conjugate_extend<Real>(InvariantPair<Real>,                        \
                                                           const ComplexVector<Real>&, Complex<Real>); \
  template InvarianceReport invariance_report<Real>(const NepProblem<Real>&, const InvariantPair<Real>&); \
  template DeflationResult<Real> deflated_broyden<Real>(const NepProblem<Real>&, Complex<Real>,        \
                                                        const ComplexVector<Real>&, Index,             \
                                                        const DeflationOptions<Real>&);

NEPBROYDEN_INSTANTIATE(float)
NEPBROYDEN_INSTANTIATE(double)

#undef NEPBROYDEN_INSTANTIATE

}  // namespace nepbroyden
