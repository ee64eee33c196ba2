#include "nepbroyden/nep.hpp"

#include <cmath>
#include <numbers>
#include <type_traits>

namespace nepbroyden {

template <typename Real>
auto NepProblem<Real>::apply(Scalar lambda, const Vector& w) const -> Vector {
  if (w.size() != n_) throw InputError("NEP action: vector has wrong dimension");
  actions_.fetch_add(1);
  return do_apply(lambda, w);
}

template <typename Real>
auto NepProblem<Real>::apply_block(Scalar lambda, const Matrix& w) const -> Matrix {
  if (w.rows() != n_) throw InputError("NEP action: block has wrong row count");
  actions_.fetch_add(static_cast<long>(w.cols()));
  return do_apply_block(lambda, w);
}

template <typename Real>
auto NepProblem<Real>::do_apply_block(Scalar lambda, const Matrix& w) const -> Matrix {
  Matrix out(n_, w.cols());
  for (Index j = 0; j < w.cols(); ++j) out.col(j) = do_apply(lambda, w.col(j));
  return out;
}

template <typename Real>
auto NepProblem<Real>::apply_derivative(Scalar lambda, const Vector& w) const -> Vector {
  if (!has_derivative()) throw InputError("NEP has no derivative action");
  if (w.size() != n_) throw InputError("NEP derivative: vector has wrong dimension");
  return do_apply_derivative(lambda, w);
}

template <typename Real>
auto NepProblem<Real>::do_apply_derivative(Scalar, const Vector&) const -> Vector {
  throw InputError("NEP has no derivative action");
}

template <typename Real>
auto NepProblem<Real>::assemble(Scalar sigma) const -> Matrix {
  if (!can_assemble()) throw InputError("NEP cannot be assembled");
  return do_assemble(sigma);
}

template <typename Real>
auto NepProblem<Real>::do_assemble(Scalar) const -> Matrix {
  throw InputError("NEP cannot be assembled");
}

namespace {

template <typename Real>
class FunctionNep final : public NepProblem<Real> {
 public:
  using typename NepProblem<Real>::Scalar;
  using typename NepProblem<Real>::Vector;
  using typename NepProblem<Real>::Matrix;

  explicit FunctionNep(FunctionNepSpec<Real> spec)
      : NepProblem<Real>(spec.n, spec.conjugate_symmetric), spec_(std::move(spec)) {}

  bool has_derivative() const override { return static_cast<bool>(spec_.derivative); }
  bool can_assemble() const override { return static_cast<bool>(spec_.assemble); }

 protected:
  Vector do_apply(Scalar lambda, const Vector& w) const override { return spec_.apply(lambda, w); }
  Vector do_apply_derivative(Scalar lambda, const Vector& w) const override {
    return spec_.derivative(lambda, w);
  }
  Matrix do_assemble(Scalar sigma) const override { return spec_.assemble(sigma); }

 private:
  FunctionNepSpec<Real> spec_;
};

}  // namespace

template <typename Real>
NepPtr<Real> make_function_nep(FunctionNepSpec<Real> spec) {
  if (spec.n < 1) throw InputError("NEP dimension must be positive");
  if (!spec.apply) throw InputError("NEP requires an action");
  return std::make_shared<FunctionNep<Real>>(std::move(spec));
}

template <typename Real>
Real default_fd_step(Complex<Real> lambda) {
  const Real base = std::is_same_v<Real, float> ? Real(5e-3) : Real(1e-6);
  return base * (Real(1) + std::abs(lambda));
}

template <typename Real>
ComplexVector<Real> apply_deriv_fd(const NepProblem<Real>& nep, Complex<Real> lambda,
                                   const ComplexVector<Real>& w, Real delta) {
  if (!(delta > 0)) throw InputError("finite-difference step must be positive");
  ComplexVector<Real> plus = nep.apply(lambda + delta, w);
  ComplexVector<Real> minus = nep.apply(lambda - delta, w);
  return (plus - minus) / (Real(2) * delta);
}

template <typename Real>
ComplexVector<Real> derivative_action(const NepProblem<Real>& nep, Complex<Real> lambda,
                                      const ComplexVector<Real>& w) {
  if (nep.has_derivative()) return nep.apply_derivative(lambda, w);
  return apply_deriv_fd(nep, lambda, w, default_fd_step(lambda));
}

template <typename Real>
ComplexMatrix<Real> assemble_or_probe(const NepProblem<Real>& nep, Complex<Real> lambda) {
  if (nep.can_assemble()) return nep.assemble(lambda);
  return nep.apply_block(lambda, ComplexMatrix<Real>::Identity(nep.size(), nep.size()));
}

template <typename Real>
DeflationContext<Real> DeflationContext<Real>::empty(Index n) {
  return from_pair(ComplexMatrix<Real>(n, 0), ComplexMatrix<Real>(0, 0));
}

template <typename Real>
DeflationContext<Real> DeflationContext<Real>::from_pair(ComplexMatrix<Real> x, ComplexMatrix<Real> s) {
  if (s.rows() != x.cols() || s.cols() != x.cols()) throw InputError("deflation: S must be p x p");
  DeflationContext ctx;
  const Index n = x.rows();
  const Index p = x.cols();
  ctx.x = std::move(x);
  ctx.s = std::move(s);
  ctx.b1 = ComplexVector<Real>::Zero(n);
  ctx.b2 = ComplexVector<Real>::Zero(p + 1);
  ctx.b2(p) = Real(1);
  return ctx;
}

template <typename Real>
void check_shift(const ComplexMatrix<Real>& s, Complex<Real> lambda) {
  const Real tol = Real(1e-14) * (Real(1) + std::abs(lambda));
  for (Index j = 0; j < s.rows(); ++j) {
    if (std::abs(lambda - s(j, j)) <= tol) throw InputError("shift collides with deflated eigenvalue");
  }
}

template <typename Real>
ComplexVector<Real> u_apply(const NepProblem<Real>& nep, const DeflationContext<Real>& ctx,
                            Complex<Real> lambda, const ComplexVector<Real>& u) {
  if (u.size() != ctx.p()) throw InputError("u_apply: u has wrong dimension");
  if (ctx.p() == 0) return ComplexVector<Real>::Zero(nep.size());
  check_shift(ctx.s, lambda);
  const ComplexVector<Real> y = shifted_triangular_solve(ctx.s, lambda, u);
  return nep.apply(lambda, ctx.x * y);
}

template <typename Real>
ComplexVector<Real> u_contour_oracle(const NepProblem<Real>& nep, const DeflationContext<Real>& ctx,
                                     Complex<Real> lambda, const ComplexVector<Real>& u,
                                     int quad_points) {
  if (u.size() != ctx.p()) throw InputError("u_contour_oracle: u has wrong dimension");
  if (quad_points < 1) throw InputError("u_contour_oracle: need at least one node");
  if (ctx.p() == 0) return ComplexVector<Real>::Zero(nep.size());
  check_shift(ctx.s, lambda);
  Real dist = std::numeric_limits<Real>::infinity();
  for (Index j = 0; j < ctx.p(); ++j) dist = std::min(dist, std::abs(lambda - ctx.s(j, j)));
  const Real radius = Real(0.5) * dist;
  // With xi = lambda + rho e^{i theta}, dxi / (2 pi i (xi - lambda)) = dtheta / (2 pi),
  // so the trapezoidal rule reduces to the mean of the integrand's remaining factor.
  ComplexVector<Real> acc = ComplexVector<Real>::Zero(nep.size());
  for (int k = 0; k < quad_points; ++k) {
    const Real theta = Real(2) * std::numbers::pi_v<Real> * Real(k) / Real(quad_points);
    const Complex<Real> xi = lambda + radius * std::polar(Real(1), theta);
    acc += nep.apply(xi, ctx.x * shifted_triangular_solve(ctx.s, xi, u));
  }
  return acc / Real(quad_points);
}

template <typename Real>
ComplexVector<Real> deflated_residual(const NepProblem<Real>& nep, const DeflationContext<Real>& ctx,
                                      Complex<Real> lambda, const ComplexVector<Real>& v,
                                      const ComplexVector<Real>& u) {
  if (v.size() != nep.size()) throw InputError("deflated_residual: v has wrong dimension");
  if (u.size() != ctx.p()) throw InputError("deflated_residual: u has wrong dimension");
  if (ctx.p() == 0) return nep.apply(lambda, v) - ctx.b1;
  check_shift(ctx.s, lambda);
  ComplexVector<Real> w = v + ctx.x * shifted_triangular_solve(ctx.s, lambda, u);
  return nep.apply(lambda, w) - ctx.b1;
}

#define NEPBROYDEN_INSTANTIATE(Real)                                                                   \
  template class NepProblem<Real>;                                                                     \
  template struct DeflationContext<Real>;                                                              \
  template NepPtr<Real> make_function_nep<Real>(FunctionNepSpec<Real>);                                \
  template Real default_fd_step<Real>(Complex<Real>);                                                  \
  template ComplexVector<Real> apply_deriv_fd<Real>(const NepProblem<Real>&, Complex<Real>,            \
                                                    const ComplexVector<Real>&, Real);                 \
  template ComplexVector<Real> derivative_action<Real>(const NepProblem<Real>&, Complex<Real>,         \
                                                       const ComplexVector<Real>&);                    \
  template ComplexMatrix<Real> assemble_or_probe<Real>(const NepProblem<Real>&, Complex<Real>);        \
  template void check_shift<Real>(const ComplexMatrix<Real>&, Complex<Real>);                          \
  template ComplexVector<Real> u_apply<Real>(const NepProblem<Real>&, const DeflationContext<Real>&,   \
                                             Complex<Real>, const ComplexVector<Real>&);               \
  template ComplexVector<Real> u_contour_oracle<Real>(const NepProblem<Real>&,                         \
                                                      const DeflationContext<Real>&, Complex<Real>,    \
                                                      const ComplexVector<Real>&, int);                \
  template ComplexVector<Real> deflated_residual<Real>(const NepProblem<Real>&,                        \
                                                       const DeflationContext<Real>&, Complex<Real>,   \
                                                       const ComplexVector<Real>&,                     \
                                                       const ComplexVector<Real>&);

NEPBROYDEN_INSTANTIATE(float)
NEPBROYDEN_INSTANTIATE(double)

#undef NEPBROYDEN_INSTANTIATE

}  // namespace nepbroyden
