#include <doctest.h>

#include "nepbroyden/deflation.hpp"
#include "nepbroyden/problems.hpp"
#include "test_support.hpp"

using namespace nepbroyden;
using testing::cd;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

namespace {

NepPtr<double> shifted_scalar() {
  FunctionNepSpec<double> spec;
  spec.n = 1;
  spec.apply = [](cd l, const VectorXcd& w) -> VectorXcd { return (l - 2.0) * w; };
  spec.derivative = [](cd, const VectorXcd& w) -> VectorXcd { return w; };
  return make_function_nep(std::move(spec));
}

struct Start {
  NepPtr<double> nep;
  DeflationContext<double> ctx;
  VectorXcd c;
  cd sigma;
  MatrixXcd m1;
  StructuredState<double> state;
};

// p = 0 start: min-modulus eigenvector of M(sigma), exact T_1 and W_1 = M'(sigma) v_1.
Start plain_start(NepPtr<double> nep, cd sigma) {
  Start s;
  const Index n = nep->size();
  s.nep = nep;
  s.ctx = DeflationContext<double>::empty(n);
  s.c = VectorXcd::Ones(n) / std::sqrt(double(n));
  s.sigma = sigma;
  s.m1 = assemble_or_probe(*nep, sigma);
  const auto t = starting_triplet(*nep, s.ctx, sigma, s.c, s.m1, MatrixXcd(n, 0));
  const MatrixXcd w1 = derivative_action(*nep, sigma, t.v);
  s.state = init_structured(*nep, s.ctx, t.v, t.u, t.lambda, MatrixXcd(s.m1.inverse()), w1, MatrixXcd(s.c));
  return s;
}

}  // namespace

TEST_CASE("scalar initialization and one-step convergence") {
  const auto nep = shifted_scalar();
  const auto ctx = DeflationContext<double>::empty(1);
  const VectorXcd one = VectorXcd::Ones(1);
  auto s = init_structured<double>(*nep, ctx, one, VectorXcd(0), 1.0, -MatrixXcd::Ones(1, 1), MatrixXcd::Ones(1, 1),
                                   MatrixXcd::Ones(1, 1));
  CHECK(s.r(0) == cd(-1.0));
  CHECK(s.z(0, 0) == cd(-1.0));

  s = step_structured(s, *nep, ctx, DampingRule{});
  CHECK(s.last.dlambda == cd(1.0));
  CHECK(s.last.dv.norm() == 0.0);
  CHECK(s.last.gamma == 1.0);
  CHECK(s.lambda == cd(2.0));
  CHECK(s.r.norm() == 0.0);
  CHECK(s.last.ztilde.norm() == 0.0);
  CHECK(s.t(0, 0) == cd(-1.0));
  CHECK(s.w(0, 0) == cd(1.0));

  const auto again = step_structured(s, *nep, ctx, DampingRule{});
  CHECK(again.converged);
  CHECK(again.k == s.k);
  CHECK(again.lambda == s.lambda);

  SolverOptions opts;
  const auto res = solve_structured(
      init_structured<double>(*nep, ctx, one, VectorXcd(0), 1.0, -MatrixXcd::Ones(1, 1), MatrixXcd::Ones(1, 1),
                              MatrixXcd::Ones(1, 1)),
      *nep, ctx, opts);
  CHECK(res.history.converged);
  CHECK(res.history.size() == 1);
  CHECK(res.state.lambda == cd(2.0));
}

TEST_CASE("initialization rejects a violated constraint") {
  const auto nep = shifted_scalar();
  const auto ctx = DeflationContext<double>::empty(1);
  CHECK_THROWS_WITH_AS(init_structured<double>(*nep, ctx, VectorXcd::Constant(1, 0.5), VectorXcd(0), 1.0,
                                               -MatrixXcd::Ones(1, 1), MatrixXcd::Ones(1, 1), MatrixXcd::Ones(1, 1)),
                       "input constraint violated", InputError);
  CHECK_THROWS_AS(init_structured<double>(*nep, ctx, VectorXcd::Ones(1), VectorXcd(0), 1.0, -MatrixXcd::Ones(2, 2),
                                          MatrixXcd::Ones(1, 1), MatrixXcd::Ones(1, 1)),
                  InputError);
}

TEST_CASE("Z starts as T W") {
  const auto s = plain_start(make_diag_toy<double>(), 1.9);
  CHECK((s.state.z - s.state.t * s.state.w).norm() == 0.0);
  CHECK((s.state.t - s.m1.inverse()).norm() < 1e-14);
}

TEST_CASE("structured iterates match the J-version on the diagonal NEP") {
  auto s = plain_start(make_diag_toy<double>(), 1.9);
  const auto sys = build_nep_system<double>(s.nep, s.c);
  VectorXcd x0(3);
  x0 << s.state.v, s.state.lambda;
  const MatrixXcd j1 = assemble_structured_jacobian<double>(s.m1, s.state.w, MatrixXcd(s.c));
  auto j = make_generic_state<double>(sys.f, x0, j1, BroydenVariant::J);
  auto t = s.state;
  for (int k = 0; k < 15 && !t.converged && j.fx.norm() > 0; ++k) {
    t = step_structured(t, *s.nep, s.ctx, DampingRule{});
    j = step_J(j, sys.f, DampingRule{});
    CHECK(std::abs(t.lambda - j.x(2)) <= 1e-8 * std::abs(j.x(2)));
    CHECK((t.v - j.x.head(2)).norm() <= 1e-8);
  }
}

TEST_CASE("quadratic delay problem converges from an exact start") {
  auto s = plain_start(make_qdep<double>(100, 1), 0.0);
  SolverOptions opts;
  opts.damping = 1.0;
  const auto res = solve_structured(s.state, *s.nep, s.ctx, opts);
  CHECK(res.history.converged);
  CHECK(res.state.r.norm() <= 1e-10);
  const VectorXcd mv = s.nep->apply(res.state.lambda, res.state.v);
  CHECK(mv.norm() <= 1e-10);
}

TEST_CASE("iteration cap") {
  auto s = plain_start(make_qdep<double>(20, 2), 0.0);
  SolverOptions opts;
  opts.tol = 0;
  opts.maxit = 3;
  const auto res = solve_structured(s.state, *s.nep, s.ctx, opts);
  CHECK_FALSE(res.history.converged);
  CHECK(res.history.size() == 3);
}

TEST_CASE("property: equivalence with the J-version including a deflated pair") {
  const auto nep = make_qdep<double>(30, 4);
  const Index n = nep->size();
  const VectorXcd c = VectorXcd::Ones(n) / std::sqrt(double(n));
  DeflationOptions<double> dopts;
  dopts.solver.damping = 1.0;
  dopts.use_conjugate_symmetry = false;
  const auto locked = deflated_broyden<double>(*nep, 0.0, c, 2, dopts);
  REQUIRE(locked.complete);
  const auto ctx = locked.pair.context();
  const cd sigma(0.05, 0.02);
  const MatrixXcd m1 = nep->assemble(sigma);
  MatrixXcd y(2, 2);
  for (Index j = 0; j < 2; ++j) y.col(j) = shifted_triangular_solve<double>(ctx.s, sigma, VectorXcd::Unit(2, j));
  const MatrixXcd ublock = nep->apply_block(sigma, ctx.x * y);
  MatrixXcd cc(n, 3);
  cc << ctx.x, c;
  const auto t = starting_triplet(*nep, ctx, sigma, c, m1, ublock);
  MatrixXcd w1(n, 3);
  w1 << ublock, starting_f(*nep, ctx, sigma, t.v, t.u, ublock);
  auto state = init_structured(*nep, ctx, t.v, t.u, t.lambda, MatrixXcd(m1.inverse()), w1, cc);

  const auto f = build_structured_system<double>(nep, ctx, cc);
  VectorXcd x0(n + 3);
  x0 << t.v, t.u, t.lambda;
  auto j = make_generic_state<double>(f, x0, assemble_structured_jacobian<double>(m1, w1, cc), BroydenVariant::J);
  CHECK((j.fx.head(n) - state.r).norm() <= 1e-12);
  for (int k = 0; k < 15; ++k) {
    state = step_structured(state, *nep, ctx, DampingRule{1.0});
    j = step_J(j, f, DampingRule{1.0});
    CHECK(std::abs(state.lambda - j.x(n + 2)) <= 1e-8 * std::abs(j.x(n + 2)));
  }
}

TEST_CASE("property: T tracks the inverse of the updated M block") {
  auto s = plain_start(make_qdep<double>(25, 4), 0.0);
  MatrixXcd m = s.m1;
  auto state = s.state;
  for (int k = 0; k < 20; ++k) {
    state = step_structured(state, *s.nep, s.ctx, DampingRule{1.0});
    if (state.converged) break;
    m += state.last.ztilde * state.last.dv.adjoint() / state.last.step_norm2;
    CHECK((state.t * m - MatrixXcd::Identity(25, 25)).norm() <= 1e-6);
  }
}

TEST_CASE("property: one NEP action per step and constraint kept") {
  auto s = plain_start(make_random_qep<double>(12, 6), 0.0);
  auto state = s.state;
  for (int k = 0; k < 15; ++k) {
    s.nep->reset_action_count();
    state = step_structured(state, *s.nep, s.ctx, DampingRule{1.0});
    if (state.converged) break;
    CHECK(s.nep->action_count() == 1);
    CHECK(state.constraint_violation() <= 1e-8);
  }
}

TEST_CASE("Z refresh keeps Z equal to T W") {
  auto s = plain_start(make_qdep<double>(20, 9), 0.0);
  auto state = s.state;
  for (int k = 0; k < 4; ++k) state = step_structured(state, *s.nep, s.ctx, DampingRule{1.0}, 2);
  CHECK((state.z - state.t * state.w).norm() <= 1e-13 * state.z.norm());
  CHECK(state.k == 4);
}
