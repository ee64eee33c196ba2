#include <doctest.h>

#include <algorithm>

#include "nepbroyden/deflation.hpp"
#include "nepbroyden/problems.hpp"
#include "test_support.hpp"

using namespace nepbroyden;
using testing::cd;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

namespace {

VectorXcd unit_ones(Index n) { return VectorXcd::Ones(n) / std::sqrt(double(n)); }

// Same problem without the analytic derivative, so M' falls back to differences.
NepPtr<double> strip_derivative(NepPtr<double> nep) {
  FunctionNepSpec<double> spec;
  spec.n = nep->size();
  spec.apply = [nep](cd l, const VectorXcd& w) { return nep->apply(l, w); };
  return make_function_nep(std::move(spec));
}

double min_gap(const VectorXcd& values) {
  double gap = 1e300;
  for (Index i = 0; i < values.size(); ++i) {
    for (Index j = i + 1; j < values.size(); ++j) gap = std::min(gap, std::abs(values(i) - values(j)));
  }
  return gap;
}

}  // namespace

TEST_CASE("starting triplet for an empty pair") {
  const auto nep = make_diag_toy<double>();
  const auto ctx = DeflationContext<double>::empty(2);
  MatrixXcd m1 = MatrixXcd::Zero(2, 2);
  m1(0, 0) = 2.0;
  m1(1, 1) = 0.1;
  const auto t = starting_triplet<double>(*nep, ctx, cd(1.9), VectorXcd::Unit(2, 1), m1, MatrixXcd(2, 0));
  CHECK((t.v - VectorXcd::Unit(2, 1)).norm() < 1e-15);
  CHECK(t.lambda == cd(1.9));
  CHECK(t.u.size() == 0);
  CHECK_THROWS_AS(starting_triplet<double>(*nep, ctx, cd(1.9), VectorXcd::Unit(2, 0), m1, MatrixXcd(2, 0)),
                  NumericalError);
}

TEST_CASE("a locked eigenvalue is not found again") {
  const auto nep = make_diag_toy<double>();
  auto pair = extend_pair<double>(InvariantPair<double>::empty(2), VectorXcd::Unit(2, 0), VectorXcd(0), cd(2.0));
  const auto ctx = pair.context();
  const cd sigma(4.8);  // 0.2 beats the 0.42 of the locked direction
  const VectorXcd c = unit_ones(2);
  const MatrixXcd m1 = nep->assemble(sigma);
  const MatrixXcd u1 = nep->apply_block(sigma, ctx.x * MatrixXcd::Constant(1, 1, 1.0 / (sigma - 2.0)));
  const auto t = starting_triplet<double>(*nep, ctx, sigma, c, m1, u1);
  CHECK(std::abs(ctx.x.col(0).dot(t.v)) < 1e-14);

  // Near the locked eigenvalue the min-modulus eigenvector lies in span(X) and projects to zero.
  const cd near(1.9);
  const MatrixXcd u_near = nep->apply_block(near, ctx.x * MatrixXcd::Constant(1, 1, 1.0 / (near - 2.0)));
  CHECK_THROWS_AS(starting_triplet<double>(*nep, ctx, near, c, nep->assemble(near), u_near), NumericalError);
  CHECK(std::abs(c.dot(t.v) - 1.0) < 1e-14);

  MatrixXcd w1(2, 2);
  w1 << u1, starting_f<double>(*nep, ctx, sigma, t.v, t.u, u1);
  MatrixXcd cc(2, 2);
  cc << ctx.x, c;
  const auto state = init_structured<double>(*nep, ctx, t.v, t.u, t.lambda, MatrixXcd(m1.inverse()), w1, cc);
  const auto res = solve_structured<double>(state, *nep, ctx, SolverOptions{});
  REQUIRE(res.history.converged);
  // Dense spectrum of the linear pencil: {2, 5}.
  CHECK(std::abs(res.state.lambda - 5.0) < 1e-10);
}

TEST_CASE("starting f") {
  const auto diag = make_diag_toy<double>();
  const auto empty = DeflationContext<double>::empty(2);
  const VectorXcd f = starting_f<double>(*diag, empty, cd(1.9), VectorXcd::Unit(2, 0), VectorXcd(0), MatrixXcd(2, 0));
  CHECK((f + VectorXcd::Unit(2, 0)).norm() < 1e-9);

  const auto qep = make_random_qep<double>(6, 21);
  const auto fd_qep = strip_derivative(qep);
  const auto ctx6 = DeflationContext<double>::empty(6);
  const VectorXcd v = testing::random_vector(6, 22);
  const cd sigma(0.3, 0.1);
  const VectorXcd analytic = starting_f<double>(*qep, ctx6, sigma, v, VectorXcd(0), MatrixXcd(6, 0));
  const VectorXcd fd = starting_f<double>(*fd_qep, ctx6, sigma, v, VectorXcd(0), MatrixXcd(6, 0));
  CHECK((analytic - qep->apply_derivative(sigma, v)).norm() == 0.0);
  CHECK((analytic - fd).norm() <= 1e-6 * analytic.norm());
}

TEST_CASE("extend_pair on the diagonal toy") {
  auto pair = extend_pair<double>(InvariantPair<double>::empty(2), VectorXcd::Unit(2, 0) * 3.0, VectorXcd(0), cd(2.0));
  CHECK((pair.x - MatrixXcd::Identity(2, 1)).norm() < 1e-15);
  CHECK(pair.s(0, 0) == cd(2.0));
  pair = extend_pair<double>(std::move(pair), VectorXcd::Unit(2, 1), VectorXcd::Zero(1), cd(5.0));
  MatrixXcd s_expected = MatrixXcd::Zero(2, 2);
  s_expected(0, 0) = 2.0;
  s_expected(1, 1) = 5.0;
  CHECK((pair.s - s_expected).norm() == 0.0);
  CHECK((pair.x - MatrixXcd::Identity(2, 2)).norm() == 0.0);

  const auto nep = make_diag_toy<double>();
  CHECK(invariance_residual(*nep, pair) <= 1e-14);
  CHECK(invariance_residual(*nep, InvariantPair<double>::empty(2)) == 0.0);

  auto bad = pair;
  bad.s(1, 1) += 1e-3;
  CHECK(invariance_residual(*nep, bad) > 1e-6);
  CHECK(invariance_residual(*nep, bad) == doctest::Approx(1e-3).epsilon(1e-6));

  CHECK_THROWS_AS(extend_pair<double>(pair, VectorXcd::Zero(2), VectorXcd::Zero(2), cd(1.0)), InputError);
}

TEST_CASE("conjugate extension") {
  auto pair = extend_pair<double>(InvariantPair<double>::empty(2), VectorXcd::Unit(2, 0), VectorXcd(0), cd(2.0));
  auto same = conjugate_extend<double>(pair, VectorXcd::Unit(2, 0), cd(2.0));
  CHECK_FALSE(same.added);
  CHECK(same.pair.size() == 1);

  VectorXcd v(2);
  v << 1.0, cd(0, 1);
  v /= std::sqrt(2.0);
  const cd lambda(2.0, 1.0);
  auto first = extend_pair<double>(InvariantPair<double>::empty(2), v, VectorXcd(0), lambda);
  const auto ext = conjugate_extend<double>(first, v, lambda);
  CHECK(ext.added);
  CHECK_FALSE(ext.span_warning);
  REQUIRE(ext.pair.size() == 2);
  CHECK(ext.pair.s(0, 0) == lambda);
  CHECK(ext.pair.s(1, 1) == std::conj(lambda));
  CHECK((ext.pair.x.adjoint() * ext.pair.x - MatrixXcd::Identity(2, 2)).norm() < 1e-14);
  CHECK(ext.pair.info[1].conjugate);
}

TEST_CASE("deflation on the diagonal toy finds both eigenvalues") {
  const auto nep = make_diag_toy<double>();
  const auto res = deflated_broyden<double>(*nep, cd(1.9), unit_ones(2), 2);
  REQUIRE(res.complete);
  std::vector<double> values{res.pair.s(0, 0).real(), res.pair.s(1, 1).real()};
  std::sort(values.begin(), values.end());
  CHECK(values[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(values[1] == doctest::Approx(5.0).epsilon(1e-12));
  const auto report = invariance_report(*nep, res.pair);
  for (double r : report.column_residuals) CHECK(r <= 1e-10);
}

TEST_CASE("one locked column on each gallery problem") {
  SolverOptions solver;
  solver.damping = 1.0;
  const std::vector<std::pair<NepPtr<double>, cd>> cases{
      {make_diag_toy<double>(), cd(1.9)},
      {make_random_qep<double>(10, 3), cd(0.0)},
      {make_qdep<double>(20, 4), cd(0.0)},
      {make_dep_double<double>(), cd(0.0, 8.0)}};
  for (const auto& [nep, sigma] : cases) {
    DeflationOptions<double> opts;
    opts.solver = solver;
    opts.use_conjugate_symmetry = false;
    const auto res = deflated_broyden<double>(*nep, sigma, unit_ones(nep->size()), 1, opts);
    REQUIRE(res.complete);
    CHECK(res.pair.size() == 1);
    CHECK(invariance_residual(*nep, res.pair) <= 10 * solver.tol);
  }
}

TEST_CASE("property: quadratic gallery pairs stay invariant after every extension") {
  const auto nep = make_random_qep<double>(12, 31);
  DeflationOptions<double> opts;
  opts.solver.damping = 1.0;
  const auto res = deflated_broyden<double>(*nep, cd(0.0), unit_ones(12), 4, opts);
  REQUIRE(res.complete);
  for (Index p = 1; p <= res.pair.size(); ++p) {
    InvariantPair<double> prefix;
    prefix.x = res.pair.x.leftCols(p);
    prefix.s = res.pair.s.topLeftCorner(p, p);
    prefix.info.assign(res.pair.info.begin(), res.pair.info.begin() + p);
    CHECK(invariance_residual(*nep, prefix) <= 1e-9);
  }
}

TEST_CASE("property: delay problem with conjugate pairs") {
  const auto nep = make_qdep<double>(40, 16);
  REQUIRE(nep->conjugate_symmetric());
  DeflationOptions<double> opts;
  opts.solver.damping = 1.0;
  const auto res = deflated_broyden<double>(*nep, cd(0.0), unit_ones(40), 6, opts);
  REQUIRE(res.complete);
  CHECK(res.pair.size() == 6);
  CHECK(invariance_residual(*nep, res.pair) <= 1e-8);
  CHECK(min_gap(res.pair.eigenvalues()) > 1e-6);
  CHECK((res.pair.x.adjoint() * res.pair.x - MatrixXcd::Identity(6, 6)).norm() <= 1e-10);

  // Conjugates are appended without a solve.
  std::size_t conjugates = 0;
  for (const auto& info : res.pair.info) conjugates += info.conjugate ? 1 : 0;
  CHECK(conjugates > 0);
  std::size_t solves = 0;
  for (const auto& h : res.histories) solves += h.converged ? 1 : 0;
  CHECK(solves + conjugates == 6);
  for (Index j = 0; j < 6; ++j) {
    if (!res.pair.info[j].conjugate) continue;
    bool partner = false;
    for (Index i = 0; i < j; ++i) partner |= std::abs(res.pair.s(i, i) - std::conj(res.pair.s(j, j))) < 1e-12;
    CHECK(partner);
  }
}

TEST_CASE("property: no reconvergence and the U1 action budget") {
  const auto nep = make_qdep<double>(30, 4);
  REQUIRE(nep->has_derivative());
  DeflationOptions<double> opts;
  opts.solver.damping = 1.0;
  opts.use_conjugate_symmetry = false;
  opts.m1 = nep->assemble(0.0);
  nep->reset_action_count();
  const auto res = deflated_broyden<double>(*nep, cd(0.0), unit_ones(30), 5, opts);
  REQUIRE(res.complete);
  REQUIRE(res.histories.size() == 5);
  CHECK(min_gap(res.pair.eigenvalues()) > 1e-6);
  // Extension p costs p actions for U1, one for r_1 and one per step.
  long expected = 0;
  for (Index p = 0; p < 5; ++p) expected += p + 1 + static_cast<long>(res.histories[p].size());
  CHECK(nep->action_count() == expected);
  for (const auto& info : res.pair.info) CHECK(info.residual <= opts.solver.tol);
}

TEST_CASE("the double eigenvalue is found twice") {
  const auto nep = make_dep_double<double>();
  const auto data = dep_double_data();
  DeflationOptions<double> opts;
  opts.use_conjugate_symmetry = false;
  opts.solver.tol = 1e-7;
  const auto res = deflated_broyden<double>(*nep, cd(0.0, 8.0), unit_ones(2), 2, opts);
  REQUIRE(res.complete);
  // Error ~ sqrt(tol) at a double root.
  CHECK(std::abs(res.pair.s(0, 0) - data.lambda) < 1e-3);
  CHECK(std::abs(res.pair.s(1, 1) - data.lambda) < 1e-3);
}

TEST_CASE("collided columns are checked by a contour sum") {
  const auto nep = make_diag_toy<double>();
  InvariantPair<double> pair = InvariantPair<double>::empty(2);
  pair = extend_pair<double>(std::move(pair), VectorXcd::Unit(2, 0), VectorXcd(0), cd(2.0));
  pair = extend_pair<double>(std::move(pair), VectorXcd::Unit(2, 1), VectorXcd::Zero(1), cd(2.0));
  const auto report = invariance_report(*nep, pair);
  REQUIRE(report.collided_columns.size() == 1);
  CHECK(report.collided_columns[0] == 1);
  // e_2 is not invariant for eigenvalue 2: M(2) e_2 = 3 e_2.
  CHECK(report.max_collided_residual > 1.0);
}

TEST_CASE("full span stops with a warning") {
  const auto nep = make_diag_toy<double>();
  const auto res = deflated_broyden<double>(*nep, cd(1.9), unit_ones(2), 3);
  CHECK_FALSE(res.complete);
  CHECK(res.pair.size() == 2);
  REQUIRE_FALSE(res.warnings.empty());
  CHECK(res.warnings.back().find("whole space") != std::string::npos);
  CHECK_THROWS_AS(deflated_broyden<double>(*nep, cd(1.9), unit_ones(2), 0), InputError);
}
