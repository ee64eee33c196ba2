#pragma once

// Benchmark NEPs: small dense problems with closed-form data and monodromy
// problems M(lambda) v = p(tau) - v defined by integrating
//
//   E p'(t) = (A(t) + B(t) e^{-lambda tau} - lambda E) p(t),   p(0) = v.

#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <string>

#include <Eigen/Sparse>

#include "nepbroyden/nep.hpp"

namespace nepbroyden {

using SparseReal = Eigen::SparseMatrix<double>;

/// M(lambda) = diag(2, 5) - lambda I.
template <typename Real>
NepPtr<Real> make_diag_toy();

/// M(lambda) = A0 + lambda A1 + lambda^2 A2 with standard complex normal entries.
template <typename Real>
NepPtr<Real> make_random_qep(Index n, std::uint64_t seed);

/// M(lambda) = -lambda^2 I + A0 + A1 e^{-lambda} with real A0, A1 whose entries
/// are N(0, 1/n), so both have spectral radius near one.
template <typename Real>
NepPtr<Real> make_qdep(Index n, std::uint64_t seed);

/// M(lambda) = -lambda I + A0 + A1 e^{-lambda} (n = 2) with a defective double
/// eigenvalue at 3 pi i.
template <typename Real>
NepPtr<Real> make_dep_double();

/// Eigenvalue and Jordan chain of make_dep_double:
/// M(l) v0 = 0 and M(l) v1 + M'(l) v0 = 0.
struct DepDoubleData {
  std::complex<double> lambda;
  Eigen::VectorXcd v0;
  Eigen::VectorXcd v1;
};
DepDoubleData dep_double_data();

enum class OdeScheme { Rk4, ImplicitEuler, Trapezoidal };

OdeScheme parse_scheme(const std::string& name);
std::string scheme_name(OdeScheme scheme);

struct OdeNepConfig {
  Index n = 1;
  int steps = 100;  // N
  OdeScheme scheme = OdeScheme::Rk4;
  double tau = 1;
  std::function<SparseReal(double)> a;
  std::function<SparseReal(double)> b;
  std::optional<SparseReal> mass;  // E; identity when absent
};

/// Coefficient provider returning the same matrix for every t.
std::function<SparseReal(double)> constant_coefficient(const Eigen::MatrixXd& m);

/// Monodromy NEP. Coefficients are sampled once, at the stage times of the
/// configured scheme. Blocks of vectors are integrated together, so implicit
/// schemes factor each stage matrix once per block.
template <typename Real>
class OdeNep final : public NepProblem<Real> {
 public:
  using typename NepProblem<Real>::Scalar;
  using typename NepProblem<Real>::Vector;
  using typename NepProblem<Real>::Matrix;
  using Sparse = Eigen::SparseMatrix<Scalar>;

  explicit OdeNep(OdeNepConfig cfg);

  const OdeNepConfig& config() const { return cfg_; }
  std::shared_ptr<const OdeNep> with_steps(int steps) const;

 protected:
  Vector do_apply(Scalar lambda, const Vector& w) const override;
  Matrix do_apply_block(Scalar lambda, const Matrix& w) const override;

 private:
  Matrix rhs(std::size_t j, Scalar lambda, Scalar delay, const Matrix& p) const;

  OdeNepConfig cfg_;
  std::vector<Sparse> a_;  // at t = j h / 2 (RK4) or j h (implicit)
  std::vector<Sparse> b_;
  Sparse mass_;
  bool has_mass_ = false;
  Eigen::SparseLU<Sparse> mass_lu_;
};

template <typename Real>
std::shared_ptr<const OdeNep<Real>> make_tpdde(OdeNepConfig cfg);

/// M(sigma) assembled column by column from a copy of the problem with
/// n_coarse steps. *coarse_actions receives the number of actions spent.
template <typename Real>
ComplexMatrix<Real> approx_matrix(const OdeNep<Real>& nep, Complex<Real> sigma, int n_coarse,
                                  long* coarse_actions = nullptr);

struct MillingConfig {
  double a_p = 1;
  double m = 1;
  double omega0 = 1;
  double zeta = 1;
  double tau = 1;
  double k_r = 1;
  double k_t = 1;
  // PDE-coupled variant
  int n_space = 5;
  double eps = 1;
  double d = 1;
  double area = 1;
  bool dxx_inverse_h2 = false;  // scale D_xx by 1/h^2 instead of 1/h
  // Stiffness and damping rows as -eps P D_xx, -d P D_xx. Anti-dissipative since
  // D_xx is negative semidefinite; the default uses +eps P D_xx, +d P D_xx.
  bool literal_signs = false;
  std::optional<SparseReal> mass;  // P^{-1}; identity when absent
};

/// H(t - tau/2) (sin^2(phi) K_R + cos(phi) sin(phi) K_T), phi = 2 pi t / tau, H(0) = 1.
double milling_w(double t, const MillingConfig& cfg);

/// (1/h) tridiag(1, -2, 1) with h = 1/n, or (1/h^2) tridiag(1, -2, 1).
SparseReal milling_dxx(int n_space, bool inverse_h2 = false);

/// A(t), B(t) of the one degree of freedom model (n = 2).
SparseReal milling_1dof_a(double t, const MillingConfig& cfg);
SparseReal milling_1dof_b(double t, const MillingConfig& cfg);

template <typename Real>
std::shared_ptr<const OdeNep<Real>> make_milling_1dof(const MillingConfig& cfg, int steps,
                                                      OdeScheme scheme = OdeScheme::Rk4);

/// PDE-coupled model, n = 2 n_space + 2. Only implicit schemes are accepted.
template <typename Real>
std::shared_ptr<const OdeNep<Real>> make_milling_pde(const MillingConfig& cfg, int steps,
                                                     OdeScheme scheme = OdeScheme::Trapezoidal);

/// Flat "key = value" lines; '#' and ';' start comments.
std::map<std::string, std::string> parse_flat_config(std::istream& in);
std::map<std::string, std::string> read_flat_config(const std::string& path);

/// Overrides fields of cfg from keys a_p, m, omega0, zeta, tau, k_r, k_t,
/// n_space, eps, d, area, dxx_inverse_h2, literal_signs. Unknown keys are left for the caller.
void apply_milling_config(const std::map<std::string, std::string>& kv, MillingConfig& cfg);

}  // namespace nepbroyden
