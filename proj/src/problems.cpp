#include "nepbroyden/problems.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace nepbroyden {

namespace {

// M(lambda) = sum_k f_k(lambda) A_k; identity terms skip the matrix product.
template <typename Real>
class AffineNep final : public NepProblem<Real> {
 public:
  using typename NepProblem<Real>::Scalar;
  using typename NepProblem<Real>::Vector;
  using typename NepProblem<Real>::Matrix;
  using ScalarFn = std::function<Scalar(Scalar)>;

  struct Term {
    Matrix a;  // empty for the identity
    ScalarFn f;
    ScalarFn df;
  };

  AffineNep(Index n, bool conj_sym, std::vector<Term> terms)
      : NepProblem<Real>(n, conj_sym), terms_(std::move(terms)) {}

  bool has_derivative() const override { return true; }
  bool can_assemble() const override { return true; }

 protected:
  Vector do_apply(Scalar lambda, const Vector& w) const override { return combine(lambda, w, false); }
  Vector do_apply_derivative(Scalar lambda, const Vector& w) const override {
    return combine(lambda, w, true);
  }
  Matrix do_apply_block(Scalar lambda, const Matrix& w) const override {
    Matrix out = Matrix::Zero(w.rows(), w.cols());
    for (const auto& t : terms_) {
      const Scalar f = t.f(lambda);
      if (t.a.size() == 0) {
        out += f * w;
      } else {
        out.noalias() += f * (t.a * w);
      }
    }
    return out;
  }
  Matrix do_assemble(Scalar sigma) const override {
    const Index n = this->size();
    Matrix out = Matrix::Zero(n, n);
    for (const auto& t : terms_) {
      const Scalar f = t.f(sigma);
      if (t.a.size() == 0) {
        out.diagonal().array() += f;
      } else {
        out += f * t.a;
      }
    }
    return out;
  }

 private:
  Vector combine(Scalar lambda, const Vector& w, bool derivative) const {
    Vector out = Vector::Zero(w.size());
    for (const auto& t : terms_) {
      const Scalar f = derivative ? t.df(lambda) : t.f(lambda);
      if (t.a.size() == 0) {
        out += f * w;
      } else {
        out.noalias() += f * (t.a * w);
      }
    }
    return out;
  }

  std::vector<Term> terms_;
};

template <typename Real>
using Term = typename AffineNep<Real>::Term;

template <typename Real>
Term<Real> term(const Eigen::MatrixXcd& a, typename AffineNep<Real>::ScalarFn f,
                typename AffineNep<Real>::ScalarFn df) {
  return Term<Real>{a.cast<Complex<Real>>(), std::move(f), std::move(df)};
}

template <typename Real>
Term<Real> identity_term(typename AffineNep<Real>::ScalarFn f, typename AffineNep<Real>::ScalarFn df) {
  return Term<Real>{ComplexMatrix<Real>(), std::move(f), std::move(df)};
}

Eigen::MatrixXcd complex_normal(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  Eigen::MatrixXcd a(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) a(i, j) = {normal(rng), normal(rng)};
  }
  return a;
}

Eigen::MatrixXd real_normal(Index n, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::MatrixXd a(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) a(i, j) = normal(rng);
  }
  return a;
}

// -lambda I + A0 + A1 e^{-tau lambda}
template <typename Real>
std::vector<Term<Real>> dep_terms(const Eigen::MatrixXd& a0, const Eigen::MatrixXd& a1, double tau) {
  using S = Complex<Real>;
  const Real t = static_cast<Real>(tau);
  return {identity_term<Real>([](S l) { return -l; }, [](S) { return S(-1); }),
          term<Real>(a0.cast<std::complex<double>>(), [](S) { return S(1); }, [](S) { return S(0); }),
          term<Real>(a1.cast<std::complex<double>>(), [t](S l) { return std::exp(-t * l); },
                     [t](S l) { return -t * std::exp(-t * l); })};
}

}  // namespace

template <typename Real>
NepPtr<Real> make_diag_toy() {
  using S = Complex<Real>;
  Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(2, 2);
  d(0, 0) = 2;
  d(1, 1) = 5;
  std::vector<Term<Real>> terms{term<Real>(d, [](S) { return S(1); }, [](S) { return S(0); }),
                                identity_term<Real>([](S l) { return -l; }, [](S) { return S(-1); })};
  return std::make_shared<const AffineNep<Real>>(2, true, std::move(terms));
}

template <typename Real>
NepPtr<Real> make_random_qep(Index n, std::uint64_t seed) {
  using S = Complex<Real>;
  if (n < 1) throw InputError("make_random_qep: n must be positive");
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXcd a0 = complex_normal(n, rng);
  const Eigen::MatrixXcd a1 = complex_normal(n, rng);
  const Eigen::MatrixXcd a2 = complex_normal(n, rng);
  std::vector<Term<Real>> terms{term<Real>(a0, [](S) { return S(1); }, [](S) { return S(0); }),
                                term<Real>(a1, [](S l) { return l; }, [](S) { return S(1); }),
                                term<Real>(a2, [](S l) { return l * l; }, [](S l) { return Real(2) * l; })};
  return std::make_shared<const AffineNep<Real>>(n, false, std::move(terms));
}

template <typename Real>
NepPtr<Real> make_qdep(Index n, std::uint64_t seed) {
  using S = Complex<Real>;
  if (n < 1) throw InputError("make_qdep: n must be positive");
  std::mt19937_64 rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  const Eigen::MatrixXd a0 = real_normal(n, scale, rng);
  const Eigen::MatrixXd a1 = real_normal(n, scale, rng);
  std::vector<Term<Real>> terms{
      identity_term<Real>([](S l) { return -l * l; }, [](S l) { return Real(-2) * l; }),
      term<Real>(a0.cast<std::complex<double>>(), [](S) { return S(1); }, [](S) { return S(0); }),
      term<Real>(a1.cast<std::complex<double>>(), [](S l) { return std::exp(-l); },
                 [](S l) { return -std::exp(-l); })};
  return std::make_shared<const AffineNep<Real>>(n, true, std::move(terms));
}

// With B = A0 - A1 = 3 pi [[0, 1], [-1, 0]] the matrix M(3 pi i) = B - 3 pi i I
// annihilates v0 = (1, i), and M'(3 pi i) = A1 - I maps v0 to conj(v0), which lies
// in the range of M(3 pi i). Hence a Jordan chain of length two.
template <typename Real>
NepPtr<Real> make_dep_double() {
  const double w = 3 * std::numbers::pi;
  Eigen::MatrixXd a0(2, 2);
  a0 << 2, w, -w, 0;
  Eigen::MatrixXd a1(2, 2);
  a1 << 2, 0, 0, 0;
  return std::make_shared<const AffineNep<Real>>(2, true, dep_terms<Real>(a0, a1, 1.0));
}

DepDoubleData dep_double_data() {
  DepDoubleData d;
  d.lambda = {0.0, 3 * std::numbers::pi};
  d.v0 = Eigen::VectorXcd(2);
  d.v0 << 1.0, std::complex<double>(0, 1);
  d.v1 = Eigen::VectorXcd(2);
  d.v1 << 0.0, -1.0 / (3 * std::numbers::pi);
  return d;
}

OdeScheme parse_scheme(const std::string& name) {
  if (name == "rk4") return OdeScheme::Rk4;
  if (name == "implicit-euler" || name == "euler") return OdeScheme::ImplicitEuler;
  if (name == "trapezoidal" || name == "trapezoid") return OdeScheme::Trapezoidal;
  throw InputError("unknown time-stepping scheme: " + name);
}

std::string scheme_name(OdeScheme scheme) {
  switch (scheme) {
    case OdeScheme::Rk4:
      return "rk4";
    case OdeScheme::ImplicitEuler:
      return "implicit-euler";
    case OdeScheme::Trapezoidal:
      return "trapezoidal";
  }
  return "unknown";
}

std::function<SparseReal(double)> constant_coefficient(const Eigen::MatrixXd& m) {
  SparseReal s = m.sparseView();
  return [s](double) { return s; };
}

template <typename Real>
OdeNep<Real>::OdeNep(OdeNepConfig cfg) : NepProblem<Real>(cfg.n, true), cfg_(std::move(cfg)) {
  if (cfg_.n < 1) throw InputError("OdeNep: n must be positive");
  if (cfg_.steps < 1) throw InputError("OdeNep: N must be at least 1");
  if (!(cfg_.tau > 0)) throw InputError("OdeNep: tau must be positive");
  if (!cfg_.a || !cfg_.b) throw InputError("OdeNep: coefficient providers missing");
  const bool rk4 = cfg_.scheme == OdeScheme::Rk4;
  const int samples = rk4 ? 2 * cfg_.steps + 1 : cfg_.steps + 1;
  const double dt = cfg_.tau / (rk4 ? 2.0 * cfg_.steps : cfg_.steps);
  a_.reserve(samples);
  b_.reserve(samples);
  for (int j = 0; j < samples; ++j) {
    const double t = j * dt;
    SparseReal a = cfg_.a(t);
    SparseReal b = cfg_.b(t);
    if (a.rows() != cfg_.n || a.cols() != cfg_.n || b.rows() != cfg_.n || b.cols() != cfg_.n) {
      throw InputError("OdeNep: coefficient has wrong dimension");
    }
    a_.push_back(a.cast<Scalar>());
    b_.push_back(b.cast<Scalar>());
  }
  if (cfg_.mass) {
    if (cfg_.mass->rows() != cfg_.n || cfg_.mass->cols() != cfg_.n) {
      throw InputError("OdeNep: mass matrix has wrong dimension");
    }
    has_mass_ = true;
    mass_ = cfg_.mass->cast<Scalar>();
    mass_.makeCompressed();
    mass_lu_.compute(mass_);
    if (mass_lu_.info() != Eigen::Success) throw NumericalError("singular matrix");
  } else {
    mass_.resize(cfg_.n, cfg_.n);
    mass_.setIdentity();
  }
}

template <typename Real>
std::shared_ptr<const OdeNep<Real>> OdeNep<Real>::with_steps(int steps) const {
  OdeNepConfig cfg = cfg_;
  cfg.steps = steps;
  return std::make_shared<const OdeNep<Real>>(std::move(cfg));
}

template <typename Real>
typename OdeNep<Real>::Matrix OdeNep<Real>::rhs(std::size_t j, Scalar lambda, Scalar delay,
                                                const Matrix& p) const {
  Matrix f = a_[j] * p;
  f.noalias() += delay * (b_[j] * p);
  if (has_mass_) f = mass_lu_.solve(f);
  return f - lambda * p;
}

template <typename Real>
typename OdeNep<Real>::Vector OdeNep<Real>::do_apply(Scalar lambda, const Vector& w) const {
  return do_apply_block(lambda, Matrix(w));
}

template <typename Real>
typename OdeNep<Real>::Matrix OdeNep<Real>::do_apply_block(Scalar lambda, const Matrix& w) const {
  const Real h = static_cast<Real>(cfg_.tau / cfg_.steps);
  const Scalar delay = std::exp(-lambda * static_cast<Real>(cfg_.tau));
  Matrix p = w;
  if (cfg_.scheme == OdeScheme::Rk4) {
    for (int k = 0; k < cfg_.steps; ++k) {
      const std::size_t j = 2 * static_cast<std::size_t>(k);
      const Matrix k1 = rhs(j, lambda, delay, p);
      const Matrix k2 = rhs(j + 1, lambda, delay, p + (h / 2) * k1);
      const Matrix k3 = rhs(j + 1, lambda, delay, p + (h / 2) * k2);
      const Matrix k4 = rhs(j + 2, lambda, delay, p + h * k3);
      p += (h / 6) * (k1 + Real(2) * k2 + Real(2) * k3 + k4);
    }
    return p - w;
  }

  // E p_{k+1} - theta h K_{k+1} p_{k+1} = E p_k + (1 - theta) h K_k p_k,
  // K_j = A_j + e^{-lambda tau} B_j - lambda E.
  const Real theta = cfg_.scheme == OdeScheme::Trapezoidal ? Real(0.5) : Real(1);
  auto stage = [&](std::size_t j) -> Sparse { return a_[j] + delay * b_[j] - lambda * mass_; };
  Eigen::SparseLU<Sparse> lu;
  Sparse k_prev = stage(0);
  for (int k = 0; k < cfg_.steps; ++k) {
    const Sparse k_next = stage(static_cast<std::size_t>(k) + 1);
    Matrix right = mass_ * p;
    if (theta < Real(1)) right.noalias() += ((Real(1) - theta) * h) * (k_prev * p);
    Sparse left = mass_ - (theta * h) * k_next;
    left.makeCompressed();
    lu.compute(left);
    if (lu.info() != Eigen::Success) throw NumericalError("singular matrix");
    p = lu.solve(right);
    k_prev = k_next;
  }
  return p - w;
}

template <typename Real>
std::shared_ptr<const OdeNep<Real>> make_tpdde(OdeNepConfig cfg) {
  return std::make_shared<const OdeNep<Real>>(std::move(cfg));
}

template <typename Real>
ComplexMatrix<Real> approx_matrix(const OdeNep<Real>& nep, Complex<Real> sigma, int n_coarse,
                                  long* coarse_actions) {
  if (n_coarse < 1) throw InputError("approx_matrix: N_coarse must be at least 1");
  const auto coarse = nep.with_steps(n_coarse);
  const ComplexMatrix<Real> m = coarse->apply_block(sigma, ComplexMatrix<Real>::Identity(nep.size(), nep.size()));
  if (coarse_actions) *coarse_actions = coarse->action_count();
  return m;
}

double milling_w(double t, const MillingConfig& cfg) {
  if (t < cfg.tau / 2) return 0.0;
  const double phi = 2 * std::numbers::pi * t / cfg.tau;
  const double s = std::sin(phi);
  return s * s * cfg.k_r + std::cos(phi) * s * cfg.k_t;
}

SparseReal milling_dxx(int n_space, bool inverse_h2) {
  if (n_space < 1) throw InputError("milling_dxx: N must be positive");
  const double h = 1.0 / n_space;
  const double scale = inverse_h2 ? 1.0 / (h * h) : 1.0 / h;
  std::vector<Eigen::Triplet<double>> entries;
  for (int i = 0; i < n_space; ++i) {
    entries.emplace_back(i, i, -2 * scale);
    if (i > 0) entries.emplace_back(i, i - 1, scale);
    if (i + 1 < n_space) entries.emplace_back(i, i + 1, scale);
  }
  SparseReal d(n_space, n_space);
  d.setFromTriplets(entries.begin(), entries.end());
  return d;
}

SparseReal milling_1dof_a(double t, const MillingConfig& cfg) {
  const double cut = cfg.a_p * milling_w(t, cfg) / cfg.m;
  Eigen::MatrixXd a(2, 2);
  a << 0, 1, -cfg.omega0 * cfg.omega0 - cut, -2 * cfg.zeta * cfg.omega0;
  return a.sparseView();
}

SparseReal milling_1dof_b(double t, const MillingConfig& cfg) {
  const double cut = cfg.a_p * milling_w(t, cfg) / cfg.m;
  SparseReal b(2, 2);
  if (cut != 0) b.insert(1, 0) = cut;
  return b;
}

namespace {

void validate(const MillingConfig& cfg) {
  if (!(cfg.a_p > 0 && cfg.m > 0 && cfg.omega0 > 0 && cfg.zeta > 0 && cfg.tau > 0)) {
    throw InputError("milling: a_p, m, omega0, zeta, tau must be positive");
  }
  if (cfg.k_r < 0 || cfg.k_t < 0) throw InputError("milling: K_R, K_T must be nonnegative");
}

}  // namespace

template <typename Real>
std::shared_ptr<const OdeNep<Real>> make_milling_1dof(const MillingConfig& cfg, int steps, OdeScheme scheme) {
  validate(cfg);
  OdeNepConfig ode;
  ode.n = 2;
  ode.steps = steps;
  ode.scheme = scheme;
  ode.tau = cfg.tau;
  ode.a = [cfg](double t) { return milling_1dof_a(t, cfg); };
  ode.b = [cfg](double t) { return milling_1dof_b(t, cfg); };
  return make_tpdde<Real>(std::move(ode));
}

// Unknowns y = (q, q_tool, q', q_tool') with q in R^N. The third block row is
// multiplied through by P^{-1}, which becomes the mass matrix of that row.
template <typename Real>
std::shared_ptr<const OdeNep<Real>> make_milling_pde(const MillingConfig& cfg, int steps, OdeScheme scheme) {
  validate(cfg);
  if (scheme == OdeScheme::Rk4) throw InputError("explicit scheme rejected for stiff problem");
  if (!(cfg.eps > 0 && cfg.d > 0 && cfg.area > 0)) throw InputError("milling: eps, d, area must be positive");
  const int ns = cfg.n_space;
  if (ns < 1) throw InputError("milling: n_space must be positive");
  const int n = 2 * ns + 2;
  const int q0 = 0;
  const int tool = ns;
  const int dq0 = ns + 1;
  const int dtool = 2 * ns + 1;
  const int last = ns - 1;

  const SparseReal dxx = milling_dxx(static_cast<int>(ns), cfg.dxx_inverse_h2);
  SparseReal mass_block(ns, ns);
  if (cfg.mass) {
    if (cfg.mass->rows() != ns || cfg.mass->cols() != ns) throw InputError("milling: mass has wrong dimension");
    mass_block = *cfg.mass;
  } else {
    mass_block.setIdentity();
  }

  // Time-independent part of A.
  std::vector<Eigen::Triplet<double>> fixed;
  for (int i = 0; i < ns; ++i) fixed.emplace_back(q0 + i, dq0 + i, 1.0);
  fixed.emplace_back(tool, dtool, 1.0);
  const double sign = cfg.literal_signs ? -1.0 : 1.0;
  for (int k = 0; k < dxx.outerSize(); ++k) {
    for (SparseReal::InnerIterator it(dxx, k); it; ++it) {
      fixed.emplace_back(dq0 + it.row(), q0 + it.col(), sign * cfg.eps * it.value());
      fixed.emplace_back(dq0 + it.row(), dq0 + it.col(), sign * cfg.d * it.value());
    }
  }
  fixed.emplace_back(dtool, tool, -cfg.omega0 * cfg.omega0);
  fixed.emplace_back(dtool, dtool, -2 * cfg.zeta * cfg.omega0);

  // e_N with the P^{-1} of the third row applied to the literal e_N entry.
  Eigen::VectorXd mass_en = mass_block * Eigen::VectorXd::Unit(ns, last);

  OdeNepConfig ode;
  ode.n = n;
  ode.steps = steps;
  ode.scheme = scheme;
  ode.tau = cfg.tau;
  ode.a = [cfg, fixed, mass_en, n, tool, dq0, dtool, last](double t) {
    const double w = cfg.a_p * milling_w(t, cfg);
    std::vector<Eigen::Triplet<double>> e = fixed;
    if (w != 0) {
      e.emplace_back(dq0 + last, last, -w / cfg.area);
      for (int i = 0; i < static_cast<int>(mass_en.size()); ++i) {
        if (mass_en(i) != 0) e.emplace_back(dq0 + i, tool, -w / cfg.area * mass_en(i));
      }
      e.emplace_back(dtool, last, -w / cfg.m);
      e.emplace_back(dtool, tool, -w / cfg.m);
    }
    SparseReal a(n, n);
    a.setFromTriplets(e.begin(), e.end());
    return a;
  };
  ode.b = [cfg, n, tool, dq0, dtool, last](double t) {
    const double w = cfg.a_p * milling_w(t, cfg);
    SparseReal b(n, n);
    if (w != 0) {
      std::vector<Eigen::Triplet<double>> e{{dq0 + last, last, w / cfg.area},
                                            {dq0 + last, tool, w / cfg.area},
                                            {dtool, last, w / cfg.m},
                                            {dtool, tool, w / cfg.m}};
      b.setFromTriplets(e.begin(), e.end());
    }
    return b;
  };
  if (cfg.mass) {
    std::vector<Eigen::Triplet<double>> e;
    for (int i = 0; i <= ns; ++i) e.emplace_back(i, i, 1.0);
    for (int k = 0; k < mass_block.outerSize(); ++k) {
      for (SparseReal::InnerIterator it(mass_block, k); it; ++it) {
        e.emplace_back(dq0 + it.row(), dq0 + it.col(), it.value());
      }
    }
    e.emplace_back(dtool, dtool, 1.0);
    SparseReal mass(n, n);
    mass.setFromTriplets(e.begin(), e.end());
    ode.mass = std::move(mass);
  }
  return make_tpdde<Real>(std::move(ode));
}

std::map<std::string, std::string> parse_flat_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  std::map<std::string, std::string> out;
  for (const auto& [key, node] : tree) {
    if (!node.empty()) throw InputError("config: sections are not supported (" + key + ")");
    out[key] = node.data();
  }
  return out;
}

std::map<std::string, std::string> read_flat_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("config: cannot open " + path);
  return parse_flat_config(in);
}

void apply_milling_config(const std::map<std::string, std::string>& kv, MillingConfig& cfg) {
  auto number = [&](const char* key, double& field) {
    if (auto it = kv.find(key); it != kv.end()) {
      std::size_t used = 0;
      field = std::stod(it->second, &used);
      if (used != it->second.size()) throw InputError(std::string("config: bad number for ") + key);
    }
  };
  number("a_p", cfg.a_p);
  number("m", cfg.m);
  number("omega0", cfg.omega0);
  number("zeta", cfg.zeta);
  number("tau", cfg.tau);
  number("k_r", cfg.k_r);
  number("k_t", cfg.k_t);
  number("eps", cfg.eps);
  number("d", cfg.d);
  number("area", cfg.area);
  if (auto it = kv.find("n_space"); it != kv.end()) cfg.n_space = std::stoi(it->second);
  if (auto it = kv.find("literal_signs"); it != kv.end()) {
    cfg.literal_signs = it->second == "1" || it->second == "true";
  }
  if (auto it = kv.find("dxx_inverse_h2"); it != kv.end()) {
    cfg.dxx_inverse_h2 = it->second == "1" || it->second == "true";
  }
}

#define NEPBROYDEN_INSTANTIATE(Real)                                                                   \
  template NepPtr<Real> make_diag_toy<Real>();                                                         \
  template NepPtr<Real> make_random_qep<Real>(Index, std::uint64_t);                                   \
  template NepPtr<Real> make_qdep<Real>(Index, std::uint64_t);                                         \
  template NepPtr<Real> make_dep_double<Real>();                                                       \
  template class OdeNep<Real>;                                                                         \
  template std::shared_ptr<const OdeNep<Real>> make_tpdde<Real>(OdeNepConfig);                         \
  template ComplexMatrix<Real> approx_matrix<Real>(const OdeNep<Real>&, Complex<Real>, int, long*);   \
  template std::shared_ptr<const OdeNep<Real>> make_milling_1dof<Real>(const MillingConfig&, int, OdeScheme); \
  template std::shared_ptr<const OdeNep<Real>> make_milling_pde<Real>(const MillingConfig&, int, OdeScheme);

NEPBROYDEN_INSTANTIATE(float)
NEPBROYDEN_INSTANTIATE(double)

#undef NEPBROYDEN_INSTANTIATE

}  // namespace nepbroyden
