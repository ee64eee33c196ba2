#pragma once

#include <chrono>
#include <complex>
#include <limits>
#include <vector>

namespace nepbroyden {

struct IterationRecord {
  int k = 0;
  double residual_norm = 0;
  std::complex<double> lambda;
  double wall_time_s = 0;
  // ||C^H v_k - b2|| / ||v_k||; zero for methods without a constraint block.
  double constraint_violation = 0;
};

struct ConvergenceHistory {
  std::vector<IterationRecord> records;
  bool converged = false;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

struct SolverOptions {
  double tol = 1e-10;
  int maxit = 100;
  // Step-length cap t; infinity means undamped.
  double damping = std::numeric_limits<double>::infinity();
  // Recompute Z = T W from its definition every this many structured steps (0 disables).
  int z_refresh_interval = 50;
};

/// Seconds since construction.
class WallClock {
 public:
  WallClock() : start_(std::chrono::steady_clock::now()) {}
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace nepbroyden
