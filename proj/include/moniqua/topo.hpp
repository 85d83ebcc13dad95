#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "moniqua/rng.hpp"

namespace moniqua {

struct SpectralQuantities {
  double rho;      // max{|lambda2|, |lambdaN|}
  double lambda2;  // second-largest eigenvalue
  double lambdaN;  // smallest eigenvalue
  double phi;      // smallest strictly positive entry
};

// Validates symmetry and double stochasticity of a raw matrix and computes
// its spectral quantities. Violations name the offending row or column.
SpectralQuantities spectral_quantities(const std::vector<double>& w, int n);

// Symmetric doubly stochastic mixing matrix with cached spectral quantities.
// Construction rejects rho >= 1 (no mixing). Immutable after construction and
// safe to share read-only across workers.
class CommMatrix {
public:
  static CommMatrix from_weights(int n, std::vector<double> w);

  int n() const { return n_; }
  double operator()(int i, int j) const { return w_[static_cast<std::size_t>(i) * n_ + j]; }
  const std::vector<double>& weights() const { return w_; }
  double rho() const { return rho_; }
  double lambda2() const { return lambda2_; }
  double lambdaN() const { return lambdaN_; }
  double phi() const { return phi_; }
  const std::vector<int>& neighbors(int i) const { return neighbors_[i]; }

private:
  CommMatrix() = default;
  friend CommMatrix ring_matrix(int, bool);
  friend CommMatrix complete_matrix(int);
  friend CommMatrix slack_matrix(const CommMatrix&, double);

  void finalize_neighbors();

  int n_ = 0;
  std::vector<double> w_;
  double rho_ = 0, lambda2_ = 0, lambdaN_ = 0, phi_ = 0;
  std::vector<std::vector<int>> neighbors_;
};

// Ring of n >= 3 workers. lazy=false: W = (I + P + P^T)/3 with eigenvalues
// (1 + 2cos(2 pi k/n))/3; lazy=true: W = I/2 + (P + P^T)/4 with eigenvalues
// 1/2 + cos(2 pi k/n)/2, hence lambdaN >= 0. Spectral quantities are the
// analytic circulant values.
CommMatrix ring_matrix(int n, bool lazy);

// All entries 1/n; rho = 0. Requires n >= 2.
CommMatrix complete_matrix(int n);

// gamma*W + (1-gamma)*I for gamma in (0,1]. Eigenvalues map affinely, so
// rho_bar derives from gamma*lambda + (1-gamma).
CommMatrix slack_matrix(const CommMatrix& m, double gamma);

// Identity except rows/columns i and j, where the four entries are 1/2.
// A single such matrix has rho = 1, which is why asynchronous schedules are
// judged by window products instead of a spectral gap.
std::vector<double> pair_gossip_matrix(int n, int i, int j);

// log(4n)/(1 - rho). The log base defaults to natural; base 2 is available
// for sensitivity checks.
double mixing_time_bound(double rho, int n, double log_base = 0.0 /* 0 => e */);

// Rule producing one gossip event per step plus the asserted window size in
// events over which products contract to uniform averaging.
struct GossipSchedule {
  int n = 0;
  int tmix = 1;
  // Left-multiplies the column-tracking matrix by W_k: cols is n x ncols
  // row-major, rows indexed by worker.
  std::function<void(std::uint64_t k, std::vector<double>& cols, int ncols)> apply_event;
  // Present for pair-gossip schedules; used by the event-driven algorithms.
  std::function<std::pair<int, int>(std::uint64_t k)> pair_at;

  static GossipSchedule uniform_ring_pairs(int n, std::uint64_t seed, int tmix = 1);
  static GossipSchedule fixed_pair(int n, int i, int j, int tmix = 1);
  static GossipSchedule fixed_matrix(const CommMatrix& m, int tmix);
};

struct MixingReport {
  bool pass = false;
  double max_distance = 0.0;  // max_i l1 distance of lifted basis vectors to 1/n
  std::uint64_t worst_start = 0;
  int worst_basis = 0;
  int windows_checked = 0;
  int tmix = 0;
};

// Verifies ||(prod_{q=a}^{a+tmix-1} W_q) e_i - 1/n||_1 <= 1/2 over sampled
// window starts within [0, horizon - tmix] and all basis vectors.
MixingReport empirical_mixing_check(const GossipSchedule& schedule, std::uint64_t horizon,
                                    int max_windows = 2000);

// Smallest window size passing empirical_mixing_check over `trials` sampled
// windows (binary search; doubling upper bound).
int calibrate_tmix(const GossipSchedule& schedule, int trials = 10000, int max_window = 4096);

}  // namespace moniqua
