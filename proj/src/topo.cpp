#include "moniqua/topo.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "moniqua/error.hpp"

namespace moniqua {

namespace {
constexpr double kStochTol = 1e-12;
constexpr double kPi = 3.14159265358979323846;

double min_positive_entry(const std::vector<double>& w) {
  double phi = 0.0;
  bool found = false;
  for (double v : w) {
    if (v > 0.0 && (!found || v < phi)) {
      phi = v;
      found = true;
    }
  }
  return found ? phi : 0.0;
}
}  // namespace

SpectralQuantities spectral_quantities(const std::vector<double>& w, int n) {
  if (n < 1 || w.size() != static_cast<std::size_t>(n) * n)
    fail(Err::InvalidTopology, "matrix shape does not match n");
  for (int i = 0; i < n; ++i) {
    double rowsum = 0.0, colsum = 0.0;
    for (int j = 0; j < n; ++j) {
      rowsum += w[static_cast<std::size_t>(i) * n + j];
      colsum += w[static_cast<std::size_t>(j) * n + i];
      if (std::abs(w[static_cast<std::size_t>(i) * n + j] -
                   w[static_cast<std::size_t>(j) * n + i]) > kStochTol)
        fail(Err::InvalidTopology, "matrix is not symmetric at entry (" + std::to_string(i) +
                                       "," + std::to_string(j) + ")");
    }
    if (std::abs(rowsum - 1.0) > kStochTol)
      fail(Err::InvalidTopology,
           "row " + std::to_string(i) + " sums to " + std::to_string(rowsum) + ", expected 1");
    if (std::abs(colsum - 1.0) > kStochTol)
      fail(Err::InvalidTopology,
           "column " + std::to_string(i) + " sums to " + std::to_string(colsum) + ", expected 1");
  }
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = w[static_cast<std::size_t>(i) * n + j];
  SpectralQuantities s;
  if (n == 1) {
    // no non-principal eigenvalues: a lone worker is trivially at consensus
    s.lambda2 = 0.0;
    s.lambdaN = 0.0;
    s.rho = 0.0;
    s.phi = min_positive_entry(w);
    return s;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  Eigen::VectorXd ev = es.eigenvalues();  // ascending
  s.lambdaN = ev(0);
  s.lambda2 = ev(n - 2);
  s.rho = std::max(std::abs(s.lambda2), std::abs(s.lambdaN));
  s.phi = min_positive_entry(w);
  return s;
}

void CommMatrix::finalize_neighbors() {
  neighbors_.assign(n_, {});
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j)
      if (j != i && (*this)(j, i) > 0.0) neighbors_[i].push_back(j);
}

CommMatrix CommMatrix::from_weights(int n, std::vector<double> w) {
  SpectralQuantities s = spectral_quantities(w, n);
  if (s.rho >= 1.0)
    fail(Err::InvalidTopology,
         "spectral quantity rho = " + std::to_string(s.rho) + " >= 1: matrix does not mix");
  CommMatrix m;
  m.n_ = n;
  m.w_ = std::move(w);
  m.rho_ = s.rho;
  m.lambda2_ = s.lambda2;
  m.lambdaN_ = s.lambdaN;
  m.phi_ = s.phi;
  m.finalize_neighbors();
  return m;
}

CommMatrix ring_matrix(int n, bool lazy) {
  if (n < 3) fail(Err::InvalidTopology, "ring requires n >= 3, got " + std::to_string(n));
  std::vector<double> w(static_cast<std::size_t>(n) * n, 0.0);
  const double self = lazy ? 0.5 : 1.0 / 3.0;
  const double side = lazy ? 0.25 : 1.0 / 3.0;
  for (int i = 0; i < n; ++i) {
    w[static_cast<std::size_t>(i) * n + i] += self;
    w[static_cast<std::size_t>(i) * n + (i + 1) % n] += side;
    w[static_cast<std::size_t>(i) * n + (i + n - 1) % n] += side;
  }
  // circulant eigenvalues; k = 1 gives lambda2, k = floor(n/2) gives lambdaN
  auto eig = [&](int k) {
    const double c = std::cos(2.0 * kPi * k / n);
    return lazy ? 0.5 + 0.5 * c : (1.0 + 2.0 * c) / 3.0;
  };
  CommMatrix m;
  m.n_ = n;
  m.w_ = std::move(w);
  m.lambda2_ = eig(1);
  m.lambdaN_ = eig(n / 2);
  m.rho_ = std::max(std::abs(m.lambda2_), std::abs(m.lambdaN_));
  m.phi_ = min_positive_entry(m.w_);
  if (m.rho_ >= 1.0) fail(Err::InvalidTopology, "ring does not mix");
  // catches construction bugs early; the analytic values must be consistent
  spectral_quantities(m.w_, n);
  m.finalize_neighbors();
  return m;
}

CommMatrix complete_matrix(int n) {
  if (n < 2)
    fail(Err::InvalidTopology, "complete graph requires n >= 2, got " + std::to_string(n));
  CommMatrix m;
  m.n_ = n;
  m.w_.assign(static_cast<std::size_t>(n) * n, 1.0 / n);
  m.lambda2_ = 0.0;
  m.lambdaN_ = 0.0;
  m.rho_ = 0.0;
  m.phi_ = 1.0 / n;
  m.finalize_neighbors();
  return m;
}

CommMatrix slack_matrix(const CommMatrix& src, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0))
    fail(Err::InvalidParameter, "slack ratio gamma must be in (0,1], got " + std::to_string(gamma));
  const int n = src.n();
  std::vector<double> w(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      w[static_cast<std::size_t>(i) * n + j] =
          gamma * src(i, j) + (i == j ? 1.0 - gamma : 0.0);
  CommMatrix m;
  m.n_ = n;
  m.w_ = std::move(w);
  // W and I share eigenvectors, so every eigenvalue maps affinely
  m.lambda2_ = gamma * src.lambda2() + (1.0 - gamma);
  m.lambdaN_ = gamma * src.lambdaN() + (1.0 - gamma);
  m.rho_ = std::max(std::abs(m.lambda2_), std::abs(m.lambdaN_));
  m.phi_ = min_positive_entry(m.w_);
  if (m.rho_ >= 1.0) fail(Err::InvalidTopology, "slack matrix does not mix");
  m.finalize_neighbors();
  return m;
}

std::vector<double> pair_gossip_matrix(int n, int i, int j) {
  if (i == j) fail(Err::InvalidPair, "pair gossip requires two distinct workers");
  if (i < 0 || j < 0 || i >= n || j >= n) fail(Err::InvalidPair, "pair index out of range");
  std::vector<double> w(static_cast<std::size_t>(n) * n, 0.0);
  for (int a = 0; a < n; ++a) w[static_cast<std::size_t>(a) * n + a] = 1.0;
  w[static_cast<std::size_t>(i) * n + i] = 0.5;
  w[static_cast<std::size_t>(j) * n + j] = 0.5;
  w[static_cast<std::size_t>(i) * n + j] = 0.5;
  w[static_cast<std::size_t>(j) * n + i] = 0.5;
  return w;
}

double mixing_time_bound(double rho, int n, double log_base) {
  if (!(rho >= 0.0 && rho < 1.0))
    fail(Err::InvalidParameter, "mixing bound requires 0 <= rho < 1, got " + std::to_string(rho));
  const double l = std::log(4.0 * n);
  const double scaled = log_base > 0.0 ? l / std::log(log_base) : l;
  return scaled / (1.0 - rho);
}

namespace {
void apply_pair_to_cols(std::vector<double>& cols, int ncols, int i, int j) {
  for (int c = 0; c < ncols; ++c) {
    double& a = cols[static_cast<std::size_t>(i) * ncols + c];
    double& b = cols[static_cast<std::size_t>(j) * ncols + c];
    const double avg = 0.5 * (a + b);
    a = avg;
    b = avg;
  }
}
}  // namespace

GossipSchedule GossipSchedule::uniform_ring_pairs(int n, std::uint64_t seed, int tmix) {
  if (n < 2) fail(Err::InvalidTopology, "pair gossip needs n >= 2");
  GossipSchedule s;
  s.n = n;
  s.tmix = tmix;
  CounterRng rng(seed, Stream::PairChoice);
  s.pair_at = [n, rng](std::uint64_t k) {
    const int i = static_cast<int>(rng.pick(static_cast<std::uint64_t>(n), k, 1));
    const int dir = (rng.word(k, 2) & 1) ? 1 : n - 1;
    return std::make_pair(i, (i + dir) % n);
  };
  auto pair_at = s.pair_at;
  s.apply_event = [pair_at](std::uint64_t k, std::vector<double>& cols, int ncols) {
    auto [i, j] = pair_at(k);
    apply_pair_to_cols(cols, ncols, i, j);
  };
  return s;
}

GossipSchedule GossipSchedule::fixed_pair(int n, int i, int j, int tmix) {
  if (i == j) fail(Err::InvalidPair, "pair gossip requires two distinct workers");
  GossipSchedule s;
  s.n = n;
  s.tmix = tmix;
  s.pair_at = [i, j](std::uint64_t) { return std::make_pair(i, j); };
  s.apply_event = [i, j](std::uint64_t, std::vector<double>& cols, int ncols) {
    apply_pair_to_cols(cols, ncols, i, j);
  };
  return s;
}

GossipSchedule GossipSchedule::fixed_matrix(const CommMatrix& m, int tmix) {
  GossipSchedule s;
  s.n = m.n();
  s.tmix = tmix;
  std::vector<double> w = m.weights();
  const int n = m.n();
  s.apply_event = [w, n](std::uint64_t, std::vector<double>& cols, int ncols) {
    std::vector<double> next(cols.size(), 0.0);
    for (int r = 0; r < n; ++r)
      for (int q = 0; q < n; ++q) {
        const double wr = w[static_cast<std::size_t>(r) * n + q];
        if (wr == 0.0) continue;
        for (int c = 0; c < ncols; ++c)
          next[static_cast<std::size_t>(r) * ncols + c] +=
              wr * cols[static_cast<std::size_t>(q) * ncols + c];
      }
    cols.swap(next);
  };
  return s;
}

namespace {
// max_i || M e_i - 1/n ||_1 where column i of the tracked matrix is the image
// of basis vector e_i under the window product.
std::pair<double, int> worst_column_distance(const std::vector<double>& cols, int n) {
  double worst = 0.0;
  int at = 0;
  for (int c = 0; c < n; ++c) {
    double d = 0.0;
    for (int r = 0; r < n; ++r)
      d += std::abs(cols[static_cast<std::size_t>(r) * n + c] - 1.0 / n);
    if (d > worst) {
      worst = d;
      at = c;
    }
  }
  return {worst, at};
}

double window_distance(const GossipSchedule& s, std::uint64_t start, int window, int* basis) {
  const int n = s.n;
  std::vector<double> cols(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) cols[static_cast<std::size_t>(i) * n + i] = 1.0;
  for (int q = 0; q < window; ++q) s.apply_event(start + q, cols, n);
  auto [d, at] = worst_column_distance(cols, n);
  if (basis) *basis = at;
  return d;
}
}  // namespace

MixingReport empirical_mixing_check(const GossipSchedule& schedule, std::uint64_t horizon,
                                    int max_windows) {
  if (horizon < static_cast<std::uint64_t>(schedule.tmix))
    fail(Err::InvalidParameter, "horizon must cover at least one mixing window");
  MixingReport rep;
  rep.tmix = schedule.tmix;
  const std::uint64_t starts = horizon - schedule.tmix + 1;
  CounterRng probe(0x6d69u, Stream::MixingProbe);
  const int count = static_cast<int>(
      std::min<std::uint64_t>(starts, static_cast<std::uint64_t>(max_windows)));
  for (int t = 0; t < count; ++t) {
    const std::uint64_t a = t == 0 ? 0 : probe.pick(starts, t);
    int basis = 0;
    const double d = window_distance(schedule, a, schedule.tmix, &basis);
    if (d > rep.max_distance) {
      rep.max_distance = d;
      rep.worst_start = a;
      rep.worst_basis = basis;
    }
    ++rep.windows_checked;
  }
  rep.pass = rep.max_distance <= 0.5;
  return rep;
}

int calibrate_tmix(const GossipSchedule& schedule, int trials, int max_window) {
  auto passes = [&](int window) {
    GossipSchedule probe = schedule;
    probe.tmix = window;
    const std::uint64_t horizon = static_cast<std::uint64_t>(trials) + window;
    return empirical_mixing_check(probe, horizon, trials).pass;
  };
  int hi = 1;
  while (hi <= max_window && !passes(hi)) hi *= 2;
  if (hi > max_window)
    fail(Err::Runtime, "schedule failed to mix within the maximum window " +
                           std::to_string(max_window));
  int lo = hi / 2 + 1;
  while (lo < hi) {
    const int mid = lo + (hi - lo) / 2;
    if (passes(mid))
      hi = mid;
    else
      lo = mid + 1;
  }
  return hi;
}

}  // namespace moniqua
