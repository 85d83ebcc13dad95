#include "moniqua/algos.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>

#include "moniqua/error.hpp"

namespace moniqua {

std::vector<WorkerState> init_states(int n, int dim) {
  if (n < 1 || dim < 1) fail(Err::InvalidParameter, "need n, dim >= 1");
  std::vector<WorkerState> s(n);
  for (auto& w : s) w.x.assign(dim, 0.0);
  return s;
}

double max_pairwise_inf_distance(const std::vector<WorkerState>& states, int* wi, int* wj) {
  double worst = 0.0;
  int bi = 0, bj = 0;
  const int n = static_cast<int>(states.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double d = 0.0;
      for (std::size_t c = 0; c < states[i].x.size(); ++c)
        d = std::max(d, std::abs(states[i].x[c] - states[j].x[c]));
      if (d > worst) {
        worst = d;
        bi = i;
        bj = j;
      }
    }
  if (wi) *wi = bi;
  if (wj) *wj = bj;
  return worst;
}

void guard_check_all(const std::vector<WorkerState>& states, ConsensusGuard& guard,
                     std::uint64_t k) {
  if (guard.mode != GuardMode::Assert) return;
  int i = 0, j = 0;
  const double d = max_pairwise_inf_distance(states, &i, &j);
  if (d >= guard.theta_k) {
    guard.log.push_back({k, i, j, d, guard.theta_k});
    fail(Err::ConsensusViolated,
         "consensus bound violated at iteration " + std::to_string(k) + ": workers " +
             std::to_string(i) + "," + std::to_string(j) + " differ by " + std::to_string(d) +
             " >= theta_k = " + std::to_string(guard.theta_k));
  }
}

void guard_check_pair(const std::vector<WorkerState>& states, int i, int j,
                      ConsensusGuard& guard, std::uint64_t k) {
  if (guard.mode != GuardMode::Assert) return;
  double d = 0.0;
  for (std::size_t c = 0; c < states[i].x.size(); ++c)
    d = std::max(d, std::abs(states[i].x[c] - states[j].x[c]));
  if (d >= guard.theta_k) {
    guard.log.push_back({k, i, j, d, guard.theta_k});
    fail(Err::ConsensusViolated,
         "consensus bound violated at event " + std::to_string(k) + ": gossip pair " +
             std::to_string(i) + "," + std::to_string(j) + " differs by " + std::to_string(d) +
             " >= theta = " + std::to_string(guard.theta_k));
  }
}

namespace {

void check_shapes(const std::vector<WorkerState>& states, const CommMatrix& m,
                  const std::vector<std::vector<double>>& grads) {
  if (static_cast<int>(states.size()) != m.n())
    fail(Err::StateError, "state count does not match the topology");
  if (grads.size() != states.size()) fail(Err::StateError, "gradient count mismatch");
  const std::size_t d = states[0].x.size();
  for (std::size_t i = 0; i < states.size(); ++i)
    if (states[i].x.size() != d || grads[i].size() != d)
      fail(Err::StateError, "dimension mismatch at worker " + std::to_string(i));
}

// Captures the first exception thrown inside a parallel region, preferring
// the lowest worker index so reruns report the same failure.
struct FirstError {
  std::mutex mu;
  int worker = -1;
  std::exception_ptr err;

  void store(int i, std::exception_ptr e) {
    std::lock_guard<std::mutex> lock(mu);
    if (worker < 0 || i < worker) {
      worker = i;
      err = e;
    }
  }
  void rethrow_if_set() {
    if (err) std::rethrow_exception(err);
  }
};

// Mixing update shared by the full-precision and codec paths:
// out = xin_i + sum_{q in N_i} (val_q - self) W_qi - alpha * g_i.
inline void mix_into(std::vector<double>& out, const std::vector<double>& xin_i,
                     const std::vector<std::vector<double>>& vals,
                     const std::vector<double>& self, int i, const CommMatrix& m,
                     double alpha, const std::vector<double>& g) {
  const std::size_t d = xin_i.size();
  out = xin_i;
  for (int q : m.neighbors(i)) {
    const double w = m(q, i);
    const std::vector<double>& vq = vals[q];
    for (std::size_t c = 0; c < d; ++c) out[c] += (vq[c] - self[c]) * w;
  }
  for (std::size_t c = 0; c < d; ++c) out[c] -= alpha * g[c];
}

std::uint64_t codec_exchange(std::vector<WorkerState>& states,
                             const std::vector<std::vector<double>>& half,
                             const CommMatrix& m, const ModuloCodec& codec,
                             const QuantizerSpec& q, double alpha,
                             const std::vector<std::vector<double>>& grads,
                             const CounterRng& qrng, std::uint64_t k,
                             ConsensusGuard& guard) {
  const int n = m.n();
  const bool with_hash = guard.mode == GuardMode::VerifyHash;
  std::vector<EncodedMessage> msgs(n);
  FirstError ferr;

#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    try {
      msgs[i] = encode(half[i], codec, q, qrng, k, i, with_hash);
    } catch (...) {
      ferr.store(i, std::current_exception());
    }
  }
  ferr.rethrow_if_set();

  std::vector<std::vector<double>> next(n);
  std::uint64_t bits = 0;

#pragma omp parallel for schedule(static) reduction(+ : bits)
  for (int i = 0; i < n; ++i) {
    try {
      const std::vector<double> self = self_bias(half[i], msgs[i], codec);
      next[i] = half[i];
      const std::size_t d = half[i].size();
      for (int qn : m.neighbors(i)) {
        const std::vector<double> hat = decode_remote(msgs[qn], half[i], codec);
        const double w = m(qn, i);
        for (std::size_t c = 0; c < d; ++c) next[i][c] += (hat[c] - self[c]) * w;
        bits += d * static_cast<std::uint64_t>(codec.wire_bits());
      }
      if (alpha != 0.0)
        for (std::size_t c = 0; c < d; ++c) next[i][c] -= alpha * grads[i][c];
    } catch (...) {
      ferr.store(i, std::current_exception());
    }
  }
  ferr.rethrow_if_set();

  for (int i = 0; i < n; ++i) states[i].x.swap(next[i]);
  return bits;
}

}  // namespace

std::uint64_t step_dpsgd_full(std::vector<WorkerState>& states, const CommMatrix& m,
                              double alpha, const std::vector<std::vector<double>>& grads) {
  check_shapes(states, m, grads);
  const int n = m.n();
  const std::size_t d = states[0].x.size();
  std::vector<std::vector<double>> next(n);
  std::vector<const std::vector<double>*> xs(n);
  for (int i = 0; i < n; ++i) xs[i] = &states[i].x;

#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    next[i] = states[i].x;
    for (int q : m.neighbors(i)) {
      const double w = m(q, i);
      const std::vector<double>& vq = *xs[q];
      const std::vector<double>& vi = *xs[i];
      for (std::size_t c = 0; c < d; ++c) next[i][c] += (vq[c] - vi[c]) * w;
    }
    for (std::size_t c = 0; c < d; ++c) next[i][c] -= alpha * grads[i][c];
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < n; ++i) {
    states[i].x.swap(next[i]);
    bits += static_cast<std::uint64_t>(m.neighbors(i).size()) * d * 64;
  }
  return bits;
}

std::uint64_t step_dpsgd_naive(std::vector<WorkerState>& states, const CommMatrix& m,
                               double alpha, const std::vector<std::vector<double>>& grads,
                               const QuantizerSpec& q, const CounterRng& qrng,
                               std::uint64_t k) {
  check_shapes(states, m, grads);
  q.validate();
  const int n = m.n();
  const std::size_t d = states[0].x.size();
  std::vector<std::vector<double>> bcast(n);
  FirstError ferr;

#pragma omp parallel for schedule(static)
  for (int j = 0; j < n; ++j) {
    try {
      bcast[j].resize(d);
      for (std::size_t c = 0; c < d; ++c) {
        const double u = q.randomness == RandomnessPolicy::Shared
                             ? qrng.u01(k, c, 0)
                             : qrng.u01(k, c, static_cast<std::uint64_t>(j) + 1);
        bcast[j][c] = quantize_value(q, states[j].x[c], u);
      }
    } catch (...) {
      ferr.store(j, std::current_exception());
    }
  }
  ferr.rethrow_if_set();

  std::vector<std::vector<double>> next(n);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    next[i].resize(d);
    const double wii = m(i, i);
    for (std::size_t c = 0; c < d; ++c) next[i][c] = states[i].x[c] * wii;
    for (int qn : m.neighbors(i)) {
      const double w = m(qn, i);
      for (std::size_t c = 0; c < d; ++c) next[i][c] += bcast[qn][c] * w;
    }
    for (std::size_t c = 0; c < d; ++c) next[i][c] -= alpha * grads[i][c];
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < n; ++i) {
    states[i].x.swap(next[i]);
    bits += static_cast<std::uint64_t>(m.neighbors(i).size()) * d * 64;
  }
  return bits;
}

std::uint64_t step_moniqua(std::vector<WorkerState>& states, const CommMatrix& m,
                           const ModuloCodec& codec, const QuantizerSpec& q, double alpha,
                           const std::vector<std::vector<double>>& grads,
                           const CounterRng& qrng, std::uint64_t k, ConsensusGuard& guard) {
  check_shapes(states, m, grads);
  guard.theta_k = codec.theta;
  guard_check_all(states, guard, k);
  std::vector<std::vector<double>> cur(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) cur[i] = states[i].x;
  return codec_exchange(states, cur, m, codec, q, alpha, grads, qrng, k, guard);
}

std::uint64_t step_moniqua_d2(std::vector<WorkerState>& states, const CommMatrix& m,
                              const ModuloCodec& codec, const QuantizerSpec& q, double alpha,
                              const std::vector<std::vector<double>>& grads,
                              const CounterRng& qrng, std::uint64_t k,
                              ConsensusGuard& guard) {
  check_shapes(states, m, grads);
  const int n = m.n();
  const std::size_t d = states[0].x.size();
  std::vector<std::vector<double>> half(n);

#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    half[i].resize(d);
    if (k == 0) {
      for (std::size_t c = 0; c < d; ++c) half[i][c] = states[i].x[c] - alpha * grads[i][c];
    } else {
      for (std::size_t c = 0; c < d; ++c)
        half[i][c] = 2.0 * states[i].x[c] - states[i].x_prev[c] - alpha * grads[i][c] +
                     alpha * states[i].g_prev[c];
    }
  }

  for (int i = 0; i < n; ++i) {
    states[i].x_prev = states[i].x;
    states[i].g_prev = grads[i];
  }

  // the a priori bound covers the half-step iterates that get encoded
  guard.theta_k = codec.theta;
  if (guard.mode == GuardMode::Assert) {
    double worst = 0.0;
    int bi = 0, bj = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        double dist = 0.0;
        for (std::size_t c = 0; c < d; ++c)
          dist = std::max(dist, std::abs(half[i][c] - half[j][c]));
        if (dist > worst) {
          worst = dist;
          bi = i;
          bj = j;
        }
      }
    if (worst >= guard.theta_k) {
      guard.log.push_back({k, bi, bj, worst, guard.theta_k});
      fail(Err::ConsensusViolated,
           "consensus bound violated at iteration " + std::to_string(k) + ": workers " +
               std::to_string(bi) + "," + std::to_string(bj) + " differ by " +
               std::to_string(worst) + " >= theta = " + std::to_string(guard.theta_k));
    }
  }
  return codec_exchange(states, half, m, codec, q, /*alpha=*/0.0, grads, qrng, k, guard);
}

std::uint64_t event_moniqua_adpsgd(std::vector<WorkerState>& states,
                                   const GossipSchedule& sched, const ModuloCodec& codec,
                                   const QuantizerSpec& q, double alpha,
                                   const GradOracle& oracle, std::uint64_t k, int T,
                                   const CounterRng& stale_rng, const CounterRng& qrng,
                                   ConsensusGuard& guard) {
  if (!sched.pair_at) fail(Err::InvalidParameter, "schedule does not produce gossip pairs");
  if (T < 0) fail(Err::InvalidParameter, "staleness bound must be nonnegative");
  auto [i, j] = sched.pair_at(k);
  if (i == j) fail(Err::InvalidPair, "schedule produced a degenerate pair");
  const std::size_t d = states[i].x.size();

  guard.theta_k = codec.theta;
  guard_check_pair(states, i, j, guard, k);

  // model of the active worker tau events ago, before this event's updates
  std::uint64_t tau = stale_rng.pick(static_cast<std::uint64_t>(T) + 1, k);
  tau = std::min<std::uint64_t>(tau, k);
  const std::uint64_t at = k - tau;
  const std::vector<double>* snapshot = &states[i].x;
  for (auto it = states[i].history.rbegin(); it != states[i].history.rend(); ++it) {
    if (it->from_event <= at) {
      snapshot = &it->model;
      break;
    }
  }
  std::vector<double> stale_model = *snapshot;

  EncodedMessage mi = encode(states[i].x, codec, q, qrng, k, i,
                             guard.mode == GuardMode::VerifyHash);
  EncodedMessage mj = encode(states[j].x, codec, q, qrng, k, j,
                             guard.mode == GuardMode::VerifyHash);
  const std::vector<double> self_i = self_bias(states[i].x, mi, codec);
  const std::vector<double> hat_j_at_i = decode_remote(mj, states[i].x, codec);
  const std::vector<double> self_j = self_bias(states[j].x, mj, codec);
  const std::vector<double> hat_i_at_j = decode_remote(mi, states[j].x, codec);

  for (std::size_t c = 0; c < d; ++c) {
    states[i].x[c] += 0.5 * (hat_j_at_i[c] - self_i[c]);
    states[j].x[c] += 0.5 * (hat_i_at_j[c] - self_j[c]);
  }

  const std::vector<double> g = oracle.sample(i, stale_model, k);
  for (std::size_t c = 0; c < d; ++c) states[i].x[c] -= alpha * g[c];

  // record the models valid from the next event and prune beyond the horizon
  for (int w : {i, j}) {
    states[w].history.push_back({k + 1, states[w].x});
    const std::uint64_t horizon = k + 1 >= static_cast<std::uint64_t>(T) + 1
                                      ? k + 1 - static_cast<std::uint64_t>(T) - 1
                                      : 0;
    while (states[w].history.size() > 1 && states[w].history[1].from_event <= horizon)
      states[w].history.pop_front();
  }
  return 2 * d * static_cast<std::uint64_t>(codec.wire_bits());
}

}  // namespace moniqua
