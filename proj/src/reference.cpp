#include "moniqua/algos.hpp"
#include "moniqua/error.hpp"

// Plain single-threaded loops mirroring the parallel kernels operation for
// operation. The tests require the two implementations to agree bit for bit,
// which pins down the determinism contract of the OpenMP versions.

namespace moniqua::ref {

namespace {
void check_shapes(const std::vector<WorkerState>& states, const CommMatrix& m,
                  const std::vector<std::vector<double>>& grads) {
  if (static_cast<int>(states.size()) != m.n())
    fail(Err::StateError, "state count does not match the topology");
  if (grads.size() != states.size()) fail(Err::StateError, "gradient count mismatch");
}
}  // namespace

std::uint64_t step_dpsgd_full(std::vector<WorkerState>& states, const CommMatrix& m,
                              double alpha, const std::vector<std::vector<double>>& grads) {
  check_shapes(states, m, grads);
  const int n = m.n();
  const std::size_t d = states[0].x.size();
  std::vector<std::vector<double>> next(n);
  std::uint64_t bits = 0;
  for (int i = 0; i < n; ++i) {
    next[i] = states[i].x;
    for (int q : m.neighbors(i)) {
      const double w = m(q, i);
      for (std::size_t c = 0; c < d; ++c)
        next[i][c] += (states[q].x[c] - states[i].x[c]) * w;
    }
    for (std::size_t c = 0; c < d; ++c) next[i][c] -= alpha * grads[i][c];
    bits += static_cast<std::uint64_t>(m.neighbors(i).size()) * d * 64;
  }
  for (int i = 0; i < n; ++i) states[i].x.swap(next[i]);
  return bits;
}

std::uint64_t step_dpsgd_naive(std::vector<WorkerState>& states, const CommMatrix& m,
                               double alpha, const std::vector<std::vector<double>>& grads,
                               const QuantizerSpec& q, const CounterRng& qrng,
                               std::uint64_t k) {
  check_shapes(states, m, grads);
  const int n = m.n();
  const std::size_t d = states[0].x.size();
  std::vector<std::vector<double>> bcast(n, std::vector<double>(d));
  for (int j = 0; j < n; ++j)
    for (std::size_t c = 0; c < d; ++c) {
      const double u = q.randomness == RandomnessPolicy::Shared
                           ? qrng.u01(k, c, 0)
                           : qrng.u01(k, c, static_cast<std::uint64_t>(j) + 1);
      bcast[j][c] = quantize_value(q, states[j].x[c], u);
    }
  std::vector<std::vector<double>> next(n, std::vector<double>(d));
  std::uint64_t bits = 0;
  for (int i = 0; i < n; ++i) {
    const double wii = m(i, i);
    for (std::size_t c = 0; c < d; ++c) next[i][c] = states[i].x[c] * wii;
    for (int qn : m.neighbors(i)) {
      const double w = m(qn, i);
      for (std::size_t c = 0; c < d; ++c) next[i][c] += bcast[qn][c] * w;
    }
    for (std::size_t c = 0; c < d; ++c) next[i][c] -= alpha * grads[i][c];
    bits += static_cast<std::uint64_t>(m.neighbors(i).size()) * d * 64;
  }
  for (int i = 0; i < n; ++i) states[i].x.swap(next[i]);
  return bits;
}

namespace {
std::uint64_t exchange(std::vector<WorkerState>& states,
                       const std::vector<std::vector<double>>& half, const CommMatrix& m,
                       const ModuloCodec& codec, const QuantizerSpec& q, double alpha,
                       const std::vector<std::vector<double>>& grads,
                       const CounterRng& qrng, std::uint64_t k, const ConsensusGuard& guard) {
  const int n = m.n();
  const std::size_t d = half[0].size();
  const bool with_hash = guard.mode == GuardMode::VerifyHash;
  std::vector<EncodedMessage> msgs(n);
  for (int i = 0; i < n; ++i) msgs[i] = encode(half[i], codec, q, qrng, k, i, with_hash);
  std::vector<std::vector<double>> next(n);
  std::uint64_t bits = 0;
  for (int i = 0; i < n; ++i) {
    const std::vector<double> self = self_bias(half[i], msgs[i], codec);
    next[i] = half[i];
    for (int qn : m.neighbors(i)) {
      const std::vector<double> hat = decode_remote(msgs[qn], half[i], codec);
      const double w = m(qn, i);
      for (std::size_t c = 0; c < d; ++c) next[i][c] += (hat[c] - self[c]) * w;
      bits += d * static_cast<std::uint64_t>(codec.wire_bits());
    }
    if (alpha != 0.0)
      for (std::size_t c = 0; c < d; ++c) next[i][c] -= alpha * grads[i][c];
  }
  for (int i = 0; i < n; ++i) states[i].x.swap(next[i]);
  return bits;
}
}  // namespace

std::uint64_t step_moniqua(std::vector<WorkerState>& states, const CommMatrix& m,
                           const ModuloCodec& codec, const QuantizerSpec& q, double alpha,
                           const std::vector<std::vector<double>>& grads,
                           const CounterRng& qrng, std::uint64_t k, ConsensusGuard& guard) {
  check_shapes(states, m, grads);
  guard.theta_k = codec.theta;
  guard_check_all(states, guard, k);
  std::vector<std::vector<double>> cur(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) cur[i] = states[i].x;
  return exchange(states, cur, m, codec, q, alpha, grads, qrng, k, guard);
}

std::uint64_t step_moniqua_d2(std::vector<WorkerState>& states, const CommMatrix& m,
                              const ModuloCodec& codec, const QuantizerSpec& q, double alpha,
                              const std::vector<std::vector<double>>& grads,
                              const CounterRng& qrng, std::uint64_t k,
                              ConsensusGuard& guard) {
  check_shapes(states, m, grads);
  const int n = m.n();
  const std::size_t d = states[0].x.size();
  std::vector<std::vector<double>> half(n, std::vector<double>(d));
  for (int i = 0; i < n; ++i) {
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
  guard.theta_k = codec.theta;
  if (guard.mode == GuardMode::Assert) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        double dist = 0.0;
        for (std::size_t c = 0; c < d; ++c)
          dist = std::max(dist, std::abs(half[i][c] - half[j][c]));
        if (dist >= guard.theta_k) {
          guard.log.push_back({k, i, j, dist, guard.theta_k});
          fail(Err::ConsensusViolated, "consensus bound violated at iteration " +
                                           std::to_string(k));
        }
      }
  }
  return exchange(states, half, m, codec, q, /*alpha=*/0.0, grads, qrng, k, guard);
}

}  // namespace moniqua::ref
