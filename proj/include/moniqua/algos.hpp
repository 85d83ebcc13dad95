#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "moniqua/codec.hpp"
#include "moniqua/objectives.hpp"
#include "moniqua/topo.hpp"

namespace moniqua {

struct WorkerState {
  std::vector<double> x;
  // previous model and gradient, zero before the first step (used by the
  // variance-reduced stepper only)
  std::vector<double> x_prev;
  std::vector<double> g_prev;
  // event-driven runs: models valid from a given event, newest last
  struct Snapshot {
    std::uint64_t from_event;
    std::vector<double> model;
  };
  std::deque<Snapshot> history;
};

// All workers start from the shared zero model.
std::vector<WorkerState> init_states(int n, int dim);

enum class GuardMode { Off, Assert, VerifyHash };

struct GuardViolation {
  std::uint64_t k;
  int i, j;
  double distance;
  double theta;
};

// Checks the codec's a priori bound before every encode. In assert mode a
// violated bound aborts the run; verify_hash aborts when a lifted message
// fails its digest; off lets violations silently corrupt recovery, which is
// exactly the failure mode hashing detects.
struct ConsensusGuard {
  GuardMode mode = GuardMode::Off;
  double theta_k = 0.0;
  std::vector<GuardViolation> log;
};

// x_{k+1,i} = sum_j x_{k,j} W_ji - alpha g_i, computed in the difference form
// x_i + sum_{j in N_i} (x_j - x_i) W_ji - alpha g_i. Returns bits exchanged
// (full-precision doubles).
std::uint64_t step_dpsgd_full(std::vector<WorkerState>& states, const CommMatrix& m,
                              double alpha, const std::vector<std::vector<double>>& grads);

// x_{k+1,i} = x_i W_ii + sum_{j != i} Q(x_j) W_ji - alpha g_i: the direct
// quantization of exchanged models that fails to converge.
std::uint64_t step_dpsgd_naive(std::vector<WorkerState>& states, const CommMatrix& m,
                               double alpha, const std::vector<std::vector<double>>& grads,
                               const QuantizerSpec& q, const CounterRng& qrng,
                               std::uint64_t k);

// One synchronous modulo-codec round: every worker encodes once, every
// receiver lifts each neighbor against its own model, averages the lifted
// differences, then takes the gradient step.
std::uint64_t step_moniqua(std::vector<WorkerState>& states, const CommMatrix& m,
                           const ModuloCodec& codec, const QuantizerSpec& q, double alpha,
                           const std::vector<std::vector<double>>& grads,
                           const CounterRng& qrng, std::uint64_t k, ConsensusGuard& guard);

// Variance-reduced variant: extrapolation half-step
// 2 x_k - x_{k-1} - alpha g_k + alpha g_{k-1} (plain gradient step at k = 0),
// then the codec exchange on the half-step iterates.
std::uint64_t step_moniqua_d2(std::vector<WorkerState>& states, const CommMatrix& m,
                              const ModuloCodec& codec, const QuantizerSpec& q, double alpha,
                              const std::vector<std::vector<double>>& grads,
                              const CounterRng& qrng, std::uint64_t k,
                              ConsensusGuard& guard);

// One asynchronous event: the scheduled pair gossips half-half through the
// codec and the active worker applies a gradient computed from its model
// tau ~ U{0..T} events ago.
std::uint64_t event_moniqua_adpsgd(std::vector<WorkerState>& states,
                                   const GossipSchedule& sched, const ModuloCodec& codec,
                                   const QuantizerSpec& q, double alpha,
                                   const GradOracle& oracle, std::uint64_t k, int T,
                                   const CounterRng& stale_rng, const CounterRng& qrng,
                                   ConsensusGuard& guard);

// Serial reference implementations, kept for testing the parallel kernels:
// results must be bit-identical for any thread count.
namespace ref {
std::uint64_t step_dpsgd_full(std::vector<WorkerState>& states, const CommMatrix& m,
                              double alpha, const std::vector<std::vector<double>>& grads);
std::uint64_t step_dpsgd_naive(std::vector<WorkerState>& states, const CommMatrix& m,
                               double alpha, const std::vector<std::vector<double>>& grads,
                               const QuantizerSpec& q, const CounterRng& qrng,
                               std::uint64_t k);
std::uint64_t step_moniqua(std::vector<WorkerState>& states, const CommMatrix& m,
                           const ModuloCodec& codec, const QuantizerSpec& q, double alpha,
                           const std::vector<std::vector<double>>& grads,
                           const CounterRng& qrng, std::uint64_t k, ConsensusGuard& guard);
std::uint64_t step_moniqua_d2(std::vector<WorkerState>& states, const CommMatrix& m,
                              const ModuloCodec& codec, const QuantizerSpec& q, double alpha,
                              const std::vector<std::vector<double>>& grads,
                              const CounterRng& qrng, std::uint64_t k,
                              ConsensusGuard& guard);
}  // namespace ref

// Shared helpers.
double max_pairwise_inf_distance(const std::vector<WorkerState>& states, int* wi = nullptr,
                                 int* wj = nullptr);
void guard_check_all(const std::vector<WorkerState>& states, ConsensusGuard& guard,
                     std::uint64_t k);
void guard_check_pair(const std::vector<WorkerState>& states, int i, int j,
                      ConsensusGuard& guard, std::uint64_t k);

}  // namespace moniqua
