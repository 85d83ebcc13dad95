#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "moniqua/error.hpp"
#include "moniqua/rng.hpp"

namespace moniqua {

enum class QuantKind {
  StochasticRound,   // s * floor(x/s + u), u ~ U[0,1); worst-case error s
  NearestRound,      // s * floor(x/s + 0.5); worst-case error s/2
  RandomizedGossip,  // x with probability p, else 0; experimental only
  Exact,             // identity; degenerate reference quantizer
};

enum class RandomnessPolicy { Shared, Independent };

QuantKind parse_quant_kind(const std::string& s);
std::string to_string(QuantKind k);

// Grid quantizers keep 0 on the grid. `step` is the single source of truth;
// the worst-case error bound delta is derived per kind.
struct QuantizerSpec {
  QuantKind kind = QuantKind::NearestRound;
  double step = 1.0 / 128.0;
  double keep_prob = 1.0;  // RandomizedGossip only
  RandomnessPolicy randomness = RandomnessPolicy::Shared;

  // Worst-case |Q(x) - x| on [-1/2, 1/2). RandomizedGossip has no grid bound
  // tighter than 1/2, which is outside the codec's delta < 1/2 domain.
  double delta() const;
  bool codec_capable() const {
    return kind == QuantKind::StochasticRound || kind == QuantKind::NearestRound ||
           kind == QuantKind::Exact;
  }
  void validate() const;
};

double stochastic_round(double x, double step, double u);
double nearest_round(double x, double step);
double randomized_gossip(double x, double keep_prob, double u);

// Applies the quantizer to a raw value. `u` is consumed by the randomized
// kinds and ignored by the deterministic ones.
double quantize_value(const QuantizerSpec& q, double x, double u);

// ceil(log2(1/(2 delta) + 1)): bits per transmitted parameter for a linear
// quantizer with worst-case error delta. Requires 0 < delta < 1/2.
int bits_required(double delta);

// LSB-first bit packing. Each code must fit in `bits` (1..64).
std::vector<std::uint8_t> pack_codes(const std::vector<std::uint64_t>& codes, int bits);
std::vector<std::uint64_t> unpack_codes(const std::vector<std::uint8_t>& bytes, int bits,
                                        std::size_t count);

}  // namespace moniqua
