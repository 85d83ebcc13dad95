#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "moniqua/quant.hpp"
#include "moniqua/rng.hpp"

namespace moniqua {

// Modulo returning the representative in [-a/2, a/2). The upper boundary maps
// to -a/2, so the operation is total and idempotent. Integer shifts of both
// signs are admitted.
double centered_mod(double z, double a);

// x = (x mod 2theta - y mod 2theta) mod 2theta + y, valid whenever the caller
// guarantees |x - y| < theta. Pure arithmetic, independent of quantization.
double exact_recover(double x_mod, double y, double theta);

// FNV-1a 64-bit over a byte stream.
std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t len);
// Digest of signed integer codes, each as 8 little-endian bytes, in order.
std::uint64_t hash_codes(const std::vector<std::int64_t>& codes);

// The (theta, delta, B_theta) triple governing one exchange round together
// with the quantizer grid used inside the window. B_theta = 2theta/(1-2delta).
struct ModuloCodec {
  double theta = 0.0;
  double delta = 0.0;
  double b_theta = 0.0;
  QuantKind kind = QuantKind::Exact;
  std::int64_t cells = 0;  // grid cells per unit period; 0 for the exact kind
  RandomnessPolicy randomness = RandomnessPolicy::Shared;

  static ModuloCodec from_quantizer(double theta, const QuantizerSpec& q);
  // Triple without a grid; enough for the arithmetic identities and bounds.
  static ModuloCodec from_delta(double theta, double delta);

  double max_decode_error() const { return delta * b_theta; }
  int wire_bits() const;
};

// Builds a tiling quantizer grid whose derived error bound does not exceed
// delta_max. Stochastic grids snap to a power-of-two cell count so the wire
// width equals bits_required(delta); nearest grids use the smallest tiling
// count.
QuantizerSpec quantizer_for_delta(QuantKind kind, double delta_max);

// Wire layout (bit-exact):
//   magic "MQ01" | dim u32 LE | bits_per_coord u8 | theta f64 LE |
//   delta f64 LE | packed codes LSB-first | code_hash u64 LE (0 = disabled)
struct EncodedMessage {
  std::uint32_t dim = 0;
  std::uint8_t bits_per_coord = 0;
  double theta = 0.0;
  double delta = 0.0;
  std::vector<std::uint64_t> codes;  // residues in [0, cells); raw f64 bits for exact
  std::uint64_t code_hash = 0;

  std::vector<std::uint8_t> to_bytes() const;
  static EncodedMessage from_bytes(std::span<const std::uint8_t> bytes);
};

// One exchange round, sender side. Codes are the quantizer grid indices of
// the modulo-reduced coordinates, stored as residues; the optional hash is
// taken over the unbounded pre-modulo indices so the receiver can verify its
// lift. Randomized rounding offsets key on (iter, coord) when shared and
// additionally on the worker id when independent.
EncodedMessage encode(std::span<const double> x, const ModuloCodec& codec,
                      const QuantizerSpec& q, const CounterRng& rng, std::uint64_t iter,
                      int worker, bool with_hash);

// Receiver side: lifts each code into the window centered on x_ref. When the
// sender satisfied |x_sender - x_ref|_inf < theta, every coordinate lands
// within delta*B_theta of the sender's value and the result is independent
// of the receiver. A non-zero message hash is re-checked after lifting.
std::vector<double> decode_remote(const EncodedMessage& msg, std::span<const double> x_ref,
                                  const ModuloCodec& codec);

// The sender's own reconstruction (reference equals sender). Bit-identical to
// decode_remote(msg, x, codec).
std::vector<double> self_bias(std::span<const double> x, const EncodedMessage& msg,
                              const ModuloCodec& codec);

}  // namespace moniqua
