#include "moniqua/codec.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "moniqua/error.hpp"

namespace moniqua {

double centered_mod(double z, double a) {
  if (!(a > 0.0) || !std::isfinite(a))
    fail(Err::InvalidModulus, "modulus must be positive and finite");
  if (!std::isfinite(z)) fail(Err::NumericInput, "centered_mod input is not finite");
  const double q = std::floor(z / a + 0.5);
  double r = z - q * a;
  if (r < -a / 2.0) r += a;
  if (r >= a / 2.0) r -= a;
  return r;
}

double exact_recover(double x_mod, double y, double theta) {
  const double a = 2.0 * theta;
  return centered_mod(x_mod - centered_mod(y, a), a) + y;
}

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t len) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash_codes(const std::vector<std::int64_t>& codes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::int64_t c : codes) {
    std::uint64_t u = static_cast<std::uint64_t>(c);
    for (int b = 0; b < 8; ++b) {
      h ^= (u >> (8 * b)) & 0xffULL;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

ModuloCodec ModuloCodec::from_delta(double theta, double delta) {
  if (!(theta > 0.0) || !std::isfinite(theta))
    fail(Err::InvalidParameter, "codec theta must be positive");
  if (!(delta >= 0.0 && delta < 0.5))
    fail(Err::InvalidParameter,
         "codec delta must satisfy 0 <= delta < 1/2, got " + std::to_string(delta));
  ModuloCodec c;
  c.theta = theta;
  c.delta = delta;
  c.b_theta = 2.0 * theta / (1.0 - 2.0 * delta);
  return c;
}

ModuloCodec ModuloCodec::from_quantizer(double theta, const QuantizerSpec& q) {
  if (!q.codec_capable())
    fail(Err::UnsupportedQuantizer,
         "quantizer kind " + to_string(q.kind) + " has no finite error bound on [-1/2,1/2)");
  ModuloCodec c = from_delta(theta, q.delta());
  c.kind = q.kind;
  c.randomness = q.randomness;
  if (q.kind != QuantKind::Exact) {
    const double cells_real = 1.0 / q.step;
    const std::int64_t cells = std::llround(cells_real);
    if (cells < 1 || std::abs(cells_real - static_cast<double>(cells)) > 1e-6)
      fail(Err::InvalidParameter,
           "quantizer step must divide the unit period into whole cells, got step=" +
               std::to_string(q.step));
    c.cells = cells;
  }
  return c;
}

int ModuloCodec::wire_bits() const {
  if (kind == QuantKind::Exact) return 64;
  int residue_bits = 1;
  while ((1LL << residue_bits) < cells) ++residue_bits;
  return std::max(bits_required(delta), residue_bits);
}

QuantizerSpec quantizer_for_delta(QuantKind kind, double delta_max) {
  if (!(delta_max > 0.0 && delta_max < 0.5))
    fail(Err::InvalidParameter, "delta must be in (0, 1/2)");
  QuantizerSpec q;
  q.kind = kind;
  if (kind == QuantKind::StochasticRound) {
    std::int64_t cells = static_cast<std::int64_t>(std::ceil(1.0 / delta_max - 1e-12));
    std::int64_t pow2 = 1;
    while (pow2 < cells) pow2 <<= 1;
    q.step = 1.0 / static_cast<double>(pow2);
  } else if (kind == QuantKind::NearestRound) {
    std::int64_t cells = static_cast<std::int64_t>(std::ceil(1.0 / (2.0 * delta_max) - 1e-12));
    q.step = 1.0 / static_cast<double>(cells);
  } else {
    fail(Err::UnsupportedQuantizer, "only rounding quantizers have derivable grids");
  }
  return q;
}

namespace {

inline void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>((v >> (8 * b)) & 0xff));
}

inline void put_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>((v >> (8 * b)) & 0xff));
}

inline void put_f64_le(std::vector<std::uint8_t>& out, double v) {
  put_u64_le(out, std::bit_cast<std::uint64_t>(v));
}

inline std::uint32_t get_u32_le(std::span<const std::uint8_t> in, std::size_t off) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(in[off + b]) << (8 * b);
  return v;
}

inline std::uint64_t get_u64_le(std::span<const std::uint8_t> in, std::size_t off) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(in[off + b]) << (8 * b);
  return v;
}

// Signed pre-modulo grid index of value `x` on the effective grid of the
// codec: N = floor(x*cells/B + u), with u = 1/2 for nearest rounding.
inline std::int64_t unbounded_index(double x, const ModuloCodec& c, double u) {
  const double w = x / c.b_theta * static_cast<double>(c.cells);
  if (!(std::abs(w) < 9.0e15))
    fail(Err::NumericInput, "coordinate magnitude overflows the codec grid index range");
  return static_cast<std::int64_t>(std::floor(w + u));
}

inline std::uint64_t euclidean_residue(std::int64_t n, std::int64_t m) {
  std::int64_t r = n % m;
  if (r < 0) r += m;
  return static_cast<std::uint64_t>(r);
}

}  // namespace

std::vector<std::uint8_t> EncodedMessage::to_bytes() const {
  std::vector<std::uint8_t> out;
  out.reserve(25 + codes.size());
  out.push_back('M');
  out.push_back('Q');
  out.push_back('0');
  out.push_back('1');
  put_u32_le(out, dim);
  out.push_back(bits_per_coord);
  put_f64_le(out, theta);
  put_f64_le(out, delta);
  std::vector<std::uint8_t> packed = pack_codes(codes, bits_per_coord);
  out.insert(out.end(), packed.begin(), packed.end());
  put_u64_le(out, code_hash);
  return out;
}

EncodedMessage EncodedMessage::from_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 29 || bytes[0] != 'M' || bytes[1] != 'Q' || bytes[2] != '0' ||
      bytes[3] != '1')
    fail(Err::Encoding, "bad message magic");
  EncodedMessage m;
  m.dim = get_u32_le(bytes, 4);
  m.bits_per_coord = bytes[8];
  m.theta = std::bit_cast<double>(get_u64_le(bytes, 9));
  m.delta = std::bit_cast<double>(get_u64_le(bytes, 17));
  const std::size_t packed_len =
      (static_cast<std::size_t>(m.dim) * m.bits_per_coord + 7) / 8;
  if (bytes.size() != 25 + packed_len + 8) fail(Err::Encoding, "bad message length");
  std::vector<std::uint8_t> packed(bytes.begin() + 25, bytes.begin() + 25 + packed_len);
  m.codes = unpack_codes(packed, m.bits_per_coord, m.dim);
  m.code_hash = get_u64_le(bytes, 25 + packed_len);
  return m;
}

EncodedMessage encode(std::span<const double> x, const ModuloCodec& codec,
                      const QuantizerSpec& q, const CounterRng& rng, std::uint64_t iter,
                      int worker, bool with_hash) {
  if (!q.codec_capable())
    fail(Err::UnsupportedQuantizer,
         "quantizer kind " + to_string(q.kind) + " cannot back a modulo codec");
  if (q.kind != codec.kind || (q.kind != QuantKind::Exact && q.delta() != codec.delta))
    fail(Err::CodecMismatch, "quantizer does not match the codec it was built from");

  EncodedMessage msg;
  msg.dim = static_cast<std::uint32_t>(x.size());
  msg.bits_per_coord = static_cast<std::uint8_t>(codec.wire_bits());
  msg.theta = codec.theta;
  msg.delta = codec.delta;
  msg.codes.resize(x.size());

  if (codec.kind == QuantKind::Exact) {
    std::vector<std::int64_t> idx(with_hash ? x.size() : 0);
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (!std::isfinite(x[j])) fail(Err::NumericInput, "encode input is not finite");
      msg.codes[j] = std::bit_cast<std::uint64_t>(x[j]);
      if (with_hash) idx[j] = static_cast<std::int64_t>(msg.codes[j]);
    }
    msg.code_hash = with_hash ? hash_codes(idx) : 0;
    return msg;
  }

  const bool stochastic = codec.kind == QuantKind::StochasticRound;
  std::vector<std::int64_t> idx(with_hash ? x.size() : 0);
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!std::isfinite(x[j])) fail(Err::NumericInput, "encode input is not finite");
    double u = 0.5;
    if (stochastic) {
      u = q.randomness == RandomnessPolicy::Shared ? rng.u01(iter, j, 0)
                                                   : rng.u01(iter, j, worker + 1);
    }
    const std::int64_t n = unbounded_index(x[j], codec, u);
    msg.codes[j] = euclidean_residue(n, codec.cells);
    if (with_hash) idx[j] = n;
  }
  msg.code_hash = with_hash ? hash_codes(idx) : 0;
  return msg;
}

std::vector<double> decode_remote(const EncodedMessage& msg, std::span<const double> x_ref,
                                  const ModuloCodec& codec) {
  if (msg.theta != codec.theta || msg.delta != codec.delta)
    fail(Err::CodecMismatch, "message (theta, delta) tag does not match the codec");
  if (msg.dim != x_ref.size()) fail(Err::StateError, "message dimension mismatch");

  std::vector<double> out(msg.dim);
  if (codec.kind == QuantKind::Exact) {
    std::vector<std::int64_t> idx(msg.code_hash != 0 ? msg.dim : 0);
    for (std::size_t j = 0; j < msg.dim; ++j) {
      out[j] = std::bit_cast<double>(msg.codes[j]);
      if (msg.code_hash != 0) idx[j] = static_cast<std::int64_t>(msg.codes[j]);
    }
    if (msg.code_hash != 0 && hash_codes(idx) != msg.code_hash)
      fail(Err::RecoveryVerificationFailed, "recovered codes fail hash verification");
    return out;
  }

  const double m_cells = static_cast<double>(codec.cells);
  std::vector<std::int64_t> lifted(msg.code_hash != 0 ? msg.dim : 0);
  for (std::size_t j = 0; j < msg.dim; ++j) {
    const double c = static_cast<double>(msg.codes[j]);
    const double target = x_ref[j] / codec.b_theta * m_cells;
    const double shift = std::floor((c - target) / m_cells + 0.5);
    const std::int64_t n =
        static_cast<std::int64_t>(msg.codes[j]) -
        static_cast<std::int64_t>(shift) * codec.cells;
    out[j] = codec.b_theta * (static_cast<double>(n) / m_cells);
    if (msg.code_hash != 0) lifted[j] = n;
  }
  if (msg.code_hash != 0 && hash_codes(lifted) != msg.code_hash)
    fail(Err::RecoveryVerificationFailed,
         "lifted codes fail hash verification; the a priori bound theta was violated");
  return out;
}

std::vector<double> self_bias(std::span<const double> x, const EncodedMessage& msg,
                              const ModuloCodec& codec) {
  return decode_remote(msg, x, codec);
}

}  // namespace moniqua
