#include "moniqua/quant.hpp"

#include <cmath>

namespace moniqua {

QuantKind parse_quant_kind(const std::string& s) {
  if (s == "stochastic_round") return QuantKind::StochasticRound;
  if (s == "nearest_round") return QuantKind::NearestRound;
  if (s == "randomized_gossip") return QuantKind::RandomizedGossip;
  if (s == "exact") return QuantKind::Exact;
  fail(Err::InvalidParameter, "unknown quantizer kind: " + s);
}

std::string to_string(QuantKind k) {
  switch (k) {
    case QuantKind::StochasticRound: return "stochastic_round";
    case QuantKind::NearestRound: return "nearest_round";
    case QuantKind::RandomizedGossip: return "randomized_gossip";
    case QuantKind::Exact: return "exact";
  }
  return "?";
}

double QuantizerSpec::delta() const {
  switch (kind) {
    case QuantKind::StochasticRound: return step;
    case QuantKind::NearestRound: return step / 2.0;
    case QuantKind::RandomizedGossip: return 0.5;
    case QuantKind::Exact: return 0.0;
  }
  return 0.5;
}

void QuantizerSpec::validate() const {
  if (kind == QuantKind::StochasticRound || kind == QuantKind::NearestRound) {
    if (!(step > 0.0) || !std::isfinite(step))
      fail(Err::InvalidParameter, "quantizer step must be positive, got " + std::to_string(step));
  }
  if (kind == QuantKind::RandomizedGossip) {
    if (!(keep_prob > 0.0 && keep_prob <= 1.0))
      fail(Err::InvalidParameter, "keep_prob must be in (0,1]");
  }
}

static void check_finite(double x) {
  if (!std::isfinite(x)) fail(Err::NumericInput, "quantizer input is not finite");
}

double stochastic_round(double x, double step, double u) {
  check_finite(x);
  if (!(step > 0.0)) fail(Err::InvalidParameter, "step must be positive");
  return step * std::floor(x / step + u);
}

double nearest_round(double x, double step) {
  check_finite(x);
  if (!(step > 0.0)) fail(Err::InvalidParameter, "step must be positive");
  return step * std::floor(x / step + 0.5);
}

double randomized_gossip(double x, double keep_prob, double u) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0))
    fail(Err::InvalidParameter, "keep_prob must be in (0,1]");
  return u < keep_prob ? x : 0.0;
}

double quantize_value(const QuantizerSpec& q, double x, double u) {
  switch (q.kind) {
    case QuantKind::StochasticRound: return stochastic_round(x, q.step, u);
    case QuantKind::NearestRound: return nearest_round(x, q.step);
    case QuantKind::RandomizedGossip: return randomized_gossip(x, q.keep_prob, u);
    case QuantKind::Exact: check_finite(x); return x;
  }
  fail(Err::UnsupportedQuantizer, "unhandled quantizer kind");
}

int bits_required(double delta) {
  if (!(delta > 0.0 && delta < 0.5))
    fail(Err::InvalidParameter,
         "bits_required needs 0 < delta < 1/2, got " + std::to_string(delta));
  return static_cast<int>(std::ceil(std::log2(1.0 / (2.0 * delta) + 1.0)));
}

std::vector<std::uint8_t> pack_codes(const std::vector<std::uint64_t>& codes, int bits) {
  if (bits < 1 || bits > 64) fail(Err::InvalidParameter, "bits per code must be in 1..64");
  const std::uint64_t limit = bits == 64 ? ~0ULL : ((1ULL << bits) - 1ULL);
  std::vector<std::uint8_t> out((codes.size() * static_cast<std::size_t>(bits) + 7) / 8, 0);
  std::size_t bitpos = 0;
  for (std::uint64_t c : codes) {
    if (c > limit)
      fail(Err::Encoding, "code " + std::to_string(c) + " does not fit in " +
                              std::to_string(bits) + " bits");
    for (int b = 0; b < bits; ++b, ++bitpos) {
      if ((c >> b) & 1ULL) out[bitpos / 8] |= static_cast<std::uint8_t>(1u << (bitpos % 8));
    }
  }
  return out;
}

std::vector<std::uint64_t> unpack_codes(const std::vector<std::uint8_t>& bytes, int bits,
                                        std::size_t count) {
  if (bits < 1 || bits > 64) fail(Err::InvalidParameter, "bits per code must be in 1..64");
  if (bytes.size() * 8 < count * static_cast<std::size_t>(bits))
    fail(Err::Encoding, "packed buffer too short");
  std::vector<std::uint64_t> out(count, 0);
  std::size_t bitpos = 0;
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t c = 0;
    for (int b = 0; b < bits; ++b, ++bitpos) {
      if ((bytes[bitpos / 8] >> (bitpos % 8)) & 1u) c |= (1ULL << b);
    }
    out[i] = c;
  }
  return out;
}

}  // namespace moniqua
