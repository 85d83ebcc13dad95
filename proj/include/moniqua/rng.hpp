#pragma once

#include <cstdint>

namespace moniqua {

// Counter-based random numbers. Every draw is a pure function of
// (base seed, stream, up to three counters), so any loop order and any
// thread count reproduce the same values. The shared-randomness draws
// used by quantizers key on (iteration, coordinate) and deliberately
// exclude the worker id, making all workers see the same offset u.
enum class Stream : std::uint64_t {
  QuantShared = 0x51,
  QuantWorker = 0x52,
  GradNoise = 0x6e,
  PairChoice = 0x70,
  Staleness = 0x73,
  ObjectiveGen = 0x6f,
  MixingProbe = 0x6d,
  Test = 0x74,
};

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class CounterRng {
public:
  CounterRng() : key_(0) {}
  CounterRng(std::uint64_t base_seed, Stream stream)
      : key_(mix64(base_seed ^ (static_cast<std::uint64_t>(stream) << 48))) {}

  std::uint64_t word(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    std::uint64_t h = key_;
    h = mix64(h ^ a);
    h = mix64(h ^ b);
    h = mix64(h ^ c);
    return h;
  }

  // Uniform in [0, 1) with 53 significant bits.
  double u01(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    return static_cast<double>(word(a, b, c) >> 11) * 0x1.0p-53;
  }

  // Uniform in [-1, 1).
  double sym(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    return 2.0 * u01(a, b, c) - 1.0;
  }

  std::uint64_t pick(std::uint64_t n, std::uint64_t a, std::uint64_t b = 0,
                     std::uint64_t c = 0) const {
    return word(a, b, c) % n;
  }

private:
  std::uint64_t key_;
};

}  // namespace moniqua
