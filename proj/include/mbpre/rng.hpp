#pragma once

#include <cstdint>
#include <random>

namespace mbpre {

// splitmix64 finalizer; used to derive independent seeds from a master seed.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed for a named sub-experiment, so that e.g. the walk replicas and the
// variance replicas of one run never share streams.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return mix64(seed ^ mix64(tag + 0x632be59bd9b4e019ULL));
}

// A random stream identified by (seed, stream id). Replica r of any Monte
// Carlo kernel uses stream id r, which makes results independent of how
// replicas are distributed over threads.
class RandomStream {
 public:
  using engine_type = std::mt19937_64;

  RandomStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id), engine_(make_engine(seed, stream_id)) {}

  // Uniform on [0, 1).
  double uniform() { return unit_(engine_); }

  engine_type& engine() { return engine_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  static engine_type make_engine(std::uint64_t seed, std::uint64_t id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(id), static_cast<std::uint32_t>(id >> 32)};
    return engine_type(seq);
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  engine_type engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

}  // namespace mbpre
