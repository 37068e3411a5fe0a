#pragma once

#include <cstdint>
#include <random>

namespace ctwa {

/// splitmix64 finalizer; a bijection on 64-bit integers.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Random source owned by exactly one trajectory.
///
/// Streams are keyed by (master_seed, trajectory index); for a fixed master seed the map
/// from index to engine seed is injective, so trajectory k draws the same numbers no matter
/// which worker runs it.
class RandomStream {
  public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    static RandomStream for_trajectory(std::uint64_t master_seed, std::uint64_t index) {
        return RandomStream(mix64(mix64(master_seed) + index));
    }

    double normal() { return normal_(engine_); }
    /// Uniform on [0, 1).
    double uniform() { return uniform_(engine_); }

    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace ctwa
