#pragma once
#include <cstdint>
#include <random>
#include <string>

namespace unimat {

// Deterministic RNG used everywhere randomness is needed.  Gaussian draws go
// through an explicit Box-Muller transform rather than std::normal_distribution,
// whose output sequence is implementation-defined; this keeps sampled values
// identical across standard libraries.
class rng {
  public:
    explicit rng(std::uint64_t seed = 0) : eng_(seed) {}

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal.  Draws are produced in pairs; the spare is cached.
    double gaussian();

    // Uniform integer in [0, n).  Rejection sampling, so no modulo bias.
    std::uint64_t uniform_int(std::uint64_t n);

    std::uint64_t raw() { return eng_(); }

    // Portable state round trip (stream of decimal words).
    std::string save_state() const;
    void load_state(const std::string& s);

  private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Mixes a seed with a sequence of tags so independent consumers (augmentation,
// per-step dropout, sampling chains, ...) get decorrelated streams that are
// still pure functions of (seed, tags).
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);
std::uint64_t hash_tag(const std::string& s);

} // namespace unimat
