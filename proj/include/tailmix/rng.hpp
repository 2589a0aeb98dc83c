#pragma once
#include <cstdint>
#include <iosfwd>
#include <random>

namespace tailmix {

// Deterministic random source. The engine is std::mt19937_64 (its state has a
// standardized textual form, so it round-trips through checkpoints exactly),
// but every variate is derived here by explicit arithmetic instead of the
// std::*_distribution classes, whose draw sequences are implementation
// defined. Identical state therefore yields identical draws on any platform.
class Rng {
public:
    Rng() : engine_(0) {}
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1): 53 random mantissa bits.
    double uniform();

    // Uniform on (0, 1), never returns an endpoint.
    double uniform_open();

    // Unbiased uniform integer in [0, n). n must be positive.
    uint64_t uniform_below(uint64_t n);

    // Standard normal via Box-Muller; consumes exactly two uniforms per call
    // and keeps no cached state.
    double normal();

    // Beta(alpha, alpha) on [0, 1]; alpha must be positive.
    double beta_symmetric(double alpha);

    void save(std::ostream& os) const;
    void load(std::istream& is);

    bool operator==(const Rng& o) const { return engine_ == o.engine_; }

private:
    std::mt19937_64 engine_;
};

// Deterministic 64-bit FNV-1a, used for run-directory names and for deriving
// per-class stream seeds.
uint64_t fnv1a64(const void* data, size_t len);
uint64_t fnv1a64(const std::string& s);

} // namespace tailmix
