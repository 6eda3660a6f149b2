#pragma once

#include <cstdint>
#include <vector>

namespace ambiup {

/// PCG64 (XSL-RR 128/64, setseq variant). All randomized stages in the
/// toolkit draw from this generator so that a seed reproduces a run
/// byte-for-byte. Stream constants below are fixed for the project; do not
/// change them or previously recorded seeds stop regenerating their outputs.
class Pcg64 {
public:
    explicit Pcg64(std::uint64_t seed, std::uint64_t stream = kDefaultStream) {
        inc_ = (static_cast<state_t>(stream) << 1u) | 1u;
        state_ = 0u;
        next_u64();
        state_ += seed;
        next_u64();
    }

    std::uint64_t next_u64() {
        state_ = state_ * kMultiplier + inc_;
        const std::uint64_t xored =
            static_cast<std::uint64_t>(state_ >> 64) ^ static_cast<std::uint64_t>(state_);
        const unsigned rot = static_cast<unsigned>(state_ >> 122);
        return (xored >> rot) | (xored << ((64u - rot) & 63u));
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_int(std::uint64_t n);

    /// Standard normal via Box-Muller (cached spare kept for determinism).
    double normal();

    std::vector<double> normal_vector(std::size_t n);

    static constexpr std::uint64_t kDefaultStream = 0x5851f42d4c957f2dULL;

private:
    using state_t = unsigned __int128;
    static constexpr state_t kMultiplier =
        (static_cast<state_t>(2549297995355413924ULL) << 64) | 4865540595714422341ULL;

    state_t state_ = 0;
    state_t inc_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Stable per-item seed derivation (splitmix64 finalizer over seed and index);
/// used to give every corpus pair / batch example an independent stream so
/// results do not depend on worker count or evaluation order.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace ambiup
