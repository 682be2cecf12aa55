#pragma once

#include <cstdint>

namespace cow {

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Small generator keyed by (seed, index, stream).
///
/// Every frame (or attack block) owns its own streams, so any part of a run
/// can be regenerated in isolation and the output does not depend on how
/// frames are partitioned across threads.
class KeyedRng {
public:
    KeyedRng(std::uint64_t seed, std::uint64_t index, std::uint64_t stream)
        : state_(mix64(mix64(seed + 0x9e3779b97f4a7c15ULL) ^ mix64(index * 0xd1b54a32d192ed03ULL + stream)))
    {
    }

    std::uint64_t next()
    {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::uint64_t state_;
};

namespace stream {
inline constexpr std::uint64_t source = 0;     // frame kind, Eve, Bob's splitter
inline constexpr std::uint64_t detection = 1;  // detector gates
inline constexpr std::uint64_t attack = 2;     // per-block attack mode
inline constexpr std::uint64_t protocol = 3;   // public sampling randomness
}  // namespace stream

}  // namespace cow
