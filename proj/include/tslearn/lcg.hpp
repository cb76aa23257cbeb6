#pragma once

#include <cstdint>
#include <utility>

namespace tsl {

// X_{n+1} = (a * X_n + c) mod m, in exact integer arithmetic.
// a and c must fit in 32 bits and 2 <= m <= 2^32, which keeps a*X + c below 2^64.
struct LcgState {
    std::uint64_t a = 1664525;
    std::uint64_t c = 1013904223;
    std::uint64_t m = std::uint64_t{1} << 32;
    std::uint64_t x = 0;

    friend bool operator==(const LcgState&, const LcgState&) = default;
};

inline constexpr std::uint64_t kLcgMaxModulus = std::uint64_t{1} << 32;

// Default constants seeded with `seed` (reduced mod m).
LcgState default_lcg(std::uint64_t seed);

// Throws ConfigError when the constants violate the limits above or x >= m.
void validate(const LcgState& state);

// Returns (X_{n+1}, state advanced to X_{n+1}).
std::pair<std::uint64_t, LcgState> lcg_next(LcgState state);

// Draws a value in [0,1] as X / (m - 1), advancing `state` in place.
double lcg_unit(LcgState& state);

}  // namespace tsl
