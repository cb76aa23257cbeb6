#include "tslearn/lcg.hpp"

#include <string>

#include "tslearn/errors.hpp"

namespace tsl {

LcgState default_lcg(std::uint64_t seed) {
    LcgState s;
    s.x = seed % s.m;
    return s;
}

void validate(const LcgState& s) {
    if (s.m == 0) throw ConfigError("lcg modulus m must be non-zero");
    if (s.m < 2 || s.m > kLcgMaxModulus) {
        throw ConfigError("lcg modulus m=" + std::to_string(s.m) + " outside [2, 2^32]");
    }
    if (s.a >= kLcgMaxModulus || s.c >= kLcgMaxModulus) {
        throw ConfigError("lcg multiplier and increment must be below 2^32");
    }
    if (s.x >= s.m) throw ConfigError("lcg state " + std::to_string(s.x) + " not below modulus " + std::to_string(s.m));
}

std::pair<std::uint64_t, LcgState> lcg_next(LcgState s) {
    validate(s);
    // a, x < 2^32 and c < 2^32: a*x + c <= (2^32-1)^2 + 2^32 - 1 < 2^64.
    s.x = (s.a * s.x + s.c) % s.m;
    return {s.x, s};
}

double lcg_unit(LcgState& s) {
    auto [value, next] = lcg_next(s);
    s = next;
    return static_cast<double>(value) / static_cast<double>(s.m - 1);
}

}  // namespace tsl
