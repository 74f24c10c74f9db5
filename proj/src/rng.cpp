#include "sharpefolio/rng.hpp"

#include <cmath>
#include <numbers>

namespace sharpefolio {

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

Rng Rng::split(std::string_view label) const { return Rng(Raw{}, mix(key_ ^ mix(fnv1a(label)))); }

Rng Rng::split(std::uint64_t index) const {
    return Rng(Raw{}, mix(key_ ^ mix(index * kGamma + 0x632be59bd9b4e019ULL)));
}

double Rng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
}

}  // namespace sharpefolio
