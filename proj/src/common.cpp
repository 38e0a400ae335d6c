#include "contlab/common.hpp"

#include <cmath>

namespace contlab {

const char* errc_name(Errc code) {
    switch (code) {
        case Errc::dimension: return "dimension";
        case Errc::index: return "index";
        case Errc::range: return "range";
        case Errc::sequencing: return "sequencing";
        case Errc::numeric: return "numeric";
        case Errc::config: return "config";
        case Errc::parse: return "parse";
        case Errc::io: return "io";
        case Errc::data: return "data";
        case Errc::state: return "state";
    }
    return "unknown";
}

std::uint64_t Rng::mix(std::uint64_t key, std::uint64_t counter) {
    std::uint64_t z = key + 0x9e3779b97f4a7c15ull * (counter + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

Rng Rng::keyed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t key = 0x6a09e667f3bcc908ull;
    for (std::uint64_t p : parts) key = mix(key, p);
    return Rng(key);
}

double Rng::normal() {
    // u1 in (0, 1] so the log is finite.
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::uint64_t Rng::next_below(std::uint64_t n) {
    if (n == 0) fail(Errc::range, "next_below: n must be positive");
    // Rejection sampling keeps the draw unbiased and deterministic.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
}

void Rng::shuffle(std::vector<std::size_t>& indices) {
    for (std::size_t i = indices.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(next_below(i));
        std::swap(indices[i - 1], indices[j]);
    }
}

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string to_hex(std::uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xf];
        value >>= 4;
    }
    return out;
}

bool all_finite(const Vec& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace contlab
