#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace contlab {

using Vec = std::vector<double>;

// Error kinds surfaced by the library. The C API maps these onto status codes.
enum class Errc {
    dimension,   // mismatched vector/matrix sizes
    index,       // out-of-range element or class index
    range,       // invalid class range
    sequencing,  // operation invoked at the wrong point of a task stream
    numeric,     // non-finite values where finite ones are required
    config,      // invalid run configuration
    parse,       // malformed input text (config file, csv row)
    io,          // file system failure
    data,        // dataset violates a precondition
    state,       // object not in a usable state for the call
};

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

const char* errc_name(Errc code);

// Counter-based deterministic generator (splitmix64 output function). The i-th
// draw is a pure function of (key, i), so streams are reproducible across
// platforms and independent of call history elsewhere.
class Rng {
public:
    explicit Rng(std::uint64_t key) : key_(key) {}

    // Derives a fresh key from several parts, for disjoint sub-streams such as
    // (seed, task, epoch).
    static Rng keyed(std::initializer_list<std::uint64_t> parts);

    std::uint64_t next_u64() { return mix(key_, counter_++); }

    // Uniform in [0, 1) with 53 random bits.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // Standard normal via Box-Muller; two draws per call, no cached spare.
    double normal();

    std::uint64_t next_below(std::uint64_t n);

    // Fisher-Yates over an index array.
    void shuffle(std::vector<std::size_t>& indices);

    static std::uint64_t mix(std::uint64_t key, std::uint64_t counter);

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// FNV-1a over raw bytes; used for config hashes and snapshot digests.
std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ull);

std::string to_hex(std::uint64_t value);

bool all_finite(const Vec& v);

}  // namespace contlab
