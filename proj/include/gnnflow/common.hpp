#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gnnflow {

// Shape or conformability violation between matrices / index sets.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Invalid configuration value (bad enum combination, non-square identity init, ...).
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Operation not defined for the given architecture or loss.
struct UnsupportedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Comparison models do not share an output; eq-multi style comparisons are undefined.
struct ComparisonUndefinedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File-level parse failure. Carries the offending file and 1-based line when known.
struct ParseError : std::runtime_error {
    ParseError(const std::string& file, long line, const std::string& what)
        : std::runtime_error(file + (line > 0 ? ":" + std::to_string(line) : "") + ": " + what),
          file_name(file),
          line_number(line) {}
    std::string file_name;
    long line_number;
};

// Deterministic RNG (splitmix64) with a portable output sequence. The double
// conversions avoid the implementation-defined std::*_distribution wrappers so
// identical seeds give bit-identical streams on any conforming toolchain.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed + 0x9e3779b97f4a7c15ull) {}

    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; draws exactly two uniforms per call.
    double gaussian();

    // Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n);

private:
    std::uint64_t state_;
};

// Formats a double with 17 significant digits ('.' separator, no locale),
// enough to round-trip any IEEE double. Used for all CSV output.
std::string format_float(double value);

}  // namespace gnnflow
