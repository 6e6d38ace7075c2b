#pragma once

#include <cstdint>
#include <random>

namespace kcsolve {

/// Seeded uniform [0, 1) stream. mt19937_64 is fully specified by the
/// standard and the bits-to-double map is ours, so draws are identical
/// across standard libraries.
class UniformStream {
public:
    explicit UniformStream(std::uint64_t seed) : engine_(seed) {}

    double next() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
};

} // namespace kcsolve
