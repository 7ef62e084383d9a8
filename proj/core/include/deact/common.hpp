#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace deact {

/// Simulation time in picoseconds. Configuration and reports use nanoseconds.
using Tick = std::uint64_t;

inline constexpr Tick kTicksPerNs = 1000;

constexpr Tick ns_to_ticks(double ns)
{
    return static_cast<Tick>(ns * static_cast<double>(kTicksPerNs) + 0.5);
}

constexpr double ticks_to_ns(Tick t)
{
    return static_cast<double>(t) / static_cast<double>(kTicksPerNs);
}

/// Deterministic random source. std:: distributions are implementation
/// defined, so bounded integers and unit reals are derived here directly.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound)
    {
        if (bound <= 1)
            return 0;
        __extension__ using U128 = unsigned __int128;
        const U128 m = static_cast<U128>(next()) * bound;
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Uniform real in [0, 1).
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
};

/// splitmix64 finalizer; used to derive independent seeds from a run seed.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt)
{
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Raised for invalid user input; carries one message per offending field.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> issues);
    explicit ConfigError(const std::string& issue) : ConfigError(std::vector<std::string>{issue}) {}

    const std::vector<std::string>& issues() const { return issues_; }

private:
    std::vector<std::string> issues_;
};

/// Raised when the simulated hardware reaches a state its protocol forbids
/// (a simulator bug, never a modeled fault).
class ProtocolViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Raised when the broker cannot satisfy an allocation from any zone.
class OutOfMemory : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace deact
