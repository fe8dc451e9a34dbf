#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cfeg {

/// Raised when a caller violates an operation's precondition.
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Failure talking to an external model, cause or knowledge backend.
class BackendError : public std::runtime_error {
public:
    BackendError(const std::string& what, bool retryable)
        : std::runtime_error(what), retryable_(retryable) {}
    bool retryable() const noexcept { return retryable_; }

private:
    bool retryable_;
};

/// Missing or malformed configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A stage input no longer matches the digest recorded when it was produced.
class DigestMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Seeded generator. std::mt19937_64 is fully specified by the standard, and
// bounded draws avoid std::uniform_int_distribution so sequences are identical
// across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

    bool coin() { return (engine_() >> 63) != 0; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);

}  // namespace cfeg
