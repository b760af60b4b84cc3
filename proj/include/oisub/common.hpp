#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <string>
#include <string_view>
#include <vector>

namespace oisub {

// Invalid arguments, shape mismatches, out-of-vocabulary words.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Iteration caps exceeded, degenerate numerics (zero variance, low kurtosis).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad checkpoint / activation-file magic, version or truncation problems.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid experiment configuration.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A pipeline stage is missing or has a stale upstream artifact.
class StageError : public std::runtime_error {
public:
    explicit StageError(const std::string& msg) : std::runtime_error(msg) {}
};

// splitmix64, used to derive independent stream seeds.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic RNG with hand-rolled distributions. std::uniform_*_distribution
// is implementation-defined, which would break cross-platform reproducibility,
// so every draw here is specified down to the bit.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t s = seed;
        for (auto& w : state_) w = splitmix64(s);
    }

    // xoshiro256**
    uint64_t next_u64() {
        auto rotl = [](uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // uniform in [0, n)
    uint64_t next_below(uint64_t n) {
        // rejection sampling, unbiased
        const uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // uniform in [0, 1)
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // standard normal, Box-Muller (one value per call, cached pair discarded
    // to keep the draw sequence simple and deterministic)
    double next_gaussian() {
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 1e-300) u1 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Fisher-Yates
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = next_below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct indices from [0, n), in draw order
    std::vector<size_t> sample_without_replacement(size_t n, size_t k);

private:
    uint64_t state_[4];
};

inline std::vector<size_t> Rng::sample_without_replacement(size_t n, size_t k) {
    if (k > n) throw InputError("sample_without_replacement: k > n");
    // Floyd's algorithm would need a set; for the pool sizes here a partial
    // Fisher-Yates over an index vector is fast enough and order-stable.
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    std::vector<size_t> out;
    out.reserve(k);
    for (size_t i = 0; i < k; ++i) {
        size_t j = i + next_below(n - i);
        std::swap(idx[i], idx[j]);
        out.push_back(idx[i]);
    }
    return out;
}

// FNV-1a, used for artifact content hashes in manifests.
inline uint64_t fnv1a(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t fnv1a(std::string_view s, uint64_t h = 0xcbf29ce484222325ULL) {
    return fnv1a(s.data(), s.size(), h);
}

}  // namespace oisub
