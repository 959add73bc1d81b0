#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace epigen
{

/// Tags separating the random streams of the different samplers.
enum class StreamTag : std::uint64_t {
    individual = 1,
    contacts   = 2,
    tree       = 3,
    tree_node  = 4,
    chain      = 5,
    replica    = 6,
    course     = 7,
    palm       = 8,
    test       = 99,
};

constexpr std::uint64_t mix64(std::uint64_t x)
{
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

/// xoshiro256** generator whose state is a pure function of a (seed, tag, index) key.
///
/// Two streams built from the same key produce identical sequences; streams derived
/// from different keys are treated as independent. This is what makes replicas,
/// per-individual randomness and lazily expanded tree nodes reproducible no matter in
/// which order (or on which worker) they are consumed.
class Stream
{
public:
    using result_type = std::uint64_t;

    explicit Stream(std::uint64_t seed = 0, std::uint64_t tag = 0, std::uint64_t index = 0)
        : key_{mix64(mix64(seed + 0x9e3779b97f4a7c15ULL) ^ mix64(tag * 0xd1b54a32d192ed03ULL + 1) ^
                     (index * 0x8cb92ba72f3d8dd7ULL))}
    {
        std::uint64_t sm = key_;
        for (auto& word : state_) {
            sm += 0x9e3779b97f4a7c15ULL;
            word = mix64(sm);
        }
    }

    Stream(std::uint64_t seed, StreamTag tag, std::uint64_t index = 0)
        : Stream(seed, static_cast<std::uint64_t>(tag), index)
    {
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()()
    {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t      = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Child stream keyed by this stream's key; does not advance this stream.
    Stream derive(std::uint64_t tag, std::uint64_t index) const { return Stream(key_, tag, index); }
    Stream derive(StreamTag tag, std::uint64_t index) const
    {
        return derive(static_cast<std::uint64_t>(tag), index);
    }

    std::uint64_t key() const { return key_; }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1].
    double uniform_open0() { return (static_cast<double>((*this)() >> 11) + 1.0) * 0x1.0p-53; }

    double exponential(double rate) { return -std::log(uniform_open0()) / rate; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n)
    {
        // Lemire's multiply-shift with rejection
        unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
        auto low            = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = -n % n;
            while (low < threshold) {
                m   = static_cast<unsigned __int128>((*this)()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    std::uint64_t poisson(double mean);

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t key_;
    std::uint64_t state_[4];
};

} // namespace epigen
