#pragma once

#include <cstdint>
#include <string_view>

namespace bookcell {

/// SplitMix64 output function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Counter-based stream: draw n is mix64(key + n * golden), n = 1, 2, ...
///
/// With key = seed this is exactly the published SplitMix64 sequence. Child
/// streams are keyed by hashing (parent key, stream id), so named streams are
/// independent and the whole state is the pair (key, counter).
class RngStream
{
  public:
    static constexpr std::uint64_t golden = 0x9E3779B97F4A7C15ULL;

    constexpr RngStream() noexcept = default;
    constexpr explicit RngStream(std::uint64_t key, std::uint64_t counter = 0) noexcept
        : key_(key), counter_(counter)
    {
    }

    /// Independent stream for `stream_id` derived from this stream's key.
    constexpr RngStream split(std::uint64_t stream_id) const noexcept
    {
        return RngStream(mix64(key_ ^ mix64(stream_id + golden)));
    }

    /// Stream keyed by a name (FNV-1a of the name is the stream id).
    RngStream split(std::string_view name) const noexcept;

    constexpr std::uint64_t next_u64() noexcept
    {
        ++counter_;
        return mix64(key_ + counter_ * golden);
    }

    /// Uniform in [0, 1) with 53 random bits.
    constexpr double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n) by multiply-shift on 64 bits; n must be > 0.
    std::uint64_t below(std::uint64_t n) noexcept;

    constexpr bool bernoulli(double p) noexcept { return p > 0.0 && uniform() < p; }

    constexpr std::uint64_t key() const noexcept { return key_; }
    constexpr std::uint64_t counter() const noexcept { return counter_; }

    friend constexpr bool operator==(const RngStream&, const RngStream&) = default;

  private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

} // namespace bookcell
