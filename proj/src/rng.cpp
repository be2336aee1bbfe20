#include "bookcell/rng.hpp"

namespace bookcell {

RngStream RngStream::split(std::string_view name) const noexcept
{
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return split(h);
}

std::uint64_t RngStream::below(std::uint64_t n) noexcept
{
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

} // namespace bookcell
