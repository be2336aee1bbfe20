#pragma once

#include <string>

#include "bookcell/alphabet.hpp"
#include "bookcell/genome.hpp"
#include "bookcell/rng.hpp"

namespace testing_support {

inline const std::string kSymbols = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+-";

/// Payload symbols: 15 fixed-field digits from `head`, then the child
/// bookmarker length and symbols, then the weights padded with `fill` and
/// ending with `tail`.
inline std::string make_payload(const bookcell::PayloadLayout& layout, const std::string& head,
                                const std::string& child_marker, char fill, const std::string& tail)
{
    std::string p = head.substr(0, 15);
    p += kSymbols[child_marker.size()];
    p += child_marker;
    const std::size_t weights = layout.shape.weight_count();
    p += std::string(weights - tail.size(), fill);
    p += tail;
    return p;
}

inline std::string random_symbols(bookcell::RngStream& rng, std::size_t n)
{
    std::string s(n, 'A');
    for (auto& c : s)
        c = kSymbols[rng.below(64)];
    return s;
}

} // namespace testing_support
