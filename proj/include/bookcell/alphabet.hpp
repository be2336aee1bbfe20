#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace bookcell {

namespace detail {
constexpr std::string_view kSymbols = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+-";

constexpr std::array<std::int8_t, 256> make_symbol_table()
{
    std::array<std::int8_t, 256> t{};
    for (auto& v : t)
        v = -1;
    for (std::size_t i = 0; i < kSymbols.size(); ++i)
        t[static_cast<unsigned char>(kSymbols[i])] = static_cast<std::int8_t>(i);
    return t;
}

inline constexpr auto kSymbolTable = make_symbol_table();
} // namespace detail

/// The 64-symbol genome alphabet: A..Z, a..z, 0..9, '+', '-' (indices 0..63).
class Alphabet64
{
  public:
    static constexpr std::string_view symbols = detail::kSymbols;
    static constexpr int size = 64;

    static constexpr bool contains(char c) noexcept { return detail::kSymbolTable[static_cast<unsigned char>(c)] >= 0; }

    /// Digit value of a symbol; throws InvalidSymbolError for non-members.
    static int index(char c);

    /// Symbol for a digit value in [0, 64).
    static char symbol(int index);

    /// True if every character of `s` is a member.
    static bool valid(std::string_view s) noexcept;

    /// Throws InvalidSymbolError naming the first offending character.
    static void require_valid(std::string_view s, std::string_view what);
};

} // namespace bookcell
