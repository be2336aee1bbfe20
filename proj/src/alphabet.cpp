#include "bookcell/alphabet.hpp"

#include <string>

#include "bookcell/errors.hpp"

namespace bookcell {

int Alphabet64::index(char c)
{
    const int v = detail::kSymbolTable[static_cast<unsigned char>(c)];
    if (v < 0)
        throw InvalidSymbolError(std::string("symbol '") + c + "' is not in the 64-symbol alphabet");
    return v;
}

char Alphabet64::symbol(int index)
{
    if (index < 0 || index >= size)
        throw InvalidSymbolError("digit " + std::to_string(index) + " is outside [0, 64)");
    return symbols[static_cast<std::size_t>(index)];
}

bool Alphabet64::valid(std::string_view s) noexcept
{
    for (char c : s)
        if (!contains(c))
            return false;
    return true;
}

void Alphabet64::require_valid(std::string_view s, std::string_view what)
{
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!contains(s[i]))
            throw InvalidSymbolError(std::string(what) + ": symbol '" + s[i] + "' at offset " + std::to_string(i) +
                                     " is not in the 64-symbol alphabet");
    }
}

} // namespace bookcell
