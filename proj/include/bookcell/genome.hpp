#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bookcell/neurocell.hpp"

namespace bookcell {

enum class ActionKind
{
    Expansion,
    Connection,
    Disconnection,
    Transition,
};

std::string_view to_string(ActionKind kind) noexcept;

/// Quadrant of the symbol's alphabet index, 16 symbols per action.
ActionKind classify_action(char symbol);

/// A cell's program: the Book, the read head (Bookmarker) and the Advance.
struct Genome
{
    std::string book;
    std::string bookmarker;
    std::string advance;

    friend bool operator==(const Genome&, const Genome&) = default;
};

/// Field ranges used to decode and encode EXPANSION payloads.
struct PayloadLayout
{
    NetShape shape{};
    double mass_min = 0.2;
    double mass_max = 2.0;
    double radius_min = 0.04;
    double radius_max = 0.16;
    std::size_t bookmarker_max = 8;

    static constexpr std::size_t absorption_digits = 1;
    static constexpr std::size_t luminosity_digits = 2;
    static constexpr std::size_t mass_digits = 2;
    static constexpr std::size_t radius_digits = 2;
    static constexpr std::size_t copy_digits = 3;

    /// Width of a payload whose child bookmarker has `bookmarker_length` symbols.
    std::size_t width(std::size_t bookmarker_length) const noexcept
    {
        return 3 * absorption_digits + luminosity_digits + mass_digits + radius_digits + 2 * copy_digits + 1 +
               bookmarker_length + shape.weight_count();
    }
};

/// Decoded specification of the cell an EXPANSION creates.
struct ExpansionPayload
{
    std::array<double, 3> absorption{};
    double luminosity = 0.0;
    double mass = 1.0;
    double radius = 0.16;
    std::vector<double> weights;
    std::size_t copy_start = 0;
    std::size_t copy_end = 0;
    std::string child_bookmarker;
};

struct DecodedExpansion
{
    ExpansionPayload payload;
    std::size_t width = 0;
};

struct ReadOutcome
{
    ActionKind action = ActionKind::Transition;
    std::optional<ExpansionPayload> payload;
    std::string next_bookmarker;
    std::string next_advance;
    /// Book index of the action symbol.
    std::size_t read_position = 0;
};

/// Index just after the leftmost occurrence of `bookmarker` in `book`,
/// wrapping to 0 past the end. Empty or absent bookmarker means dormant.
std::optional<std::size_t> find_read_position(std::string_view book, std::string_view bookmarker);

/// Characters at offsets advance, advance+2, ... of `tail`, read circularly.
std::string extract_every_other(std::string_view tail, std::size_t count, std::uint64_t advance);

/// Same, reading `book` circularly from `start`.
std::string extract_every_other(std::string_view book, std::size_t start, std::size_t count, std::uint64_t advance);

/// Positional base-64 value, most significant symbol first.
std::uint64_t decode_advance(std::string_view advance);

/// Decodes the fixed-width payload that starts at `start`, reading circularly.
DecodedExpansion decode_expansion(std::string_view book, std::size_t start, const PayloadLayout& layout);

/// Quantises a payload into symbols; the inverse of decode_expansion up to
/// one quantisation step per field. Throws EncodingError for values outside
/// their field range.
std::string encode_payload(const ExpansionPayload& payload, const PayloadLayout& layout);

/// One interpretation step of the genome, or nothing when dormant.
std::optional<ReadOutcome> read_step(const Genome& genome, const PayloadLayout& layout);

/// Child Book: book[start..end] inclusive, wrapping past the end.
std::string copy_range(std::string_view book, std::size_t start, std::size_t end);

/// Genome plus an optional phenotype string (a payload used to build a seed cell).
struct GenomeFile
{
    Genome genome;
    std::optional<std::string> phenotype;
};

/// Parses the `book:` / `marker:` / `advance:` [/ `phenotype:`] text format.
GenomeFile parse_genome_text(std::string_view text);
std::string format_genome_text(const GenomeFile& file);

GenomeFile load_genome_file(const std::string& path);
void save_genome_file(const std::string& path, const GenomeFile& file);

} // namespace bookcell
