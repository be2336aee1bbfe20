#include "bookcell/genome.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bookcell/alphabet.hpp"
#include "bookcell/errors.hpp"

namespace bookcell {

namespace {

constexpr std::size_t kMaxAdvanceDigits = 10;

/// Reads `count` base-64 digits from `book` circularly starting at `pos`.
std::uint64_t read_digits(std::string_view book, std::size_t& pos, std::size_t count)
{
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < count; ++i) {
        v = v * 64 + static_cast<std::uint64_t>(Alphabet64::index(book[pos % book.size()]));
        ++pos;
    }
    return v;
}

/// Inverse of read_digits; throws EncodingError when `value` needs more digits.
void write_digits(std::string& out, std::uint64_t value, std::size_t count, std::string_view field)
{
    std::string digits(count, 'A');
    for (std::size_t i = count; i-- > 0;) {
        digits[i] = Alphabet64::symbol(static_cast<int>(value % 64));
        value /= 64;
    }
    if (value != 0)
        throw EncodingError(std::string(field) + " does not fit in " + std::to_string(count) + " base-64 digits");
    out += digits;
}

std::uint64_t max_value(std::size_t digits)
{
    std::uint64_t v = 1;
    for (std::size_t i = 0; i < digits; ++i)
        v *= 64;
    return v - 1;
}

std::uint64_t quantize(double x, double lo, double hi, std::size_t digits, std::string_view field)
{
    if (!(x >= lo - 1e-12 && x <= hi + 1e-12))
        throw EncodingError(std::string(field) + " value " + std::to_string(x) + " outside [" + std::to_string(lo) +
                            ", " + std::to_string(hi) + "]");
    const auto top = static_cast<double>(max_value(digits));
    const double scaled = hi > lo ? (x - lo) / (hi - lo) * top : 0.0;
    return static_cast<std::uint64_t>(std::clamp(std::llround(scaled), 0LL, static_cast<long long>(top)));
}

double dequantize(std::uint64_t v, double lo, double hi, std::size_t digits)
{
    return lo + (hi - lo) * static_cast<double>(v) / static_cast<double>(max_value(digits));
}

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

} // namespace

std::string_view to_string(ActionKind kind) noexcept
{
    switch (kind) {
    case ActionKind::Expansion:
        return "EXPANSION";
    case ActionKind::Connection:
        return "CONNECTION";
    case ActionKind::Disconnection:
        return "DISCONNECTION";
    case ActionKind::Transition:
        return "TRANSITION";
    }
    return "?";
}

ActionKind classify_action(char symbol)
{
    return static_cast<ActionKind>(Alphabet64::index(symbol) / 16);
}

std::optional<std::size_t> find_read_position(std::string_view book, std::string_view bookmarker)
{
    if (bookmarker.empty() || book.empty())
        return std::nullopt;
    const auto at = book.find(bookmarker);
    if (at == std::string_view::npos)
        return std::nullopt;
    return (at + bookmarker.size()) % book.size();
}

std::string extract_every_other(std::string_view tail, std::size_t count, std::uint64_t advance)
{
    return extract_every_other(tail, 0, count, advance);
}

std::string extract_every_other(std::string_view book, std::size_t start, std::size_t count, std::uint64_t advance)
{
    std::string out;
    if (count == 0)
        return out;
    if (book.empty())
        throw MalformedGenomeError("cannot extract from an empty book");
    out.reserve(count);
    const std::size_t n = book.size();
    const std::size_t base = (start % n + static_cast<std::size_t>(advance % n)) % n;
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(book[(base + 2 * (i % n)) % n]);
    return out;
}

std::uint64_t decode_advance(std::string_view advance)
{
    if (advance.empty())
        throw MalformedGenomeError("advance must hold at least one symbol");
    if (advance.size() > kMaxAdvanceDigits)
        throw MalformedGenomeError("advance longer than " + std::to_string(kMaxAdvanceDigits) + " symbols");
    std::size_t pos = 0;
    return read_digits(advance, pos, advance.size());
}

DecodedExpansion decode_expansion(std::string_view book, std::size_t start, const PayloadLayout& layout)
{
    if (book.empty())
        throw MalformedGenomeError("cannot decode a payload from an empty book");

    DecodedExpansion d;
    auto& p = d.payload;
    std::size_t pos = start;
    for (auto& a : p.absorption)
        a = dequantize(read_digits(book, pos, PayloadLayout::absorption_digits), 0.0, 1.0,
                       PayloadLayout::absorption_digits);
    p.luminosity =
        dequantize(read_digits(book, pos, PayloadLayout::luminosity_digits), 0.0, 1.0, PayloadLayout::luminosity_digits);
    p.mass = dequantize(read_digits(book, pos, PayloadLayout::mass_digits), layout.mass_min, layout.mass_max,
                        PayloadLayout::mass_digits);
    p.radius = dequantize(read_digits(book, pos, PayloadLayout::radius_digits), layout.radius_min, layout.radius_max,
                          PayloadLayout::radius_digits);
    p.copy_start = static_cast<std::size_t>(read_digits(book, pos, PayloadLayout::copy_digits) % book.size());
    p.copy_end = static_cast<std::size_t>(read_digits(book, pos, PayloadLayout::copy_digits) % book.size());

    const auto marker_len =
        std::min<std::size_t>(static_cast<std::size_t>(read_digits(book, pos, 1)), layout.bookmarker_max);
    p.child_bookmarker.reserve(marker_len);
    for (std::size_t i = 0; i < marker_len; ++i, ++pos)
        p.child_bookmarker.push_back(book[pos % book.size()]);

    const std::size_t n_weights = layout.shape.weight_count();
    p.weights.resize(n_weights);
    for (std::size_t i = 0; i < n_weights; ++i)
        p.weights[i] = 2.0 * static_cast<double>(read_digits(book, pos, 1)) / 63.0 - 1.0;

    d.width = pos - start;
    return d;
}

std::string encode_payload(const ExpansionPayload& p, const PayloadLayout& layout)
{
    if (p.weights.size() != layout.shape.weight_count())
        throw EncodingError("payload carries " + std::to_string(p.weights.size()) + " weights, layout needs " +
                            std::to_string(layout.shape.weight_count()));
    if (p.child_bookmarker.size() > layout.bookmarker_max)
        throw EncodingError("child bookmarker longer than " + std::to_string(layout.bookmarker_max));
    Alphabet64::require_valid(p.child_bookmarker, "child bookmarker");

    std::string out;
    out.reserve(layout.width(p.child_bookmarker.size()));
    for (double a : p.absorption)
        write_digits(out, quantize(a, 0.0, 1.0, PayloadLayout::absorption_digits, "absorption"),
                     PayloadLayout::absorption_digits, "absorption");
    write_digits(out, quantize(p.luminosity, 0.0, 1.0, PayloadLayout::luminosity_digits, "luminosity"),
                 PayloadLayout::luminosity_digits, "luminosity");
    write_digits(out, quantize(p.mass, layout.mass_min, layout.mass_max, PayloadLayout::mass_digits, "mass"),
                 PayloadLayout::mass_digits, "mass");
    write_digits(out,
                 quantize(p.radius, layout.radius_min, layout.radius_max, PayloadLayout::radius_digits, "radius"),
                 PayloadLayout::radius_digits, "radius");
    write_digits(out, p.copy_start, PayloadLayout::copy_digits, "copy_start");
    write_digits(out, p.copy_end, PayloadLayout::copy_digits, "copy_end");
    write_digits(out, p.child_bookmarker.size(), 1, "child bookmarker length");
    out += p.child_bookmarker;
    for (double w : p.weights)
        write_digits(out, quantize(w, -1.0, 1.0, 1, "weight"), 1, "weight");
    return out;
}

std::optional<ReadOutcome> read_step(const Genome& g, const PayloadLayout& layout)
{
    const auto pos = find_read_position(g.book, g.bookmarker);
    if (!pos)
        return std::nullopt;

    const std::size_t n = g.book.size();
    ReadOutcome r;
    r.read_position = *pos;
    r.action = classify_action(g.book[*pos]);

    std::size_t tail = (*pos + 1) % n;
    if (r.action == ActionKind::Expansion) {
        auto decoded = decode_expansion(g.book, tail, layout);
        tail = (tail + decoded.width) % n;
        r.payload = std::move(decoded.payload);
    }

    const std::uint64_t shift = decode_advance(g.advance);
    const std::size_t count = g.bookmarker.size();
    r.next_bookmarker = extract_every_other(g.book, tail, count, shift);

    // The new Advance starts right after the last extracted symbol.
    const std::size_t after = (tail + static_cast<std::size_t>(shift % n) + 2 * (count - 1) + 1) % n;
    r.next_advance.reserve(g.advance.size());
    for (std::size_t i = 0; i < g.advance.size(); ++i)
        r.next_advance.push_back(g.book[(after + i) % n]);
    return r;
}

std::string copy_range(std::string_view book, std::size_t start, std::size_t end)
{
    if (book.empty())
        return {};
    const std::size_t n = book.size();
    start %= n;
    end %= n;
    const std::size_t len = (end + n - start) % n + 1;
    std::string out;
    out.reserve(len);
    for (std::size_t i = 0; i < len; ++i)
        out.push_back(book[(start + i) % n]);
    return out;
}

GenomeFile parse_genome_text(std::string_view text)
{
    GenomeFile f;
    bool have_book = false, have_marker = false, have_advance = false;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#')
            continue;
        const auto colon = line.find(':');
        if (colon == std::string_view::npos)
            throw MalformedGenomeError("line " + std::to_string(line_no) + ": expected 'key: symbols'");
        const auto key = trim(line.substr(0, colon));
        const auto value = trim(line.substr(colon + 1));
        Alphabet64::require_valid(value, "line " + std::to_string(line_no));
        if (key == "book") {
            f.genome.book = value;
            have_book = true;
        } else if (key == "marker") {
            f.genome.bookmarker = value;
            have_marker = true;
        } else if (key == "advance") {
            f.genome.advance = value;
            have_advance = true;
        } else if (key == "phenotype") {
            f.phenotype = std::string(value);
        } else {
            throw MalformedGenomeError("line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
        }
    }
    if (!have_book || !have_marker || !have_advance)
        throw MalformedGenomeError("genome text needs book:, marker: and advance: lines");
    if (f.genome.book.empty())
        throw MalformedGenomeError("book must hold at least one symbol");
    if (f.genome.advance.empty())
        throw MalformedGenomeError("advance must hold at least one symbol");
    return f;
}

std::string format_genome_text(const GenomeFile& f)
{
    std::string out = "book: " + f.genome.book + "\nmarker: " + f.genome.bookmarker + "\nadvance: " + f.genome.advance +
                      "\n";
    if (f.phenotype)
        out += "phenotype: " + *f.phenotype + "\n";
    return out;
}

GenomeFile load_genome_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw MalformedGenomeError("cannot open genome file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_genome_text(ss.str());
}

void save_genome_file(const std::string& path, const GenomeFile& f)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw MalformedGenomeError("cannot write genome file '" + path + "'");
    out << format_genome_text(f);
}

} // namespace bookcell
