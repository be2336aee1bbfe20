#include <cmath>
#include <set>

#include "doctest.h"
#include "support.hpp"

#include "bookcell/errors.hpp"

using namespace bookcell;
using testing_support::kSymbols;
using testing_support::make_payload;

TEST_SUITE("genome")
{
    TEST_CASE("alphabet has 64 distinct symbols in index order")
    {
        CHECK(Alphabet64::size == 64);
        std::set<char> seen;
        for (int i = 0; i < 64; ++i) {
            CHECK(Alphabet64::symbol(i) == kSymbols[i]);
            CHECK(Alphabet64::index(kSymbols[i]) == i);
            seen.insert(kSymbols[i]);
        }
        CHECK(seen.size() == 64);
        CHECK_FALSE(Alphabet64::contains('*'));
        CHECK_FALSE(Alphabet64::contains(' '));
        CHECK_THROWS_AS(Alphabet64::index('_'), InvalidSymbolError);
        CHECK_THROWS_AS(Alphabet64::require_valid("AB*", "book"), InvalidSymbolError);
    }

    TEST_CASE("action classes by quadrant")
    {
        for (char c : std::string("ABCDEFGHIJKLMNOP"))
            CHECK(classify_action(c) == ActionKind::Expansion);
        for (char c : std::string("QRSTUVWXYZabcdef"))
            CHECK(classify_action(c) == ActionKind::Connection);
        for (char c : std::string("ghijklmnopqrstuv"))
            CHECK(classify_action(c) == ActionKind::Disconnection);
        for (char c : std::string("wxyz0123456789+-"))
            CHECK(classify_action(c) == ActionKind::Transition);
    }

    TEST_CASE("read position follows the bookmarker")
    {
        const std::string book = "ABCDEFGHIJKLMN";
        const auto pos = find_read_position(book, "EF");
        REQUIRE(pos.has_value());
        CHECK(book[*pos] == 'G');
        CHECK(classify_action(book[*pos]) == ActionKind::Expansion);
    }

    TEST_CASE("read position edge cases")
    {
        CHECK_FALSE(find_read_position("ABCDEF", "").has_value());
        CHECK_FALSE(find_read_position("ABCDEF", "XY").has_value());
        CHECK_FALSE(find_read_position("", "A").has_value());
        // Marker at the end wraps to the start.
        CHECK(find_read_position("ABCDEF", "EF") == std::optional<std::size_t>(0));
        // Leftmost occurrence wins.
        CHECK(find_read_position("EFxEFy", "EF") == std::optional<std::size_t>(2));
    }

    TEST_CASE("G, A and P all read as EXPANSION")
    {
        const PayloadLayout layout;
        for (char action : std::string("GAP")) {
            const auto payload = make_payload(layout, "HIJKLMNOPQRSTUV", "WX", 'Z', "abc");
            Genome g{std::string("ABCDEF") + action + payload + "defg", "EF", "A"};
            const auto r = read_step(g, layout);
            REQUIRE(r.has_value());
            CHECK(r->action == ActionKind::Expansion);
            CHECK(r->read_position == 6);
            CHECK(r->next_bookmarker == "df");
        }
    }

    TEST_CASE("EXPANSION payload then every-other bookmarker 'df'")
    {
        const PayloadLayout layout;
        const auto payload = make_payload(layout, "HIJKLMNOPQRSTUV", "WX", 'Z', "abc");
        REQUIRE(payload.size() == layout.width(2));
        REQUIRE(payload.substr(0, 4) == "HIJK");
        REQUIRE(payload.substr(payload.size() - 3) == "abc");
        Genome g{"CDEFA" + payload + "defg", "EF", "A"};
        const auto r = read_step(g, layout);
        REQUIRE(r.has_value());
        CHECK(r->action == ActionKind::Expansion);
        CHECK(r->read_position == 4);
        REQUIRE(r->payload.has_value());
        CHECK(r->payload->child_bookmarker == "WX");
        CHECK(r->next_bookmarker == "df");
        CHECK(r->next_advance == "g");
    }

    TEST_CASE("CONNECTION, DISCONNECTION, TRANSITION read 'df'")
    {
        const PayloadLayout layout;
        const std::pair<char, ActionKind> cases[] = {
            {'Q', ActionKind::Connection}, {'g', ActionKind::Disconnection}, {'w', ActionKind::Transition}};
        for (const auto& [symbol, kind] : cases) {
            Genome g{std::string("ABCDEF") + symbol + "defg", "EF", "A"};
            const auto r = read_step(g, layout);
            REQUIRE(r.has_value());
            CHECK(r->action == kind);
            CHECK_FALSE(r->payload.has_value());
            CHECK(r->next_bookmarker == "df");
        }
    }

    TEST_CASE("repeated EXPANSION and the Advance shift")
    {
        const PayloadLayout layout;
        const auto payload = make_payload(layout, "HIJKLMNOPQRSTUV", "WX", 'Z', "abc");
        const std::string book = "CDEFA" + payload + "EeFghi";

        Genome zero{book, "EF", "A"};
        const auto r0 = read_step(zero, layout);
        REQUIRE(r0.has_value());
        CHECK(r0->action == ActionKind::Expansion);
        CHECK(r0->next_bookmarker == "EF");

        // Advance 2 is the symbol with index 2.
        Genome two{book, "EF", "C"};
        const auto r2 = read_step(two, layout);
        REQUIRE(r2.has_value());
        CHECK(r2->next_bookmarker == "Fh");
        CHECK(r2->next_advance == "i");
    }

    TEST_CASE("every-other extraction and advance decoding")
    {
        CHECK(extract_every_other("defg", 2, 0) == "df");
        CHECK(extract_every_other("EeFghi", 2, 2) == "Fh");
        CHECK(extract_every_other("abc", 3, 0) == "acb");
        CHECK(decode_advance("A") == 0);
        CHECK(decode_advance("C") == 2);
        CHECK(decode_advance("-") == 63);
        CHECK(decode_advance("BA") == 64);
        CHECK_THROWS_AS(decode_advance(""), MalformedGenomeError);
        CHECK_THROWS_AS(decode_advance("A*"), InvalidSymbolError);
    }

    TEST_CASE("dormant genomes read nothing")
    {
        const PayloadLayout layout;
        CHECK_FALSE(read_step(Genome{"", "AB", "A"}, layout).has_value());
        CHECK_FALSE(read_step(Genome{"ABCDEF", "", "A"}, layout).has_value());
        CHECK_FALSE(read_step(Genome{"ABCDEF", "ZZ", "A"}, layout).has_value());
    }

    TEST_CASE("payload fields decode by the quantisation oracle")
    {
        const PayloadLayout layout;
        RngStream rng(99);
        for (int trial = 0; trial < 200; ++trial) {
            const std::string marker = testing_support::random_symbols(rng, rng.below(layout.bookmarker_max + 1));
            std::string p = testing_support::random_symbols(rng, 15);
            p += kSymbols[marker.size()];
            p += marker;
            p += testing_support::random_symbols(rng, layout.shape.weight_count());
            const std::size_t payload_len = p.size();
            p += std::string(262144, 'A');
            const auto d = decode_expansion(p, 0, layout);
            CHECK(d.width == layout.width(marker.size()));
            CHECK(d.width == payload_len);
            const auto v = [&](std::size_t i) { return static_cast<double>(Alphabet64::index(p[i])); };
            for (int k = 0; k < 3; ++k)
                CHECK(d.payload.absorption[k] == doctest::Approx(v(k) / 63.0).epsilon(1e-15));
            CHECK(d.payload.luminosity == doctest::Approx((64 * v(3) + v(4)) / 4095.0).epsilon(1e-15));
            CHECK(d.payload.mass == doctest::Approx(0.2 + 1.8 * (64 * v(5) + v(6)) / 4095.0).epsilon(1e-15));
            CHECK(d.payload.radius == doctest::Approx(0.04 + 0.12 * (64 * v(7) + v(8)) / 4095.0).epsilon(1e-15));
            CHECK(d.payload.copy_start == static_cast<std::size_t>(4096 * v(9) + 64 * v(10) + v(11)));
            CHECK(d.payload.copy_end == static_cast<std::size_t>(4096 * v(12) + 64 * v(13) + v(14)));
            CHECK(d.payload.child_bookmarker == marker);
            REQUIRE(d.payload.weights.size() == layout.shape.weight_count());
            const std::size_t w0 = 16 + marker.size();
            for (std::size_t i = 0; i < d.payload.weights.size(); i += 37)
                CHECK(d.payload.weights[i] == doctest::Approx(2.0 * v(w0 + i) / 63.0 - 1.0).epsilon(1e-15));
        }
    }

    TEST_CASE("oversized child bookmarker length is clamped")
    {
        PayloadLayout layout;
        std::string p(15, 'A');
        p += '-'; // 63
        p += std::string(layout.bookmarker_max, 'Q');
        p += std::string(layout.shape.weight_count(), 'g');
        const auto d = decode_expansion(p, 0, layout);
        CHECK(d.payload.child_bookmarker.size() == layout.bookmarker_max);
        CHECK(d.width == layout.width(layout.bookmarker_max));
    }

    TEST_CASE("encode_payload inverts decode up to one quantum")
    {
        const PayloadLayout layout;
        RngStream rng(5);
        for (int trial = 0; trial < 100; ++trial) {
            ExpansionPayload p;
            for (auto& a : p.absorption)
                a = rng.uniform();
            p.luminosity = rng.uniform();
            p.mass = 0.2 + 1.8 * rng.uniform();
            p.radius = 0.04 + 0.12 * rng.uniform();
            p.copy_start = rng.below(4096);
            p.copy_end = rng.below(4096);
            p.child_bookmarker = testing_support::random_symbols(rng, 1 + rng.below(8));
            p.weights.resize(layout.shape.weight_count());
            for (auto& w : p.weights)
                w = 2.0 * rng.uniform() - 1.0;
            const auto text = encode_payload(p, layout);
            CHECK(text.size() == layout.width(p.child_bookmarker.size()));
            const auto d = decode_expansion(text, 0, layout).payload;
            for (int k = 0; k < 3; ++k)
                CHECK(std::abs(d.absorption[k] - p.absorption[k]) <= 0.5 / 63 + 1e-12);
            CHECK(std::abs(d.luminosity - p.luminosity) <= 0.5 / 4095 + 1e-12);
            CHECK(std::abs(d.mass - p.mass) <= 0.5 * 1.8 / 4095 + 1e-12);
            CHECK(std::abs(d.radius - p.radius) <= 0.5 * 0.12 / 4095 + 1e-12);
            CHECK(d.copy_start == p.copy_start % text.size());
            CHECK(d.copy_end == p.copy_end % text.size());
            CHECK(d.child_bookmarker == p.child_bookmarker);
            for (std::size_t i = 0; i < p.weights.size(); ++i)
                CHECK(std::abs(d.weights[i] - p.weights[i]) <= 1.0 / 63 + 1e-12);
        }
    }

    TEST_CASE("encode_payload rejects out-of-range fields")
    {
        const PayloadLayout layout;
        ExpansionPayload p;
        p.weights.assign(layout.shape.weight_count(), 0.0);
        p.mass = 5.0;
        CHECK_THROWS_AS(encode_payload(p, layout), EncodingError);
        p.mass = 1.0;
        p.child_bookmarker = std::string(9, 'A');
        CHECK_THROWS_AS(encode_payload(p, layout), EncodingError);
        p.child_bookmarker = "AB";
        p.weights.pop_back();
        CHECK_THROWS(encode_payload(p, layout));
    }

    TEST_CASE("copy_range is inclusive and wraps")
    {
        CHECK(copy_range("ABCDEF", 1, 3) == "BCD");
        CHECK(copy_range("ABCDEF", 4, 1) == "EFAB");
        CHECK(copy_range("ABCDEF", 0, 5) == "ABCDEF");
        CHECK(copy_range("ABCDEF", 2, 2) == "C");
        CHECK(copy_range("ABCDEF", 8, 9) == "CD");
        CHECK(copy_range("", 0, 3).empty());
    }

    TEST_CASE("read_step fuzz: totality and invariants")
    {
        const PayloadLayout layout;
        RngStream rng(2024);
        for (int trial = 0; trial < 2000; ++trial) {
            Genome g;
            g.book = testing_support::random_symbols(rng, rng.below(900));
            g.bookmarker = testing_support::random_symbols(rng, 1 + rng.below(2));
            g.advance = testing_support::random_symbols(rng, 1);
            const auto r = read_step(g, layout);
            const auto pos = find_read_position(g.book, g.bookmarker);
            CHECK(r.has_value() == pos.has_value());
            if (!r)
                continue;
            CHECK(r->read_position == *pos);
            CHECK(r->action == classify_action(g.book[*pos]));
            CHECK(r->next_bookmarker.size() == g.bookmarker.size());
            CHECK(r->next_advance.size() == g.advance.size());
            CHECK(Alphabet64::valid(r->next_bookmarker));
            CHECK(r->payload.has_value() == (r->action == ActionKind::Expansion));
        }
    }

    TEST_CASE("genome text round trip and errors")
    {
        GenomeFile f;
        f.genome = Genome{"ABCDEFG", "EF", "A"};
        f.phenotype = "HIJK";
        const auto text = format_genome_text(f);
        const auto back = parse_genome_text(text);
        CHECK(back.genome == f.genome);
        CHECK(back.phenotype == f.phenotype);
        CHECK_THROWS(parse_genome_text("book: AB*\nmarker: A\nadvance: A\n"));
        CHECK_THROWS(parse_genome_text("marker: A\nadvance: A\n"));
    }
}
