#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "support.hpp"

#include "bookcell/assembler.hpp"
#include "bookcell/errors.hpp"

using namespace bookcell;

namespace {

std::string read_file(const std::string& path)
{
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kHeader = "marker-length 3\n"
                      "seed 3\n"
                      "net n\n"
                      "  in.touch h0 1\n"
                      "  bias h0 -0.5\n"
                      "  h0 out.read 1\n"
                      "end\n"
                      "phenotype p absorption=0.2,0.4,1 luminosity=0.5 mass=1.3 radius=0.1 net=n\n"
                      "seed-phenotype p\n";

} // namespace

TEST_SUITE("assembler")
{
    TEST_CASE("self-looping expansion reads EXPANSION forever")
    {
        const PayloadLayout layout;
        auto g = assemble_source(std::string(kHeader) + "start a\na: expand p -> a\n", layout).genome;
        for (int i = 0; i < 50; ++i) {
            auto r = read_step(g, layout);
            REQUIRE(r.has_value());
            CHECK(r->action == ActionKind::Expansion);
            g.bookmarker = r->next_bookmarker;
            g.advance = r->next_advance;
        }
    }

    TEST_CASE("empty program is rejected")
    {
        const PayloadLayout layout;
        CHECK_THROWS_AS(assemble_source(kHeader, layout), EncodingError);
    }

    TEST_CASE("parse errors carry line numbers")
    {
        const PayloadLayout layout;
        try {
            assemble_source(std::string(kHeader) + "start a\na: explode p -> a\n", layout);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("11") != std::string::npos);
        }
        CHECK_THROWS(assemble_source(std::string(kHeader) + "start a\na: jump -> nowhere\n", layout));
        CHECK_THROWS(assemble_source(std::string(kHeader) + "start a\na: expand missing -> a\n", layout));
        CHECK_THROWS_AS(assemble_source(std::string(kHeader) + "start a\na: expand p child=b -> b\nb: expand p child=a -> a\n",
                                        layout),
                        EncodingError);
    }

    TEST_CASE("phenotype and network weights survive quantisation")
    {
        const PayloadLayout layout;
        const auto file = assemble_source(std::string(kHeader) + "start a\na: expand p -> a\n", layout);
        REQUIRE(file.phenotype.has_value());
        const auto p = decode_phenotype(*file.phenotype, layout);
        CHECK(p.absorption[0] == doctest::Approx(0.2).epsilon(0.5 / 63 / 0.2));
        CHECK(p.absorption[2] == 1.0);
        CHECK(std::abs(p.luminosity - 0.5) <= 0.5 / 4095);
        CHECK(std::abs(p.mass - 1.3) <= 0.9 / 4095 + 1e-12);
        CHECK(std::abs(p.radius - 0.1) <= 0.06 / 4095);
        const auto& s = layout.shape;
        const std::size_t row = s.n_in() + 1;
        CHECK(p.weights[0 * row + s.in_touch()] == 1.0);
        CHECK(std::abs(p.weights[0 * row + s.n_in()] + 0.5) <= 1.0 / 63);
        const std::size_t base = s.n_hidden * row;
        CHECK(p.weights[base + s.out_read() * (s.n_hidden + 1) + 0] == 1.0);
        CHECK(std::abs(p.weights[base + s.out_eat() * (s.n_hidden + 1) + 0]) <= 1.0 / 63);
    }

    TEST_CASE("random programs trace their directive graph")
    {
        const PayloadLayout layout;
        RngStream rng(404);
        const char* verbs[] = {"expand p", "connect", "disconnect", "jump"};
        const ActionKind kinds[] = {ActionKind::Expansion, ActionKind::Connection, ActionKind::Disconnection,
                                    ActionKind::Transition};
        for (int trial = 0; trial < 60; ++trial) {
            const std::size_t n = 1 + rng.below(10);
            std::vector<std::size_t> kind(n), next(n), child(n);
            std::string src = kHeader;
            src += "start l0\n";
            for (std::size_t i = 0; i < n; ++i) {
                kind[i] = rng.below(4);
                next[i] = rng.below(n);
                child[i] = i + rng.below(n - i);
                src += "l" + std::to_string(i) + ": " + verbs[kind[i]];
                if (kind[i] == 0)
                    src += " child=l" + std::to_string(child[i]);
                src += " -> l" + std::to_string(next[i]) + "\n";
            }
            const auto g = assemble_source(src, layout).genome;
            const auto trace = trace_reads(g, layout, 4 * n + 4);
            REQUIRE(!trace.empty());

            std::size_t at = 0;
            std::map<std::size_t, std::size_t> position_of;
            for (const auto& step : trace) {
                REQUIRE(step.action == kinds[kind[at]]);
                auto [it, fresh] = position_of.emplace(at, step.read_position);
                REQUIRE(it->second == step.read_position);
                if (kind[at] == 0) {
                    const Genome offspring{g.book, step.child_bookmarker, "A"};
                    const auto first = read_step(offspring, layout);
                    REQUIRE(first.has_value());
                    CHECK(first->action == kinds[kind[child[at]]]);
                }
                at = next[at];
            }
        }
    }

    TEST_CASE("bundled programs match their assembled genomes")
    {
        const PayloadLayout layout;
        for (std::string name : {"tetrahedron", "fecund"}) {
            const std::string dir = BOOKCELL_SOURCE_DIR "/genomes/";
            const auto built = assemble_source(read_file(dir + name + ".asm"), layout);
            const auto stored = load_genome_file(dir + name + ".genome");
            CHECK(built.genome == stored.genome);
            CHECK(built.phenotype == stored.phenotype);
        }
    }

    TEST_CASE("tetrahedron trace: three leaves, a root bud, then release")
    {
        const PayloadLayout layout;
        const auto g = load_genome_file(BOOKCELL_SOURCE_DIR "/genomes/tetrahedron.genome").genome;
        const auto trace = trace_reads(g, layout);
        REQUIRE(trace.size() >= 5);
        const ActionKind want[] = {ActionKind::Expansion, ActionKind::Expansion, ActionKind::Expansion,
                                   ActionKind::Expansion, ActionKind::Disconnection};
        for (int i = 0; i < 5; ++i)
            CHECK(trace[i].action == want[i]);
        for (int i = 0; i < 3; ++i) {
            const Genome leaf{g.book, trace[i].child_bookmarker, "A"};
            CHECK_FALSE(read_step(leaf, layout).has_value());
        }
        const Genome bud{g.book, trace[3].child_bookmarker, "A"};
        const auto first = read_step(bud, layout);
        REQUIRE(first.has_value());
        CHECK(first->action == ActionKind::Disconnection);
        CHECK(disassemble(g, layout).find("EXPANSION") != std::string::npos);
    }
}
