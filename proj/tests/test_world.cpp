#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "doctest.h"
#include "support.hpp"

#include "bookcell/assembler.hpp"
#include "bookcell/world.hpp"

using namespace bookcell;

namespace {

struct Bias
{
    std::size_t output;
    double value;
};

ExpansionPayload phenotype(const NetShape& s, std::initializer_list<Bias> biases, double radius = 0.1)
{
    ExpansionPayload p;
    p.absorption = {0.6, 0.6, 0.6};
    p.radius = radius;
    p.weights.assign(s.weight_count(), 0.0);
    const std::size_t base = s.n_hidden * (s.n_in() + 1);
    for (const auto& b : biases)
        p.weights[base + b.output * (s.n_hidden + 1) + s.n_hidden] = b.value;
    return p;
}

ExpansionPayload random_phenotype(const NetShape& s, RngStream& rng)
{
    ExpansionPayload p;
    p.absorption = {rng.uniform(), rng.uniform(), rng.uniform()};
    p.radius = 0.1;
    p.weights.resize(s.weight_count());
    for (auto& w : p.weights)
        w = 2.0 * rng.uniform() - 1.0;
    return p;
}

FieldWorld make_field(std::uint64_t seed = 1, MutationRates rates = {}, Sun sun = {})
{
    FieldSettings fs;
    fs.population.adaptive = false;
    return FieldWorld(fs, EnergyParams{}, rates, FieldHeightmap::flat(), sun, RngStream(seed));
}

Sun dark()
{
    Sun s;
    s.enabled = false;
    return s;
}

const Genome kDormant{"ABCDEFGH", "", "A"};

Genome assembled(const std::string& body)
{
    const std::string src = "marker-length 3\nseed 2\nnet n\nend\n"
                            "phenotype p absorption=0.6,0.6,0.6 mass=1 radius=0.1 net=n\n" +
                            body;
    return assemble_source(src, PayloadLayout{}).genome;
}

double total_energy(const FieldWorld& w)
{
    double e = 0.0;
    for (const auto& c : w.cells())
        e += c.energy;
    return e;
}

} // namespace

TEST_SUITE("world")
{
    TEST_CASE("sun motion")
    {
        Sun s;
        s.position = 5.0;
        s.speed = 0.5;
        Sun t = s;
        for (int i = 0; i < 128; ++i) {
            t = sun_step(t, 1.0);
            CHECK(t.position >= 0.0);
            CHECK(t.position <= 32.0);
        }
        CHECK(t.position == doctest::Approx(5.0));
        CHECK(t.direction == s.direction);

        s.speed = 0.0;
        CHECK(sun_step(s, 3.0).position == 5.0);

        s.speed = 7.3;
        for (int i = 0; i < 1000; ++i) {
            s = sun_step(s, 0.37);
            REQUIRE(s.position >= 0.0);
            REQUIRE(s.position <= 32.0);
        }
    }

    TEST_CASE("sun photon hit rate matches the hit probability")
    {
        Sun sun;
        sun.speed = 0.0;
        sun.emission = 150000.0;
        auto w = make_field(3, {}, sun);
        const auto& s = w.settings().layout.shape;
        w.add_cell(kDormant, phenotype(s, {}), 20.0, 13.0, 1.0, 0);
        const auto& c = w.cells()[0];
        const double area = cross_section(c.kin.radius);
        const double h = distance(sun.centre(), c.kin.position);
        const double p = hit_probability(photon_flux({sun.emission, sun.radius, h, area}), area, w.settings().dt);
        REQUIRE(p > 0.2);
        REQUIRE(p < 0.5);

        const int steps = 100000;
        int hits = 0;
        for (int i = 0; i < steps; ++i) {
            const double before = w.cells()[0].energy;
            w.phase_photons();
            hits += w.cells()[0].energy > before;
        }
        CHECK(std::abs(static_cast<double>(hits) / steps - p) / p < 0.02);
    }

    TEST_CASE("without the sun only emitting cells deliver light")
    {
        auto w = make_field(4, {}, dark());
        const auto& s = w.settings().layout.shape;
        const auto lamp = w.add_cell(kDormant, phenotype(s, {}), 10.0, 10.0, 1.0, 0);
        const auto leaf = w.add_cell(kDormant, phenotype(s, {}), 10.5, 10.0, 1.0, 0);
        w.find(lamp)->luminosity = 1.0;
        for (int i = 0; i < 1000; ++i)
            w.phase_photons();
        CHECK(w.find(lamp)->energy == 1.0);
        CHECK(w.find(leaf)->energy == 1.0);

        w.settings_mut().cell_emission = 1e5;
        w.find(lamp)->emitting = true;
        for (int i = 0; i < 1000; ++i)
            w.phase_photons();
        CHECK(w.find(lamp)->energy == 1.0);
        CHECK(w.find(leaf)->energy > 1.0);
    }

    TEST_CASE("expansion adds one bonded child and logs one birth and one bond")
    {
        auto w = make_field(5);
        w.set_tracing(true);
        const auto& s = w.settings().layout.shape;
        const auto g = assembled("start a\na: expand p -> b\nb: jump -> a\n");
        const auto parent = w.add_cell(g, phenotype(s, {{s.out_read(), 1.0}}), 16, 16, 1000.0, 0);
        w.phase_forward();
        w.phase_reads();
        REQUIRE(w.cells().size() == 2);
        const auto child = w.cells()[1].id;
        CHECK(w.bond_count() == 1);
        CHECK(w.find(parent)->connections() == 1);
        CHECK(w.find(child)->connections() == 1);
        CHECK(w.find(parent)->energy < 1000.0);
        CHECK(w.find(parent)->energy + w.find(child)->energy == doctest::Approx(1000.0));

        int births = 0, bonds = 0;
        for (const auto& e : w.events()) {
            births += e.kind == EventKind::Birth;
            bonds += e.kind == EventKind::BondFormed;
        }
        CHECK(births == 1);
        CHECK(bonds == 1);
    }

    TEST_CASE("expansion aborts on a full parent or missing energy but the head still moves")
    {
        auto w = make_field(6);
        const auto& s = w.settings().layout.shape;
        const auto g = assembled("start a\na: expand p -> b\nb: jump -> a\n");
        const auto parent = w.add_cell(g, phenotype(s, {{s.out_read(), 1.0}}), 16, 16, 1000.0, 0);
        for (std::size_t k = 0; k < s.n_slots; ++k) {
            const auto other = w.add_cell(kDormant, phenotype(s, {}), 4.0 + k, 4.0, 1.0, 0);
            REQUIRE(w.bond(parent, other, 0.1));
        }
        const auto marker = w.find(parent)->genome.bookmarker;
        w.phase_forward();
        w.phase_reads();
        CHECK(w.cells().size() == 1 + s.n_slots);
        CHECK(w.find(parent)->genome.bookmarker != marker);
        CHECK(w.find(parent)->energy == 1000.0);

        auto poor = make_field(6);
        const auto id = poor.add_cell(g, phenotype(s, {{s.out_read(), 1.0}}), 16, 16, 1e-6, 0);
        poor.phase_forward();
        poor.phase_reads();
        CHECK(poor.cells().size() == 1);
        CHECK(poor.find(id)->genome.bookmarker != marker);
    }

    TEST_CASE("reads are gated by the READ output")
    {
        auto w = make_field(7);
        const auto& s = w.settings().layout.shape;
        const auto g = assembled("start a\na: connect -> a\n");
        const auto quiet = w.add_cell(g, phenotype(s, {{s.out_read(), -1.0}}), 5, 5, 10.0, 0);
        const auto loud = w.add_cell(g, phenotype(s, {{s.out_read(), 1.0}}), 9, 9, 10.0, 0);
        w.phase_forward();
        w.phase_reads();
        CHECK_FALSE(w.find(quiet)->wait_connect);
        CHECK(w.find(loud)->wait_connect);
    }

    TEST_CASE("two nearby waiters bond; a lone waiter does nothing")
    {
        auto w = make_field(8);
        const auto& s = w.settings().layout.shape;
        const auto a = w.add_cell(kDormant, phenotype(s, {}), 10.0, 10.0, 1.0, 0);
        const auto b = w.add_cell(kDormant, phenotype(s, {}), 10.19, 10.0, 1.0, 0);
        w.find(a)->wait_connect = true;
        w.phase_waits();
        CHECK(w.bond_count() == 0);
        CHECK(w.find(a)->wait_connect);

        w.find(b)->wait_connect = true;
        w.phase_waits();
        CHECK(w.bond_count() == 1);
        CHECK_FALSE(w.find(a)->wait_connect);
        CHECK_FALSE(w.find(b)->wait_connect);

        w.find(a)->wait_disconnect = true;
        w.phase_waits();
        CHECK(w.bond_count() == 1);
        w.find(b)->wait_disconnect = true;
        w.phase_waits();
        CHECK(w.bond_count() == 0);
    }

    TEST_CASE("waiter pairing matches an exhaustive greedy oracle")
    {
        RngStream rng(9);
        const double reach = 1.95 * 0.1;
        for (int trial = 0; trial < 300; ++trial) {
            auto w = make_field(10 + trial);
            const auto& s = w.settings().layout.shape;
            const std::size_t n = 2 + rng.below(4);
            for (std::size_t i = 0; i < n; ++i) {
                const auto id =
                    w.add_cell(kDormant, phenotype(s, {}), 10.0 + 0.3 * rng.uniform(), 10.0 + 0.3 * rng.uniform(), 1.0, 0);
                w.find(id)->wait_connect = rng.bernoulli(0.8);
            }

            // Every eligible pair, sorted by (distance, ids); take a pair when both are still unpaired.
            std::vector<std::tuple<double, CellId, CellId>> pairs;
            const auto& cells = w.cells();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j) {
                    if (!cells[i].wait_connect || !cells[j].wait_connect)
                        continue;
                    const double d = distance(cells[i].kin.position, cells[j].kin.position);
                    if (d <= reach)
                        pairs.emplace_back(d, cells[i].id, cells[j].id);
                }
            std::sort(pairs.begin(), pairs.end());
            std::set<CellId> used;
            std::set<std::pair<CellId, CellId>> want;
            for (const auto& [d, a, b] : pairs) {
                if (used.count(a) || used.count(b))
                    continue;
                used.insert(a);
                used.insert(b);
                want.emplace(a, b);
            }

            w.phase_waits();
            std::set<std::pair<CellId, CellId>> got;
            for (const auto& b : w.bonds())
                got.emplace(b.a, b.b);
            REQUIRE(got == want);
        }
    }

    TEST_CASE("eating a better-connected cell takes nothing")
    {
        auto w = make_field(11, {}, dark());
        const auto& s = w.settings().layout.shape;
        const auto eater = w.add_cell(kDormant, phenotype(s, {{s.out_eat(), 1.0}}), 10.0, 10.0, 5.0, 0);
        const auto prey = w.add_cell(kDormant, phenotype(s, {}), 10.15, 10.0, 5.0, 0);
        const auto anchor = w.add_cell(kDormant, phenotype(s, {}), 10.3, 10.0, 5.0, 0);
        REQUIRE(w.bond(prey, anchor, 0.11));
        w.phase_forward();
        w.phase_effects();
        CHECK(w.find(prey)->energy == 5.0);
        CHECK(w.find(eater)->energy == 5.0);

        w.unbond(prey, 0, "test");
        REQUIRE(w.bond(eater, anchor, 0.11));
        w.phase_forward();
        w.phase_effects();
        CHECK(w.find(prey)->energy < 5.0);
        CHECK(w.find(eater)->energy > 5.0);
        CHECK(w.find(prey)->energy + w.find(eater)->energy == doctest::Approx(10.0));
    }

    TEST_CASE("eating and transport conserve energy")
    {
        RngStream rng(12);
        for (int trial = 0; trial < 50; ++trial) {
            auto w = make_field(100 + trial, {}, dark());
            w.energy_mut().emission_cost = 0.0;
            const auto& s = w.settings().layout.shape;
            std::vector<CellId> ids;
            for (int i = 0; i < 8; ++i)
                ids.push_back(w.add_cell(kDormant, random_phenotype(s, rng), 10.0 + 0.12 * (i % 4),
                                         10.0 + 0.12 * (i / 4), 1.0 + 9.0 * rng.uniform(), 0));
            for (int k = 0; k < 8; ++k)
                w.bond(ids[rng.below(8)], ids[rng.below(8)], 0.1);
            for (int step = 0; step < 20; ++step) {
                const double before = total_energy(w);
                w.phase_forward();
                w.phase_effects();
                REQUIRE(std::abs(total_energy(w) - before) <= 1e-12 * before);
            }
        }
    }

    TEST_CASE("zero coupling rate keeps every S' fixed")
    {
        RngStream rng(13);
        FieldSettings fs;
        fs.population.adaptive = false;
        fs.delta_s = 0.0;
        FieldWorld w(fs, EnergyParams{}, {}, FieldHeightmap::flat(), Sun{}, RngStream(13));
        const auto& s = w.settings().layout.shape;
        std::vector<CellId> ids;
        for (int i = 0; i < 6; ++i)
            ids.push_back(w.add_cell(kDormant, random_phenotype(s, rng), 10.0 + 0.15 * i, 10.0, 50.0, 0));
        for (int i = 0; i + 1 < 6; ++i)
            REQUIRE(w.bond(ids[i], ids[i + 1], 0.15));
        for (int step = 0; step < 200; ++step) {
            w.step();
            for (const auto& c : w.cells())
                for (const auto& slot : c.slots)
                    if (slot.used)
                        REQUIRE(slot.coupling == fs.coupling_initial);
        }
    }

    TEST_CASE("mutation rate alpha")
    {
        SUBCASE("alpha 0 leaves genomes untouched")
        {
            auto w = make_field(14, {0.0, 0.0});
            RngStream rng(1);
            const auto& s = w.settings().layout.shape;
            for (int i = 0; i < 20; ++i)
                w.add_cell(assembled("start a\na: jump -> a\n"), phenotype(s, {}), 1.0 + 1.5 * i, 5.0, 100.0, 0);
            const auto before = w.cells();
            for (int i = 0; i < 200; ++i)
                w.step();
            for (std::size_t i = 0; i < before.size(); ++i)
                CHECK(w.cells()[i].genome == before[i].genome);
        }
        SUBCASE("alpha 1 mutates every cell every step")
        {
            auto w = make_field(15, {1.0, 0.0});
            const auto& s = w.settings().layout.shape;
            for (int i = 0; i < 20; ++i)
                w.add_cell(assembled("start a\na: jump -> a\n"), phenotype(s, {}), 1.0 + 1.5 * i, 5.0, 100.0, 0);
            for (int i = 0; i < 50; ++i) {
                w.step();
                CHECK(w.last_counts().mutations == w.cells().size());
            }
        }
        SUBCASE("observed frequency tracks alpha")
        {
            const double alpha = 0.3;
            auto w = make_field(16, {alpha, 0.0});
            const auto& s = w.settings().layout.shape;
            RngStream rng(2);
            for (int i = 0; i < 100; ++i)
                w.add_cell(Genome{testing_support::random_symbols(rng, 500), "AB", "A"}, phenotype(s, {}),
                           1.0 + 0.3 * i, 1.0 + 0.3 * (i % 7), 100.0, 0);
            std::uint64_t cell_steps = 0;
            for (int i = 0; i < 1000; ++i) {
                cell_steps += w.cells().size();
                w.phase_mutation();
            }
            const auto mutations = w.last_counts().mutations;
            CHECK(std::abs(static_cast<double>(mutations) / cell_steps - alpha) / alpha < 0.02);
        }
    }

    TEST_CASE("division mutation rate beta")
    {
        RngStream rng(17);
        const std::string book = testing_support::random_symbols(rng, 200);
        CHECK(mutate_division(book, 0.0, rng) == book);
        for (int i = 0; i < 1000; ++i)
            REQUIRE(mutate_division(book, 1.0, rng) != book);
        int changed = 0;
        const int n = 10000;
        for (int i = 0; i < n; ++i)
            changed += mutate_division(book, 0.25, rng) != book;
        CHECK(std::abs(changed / static_cast<double>(n) - 0.25) / 0.25 < 0.03);

        std::string empty;
        CHECK_FALSE(mutate_book(empty, rng, 10));
        std::string full(10, 'A');
        for (int i = 0; i < 200; ++i) {
            mutate_book(full, rng, 10);
            REQUIRE(full.size() <= 10);
        }
    }

    TEST_CASE("decay base control")
    {
        PopulationControl pc;
        pc.target = 4000;
        pc.gain = 0.1;
        pc.damping = 0.5;
        pc.a_min = 1.0001;
        pc.a_max = 3.0;
        CHECK(adjust_decay_base(2.0, 4000, 4000, pc) == 2.0);
        CHECK(adjust_decay_base(2.0, 4000, 0, pc) == 2.0);
        CHECK(adjust_decay_base(2.0, 5000, 5000, pc) < 2.0);
        CHECK(adjust_decay_base(2.0, 3000, 3000, pc) > 2.0);
        CHECK(adjust_decay_base(2.0, 4000, 3000, pc) < 2.0);
        CHECK(adjust_decay_base(2.0, 0, 0, pc) == 3.0);
        CHECK(adjust_decay_base(1.001, 1000000, 0, pc) == pc.a_min);

        // Fixed mode: stepping never touches A.
        auto w = make_field(18);
        w.energy_mut().decay_base = 2.0;
        const auto& s = w.settings().layout.shape;
        w.add_cell(kDormant, phenotype(s, {}), 5, 5, 10.0, 0);
        for (int i = 0; i < 500; ++i)
            w.step();
        CHECK(w.energy().decay_base == 2.0);
    }

    TEST_CASE("components and removal")
    {
        auto w = make_field(19);
        const auto& s = w.settings().layout.shape;
        std::vector<CellId> ids;
        for (int i = 0; i < 6; ++i)
            ids.push_back(w.add_cell(kDormant, phenotype(s, {}), 2.0 + 3.0 * i, 5.0, 1.0, 0));
        w.bond(ids[0], ids[3], 0.1);
        w.bond(ids[3], ids[5], 0.1);
        w.bond(ids[1], ids[4], 0.1);
        auto comps = w.components();
        REQUIRE(comps.size() == 3);
        CHECK(comps[0] == std::vector<CellId>{ids[0], ids[3], ids[5]});
        CHECK(comps[1] == std::vector<CellId>{ids[1], ids[4]});
        CHECK(comps[2] == std::vector<CellId>{ids[2]});

        w.remove_cell(ids[3], "test");
        CHECK(w.find(ids[3]) == nullptr);
        CHECK(w.find(ids[0])->connections() == 0);
        CHECK(w.find(ids[5])->connections() == 0);
        CHECK(w.components().size() == 4);
        CHECK(w.bond_count() == 1);
    }
}
