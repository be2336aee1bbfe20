#include <cmath>
#include <limits>
#include <numbers>

#include "doctest.h"

#include "bookcell/energetics.hpp"
#include "bookcell/errors.hpp"
#include "bookcell/rng.hpp"

using namespace bookcell;
using doctest::Approx;

TEST_SUITE("energetics")
{
    TEST_CASE("decay rate")
    {
        EnergyParams p;
        p.decay_coefficient = 1.0;
        p.decay_base = 2.0;
        p.max_connections = 4;
        CHECK(decay_rate(p, 4) == 1.0);
        CHECK(decay_rate(p, 2) == 0.25);
        for (std::size_t n = 0; n < 4; ++n)
            CHECK(decay_rate(p, n + 1) > decay_rate(p, n));
        CHECK_THROWS_AS(decay_rate(p, 5), CapacityError);

        p.max_connections = 6;
        p.decay_coefficient = 0.3;
        p.decay_base = 1.7;
        for (std::size_t n = 0; n <= 6; ++n)
            CHECK(decay_rate(p, n) == Approx(0.3 * std::pow(1.7, n) / std::pow(1.7, 6)).epsilon(1e-14));
    }

    TEST_CASE("step decay")
    {
        CHECK(step_decay(100.0, 0.25, 0.1) == Approx(97.5).epsilon(1e-15));
        CHECK(step_decay(42.0, 0.0, 0.5) == 42.0);
        CHECK_THROWS_AS(step_decay(1.0, 2.0, 0.5), TimestepError);
        CHECK_THROWS_AS(step_decay(1.0, 1.0, 1.0), TimestepError);
    }

    TEST_CASE("iterated decay converges to the exponential")
    {
        const double e0 = 100.0, u = 0.25, t = 10.0;
        const double exact = e0 * std::exp(-u * t);
        double prev_gap = std::numeric_limits<double>::infinity();
        for (double dt : {0.1, 0.01, 0.001, 0.0001}) {
            const auto n = static_cast<long>(std::llround(t / dt));
            double e = e0;
            for (long i = 0; i < n; ++i)
                e = step_decay(e, u, dt);
            const double gap = std::abs(e - exact) / exact;
            CHECK(gap < prev_gap);
            prev_gap = gap;
        }
        CHECK(prev_gap < 1e-4);
    }

    TEST_CASE("light absorption")
    {
        const Rgb c{0.8, 0.2, 0.8};
        CHECK(absorb_light({1, 1, 1}, {1, 1, 1}, c) == Approx(1.8).epsilon(1e-15));
        CHECK(absorb_light({1, 1, 1}, {0, 0, 0}, c) == 0.0);
        CHECK(absorb_light({1, 1, 1}, {0, 1, 0}, c) == Approx(0.2).epsilon(1e-15));
        CHECK(absorb_light({2, 0, 3}, {0.5, 1, 0.25}, c) == Approx(0.8 * 1.0 + 0.8 * 0.75).epsilon(1e-15));
    }

    TEST_CASE("eat fraction")
    {
        CHECK(eat_fraction(1.0, 1, 1, 8) == 0.0);
        CHECK(eat_fraction(1.0, 1, 3, 8) == 0.0);
        CHECK(eat_fraction(1.0, 4, 1, 8) == 0.375);
        CHECK(eat_fraction(0.0, 6, 0, 6) == 0.0);
        CHECK(eat_gain(0.5, 3, 1, 6, 12.0) == Approx(2.0).epsilon(1e-15));
    }

    TEST_CASE("eat is zero-sum and bounded over random cases")
    {
        RngStream rng(101);
        for (int i = 0; i < 10000; ++i) {
            const std::size_t nmax = 1 + rng.below(8);
            const std::size_t ne = rng.below(nmax + 1);
            const std::size_t np = rng.below(nmax + 1);
            const double d = rng.uniform();
            const double prey = 10.0 * rng.uniform();
            const double eater = 10.0 * rng.uniform();
            const double g = eat_gain(d, ne, np, nmax, prey);
            REQUIRE(g >= 0.0);
            REQUIRE(g <= prey);
            if (ne <= np)
                REQUIRE(g == 0.0);
            const double total_before = prey + eater;
            const double total_after = (prey - g) + (eater + g);
            REQUIRE(std::abs(total_after - total_before) <= 1e-12 * total_before + 1e-300);
        }
    }

    TEST_CASE("photon flux")
    {
        PhotonChannel c{4.0 * std::numbers::pi, 1.0, 1.0, 1.0};
        CHECK(photon_flux(c) == Approx(1.0).epsilon(1e-15));
        const double base = photon_flux({3.0, 0.7, 2.0, 1.0});
        CHECK(photon_flux({3.0, 0.7, 4.0, 1.0}) == Approx(base / 4.0).epsilon(1e-14));
        CHECK(photon_flux({3.0, 1.4, 2.0, 1.0}) == Approx(base * 4.0).epsilon(1e-14));
        CHECK_THROWS_AS(photon_flux({1.0, 1.0, 0.0, 1.0}), SingularityError);
    }

    TEST_CASE("hit probability")
    {
        CHECK(hit_probability(1.0, 0.25, 1.0) == 0.25);
        CHECK(hit_probability(0.0, 0.25, 1.0) == 0.0);
        CHECK(hit_probability(10.0, 0.25, 1.0) == 1.0);
    }

    TEST_CASE("mean photon waiting time")
    {
        RngStream rng(8);
        const double p = hit_probability(1.0, 0.25, 1.0);
        const int arrivals = 100000;
        long steps = 0;
        for (int a = 0; a < arrivals; ++a) {
            long k = 1;
            while (!rng.bernoulli(p))
                ++k;
            steps += k;
        }
        const double mean = static_cast<double>(steps) / arrivals;
        CHECK(std::abs(mean - 4.0) / 4.0 < 0.01);
    }

    TEST_CASE("E_inf closed form")
    {
        CHECK(e_infinity(1.0, std::log(2.0), 1.0, 1.0) == Approx(2.0).epsilon(1e-14));
        CHECK(e_infinity(1.0, 50.0, 1.0, 1.0) == Approx(1.0).epsilon(1e-15));
        CHECK(e_infinity(3.0, 2.0 * std::log(2.0), 0.5, 4.0) == Approx(6.0).epsilon(1e-14));
        CHECK_THROWS_AS(e_infinity(1.0, 0.1, 0.0, 1.0), NoLightError);
        CHECK_THROWS_AS(e_infinity(1.0, 0.1, 1.0, 0.0), NoLightError);
        CHECK_THROWS_AS(e_infinity(1.0, 0.0, 1.0, 1.0), std::invalid_argument);
    }

    TEST_CASE("stochastic arrivals settle near E_inf")
    {
        // Per-step decay with Bernoulli arrivals; energy sampled right after each photon.
        RngStream rng(55);
        const double p = 0.2, u = 0.002, de = 1.0;
        const double target = e_infinity(de, u, p, 1.0);
        const int arrivals = 100000, burn = 10000;
        double e = 0.0, acc = 0.0;
        int seen = 0;
        while (seen < arrivals + burn) {
            e = step_decay(e, u, 1.0);
            if (rng.bernoulli(p)) {
                e += de;
                if (seen >= burn)
                    acc += e;
                ++seen;
            }
        }
        const double mean = acc / arrivals;
        CHECK(std::abs(mean - target) / target < 0.02);
    }

    TEST_CASE("generation cost")
    {
        EnergyParams params;
        ExpansionPayload child;
        child.absorption = {0.6, 0.3, 0.9};
        child.radius = 0.12;
        const Rgb sun{1, 1, 1};
        PhotonChannel ch{2000.0, 1.0, 10.0, 0.0};

        const double flux = photon_flux(ch);
        const double photon = absorb_light(sun, child.absorption, params.conversion);
        const double rate = decay_rate(params, 1);
        const double einf = e_infinity(photon, rate, flux, std::numbers::pi * 0.12 * 0.12);

        CHECK(generation_cost(child, sun, ch, params) == Approx(0.5 * einf).epsilon(1e-14));
        params.generation_factor = 1.0;
        CHECK(generation_cost(child, sun, ch, params) == Approx(einf).epsilon(1e-14));

        child.absorption = {0, 0, 0};
        CHECK(generation_cost(child, sun, ch, params) == 0.0);

        child.absorption = {1, 1, 1};
        ch.emission = 0.0;
        CHECK(std::isinf(generation_cost(child, sun, ch, params)));
    }

    TEST_CASE("energy transport")
    {
        CHECK(transport_energy(10.0, 0.0, 0.1, 1.0) == 0.0);
        CHECK(transport_energy(10.0, -0.5, 0.1, 1.0) == 0.0);
        CHECK(transport_energy(10.0, 1.0, 0.1, 1.0) == Approx(1.0).epsilon(1e-15));

        RngStream rng(4);
        for (int i = 0; i < 10000; ++i) {
            double a = 10.0 * rng.uniform(), b = 10.0 * rng.uniform();
            const double before = a + b;
            const double t = transport_energy(a, 2.0 * rng.uniform() - 1.0, rng.uniform(), rng.uniform());
            a -= t;
            b += t;
            REQUIRE(t >= 0.0);
            REQUIRE(a >= 0.0);
            REQUIRE(std::abs((a + b) - before) <= 1e-12 * before);
        }
    }

    TEST_CASE("parameter validation")
    {
        EnergyParams p;
        CHECK_NOTHROW(p.validate());
        p.decay_base = 1.0;
        CHECK_THROWS_AS(p.validate(), ConfigError);
        p = {};
        p.decay_coefficient = 0.0;
        CHECK_THROWS_AS(p.validate(), ConfigError);
        p = {};
        p.generation_factor = 1.5;
        CHECK_THROWS_AS(p.validate(), ConfigError);
        p = {};
        p.conversion = {0.8, 1.2, 0.8};
        CHECK_THROWS_AS(p.validate(), ConfigError);
    }
}
