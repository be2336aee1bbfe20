#include "bookcell/energetics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "bookcell/errors.hpp"

namespace bookcell {

void EnergyParams::validate() const
{
    if (!(decay_coefficient > 0.0))
        throw ConfigError("energy.C must be > 0");
    if (!(decay_base > 1.0))
        throw ConfigError("energy.A must be > 1");
    if (!(generation_factor > 0.0 && generation_factor <= 1.0))
        throw ConfigError("energy.generation_factor must lie in (0, 1]");
    for (double c : conversion)
        if (!(c >= 0.0 && c <= 1.0))
            throw ConfigError("energy.conversion entries must lie in [0, 1]");
    if (!(death_threshold >= 0.0))
        throw ConfigError("energy.death_threshold must be >= 0");
    if (!(transfer_rate >= 0.0) || !(emission_cost >= 0.0))
        throw ConfigError("energy.transfer_rate and energy.emission_cost must be >= 0");
    if (max_connections == 0)
        throw ConfigError("max_connections must be positive");
}

double decay_rate(const EnergyParams& p, std::size_t n_connected)
{
    if (n_connected > p.max_connections)
        throw CapacityError("cell has " + std::to_string(n_connected) + " connections, limit is " +
                            std::to_string(p.max_connections));
    const double missing = static_cast<double>(p.max_connections - n_connected);
    return p.decay_coefficient * std::pow(p.decay_base, -missing);
}

double step_decay(double energy, double rate, double dt)
{
    if (rate * dt >= 1.0)
        throw TimestepError("decay step U*dt = " + std::to_string(rate * dt) + " must stay below 1");
    return energy - rate * energy * dt;
}

double absorb_light(const Rgb& intensity, const Rgb& absorption, const Rgb& conversion) noexcept
{
    return conversion[0] * intensity[0] * absorption[0] + conversion[1] * intensity[1] * absorption[1] +
           conversion[2] * intensity[2] * absorption[2];
}

double eat_fraction(double d, std::size_t n_eater, std::size_t n_prey, std::size_t max_connections) noexcept
{
    if (n_eater <= n_prey || !(d > 0.0) || max_connections == 0)
        return 0.0;
    return d * static_cast<double>(n_eater - n_prey) / static_cast<double>(max_connections);
}

double eat_gain(double d, std::size_t n_eater, std::size_t n_prey, std::size_t max_connections,
                double prey_energy) noexcept
{
    return eat_fraction(d, n_eater, n_prey, max_connections) * prey_energy;
}

double photon_flux(const PhotonChannel& c)
{
    if (!(c.distance > 0.0))
        throw SingularityError("photon flux is singular at zero source distance");
    return c.emission * c.source_radius * c.source_radius / (4.0 * std::numbers::pi * c.distance * c.distance);
}

double hit_probability(double flux, double cross_section, double dt) noexcept
{
    const double p = flux * cross_section * dt;
    if (!(p > 0.0))
        return 0.0;
    return std::min(p, 1.0);
}

double e_infinity(double photon_energy, double rate, double flux, double cross_section)
{
    if (!(rate > 0.0))
        throw std::invalid_argument("E_inf needs a positive decay rate U");
    const double intake = flux * cross_section;
    if (!(intake > 0.0))
        throw NoLightError("E_inf is undefined without incoming light (P*dS = 0)");
    return photon_energy / -std::expm1(-rate / intake);
}

double cross_section(double radius) noexcept
{
    return std::numbers::pi * radius * radius;
}

double generation_cost(const ExpansionPayload& child, const Rgb& sun_intensity, PhotonChannel sun,
                       const EnergyParams& params, std::size_t child_connections)
{
    sun.cross_section = cross_section(child.radius);
    const double photon = absorb_light(sun_intensity, child.absorption, params.conversion);
    if (!(photon > 0.0))
        return 0.0;
    try {
        const double flux = photon_flux(sun);
        const double rate = decay_rate(params, std::min(child_connections, params.max_connections));
        return params.generation_factor * e_infinity(photon, rate, flux, sun.cross_section);
    } catch (const NoLightError&) {
        return std::numeric_limits<double>::infinity();
    } catch (const SingularityError&) {
        return std::numeric_limits<double>::infinity();
    }
}

double transport_energy(double sender_energy, double e_out, double transfer_rate, double dt) noexcept
{
    if (!(e_out > 0.0))
        return 0.0;
    return sender_energy * e_out * transfer_rate * dt;
}

} // namespace bookcell
