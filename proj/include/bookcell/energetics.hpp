#pragma once

#include <array>
#include <cstddef>

#include "bookcell/genome.hpp"

namespace bookcell {

using Rgb = std::array<double, 3>;

struct EnergyParams
{
    /// Decay coefficient C (> 0, per second).
    double decay_coefficient = 1.0;
    /// Decay base A (> 1); adjusted online unless the world fixes it.
    double decay_base = 2.0;
    std::size_t max_connections = 6;
    Rgb conversion{0.8, 0.2, 0.8};
    double generation_factor = 0.5;
    double death_threshold = 1e-3;
    double transfer_rate = 0.5;
    double emission_cost = 0.01;

    /// Throws ConfigError when a parameter leaves its valid range.
    void validate() const;
};

/// Source emission constant D, source radius R, source-cell distance h and
/// receiving cross-section dS.
struct PhotonChannel
{
    double emission = 1.0;
    double source_radius = 1.0;
    double distance = 1.0;
    double cross_section = 1.0;
};

/// U = C A^n / A^Nmax. Throws CapacityError for n > Nmax.
double decay_rate(const EnergyParams& params, std::size_t n_connected);

/// E (1 - U dt). Throws TimestepError when U dt >= 1.
double step_decay(double energy, double rate, double dt);

/// dE_L = sum over r,g,b of c_k I_k a_k.
double absorb_light(const Rgb& intensity, const Rgb& absorption, const Rgb& conversion) noexcept;

/// Fraction of the prey's energy an eater takes: d (Nc - N'c) / Nmax when
/// the eater has strictly more connections, else 0.
double eat_fraction(double d, std::size_t n_eater, std::size_t n_prey, std::size_t max_connections) noexcept;

/// Energy moved from prey to eater.
double eat_gain(double d, std::size_t n_eater, std::size_t n_prey, std::size_t max_connections,
                double prey_energy) noexcept;

/// P = D R^2 / (4 pi h^2). Throws SingularityError for h <= 0.
double photon_flux(const PhotonChannel& channel);

/// p = min(P dS dt, 1).
double hit_probability(double flux, double cross_section, double dt) noexcept;

/// E_inf = dE_L / (1 - exp(-U / (P dS))). Throws NoLightError when P dS = 0
/// and std::invalid_argument for U <= 0.
double e_infinity(double photon_energy, double rate, double flux, double cross_section);

/// Disc cross-section pi r^2.
double cross_section(double radius) noexcept;

/// Energy handed to a new cell: factor * E_inf of the child under the sun.
/// `sun` supplies D, R and the distance at division; the cross-section is
/// taken from the child's radius. Returns +inf when the child would receive
/// no light, which aborts the expansion.
double generation_cost(const ExpansionPayload& child, const Rgb& sun_intensity, PhotonChannel sun,
                       const EnergyParams& params, std::size_t child_connections = 1);

/// sender_energy * e_out * k * dt with e_out rectified at 0.
double transport_energy(double sender_energy, double e_out, double transfer_rate, double dt) noexcept;

} // namespace bookcell
