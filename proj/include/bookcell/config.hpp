#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bookcell/energetics.hpp"
#include "bookcell/genome.hpp"
#include "bookcell/mechanics.hpp"

namespace bookcell {

struct SunConfig
{
    bool enabled = true;
    double height = 6.0;
    double y = 16.0;
    double start = 16.0;
    double speed = 0.5;
    double emission = 40.0;
    double radius = 1.0;
    Rgb intensity{1.0, 1.0, 1.0};
};

struct TerrainConfig
{
    bool flat = false;
    double amplitude = 1.0;
    /// Optional 32x32 grid file; overrides the generated terrain.
    std::string heightmap_file;
};

struct FieldRates
{
    double alpha = 0.0;
    double beta = 0.0;
};

struct PopulationControl
{
    bool adaptive = true;
    double target = 4000.0;
    std::size_t interval = 100;
    double gain = 0.01;
    /// Weight of the growth-rate term (N_prev / N)^damping.
    double damping = 0.1;
    double a_min = 1.0001;
    double a_max = 1.6;
};

/// One group of seed cells placed at start-up.
struct SeedSpec
{
    std::string genome_file;
    std::size_t count = 1;
    double energy = 10.0;
    /// -1 means "index of this seed group".
    long lineage = -1;
    /// Field index, or -1 for every field.
    long field = -1;
    /// Optional fixed (x, y); random placement otherwise.
    std::optional<std::array<double, 2>> position;
};

/// Every constant of the simulation. Loaded from YAML; every key has a
/// default and unknown keys are rejected.
struct SimConfig
{
    std::uint64_t seed = 1;
    double dt = 0.05;

    MechanicsParams mechanics{};
    EnergyParams energy{};
    NetShape net{};
    double delta_s = 0.1;
    double coupling_initial = 1.0;

    std::size_t advance_width = 1;
    std::size_t bookmarker_max = 8;
    std::size_t book_max = 4096;
    double mass_min = 0.2;
    double mass_max = 2.0;
    double radius_min = 0.04;

    /// Emission constant D of light-emitting cells and the range beyond which
    /// their photons are ignored.
    double cell_emission = 1.0;
    double emitter_range = 4.0;

    SunConfig sun{};
    TerrainConfig terrain{};
    std::vector<FieldRates> fields{FieldRates{}};
    std::uint64_t epoch_length = 1000000;
    bool parallel = false;
    PopulationControl population{};

    std::size_t metrics_interval = 100;
    std::size_t snapshot_interval = 0;
    bool trace = false;

    std::vector<SeedSpec> seeds;

    PayloadLayout layout() const;
    /// Throws ConfigError naming the offending key.
    void validate() const;
};

/// Parses YAML text. `base_dir` resolves relative genome and heightmap paths.
/// ConfigError messages carry "line N" and the key path.
SimConfig parse_config(const std::string& yaml_text, const std::string& base_dir = ".");
SimConfig load_config(const std::string& path);

/// Canonical YAML; parse_config(to_yaml(c)) == c field by field.
std::string to_yaml(const SimConfig& config);

} // namespace bookcell
