#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bookcell/config.hpp"
#include "bookcell/engine.hpp"

namespace bookcell {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int usage = 2;
inline constexpr int blowup = 3;
} // namespace exit_code

struct RunOptions
{
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> steps;
    std::optional<std::uint64_t> seed;
    std::optional<bool> parallel;
    /// Continue from this snapshot instead of seeding from the config.
    std::string resume;
    bool quiet = false;
};

/// Writes metrics CSV(s), periodic and final snapshots and, when tracing, a
/// trace log into out_dir.
int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);

struct AppendixTolerances
{
    double decay = 1e-4;
    double fixed_point = 1e-9;
    double arrival = 0.01;
    double e_infinity = 0.02;
};

struct AppendixOptions
{
    AppendixTolerances tol{};
    double decay_e0 = 100.0;
    double decay_u = 0.25;
    double decay_t = 10.0;
    double fixed_u = 0.5;
    double fixed_t = 1.0;
    double fixed_gain = 1.0;
    std::size_t fixed_iterations = 1000;
    double mc_p = 0.2;
    double mc_u = 0.002;
    double mc_dt = 1.0;
    double mc_gain = 1.0;
    std::size_t mc_arrivals = 100000;
    std::uint64_t seed = 1;
};

struct AppendixCheck
{
    std::string name;
    double measured = 0.0;
    double expected = 0.0;
    double error = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

/// Runs the decay, fixed-point, waiting-time and stochastic E-infinity
/// oracles. Throws std::invalid_argument for non-positive rates.
std::vector<AppendixCheck> validate_appendix(const AppendixOptions& options);
int cmd_validate_appendix(const AppendixOptions& options, std::ostream& out, std::ostream& err);

/// Replaces the first occurrence of `find` in the Book.
/// Exit 1 when not found, 2 on length mismatch or a symbol outside the alphabet.
int cmd_edit_genome(const std::string& in_path, const std::string& find, const std::string& replace,
                    const std::string& out_path, std::ostream& out, std::ostream& err);

enum class ExperimentKind
{
    Replicate,
    Compete,
    FixedFeed,
};

struct ExperimentSpec
{
    ExperimentKind kind = ExperimentKind::Replicate;
    /// Base config; empty uses built-in defaults.
    std::string config_path;
    std::vector<std::string> genomes;
    std::uint64_t steps = 10000;
    std::uint64_t sample_interval = 100;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;

    std::optional<double> fixed_a;
    std::optional<double> delta_s;
    std::optional<bool> sun;
    std::optional<bool> flat;
    double feed_multiplier = 2.0;
    double seed_energy = 10.0;
    std::size_t seed_count = 1;
    /// replicate: component size that counts as one offspring organism.
    std::size_t organism_size = 4;
};

/// Throws ConfigError for unknown keys or inconsistent overrides.
ExperimentSpec parse_experiment(const std::string& yaml_text, const std::string& base_dir = ".");
ExperimentSpec load_experiment(const std::string& path);

struct ReplicateSample
{
    std::uint64_t step = 0;
    std::size_t cells = 0;
    std::size_t components = 0;
    std::size_t organisms = 0;
};

struct CompeteSample
{
    std::uint64_t step = 0;
    std::size_t first = 0;
    std::size_t second = 0;
};

struct FixedFeedSample
{
    std::uint64_t step = 0;
    std::size_t cells = 0;
    /// Cells bonded (transitively) to the fed cell.
    std::size_t network = 0;
    /// Largest distance of a network cell from the fed cell.
    double extent = 0.0;
};

struct FixedFeedResult
{
    std::vector<FixedFeedSample> samples;
    /// Means over the second half of the samples.
    double equilibrium_cells = 0.0;
    double equilibrium_network = 0.0;
    double equilibrium_extent = 0.0;
    double feed_energy = 0.0;
};

/// Config an experiment runs with, after applying its overrides.
SimConfig experiment_config(const ExperimentSpec& spec);

std::vector<ReplicateSample> run_replicate(const ExperimentSpec& spec);
std::vector<CompeteSample> run_compete(const ExperimentSpec& spec);
FixedFeedResult run_fixed_feed(const ExperimentSpec& spec);

int cmd_experiment(const std::string& spec_path, std::ostream& out, std::ostream& err);

/// Line-oriented scene text for every field of a simulation.
std::string scene_text(const Simulation& sim);
int cmd_export_scene(const std::string& snapshot_path, const std::string& out_path, std::ostream& out,
                     std::ostream& err);

int cmd_asm(const std::string& source_path, const std::string& out_path, std::ostream& out, std::ostream& err);
int cmd_disasm(const std::string& genome_path, std::ostream& out, std::ostream& err);

} // namespace bookcell
