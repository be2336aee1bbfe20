#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bookcell/config.hpp"
#include "bookcell/energetics.hpp"
#include "bookcell/genome.hpp"
#include "bookcell/mechanics.hpp"
#include "bookcell/neurocell.hpp"
#include "bookcell/rng.hpp"

namespace bookcell {

using CellId = std::uint64_t;

/// One connection slot of a cell. Both endpoints keep a copy of the natural
/// length, and each keeps its own coupling strength S'.
struct Slot
{
    bool used = false;
    CellId partner = 0;
    std::uint8_t partner_slot = 0;
    double natural_length = 0.0;
    double coupling = 1.0;
};

struct Cell
{
    CellId id = 0;
    std::uint64_t lineage = 0;
    Kinematics kin{};
    Rgb absorption{};
    double luminosity = 0.0;
    double energy = 0.0;
    Genome genome;
    NeuralNet net;
    std::vector<Slot> slots;
    std::vector<double> outputs;
    bool wait_connect = false;
    bool wait_disconnect = false;
    bool emitting = false;
    bool pinned = false;
    double pinned_energy = 0.0;
    Vec3 pinned_position{};
    std::uint64_t born_step = 0;

    std::size_t connections() const noexcept;
    /// Lowest free slot, if any.
    std::optional<std::size_t> free_slot() const noexcept;
};

/// Bond as seen from outside: lower id first.
struct SpringBond
{
    CellId a = 0;
    CellId b = 0;
    std::uint8_t slot_a = 0;
    std::uint8_t slot_b = 0;
    double natural_length = 0.0;
};

struct Sun
{
    double position = 16.0;
    double direction = 1.0;
    double speed = 0.5;
    double height = 6.0;
    double y = 16.0;
    double emission = 40.0;
    double radius = 1.0;
    Rgb intensity{1.0, 1.0, 1.0};
    bool enabled = true;

    Vec3 centre() const noexcept { return {position, y, height}; }
};

/// Triangle-wave motion over [0, extent], reversing at the edges.
Sun sun_step(Sun sun, double dt, double extent = 32.0) noexcept;

struct MutationRates
{
    double alpha = 0.0;
    double beta = 0.0;
};

enum class EventKind
{
    Birth,
    Death,
    BondFormed,
    BondBroken,
    Read,
    Eat,
};

std::string_view to_string(EventKind kind) noexcept;

/// One entry of the trace log. Fields not meaningful for a kind stay zero.
struct Event
{
    std::uint64_t step = 0;
    EventKind kind = EventKind::Read;
    CellId cell = 0;
    CellId other = 0;
    /// Read: action; Death: "starved"/"eaten"; BondBroken: "stretch"/"disconnect"/"death".
    std::string detail;
    double amount = 0.0;
};

/// Counts accumulated by one step.
struct StepCounts
{
    std::uint64_t births = 0;
    std::uint64_t deaths = 0;
    std::uint64_t transport_events = 0;
    std::uint64_t mutations = 0;
};

/// Everything a field needs that does not change while it runs.
struct FieldSettings
{
    double dt = 0.05;
    MechanicsParams mechanics{};
    PayloadLayout layout{};
    double delta_s = 0.1;
    double coupling_initial = 1.0;
    std::size_t advance_width = 1;
    std::size_t book_max = 4096;
    double cell_emission = 1.0;
    double emitter_range = 4.0;
    PopulationControl population{};

    static FieldSettings from(const SimConfig& config);
};

/// A single field: terrain, sun, cells and its own random stream. Runs the
/// fixed phase order of step() single-threaded.
class FieldWorld
{
  public:
    FieldWorld(FieldSettings settings, EnergyParams energy, MutationRates rates, FieldHeightmap terrain, Sun sun,
               RngStream rng);

    /// Adds a cell built from a genome and phenotype payload at (x, y) on the
    /// ground; returns its id.
    CellId add_cell(const Genome& genome, const ExpansionPayload& phenotype, double x, double y, double energy,
                    std::uint64_t lineage);

    /// Adds a fully specified cell (migration, snapshot restore). Its id must
    /// exceed every id in the field.
    void insert_cell(Cell cell);

    void step();

    // Individual phases, in step() order. Public for tests.
    void phase_sun();
    void phase_photons();
    void phase_forward();
    void phase_effects();
    void phase_reads();
    void phase_waits();
    void phase_mechanics();
    void phase_decay();
    void phase_mutation();
    void phase_adjust_decay_base();

    /// Bonds two cells directly (tests, seeding); false if either is full.
    bool bond(CellId a, CellId b, double natural_length);
    void unbond(CellId a, std::size_t slot, const char* reason);
    /// Removes a cell and all its bonds.
    void remove_cell(CellId id, const char* cause);

    const std::vector<Cell>& cells() const noexcept { return cells_; }
    std::vector<Cell>& cells_mut() noexcept { return cells_; }
    Cell* find(CellId id) noexcept;
    const Cell* find(CellId id) const noexcept;
    std::vector<SpringBond> bonds() const;
    std::size_t bond_count() const noexcept;

    const Sun& sun() const noexcept { return sun_; }
    Sun& sun_mut() noexcept { return sun_; }
    const FieldHeightmap& terrain() const noexcept { return terrain_; }
    const EnergyParams& energy() const noexcept { return energy_; }
    EnergyParams& energy_mut() noexcept { return energy_; }
    const MutationRates& rates() const noexcept { return rates_; }
    const FieldSettings& settings() const noexcept { return settings_; }
    FieldSettings& settings_mut() noexcept { return settings_; }
    RngStream& rng() noexcept { return rng_; }
    const RngStream& rng() const noexcept { return rng_; }
    std::uint64_t step_count() const noexcept { return step_; }
    void set_step_count(std::uint64_t s) noexcept { step_ = s; }
    CellId next_id() const noexcept { return next_id_; }
    void set_next_id(CellId id) noexcept { next_id_ = id; }
    /// Cell count at the previous decay-base adjustment (0 before the first).
    std::size_t last_count() const noexcept { return last_count_; }
    void set_last_count(std::size_t n) noexcept { last_count_ = n; }
    /// Running sum of cell counts inside the current adjustment interval.
    std::uint64_t count_sum() const noexcept { return count_sum_; }
    void set_count_sum(std::uint64_t s) noexcept { count_sum_ = s; }

    const StepCounts& last_counts() const noexcept { return counts_; }

    void set_tracing(bool on) noexcept { tracing_ = on; }
    bool tracing() const noexcept { return tracing_; }
    const std::vector<Event>& events() const noexcept { return events_; }
    void clear_events() noexcept { events_.clear(); }

    /// Bond-connected components as sorted lists of cell ids, ordered by
    /// their smallest id.
    std::vector<std::vector<CellId>> components() const;

    /// Cost of producing a cell with `payload` next to `at` under the sun.
    double generation_cost_at(const ExpansionPayload& payload, const Vec3& at) const;

    /// Applies one random Book/Bookmarker mutation to `cell`; true if counted.
    bool mutate_cell(Cell& cell);

  private:
    std::size_t index_of(CellId id) const noexcept;
    /// Fills partners_ with the cell index behind every slot (npos if unused).
    void build_partner_table();
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    void record(EventKind kind, CellId cell, CellId other, std::string detail, double amount = 0.0);
    void expand(std::size_t parent, const ExpansionPayload& payload);

    FieldSettings settings_;
    EnergyParams energy_;
    MutationRates rates_;
    FieldHeightmap terrain_;
    Sun sun_;
    RngStream rng_;

    std::vector<Cell> cells_;
    CellId next_id_ = 1;
    std::size_t last_count_ = 0;
    std::uint64_t count_sum_ = 0;
    std::uint64_t step_ = 0;
    StepCounts counts_{};

    // Per-step scratch.
    std::vector<Rgb> light_;
    std::vector<std::size_t> touch_start_;
    std::vector<std::size_t> touch_items_;
    std::vector<CellId> ids_;
    std::vector<std::size_t> partners_;
    std::vector<std::uint64_t> eaten_by_;
    std::vector<double> next_outputs_;
    std::vector<double> inputs_;
    std::vector<double> hidden_;

    bool tracing_ = false;
    std::vector<Event> events_;
};

/// Applies one substitute/insert/delete with probability beta to a copied Book.
std::string mutate_division(std::string book, double beta, RngStream& rng, std::size_t book_max = 4096);

/// One substitute/insert/delete at a random position; substitution never
/// keeps the same symbol. Returns false when nothing could change.
bool mutate_book(std::string& book, RngStream& rng, std::size_t book_max);

/// A <- clamp(A (target / N)^gain (N_prev / N)^damping, a_min, a_max), the
/// second factor only when N_prev > 0. The field passes interval means. More cells lower A, which raises every
/// under-connected cell's decay rate.
double adjust_decay_base(double a, std::size_t n_cells, std::size_t n_previous,
                         const PopulationControl& control) noexcept;

} // namespace bookcell
