#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bookcell/config.hpp"
#include "bookcell/rng.hpp"
#include "bookcell/world.hpp"

namespace bookcell {

/// One metrics line. Counters are sums over the window ending at `step`;
/// cells, connections and A are sampled at `step`.
struct MetricsRow
{
    std::uint64_t step = 0;
    std::uint64_t cells = 0;
    std::uint64_t connections = 0;
    std::uint64_t transport_events = 0;
    std::uint64_t births = 0;
    std::uint64_t deaths = 0;
    std::uint64_t mutations = 0;
    double A = 0.0;
};

/// "# bookcell metrics v1" followed by the column header, newline-terminated.
std::string metrics_header();
std::string format_metrics_row(const MetricsRow& row);

struct TraceFilter
{
    /// Empty means every kind.
    std::vector<EventKind> kinds;
    /// Matches events whose cell or other id equals this.
    std::optional<CellId> cell;
};

std::vector<Event> trace_events(std::span<const Event> events, const TraceFilter& filter);
std::string format_event(const Event& e);

/// Builds the terrain a config asks for.
FieldHeightmap make_terrain(const SimConfig& config);

/// Pools the bond-connected components of every field, shuffles them with
/// `rng` and deals them round-robin back to the fields at random positions.
/// Cells get fresh ids in their destination field.
void migrate_mix(std::vector<FieldWorld>& fields, RngStream& rng);

/// One or more fields stepped in lock-step, with migration at epoch
/// boundaries and metrics windows.
class Simulation
{
  public:
    using MetricsSink = std::function<void(std::size_t field, const MetricsRow& row)>;

    /// Builds the fields and places the configured seed cells.
    explicit Simulation(SimConfig config);

    /// Runs `steps` steps. Throws NumericBlowupError carrying the step.
    void run(std::uint64_t steps, const MetricsSink& sink = {});

    std::vector<std::uint8_t> snapshot() const;
    /// Throws SnapshotError on a bad magic, version, checksum or record.
    static Simulation restore(std::span<const std::uint8_t> bytes);

    const SimConfig& config() const noexcept { return config_; }
    std::uint64_t step_count() const noexcept { return step_; }
    std::vector<FieldWorld>& fields() noexcept { return fields_; }
    const std::vector<FieldWorld>& fields() const noexcept { return fields_; }
    const RngStream& migration_rng() const noexcept { return migration_; }

    void set_parallel(bool on) noexcept { parallel_ = on; }
    bool parallel() const noexcept { return parallel_; }

    /// Collected events of every field since the last call, field by field.
    std::vector<std::vector<Event>> drain_events();

    /// Counters of the metrics window in progress, per field.
    const std::vector<StepCounts>& window() const noexcept { return window_; }

  private:
    struct Empty
    {
    };
    Simulation(SimConfig config, Empty);

    void advance_fields(std::uint64_t steps);
    MetricsRow sample(std::size_t field) const;

    SimConfig config_;
    std::vector<FieldWorld> fields_;
    std::vector<StepCounts> window_;
    RngStream migration_;
    std::uint64_t step_ = 0;
    bool parallel_ = false;
};

/// FNV-1a 64 of the canonical config text.
std::uint64_t config_hash(const SimConfig& config);

void write_snapshot_file(const std::string& path, const Simulation& sim);
Simulation read_snapshot_file(const std::string& path);

} // namespace bookcell
