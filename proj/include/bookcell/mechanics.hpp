#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace bookcell {

struct Vec3
{
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3& operator+=(const Vec3& o) noexcept
    {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    Vec3& operator-=(const Vec3& o) noexcept
    {
        x -= o.x;
        y -= o.y;
        z -= o.z;
        return *this;
    }
    friend Vec3 operator+(Vec3 a, const Vec3& b) noexcept { return a += b; }
    friend Vec3 operator-(Vec3 a, const Vec3& b) noexcept { return a -= b; }
    friend Vec3 operator*(double s, const Vec3& v) noexcept { return {s * v.x, s * v.y, s * v.z}; }
    friend Vec3 operator*(const Vec3& v, double s) noexcept { return s * v; }
    friend double dot(const Vec3& a, const Vec3& b) noexcept { return a.x * b.x + a.y * b.y + a.z * b.z; }
    double norm() const noexcept { return std::sqrt(dot(*this, *this)); }
    friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double distance(const Vec3& a, const Vec3& b) noexcept
{
    return (a - b).norm();
}

/// 32x32 block heights, unit block edge. Heights live at block centres and
/// are bilinearly interpolated, clamped at the border.
class FieldHeightmap
{
  public:
    static constexpr std::size_t side = 32;

    FieldHeightmap();
    explicit FieldHeightmap(std::vector<double> heights);

    /// Smooth random undulations: a few sinusoids with seeded phases.
    static FieldHeightmap undulating(std::uint64_t seed, double amplitude);
    static FieldHeightmap flat();

    double at(std::size_t ix, std::size_t iy) const noexcept { return heights_[iy * side + ix]; }
    double height(double x, double y) const noexcept;
    std::span<const double> heights() const noexcept { return heights_; }

    /// Whitespace-separated 32x32 grid, one row per line (row index = y).
    static FieldHeightmap parse(const std::string& text);
    std::string format() const;

  private:
    std::vector<double> heights_;
};

struct Kinematics
{
    Vec3 position;
    Vec3 velocity;
    double mass = 1.0;
    double radius = 0.16;
};

/// Bond between two entries of a kinematic array.
struct SpringLink
{
    std::size_t a = 0;
    std::size_t b = 0;
    double natural_length = 0.0;
};

struct MechanicsParams
{
    double spring_stiffness = 50.0;
    double damping = 2.0;
    double gravity = 9.8;
    double repulsion_stiffness = 50.0;
    double ground_friction = 1.0;
    std::size_t substeps = 2;
    double extent = 32.0;
    double max_radius = 0.16;

    double connect_factor = 1.95;
    double length_cap_factor = 1.10;
    double break_factor = 2.00;
    double min_length_factor = 0.1;
    double muscle_rate = 0.02;
    double muscle_threshold = 0.5;
};

/// Semi-implicit Euler with Hooke springs, contact repulsion, gravity,
/// ground projection and reflective walls. Throws NumericBlowupError on
/// non-finite state.
void integrate_step(std::span<Kinematics> cells, std::span<const SpringLink> links, const FieldHeightmap& field,
                    const MechanicsParams& params, double dt);

/// Uniform-grid broad phase over (x, y) with cell size 2 r_max.
class SpatialHash
{
  public:
    SpatialHash(double extent, double cell_size);
    void build(std::span<const Kinematics> cells);
    /// Calls fn(i, j) for every pair i < j whose centres are within `reach`
    /// of each other's buckets; the caller applies the exact distance test.
    template <class Fn>
    void for_each_candidate(std::span<const Kinematics> cells, Fn&& fn) const;
    double cell_size() const noexcept { return cell_; }

  private:
    std::size_t bucket_of(const Vec3& p) const noexcept;

    double cell_;
    std::size_t dim_;
    std::vector<std::size_t> start_;
    std::vector<std::size_t> items_;
    std::vector<std::size_t> bucket_;
};

/// Pairs (i < j) with centre distance < r_i + r_j, sorted.
std::vector<std::pair<std::size_t, std::size_t>> contact_query(std::span<const Kinematics> cells, double max_radius);

/// Reference O(n^2) enumeration.
std::vector<std::pair<std::size_t, std::size_t>> contact_query_brute(std::span<const Kinematics> cells);

/// What try_connect needs to know about one side.
struct ConnectSide
{
    Vec3 position;
    double radius = 0.16;
    bool waiting = false;
    bool has_free_slot = false;
};

/// Natural length of the new bond, or nothing when the pair may not bond:
/// both must wait, both need a free slot and the centres must be within
/// connect_factor * min radius (inclusive).
std::optional<double> try_connect(const ConnectSide& a, const ConnectSide& b, const MechanicsParams& params);

/// Strictly beyond break_factor * natural length.
bool check_break(double natural_length, double distance, const MechanicsParams& params) noexcept;

/// Upper clamp of the natural length for a pair with minimum radius r.
inline double length_cap(double min_radius, const MechanicsParams& p) noexcept
{
    return p.length_cap_factor * min_radius;
}

/// Muscle action: grows or shrinks by muscle_rate * dt when |l_out| exceeds
/// the threshold, then clamps to [min_length_factor r, length_cap_factor r].
double adjust_natural_length(double natural_length, double l_out, double dt, double min_radius,
                             const MechanicsParams& params) noexcept;

template <class Fn>
void SpatialHash::for_each_candidate(std::span<const Kinematics> cells, Fn&& fn) const
{
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const std::size_t b = bucket_[i];
        const long bx = static_cast<long>(b % dim_);
        const long by = static_cast<long>(b / dim_);
        for (long dy = -1; dy <= 1; ++dy) {
            const long y = by + dy;
            if (y < 0 || y >= static_cast<long>(dim_))
                continue;
            for (long dx = -1; dx <= 1; ++dx) {
                const long x = bx + dx;
                if (x < 0 || x >= static_cast<long>(dim_))
                    continue;
                const std::size_t nb = static_cast<std::size_t>(y) * dim_ + static_cast<std::size_t>(x);
                for (std::size_t k = start_[nb]; k < start_[nb + 1]; ++k) {
                    const std::size_t j = items_[k];
                    if (j > i)
                        fn(i, j);
                }
            }
        }
    }
}

} // namespace bookcell
