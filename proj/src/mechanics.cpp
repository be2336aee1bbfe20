#include "bookcell/mechanics.hpp"

#include <algorithm>
#include <numbers>
#include <sstream>

#include "bookcell/errors.hpp"
#include "bookcell/rng.hpp"

namespace bookcell {

FieldHeightmap::FieldHeightmap() : heights_(side * side, 0.0) {}

FieldHeightmap::FieldHeightmap(std::vector<double> heights) : heights_(std::move(heights))
{
    if (heights_.size() != side * side)
        throw ConfigError("heightmap needs " + std::to_string(side * side) + " values, got " +
                          std::to_string(heights_.size()));
    for (double h : heights_)
        if (!std::isfinite(h))
            throw ConfigError("heightmap contains a non-finite height");
}

FieldHeightmap FieldHeightmap::flat()
{
    return FieldHeightmap();
}

FieldHeightmap FieldHeightmap::undulating(std::uint64_t seed, double amplitude)
{
    constexpr int waves = 4;
    RngStream rng = RngStream(seed).split("terrain");
    std::array<double, waves> fx{}, fy{}, phase{}, weight{};
    for (int k = 0; k < waves; ++k) {
        fx[k] = 1.0 + static_cast<double>(rng.below(3));
        fy[k] = 1.0 + static_cast<double>(rng.below(3));
        phase[k] = 2.0 * std::numbers::pi * rng.uniform();
        weight[k] = 0.5 + rng.uniform();
    }
    std::vector<double> h(side * side);
    for (std::size_t iy = 0; iy < side; ++iy) {
        for (std::size_t ix = 0; ix < side; ++ix) {
            const double x = static_cast<double>(ix) + 0.5;
            const double y = static_cast<double>(iy) + 0.5;
            double v = 0.0;
            for (int k = 0; k < waves; ++k)
                v += weight[k] * std::sin(2.0 * std::numbers::pi * (fx[k] * x + fy[k] * y) / side + phase[k]);
            h[iy * side + ix] = amplitude * v / waves;
        }
    }
    return FieldHeightmap(std::move(h));
}

double FieldHeightmap::height(double x, double y) const noexcept
{
    const double max_c = static_cast<double>(side - 1);
    const double gx = std::clamp(x - 0.5, 0.0, max_c);
    const double gy = std::clamp(y - 0.5, 0.0, max_c);
    const auto ix = std::min(static_cast<std::size_t>(gx), side - 2);
    const auto iy = std::min(static_cast<std::size_t>(gy), side - 2);
    const double tx = gx - static_cast<double>(ix);
    const double ty = gy - static_cast<double>(iy);
    const double h00 = at(ix, iy), h10 = at(ix + 1, iy), h01 = at(ix, iy + 1), h11 = at(ix + 1, iy + 1);
    return (h00 * (1 - tx) + h10 * tx) * (1 - ty) + (h01 * (1 - tx) + h11 * tx) * ty;
}

FieldHeightmap FieldHeightmap::parse(const std::string& text)
{
    std::istringstream in(text);
    std::vector<double> h;
    h.reserve(side * side);
    std::string tok;
    while (in >> tok) {
        try {
            std::size_t used = 0;
            h.push_back(std::stod(tok, &used));
            if (used != tok.size())
                throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ConfigError("heightmap: '" + tok + "' is not a number (value " + std::to_string(h.size() + 1) + ")");
        }
    }
    return FieldHeightmap(std::move(h));
}

std::string FieldHeightmap::format() const
{
    std::ostringstream os;
    os.precision(17);
    for (std::size_t iy = 0; iy < side; ++iy) {
        for (std::size_t ix = 0; ix < side; ++ix)
            os << (ix ? " " : "") << at(ix, iy);
        os << "\n";
    }
    return os.str();
}

SpatialHash::SpatialHash(double extent, double cell_size)
    : cell_(cell_size), dim_(std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(extent / cell_size))))
{
}

std::size_t SpatialHash::bucket_of(const Vec3& p) const noexcept
{
    const auto clampi = [this](double v) {
        const double c = std::floor(v / cell_);
        if (!(c >= 0.0))
            return std::size_t{0};
        return std::min(static_cast<std::size_t>(c), dim_ - 1);
    };
    return clampi(p.y) * dim_ + clampi(p.x);
}

void SpatialHash::build(std::span<const Kinematics> cells)
{
    start_.assign(dim_ * dim_ + 1, 0);
    bucket_.resize(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        bucket_[i] = bucket_of(cells[i].position);
        ++start_[bucket_[i] + 1];
    }
    for (std::size_t b = 0; b < dim_ * dim_; ++b)
        start_[b + 1] += start_[b];
    items_.resize(cells.size());
    std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < cells.size(); ++i)
        items_[fill[bucket_[i]]++] = i;
}

std::vector<std::pair<std::size_t, std::size_t>> contact_query(std::span<const Kinematics> cells, double max_radius)
{
    SpatialHash hash(32.0, 2.0 * max_radius);
    hash.build(cells);
    std::vector<std::pair<std::size_t, std::size_t>> out;
    hash.for_each_candidate(cells, [&](std::size_t i, std::size_t j) {
        if (distance(cells[i].position, cells[j].position) < cells[i].radius + cells[j].radius)
            out.emplace_back(i, j);
    });
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> contact_query_brute(std::span<const Kinematics> cells)
{
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < cells.size(); ++i)
        for (std::size_t j = i + 1; j < cells.size(); ++j)
            if (distance(cells[i].position, cells[j].position) < cells[i].radius + cells[j].radius)
                out.emplace_back(i, j);
    return out;
}

namespace {

bool finite(const Vec3& v) noexcept
{
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

void wall(double& x, double& v, double lo, double hi) noexcept
{
    if (x < lo) {
        x = lo;
        if (v < 0.0)
            v = -v;
    } else if (x > hi) {
        x = hi;
        if (v > 0.0)
            v = -v;
    }
}

} // namespace

void integrate_step(std::span<Kinematics> cells, std::span<const SpringLink> links, const FieldHeightmap& field,
                    const MechanicsParams& p, double dt)
{
    if (!(dt > 0.0))
        throw TimestepError("mechanics step needs dt > 0");
    const std::size_t n = cells.size();
    if (n == 0)
        return;
    const std::size_t substeps = std::max<std::size_t>(1, p.substeps);
    const double h = dt / static_cast<double>(substeps);
    std::vector<Vec3> force(n);
    SpatialHash hash(p.extent, 2.0 * p.max_radius);

    for (std::size_t s = 0; s < substeps; ++s) {
        for (std::size_t i = 0; i < n; ++i)
            force[i] = {0.0, 0.0, -p.gravity * cells[i].mass};

        for (const auto& l : links) {
            auto& a = cells[l.a];
            auto& b = cells[l.b];
            const Vec3 d = b.position - a.position;
            const double len = d.norm();
            if (!(len > 0.0))
                continue;
            const Vec3 dir = (1.0 / len) * d;
            const double f =
                p.spring_stiffness * (len - l.natural_length) + p.damping * dot(b.velocity - a.velocity, dir);
            force[l.a] += f * dir;
            force[l.b] -= f * dir;
        }

        hash.build(cells);
        hash.for_each_candidate(std::span<const Kinematics>(cells.data(), n), [&](std::size_t i, std::size_t j) {
            auto& a = cells[i];
            auto& b = cells[j];
            const Vec3 d = b.position - a.position;
            const double len = d.norm();
            const double overlap = a.radius + b.radius - len;
            if (!(overlap > 0.0) || !(len > 0.0))
                return;
            const Vec3 dir = (1.0 / len) * d;
            const double closing = std::min(0.0, dot(b.velocity - a.velocity, dir));
            const double f = p.repulsion_stiffness * overlap - p.damping * closing;
            force[i] -= f * dir;
            force[j] += f * dir;
        });

        for (std::size_t i = 0; i < n; ++i) {
            auto& c = cells[i];
            const double ground = field.height(c.position.x, c.position.y) + c.radius;
            if (c.position.z <= ground + 1e-9) {
                force[i].x -= p.ground_friction * c.mass * c.velocity.x;
                force[i].y -= p.ground_friction * c.mass * c.velocity.y;
            }
            c.velocity += (h / c.mass) * force[i];
            c.position += h * c.velocity;

            wall(c.position.x, c.velocity.x, c.radius, p.extent - c.radius);
            wall(c.position.y, c.velocity.y, c.radius, p.extent - c.radius);
            const double floor_z = field.height(c.position.x, c.position.y) + c.radius;
            if (c.position.z < floor_z) {
                c.position.z = floor_z;
                if (c.velocity.z < 0.0)
                    c.velocity.z = 0.0;
            }
            if (!finite(c.position) || !finite(c.velocity))
                throw NumericBlowupError("non-finite kinematic state for cell index " + std::to_string(i));
        }
    }
}

std::optional<double> try_connect(const ConnectSide& a, const ConnectSide& b, const MechanicsParams& p)
{
    if (!a.waiting || !b.waiting || !a.has_free_slot || !b.has_free_slot)
        return std::nullopt;
    const double r = std::min(a.radius, b.radius);
    const double d = distance(a.position, b.position);
    if (d > p.connect_factor * r)
        return std::nullopt;
    return std::clamp(d, p.min_length_factor * r, length_cap(r, p));
}

bool check_break(double natural_length, double distance, const MechanicsParams& p) noexcept
{
    return distance > p.break_factor * natural_length;
}

double adjust_natural_length(double natural_length, double l_out, double dt, double min_radius,
                             const MechanicsParams& p) noexcept
{
    double l = natural_length;
    if (l_out > p.muscle_threshold)
        l += p.muscle_rate * dt;
    else if (l_out < -p.muscle_threshold)
        l -= p.muscle_rate * dt;
    return std::clamp(l, p.min_length_factor * min_radius, length_cap(min_radius, p));
}

} // namespace bookcell
