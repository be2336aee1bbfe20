#include "bookcell/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bookcell/alphabet.hpp"
#include "bookcell/errors.hpp"

namespace bookcell {

std::size_t Cell::connections() const noexcept
{
    return static_cast<std::size_t>(std::count_if(slots.begin(), slots.end(), [](const Slot& s) { return s.used; }));
}

std::optional<std::size_t> Cell::free_slot() const noexcept
{
    for (std::size_t k = 0; k < slots.size(); ++k)
        if (!slots[k].used)
            return k;
    return std::nullopt;
}

Sun sun_step(Sun sun, double dt, double extent) noexcept
{
    if (sun.speed == 0.0 || extent <= 0.0)
        return sun;
    double travel = sun.speed * dt;
    const double period = 2.0 * extent;
    double s = sun.direction > 0 ? sun.position : period - sun.position;
    s = std::fmod(s + travel, period);
    if (s < 0.0)
        s += period;
    if (s <= extent) {
        sun.position = s;
        sun.direction = 1.0;
    } else {
        sun.position = period - s;
        sun.direction = -1.0;
    }
    return sun;
}

std::string_view to_string(EventKind kind) noexcept
{
    switch (kind) {
    case EventKind::Birth:
        return "birth";
    case EventKind::Death:
        return "death";
    case EventKind::BondFormed:
        return "bond";
    case EventKind::BondBroken:
        return "unbond";
    case EventKind::Read:
        return "read";
    case EventKind::Eat:
        return "eat";
    }
    return "?";
}

FieldSettings FieldSettings::from(const SimConfig& c)
{
    FieldSettings s;
    s.dt = c.dt;
    s.mechanics = c.mechanics;
    s.layout = c.layout();
    s.delta_s = c.delta_s;
    s.coupling_initial = c.coupling_initial;
    s.advance_width = c.advance_width;
    s.book_max = c.book_max;
    s.cell_emission = c.cell_emission;
    s.emitter_range = c.emitter_range;
    s.population = c.population;
    return s;
}

FieldWorld::FieldWorld(FieldSettings settings, EnergyParams energy, MutationRates rates, FieldHeightmap terrain,
                       Sun sun, RngStream rng)
    : settings_(std::move(settings)),
      energy_(energy),
      rates_(rates),
      terrain_(std::move(terrain)),
      sun_(sun),
      rng_(rng)
{
}

std::size_t FieldWorld::index_of(CellId id) const noexcept
{
    const auto it = std::lower_bound(cells_.begin(), cells_.end(), id,
                                     [](const Cell& c, CellId v) { return c.id < v; });
    if (it == cells_.end() || it->id != id)
        return cells_.size();
    return static_cast<std::size_t>(it - cells_.begin());
}

void FieldWorld::build_partner_table()
{
    const std::size_t n = cells_.size();
    const std::size_t slots = settings_.layout.shape.n_slots;
    ids_.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        ids_[i] = cells_[i].id;
    partners_.assign(n * slots, npos);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < cells_[i].slots.size(); ++k)
            if (cells_[i].slots[k].used) {
                const auto it = std::lower_bound(ids_.begin(), ids_.end(), cells_[i].slots[k].partner);
                if (it != ids_.end() && *it == cells_[i].slots[k].partner)
                    partners_[i * slots + k] = static_cast<std::size_t>(it - ids_.begin());
            }
}

Cell* FieldWorld::find(CellId id) noexcept
{
    const auto i = index_of(id);
    return i < cells_.size() ? &cells_[i] : nullptr;
}

const Cell* FieldWorld::find(CellId id) const noexcept
{
    const auto i = index_of(id);
    return i < cells_.size() ? &cells_[i] : nullptr;
}

void FieldWorld::record(EventKind kind, CellId cell, CellId other, std::string detail, double amount)
{
    if (tracing_)
        events_.push_back(Event{step_, kind, cell, other, std::move(detail), amount});
}

CellId FieldWorld::add_cell(const Genome& genome, const ExpansionPayload& ph, double x, double y, double energy,
                            std::uint64_t lineage)
{
    const auto& shape = settings_.layout.shape;
    Cell c;
    c.id = next_id_++;
    c.lineage = lineage;
    c.kin.mass = ph.mass;
    c.kin.radius = ph.radius;
    c.kin.position = {x, y, terrain_.height(x, y) + ph.radius};
    c.absorption = ph.absorption;
    c.luminosity = ph.luminosity;
    c.energy = energy;
    c.genome = genome;
    c.net = NeuralNet(shape, ph.weights);
    c.slots.assign(shape.n_slots, Slot{});
    c.outputs.assign(shape.n_out(), 0.0);
    c.born_step = step_;
    const CellId id = c.id;
    cells_.push_back(std::move(c));
    return id;
}

void FieldWorld::insert_cell(Cell cell)
{
    if (!cells_.empty() && cell.id <= cells_.back().id)
        throw Error("insert_cell: ids must increase");
    next_id_ = std::max(next_id_, cell.id + 1);
    cells_.push_back(std::move(cell));
}

bool FieldWorld::bond(CellId a, CellId b, double natural_length)
{
    const auto ia = index_of(a), ib = index_of(b);
    if (ia >= cells_.size() || ib >= cells_.size() || ia == ib)
        return false;
    auto& ca = cells_[ia];
    auto& cb = cells_[ib];
    const auto sa = ca.free_slot(), sb = cb.free_slot();
    if (!sa || !sb)
        return false;
    ca.slots[*sa] = Slot{true, b, static_cast<std::uint8_t>(*sb), natural_length, settings_.coupling_initial};
    cb.slots[*sb] = Slot{true, a, static_cast<std::uint8_t>(*sa), natural_length, settings_.coupling_initial};
    record(EventKind::BondFormed, std::min(a, b), std::max(a, b), "", natural_length);
    return true;
}

void FieldWorld::unbond(CellId a, std::size_t slot, const char* reason)
{
    auto* ca = find(a);
    if (!ca || slot >= ca->slots.size() || !ca->slots[slot].used)
        return;
    const Slot s = ca->slots[slot];
    ca->slots[slot] = Slot{};
    if (auto* cb = find(s.partner))
        cb->slots[s.partner_slot] = Slot{};
    record(EventKind::BondBroken, std::min(a, s.partner), std::max(a, s.partner), reason);
}

void FieldWorld::remove_cell(CellId id, const char* cause)
{
    const auto i = index_of(id);
    if (i >= cells_.size())
        return;
    for (std::size_t k = 0; k < cells_[i].slots.size(); ++k)
        if (cells_[i].slots[k].used)
            unbond(id, k, "death");
    record(EventKind::Death, id, 0, cause, cells_[i].energy);
    cells_.erase(cells_.begin() + static_cast<std::ptrdiff_t>(i));
}

std::vector<SpringBond> FieldWorld::bonds() const
{
    std::vector<SpringBond> out;
    for (const auto& c : cells_)
        for (std::size_t k = 0; k < c.slots.size(); ++k) {
            const auto& s = c.slots[k];
            if (s.used && s.partner > c.id)
                out.push_back(SpringBond{c.id, s.partner, static_cast<std::uint8_t>(k), s.partner_slot,
                                         s.natural_length});
        }
    return out;
}

std::size_t FieldWorld::bond_count() const noexcept
{
    std::size_t n = 0;
    for (const auto& c : cells_)
        for (const auto& s : c.slots)
            if (s.used && s.partner > c.id)
                ++n;
    return n;
}

std::vector<std::vector<CellId>> FieldWorld::components() const
{
    const std::size_t n = cells_.size();
    std::vector<std::size_t> parent(n);
    for (std::size_t i = 0; i < n; ++i)
        parent[i] = i;
    auto root = [&](std::size_t i) {
        while (parent[i] != i)
            i = parent[i] = parent[parent[i]];
        return i;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& s : cells_[i].slots)
            if (s.used) {
                const auto j = index_of(s.partner);
                if (j < n) {
                    const auto a = root(i), b = root(j);
                    if (a != b)
                        parent[std::max(a, b)] = std::min(a, b);
                }
            }
    std::vector<std::vector<CellId>> out;
    std::vector<std::size_t> slot_of(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = root(i);
        if (slot_of[r] == n) {
            slot_of[r] = out.size();
            out.emplace_back();
        }
        out[slot_of[r]].push_back(cells_[i].id);
    }
    return out;
}

double FieldWorld::generation_cost_at(const ExpansionPayload& payload, const Vec3& at) const
{
    PhotonChannel ch;
    ch.emission = sun_.emission;
    ch.source_radius = sun_.radius;
    ch.distance = distance(sun_.centre(), at);
    return generation_cost(payload, sun_.intensity, ch, energy_, 1);
}

void FieldWorld::step()
{
    ++step_;
    counts_ = StepCounts{};
    phase_sun();
    phase_photons();
    phase_forward();
    phase_effects();
    phase_reads();
    phase_waits();
    phase_mechanics();
    phase_decay();
    phase_mutation();
    phase_adjust_decay_base();
}

void FieldWorld::phase_sun()
{
    sun_ = sun_step(sun_, settings_.dt, settings_.mechanics.extent);
}

void FieldWorld::phase_photons()
{
    const double dt = settings_.dt;
    const std::size_t n = cells_.size();
    light_.assign(n, Rgb{0.0, 0.0, 0.0});

    std::vector<std::size_t> emitters;
    for (std::size_t i = 0; i < n; ++i)
        if (cells_[i].emitting)
            emitters.push_back(i);

    const Vec3 sun_at = sun_.centre();
    for (std::size_t i = 0; i < n; ++i) {
        auto& c = cells_[i];
        const double area = cross_section(c.kin.radius);
        if (sun_.enabled && sun_.emission > 0.0) {
            const double h = distance(sun_at, c.kin.position);
            if (h > 0.0) {
                const double flux = photon_flux(PhotonChannel{sun_.emission, sun_.radius, h, area});
                if (rng_.bernoulli(hit_probability(flux, area, dt))) {
                    c.energy += absorb_light(sun_.intensity, c.absorption, energy_.conversion);
                    for (int k = 0; k < 3; ++k)
                        light_[i][k] += sun_.intensity[k];
                }
            }
        }
        for (const std::size_t j : emitters) {
            if (j == i)
                continue;
            const auto& e = cells_[j];
            const double h = distance(e.kin.position, c.kin.position);
            if (!(h > 0.0) || h > settings_.emitter_range)
                continue;
            const double flux = photon_flux(PhotonChannel{settings_.cell_emission, e.kin.radius, h, area});
            if (rng_.bernoulli(hit_probability(flux, area, dt))) {
                const Rgb colour{e.luminosity * e.absorption[0], e.luminosity * e.absorption[1],
                                 e.luminosity * e.absorption[2]};
                c.energy += absorb_light(colour, c.absorption, energy_.conversion);
                for (int k = 0; k < 3; ++k)
                    light_[i][k] += colour[k];
            }
        }
    }
}

void FieldWorld::phase_forward()
{
    const std::size_t n = cells_.size();
    const auto& shape = settings_.layout.shape;
    const std::size_t n_out = shape.n_out();
    const std::size_t n_slots = shape.n_slots;

    std::vector<Kinematics> kin(n);
    for (std::size_t i = 0; i < n; ++i)
        kin[i] = cells_[i].kin;
    const auto pairs = contact_query(kin, settings_.mechanics.max_radius);
    touch_start_.assign(n + 1, 0);
    for (const auto& [i, j] : pairs) {
        ++touch_start_[i + 1];
        ++touch_start_[j + 1];
    }
    for (std::size_t i = 0; i < n; ++i)
        touch_start_[i + 1] += touch_start_[i];
    touch_items_.resize(2 * pairs.size());
    {
        std::vector<std::size_t> fill(touch_start_.begin(), touch_start_.end() - 1);
        for (const auto& [i, j] : pairs) {
            touch_items_[fill[i]++] = j;
            touch_items_[fill[j]++] = i;
        }
    }
    if (light_.size() != n)
        light_.assign(n, Rgb{0.0, 0.0, 0.0});
    build_partner_table();

    next_outputs_.assign(n * n_out, 0.0);
    inputs_.assign(shape.n_in(), 0.0);
    hidden_.assign(shape.n_hidden, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& c = cells_[i];
        std::fill(inputs_.begin(), inputs_.end(), 0.0);
        for (std::size_t k = 0; k < c.slots.size(); ++k) {
            const auto j = partners_[i * n_slots + k];
            if (j == npos)
                continue;
            const auto& s = c.slots[k];
            const auto& po = cells_[j].outputs;
            inputs_[shape.in_s(k)] = po[shape.out_s(s.partner_slot)] * s.coupling;
            inputs_[shape.in_l(k)] = po[shape.out_l(s.partner_slot)];
            inputs_[shape.in_e(k)] = po[shape.out_e(s.partner_slot)];
        }
        const auto ratios = light_ratios(light_[i]);
        for (std::size_t k = 0; k < 3; ++k)
            inputs_[shape.in_light(k)] = ratios[k];
        inputs_[shape.in_touch()] = touch_start_[i + 1] > touch_start_[i] ? 1.0 : 0.0;
        c.net.forward_into(inputs_, hidden_, std::span<double>(next_outputs_.data() + i * n_out, n_out));
    }
    for (std::size_t i = 0; i < n; ++i)
        std::copy_n(next_outputs_.data() + i * n_out, n_out, cells_[i].outputs.begin());
}

void FieldWorld::phase_effects()
{
    const std::size_t n = cells_.size();
    const auto& shape = settings_.layout.shape;
    const double dt = settings_.dt;
    const std::size_t n_slots = shape.n_slots;
    eaten_by_.assign(n, 0);
    if (touch_start_.size() != n + 1) {
        touch_start_.assign(n + 1, 0);
        touch_items_.clear();
    }
    if (partners_.size() != n * n_slots)
        build_partner_table();
    const auto touching = [this](std::size_t i) {
        return std::span<const std::size_t>(touch_items_.data() + touch_start_[i], touch_start_[i + 1] - touch_start_[i]);
    };

    for (std::size_t i = 0; i < n; ++i) {
        auto& c = cells_[i];
        const auto& out = c.outputs;

        const double d = std::max(out[shape.out_eat()], 0.0);
        if (d > 0.0) {
            for (const std::size_t j : touching(i)) {
                auto& prey = cells_[j];
                const double gain =
                    eat_gain(d, c.connections(), prey.connections(), energy_.max_connections, prey.energy);
                if (gain > 0.0) {
                    prey.energy -= gain;
                    c.energy += gain;
                    eaten_by_[j] = c.id;
                    record(EventKind::Eat, c.id, prey.id, "", gain);
                }
            }
        }

        if (out[shape.out_fusion()] > 0.0) {
            for (const std::size_t j : touching(i)) {
                if (c.genome.book.size() >= settings_.book_max)
                    break;
                c.genome.book += cells_[j].genome.book;
                if (c.genome.book.size() > settings_.book_max)
                    c.genome.book.resize(settings_.book_max);
            }
        }

        c.emitting = out[shape.out_light()] > 0.0;
        if (c.emitting)
            c.energy -= energy_.emission_cost * c.kin.radius * c.kin.radius * dt;

        for (std::size_t k = 0; k < c.slots.size(); ++k) {
            auto& s = c.slots[k];
            if (!s.used)
                continue;
            const auto pj = partners_[i * n_slots + k];
            if (pj == npos)
                continue;
            auto* partner = &cells_[pj];
            const double moved = transport_energy(c.energy, out[shape.out_e(k)], energy_.transfer_rate, dt);
            if (moved > 0.0) {
                c.energy -= moved;
                partner->energy += moved;
                ++counts_.transport_events;
            }
            const double r = std::min(c.kin.radius, partner->kin.radius);
            s.natural_length = adjust_natural_length(s.natural_length, out[shape.out_l(k)], dt, r, settings_.mechanics);
            auto& back = partner->slots[s.partner_slot];
            back.natural_length = s.natural_length;
            back.coupling = hebb_update(back.coupling, out[shape.out_s(k)], settings_.delta_s);
        }
    }
}

void FieldWorld::expand(std::size_t parent, const ExpansionPayload& payload)
{
    const auto slot = cells_[parent].free_slot();
    if (!slot)
        return;
    const double cost = generation_cost_at(payload, cells_[parent].kin.position);
    if (!std::isfinite(cost) || cells_[parent].energy - cost < energy_.death_threshold)
        return;

    const auto& shape = settings_.layout.shape;
    const double z = 2.0 * rng_.uniform() - 1.0;
    const double phi = 2.0 * std::numbers::pi * rng_.uniform();
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Vec3 dir{rho * std::cos(phi), rho * std::sin(phi), z};

    Cell child;
    child.id = next_id_++;
    child.lineage = cells_[parent].lineage;
    child.kin.mass = payload.mass;
    child.kin.radius = payload.radius;
    const double reach = cells_[parent].kin.radius + payload.radius;
    child.kin.position = cells_[parent].kin.position + reach * dir;
    child.kin.velocity = cells_[parent].kin.velocity;
    const double floor_z = terrain_.height(child.kin.position.x, child.kin.position.y) + child.kin.radius;
    child.kin.position.z = std::max(child.kin.position.z, floor_z);
    child.absorption = payload.absorption;
    child.luminosity = payload.luminosity;
    child.energy = cost;
    child.genome.book = mutate_division(copy_range(cells_[parent].genome.book, payload.copy_start, payload.copy_end),
                                        rates_.beta, rng_, settings_.book_max);
    child.genome.bookmarker = payload.child_bookmarker;
    child.genome.advance = std::string(settings_.advance_width, 'A');
    child.net = NeuralNet(shape, payload.weights);
    child.slots.assign(shape.n_slots, Slot{});
    child.outputs.assign(shape.n_out(), 0.0);
    child.born_step = step_;

    cells_[parent].energy -= cost;
    const CellId parent_id = cells_[parent].id;
    const CellId child_id = child.id;
    const double r = std::min(cells_[parent].kin.radius, payload.radius);
    const double length = std::clamp(reach, settings_.mechanics.min_length_factor * r,
                                      length_cap(r, settings_.mechanics));
    cells_.push_back(std::move(child));
    ++counts_.births;
    record(EventKind::Birth, child_id, parent_id, "", cost);
    bond(parent_id, child_id, length);
}

void FieldWorld::phase_reads()
{
    const std::size_t n = cells_.size();
    const auto read_out = settings_.layout.shape.out_read();
    for (std::size_t i = 0; i < n; ++i) {
        if (!(cells_[i].outputs[read_out] > 0.0))
            continue;
        auto outcome = read_step(cells_[i].genome, settings_.layout);
        if (!outcome)
            continue;
        record(EventKind::Read, cells_[i].id, 0, std::string(to_string(outcome->action)));
        switch (outcome->action) {
        case ActionKind::Expansion:
            expand(i, *outcome->payload);
            break;
        case ActionKind::Connection:
            cells_[i].wait_connect = true;
            break;
        case ActionKind::Disconnection:
            cells_[i].wait_disconnect = true;
            break;
        case ActionKind::Transition:
            break;
        }
        cells_[i].genome.bookmarker = std::move(outcome->next_bookmarker);
        cells_[i].genome.advance = std::move(outcome->next_advance);
    }
}

void FieldWorld::phase_waits()
{
    const auto& mp = settings_.mechanics;

    // Connection: greedy over candidate pairs ordered by (distance, ids).
    std::vector<std::size_t> waiting;
    for (std::size_t i = 0; i < cells_.size(); ++i)
        if (cells_[i].wait_connect && cells_[i].free_slot())
            waiting.push_back(i);
    struct Candidate
    {
        double dist;
        std::size_t a, b;
    };
    std::vector<Candidate> candidates;
    for (std::size_t x = 0; x < waiting.size(); ++x)
        for (std::size_t y = x + 1; y < waiting.size(); ++y) {
            const auto& a = cells_[waiting[x]];
            const auto& b = cells_[waiting[y]];
            const double d = distance(a.kin.position, b.kin.position);
            if (d > mp.connect_factor * std::min(a.kin.radius, b.kin.radius))
                continue;
            const bool already = std::any_of(a.slots.begin(), a.slots.end(),
                                             [&](const Slot& s) { return s.used && s.partner == b.id; });
            if (!already)
                candidates.push_back({d, waiting[x], waiting[y]});
        }
    std::sort(candidates.begin(), candidates.end(), [this](const Candidate& l, const Candidate& r) {
        if (l.dist != r.dist)
            return l.dist < r.dist;
        if (cells_[l.a].id != cells_[r.a].id)
            return cells_[l.a].id < cells_[r.a].id;
        return cells_[l.b].id < cells_[r.b].id;
    });
    for (const auto& cand : candidates) {
        auto& a = cells_[cand.a];
        auto& b = cells_[cand.b];
        const auto length = try_connect(ConnectSide{a.kin.position, a.kin.radius, a.wait_connect, a.free_slot().has_value()},
                                        ConnectSide{b.kin.position, b.kin.radius, b.wait_connect, b.free_slot().has_value()},
                                        mp);
        if (!length)
            continue;
        if (bond(a.id, b.id, *length)) {
            a.wait_connect = false;
            b.wait_connect = false;
        }
    }

    // Disconnection: a bond goes when both of its ends wait for it.
    for (auto& c : cells_) {
        if (!c.wait_disconnect)
            continue;
        for (std::size_t k = 0; k < c.slots.size(); ++k) {
            const auto& s = c.slots[k];
            if (!s.used)
                continue;
            auto* p = find(s.partner);
            if (p && p->wait_disconnect) {
                p->wait_disconnect = false;
                c.wait_disconnect = false;
                unbond(c.id, k, "disconnect");
                break;
            }
        }
    }
}

void FieldWorld::phase_mechanics()
{
    const std::size_t n = cells_.size();
    if (n == 0)
        return;
    std::vector<Kinematics> kin(n);
    for (std::size_t i = 0; i < n; ++i)
        kin[i] = cells_[i].kin;
    build_partner_table();
    const std::size_t n_slots = settings_.layout.shape.n_slots;
    std::vector<SpringLink> links;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < cells_[i].slots.size(); ++k) {
            const auto& s = cells_[i].slots[k];
            const auto j = partners_[i * n_slots + k];
            if (j != npos && s.partner > cells_[i].id)
                links.push_back(SpringLink{i, j, s.natural_length});
        }
    try {
        integrate_step(kin, links, terrain_, settings_.mechanics, settings_.dt);
    } catch (const NumericBlowupError& e) {
        throw NumericBlowupError(std::string(e.what()) + " at step " + std::to_string(step_),
                                 static_cast<long long>(step_));
    }
    for (std::size_t i = 0; i < n; ++i) {
        cells_[i].kin = kin[i];
        if (cells_[i].pinned) {
            cells_[i].kin.position = cells_[i].pinned_position;
            cells_[i].kin.velocity = {};
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < cells_[i].slots.size(); ++k) {
            const auto& s = cells_[i].slots[k];
            if (!s.used || s.partner < cells_[i].id)
                continue;
            const auto j = partners_[i * n_slots + k];
            const auto* p = j == npos ? nullptr : &cells_[j];
            if (p && check_break(s.natural_length, distance(cells_[i].kin.position, p->kin.position),
                                 settings_.mechanics))
                unbond(cells_[i].id, k, "stretch");
        }
}

void FieldWorld::phase_decay()
{
    const std::size_t n = cells_.size();
    if (eaten_by_.size() != n)
        eaten_by_.resize(n, 0);
    std::vector<std::pair<CellId, bool>> dead;
    for (std::size_t i = 0; i < n; ++i) {
        auto& c = cells_[i];
        const double u = decay_rate(energy_, std::min(c.connections(), energy_.max_connections));
        c.energy = step_decay(c.energy, u, settings_.dt);
        if (c.pinned)
            c.energy = c.pinned_energy;
        if (!std::isfinite(c.energy))
            throw NumericBlowupError("non-finite energy for cell " + std::to_string(c.id) + " at step " +
                                         std::to_string(step_),
                                     static_cast<long long>(step_));
        if (c.energy < energy_.death_threshold)
            dead.emplace_back(c.id, i < eaten_by_.size() && eaten_by_[i] != 0);
    }
    if (dead.empty())
        return;
    for (const auto& [id, eaten] : dead) {
        auto* c = find(id);
        for (std::size_t k = 0; k < c->slots.size(); ++k)
            if (c->slots[k].used)
                unbond(id, k, "death");
        record(EventKind::Death, id, 0, eaten ? "eaten" : "starved", c->energy);
        ++counts_.deaths;
    }
    for (const auto& [id, eaten] : dead)
        find(id)->id = 0;
    std::erase_if(cells_, [](const Cell& c) { return c.id == 0; });
}

bool mutate_book(std::string& book, RngStream& rng, std::size_t book_max)
{
    if (book.empty())
        return false;
    const auto op = rng.below(3);
    const auto len = book.size();
    if (op == 0) {
        const auto pos = rng.below(len);
        const int old = Alphabet64::index(book[pos]);
        book[pos] = Alphabet64::symbol(static_cast<int>((old + 1 + rng.below(63)) % 64));
    } else if (op == 1) {
        const auto pos = rng.below(len + 1);
        const char sym = Alphabet64::symbol(static_cast<int>(rng.below(64)));
        book.insert(book.begin() + static_cast<std::ptrdiff_t>(pos), sym);
        if (book.size() > book_max)
            book.resize(book_max);
    } else {
        const auto pos = rng.below(len);
        book.erase(book.begin() + static_cast<std::ptrdiff_t>(pos));
    }
    return true;
}

std::string mutate_division(std::string book, double beta, RngStream& rng, std::size_t book_max)
{
    if (rng.bernoulli(beta))
        mutate_book(book, rng, book_max);
    return book;
}

bool FieldWorld::mutate_cell(Cell& c)
{
    const bool marker = rng_.below(2) == 1 && !c.genome.bookmarker.empty();
    if (marker) {
        auto& bm = c.genome.bookmarker;
        const auto pos = rng_.below(bm.size());
        const int old = Alphabet64::index(bm[pos]);
        bm[pos] = Alphabet64::symbol(static_cast<int>((old + 1 + rng_.below(63)) % 64));
        return true;
    }
    return mutate_book(c.genome.book, rng_, settings_.book_max);
}

void FieldWorld::phase_mutation()
{
    if (!(rates_.alpha > 0.0))
        return;
    for (auto& c : cells_)
        if (rng_.bernoulli(rates_.alpha) && mutate_cell(c))
            ++counts_.mutations;
}

double adjust_decay_base(double a, std::size_t n_cells, std::size_t n_previous, const PopulationControl& pc) noexcept
{
    const double n = static_cast<double>(std::max<std::size_t>(n_cells, 1));
    double factor = std::pow(pc.target / n, pc.gain);
    if (n_previous > 0)
        factor *= std::pow(static_cast<double>(n_previous) / n, pc.damping);
    return std::clamp(a * factor, pc.a_min, pc.a_max);
}

void FieldWorld::phase_adjust_decay_base()
{
    const auto& pc = settings_.population;
    if (!pc.adaptive)
        return;
    count_sum_ += cells_.size();
    if (step_ % pc.interval != 0)
        return;
    const auto mean = static_cast<std::size_t>(
        std::llround(static_cast<double>(count_sum_) / static_cast<double>(pc.interval)));
    count_sum_ = 0;
    energy_.decay_base = adjust_decay_base(energy_.decay_base, mean, last_count_, pc);
    last_count_ = mean;
}

} // namespace bookcell
