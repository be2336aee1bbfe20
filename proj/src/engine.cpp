#include "bookcell/engine.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <exception>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <thread>

#include <zlib.h>

#include "bookcell/assembler.hpp"
#include "bookcell/errors.hpp"

namespace bookcell {

std::string metrics_header()
{
    return "# bookcell metrics v1\nstep,cells,connections,transport_events,births,deaths,mutations,A\n";
}

std::string format_metrics_row(const MetricsRow& r)
{
    std::ostringstream os;
    os.precision(17);
    os << r.step << ',' << r.cells << ',' << r.connections << ',' << r.transport_events << ',' << r.births << ','
       << r.deaths << ',' << r.mutations << ',' << r.A << '\n';
    return os.str();
}

std::vector<Event> trace_events(std::span<const Event> events, const TraceFilter& filter)
{
    std::vector<Event> out;
    for (const auto& e : events) {
        if (!filter.kinds.empty() && std::find(filter.kinds.begin(), filter.kinds.end(), e.kind) == filter.kinds.end())
            continue;
        if (filter.cell && e.cell != *filter.cell && e.other != *filter.cell)
            continue;
        out.push_back(e);
    }
    return out;
}

std::string format_event(const Event& e)
{
    std::ostringstream os;
    os.precision(17);
    os << e.step << ' ' << to_string(e.kind) << ' ' << e.cell << ' ' << e.other << ' '
       << (e.detail.empty() ? "-" : e.detail) << ' ' << e.amount;
    return os.str();
}

FieldHeightmap make_terrain(const SimConfig& c)
{
    if (!c.terrain.heightmap_file.empty()) {
        std::ifstream in(c.terrain.heightmap_file);
        if (!in)
            throw ConfigError("cannot read heightmap '" + c.terrain.heightmap_file + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return FieldHeightmap::parse(ss.str());
    }
    if (c.terrain.flat)
        return FieldHeightmap::flat();
    return FieldHeightmap::undulating(RngStream(c.seed).split("terrain").key(), c.terrain.amplitude);
}

namespace {

constexpr double kPlacementMargin = 2.0;

Sun make_sun(const SunConfig& s)
{
    Sun sun;
    sun.position = s.start;
    sun.speed = s.speed;
    sun.height = s.height;
    sun.y = s.y;
    sun.emission = s.emission;
    sun.radius = s.radius;
    sun.intensity = s.intensity;
    sun.enabled = s.enabled;
    return sun;
}

double random_coordinate(RngStream& rng, double extent)
{
    const double lo = std::min(kPlacementMargin, extent / 2);
    return lo + (extent - 2 * lo) * rng.uniform();
}

} // namespace

void migrate_mix(std::vector<FieldWorld>& fields, RngStream& rng)
{
    if (fields.empty())
        return;
    std::vector<std::vector<Cell>> organisms;
    for (auto& f : fields) {
        for (const auto& comp : f.components()) {
            std::vector<Cell> org;
            org.reserve(comp.size());
            for (const CellId id : comp)
                org.push_back(*f.find(id));
            organisms.push_back(std::move(org));
        }
        f.cells_mut().clear();
    }
    for (std::size_t i = organisms.size(); i > 1; --i)
        std::swap(organisms[i - 1], organisms[rng.below(i)]);

    for (std::size_t k = 0; k < organisms.size(); ++k) {
        auto& dest = fields[k % fields.size()];
        auto& org = organisms[k];
        const double extent = dest.settings().mechanics.extent;
        const double x = random_coordinate(rng, extent);
        const double y = random_coordinate(rng, extent);

        double cx = 0.0, cy = 0.0;
        for (const auto& c : org) {
            cx += c.kin.position.x;
            cy += c.kin.position.y;
        }
        cx /= static_cast<double>(org.size());
        cy /= static_cast<double>(org.size());

        std::map<CellId, CellId> ids;
        CellId next = dest.next_id();
        for (const auto& c : org)
            ids[c.id] = next++;

        double lift = -std::numeric_limits<double>::infinity();
        for (auto& c : org) {
            c.kin.position.x = std::clamp(c.kin.position.x + x - cx, 0.0, extent);
            c.kin.position.y = std::clamp(c.kin.position.y + y - cy, 0.0, extent);
            lift = std::max(lift, dest.terrain().height(c.kin.position.x, c.kin.position.y) + c.kin.radius -
                                      c.kin.position.z);
        }
        for (auto& c : org) {
            c.kin.position.z += lift;
            c.kin.velocity = {};
            c.emitting = false;
            c.id = ids.at(c.id);
            for (auto& s : c.slots)
                if (s.used)
                    s.partner = ids.at(s.partner);
            dest.insert_cell(std::move(c));
        }
    }
}

Simulation::Simulation(SimConfig config, Empty) : config_(std::move(config))
{
    config_.validate();
    parallel_ = config_.parallel;
    migration_ = RngStream(config_.seed).split("migration");
    window_.assign(config_.fields.size(), StepCounts{});
}

Simulation::Simulation(SimConfig config) : Simulation(std::move(config), Empty{})
{
    const auto settings = FieldSettings::from(config_);
    const auto terrain = make_terrain(config_);
    const RngStream root(config_.seed);

    std::vector<GenomeFile> genomes;
    for (const auto& spec : config_.seeds) {
        auto g = load_genome_file(spec.genome_file);
        if (!g.phenotype)
            throw ConfigError("seed genome '" + spec.genome_file + "' has no phenotype line");
        genomes.push_back(std::move(g));
    }

    for (std::size_t f = 0; f < config_.fields.size(); ++f) {
        fields_.emplace_back(settings, config_.energy, MutationRates{config_.fields[f].alpha, config_.fields[f].beta},
                             terrain, make_sun(config_.sun), root.split("field").split(f));
        auto& world = fields_.back();
        world.set_tracing(config_.trace);
        RngStream place = root.split("seeding").split(f);
        for (std::size_t g = 0; g < config_.seeds.size(); ++g) {
            const auto& spec = config_.seeds[g];
            if (spec.field >= 0 && static_cast<std::size_t>(spec.field) != f)
                continue;
            const auto phenotype = decode_phenotype(*genomes[g].phenotype, settings.layout);
            const auto lineage = spec.lineage >= 0 ? static_cast<std::uint64_t>(spec.lineage) : g;
            for (std::size_t i = 0; i < spec.count; ++i) {
                double x, y;
                if (spec.position) {
                    x = (*spec.position)[0];
                    y = (*spec.position)[1];
                } else {
                    x = random_coordinate(place, settings.mechanics.extent);
                    y = random_coordinate(place, settings.mechanics.extent);
                }
                world.add_cell(genomes[g].genome, phenotype, x, y, spec.energy, lineage);
            }
        }
    }
}

void Simulation::advance_fields(std::uint64_t steps)
{
    auto work = [this, steps](std::size_t f) {
        auto& world = fields_[f];
        auto& w = window_[f];
        for (std::uint64_t i = 0; i < steps; ++i) {
            world.step();
            const auto& c = world.last_counts();
            w.births += c.births;
            w.deaths += c.deaths;
            w.transport_events += c.transport_events;
            w.mutations += c.mutations;
        }
    };
    if (!parallel_ || fields_.size() < 2) {
        for (std::size_t f = 0; f < fields_.size(); ++f)
            work(f);
        return;
    }
    std::vector<std::exception_ptr> errors(fields_.size());
    std::vector<std::thread> threads;
    threads.reserve(fields_.size());
    for (std::size_t f = 0; f < fields_.size(); ++f)
        threads.emplace_back([&, f] {
            try {
                work(f);
            } catch (...) {
                errors[f] = std::current_exception();
            }
        });
    for (auto& t : threads)
        t.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

MetricsRow Simulation::sample(std::size_t f) const
{
    const auto& world = fields_[f];
    const auto& w = window_[f];
    MetricsRow r;
    r.step = step_;
    r.cells = world.cells().size();
    r.connections = world.bond_count();
    r.transport_events = w.transport_events;
    r.births = w.births;
    r.deaths = w.deaths;
    r.mutations = w.mutations;
    r.A = world.energy().decay_base;
    return r;
}

void Simulation::run(std::uint64_t steps, const MetricsSink& sink)
{
    const std::uint64_t end = step_ + steps;
    const std::uint64_t mi = config_.metrics_interval;
    const std::uint64_t ep = config_.epoch_length;
    while (step_ < end) {
        std::uint64_t chunk = end - step_;
        if (mi > 0)
            chunk = std::min(chunk, mi - step_ % mi);
        if (fields_.size() > 1 && ep > 0)
            chunk = std::min(chunk, ep - step_ % ep);
        advance_fields(chunk);
        step_ += chunk;
        if (fields_.size() > 1 && ep > 0 && step_ % ep == 0)
            migrate_mix(fields_, migration_);
        if (mi > 0 && step_ % mi == 0) {
            for (std::size_t f = 0; f < fields_.size(); ++f) {
                if (sink)
                    sink(f, sample(f));
                window_[f] = StepCounts{};
            }
        }
    }
}

std::vector<std::vector<Event>> Simulation::drain_events()
{
    std::vector<std::vector<Event>> out;
    for (auto& f : fields_) {
        out.push_back(f.events());
        f.clear_events();
    }
    return out;
}

namespace {

std::string canonical_yaml(const SimConfig& c)
{
    SimConfig copy = c;
    copy.parallel = false;
    return to_yaml(copy);
}

} // namespace

std::uint64_t config_hash(const SimConfig& config)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char ch : canonical_yaml(config)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// ---------------------------------------------------------------- snapshot

namespace {

constexpr char kMagic[4] = {'B', 'K', 'C', 'L'};
constexpr std::uint32_t kVersion = 1;

constexpr std::uint32_t tag(const char (&s)[5])
{
    return static_cast<std::uint32_t>(static_cast<unsigned char>(s[0])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(s[1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(s[2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(s[3])) << 24;
}

class Writer
{
  public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i)
            buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i)
            buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(std::string_view s)
    {
        u64(s.size());
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
    void record(std::uint32_t t, const Writer& body)
    {
        u32(t);
        u64(body.buf_.size());
        bytes(body.buf_);
    }
    std::vector<std::uint8_t>& data() { return buf_; }

  private:
    std::vector<std::uint8_t> buf_;
};

class Reader
{
  public:
    Reader(std::span<const std::uint8_t> data, std::size_t base) : data_(data), base_(base) {}

    std::uint8_t u8() { return need(1)[0]; }
    std::uint32_t u32()
    {
        const auto* p = need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64()
    {
        const auto* p = need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str()
    {
        const auto n = u64();
        if (n > remaining())
            fail("string length exceeds record");
        const auto* p = need(static_cast<std::size_t>(n));
        return std::string(reinterpret_cast<const char*>(p), static_cast<std::size_t>(n));
    }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    std::size_t offset() const noexcept { return base_ + pos_; }
    Reader sub(std::size_t n)
    {
        const std::size_t at = pos_;
        need(n);
        return Reader(data_.subspan(at, n), base_ + at);
    }
    [[noreturn]] void fail(const std::string& what) const
    {
        throw SnapshotError("snapshot: " + what + " at byte offset " + std::to_string(offset()));
    }
    void expect_end() const
    {
        if (remaining() != 0)
            fail("trailing bytes in record");
    }

  private:
    const std::uint8_t* need(std::size_t n)
    {
        if (n > remaining())
            fail("truncated record");
        const auto* p = data_.data() + pos_;
        pos_ += n;
        return p;
    }

    std::span<const std::uint8_t> data_;
    std::size_t base_ = 0;
    std::size_t pos_ = 0;
};

void write_vec3(Writer& w, const Vec3& v)
{
    w.f64(v.x);
    w.f64(v.y);
    w.f64(v.z);
}

Vec3 read_vec3(Reader& r)
{
    Vec3 v;
    v.x = r.f64();
    v.y = r.f64();
    v.z = r.f64();
    return v;
}

void write_cell(Writer& w, const Cell& c)
{
    w.u64(c.id);
    w.u64(c.lineage);
    write_vec3(w, c.kin.position);
    write_vec3(w, c.kin.velocity);
    w.f64(c.kin.mass);
    w.f64(c.kin.radius);
    for (double a : c.absorption)
        w.f64(a);
    w.f64(c.luminosity);
    w.f64(c.energy);
    w.str(c.genome.book);
    w.str(c.genome.bookmarker);
    w.str(c.genome.advance);
    const auto weights = c.net.weights();
    w.u64(weights.size());
    for (double x : weights)
        w.f64(x);
    w.u64(c.slots.size());
    for (const auto& s : c.slots) {
        w.u8(s.used ? 1 : 0);
        w.u64(s.partner);
        w.u8(s.partner_slot);
        w.f64(s.natural_length);
        w.f64(s.coupling);
    }
    w.u64(c.outputs.size());
    for (double x : c.outputs)
        w.f64(x);
    w.u8(static_cast<std::uint8_t>((c.wait_connect ? 1 : 0) | (c.wait_disconnect ? 2 : 0) | (c.emitting ? 4 : 0) |
                                   (c.pinned ? 8 : 0)));
    w.f64(c.pinned_energy);
    write_vec3(w, c.pinned_position);
    w.u64(c.born_step);
}

Cell read_cell(Reader& r, const NetShape& shape)
{
    Cell c;
    c.id = r.u64();
    c.lineage = r.u64();
    c.kin.position = read_vec3(r);
    c.kin.velocity = read_vec3(r);
    c.kin.mass = r.f64();
    c.kin.radius = r.f64();
    for (double& a : c.absorption)
        a = r.f64();
    c.luminosity = r.f64();
    c.energy = r.f64();
    c.genome.book = r.str();
    c.genome.bookmarker = r.str();
    c.genome.advance = r.str();
    const auto nw = r.u64();
    if (nw != shape.weight_count())
        r.fail("weight count does not match network shape");
    std::vector<double> weights(nw);
    for (double& x : weights)
        x = r.f64();
    c.net = NeuralNet(shape, std::move(weights));
    const auto ns = r.u64();
    if (ns != shape.n_slots)
        r.fail("slot count does not match network shape");
    c.slots.resize(ns);
    for (auto& s : c.slots) {
        s.used = r.u8() != 0;
        s.partner = r.u64();
        s.partner_slot = r.u8();
        s.natural_length = r.f64();
        s.coupling = r.f64();
    }
    const auto no = r.u64();
    if (no != shape.n_out())
        r.fail("output count does not match network shape");
    c.outputs.resize(no);
    for (double& x : c.outputs)
        x = r.f64();
    const auto flags = r.u8();
    c.wait_connect = flags & 1;
    c.wait_disconnect = flags & 2;
    c.emitting = flags & 4;
    c.pinned = flags & 8;
    c.pinned_energy = r.f64();
    c.pinned_position = read_vec3(r);
    c.born_step = r.u64();
    return c;
}

void write_counts(Writer& w, const StepCounts& c)
{
    w.u64(c.births);
    w.u64(c.deaths);
    w.u64(c.transport_events);
    w.u64(c.mutations);
}

StepCounts read_counts(Reader& r)
{
    StepCounts c;
    c.births = r.u64();
    c.deaths = r.u64();
    c.transport_events = r.u64();
    c.mutations = r.u64();
    return c;
}

std::uint32_t crc_of(std::span<const std::uint8_t> data)
{
    uLong crc = crc32(0L, Z_NULL, 0);
    std::size_t pos = 0;
    while (pos < data.size()) {
        const auto n = static_cast<uInt>(std::min<std::size_t>(data.size() - pos, 1u << 30));
        crc = crc32(crc, data.data() + pos, n);
        pos += n;
    }
    return static_cast<std::uint32_t>(crc);
}

} // namespace

std::vector<std::uint8_t> Simulation::snapshot() const
{
    Writer out;
    for (char ch : kMagic)
        out.u8(static_cast<std::uint8_t>(ch));
    out.u32(kVersion);

    {
        Writer body;
        const auto yaml = canonical_yaml(config_);
        body.u64(config_hash(config_));
        body.str(yaml);
        out.record(tag("CONF"), body);
    }
    {
        Writer body;
        body.u64(step_);
        body.u64(migration_.key());
        body.u64(migration_.counter());
        body.u64(fields_.size());
        out.record(tag("HEAD"), body);
    }
    for (std::size_t f = 0; f < fields_.size(); ++f) {
        const auto& world = fields_[f];
        Writer body;
        body.u64(f);
        body.u64(world.step_count());
        body.u64(world.next_id());
        body.f64(world.energy().decay_base);
        body.u64(world.last_count());
        body.u64(world.count_sum());
        body.u64(world.rng().key());
        body.u64(world.rng().counter());
        const auto& sun = world.sun();
        body.f64(sun.position);
        body.f64(sun.direction);
        write_counts(body, window_[f]);
        for (double h : world.terrain().heights())
            body.f64(h);
        body.u64(world.cells().size());
        for (const auto& c : world.cells())
            write_cell(body, c);
        out.record(tag("FELD"), body);
    }
    auto& bytes = out.data();
    const auto crc = crc_of(bytes);
    for (int i = 0; i < 4; ++i)
        bytes.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
    return std::move(bytes);
}

Simulation Simulation::restore(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 12)
        throw SnapshotError("snapshot: file too short at byte offset 0");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw SnapshotError("snapshot: bad magic at byte offset 0");
    const auto body = bytes.first(bytes.size() - 4);
    Reader r(body, 0);
    r.u32();
    const auto version = r.u32();
    if (version != kVersion)
        throw SnapshotError("snapshot: unsupported version " + std::to_string(version) + " (expected " +
                            std::to_string(kVersion) + ") at byte offset 4");

    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i)
        stored |= static_cast<std::uint32_t>(bytes[bytes.size() - 4 + i]) << (8 * i);
    if (crc_of(body) != stored)
        throw SnapshotError("snapshot: checksum mismatch at byte offset " + std::to_string(bytes.size() - 4));

    auto next_record = [&r](std::uint32_t expected, const char* name) {
        if (r.remaining() == 0)
            r.fail(std::string("missing ") + name + " record");
        const auto t = r.u32();
        if (t != expected)
            r.fail(std::string("expected ") + name + " record");
        const auto n = r.u64();
        if (n > r.remaining())
            r.fail(std::string("record ") + name + " overruns file");
        return r.sub(static_cast<std::size_t>(n));
    };

    auto conf = next_record(tag("CONF"), "CONF");
    const auto hash = conf.u64();
    const auto yaml = conf.str();
    conf.expect_end();
    SimConfig config;
    try {
        config = parse_config(yaml);
    } catch (const ConfigError& e) {
        conf.fail(std::string("embedded config invalid: ") + e.what());
    }
    if (config_hash(config) != hash)
        conf.fail("config hash mismatch");

    Simulation sim(config, Empty{});
    auto head = next_record(tag("HEAD"), "HEAD");
    sim.step_ = head.u64();
    const auto mk = head.u64();
    const auto mc = head.u64();
    sim.migration_ = RngStream(mk, mc);
    const auto nf = head.u64();
    head.expect_end();
    if (nf != config.fields.size())
        head.fail("field count does not match config");

    const auto settings = FieldSettings::from(config);
    for (std::size_t f = 0; f < nf; ++f) {
        auto rec = next_record(tag("FELD"), "FELD");
        if (rec.u64() != f)
            rec.fail("field records out of order");
        const auto step = rec.u64();
        const auto next_id = rec.u64();
        auto energy = config.energy;
        energy.decay_base = rec.f64();
        const auto last_count = rec.u64();
        const auto count_sum = rec.u64();
        const auto rk = rec.u64();
        const auto rc = rec.u64();
        Sun sun = make_sun(config.sun);
        sun.position = rec.f64();
        sun.direction = rec.f64();
        sim.window_[f] = read_counts(rec);
        std::vector<double> heights(FieldHeightmap::side * FieldHeightmap::side);
        for (double& h : heights)
            h = rec.f64();
        FieldWorld world(settings, energy, MutationRates{config.fields[f].alpha, config.fields[f].beta},
                         FieldHeightmap(std::move(heights)), sun, RngStream(rk, rc));
        world.set_tracing(config.trace);
        const auto nc = rec.u64();
        for (std::uint64_t i = 0; i < nc; ++i) {
            try {
                world.insert_cell(read_cell(rec, settings.layout.shape));
            } catch (const SnapshotError&) {
                throw;
            } catch (const Error& e) {
                rec.fail(e.what());
            }
        }
        rec.expect_end();
        world.set_step_count(step);
        world.set_next_id(next_id);
        world.set_last_count(static_cast<std::size_t>(last_count));
        world.set_count_sum(count_sum);
        sim.fields_.push_back(std::move(world));
    }
    if (r.remaining() != 0)
        r.fail("unexpected trailing record");
    return sim;
}

void write_snapshot_file(const std::string& path, const Simulation& sim)
{
    const auto bytes = sim.snapshot();
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw SnapshotError("cannot write snapshot '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw SnapshotError("cannot write snapshot '" + path + "'");
}

Simulation read_snapshot_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw SnapshotError("cannot read snapshot '" + path + "'");
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return Simulation::restore(bytes);
}

} // namespace bookcell
