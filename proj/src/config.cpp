#include "bookcell/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "bookcell/errors.hpp"

namespace bookcell {

namespace {

std::string where(const YAML::Node& node, const std::string& key)
{
    const auto mark = node.Mark();
    std::string s = "config";
    if (mark.line >= 0)
        s += " line " + std::to_string(mark.line + 1);
    return s + ", key '" + key + "'";
}

/// Reads the keys of one mapping and rejects any it did not consume.
class Section
{
  public:
    Section(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path))
    {
        if (node_ && !node_.IsMap())
            throw ConfigError(where(node_, path_) + ": expected a mapping");
    }

    template <class T>
    void get(const char* key, T& out)
    {
        seen_.insert(key);
        if (!node_)
            return;
        const auto v = node_[key];
        if (!v)
            return;
        try {
            out = v.as<T>();
        } catch (const YAML::Exception&) {
            throw ConfigError(where(v, full(key)) + ": wrong value type");
        }
    }

    void get(const char* key, Rgb& out)
    {
        seen_.insert(key);
        if (!node_ || !node_[key])
            return;
        const auto v = node_[key];
        if (!v.IsSequence() || v.size() != 3)
            throw ConfigError(where(v, full(key)) + ": expected a list of three numbers");
        try {
            for (std::size_t i = 0; i < 3; ++i)
                out[i] = v[i].as<double>();
        } catch (const YAML::Exception&) {
            throw ConfigError(where(v, full(key)) + ": expected numbers");
        }
    }

    YAML::Node child(const char* key)
    {
        seen_.insert(key);
        return node_ ? node_[key] : YAML::Node();
    }

    std::string full(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const
    {
        if (!node_)
            return;
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!seen_.count(key))
                throw ConfigError(where(kv.first, full(key)) + ": unknown key");
        }
    }

  private:
    YAML::Node node_;
    std::string path_;
    std::set<std::string> seen_;
};

std::string resolve(const std::string& base, const std::string& p)
{
    if (p.empty())
        return p;
    const std::filesystem::path fp(p);
    if (fp.is_absolute())
        return p;
    return (std::filesystem::path(base) / fp).lexically_normal().string();
}

} // namespace

PayloadLayout SimConfig::layout() const
{
    PayloadLayout l;
    l.shape = net;
    l.mass_min = mass_min;
    l.mass_max = mass_max;
    l.radius_min = radius_min;
    l.radius_max = mechanics.max_radius;
    l.bookmarker_max = bookmarker_max;
    return l;
}

void SimConfig::validate() const
{
    auto need = [](bool ok, const std::string& msg) {
        if (!ok)
            throw ConfigError("config: " + msg);
    };
    need(dt > 0.0, "dt must be > 0");
    energy.validate();
    need(energy.max_connections == net.n_slots, "energy.max_connections must equal network.slots");
    need(energy.decay_coefficient * dt < 1.0, "energy.C * dt must stay below 1");
    need(net.n_slots > 0 && net.n_hidden > 0, "network.slots and network.hidden must be positive");
    need(advance_width >= 1 && advance_width <= 10, "genome.advance_width must lie in [1, 10]");
    need(bookmarker_max >= 1 && bookmarker_max <= 63, "genome.bookmarker_max must lie in [1, 63]");
    need(book_max >= 1, "genome.book_max must be positive");
    need(mass_min > 0.0 && mass_max >= mass_min, "genome.mass_min/mass_max must satisfy 0 < min <= max");
    need(radius_min > 0.0 && radius_min <= mechanics.max_radius, "genome.radius_min must lie in (0, max_radius]");
    need(mechanics.max_radius > 0.0 && mechanics.max_radius <= 0.16, "mechanics.max_radius must lie in (0, 0.16]");
    need(mechanics.substeps >= 1, "mechanics.substeps must be >= 1");
    need(mechanics.spring_stiffness >= 0.0 && mechanics.damping >= 0.0, "mechanics stiffness/damping must be >= 0");
    need(sun.height > 0.0 && sun.emission >= 0.0 && sun.radius > 0.0, "sun.height/radius must be > 0");
    need(sun.start >= 0.0 && sun.start <= mechanics.extent, "sun.start must lie on the field");
    need(!fields.empty(), "fields must list at least one field");
    for (const auto& f : fields)
        need(f.alpha >= 0.0 && f.alpha <= 1.0 && f.beta >= 0.0 && f.beta <= 1.0, "field rates must lie in [0, 1]");
    need(epoch_length >= 1, "epoch_length must be >= 1");
    need(population.target > 0.0 && population.interval >= 1 && population.gain >= 0.0 && population.damping >= 0.0,
         "population target/interval/gain invalid");
    need(population.a_min > 1.0 && population.a_max >= population.a_min, "population.a_min must be > 1 and <= a_max");
    need(metrics_interval >= 1, "metrics.interval must be >= 1");
    for (const auto& s : seeds) {
        need(!s.genome_file.empty(), "every seed needs a genome file");
        need(s.energy >= 0.0, "seed energy must be >= 0");
        need(s.field < static_cast<long>(fields.size()), "seed field index out of range");
    }
}

SimConfig parse_config(const std::string& text, const std::string& base_dir)
{
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError("config line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    SimConfig c;
    if (!root || root.IsNull()) {
        c.validate();
        return c;
    }

    Section top(root, "");
    top.get("seed", c.seed);
    top.get("dt", c.dt);
    top.get("epoch_length", c.epoch_length);
    top.get("parallel", c.parallel);

    {
        Section s(top.child("mechanics"), "mechanics");
        auto& m = c.mechanics;
        s.get("spring_stiffness", m.spring_stiffness);
        s.get("damping", m.damping);
        s.get("gravity", m.gravity);
        s.get("repulsion_stiffness", m.repulsion_stiffness);
        s.get("ground_friction", m.ground_friction);
        s.get("substeps", m.substeps);
        s.get("max_radius", m.max_radius);
        s.get("connect_factor", m.connect_factor);
        s.get("length_cap_factor", m.length_cap_factor);
        s.get("break_factor", m.break_factor);
        s.get("min_length_factor", m.min_length_factor);
        s.get("muscle_rate", m.muscle_rate);
        s.get("muscle_threshold", m.muscle_threshold);
        s.finish();
    }
    {
        Section s(top.child("energy"), "energy");
        auto& e = c.energy;
        s.get("C", e.decay_coefficient);
        s.get("A", e.decay_base);
        s.get("conversion", e.conversion);
        s.get("generation_factor", e.generation_factor);
        s.get("death_threshold", e.death_threshold);
        s.get("transfer_rate", e.transfer_rate);
        s.get("emission_cost", e.emission_cost);
        s.get("cell_emission", c.cell_emission);
        s.get("emitter_range", c.emitter_range);
        s.finish();
    }
    {
        Section s(top.child("network"), "network");
        s.get("hidden", c.net.n_hidden);
        s.get("slots", c.net.n_slots);
        s.get("delta_s", c.delta_s);
        s.get("coupling_initial", c.coupling_initial);
        s.finish();
        c.energy.max_connections = c.net.n_slots;
    }
    {
        Section s(top.child("genome"), "genome");
        s.get("advance_width", c.advance_width);
        s.get("bookmarker_max", c.bookmarker_max);
        s.get("book_max", c.book_max);
        s.get("mass_min", c.mass_min);
        s.get("mass_max", c.mass_max);
        s.get("radius_min", c.radius_min);
        s.finish();
    }
    {
        Section s(top.child("sun"), "sun");
        auto& u = c.sun;
        s.get("enabled", u.enabled);
        s.get("height", u.height);
        s.get("y", u.y);
        s.get("start", u.start);
        s.get("speed", u.speed);
        s.get("emission", u.emission);
        s.get("radius", u.radius);
        s.get("intensity", u.intensity);
        s.finish();
    }
    {
        Section s(top.child("terrain"), "terrain");
        s.get("flat", c.terrain.flat);
        s.get("amplitude", c.terrain.amplitude);
        s.get("heightmap_file", c.terrain.heightmap_file);
        s.finish();
        c.terrain.heightmap_file = resolve(base_dir, c.terrain.heightmap_file);
    }
    {
        Section s(top.child("population"), "population");
        auto& p = c.population;
        s.get("adaptive", p.adaptive);
        s.get("target", p.target);
        s.get("interval", p.interval);
        s.get("gain", p.gain);
        s.get("damping", p.damping);
        s.get("a_min", p.a_min);
        s.get("a_max", p.a_max);
        s.finish();
    }
    {
        Section s(top.child("metrics"), "metrics");
        s.get("interval", c.metrics_interval);
        s.get("snapshot_interval", c.snapshot_interval);
        s.get("trace", c.trace);
        s.finish();
    }
    if (const auto fields = top.child("fields")) {
        if (!fields.IsSequence())
            throw ConfigError(where(fields, "fields") + ": expected a list");
        c.fields.clear();
        for (std::size_t i = 0; i < fields.size(); ++i) {
            Section s(fields[i], "fields[" + std::to_string(i) + "]");
            FieldRates r;
            s.get("alpha", r.alpha);
            s.get("beta", r.beta);
            s.finish();
            c.fields.push_back(r);
        }
    }
    if (const auto seeds = top.child("seeds")) {
        if (!seeds.IsSequence())
            throw ConfigError(where(seeds, "seeds") + ": expected a list");
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            Section s(seeds[i], "seeds[" + std::to_string(i) + "]");
            SeedSpec sp;
            s.get("genome", sp.genome_file);
            s.get("count", sp.count);
            s.get("energy", sp.energy);
            s.get("lineage", sp.lineage);
            s.get("field", sp.field);
            std::vector<double> pos;
            s.get("position", pos);
            if (!pos.empty()) {
                if (pos.size() != 2)
                    throw ConfigError(where(seeds[i], s.full("position")) + ": expected [x, y]");
                sp.position = std::array<double, 2>{pos[0], pos[1]};
            }
            s.finish();
            sp.genome_file = resolve(base_dir, sp.genome_file);
            c.seeds.push_back(std::move(sp));
        }
    }
    top.finish();
    c.validate();
    return c;
}

SimConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    const auto dir = std::filesystem::path(path).parent_path().string();
    return parse_config(ss.str(), dir.empty() ? "." : dir);
}

std::string to_yaml(const SimConfig& c)
{
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    auto rgb = [&](const Rgb& v) {
        out << YAML::Flow << YAML::BeginSeq << v[0] << v[1] << v[2] << YAML::EndSeq;
    };
    out << YAML::BeginMap;
    out << YAML::Key << "seed" << YAML::Value << c.seed;
    out << YAML::Key << "dt" << YAML::Value << c.dt;
    out << YAML::Key << "epoch_length" << YAML::Value << c.epoch_length;
    out << YAML::Key << "parallel" << YAML::Value << c.parallel;

    const auto& m = c.mechanics;
    out << YAML::Key << "mechanics" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "spring_stiffness" << YAML::Value << m.spring_stiffness;
    out << YAML::Key << "damping" << YAML::Value << m.damping;
    out << YAML::Key << "gravity" << YAML::Value << m.gravity;
    out << YAML::Key << "repulsion_stiffness" << YAML::Value << m.repulsion_stiffness;
    out << YAML::Key << "ground_friction" << YAML::Value << m.ground_friction;
    out << YAML::Key << "substeps" << YAML::Value << m.substeps;
    out << YAML::Key << "max_radius" << YAML::Value << m.max_radius;
    out << YAML::Key << "connect_factor" << YAML::Value << m.connect_factor;
    out << YAML::Key << "length_cap_factor" << YAML::Value << m.length_cap_factor;
    out << YAML::Key << "break_factor" << YAML::Value << m.break_factor;
    out << YAML::Key << "min_length_factor" << YAML::Value << m.min_length_factor;
    out << YAML::Key << "muscle_rate" << YAML::Value << m.muscle_rate;
    out << YAML::Key << "muscle_threshold" << YAML::Value << m.muscle_threshold;
    out << YAML::EndMap;

    const auto& e = c.energy;
    out << YAML::Key << "energy" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "C" << YAML::Value << e.decay_coefficient;
    out << YAML::Key << "A" << YAML::Value << e.decay_base;
    out << YAML::Key << "conversion" << YAML::Value;
    rgb(e.conversion);
    out << YAML::Key << "generation_factor" << YAML::Value << e.generation_factor;
    out << YAML::Key << "death_threshold" << YAML::Value << e.death_threshold;
    out << YAML::Key << "transfer_rate" << YAML::Value << e.transfer_rate;
    out << YAML::Key << "emission_cost" << YAML::Value << e.emission_cost;
    out << YAML::Key << "cell_emission" << YAML::Value << c.cell_emission;
    out << YAML::Key << "emitter_range" << YAML::Value << c.emitter_range;
    out << YAML::EndMap;

    out << YAML::Key << "network" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "hidden" << YAML::Value << c.net.n_hidden;
    out << YAML::Key << "slots" << YAML::Value << c.net.n_slots;
    out << YAML::Key << "delta_s" << YAML::Value << c.delta_s;
    out << YAML::Key << "coupling_initial" << YAML::Value << c.coupling_initial;
    out << YAML::EndMap;

    out << YAML::Key << "genome" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "advance_width" << YAML::Value << c.advance_width;
    out << YAML::Key << "bookmarker_max" << YAML::Value << c.bookmarker_max;
    out << YAML::Key << "book_max" << YAML::Value << c.book_max;
    out << YAML::Key << "mass_min" << YAML::Value << c.mass_min;
    out << YAML::Key << "mass_max" << YAML::Value << c.mass_max;
    out << YAML::Key << "radius_min" << YAML::Value << c.radius_min;
    out << YAML::EndMap;

    const auto& u = c.sun;
    out << YAML::Key << "sun" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "enabled" << YAML::Value << u.enabled;
    out << YAML::Key << "height" << YAML::Value << u.height;
    out << YAML::Key << "y" << YAML::Value << u.y;
    out << YAML::Key << "start" << YAML::Value << u.start;
    out << YAML::Key << "speed" << YAML::Value << u.speed;
    out << YAML::Key << "emission" << YAML::Value << u.emission;
    out << YAML::Key << "radius" << YAML::Value << u.radius;
    out << YAML::Key << "intensity" << YAML::Value;
    rgb(u.intensity);
    out << YAML::EndMap;

    out << YAML::Key << "terrain" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "flat" << YAML::Value << c.terrain.flat;
    out << YAML::Key << "amplitude" << YAML::Value << c.terrain.amplitude;
    out << YAML::Key << "heightmap_file" << YAML::Value << c.terrain.heightmap_file;
    out << YAML::EndMap;

    const auto& p = c.population;
    out << YAML::Key << "population" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "adaptive" << YAML::Value << p.adaptive;
    out << YAML::Key << "target" << YAML::Value << p.target;
    out << YAML::Key << "interval" << YAML::Value << p.interval;
    out << YAML::Key << "gain" << YAML::Value << p.gain;
    out << YAML::Key << "damping" << YAML::Value << p.damping;
    out << YAML::Key << "a_min" << YAML::Value << p.a_min;
    out << YAML::Key << "a_max" << YAML::Value << p.a_max;
    out << YAML::EndMap;

    out << YAML::Key << "metrics" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "interval" << YAML::Value << c.metrics_interval;
    out << YAML::Key << "snapshot_interval" << YAML::Value << c.snapshot_interval;
    out << YAML::Key << "trace" << YAML::Value << c.trace;
    out << YAML::EndMap;

    out << YAML::Key << "fields" << YAML::Value << YAML::BeginSeq;
    for (const auto& f : c.fields)
        out << YAML::Flow << YAML::BeginMap << YAML::Key << "alpha" << YAML::Value << f.alpha << YAML::Key << "beta"
            << YAML::Value << f.beta << YAML::EndMap;
    out << YAML::EndSeq;

    out << YAML::Key << "seeds" << YAML::Value << YAML::BeginSeq;
    for (const auto& s : c.seeds) {
        out << YAML::BeginMap;
        out << YAML::Key << "genome" << YAML::Value << s.genome_file;
        out << YAML::Key << "count" << YAML::Value << s.count;
        out << YAML::Key << "energy" << YAML::Value << s.energy;
        out << YAML::Key << "lineage" << YAML::Value << s.lineage;
        out << YAML::Key << "field" << YAML::Value << s.field;
        if (s.position)
            out << YAML::Key << "position" << YAML::Value << YAML::Flow << YAML::BeginSeq << (*s.position)[0]
                << (*s.position)[1] << YAML::EndSeq;
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

} // namespace bookcell
