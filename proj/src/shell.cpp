#include "bookcell/shell.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <yaml-cpp/yaml.h>

#include "bookcell/alphabet.hpp"
#include "bookcell/assembler.hpp"
#include "bookcell/energetics.hpp"
#include "bookcell/errors.hpp"

namespace fs = std::filesystem;

namespace bookcell {

namespace {

std::string read_text(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write '" + path + "'");
    out << text;
}

std::string metrics_path(const std::string& dir, std::size_t field, std::size_t n_fields)
{
    if (n_fields == 1)
        return (fs::path(dir) / "metrics.csv").string();
    return (fs::path(dir) / ("metrics_f" + std::to_string(field) + ".csv")).string();
}

} // namespace

// ---------------------------------------------------------------- run

int cmd_run(const RunOptions& o, std::ostream& out, std::ostream& err)
{
    std::optional<Simulation> sim;
    try {
        if (!o.resume.empty()) {
            sim.emplace(read_snapshot_file(o.resume));
        } else {
            if (o.config_path.empty())
                throw ConfigError("no config given (use --config or BOOKCELL_CONFIG)");
            if (!fs::exists(o.config_path))
                throw ConfigError("config file '" + o.config_path + "' not found");
            auto config = load_config(o.config_path);
            if (o.seed)
                config.seed = *o.seed;
            sim.emplace(std::move(config));
        }
    } catch (const SnapshotError& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::failure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::usage;
    }
    if (o.parallel)
        sim->set_parallel(*o.parallel);

    const auto& config = sim->config();
    const std::uint64_t steps = o.steps.value_or(10000);
    const std::size_t n_fields = sim->fields().size();
    try {
        fs::create_directories(o.out_dir);
        std::vector<std::ofstream> csv;
        for (std::size_t f = 0; f < n_fields; ++f) {
            const auto path = metrics_path(o.out_dir, f, n_fields);
            const bool fresh = o.resume.empty() || !fs::exists(path);
            csv.emplace_back(path, fresh ? std::ios::trunc : std::ios::app);
            if (!csv.back())
                throw std::runtime_error("cannot write '" + path + "'");
            if (fresh)
                csv.back() << metrics_header();
        }
        std::ofstream trace;
        if (config.trace)
            trace.open((fs::path(o.out_dir) / "trace.log").string(), o.resume.empty() ? std::ios::trunc : std::ios::app);

        const auto sink = [&](std::size_t f, const MetricsRow& row) {
            csv[f] << format_metrics_row(row);
            if (!o.quiet && f == 0)
                out << "step " << row.step << " cells " << row.cells << " A " << row.A << '\n';
        };
        const std::uint64_t end = sim->step_count() + steps;
        const std::uint64_t si = config.snapshot_interval;
        while (sim->step_count() < end) {
            std::uint64_t chunk = end - sim->step_count();
            if (si > 0)
                chunk = std::min(chunk, si - sim->step_count() % si);
            sim->run(chunk, sink);
            if (config.trace) {
                const auto events = sim->drain_events();
                for (std::size_t f = 0; f < events.size(); ++f)
                    for (const auto& e : events[f])
                        trace << f << ' ' << format_event(e) << '\n';
            }
            if (si > 0 && sim->step_count() % si == 0 && sim->step_count() < end)
                write_snapshot_file(
                    (fs::path(o.out_dir) / ("snapshot_" + std::to_string(sim->step_count()) + ".bkcl")).string(),
                    *sim);
        }
        write_snapshot_file((fs::path(o.out_dir) / "final.bkcl").string(), *sim);
    } catch (const NumericBlowupError& e) {
        err << "error: numeric blowup: " << e.what() << '\n';
        return exit_code::blowup;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::failure;
    }
    if (!o.quiet)
        out << "done: " << sim->step_count() << " steps, output in " << o.out_dir << '\n';
    return exit_code::ok;
}

// ---------------------------------------------------------------- appendix

std::vector<AppendixCheck> validate_appendix(const AppendixOptions& o)
{
    if (!(o.decay_u > 0.0) || !(o.fixed_u > 0.0) || !(o.mc_u > 0.0))
        throw std::invalid_argument("decay rate U must be positive (E-infinity is undefined for U = 0)");
    if (!(o.mc_p > 0.0) || o.mc_p > 1.0)
        throw std::invalid_argument("arrival probability p must be in (0, 1]");
    std::vector<AppendixCheck> checks;
    auto add = [&](std::string name, double measured, double expected, bool relative, double tol) {
        AppendixCheck c;
        c.name = std::move(name);
        c.measured = measured;
        c.expected = expected;
        c.error = std::abs(measured - expected) / (relative ? std::abs(expected) : 1.0);
        c.tolerance = tol;
        c.pass = c.error <= tol;
        checks.push_back(c);
    };

    {
        constexpr std::size_t n = 1000000;
        const double dt = o.decay_t / static_cast<double>(n);
        double e = o.decay_e0;
        for (std::size_t i = 0; i < n; ++i)
            e = step_decay(e, o.decay_u, dt);
        add("decay", e, o.decay_e0 * std::exp(-o.decay_u * o.decay_t), true, o.tol.decay);
    }
    {
        const double keep = std::exp(-o.fixed_u * o.fixed_t);
        double f = 0.0;
        for (std::size_t i = 0; i < o.fixed_iterations; ++i)
            f = keep * f + o.fixed_gain;
        add("fixed_point", f, e_infinity(o.fixed_gain, o.fixed_u, 1.0 / o.fixed_t, 1.0), false, o.tol.fixed_point);
    }
    {
        RngStream rng = RngStream(o.seed).split("appendix");
        double e = 0.0;
        double sum_after = 0.0;
        std::uint64_t steps = 0;
        std::uint64_t since = 0;
        std::uint64_t gaps = 0;
        std::size_t arrivals = 0;
        const std::size_t burn = o.mc_arrivals / 10;
        while (arrivals < o.mc_arrivals + burn) {
            ++steps;
            ++since;
            e = step_decay(e, o.mc_u, o.mc_dt);
            if (rng.bernoulli(o.mc_p)) {
                e += o.mc_gain;
                if (arrivals >= burn) {
                    sum_after += e;
                    gaps += since;
                }
                since = 0;
                ++arrivals;
            }
        }
        const double n = static_cast<double>(o.mc_arrivals);
        add("arrival_interval", static_cast<double>(gaps) / n, 1.0 / o.mc_p, true, o.tol.arrival);
        add("e_infinity", sum_after / n, e_infinity(o.mc_gain, o.mc_u, o.mc_p / o.mc_dt, 1.0), true, o.tol.e_infinity);
    }
    return checks;
}

int cmd_validate_appendix(const AppendixOptions& o, std::ostream& out, std::ostream& err)
{
    std::vector<AppendixCheck> checks;
    try {
        checks = validate_appendix(o);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::usage;
    }
    bool ok = true;
    out.precision(12);
    for (const auto& c : checks) {
        out << (c.pass ? "PASS " : "FAIL ") << c.name << " measured=" << c.measured << " expected=" << c.expected
            << " error=" << c.error << " tolerance=" << c.tolerance << '\n';
        ok = ok && c.pass;
    }
    if (!ok) {
        err << "failing checks:";
        for (const auto& c : checks)
            if (!c.pass)
                err << ' ' << c.name;
        err << '\n';
    }
    return ok ? exit_code::ok : exit_code::failure;
}

// ---------------------------------------------------------------- edit-genome

int cmd_edit_genome(const std::string& in_path, const std::string& find, const std::string& replace,
                    const std::string& out_path, std::ostream& out, std::ostream& err)
{
    if (find.size() != replace.size()) {
        err << "error: find and replace differ in length (" << find.size() << " vs " << replace.size() << ")\n";
        return exit_code::usage;
    }
    if (!Alphabet64::valid(find) || !Alphabet64::valid(replace)) {
        err << "error: find/replace contain a symbol outside the 64-symbol alphabet\n";
        return exit_code::usage;
    }
    GenomeFile g;
    try {
        g = load_genome_file(in_path);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::usage;
    }
    const auto at = find.empty() ? std::string::npos : g.genome.book.find(find);
    if (at == std::string::npos) {
        err << "error: '" << find << "' not found in the Book\n";
        return exit_code::failure;
    }
    g.genome.book.replace(at, replace.size(), replace);
    try {
        Alphabet64::require_valid(g.genome.book, "book");
        save_genome_file(out_path.empty() ? in_path : out_path, g);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::failure;
    }
    out << "replaced at offset " << at << '\n';
    return exit_code::ok;
}

// ---------------------------------------------------------------- experiments

namespace {

std::string resolve_path(const std::string& base, const std::string& p)
{
    if (p.empty() || fs::path(p).is_absolute())
        return p;
    return (fs::path(base) / p).lexically_normal().string();
}

template <class T>
void take(const YAML::Node& node, const char* key, T& into)
{
    if (const auto v = node[key])
        into = v.as<T>();
}

template <class T>
void take(const YAML::Node& node, const char* key, std::optional<T>& into)
{
    if (const auto v = node[key])
        into = v.as<T>();
}

} // namespace

ExperimentSpec parse_experiment(const std::string& text, const std::string& base_dir)
{
    ExperimentSpec s;
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError("experiment: " + std::string(e.what()));
    }
    if (!root.IsMap())
        throw ConfigError("experiment: top level must be a mapping");
    static const std::vector<std::string> known = {
        "kind",  "config", "genomes", "steps",           "sample_interval", "out",        "seed",
        "fixed_a", "delta_s", "sun", "flat", "feed_multiplier", "seed_energy", "seed_count", "organism_size"};
    for (const auto& kv : root) {
        const auto key = kv.first.as<std::string>();
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("experiment line " + std::to_string(kv.first.Mark().line + 1) + ", unknown key '" +
                              key + "'");
    }
    try {
        const auto kind = root["kind"] ? root["kind"].as<std::string>() : std::string("replicate");
        if (kind == "replicate")
            s.kind = ExperimentKind::Replicate;
        else if (kind == "compete")
            s.kind = ExperimentKind::Compete;
        else if (kind == "fixed-feed")
            s.kind = ExperimentKind::FixedFeed;
        else
            throw ConfigError("experiment: unknown kind '" + kind + "'");
        take(root, "config", s.config_path);
        s.config_path = resolve_path(base_dir, s.config_path);
        if (const auto g = root["genomes"])
            for (const auto& item : g)
                s.genomes.push_back(resolve_path(base_dir, item.as<std::string>()));
        take(root, "steps", s.steps);
        take(root, "sample_interval", s.sample_interval);
        take(root, "out", s.out_dir);
        s.out_dir = resolve_path(base_dir, s.out_dir);
        take(root, "seed", s.seed);
        take(root, "fixed_a", s.fixed_a);
        take(root, "delta_s", s.delta_s);
        take(root, "sun", s.sun);
        take(root, "flat", s.flat);
        take(root, "feed_multiplier", s.feed_multiplier);
        take(root, "seed_energy", s.seed_energy);
        take(root, "seed_count", s.seed_count);
        take(root, "organism_size", s.organism_size);
    } catch (const YAML::Exception& e) {
        throw ConfigError("experiment line " + std::to_string(e.mark.line + 1) + ": " + e.what());
    }

    if (s.sample_interval == 0)
        throw ConfigError("experiment: sample_interval must be positive");
    switch (s.kind) {
    case ExperimentKind::Compete:
        if (s.genomes.size() != 2)
            throw ConfigError("experiment: compete needs exactly two genomes");
        break;
    case ExperimentKind::FixedFeed:
        if (s.genomes.size() != 1)
            throw ConfigError("experiment: fixed-feed needs exactly one genome");
        if (s.sun.value_or(false))
            throw ConfigError("experiment: fixed-feed runs without the sun");
        if (!s.flat.value_or(true))
            throw ConfigError("experiment: fixed-feed runs on a flat field");
        if (!(s.feed_multiplier > 0.0))
            throw ConfigError("experiment: feed_multiplier must be positive");
        break;
    case ExperimentKind::Replicate:
        break;
    }
    return s;
}

ExperimentSpec load_experiment(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read experiment '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const auto dir = fs::path(path).parent_path().string();
    return parse_experiment(ss.str(), dir.empty() ? "." : dir);
}

SimConfig experiment_config(const ExperimentSpec& spec)
{
    SimConfig c = spec.config_path.empty() ? SimConfig{} : load_config(spec.config_path);
    if (spec.seed)
        c.seed = *spec.seed;
    if (spec.delta_s)
        c.delta_s = *spec.delta_s;
    if (spec.fixed_a) {
        c.population.adaptive = false;
        c.energy.decay_base = *spec.fixed_a;
    }
    if (spec.sun)
        c.sun.enabled = *spec.sun;
    if (spec.flat)
        c.terrain.flat = *spec.flat;
    if (spec.kind == ExperimentKind::FixedFeed) {
        c.sun.enabled = false;
        c.terrain.flat = true;
        c.terrain.heightmap_file.clear();
        c.population.adaptive = false;
        if (!spec.fixed_a)
            c.energy.decay_base = 2.0;
        c.fields.resize(1);
    }
    if (spec.kind == ExperimentKind::Compete) {
        c.population.adaptive = false;
        c.fields.resize(1);
    }
    if (!spec.genomes.empty()) {
        c.seeds.clear();
        for (std::size_t g = 0; g < spec.genomes.size(); ++g) {
            SeedSpec seed;
            seed.genome_file = spec.genomes[g];
            seed.count = spec.seed_count;
            seed.energy = spec.seed_energy;
            seed.lineage = static_cast<long>(g);
            if (spec.kind == ExperimentKind::FixedFeed) {
                seed.count = 1;
                seed.position = std::array<double, 2>{c.mechanics.extent / 2, c.mechanics.extent / 2};
            }
            c.seeds.push_back(seed);
        }
    }
    c.validate();
    return c;
}

std::vector<ReplicateSample> run_replicate(const ExperimentSpec& spec)
{
    Simulation sim(experiment_config(spec));
    std::vector<ReplicateSample> out;
    auto sample = [&] {
        const auto& w = sim.fields().front();
        ReplicateSample s;
        s.step = sim.step_count();
        s.cells = w.cells().size();
        const auto comps = w.components();
        s.components = comps.size();
        s.organisms = static_cast<std::size_t>(std::count_if(
            comps.begin(), comps.end(), [&](const auto& c) { return c.size() == spec.organism_size; }));
        out.push_back(s);
    };
    sample();
    while (sim.step_count() < spec.steps) {
        sim.run(std::min(spec.sample_interval, spec.steps - sim.step_count()));
        sample();
    }
    return out;
}

std::vector<CompeteSample> run_compete(const ExperimentSpec& spec)
{
    Simulation sim(experiment_config(spec));
    std::vector<CompeteSample> out;
    auto sample = [&] {
        CompeteSample s;
        s.step = sim.step_count();
        for (const auto& c : sim.fields().front().cells())
            (c.lineage == 0 ? s.first : s.second) += 1;
        out.push_back(s);
    };
    sample();
    while (sim.step_count() < spec.steps) {
        sim.run(std::min(spec.sample_interval, spec.steps - sim.step_count()));
        sample();
    }
    return out;
}

FixedFeedResult run_fixed_feed(const ExperimentSpec& spec)
{
    const auto config = experiment_config(spec);
    Simulation sim(config);
    auto& world = sim.fields().front();
    if (world.cells().empty())
        throw ConfigError("fixed-feed: no seed cell");
    const auto phenotype = decode_phenotype(*load_genome_file(spec.genomes.front()).phenotype, config.layout());
    auto& fed = world.cells_mut().front();
    const CellId fed_id = fed.id;
    const double cost = world.generation_cost_at(phenotype, fed.kin.position);
    if (!std::isfinite(cost) || !(cost > 0.0))
        throw ConfigError("fixed-feed: the seed phenotype has no finite positive generation cost");
    FixedFeedResult result;
    result.feed_energy = spec.feed_multiplier * cost;
    fed.pinned = true;
    fed.pinned_position = fed.kin.position;
    fed.pinned_energy = result.feed_energy;
    fed.energy = result.feed_energy;

    auto sample = [&] {
        FixedFeedSample s;
        s.step = sim.step_count();
        s.cells = world.cells().size();
        const auto* root = world.find(fed_id);
        for (const auto& comp : world.components())
            if (std::find(comp.begin(), comp.end(), fed_id) != comp.end()) {
                s.network = comp.size();
                for (const CellId id : comp)
                    s.extent = std::max(s.extent, distance(world.find(id)->kin.position, root->kin.position));
            }
        result.samples.push_back(s);
    };
    sample();
    while (sim.step_count() < spec.steps) {
        sim.run(std::min(spec.sample_interval, spec.steps - sim.step_count()));
        sample();
    }
    const std::size_t from = result.samples.size() / 2;
    const double n = static_cast<double>(result.samples.size() - from);
    for (std::size_t i = from; i < result.samples.size(); ++i) {
        result.equilibrium_cells += static_cast<double>(result.samples[i].cells) / n;
        result.equilibrium_network += static_cast<double>(result.samples[i].network) / n;
        result.equilibrium_extent += result.samples[i].extent / n;
    }
    return result;
}

int cmd_experiment(const std::string& spec_path, std::ostream& out, std::ostream& err)
{
    ExperimentSpec spec;
    try {
        spec = load_experiment(spec_path);
        experiment_config(spec);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::usage;
    }
    try {
        fs::create_directories(spec.out_dir);
        std::ostringstream csv;
        csv.precision(17);
        switch (spec.kind) {
        case ExperimentKind::Replicate: {
            csv << "step,cells,components,organisms\n";
            const auto samples = run_replicate(spec);
            for (const auto& s : samples)
                csv << s.step << ',' << s.cells << ',' << s.components << ',' << s.organisms << '\n';
            write_text((fs::path(spec.out_dir) / "replicate.csv").string(), csv.str());
            out << "final organisms of size " << spec.organism_size << ": " << samples.back().organisms << '\n';
            break;
        }
        case ExperimentKind::Compete: {
            csv << "step,lineage0,lineage1\n";
            const auto samples = run_compete(spec);
            for (const auto& s : samples)
                csv << s.step << ',' << s.first << ',' << s.second << '\n';
            write_text((fs::path(spec.out_dir) / "compete.csv").string(), csv.str());
            out << "final populations: " << samples.back().first << ' ' << samples.back().second << '\n';
            break;
        }
        case ExperimentKind::FixedFeed: {
            csv << "step,cells,network,extent\n";
            const auto r = run_fixed_feed(spec);
            for (const auto& s : r.samples)
                csv << s.step << ',' << s.cells << ',' << s.network << ',' << s.extent << '\n';
            write_text((fs::path(spec.out_dir) / "fixed_feed.csv").string(), csv.str());
            out << "feed energy " << r.feed_energy << "\nequilibrium cells " << r.equilibrium_cells
                << "\nequilibrium network " << r.equilibrium_network << "\nequilibrium extent "
                << r.equilibrium_extent << '\n';
            break;
        }
        }
    } catch (const NumericBlowupError& e) {
        err << "error: numeric blowup: " << e.what() << '\n';
        return exit_code::blowup;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::failure;
    }
    return exit_code::ok;
}

// ---------------------------------------------------------------- scene

std::string scene_text(const Simulation& sim)
{
    std::ostringstream os;
    os.precision(17);
    os << "# bookcell-scene v1\n# step " << sim.step_count() << " fields " << sim.fields().size() << '\n';
    for (std::size_t f = 0; f < sim.fields().size(); ++f) {
        const auto& w = sim.fields()[f];
        for (const auto& c : w.cells())
            os << "cell " << f << ' ' << c.id << ' ' << c.kin.position.x << ' ' << c.kin.position.y << ' '
               << c.kin.position.z << ' ' << c.kin.radius << ' ' << c.absorption[0] << ' ' << c.absorption[1] << ' '
               << c.absorption[2] << ' ' << c.energy << '\n';
        for (const auto& b : w.bonds())
            os << "bond " << f << ' ' << b.a << ' ' << b.b << ' ' << b.natural_length << '\n';
    }
    return os.str();
}

int cmd_export_scene(const std::string& snapshot_path, const std::string& out_path, std::ostream& out,
                     std::ostream& err)
{
    try {
        const auto sim = read_snapshot_file(snapshot_path);
        const auto text = scene_text(sim);
        if (out_path.empty() || out_path == "-")
            out << text;
        else
            write_text(out_path, text);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::failure;
    }
    return exit_code::ok;
}

// ---------------------------------------------------------------- asm

int cmd_asm(const std::string& source_path, const std::string& out_path, std::ostream& out, std::ostream& err)
{
    try {
        const auto file = assemble_source(read_text(source_path), PayloadLayout{});
        const auto text = format_genome_text(file);
        if (out_path.empty() || out_path == "-")
            out << text;
        else
            write_text(out_path, text);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::usage;
    }
    return exit_code::ok;
}

int cmd_disasm(const std::string& genome_path, std::ostream& out, std::ostream& err)
{
    try {
        const auto file = load_genome_file(genome_path);
        out << disassemble(file.genome, PayloadLayout{});
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::usage;
    }
    return exit_code::ok;
}

} // namespace bookcell
