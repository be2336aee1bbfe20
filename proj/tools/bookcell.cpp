// bookcell command-line driver.
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "bookcell/shell.hpp"

using namespace bookcell;

int main(int argc, char** argv)
{
    CLI::App app{"bookcell: genome-driven cell simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
    std::optional<std::uint64_t> steps;
    bool quiet = false;
    app.add_option("--config", config_path, "Simulation config (YAML); falls back to $BOOKCELL_CONFIG");
    app.add_option("--seed", seed, "Override the config seed");
    app.add_option("--out", out_dir, "Output directory or file");
    app.add_option("--steps", steps, "Number of steps");
    app.add_flag("--quiet", quiet, "Suppress progress output");

    auto* run = app.add_subcommand("run", "Run a simulation");
    std::string resume;
    bool parallel = false, serial = false;
    run->add_option("--resume", resume, "Continue from a snapshot");
    run->add_flag("--parallel", parallel, "Step fields on separate threads");
    run->add_flag("--serial", serial, "Step fields one after another");

    auto* validate = app.add_subcommand("validate-appendix", "Check the energy model against its closed forms");
    AppendixOptions appendix;
    std::optional<double> tolerance;
    validate->add_option("--tolerance", tolerance, "Use one tolerance for every check");
    validate->add_option("--decay-tol", appendix.tol.decay);
    validate->add_option("--fixed-tol", appendix.tol.fixed_point);
    validate->add_option("--arrival-tol", appendix.tol.arrival);
    validate->add_option("--einf-tol", appendix.tol.e_infinity);
    validate->add_option("--U", appendix.mc_u, "Decay rate for the Monte-Carlo check");
    validate->add_option("--p", appendix.mc_p, "Per-step arrival probability");
    validate->add_option("--arrivals", appendix.mc_arrivals);

    auto* edit = app.add_subcommand("edit-genome", "Replace the first occurrence of a substring in a Book");
    std::string genome_path, find, replace;
    edit->add_option("genome", genome_path)->required();
    edit->add_option("--find", find)->required();
    edit->add_option("--replace", replace)->required();

    auto* experiment = app.add_subcommand("experiment", "Run a replicate, compete or fixed-feed experiment");
    std::string spec_path;
    experiment->add_option("spec", spec_path)->required();

    auto* scene = app.add_subcommand("export-scene", "Write a snapshot as scene text");
    std::string snapshot_path;
    scene->add_option("snapshot", snapshot_path)->required();

    auto* assemble = app.add_subcommand("asm", "Assemble a genome program");
    std::string source_path;
    assemble->add_option("source", source_path)->required();

    auto* disasm = app.add_subcommand("disasm", "List the read trace of a genome");
    std::string disasm_path;
    disasm->add_option("genome", disasm_path)->required();

    for (auto* sub : app.get_subcommands({}))
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_code::usage;
    }

    if (config_path.empty())
        if (const char* env = std::getenv("BOOKCELL_CONFIG"))
            config_path = env;
    const bool out_given = app.count("--out") > 0;

    if (run->parsed()) {
        RunOptions o;
        o.config_path = config_path;
        o.out_dir = out_dir;
        o.steps = steps;
        o.seed = seed;
        o.resume = resume;
        o.quiet = quiet;
        if (parallel)
            o.parallel = true;
        if (serial)
            o.parallel = false;
        return cmd_run(o, std::cout, std::cerr);
    }
    if (validate->parsed()) {
        if (tolerance)
            appendix.tol = AppendixTolerances{*tolerance, *tolerance, *tolerance, *tolerance};
        if (seed)
            appendix.seed = *seed;
        return cmd_validate_appendix(appendix, std::cout, std::cerr);
    }
    if (edit->parsed())
        return cmd_edit_genome(genome_path, find, replace, out_given ? out_dir : std::string(), std::cout, std::cerr);
    if (experiment->parsed())
        return cmd_experiment(spec_path, std::cout, std::cerr);
    if (scene->parsed())
        return cmd_export_scene(snapshot_path, out_given ? out_dir : std::string("-"), std::cout, std::cerr);
    if (assemble->parsed())
        return cmd_asm(source_path, out_given ? out_dir : std::string("-"), std::cout, std::cerr);
    if (disasm->parsed())
        return cmd_disasm(disasm_path, std::cout, std::cerr);
    return exit_code::usage;
}
