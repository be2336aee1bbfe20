#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "bookcell/genome.hpp"

namespace bookcell {

/// One instruction of an assembly program.
struct Directive
{
    std::string label;
    ActionKind action = ActionKind::Transition;
    std::string next;
    /// EXPANSION only: phenotype preset name and entry label of the child
    /// (empty means the child is born dormant).
    std::string phenotype;
    std::string child;
};

/// Phenotype preset: the payload fields of an expanded cell except the copy
/// range and child bookmarker, which the assembler fills in.
struct Phenotype
{
    std::array<double, 3> absorption{};
    double luminosity = 0.0;
    double mass = 1.0;
    double radius = 0.16;
    std::string net;
};

/// Parsed assembly source.
struct AsmProgram
{
    std::size_t marker_length = 3;
    std::uint64_t seed = 1;
    std::string start;
    std::string seed_phenotype;
    std::map<std::string, std::vector<double>> nets;
    std::map<std::string, Phenotype> phenotypes;
    std::vector<Directive> directives;
};

/// Parses the line-oriented directive language (see docs/assembler.md).
/// Errors carry the line number.
AsmProgram parse_asm(std::string_view source, const NetShape& shape);

/// Lays out a Book whose read trace visits the directives in program order
/// and returns it with the seed phenotype, if one was declared.
/// Throws EncodingError for an empty program or unencodable values.
GenomeFile assemble_genome(const AsmProgram& program, const PayloadLayout& layout);

GenomeFile assemble_source(std::string_view source, const PayloadLayout& layout);

/// Decodes a phenotype string into a payload.
ExpansionPayload decode_phenotype(std::string_view phenotype, const PayloadLayout& layout);

struct TraceStep
{
    std::size_t read_position = 0;
    ActionKind action = ActionKind::Transition;
    std::string bookmarker;
    std::string advance;
    std::string child_bookmarker;
};

/// Follows read_step from the genome's current head until a (bookmarker,
/// advance) state repeats, dormancy, or `max_steps`.
std::vector<TraceStep> trace_reads(const Genome& genome, const PayloadLayout& layout, std::size_t max_steps = 256);

/// Human-readable listing of trace_reads.
std::string disassemble(const Genome& genome, const PayloadLayout& layout, std::size_t max_steps = 256);

} // namespace bookcell
