#include "bookcell/assembler.hpp"

#include <algorithm>
#include <charconv>
#include <random>
#include <set>
#include <sstream>

#include "bookcell/alphabet.hpp"
#include "bookcell/errors.hpp"

namespace bookcell {

namespace {

std::vector<std::string_view> split_ws(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r'))
            ++i;
        const std::size_t j = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r')
            ++i;
        if (i > j)
            out.push_back(line.substr(j, i - j));
    }
    return out;
}

[[noreturn]] void fail(std::size_t line, const std::string& msg)
{
    throw EncodingError("asm line " + std::to_string(line) + ": " + msg);
}

double parse_number(std::string_view s, std::size_t line)
{
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end)
        fail(line, "expected a number, got '" + std::string(s) + "'");
    return v;
}

std::size_t parse_index(std::string_view s, std::size_t line)
{
    std::size_t v = 0;
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end)
        fail(line, "expected an index, got '" + std::string(s) + "'");
    return v;
}

/// Resolves `in.<name>` / `out.<name>` to unit indices; `*` selects all slots.
/// Returns (index, slot) pairs; slot is -1 for non-slot units.
std::vector<std::pair<std::size_t, long>> resolve_unit(std::string_view name, bool input, const NetShape& shape,
                                                       std::size_t line)
{
    std::vector<std::pair<std::size_t, long>> out;
    if (name.size() >= 2 && (name[0] == 's' || name[0] == 'l' || name[0] == 'e') &&
        (name[1] == '*' || (name[1] >= '0' && name[1] <= '9'))) {
        const std::size_t offset = name[0] == 's' ? 0 : name[0] == 'l' ? 1 : 2;
        if (name.substr(1) == "*") {
            for (std::size_t k = 0; k < shape.n_slots; ++k)
                out.emplace_back(3 * k + offset, static_cast<long>(k));
        } else {
            const auto k = parse_index(name.substr(1), line);
            if (k >= shape.n_slots)
                fail(line, "slot " + std::to_string(k) + " exceeds the network's " + std::to_string(shape.n_slots));
            out.emplace_back(3 * k + offset, static_cast<long>(k));
        }
        return out;
    }
    if (input) {
        if (name == "light_r")
            out.emplace_back(shape.in_light(0), -1);
        else if (name == "light_g")
            out.emplace_back(shape.in_light(1), -1);
        else if (name == "light_b")
            out.emplace_back(shape.in_light(2), -1);
        else if (name == "touch")
            out.emplace_back(shape.in_touch(), -1);
    } else {
        if (name == "read")
            out.emplace_back(shape.out_read(), -1);
        else if (name == "eat")
            out.emplace_back(shape.out_eat(), -1);
        else if (name == "fusion")
            out.emplace_back(shape.out_fusion(), -1);
        else if (name == "light")
            out.emplace_back(shape.out_light(), -1);
    }
    if (out.empty())
        fail(line, "unknown " + std::string(input ? "input" : "output") + " '" + std::string(name) + "'");
    return out;
}

std::vector<std::pair<std::size_t, long>> resolve_hidden(std::string_view name, const NetShape& shape, std::size_t line)
{
    std::vector<std::pair<std::size_t, long>> out;
    if (name == "h*") {
        for (std::size_t h = 0; h < shape.n_hidden; ++h)
            out.emplace_back(h, -1);
        return out;
    }
    const auto h = parse_index(name.substr(1), line);
    if (h >= shape.n_hidden)
        fail(line, "hidden unit " + std::to_string(h) + " exceeds the network's " + std::to_string(shape.n_hidden));
    out.emplace_back(h, -1);
    return out;
}

/// Applies one `<source> <target> <value>` line to a flat weight vector.
void apply_net_line(std::vector<double>& w, const std::vector<std::string_view>& tok, const NetShape& shape,
                    std::size_t line)
{
    const std::size_t n_in = shape.n_in();
    const std::size_t n_h = shape.n_hidden;
    const std::size_t out_base = n_h * (n_in + 1);
    const double value = parse_number(tok[2], line);
    const auto src = tok[0];
    const auto dst = tok[1];

    const bool dst_hidden = dst.size() >= 2 && dst[0] == 'h';
    const bool dst_out = dst.rfind("out.", 0) == 0;
    if (!dst_hidden && !dst_out)
        fail(line, "target must be h<k> or out.<name>");

    if (dst_hidden) {
        const auto targets = resolve_hidden(dst, shape, line);
        if (src == "bias") {
            for (auto [h, _] : targets)
                w[h * (n_in + 1) + n_in] = value;
        } else if (src.rfind("in.", 0) == 0) {
            for (auto [i, _] : resolve_unit(src.substr(3), true, shape, line))
                for (auto [h, __] : targets)
                    w[h * (n_in + 1) + i] = value;
        } else {
            fail(line, "a hidden unit can only be fed by bias or in.<name>");
        }
        return;
    }

    const auto targets = resolve_unit(dst.substr(4), false, shape, line);
    if (src == "bias") {
        for (auto [o, _] : targets)
            w[out_base + o * (n_h + 1) + n_h] = value;
    } else if (src.size() >= 2 && src[0] == 'h') {
        for (auto [h, _] : resolve_hidden(src, shape, line))
            for (auto [o, __] : targets)
                w[out_base + o * (n_h + 1) + h] = value;
    } else {
        fail(line, "an output can only be fed by bias or h<k>");
    }
}

bool parse_action(std::string_view s, ActionKind& kind)
{
    if (s == "expand")
        kind = ActionKind::Expansion;
    else if (s == "connect")
        kind = ActionKind::Connection;
    else if (s == "disconnect")
        kind = ActionKind::Disconnection;
    else if (s == "jump")
        kind = ActionKind::Transition;
    else
        return false;
    return true;
}

std::array<double, 3> parse_triple(std::string_view s, std::size_t line)
{
    std::array<double, 3> out{};
    std::size_t k = 0;
    while (true) {
        const auto comma = s.find(',');
        if (k >= 3)
            fail(line, "expected three comma-separated values");
        out[k++] = parse_number(s.substr(0, comma), line);
        if (comma == std::string_view::npos)
            break;
        s.remove_prefix(comma + 1);
    }
    if (k != 3)
        fail(line, "expected three comma-separated values");
    return out;
}

ExpansionPayload payload_for(const AsmProgram& prog, const std::string& name, const PayloadLayout& layout)
{
    const auto it = prog.phenotypes.find(name);
    if (it == prog.phenotypes.end())
        throw EncodingError("unknown phenotype '" + name + "'");
    const auto& ph = it->second;
    ExpansionPayload p;
    p.absorption = ph.absorption;
    p.luminosity = ph.luminosity;
    p.mass = ph.mass;
    p.radius = ph.radius;
    if (ph.net.empty()) {
        p.weights.assign(layout.shape.weight_count(), 0.0);
    } else {
        const auto net = prog.nets.find(ph.net);
        if (net == prog.nets.end())
            throw EncodingError("phenotype '" + name + "' references unknown net '" + ph.net + "'");
        p.weights = net->second;
    }
    return p;
}

char random_symbol(std::mt19937_64& rng)
{
    return Alphabet64::symbol(static_cast<int>(rng() % 64));
}

char random_action_symbol(ActionKind kind, std::mt19937_64& rng)
{
    return Alphabet64::symbol(static_cast<int>(kind) * 16 + static_cast<int>(rng() % 16));
}

} // namespace

AsmProgram parse_asm(std::string_view source, const NetShape& shape)
{
    AsmProgram prog;
    std::string open_net;
    double net_default = 0.0;
    std::size_t line_no = 0;
    std::set<std::string> labels;

    while (!source.empty()) {
        const auto nl = source.find('\n');
        std::string_view line = source.substr(0, nl);
        source = nl == std::string_view::npos ? std::string_view{} : source.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        const auto tok = split_ws(line);
        if (tok.empty())
            continue;

        if (!open_net.empty()) {
            if (tok[0] == "end") {
                open_net.clear();
            } else if (tok[0] == "default" && tok.size() == 2) {
                net_default = parse_number(tok[1], line_no);
                std::fill(prog.nets[open_net].begin(), prog.nets[open_net].end(), net_default);
            } else if (tok.size() == 3) {
                apply_net_line(prog.nets[open_net], tok, shape, line_no);
            } else {
                fail(line_no, "net lines are '<source> <target> <value>'");
            }
            continue;
        }

        if (tok[0] == "net") {
            if (tok.size() != 2)
                fail(line_no, "usage: net <name>");
            open_net = std::string(tok[1]);
            if (prog.nets.count(open_net))
                fail(line_no, "net '" + open_net + "' defined twice");
            prog.nets[open_net].assign(shape.weight_count(), 0.0);
            net_default = 0.0;
        } else if (tok[0] == "marker-length") {
            if (tok.size() != 2)
                fail(line_no, "usage: marker-length <n>");
            prog.marker_length = parse_index(tok[1], line_no);
        } else if (tok[0] == "seed") {
            if (tok.size() != 2)
                fail(line_no, "usage: seed <n>");
            prog.seed = parse_index(tok[1], line_no);
        } else if (tok[0] == "start") {
            if (tok.size() != 2)
                fail(line_no, "usage: start <label>");
            prog.start = std::string(tok[1]);
        } else if (tok[0] == "seed-phenotype") {
            if (tok.size() != 2)
                fail(line_no, "usage: seed-phenotype <name>");
            prog.seed_phenotype = std::string(tok[1]);
        } else if (tok[0] == "phenotype") {
            if (tok.size() < 2)
                fail(line_no, "usage: phenotype <name> key=value...");
            Phenotype ph;
            for (std::size_t i = 2; i < tok.size(); ++i) {
                const auto eq = tok[i].find('=');
                if (eq == std::string_view::npos)
                    fail(line_no, "expected key=value, got '" + std::string(tok[i]) + "'");
                const auto key = tok[i].substr(0, eq);
                const auto val = tok[i].substr(eq + 1);
                if (key == "absorption")
                    ph.absorption = parse_triple(val, line_no);
                else if (key == "luminosity")
                    ph.luminosity = parse_number(val, line_no);
                else if (key == "mass")
                    ph.mass = parse_number(val, line_no);
                else if (key == "radius")
                    ph.radius = parse_number(val, line_no);
                else if (key == "net")
                    ph.net = std::string(val);
                else
                    fail(line_no, "unknown phenotype key '" + std::string(key) + "'");
            }
            prog.phenotypes[std::string(tok[1])] = ph;
        } else if (tok[0].back() == ':') {
            // <label>: <action> [phenotype] [child=<label>] -> <next>
            Directive d;
            d.label = std::string(tok[0].substr(0, tok[0].size() - 1));
            if (!labels.insert(d.label).second)
                fail(line_no, "label '" + d.label + "' defined twice");
            if (tok.size() < 4 || !parse_action(tok[1], d.action))
                fail(line_no, "usage: <label>: expand|connect|disconnect|jump ... -> <next>");
            std::size_t i = 2;
            if (d.action == ActionKind::Expansion) {
                d.phenotype = std::string(tok[i++]);
                if (i < tok.size() && tok[i].rfind("child=", 0) == 0)
                    d.child = std::string(tok[i++].substr(6));
            }
            if (i + 2 != tok.size() || tok[i] != "->")
                fail(line_no, "expected '-> <next>' at the end of the directive");
            d.next = std::string(tok[i + 1]);
            prog.directives.push_back(std::move(d));
        } else {
            fail(line_no, "unknown statement '" + std::string(tok[0]) + "'");
        }
    }
    if (!open_net.empty())
        throw EncodingError("net '" + open_net + "' is missing its 'end'");
    return prog;
}

GenomeFile assemble_genome(const AsmProgram& prog, const PayloadLayout& layout)
{
    if (prog.directives.empty())
        throw EncodingError("program has no directives");
    const std::size_t m = prog.marker_length;
    if (m == 0 || m > layout.bookmarker_max)
        throw EncodingError("marker length must be in [1, " + std::to_string(layout.bookmarker_max) + "]");

    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < prog.directives.size(); ++i)
        index[prog.directives[i].label] = i;
    auto lookup = [&](const std::string& label) {
        const auto it = index.find(label);
        if (it == index.end())
            throw EncodingError("unknown label '" + label + "'");
        return it->second;
    };

    const std::size_t n = prog.directives.size();
    std::vector<std::size_t> next(n);
    std::vector<long> child(n, -1);
    std::vector<ExpansionPayload> payloads(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& d = prog.directives[i];
        next[i] = lookup(d.next);
        if (d.action == ActionKind::Expansion) {
            payloads[i] = payload_for(prog, d.phenotype, layout);
            if (!d.child.empty())
                child[i] = static_cast<long>(lookup(d.child));
        }
    }
    const std::size_t start = prog.start.empty() ? 0 : lookup(prog.start);

    std::vector<std::size_t> order;
    std::vector<int> state(n, 0);
    auto place = [&](auto&& self, std::size_t i) -> void {
        if (state[i] == 2)
            return;
        if (state[i] == 1)
            throw EncodingError("expansion children form a cycle through '" + prog.directives[i].label + "'");
        state[i] = 1;
        if (child[i] >= 0 && static_cast<std::size_t>(child[i]) != i)
            self(self, static_cast<std::size_t>(child[i]));
        state[i] = 2;
        order.push_back(i);
    };
    for (std::size_t i = 0; i < n; ++i)
        place(place, i);

    std::vector<std::size_t> offset(n);
    std::size_t total = 0;
    for (std::size_t i : order) {
        offset[i] = total;
        total += m + 1 + 2 * m;
        if (prog.directives[i].action == ActionKind::Expansion)
            total += layout.width(child[i] >= 0 ? m : 0);
    }
    if (total > 262143)
        throw EncodingError("book too long for the copy range fields");

    std::mt19937_64 rng(prog.seed);
    std::vector<std::string> marker(n);
    auto fresh_marker = [&] {
        std::string s(m, 'A');
        for (auto& c : s)
            c = random_symbol(rng);
        return s;
    };
    for (auto& mk : marker)
        mk = fresh_marker();

    std::string book;
    for (int attempt = 0; attempt < 10000; ++attempt) {
        book.clear();
        for (std::size_t i : order) {
            const auto& d = prog.directives[i];
            book += marker[i];
            book.push_back(random_action_symbol(d.action, rng));
            if (d.action == ActionKind::Expansion) {
                auto p = payloads[i];
                p.copy_start = 0;
                p.copy_end = total - 1;
                p.child_bookmarker = child[i] >= 0 ? marker[static_cast<std::size_t>(child[i])] : std::string{};
                book += encode_payload(p, layout);
            }
            // Next bookmarker on even offsets, filler on odd ones, then a zero Advance.
            const auto& nm = marker[next[i]];
            for (std::size_t k = 0; k < m; ++k) {
                book.push_back(nm[k]);
                if (k + 1 < m)
                    book.push_back(random_symbol(rng));
            }
            book.push_back('A');
        }

        bool clean = true;
        for (std::size_t i = 0; i < n; ++i) {
            if (book.find(marker[i]) != offset[i]) {
                marker[i] = fresh_marker();
                clean = false;
            }
        }
        if (clean)
            break;
        if (attempt == 9999)
            throw EncodingError("could not find collision-free markers");
    }

    GenomeFile out;
    out.genome.book = book;
    out.genome.bookmarker = marker[start];
    out.genome.advance = "A";

    // The trace must follow the program graph exactly.
    Genome g = out.genome;
    std::size_t at = start;
    for (std::size_t step = 0; step < 2 * n + 2; ++step) {
        const auto r = read_step(g, layout);
        if (!r || r->read_position != offset[at] + m || r->action != prog.directives[at].action)
            throw EncodingError("assembled book does not trace the program (internal error)");
        at = next[at];
        g.bookmarker = r->next_bookmarker;
        g.advance = r->next_advance;
    }

    if (!prog.seed_phenotype.empty()) {
        auto p = payload_for(prog, prog.seed_phenotype, layout);
        p.copy_start = 0;
        p.copy_end = 0;
        out.phenotype = encode_payload(p, layout);
    }
    return out;
}

GenomeFile assemble_source(std::string_view source, const PayloadLayout& layout)
{
    return assemble_genome(parse_asm(source, layout.shape), layout);
}

ExpansionPayload decode_phenotype(std::string_view phenotype, const PayloadLayout& layout)
{
    if (phenotype.empty())
        throw MalformedGenomeError("empty phenotype");
    Alphabet64::require_valid(phenotype, "phenotype");
    auto d = decode_expansion(phenotype, 0, layout);
    if (d.width > phenotype.size())
        throw MalformedGenomeError("phenotype shorter than one payload (" + std::to_string(phenotype.size()) + " < " +
                                   std::to_string(d.width) + ")");
    return std::move(d.payload);
}

std::vector<TraceStep> trace_reads(const Genome& genome, const PayloadLayout& layout, std::size_t max_steps)
{
    std::vector<TraceStep> out;
    std::set<std::pair<std::string, std::string>> seen;
    Genome g = genome;
    for (std::size_t i = 0; i < max_steps; ++i) {
        if (!seen.emplace(g.bookmarker, g.advance).second)
            break;
        const auto r = read_step(g, layout);
        if (!r)
            break;
        TraceStep t;
        t.read_position = r->read_position;
        t.action = r->action;
        t.bookmarker = g.bookmarker;
        t.advance = g.advance;
        if (r->payload)
            t.child_bookmarker = r->payload->child_bookmarker;
        out.push_back(std::move(t));
        g.bookmarker = r->next_bookmarker;
        g.advance = r->next_advance;
    }
    return out;
}

std::string disassemble(const Genome& genome, const PayloadLayout& layout, std::size_t max_steps)
{
    std::ostringstream os;
    const auto steps = trace_reads(genome, layout, max_steps);
    for (const auto& t : steps) {
        os << "@" << t.read_position << " marker=" << t.bookmarker << " advance=" << t.advance << " "
           << to_string(t.action);
        if (t.action == ActionKind::Expansion)
            os << " child=" << (t.child_bookmarker.empty() ? std::string("<dormant>") : t.child_bookmarker);
        os << "\n";
    }
    if (steps.empty())
        os << "dormant\n";
    return os.str();
}

} // namespace bookcell
