// Command-line front end: check, graph export, static analysis, simulation
// and golden-model verification over pattern-annotated DSL sources.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <unistd.h>

#include <CLI11.hpp>

#include "sdfap/dot.hpp"
#include "sdfap/json_export.hpp"
#include "sdfap/resources.hpp"
#include "sdfap/sim.hpp"

using namespace sdfap;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDiagnostic = 1;
constexpr int kExitUsage = 2;
constexpr int kExitSimFault = 3;

bool use_color() {
    const char* v = std::getenv("SDFAP_COLOR");
    if (v && std::string(v) == "0") return false;
    return isatty(2);
}

void print_error(const std::string& file, const std::string& msg) {
    if (use_color())
        std::cerr << file << ": \033[31merror:\033[0m " << msg << "\n";
    else
        std::cerr << file << ": error: " << msg << "\n";
}

// Diagnostics carrying a source position print as file:line:col: message.
void print_compile_error(const std::string& file, const CompileError& e) {
    std::string prefix = file;
    if (e.pos().line > 0) prefix += ":" + to_string(e.pos());
    if (use_color())
        std::cerr << prefix << ": \033[31merror:\033[0m " << e.message() << "\n";
    else
        std::cerr << prefix << ": error: " << e.message() << "\n";
}

struct CommonArgs {
    std::string file;
    std::string entry;
    std::string shape;
    std::string mode = "eager";
    int width = 32;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::ios_base::failure("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<Shape> parse_shapes_arg(const std::string& arg) {
    std::vector<Shape> out;
    std::size_t start = 0;
    while (start <= arg.size()) {
        std::size_t comma = arg.find(',', start);
        std::string piece =
            comma == std::string::npos ? arg.substr(start) : arg.substr(start, comma - start);
        if (!piece.empty()) out.push_back(parse_shape(piece));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::vector<Value> load_inputs(const std::string& path, std::size_t nparams) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open '" + path + "'");
    nlohmann::json j;
    in >> j;
    std::vector<Value> vals;
    if (nparams == 1) {
        vals.push_back(value_from_json(j));
    } else {
        if (!j.is_array() || j.size() != nparams)
            throw EvalError("input file must hold an array of " + std::to_string(nparams) +
                            " values");
        for (const auto& e : j) vals.push_back(value_from_json(e));
    }
    return vals;
}

CompiledDesign compile_common(const CommonArgs& a, const std::vector<Value>* inputs = nullptr) {
    std::string src = read_file(a.file);
    Program prog = resolve(parse_program_text(src));
    CompileOptions opt;
    opt.mode = a.mode == "conservative" ? ReadinessMode::Conservative : ReadinessMode::Eager;
    opt.width = a.width;
    if (!a.shape.empty()) {
        opt.input_shapes = parse_shapes_arg(a.shape);
    } else if (inputs) {
        // Prefer pattern inference; fall back to the provided input shapes.
        auto inferred = infer_entry_shapes(prog, a.entry);
        if (inferred) {
            opt.input_shapes = *inferred;
        } else {
            std::vector<Shape> from_inputs;
            for (const auto& v : *inputs) from_inputs.push_back(v.shape());
            opt.input_shapes = from_inputs;
        }
    }
    return compile_program(std::move(prog), a.entry, opt);
}

void add_common(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("file", a.file, "DSL source file")->required();
    cmd->add_option("--entry", a.entry, "entry definition")->required();
    cmd->add_option("--shape", a.shape,
                    "input shapes, comma separated (e.g. 6x8x4x4 or scalar,3)");
    cmd->add_option("--mode", a.mode, "readiness mode: eager|conservative")
        ->check(CLI::IsMember({"eager", "conservative"}));
    cmd->add_option("--width", a.width, "scalar bit width (default 32)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SDF-AP compiler and cycle-accurate simulator"};
    app.require_subcommand(1);

    CommonArgs check_a, graph_a, analyze_a, sim_a, verify_a;

    auto* check = app.add_subcommand("check", "parse, classify, shape-check and build the graph");
    add_common(check, check_a);

    auto* graph = app.add_subcommand("graph", "export the expanded SDF-AP graph");
    add_common(graph, graph_a);
    std::string dot_path, json_path;
    graph->add_option("--dot", dot_path, "write Graphviz DOT to this file");
    graph->add_option("--json", json_path, "write graph JSON to this file");

    auto* analyze = app.add_subcommand("analyze", "static schedule and resource report");
    add_common(analyze, analyze_a);
    std::string format = "text", out_path;
    std::int64_t div_weight = 1;
    analyze->add_option("--format", format, "text|json")->check(CLI::IsMember({"text", "json"}));
    analyze->add_option("--out", out_path, "write the report to this file");
    analyze->add_option("--div-dsp-weight", div_weight, "DSP equivalents per divider (default 1)");

    auto* sim = app.add_subcommand("sim", "cycle-accurate simulation");
    add_common(sim, sim_a);
    std::string input_path, trace_path, trace_text_path;
    std::int64_t max_cycles = -1;
    bool sim_random = false;
    std::uint64_t sim_seed = 1;
    sim->add_option("--input", input_path, "input value file (JSON nested arrays)");
    sim->add_flag("--random", sim_random, "use one random input");
    sim->add_option("--seed", sim_seed, "random seed");
    sim->add_option("--max-cycles", max_cycles, "cycle bound");
    sim->add_option("--trace", trace_path, "write a JSON-lines trace");
    sim->add_option("--trace-text", trace_text_path, "write a text waveform");
    std::int64_t clamp_capacity = -1;
    sim->add_option("--clamp-capacity", clamp_capacity,
                    "debug: clamp every buffer capacity to at most N scalars");

    auto* verify = app.add_subcommand("verify", "golden-model equivalence");
    add_common(verify, verify_a);
    std::string v_input;
    int v_random = 0;
    std::uint64_t v_seed = 1;
    std::string v_range = "-100:100";
    verify->add_option("--input", v_input, "verify one explicit input");
    verify->add_option("--random", v_random, "number of random inputs");
    verify->add_option("--seed", v_seed, "random seed");
    verify->add_option("--range", v_range, "random value range lo:hi");

    CLI11_PARSE(app, argc, argv);

    const CommonArgs& active = check->parsed()     ? check_a
                               : graph->parsed()   ? graph_a
                               : analyze->parsed() ? analyze_a
                               : sim->parsed()     ? sim_a
                                                   : verify_a;
    try {
        if (check->parsed()) {
            CompiledDesign c = compile_common(check_a);
            std::int64_t nodes = 0;
            for (const auto& i : c.design.insts)
                if (i.kind == InstKind::Def || i.kind == InstKind::MapHof ||
                    i.kind == InstKind::FoldHof)
                    nodes++;
            std::cout << "ok: entry " << c.entry << ", inputs";
            for (const auto& s : c.input_shapes) std::cout << " " << s.str();
            std::cout << ", " << nodes << " SDF-AP node instances, " << c.design.fifos.size()
                      << " FIFOs, latency " << c.sched.latency << " cycles\n";
            return kExitOk;
        }
        if (graph->parsed()) {
            CompiledDesign c = compile_common(graph_a);
            if (dot_path.empty() && json_path.empty()) {
                std::cout << emit_dot(c);
                return kExitOk;
            }
            if (!dot_path.empty()) {
                std::ofstream out(dot_path);
                if (!out) throw std::ios_base::failure("cannot write '" + dot_path + "'");
                out << emit_dot(c);
            }
            if (!json_path.empty()) {
                std::ofstream out(json_path);
                if (!out) throw std::ios_base::failure("cannot write '" + json_path + "'");
                out << graph_json(c).dump(2) << "\n";
            }
            return kExitOk;
        }
        if (analyze->parsed()) {
            CompiledDesign c = compile_common(analyze_a);
            ResourceReport r = count_resources(c, div_weight);
            std::string text = render_report(r, format);
            if (out_path.empty()) {
                std::cout << text;
            } else {
                std::ofstream out(out_path);
                if (!out) throw std::ios_base::failure("cannot write '" + out_path + "'");
                out << text;
            }
            return kExitOk;
        }
        if (sim->parsed()) {
            if (input_path.empty() == !sim_random) {
                print_error(sim_a.file, "sim needs exactly one of --input or --random");
                return kExitUsage;
            }
            std::optional<std::vector<Value>> inputs;
            if (!input_path.empty()) {
                Program peek = resolve(parse_program_text(read_file(sim_a.file)));
                const Definition* d = peek.find(sim_a.entry);
                if (!d) throw CompileError("no definition named '" + sim_a.entry + "'");
                inputs = load_inputs(input_path, d->params.size());
            }
            CompiledDesign c = compile_common(sim_a, inputs ? &*inputs : nullptr);
            if (!inputs) {
                std::mt19937_64 rng(sim_seed);
                std::vector<Value> r;
                for (const auto& s : c.input_shapes) r.push_back(random_value(s, rng, -100, 100));
                inputs = r;
            }
            if (clamp_capacity >= 0)
                for (auto& f : c.design.fifos)
                    f.capacity = std::min(f.capacity, clamp_capacity);
            bool want_trace = !trace_path.empty() || !trace_text_path.empty();
            SimOutcome out = simulate(c, *inputs, max_cycles, want_trace);
            std::cout << value_to_json(out.output).dump() << "\n";
            std::cout << "latency: " << out.latency << " cycles\n";
            if (!trace_path.empty()) {
                std::ofstream t(trace_path);
                if (!t) throw std::ios_base::failure("cannot write '" + trace_path + "'");
                t << trace_jsonl(c, out.raw);
            }
            if (!trace_text_path.empty()) {
                std::ofstream t(trace_text_path);
                if (!t) throw std::ios_base::failure("cannot write '" + trace_text_path + "'");
                t << trace_text(c, out.raw);
            }
            return kExitOk;
        }
        if (verify->parsed()) {
            if (v_input.empty() && v_random <= 0) {
                print_error(verify_a.file, "verify needs --input or --random N with N >= 1");
                return kExitUsage;
            }
            std::optional<std::vector<Value>> one;
            if (!v_input.empty()) {
                Program peek = resolve(parse_program_text(read_file(verify_a.file)));
                const Definition* d = peek.find(verify_a.entry);
                if (!d) throw CompileError("no definition named '" + verify_a.entry + "'");
                one = load_inputs(v_input, d->params.size());
            }
            CompiledDesign c = compile_common(verify_a, one ? &*one : nullptr);
            EquivalenceReport rep;
            if (one) {
                rep = verify_equivalence(c, {*one});
            } else {
                auto colon = v_range.find(':');
                if (colon == std::string::npos)
                    throw std::ios_base::failure("range must be lo:hi");
                std::int64_t lo = std::stoll(v_range.substr(0, colon));
                std::int64_t hi = std::stoll(v_range.substr(colon + 1));
                rep = verify_random(c, v_random, v_seed, lo, hi);
            }
            for (std::size_t i = 0; i < rep.cases.size(); ++i) {
                const auto& e = rep.cases[i];
                if (e.passed)
                    std::cout << "input " << i << ": ok (latency " << e.latency << ")\n";
                else
                    std::cout << "input " << i << ": FAIL " << e.note << "\n";
            }
            std::cout << rep.passed_count() << "/" << rep.cases.size() << " passed\n";
            return rep.all_passed() ? kExitOk : kExitDiagnostic;
        }
    } catch (const CompileError& e) {
        print_compile_error(active.file, e);
        return kExitDiagnostic;
    } catch (const SimFault& e) {
        print_error(active.file, std::string("simulation fault: ") + e.what());
        return kExitSimFault;
    } catch (const EvalError& e) {
        print_error(active.file, e.what());
        return kExitDiagnostic;
    } catch (const std::ios_base::failure& e) {
        print_error(active.file, e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        print_error(active.file, e.what());
        return kExitUsage;
    }
    return kExitUsage;
}
