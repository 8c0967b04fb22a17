#pragma once

#include <iomanip>
#include <sstream>
#include <string>

#include "sdfap/compiler.hpp"

#include <nlohmann/json.hpp>

namespace sdfap {

struct OpCounts {
    std::int64_t muls = 0, divs = 0, adds = 0;
    OpCounts& operator+=(const OpCounts& o) {
        muls += o.muls;
        divs += o.divs;
        adds += o.adds;
        return *this;
    }
    OpCounts operator*(std::int64_t k) const { return OpCounts{muls * k, divs * k, adds * k}; }
};

// Shape-aware operator counting: a map over n elements instantiates n copies
// of its body, a fold over n instantiates n-1, and so on. Mirrors the
// evaluator's structure with shapes instead of values.
class OpCounter {
public:
    explicit OpCounter(const Program& prog) : prog_(prog) {}

    OpCounts count_call(const Definition& def, const std::vector<Shape>& args) {
        Env env;
        env.def = &def;
        for (std::size_t i = 0; i < def.params.size(); ++i)
            env.vars[def.params[i].name] = args[i];
        OpCounts c;
        walk(def.body, env, c);
        return c;
    }

    OpCounts count_fn(const Definition* context, const ExprPtr& fn,
                      const std::vector<Shape>& args) {
        Env env;
        env.def = context;
        OpCounts c;
        apply_fn(fn, env, args, c);
        return c;
    }

    OpCounts count_expr(const Definition* context, const ExprPtr& e,
                        const std::map<std::string, Shape>& vars) {
        Env env;
        env.def = context;
        env.vars = vars;
        OpCounts c;
        walk(e, env, c);
        return c;
    }

private:
    struct Env {
        const Definition* def = nullptr;
        std::map<std::string, Shape> vars;
        std::map<std::string, Shape> memo;
    };

    const Binding* find_binding(const Env& env, const std::string& n) const {
        if (!env.def) return nullptr;
        for (const auto& b : env.def->bindings)
            if (b.name == n) return &b;
        return nullptr;
    }

    Shape apply_fn(const ExprPtr& fn, Env& env, const std::vector<Shape>& args, OpCounts& c) {
        switch (fn->kind) {
            case ExprKind::Var: {
                const std::string& n = fn->name;
                if (const Definition* d = prog_.find(n)) {
                    Env inner;
                    inner.def = d;
                    for (std::size_t i = 0; i < args.size(); ++i)
                        inner.vars[d->params[i].name] = args[i];
                    return walk(d->body, inner, c);
                }
                if (const Binding* b = find_binding(env, n); b && !b->params.empty()) {
                    Env inner;
                    inner.def = env.def;
                    for (std::size_t i = 0; i < args.size(); ++i)
                        inner.vars[b->params[i].name] = args[i];
                    return walk(b->body, inner, c);
                }
                if (n == "div") {
                    c.divs++;
                    return Shape::scalar();
                }
                if (n == "transpose") {
                    Shape s = args.at(0);
                    std::swap(s.dims[0], s.dims[1]);
                    return s;
                }
                throw CompileError(fn->pos, "'" + n + "' is not a function");
            }
            case ExprKind::Lambda: {
                Env inner = env;
                for (std::size_t i = 0; i < args.size(); ++i)
                    inner.vars[fn->lambda_params[i]] = args[i];
                return walk(fn->args[0], inner, c);
            }
            case ExprKind::HofApply: {
                std::vector<Shape> given;
                for (const auto& a : fn->args) given.push_back(walk(a, env, c));
                given.insert(given.end(), args.begin(), args.end());
                return hof(*fn, given, env, c);
            }
            case ExprKind::Apply: {
                std::vector<Shape> given;
                for (const auto& a : fn->args) given.push_back(walk(a, env, c));
                given.insert(given.end(), args.begin(), args.end());
                return apply_fn(fn->fn, env, given, c);
            }
            default:
                throw CompileError(fn->pos, "expression is not a function");
        }
    }

    Shape hof(const Expr& e, const std::vector<Shape>& given, Env& env, OpCounts& c) {
        switch (e.hof) {
            case HofKind::Map:
            case HofKind::Imap: {
                const Shape& xs = given.back();
                OpCounts per;
                std::vector<Shape> fargs;
                if (e.hof == HofKind::Imap) fargs.push_back(Shape::scalar());
                fargs.push_back(xs.element());
                Shape relem = apply_fn(e.fn, env, fargs, per);
                c += per * xs.outer();
                return Shape::vec(xs.outer(), relem);
            }
            case HofKind::Fold: {
                const Shape& xs = given.back();
                OpCounts per;
                Shape acc = xs.element();
                apply_fn(e.fn, env, {acc, xs.element()}, per);
                c += per * std::max<std::int64_t>(xs.outer() - 1, 0);
                return acc;
            }
            case HofKind::Foldl: {
                const Shape& init = given[0];
                const Shape& xs = given[1];
                OpCounts per;
                apply_fn(e.fn, env, {init, xs.element()}, per);
                c += per * xs.outer();
                return init;
            }
        }
        throw CompileError(e.pos, "unknown HoF");
    }

    Shape walk(const ExprPtr& ep, Env& env, OpCounts& c) {
        const Expr& e = *ep;
        switch (e.kind) {
            case ExprKind::IntLit:
                return Shape::scalar();
            case ExprKind::Var: {
                auto it = env.vars.find(e.name);
                if (it != env.vars.end()) return it->second;
                if (const Binding* b = find_binding(env, e.name); b && b->params.empty()) {
                    auto mt = env.memo.find(e.name);
                    if (mt != env.memo.end()) return mt->second; // hardware is shared
                    Shape s = walk(b->body, env, c);
                    env.memo[e.name] = s;
                    return s;
                }
                if (const Definition* d = prog_.find(e.name); d && d->params.empty()) {
                    Env inner;
                    inner.def = d;
                    return walk(d->body, inner, c);
                }
                throw CompileError(e.pos, "cannot use '" + e.name + "' as a value");
            }
            case ExprKind::BinOp: {
                walk(e.args[0], env, c);
                walk(e.args[1], env, c);
                switch (e.op) {
                    case BinOpKind::Mul: c.muls++; break;
                    case BinOpKind::Div: c.divs++; break;
                    default: c.adds++; break;
                }
                return Shape::scalar();
            }
            case ExprKind::Apply: {
                std::vector<Shape> args;
                for (const auto& a : e.args) args.push_back(walk(a, env, c));
                return apply_fn(e.fn, env, args, c);
            }
            case ExprKind::HofApply: {
                std::vector<Shape> given;
                for (const auto& a : e.args) given.push_back(walk(a, env, c));
                return hof(e, given, env, c);
            }
            case ExprKind::VecLit:
            case ExprKind::Tuple: {
                Shape elem;
                for (const auto& a : e.args) elem = walk(a, env, c);
                return Shape::vec(static_cast<std::int64_t>(e.args.size()), elem);
            }
            case ExprKind::Lambda:
                throw CompileError(e.pos, "lambda used as a value");
            case ExprKind::Transpose: {
                Shape s = walk(e.args[0], env, c);
                std::swap(s.dims[0], s.dims[1]);
                return s;
            }
        }
        throw CompileError(e.pos, "unreachable expression kind");
    }

    const Program& prog_;
};

struct ResourceReport {
    std::int64_t dsp_count = 0;
    std::int64_t mul_count = 0;
    std::int64_t div_count = 0;
    std::int64_t adder_count = 0;
    std::int64_t buffer_words = 0;
    std::int64_t buffer_bits = 0;
    std::int64_t node_count = 0;
    std::int64_t comb_count = 0;
    std::int64_t fifo_count = 0;
    std::int64_t latency_cycles = 0;
    std::int64_t initiation_interval = 0;
};

// Static resource estimate: one DSP per multiplier (dividers weighted by
// div_dsp_weight), adders counted separately, buffer words from the computed
// capacities, latency from the static schedule, initiation interval from a
// two-frame schedule.
inline ResourceReport count_resources(const CompiledDesign& c, std::int64_t div_dsp_weight = 1) {
    ResourceReport r;
    OpCounter counter(*c.prog);
    OpCounts total;

    for (const Inst& inst : c.design.insts) {
        switch (inst.kind) {
            case InstKind::Def: {
                total += counter.count_call(*inst.def, inst.in_firing_shapes);
                r.node_count++;
                break;
            }
            case InstKind::MapHof: {
                const Shape& xs = inst.in_firing_shapes.back();
                std::vector<Shape> fargs;
                if (inst.with_index) fargs.push_back(Shape::scalar());
                fargs.push_back(xs.element());
                OpCounts per = counter.count_fn(inst.context, inst.fn, fargs);
                std::int64_t lanes = 0;
                for (auto w : inst.cp_display.outer()) lanes = std::max(lanes, w);
                total += per * lanes;
                r.node_count++;
                break;
            }
            case InstKind::FoldHof: {
                const Shape& xs = inst.in_firing_shapes.back();
                Shape acc = inst.hof == HofKind::Foldl ? inst.in_firing_shapes[0]
                                                       : xs.element();
                OpCounts per = counter.count_fn(inst.context, inst.fn, {acc, xs.element()});
                const auto& q = inst.cp_display.outer();
                std::int64_t lanes = 0;
                for (std::size_t p = 0; p < q.size(); ++p) {
                    std::int64_t apps = q[p];
                    if (inst.hof == HofKind::Fold && p == 0) apps -= 1;
                    lanes = std::max(lanes, apps);
                }
                total += per * std::max<std::int64_t>(lanes, 0);
                r.node_count++;
                break;
            }
            case InstKind::Comb: {
                std::map<std::string, Shape> vars;
                for (std::size_t slot = 0; slot < inst.in_firing_shapes.size(); ++slot) {
                    Shape s = inst.in_firing_shapes[slot];
                    if (inst.pointwise) s = Shape::scalar();
                    vars["$" + std::to_string(slot)] = s;
                }
                OpCounts per;
                for (const auto& t : inst.templates)
                    per += counter.count_expr(inst.context, t, vars);
                std::int64_t lanes = 1;
                if (inst.pointwise && !inst.cp_display.empty())
                    for (auto w : inst.cp_display.outer()) lanes = std::max(lanes, w);
                total += per * lanes;
                r.comb_count++;
                break;
            }
            default:
                break;
        }
    }

    r.mul_count = total.muls;
    r.div_count = total.divs;
    r.adder_count = total.adds;
    r.dsp_count = total.muls + div_dsp_weight * total.divs;

    for (const Fifo& f : c.design.fifos) {
        if (!fifo_is_buffer(c.design, f)) continue;
        r.buffer_words += f.capacity;
        r.fifo_count++;
    }
    r.buffer_bits = r.buffer_words * c.width;
    r.latency_cycles = c.sched.latency;

    // Initiation interval from a two-frame token schedule.
    {
        CompileOptions opt;
        opt.input_shapes = c.input_shapes;
        opt.mode = c.mode;
        opt.width = c.width;
        opt.frames = 2;
        CompiledDesign two = compile_program(Program(*c.prog), c.entry, opt);
        r.initiation_interval = two.sched.frame_latency[1] - two.sched.frame_latency[0];
    }
    return r;
}

inline std::string render_report(const ResourceReport& r, const std::string& format) {
    if (format == "json") {
        nlohmann::ordered_json j;
        j["dsp_count"] = r.dsp_count;
        j["mul_count"] = r.mul_count;
        j["div_count"] = r.div_count;
        j["adder_count"] = r.adder_count;
        j["buffer_words"] = r.buffer_words;
        j["buffer_bits"] = r.buffer_bits;
        j["node_count"] = r.node_count;
        j["comb_count"] = r.comb_count;
        j["fifo_count"] = r.fifo_count;
        j["latency_cycles"] = r.latency_cycles;
        j["initiation_interval"] = r.initiation_interval;
        return j.dump(2) + "\n";
    }
    std::ostringstream os;
    auto row = [&](const char* k, std::int64_t v) {
        os << std::left << std::setw(22) << k << v << "\n";
    };
    row("DSPs", r.dsp_count);
    row("  multipliers", r.mul_count);
    row("  dividers", r.div_count);
    row("Adders", r.adder_count);
    row("Buffer words", r.buffer_words);
    row("SDF-AP nodes", r.node_count);
    row("Comb regions", r.comb_count);
    row("FIFOs", r.fifo_count);
    row("Latency (cycles)", r.latency_cycles);
    row("Initiation interval", r.initiation_interval);
    return os.str();
}

} // namespace sdfap
