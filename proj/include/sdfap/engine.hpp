#pragma once

#include <deque>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "sdfap/control.hpp"
#include "sdfap/expand.hpp"
#include "sdfap/golden.hpp"

namespace sdfap {

struct EngineOptions {
    ReadinessMode mode = ReadinessMode::Eager;
    int width = 32;
    std::int64_t max_cycles = -1; // automatic bound when negative
    bool track_values = true;
    bool enforce_capacity = true;
    bool record_trace = false;
};

struct TraceRow {
    std::int64_t cycle = 0;
    std::vector<NodeControllerState> nodes; // indexed like design insts
    std::vector<std::int64_t> occupancy;    // indexed like design fifos
    std::int64_t tokens_moved = 0;
    std::int64_t sink_arrivals = 0;
};

struct EngineResult {
    Value output;
    std::int64_t latency = 0;                 // cycle after the last sink token
    std::vector<std::int64_t> frame_latency;  // per frame, same convention
    std::vector<std::vector<std::int64_t>> firing_starts; // per instance
    std::vector<std::int64_t> peak;           // per fifo: occupancy-after-writes peak
    std::vector<std::int64_t> max_write;      // per fifo: widest single-cycle write
    std::vector<std::int64_t> min_firing_need; // per fifo: largest one-firing read total
    std::vector<std::int64_t> written, read;  // per fifo token accounting
    std::vector<std::int64_t> final_occupancy;
    std::vector<TraceRow> trace;
    std::int64_t cycles_run = 0;
};

// Cycle-accurate executor of an expanded design. With track_values the run
// carries data and produces the output value; without, it is the token-level
// static schedule (same controller logic, no data).
class Engine {
public:
    Engine(const Program& prog, const ExpandedDesign& d, EngineOptions opt)
        : prog_(prog), d_(d), opt_(opt), eval_(prog, opt.width) {}

    EngineResult run(const std::vector<Value>& inputs) {
        init(inputs);
        std::int64_t bound = opt_.max_cycles;
        if (bound < 0) {
            bound = 64;
            for (const auto& i : d_.insts) bound += i.firings * i.latency;
            bound += static_cast<std::int64_t>(source_horizon_);
            bound *= 4;
        }

        for (std::int64_t t = 0; t < bound; ++t) {
            step(t);
            if (sink_done_ == sink_expected_) {
                finish(t);
                return std::move(res_);
            }
            if (idle_cycle_ && t >= static_cast<std::int64_t>(source_horizon_))
                throw SimFault(SimFault::Kind::Deadlock, blocked_diagnosis(), t,
                               "deadlock: no progress while the sink is incomplete (" +
                                   blocked_diagnosis() + ")");
        }
        throw SimFault(SimFault::Kind::MaxCyclesExceeded, "run", bound,
                       "cycle bound exhausted before the sink completed");
    }

private:
    struct FifoState {
        std::int64_t filled = 0;
        std::deque<std::int64_t> values;
        std::int64_t written = 0, read = 0;
        std::int64_t reads_this_cycle = 0;
    };

    struct InstState {
        NodeControllerState nc;
        std::int64_t done = 0; // completed firings
        std::vector<std::int64_t> slot_pos; // consumption position per slot
        std::vector<std::int64_t> port_pos; // emission position per port
        // Current firing consumption stash (values mode).
        std::vector<std::vector<std::int64_t>> stash;
        std::vector<std::int64_t> consumed; // per slot, scalars consumed this firing
        std::vector<std::int64_t> outbuf;   // pending emissions per port, concatenated
        std::vector<std::vector<std::int64_t>> port_out; // per port pending scalars
        std::vector<std::int64_t> port_emit_pos;
        Value fold_acc;
        bool fold_seeded = false;
        std::int64_t elems_consumed = 0; // elements consumed this firing (imap index)
    };

    void init(const std::vector<Value>& inputs) {
        fifos_.assign(d_.fifos.size(), {});
        insts_.assign(d_.insts.size(), {});
        res_ = EngineResult{};
        res_.firing_starts.assign(d_.insts.size(), {});
        res_.peak.assign(d_.fifos.size(), 0);
        res_.max_write.assign(d_.fifos.size(), 0);
        res_.min_firing_need.assign(d_.fifos.size(), 0);
        res_.written.assign(d_.fifos.size(), 0);
        res_.read.assign(d_.fifos.size(), 0);
        res_.frame_latency.assign(static_cast<std::size_t>(d_.frames), 0);
        for (std::size_t i = 0; i < d_.insts.size(); ++i) {
            const Inst& inst = d_.insts[i];
            insts_[i].slot_pos.assign(inst.reads.size(), 0);
            insts_[i].port_pos.assign(inst.port_writes.size(), 0);
            insts_[i].stash.assign(inst.reads.size(), {});
            insts_[i].consumed.assign(inst.reads.size(), 0);
            insts_[i].port_out.assign(inst.port_writes.size(), {});
            insts_[i].port_emit_pos.assign(inst.port_writes.size(), 0);
        }
        for (const Fifo& f : d_.fifos)
            for (const auto& firing : f.read_counts) {
                std::int64_t need =
                    std::accumulate(firing.begin(), firing.end(), std::int64_t{0});
                res_.min_firing_need[static_cast<std::size_t>(f.id)] =
                    std::max(res_.min_firing_need[static_cast<std::size_t>(f.id)], need);
            }

        // Source data: the entry inputs, flattened per frame.
        source_horizon_ = 0;
        source_values_.assign(d_.source_insts.size(), {});
        for (std::size_t s = 0; s < d_.source_insts.size(); ++s) {
            const Inst& src = d_.inst(d_.source_insts[s]);
            source_horizon_ = std::max(source_horizon_, src.source_sched.size());
            if (!opt_.track_values) continue;
            if (static_cast<std::size_t>(src.param_index) >= inputs.size())
                throw EvalError("missing input value for parameter " +
                                std::to_string(src.param_index));
            const Value& v = inputs[static_cast<std::size_t>(src.param_index)];
            Shape expect = d_.input_shapes[static_cast<std::size_t>(src.param_index)];
            if (d_.frames > 1) expect = Shape::vec(d_.frames, expect);
            if (!v.shape_uniform() || !(v.shape() == expect))
                throw EvalError("input shape does not match expected " + expect.str());
            source_values_[s] = v.flatten();
        }

        sink_expected_ = d_.out_scalars_per_frame * d_.frames;
        sink_done_ = 0;
        if (opt_.track_values)
            out_flat_.assign(static_cast<std::size_t>(sink_expected_), 0);
        sink_slots_ = build_sink_slots();
        sink_arrived_.assign(d_.fifos.size(), 0);
        sink_written_.assign(d_.fifos.size(), 0);
        frame_write_cycle_.assign(static_cast<std::size_t>(d_.frames), -1);
    }

    std::map<int, std::vector<std::int64_t>> build_sink_slots() {
        std::map<int, std::vector<std::int64_t>> slots;
        if (d_.sink_inst < 0) return slots;
        const Inst& sink = d_.inst(d_.sink_inst);
        if (sink.read_route.empty()) return slots;
        const auto& route = sink.read_route[0];
        for (std::size_t pos = 0; pos < route.size(); ++pos)
            slots[route[pos]].push_back(static_cast<std::int64_t>(pos));
        return slots;
    }

    // Committed arrivals landing on fifo f within the next k cycles.
    std::int64_t committed(const Fifo& f, std::int64_t t, std::int64_t k) const {
        const Inst& prod = d_.inst(f.producer);
        if (prod.kind == InstKind::Source) {
            if (f.src_prefix.empty()) return 0;
            auto clamp = [&](std::int64_t c) {
                return std::min<std::int64_t>(c, static_cast<std::int64_t>(f.src_prefix.size()) - 1);
            };
            return f.src_prefix[static_cast<std::size_t>(clamp(t + k + 1))] -
                   f.src_prefix[static_cast<std::size_t>(clamp(t + 1))];
        }
        const InstState& ps = insts_[static_cast<std::size_t>(f.producer)];
        if (!ps.nc.firing) return 0;
        std::int64_t g = ps.done;
        if (g >= static_cast<std::int64_t>(f.in_counts.size())) return 0;
        std::int64_t sum = 0;
        const auto& phases = f.in_counts[static_cast<std::size_t>(g)];
        for (std::int64_t j = ps.nc.phase;
             j < std::min<std::int64_t>(ps.nc.phase + k, static_cast<std::int64_t>(phases.size()));
             ++j)
            sum += phases[static_cast<std::size_t>(j)];
        return sum;
    }

    bool inst_ready(const Inst& inst, std::int64_t firing, std::int64_t t) const {
        if (firing >= inst.firings) return false;
        const InstState& st = insts_[static_cast<std::size_t>(inst.id)];
        for (std::size_t slot = 0; slot < inst.reads.size(); ++slot) {
            // Which fifos feed this firing, and with how many scalars per
            // phase: derived from the firing's route positions.
            std::int64_t per_firing = std::accumulate(inst.reads[slot].begin(),
                                                      inst.reads[slot].end(), std::int64_t{0});
            std::int64_t pos = firing * per_firing;
            std::map<int, std::vector<std::int64_t>> by_fifo; // fifo -> per-phase counts
            std::int64_t p_iter = 0;
            for (std::size_t p = 0; p < inst.reads[slot].size(); ++p) {
                for (std::int64_t k = 0; k < inst.reads[slot][p]; ++k, ++p_iter) {
                    int fid = inst.read_route[slot][static_cast<std::size_t>(pos + p_iter)];
                    auto& v = by_fifo[fid];
                    if (v.empty()) v.assign(inst.reads[slot].size(), 0);
                    v[p]++;
                }
            }
            // Readiness is evaluated at the start of the prospective firing's
            // first cycle; every earlier firing has drained its reads by
            // then, so `filled` holds exactly the unclaimed tokens.
            if (st.slot_pos[slot] != pos)
                throw SimFault(SimFault::Kind::Eval, inst.label, t,
                               "readiness checked mid-firing");
            for (const auto& [fid, phases] : by_fifo) {
                const FifoState& fs = fifos_[static_cast<std::size_t>(fid)];
                std::int64_t avail = fs.filled;
                if (opt_.mode == ReadinessMode::Conservative) {
                    std::int64_t total =
                        std::accumulate(phases.begin(), phases.end(), std::int64_t{0});
                    if (avail < total) return false;
                } else {
                    std::int64_t need = 0;
                    for (std::size_t k = 0; k < phases.size(); ++k) {
                        need += phases[k];
                        if (avail + committed(d_.fifo(fid), t, static_cast<std::int64_t>(k)) <
                            need)
                            return false;
                    }
                }
            }
        }
        return true;
    }

    void step(std::int64_t t) {
        idle_cycle_ = true;

        // Source emissions are visible in the same cycle they are scheduled.
        std::map<int, std::int64_t> src_added;
        for (std::size_t s = 0; s < d_.source_insts.size(); ++s) {
            const Inst& src = d_.inst(d_.source_insts[s]);
            if (static_cast<std::size_t>(t) >= src.source_sched.size()) continue;
            for (const auto& [fid, flat] : src.source_sched[static_cast<std::size_t>(t)]) {
                FifoState& fs = fifos_[static_cast<std::size_t>(fid)];
                fs.filled++;
                fs.written++;
                res_.written[static_cast<std::size_t>(fid)]++;
                src_added[fid]++;
                if (opt_.track_values)
                    fs.values.push_back(
                        wrap_width(source_values_[s][static_cast<std::size_t>(flat)], opt_.width));
                if (d_.fifo(fid).consumer == d_.sink_inst) note_sink_write(fid, t);
                idle_cycle_ = false;
            }
        }
        // Boundary occupancy after injection is bounded by the capacity.
        for (const auto& [fid, n] : src_added) {
            FifoState& fs = fifos_[static_cast<std::size_t>(fid)];
            res_.peak[static_cast<std::size_t>(fid)] =
                std::max(res_.peak[static_cast<std::size_t>(fid)], fs.filled);
            res_.max_write[static_cast<std::size_t>(fid)] =
                std::max(res_.max_write[static_cast<std::size_t>(fid)], n);
            const Fifo& fifo = d_.fifos[static_cast<std::size_t>(fid)];
            if (opt_.enforce_capacity && fifo.consumer != d_.sink_inst && fifo.capacity >= 0 &&
                fs.filled > fifo.capacity)
                throw SimFault(SimFault::Kind::Overflow, fifo.label, t,
                               "FIFO overflow on edge " + fifo.label + ": occupancy " +
                                   std::to_string(fs.filled) + " exceeds capacity " +
                                   std::to_string(fifo.capacity));
        }

        if (opt_.record_trace) record_trace(t);

        // Sink drain: everything registered by the previous cycle.
        {
            for (auto& [fid, slots] : sink_slots_) {
                FifoState& fs = fifos_[static_cast<std::size_t>(fid)];
                while (fs.filled > 0) {
                    fs.filled--;
                    fs.read++;
                    res_.read[static_cast<std::size_t>(fid)]++;
                    std::int64_t flat = slots[static_cast<std::size_t>(
                        sink_arrived_[static_cast<std::size_t>(fid)]++)];
                    if (opt_.track_values) {
                        out_flat_[static_cast<std::size_t>(flat)] = fs.values.front();
                        fs.values.pop_front();
                    }
                    sink_done_++;
                }
            }
        }

        // Phase A: next controller states from the cycle-start snapshot.
        std::vector<NodeControllerState> next(insts_.size());
        for (std::size_t i = 0; i < d_.insts.size(); ++i) {
            const Inst& inst = d_.insts[i];
            InstState& st = insts_[i];
            if (inst.kind == InstKind::Source || inst.kind == InstKind::Sink) continue;
            bool need_ready = !st.nc.firing || st.nc.phase + 1 >= inst.latency;
            std::int64_t next_firing = st.nc.firing ? st.done + 1 : st.done;
            bool ready = need_ready && inst_ready(inst, next_firing, t);
            next[i] = node_controller_step(st.nc, ready, inst.latency);
        }

        // Phase B: apply transitions and execute the firing phase.
        std::vector<std::pair<int, std::int64_t>> writes; // (fifo, value)
        for (std::size_t i = 0; i < d_.insts.size(); ++i) {
            const Inst& inst = d_.insts[i];
            InstState& st = insts_[i];
            if (inst.kind == InstKind::Source || inst.kind == InstKind::Sink) continue;
            bool was_firing = st.nc.firing;
            std::int64_t old_phase = st.nc.phase;
            if (was_firing && old_phase + 1 >= inst.latency) {
                st.done++; // the firing completes with this transition
            }
            st.nc = next[i];
            if (!st.nc.firing) continue;
            if (st.nc.phase == 0) {
                res_.firing_starts[i].push_back(t);
                for (auto& v : st.stash) v.clear();
                std::fill(st.consumed.begin(), st.consumed.end(), 0);
                for (auto& v : st.port_out) v.clear();
                std::fill(st.port_emit_pos.begin(), st.port_emit_pos.end(), 0);
                st.fold_seeded = false;
                st.elems_consumed = 0;
            }
            fire_phase(inst, st, st.nc.phase, t, writes);
            idle_cycle_ = false;
        }

        // End of cycle: registered writes land.
        std::map<int, std::int64_t> added;
        for (const auto& [fid, val] : writes) {
            FifoState& fs = fifos_[static_cast<std::size_t>(fid)];
            fs.filled++;
            fs.written++;
            res_.written[static_cast<std::size_t>(fid)]++;
            if (opt_.track_values) fs.values.push_back(val);
            added[fid]++;
            idle_cycle_ = false;
        }
        for (const auto& [fid, n] : added) {
            res_.max_write[static_cast<std::size_t>(fid)] =
                std::max(res_.max_write[static_cast<std::size_t>(fid)], n);
        }
        for (std::size_t f = 0; f < fifos_.size(); ++f) {
            FifoState& fs = fifos_[f];
            res_.peak[f] = std::max(res_.peak[f], fs.filled);
            const Fifo& fifo = d_.fifos[f];
            bool to_sink = fifo.consumer == d_.sink_inst;
            if (opt_.enforce_capacity && !to_sink && fifo.capacity >= 0 &&
                fs.filled > fifo.capacity)
                throw SimFault(SimFault::Kind::Overflow, fifo.label, t,
                               "FIFO overflow on edge " + fifo.label + ": occupancy " +
                                   std::to_string(fs.filled) + " exceeds capacity " +
                                   std::to_string(fifo.capacity));
            fs.reads_this_cycle = 0;
        }
        res_.cycles_run = t + 1;
    }

    void fire_phase(const Inst& inst, InstState& st, std::int64_t phase, std::int64_t t,
                    std::vector<std::pair<int, std::int64_t>>& writes) {
        // Consume this phase's scalars from every slot.
        std::vector<std::int64_t> consumed_now_count(inst.reads.size(), 0);
        for (std::size_t slot = 0; slot < inst.reads.size(); ++slot) {
            std::int64_t n = inst.reads[slot][static_cast<std::size_t>(phase)];
            consumed_now_count[slot] = n;
            for (std::int64_t k = 0; k < n; ++k) {
                int fid = inst.read_route[slot][static_cast<std::size_t>(st.slot_pos[slot]++)];
                FifoState& fs = fifos_[static_cast<std::size_t>(fid)];
                if (fs.filled <= 0)
                    throw SimFault(SimFault::Kind::Underflow, d_.fifo(fid).label, t,
                                   "FIFO underflow on edge " + d_.fifo(fid).label);
                fs.filled--;
                fs.read++;
                res_.read[static_cast<std::size_t>(fid)]++;
                if (opt_.track_values) {
                    st.stash[slot].push_back(fs.values.front());
                    fs.values.pop_front();
                }
            }
            st.consumed[slot] += n;
        }

        if (opt_.track_values) compute_values(inst, st, phase);

        // Emit this phase's scalars on every port.
        for (std::size_t port = 0; port < inst.port_writes.size(); ++port) {
            std::int64_t n = inst.port_writes[port][static_cast<std::size_t>(phase)];
            for (std::int64_t k = 0; k < n; ++k) {
                std::int64_t pos = st.port_pos[port]++;
                std::int64_t val = 0;
                if (opt_.track_values) {
                    auto& out = st.port_out[port];
                    if (st.port_emit_pos[port] >= static_cast<std::int64_t>(out.size()))
                        throw SimFault(SimFault::Kind::Eval, inst.label, t,
                                       "node emitted before its value was computed");
                    val = out[static_cast<std::size_t>(st.port_emit_pos[port]++)];
                } else {
                    st.port_emit_pos[port]++;
                }
                for (int fid : inst.write_route[port][static_cast<std::size_t>(pos)]) {
                    writes.push_back({fid, val});
                    if (d_.fifo(fid).consumer == d_.sink_inst) note_sink_write(fid, t);
                }
            }
        }
    }

    void compute_values(const Inst& inst, InstState& st, std::int64_t phase) {
        switch (inst.kind) {
            case InstKind::Def: {
                bool complete = true;
                for (std::size_t slot = 0; slot < inst.reads.size(); ++slot) {
                    std::int64_t total = std::accumulate(inst.reads[slot].begin(),
                                                         inst.reads[slot].end(), std::int64_t{0});
                    complete = complete && st.consumed[slot] == total;
                }
                if (complete && st.port_out[0].empty()) {
                    std::vector<Value> args;
                    for (std::size_t slot = 0; slot < inst.reads.size(); ++slot)
                        args.push_back(
                            Value::from_flat(inst.in_firing_shapes[slot], st.stash[slot]));
                    Value out = eval_.call(*inst.def, args);
                    st.port_out[0] = out.flatten();
                }
                break;
            }
            case InstKind::MapHof: {
                // Elementwise: transform the elements consumed this phase.
                Shape elem = inst.in_firing_shapes.back().element();
                std::int64_t es = elem.total_scalars();
                auto& stash = st.stash.back();
                while (static_cast<std::int64_t>(stash.size()) >= es && es > 0) {
                    std::vector<std::int64_t> one(stash.begin(), stash.begin() + es);
                    stash.erase(stash.begin(), stash.begin() + es);
                    Value ev = Value::from_flat(elem, one);
                    std::vector<Value> args;
                    if (inst.with_index) args.push_back(Value(st.elems_consumed));
                    args.push_back(ev);
                    Value out = eval_.apply_function(inst.context, inst.fn, args);
                    for (auto v : out.flatten()) st.port_out[0].push_back(v);
                    st.elems_consumed++;
                }
                (void)phase;
                break;
            }
            case InstKind::FoldHof: {
                Shape elem = inst.in_firing_shapes.back().element();
                std::int64_t es = elem.total_scalars();
                if (inst.hof == HofKind::Foldl && !st.fold_seeded &&
                    !st.stash[0].empty()) {
                    st.fold_acc = Value::from_flat(inst.in_firing_shapes[0], st.stash[0]);
                    st.stash[0].clear();
                    st.fold_seeded = true;
                }
                auto& stash = st.stash.back();
                while (static_cast<std::int64_t>(stash.size()) >= es && es > 0) {
                    std::vector<std::int64_t> one(stash.begin(), stash.begin() + es);
                    stash.erase(stash.begin(), stash.begin() + es);
                    Value ev = Value::from_flat(elem, one);
                    if (!st.fold_seeded) {
                        st.fold_acc = ev;
                        st.fold_seeded = true;
                    } else {
                        st.fold_acc = eval_.apply_function(inst.context, inst.fn,
                                                           {st.fold_acc, ev});
                    }
                }
                if (phase == inst.latency - 1 && st.port_out[0].empty())
                    st.port_out[0] = st.fold_acc.flatten();
                break;
            }
            case InstKind::Comb: {
                if (inst.pointwise) {
                    // Zip semantics: one scalar per input per application.
                    std::size_t n = st.stash.empty() ? 0 : st.stash[0].size();
                    for (const auto& s : st.stash) n = std::min(n, s.size());
                    for (std::size_t j = 0; j < n; ++j) {
                        std::map<std::string, Value> env;
                        for (std::size_t slot = 0; slot < st.stash.size(); ++slot)
                            env["$" + std::to_string(slot)] = Value(st.stash[slot][j]);
                        for (std::size_t port = 0; port < inst.templates.size(); ++port) {
                            Value out = eval_template(inst, port, env);
                            st.port_out[port].push_back(out.scalar());
                        }
                    }
                    for (auto& s : st.stash) s.erase(s.begin(), s.begin() + static_cast<long>(n));
                } else {
                    bool complete = true;
                    for (std::size_t slot = 0; slot < inst.reads.size(); ++slot) {
                        std::int64_t total =
                            std::accumulate(inst.reads[slot].begin(), inst.reads[slot].end(),
                                            std::int64_t{0});
                        complete = complete && st.consumed[slot] == total;
                    }
                    if (complete && (inst.templates.empty() || st.port_out[0].empty())) {
                        std::map<std::string, Value> env;
                        for (std::size_t slot = 0; slot < st.stash.size(); ++slot) {
                            // One firing's worth per slot.
                            Shape s = inst.in_firing_shapes[slot];
                            std::int64_t per =
                                std::accumulate(inst.reads[slot].begin(), inst.reads[slot].end(),
                                                std::int64_t{0});
                            Shape firing_shape = s;
                            if (per != s.total_scalars()) {
                                // Multiple firings per application: slice shape.
                                firing_shape = slice_shape(s, per);
                            }
                            env["$" + std::to_string(slot)] =
                                Value::from_flat(firing_shape, st.stash[slot]);
                        }
                        for (std::size_t port = 0; port < inst.templates.size(); ++port) {
                            Value out = eval_template(inst, port, env);
                            st.port_out[port] = out.flatten();
                        }
                    }
                }
                break;
            }
            default:
                break;
        }
    }

    static Shape slice_shape(const Shape& s, std::int64_t scalars) {
        // The leading dimension shrinks so that the slice holds `scalars`.
        if (s.is_scalar() || scalars == s.total_scalars()) return s;
        Shape elem = s.element();
        std::int64_t es = elem.total_scalars();
        if (es > 0 && scalars % es == 0) return Shape::vec(scalars / es, elem);
        return Shape::vec(scalars, Shape::scalar());
    }

    Value eval_template(const Inst& inst, std::size_t port, std::map<std::string, Value>& env) {
        // Templates are evaluated as a lambda application over the $ inputs.
        std::vector<std::string> params;
        std::vector<Value> args;
        for (const auto& [k, v] : env) {
            params.push_back(k);
            args.push_back(v);
        }
        ExprPtr lam = Expr::lambda(params, inst.templates[port]);
        if (params.empty()) {
            // Constant template.
            ExprPtr wrapped = Expr::lambda({"$unused"}, inst.templates[port]);
            return eval_.apply_function(inst.context, wrapped, {Value(std::int64_t{0})});
        }
        return eval_.apply_function(inst.context, lam, args);
    }

    void note_sink_write(int fid, std::int64_t t) {
        last_sink_write_ = std::max(last_sink_write_, t);
        auto it = sink_slots_.find(fid);
        if (it == sink_slots_.end()) return;
        std::int64_t n = sink_written_[static_cast<std::size_t>(fid)]++;
        std::int64_t flat = it->second[static_cast<std::size_t>(n)];
        std::int64_t frame = flat / std::max<std::int64_t>(d_.out_scalars_per_frame, 1);
        auto& cell = frame_write_cycle_[static_cast<std::size_t>(frame)];
        cell = std::max(cell, t);
    }

    void record_trace(std::int64_t t) {
        TraceRow row;
        row.cycle = t;
        row.nodes.reserve(insts_.size());
        for (const auto& st : insts_) row.nodes.push_back(st.nc);
        row.occupancy.reserve(fifos_.size());
        std::int64_t moved = 0;
        for (const auto& fs : fifos_) {
            row.occupancy.push_back(fs.filled);
            moved += fs.written + fs.read;
        }
        row.tokens_moved = moved;
        row.sink_arrivals = sink_done_;
        res_.trace.push_back(std::move(row));
    }

    std::string blocked_diagnosis() const {
        for (std::size_t i = 0; i < d_.insts.size(); ++i) {
            const Inst& inst = d_.insts[i];
            const InstState& st = insts_[i];
            if (inst.kind == InstKind::Source || inst.kind == InstKind::Sink) continue;
            if (!st.nc.firing && st.done < inst.firings) {
                for (std::size_t slot = 0; slot < inst.read_route.size(); ++slot) {
                    if (st.slot_pos[slot] <
                        static_cast<std::int64_t>(inst.read_route[slot].size())) {
                        int fid = inst.read_route[slot][static_cast<std::size_t>(
                            st.slot_pos[slot])];
                        return "node " + inst.label + " waiting on edge " + d_.fifo(fid).label;
                    }
                }
                return "node " + inst.label + " blocked";
            }
        }
        return "no blocked node found";
    }

    void finish(std::int64_t t) {
        res_.latency = last_sink_write_ + 1;
        res_.cycles_run = t + 1;
        res_.final_occupancy.clear();
        for (const auto& fs : fifos_) res_.final_occupancy.push_back(fs.filled);
        if (opt_.track_values)
            res_.output = Value::from_flat(
                frames_shape(), std::span<const std::int64_t>(out_flat_));
        // Per-frame completion: the last write cycle of each frame's output
        // span. Writes were attributed by flat position at drain time.
        compute_frame_latency();
    }

    Shape frames_shape() const {
        if (d_.frames == 1) return d_.out_shape;
        return Shape::vec(d_.frames, d_.out_shape);
    }

    void compute_frame_latency() {
        for (int f = 0; f < d_.frames; ++f)
            res_.frame_latency[static_cast<std::size_t>(f)] =
                frame_write_cycle_[static_cast<std::size_t>(f)] + 1;
    }

    std::vector<std::int64_t> frame_write_cycle_;
    std::vector<std::int64_t> sink_written_;
    const Program& prog_;
    const ExpandedDesign& d_;
    EngineOptions opt_;
    Evaluator eval_;

    std::vector<FifoState> fifos_;
    std::vector<InstState> insts_;
    std::vector<std::vector<std::int64_t>> source_values_;
    std::map<int, std::vector<std::int64_t>> sink_slots_;
    std::vector<std::int64_t> sink_arrived_;
    std::vector<std::int64_t> out_flat_;
    std::size_t source_horizon_ = 0;
    std::int64_t sink_expected_ = 0, sink_done_ = 0;
    std::int64_t last_sink_write_ = -1;
    bool idle_cycle_ = true;
    EngineResult res_;
};

} // namespace sdfap
