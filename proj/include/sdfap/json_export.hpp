#pragma once

#include <functional>
#include <string>

#include "sdfap/compiler.hpp"
#include "sdfap/engine.hpp"

#include <nlohmann/json.hpp>

namespace sdfap {

using ordered_json = nlohmann::ordered_json;

inline ordered_json value_to_json(const Value& v) {
    if (v.is_scalar()) return v.scalar();
    ordered_json a = ordered_json::array();
    for (const auto& e : v.elems()) a.push_back(value_to_json(e));
    return a;
}

inline Value value_from_json(const nlohmann::json& j) {
    if (j.is_number_integer()) return Value(j.get<std::int64_t>());
    if (j.is_array()) {
        std::vector<Value> elems;
        for (const auto& e : j) elems.push_back(value_from_json(e));
        return Value(std::move(elems));
    }
    throw EvalError("values must be integers or nested arrays of integers");
}

// Graph export: nodes, logical edges with patterns/capacities/reshapes, the
// physical fifos, and the HoF hierarchy. Schema in docs/graph-schema.md.
inline ordered_json graph_json(const CompiledDesign& c) {
    const ExpandedDesign& d = c.design;
    ordered_json j;
    j["entry"] = c.entry;
    j["mode"] = to_string(c.mode);
    j["input_shapes"] = ordered_json::array();
    for (const auto& s : c.input_shapes) j["input_shapes"].push_back(s.str());
    j["output_shape"] = d.out_shape.str();

    j["nodes"] = ordered_json::array();
    for (const Inst& i : d.insts) {
        ordered_json n;
        n["id"] = i.id;
        n["label"] = i.label;
        n["kind"] = to_string(i.kind);
        n["latency"] = i.latency;
        n["firings"] = i.firings;
        if (!i.cp_display.empty()) n["cp"] = i.cp_display.display();
        if (!i.pp_display.empty()) n["pp"] = i.pp_display.display();
        j["nodes"].push_back(std::move(n));
    }

    j["edges"] = ordered_json::array();
    for (const EdgeCatalogEntry& e : d.edge_catalog) {
        FifoSpec spec = derive_fifo(d, e);
        ordered_json je;
        je["from"] = e.from;
        je["to"] = e.to;
        if (e.pp) je["pp"] = e.pp->display();
        if (e.cp) je["cp"] = e.cp->display();
        je["value_shape"] = e.value_shape.str();
        je["capacity"] = spec.capacity;
        je["write_widths"] = spec.write_widths;
        je["read_widths"] = spec.read_widths;
        if (!spec.reshape.write_widths.empty()) {
            je["reshape"] = spec.reshape.str();
            je["reshape_identity"] = spec.reshape.identity;
        }
        ordered_json fifos = ordered_json::array();
        for (const Fifo& f : d.fifos)
            if (f.edge_tag == e.tag) fifos.push_back(f.id);
        je["fifos"] = std::move(fifos);
        j["edges"].push_back(std::move(je));
    }

    j["fifos"] = ordered_json::array();
    for (const Fifo& f : d.fifos) {
        ordered_json jf;
        jf["id"] = f.id;
        jf["edge"] = f.label;
        jf["producer"] = f.producer;
        jf["consumer"] = f.consumer;
        jf["capacity"] = f.capacity;
        jf["buffer"] = fifo_is_buffer(d, f);
        jf["scalars_per_run"] = f.total;
        j["fifos"].push_back(std::move(jf));
    }

    std::function<ordered_json(const GroupInfo&)> group_json = [&](const GroupInfo& g) {
        ordered_json jg;
        jg["label"] = g.label;
        jg["pattern"] = g.pattern;
        jg["nodes"] = g.insts;
        jg["children"] = ordered_json::array();
        for (int sg : g.subgroups)
            jg["children"].push_back(group_json(d.groups[static_cast<std::size_t>(sg)]));
        return jg;
    };
    j["hierarchy"] = ordered_json::array();
    for (int g : d.top_groups)
        j["hierarchy"].push_back(group_json(d.groups[static_cast<std::size_t>(g)]));
    return j;
}

// Trace export: one JSON object per cycle (JSON-lines).
inline std::string trace_jsonl(const CompiledDesign& c, const EngineResult& r) {
    std::string out;
    for (const auto& row : r.trace) {
        ordered_json j;
        j["cycle"] = row.cycle;
        ordered_json nodes = ordered_json::array();
        for (std::size_t i = 0; i < row.nodes.size(); ++i) {
            const Inst& inst = c.design.insts[i];
            if (inst.kind == InstKind::Source || inst.kind == InstKind::Sink) continue;
            ordered_json n;
            n["id"] = inst.id;
            n["label"] = inst.label;
            n["state"] = row.nodes[i].firing ? "Firing" : "Idle";
            if (row.nodes[i].firing) n["phase"] = row.nodes[i].phase;
            nodes.push_back(std::move(n));
        }
        j["nodes"] = std::move(nodes);
        ordered_json fifos = ordered_json::array();
        for (std::size_t f = 0; f < row.occupancy.size(); ++f) {
            ordered_json jf;
            jf["id"] = c.design.fifos[f].id;
            jf["occupancy"] = row.occupancy[f];
            fifos.push_back(std::move(jf));
        }
        j["fifos"] = std::move(fifos);
        j["tokens_moved"] = row.tokens_moved;
        j["sink_arrivals"] = row.sink_arrivals;
        out += j.dump() + "\n";
    }
    return out;
}

} // namespace sdfap
