#pragma once

#include <set>
#include <sstream>
#include <string>

#include "sdfap/compiler.hpp"

namespace sdfap {

namespace detail {

inline std::string dot_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

inline void emit_inst(std::ostringstream& os, const Inst& inst, const std::string& indent) {
    std::string shape = "box";
    std::string label = inst.label;
    switch (inst.kind) {
        case InstKind::Source:
            shape = "ellipse";
            break;
        case InstKind::Sink:
            shape = "ellipse";
            break;
        case InstKind::Comb:
            shape = "oval";
            break;
        default: {
            std::string cp = inst.cp_display.empty() ? "?" : inst.cp_display.display();
            std::string pp = inst.pp_display.empty() ? "?" : inst.pp_display.display();
            label += "\\n" + cp + "/" + pp;
            break;
        }
    }
    os << indent << "n" << inst.id << " [shape=" << shape << ", label=\"" << dot_escape(label)
       << "\"];\n";
}

inline void emit_group(std::ostringstream& os, const ExpandedDesign& d, const GroupInfo& g,
                       std::string indent) {
    os << indent << "subgraph cluster_" << g.id << " {\n";
    os << indent << "  label=\"" << dot_escape(g.label + " " + g.pattern) << "\";\n";
    os << indent << "  style=rounded;\n";
    for (int i : g.insts) emit_inst(os, d.inst(i), indent + "  ");
    for (int sg : g.subgroups)
        emit_group(os, d, d.groups[static_cast<std::size_t>(sg)], indent + "  ");
    os << indent << "}\n";
}

} // namespace detail

// Graphviz rendering of the expanded design: SDF-AP node instances as boxes
// labeled with their consumption/production patterns, HoF groups as nested
// clusters, one edge per FIFO.
inline std::string emit_dot(const CompiledDesign& c) {
    const ExpandedDesign& d = c.design;
    std::ostringstream os;
    os << "digraph sdfap {\n  rankdir=LR;\n  node [fontsize=10];\n";
    for (int g : d.top_groups)
        detail::emit_group(os, d, d.groups[static_cast<std::size_t>(g)], "  ");
    for (int i : d.loose_insts) detail::emit_inst(os, d.inst(i), "  ");
    for (int s : d.source_insts) detail::emit_inst(os, d.inst(s), "  ");
    if (d.sink_inst >= 0) detail::emit_inst(os, d.inst(d.sink_inst), "  ");

    // One edge per fifo, labeled by the logical edge's patterns.
    for (const Fifo& f : d.fifos) {
        os << "  n" << f.producer << " -> n" << f.consumer;
        std::string label;
        if (f.edge_tag >= 0) {
            const EdgeCatalogEntry& e = d.edge_catalog[static_cast<std::size_t>(f.edge_tag)];
            if (e.pp) label += e.pp->display();
            label += "/";
            if (e.cp) label += e.cp->display();
            if (label == "/") label.clear();
        }
        if (f.capacity >= 0) {
            if (!label.empty()) label += " ";
            label += "cap=" + std::to_string(f.capacity);
        }
        if (!label.empty()) os << " [label=\"" << detail::dot_escape(label) << "\", fontsize=9]";
        os << ";\n";
    }
    os << "}\n";
    return os.str();
}

} // namespace sdfap
