//! DOT export for nets, persistent processes, and state graphs. Persistent
//! places get a double border, marked places a dotted style with their
//! token count.

use std::fmt::Write as _;

use crate::net::{Count, OccurrenceNet, PNet};
use crate::process::PersistentProcess;
use crate::semantics::{PState, StateGraph};

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn place_attrs(persistent: bool, count: Option<Count>) -> String {
    let mut attrs = vec![String::from("shape=circle")];
    if persistent {
        attrs.push("peripheries=2".into());
    }
    match count {
        None | Some(Count::Finite(0)) => {}
        Some(c) => {
            attrs.push("style=dotted".into());
            attrs.push(format!("xlabel={}", quote(&c.to_string())));
        }
    }
    attrs.join(", ")
}

pub fn write_occurrence(net: &OccurrenceNet) -> String {
    let mut out = String::from("digraph occurrence_net {\n  rankdir=TB;\n");
    for p in net.places() {
        let count = net.initial().contains(p).then_some(Count::Finite(1));
        let _ = writeln!(out, "  {} [{}];", quote(p.as_str()), place_attrs(false, count));
    }
    for t in net.transitions() {
        let _ = writeln!(out, "  {} [shape=box];", quote(t.as_str()));
    }
    for (src, dst) in net.arcs() {
        let _ = writeln!(out, "  {} -> {};", quote(src.as_str()), quote(dst.as_str()));
    }
    out.push_str("}\n");
    out
}

pub fn write_pnet(net: &PNet) -> String {
    let mut out = String::from("digraph pnet {\n  rankdir=TB;\n");
    for p in net.regular() {
        let count = Some(net.initial().count(p));
        let _ = writeln!(out, "  {} [{}];", quote(p.as_str()), place_attrs(false, count));
    }
    for p in net.persistent() {
        let count = Some(net.initial().count(p));
        let _ = writeln!(out, "  {} [{}];", quote(p.as_str()), place_attrs(true, count));
    }
    for (t, _) in net.transitions() {
        let _ = writeln!(out, "  {} [shape=box];", quote(t.as_str()));
    }
    for (t, tr) in net.transitions() {
        for p in &tr.preset {
            let _ = writeln!(out, "  {} -> {};", quote(p.as_str()), quote(t.as_str()));
        }
        for (p, _) in tr.postset.iter() {
            let _ = writeln!(out, "  {} -> {};", quote(t.as_str()), quote(p.as_str()));
        }
    }
    out.push_str("}\n");
    out
}

pub fn write_process(proc: &PersistentProcess) -> String {
    let mut out = String::from("digraph persistent_process {\n  rankdir=TB;\n");
    for p in &proc.places {
        let persistent = proc.persistent.contains(p);
        let count = Some(proc.initial.count(p));
        let _ = writeln!(
            out,
            "  {} [{}];",
            quote(p.as_str()),
            place_attrs(persistent, count)
        );
    }
    for t in &proc.transitions {
        let _ = writeln!(out, "  {} [shape=box];", quote(t.as_str()));
    }
    for t in &proc.transitions {
        for p in &proc.preset[t] {
            let _ = writeln!(out, "  {} -> {};", quote(p.as_str()), quote(t.as_str()));
        }
        for p in &proc.postset[t] {
            let _ = writeln!(out, "  {} -> {};", quote(t.as_str()), quote(p.as_str()));
        }
    }
    out.push_str("}\n");
    out
}

pub fn write_state_graph(graph: &StateGraph<PState>) -> String {
    let mut out = String::from("digraph state_graph {\n  rankdir=LR;\n");
    for (i, state) in graph.states.iter().enumerate() {
        let shape = if graph.edges[i].is_empty() {
            "doubleoctagon"
        } else {
            "ellipse"
        };
        let _ = writeln!(
            out,
            "  s{i} [shape={shape}, label={}];",
            quote(&state.bag.render())
        );
    }
    for (i, edges) in graph.edges.iter().enumerate() {
        for (label, j) in edges {
            let _ = writeln!(out, "  s{i} -> s{j} [label={}];", quote(label.as_str()));
        }
    }
    out.push_str("}\n");
    out
}

/// A quick structural summary, used by tests: node name to (kind, marked).
pub fn summarize(dot: &str) -> Vec<(String, bool)> {
    dot.lines()
        .filter_map(|line| {
            let line = line.trim();
            let name = line.strip_prefix('"')?.split('"').next()?;
            Some((name.to_string(), line.contains("peripheries=2")))
        })
        .collect()
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::Compilation;
    use crate::fixtures;
    use crate::process::enumerate_maximal_processes;
    use crate::semantics::{explore, DEFAULT_STATE_BUDGET};

    #[test]
    fn pruned_net_export_shape() {
        let c = Compilation::compile(&fixtures::asymmetric_confusion()).unwrap();
        let dot = write_pnet(&c.pruned);
        assert!(dot.starts_with("digraph pnet {"));
        // Negative places are double-bordered, the marked input is dotted.
        assert!(dot.contains("\"neg:3\" [shape=circle, peripheries=2"));
        assert!(dot.contains("\"1\" [shape=circle, style=dotted"));
        assert!(dot.contains("\"tx:1/a\" [shape=box]"));
        assert!(dot.contains("\"1\" -> \"tx:1/a\";"));
    }

    #[test]
    fn empty_net_gives_empty_digraph() {
        let empty = OccurrenceNet::new();
        let dot = write_occurrence(&empty);
        assert_eq!(dot, "digraph occurrence_net {\n  rankdir=TB;\n}\n");
    }

    #[test]
    fn process_export_marks_persistent_places() {
        let c = Compilation::compile(&fixtures::or_causes()).unwrap();
        let procs = enumerate_maximal_processes(&c.pruned, DEFAULT_STATE_BUDGET).unwrap();
        let proc = procs
            .iter()
            .find(|p| p.transitions.contains(&crate::net::NodeId::from("tx:2/b")))
            .unwrap();
        let dot = write_process(proc);
        assert!(dot.contains("peripheries=2"));
        assert!(dot.contains("\"tx:2/b\" [shape=box]"));
    }

    #[test]
    fn state_graph_export_is_deterministic() {
        let c = Compilation::compile(&fixtures::asymmetric_confusion()).unwrap();
        let g1 = explore(&c.pruned, DEFAULT_STATE_BUDGET).unwrap();
        let g2 = explore(&c.pruned, DEFAULT_STATE_BUDGET).unwrap();
        assert_eq!(write_state_graph(&g1), write_state_graph(&g2));
        assert!(write_state_graph(&g1).contains("doubleoctagon"));
    }
}
