//! Independent branching-cell semantics over the prime event structure, and
//! the correspondence certificate against the compiled net.
//!
//! Everything here works on the PES alone; the only bridge to the compiler
//! is the `dec` map from compiled transitions to event sets.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::time::Instant;

use serde_json::json;

use crate::encode::Compilation;
use crate::net::{NodeId, NodeSet};
use crate::process;
use crate::report::CertReport;
use crate::semantics::{self, PState, SemanticsError};
use crate::structure::Pes;

/// A configuration of the PES with its standing in the branching-cell
/// semantics.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Configuration {
    pub events: NodeSet,
    pub stopped: bool,
    pub recursively_stopped: bool,
    pub maximal: bool,
}

/// A decomposition of a recursively stopped configuration: the successive
/// increments, each a stopped configuration of the previous future.
pub type Decomposition = Vec<NodeSet>;

/// All downward-closed, immediate-conflict-closed event sets.
pub fn stopping_prefixes(pes: &Pes) -> Vec<NodeSet> {
    let im = pes.immediate_conflicts();
    let mut out: BTreeSet<NodeSet> = [NodeSet::new()].into_iter().collect();
    let mut frontier: Vec<NodeSet> = vec![NodeSet::new()];
    while let Some(current) = frontier.pop() {
        for e in pes.events.difference(&current) {
            let mut next = current.clone();
            // Close under causes and immediate conflicts.
            let mut todo = vec![e.clone()];
            while let Some(x) = todo.pop() {
                if next.insert(x.clone()) {
                    for c in pes.causes(&x) {
                        todo.push(c);
                    }
                    for (a, b) in &im {
                        if *a == x {
                            todo.push(b.clone());
                        }
                    }
                }
            }
            if out.insert(next.clone()) {
                frontier.push(next);
            }
        }
    }
    out.into_iter().collect()
}

/// Minimal nonempty stopping prefixes: the initial branching cells.
pub fn initial_stopping_prefixes(pes: &Pes) -> Vec<NodeSet> {
    let all = stopping_prefixes(pes);
    all.iter()
        .filter(|b| !b.is_empty())
        .filter(|b| {
            !all.iter()
                .any(|c| !c.is_empty() && *c != **b && c.is_subset(b))
        })
        .cloned()
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum AbError {
    #[error("{0:?} is not a configuration (not downward closed and conflict-free)")]
    NotAConfiguration(NodeSet),
    #[error("transition {0} does not belong to this compilation")]
    ForeignTransition(NodeId),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}

/// The event structure left after executing a configuration: the remaining
/// events compatible with it.
pub fn future(pes: &Pes, v: &NodeSet) -> Result<Pes, AbError> {
    if !pes.is_configuration(v) {
        return Err(AbError::NotAConfiguration(v.clone()));
    }
    let keep: NodeSet = pes
        .events
        .difference(v)
        .filter(|e| v.iter().all(|x| !pes.in_conflict(e, x)))
        .cloned()
        .collect();
    Ok(pes.restrict(&keep))
}

/// Maximal configurations of a PES.
pub fn maximal_configurations(pes: &Pes) -> Vec<NodeSet> {
    let mut out: BTreeSet<NodeSet> = BTreeSet::new();
    let mut seen: BTreeSet<NodeSet> = BTreeSet::new();
    let mut stack: Vec<NodeSet> = vec![NodeSet::new()];
    while let Some(current) = stack.pop() {
        if !seen.insert(current.clone()) {
            continue;
        }
        let extensions: Vec<NodeId> = pes
            .events
            .iter()
            .filter(|e| {
                !current.contains(*e)
                    && pes.causes(e).iter().all(|c| c == *e || current.contains(c))
                    && current.iter().all(|x| !pes.in_conflict(e, x))
            })
            .cloned()
            .collect();
        if extensions.is_empty() {
            out.insert(current);
        } else {
            for e in extensions {
                let mut next = current.clone();
                next.insert(e);
                stack.push(next);
            }
        }
    }
    out.into_iter().collect()
}

/// Decomposition steps of the branching-cell semantics: the maximal
/// configurations of the initial stopping prefixes. One choice is resolved
/// in full per step; coarser stopped configurations decompose into these.
pub fn cell_stopped_configurations(pes: &Pes) -> Vec<NodeSet> {
    let mut out: BTreeSet<NodeSet> = BTreeSet::new();
    for prefix in initial_stopping_prefixes(pes) {
        let restricted = pes.restrict(&prefix);
        for v in maximal_configurations(&restricted) {
            out.insert(v);
        }
    }
    out.into_iter().collect()
}

/// A configuration is stopped when it is maximal in some stopping prefix.
/// It suffices to test the smallest stopping prefix containing it: its
/// closure under causes and immediate conflicts.
pub fn is_stopped_configuration(pes: &Pes, v: &NodeSet) -> bool {
    if v.is_empty() || !pes.is_configuration(v) {
        return false;
    }
    let im = pes.immediate_conflicts();
    let mut closure = NodeSet::new();
    let mut todo: Vec<NodeId> = v.iter().cloned().collect();
    while let Some(x) = todo.pop() {
        if closure.insert(x.clone()) {
            for c in pes.causes(&x) {
                todo.push(c);
            }
            for (a, b) in &im {
                if *a == x {
                    todo.push(b.clone());
                }
            }
        }
    }
    let restricted = pes.restrict(&closure);
    // Maximal within the prefix: no compatible extension event remains.
    restricted.events.iter().all(|e| {
        v.contains(e)
            || !restricted
                .causes(e)
                .iter()
                .all(|c| c == e || v.contains(c))
            || v.iter().any(|x| restricted.in_conflict(e, x))
    })
}

/// Exhaustive enumeration of the recursively stopped configurations, each
/// with all of its branching-cell decompositions.
pub fn recursively_stopped(pes: &Pes) -> Vec<(Configuration, Vec<Decomposition>)> {
    // Memoized over futures: decompositions continue from what remains.
    fn go(pes: &Pes, memo: &mut BTreeMap<NodeSet, Vec<Decomposition>>) -> Vec<Decomposition> {
        let key = pes.events.clone();
        if let Some(done) = memo.get(&key) {
            return done.clone();
        }
        // The empty decomposition is always available.
        let mut out: Vec<Decomposition> = vec![Vec::new()];
        for step in cell_stopped_configurations(pes) {
            let next = future(pes, &step).expect("stopped configurations are configurations");
            for rest in go(&next, memo) {
                let mut chain = vec![step.clone()];
                chain.extend(rest);
                out.push(chain);
            }
        }
        out.sort();
        out.dedup();
        memo.insert(key, out.clone());
        out
    }

    let mut memo = BTreeMap::new();
    let chains = go(pes, &mut memo);
    let mut by_config: BTreeMap<NodeSet, Vec<Decomposition>> = BTreeMap::new();
    for chain in chains {
        let union: NodeSet = chain.iter().flatten().cloned().collect();
        by_config.entry(union).or_default().push(chain);
    }
    let maximal = maximal_configurations(pes);
    by_config
        .into_iter()
        .map(|(events, decompositions)| {
            (
                Configuration {
                    stopped: is_stopped_configuration(pes, &events),
                    recursively_stopped: true,
                    maximal: maximal.contains(&events),
                    events,
                },
                decompositions,
            )
        })
        .collect()
}

/// Events of the source net encoded by a compiled transition: the
/// transaction's events for transaction transitions, nothing for negative
/// propagations.
pub fn dec(compilation: &Compilation, t: &NodeId) -> Result<NodeSet, AbError> {
    if let Some(info) = compilation.tx_info.get(t) {
        return Ok(info.events.clone());
    }
    if compilation.prop_names.contains(t) {
        return Ok(NodeSet::new());
    }
    Err(AbError::ForeignTransition(t.clone()))
}

/// Certifies the correspondence between the compiled net and the
/// branching-cell semantics of the source event structure:
///
/// 1. net-to-cells: along every run of the flat net, each observable step
///    is a stopped configuration of the current future, and every
///    projected configuration reached is recursively stopped — runs
///    project to valid decompositions;
/// 2. cells-to-net: every recursively stopped configuration reachable by
///    maximal behavior is realized by some firing sequence (transactions
///    fire atomically, so a single net step may cover several branching
///    cells of a decomposition);
/// 3. maximal recursively stopped configurations are in bijection with the
///    maximal processes, through the event map.
pub fn check_correspondence(
    compilation: &Compilation,
    budget: usize,
) -> Result<CertReport, AbError> {
    let start = Instant::now();
    let pes = crate::structure::to_pes(&compilation.source);
    let net = &compilation.flat;
    let mut states_explored = 0usize;

    let all = recursively_stopped(&pes);
    let r_stopped: BTreeSet<NodeSet> = all.iter().map(|(c, _)| c.events.clone()).collect();

    // Futures are memoized by remaining-event set.
    let mut future_cache: BTreeMap<NodeSet, Pes> = BTreeMap::new();

    // Direction one: walk every reachable (state, configuration) pair and
    // demand each observable step be a stopped configuration of the
    // current future, with a recursively stopped union.
    let mut seen: BTreeSet<(String, NodeSet)> = BTreeSet::new();
    let initial = (PState::initial(net), NodeSet::new());
    let key = |s: &PState, v: &NodeSet| (format!("{:?}|{:?}", s.bag, s.fired), v.clone());
    let mut stack = vec![initial];
    seen.insert(key(&stack[0].0, &stack[0].1));
    while let Some((state, v)) = stack.pop() {
        states_explored += 1;
        if states_explored > budget {
            return Err(SemanticsError::BudgetExceeded {
                budget,
                frontier: stack.len(),
            }
            .into());
        }
        let here = future_cache
            .entry(v.clone())
            .or_insert_with(|| future(&pes, &v).expect("reached configurations are valid"))
            .clone();
        for t in semantics::enabled(net, &state) {
            let step = dec(compilation, &t)?;
            let next_v = if step.is_empty() {
                v.clone()
            } else {
                if !is_stopped_configuration(&here, &step) {
                    return Ok(CertReport::fail(
                        "ab-correspondence",
                        json!({
                            "direction": "net-to-cells",
                            "configuration": v,
                            "transition": t,
                            "events": step,
                            "reason": "not a stopped configuration of the future",
                        }),
                        states_explored,
                        start.elapsed().as_millis(),
                    ));
                }
                let union: NodeSet = v.union(&step).cloned().collect();
                if !r_stopped.contains(&union) {
                    return Ok(CertReport::fail(
                        "ab-correspondence",
                        json!({
                            "direction": "net-to-cells",
                            "configuration": union,
                            "transition": t,
                            "reason": "reached configuration is not recursively stopped",
                        }),
                        states_explored,
                        start.elapsed().as_millis(),
                    ));
                }
                union
            };
            let next_state = semantics::fire(net, &state, &t).expect("enabled");
            let k = key(&next_state, &next_v);
            if !seen.contains(&k) {
                seen.insert(k);
                stack.push((next_state, next_v));
            }
        }
    }

    // Direction two: every maximal recursively stopped configuration is
    // realized by some run.
    for (config, _) in all.iter().filter(|(c, _)| c.maximal) {
        if realize_configuration(compilation, net, &config.events, budget)?.is_none() {
            return Ok(CertReport::fail(
                "ab-correspondence",
                json!({
                    "direction": "cells-to-net",
                    "configuration": config.events,
                    "reason": "no firing sequence realizes this configuration",
                }),
                states_explored,
                start.elapsed().as_millis(),
            ));
        }
    }

    // Bijection on maximal behaviors.
    let max_configs: BTreeSet<NodeSet> = all
        .iter()
        .filter(|(c, _)| c.maximal)
        .map(|(c, _)| c.events.clone())
        .collect();
    let procs = process::enumerate_maximal_processes(&compilation.pruned, budget)?;
    let mut proc_events: Vec<NodeSet> = Vec::new();
    for p in &procs {
        let mut events = NodeSet::new();
        for t in &p.transitions {
            events.extend(dec(compilation, t)?);
        }
        proc_events.push(events);
    }
    let distinct: BTreeSet<NodeSet> = proc_events.iter().cloned().collect();
    if distinct.len() != proc_events.len() || distinct != max_configs {
        return Ok(CertReport::fail(
            "ab-correspondence",
            json!({
                "direction": "maximal-bijection",
                "process_events": proc_events,
                "maximal_configurations": max_configs,
            }),
            states_explored,
            start.elapsed().as_millis(),
        ));
    }

    Ok(CertReport::pass(
        "ab-correspondence",
        states_explored,
        start.elapsed().as_millis(),
    ))
}

/// Searches for a run whose projected configuration is exactly the target,
/// firing silent transitions freely and observable steps inside the target.
pub fn realize_configuration(
    compilation: &Compilation,
    net: &crate::net::PNet,
    target: &NodeSet,
    budget: usize,
) -> Result<Option<Vec<NodeId>>, AbError> {
    let mut visited = 0usize;
    let mut stack: Vec<(PState, NodeSet, Vec<NodeId>)> =
        vec![(PState::initial(net), NodeSet::new(), Vec::new())];
    let mut seen: BTreeSet<(String, NodeSet)> = BTreeSet::new();
    while let Some((state, covered, trace)) = stack.pop() {
        if covered == *target {
            return Ok(Some(trace));
        }
        let k = (format!("{:?}|{:?}", state.bag, state.fired), covered.clone());
        if !seen.insert(k) {
            continue;
        }
        visited += 1;
        if visited > budget {
            return Err(SemanticsError::BudgetExceeded {
                budget,
                frontier: stack.len(),
            }
            .into());
        }
        for t in semantics::enabled(net, &state) {
            let step = dec(compilation, &t)?;
            if !step.is_empty() && (!step.is_subset(target) || !step.is_disjoint(&covered)) {
                continue;
            }
            let mut next_trace = trace.clone();
            next_trace.push(t.clone());
            let next = semantics::fire(net, &state, &t).expect("enabled");
            stack.push((next, covered.union(&step).cloned().collect(), next_trace));
        }
    }
    Ok(None)
}

/// Searches for a run whose observable projection is exactly the given
/// decomposition: silent transitions may fire at will between steps.
pub fn realize(
    compilation: &Compilation,
    net: &crate::net::PNet,
    decomposition: &[NodeSet],
    budget: usize,
) -> Result<Option<Vec<NodeId>>, AbError> {
    let mut visited = 0usize;
    let mut stack: Vec<(PState, usize, Vec<NodeId>)> =
        vec![(PState::initial(net), 0, Vec::new())];
    let mut seen: BTreeSet<(String, usize)> = BTreeSet::new();
    while let Some((state, done, trace)) = stack.pop() {
        if done == decomposition.len() {
            return Ok(Some(trace));
        }
        let k = (format!("{:?}|{:?}", state.bag, state.fired), done);
        if !seen.insert(k) {
            continue;
        }
        visited += 1;
        if visited > budget {
            return Err(SemanticsError::BudgetExceeded {
                budget,
                frontier: stack.len(),
            }
            .into());
        }
        for t in semantics::enabled(net, &state) {
            let step = dec(compilation, &t)?;
            let next_done = if step.is_empty() {
                done
            } else if step == decomposition[done] {
                done + 1
            } else {
                continue;
            };
            let mut next_trace = trace.clone();
            next_trace.push(t.clone());
            let next = semantics::fire(net, &state, &t).expect("enabled");
            stack.push((next, next_done, next_trace));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::net::node_set;
    use crate::structure::to_pes;

    fn pes_of(net: &crate::net::OccurrenceNet) -> Pes {
        to_pes(net)
    }

    #[test]
    fn stopping_prefixes_of_asymmetric_confusion() {
        let pes = pes_of(&fixtures::asymmetric_confusion());
        let prefixes = stopping_prefixes(&pes);
        assert!(prefixes.contains(&node_set(["a", "d"])));
        assert!(prefixes.contains(&NodeSet::new()));
        assert!(prefixes.contains(&pes.events));
        assert!(!prefixes.contains(&node_set(["b"])));
        assert_eq!(initial_stopping_prefixes(&pes), vec![node_set(["a", "d"])]);
    }

    #[test]
    fn initial_prefixes_of_or_causes() {
        let pes = pes_of(&fixtures::or_causes());
        let initial = initial_stopping_prefixes(&pes);
        assert_eq!(initial, vec![node_set(["a", "d"]), node_set(["e", "f"])]);
    }

    #[test]
    fn conflict_free_pes_has_singleton_initial_prefixes() {
        let net = crate::net::OccurrenceNet::build(
            [
                ("t", ["p"].as_slice(), ["q"].as_slice()),
                ("u", ["r"].as_slice(), ["s"].as_slice()),
            ],
            &[],
        );
        let pes = pes_of(&net);
        assert_eq!(
            initial_stopping_prefixes(&pes),
            vec![node_set(["t"]), node_set(["u"])]
        );
    }

    #[test]
    fn futures_of_or_causes() {
        let pes = pes_of(&fixtures::or_causes());
        let after_a = future(&pes, &node_set(["a"])).unwrap();
        assert_eq!(after_a.events, node_set(["b", "c", "e", "f", "g"]));
        let after_ae = future(&pes, &node_set(["a", "e"])).unwrap();
        assert_eq!(after_ae.events, node_set(["b", "c", "g"]));
        assert_eq!(
            initial_stopping_prefixes(&after_ae),
            vec![node_set(["b", "c", "g"])]
        );
        let after_d = future(&pes, &node_set(["d"])).unwrap();
        assert_eq!(after_d.events, node_set(["b", "e", "f", "g"]));
        assert_eq!(
            initial_stopping_prefixes(&after_d),
            vec![node_set(["b"]), node_set(["e", "f"])]
        );
        let empty_future = future(&pes, &NodeSet::new()).unwrap();
        assert_eq!(empty_future, pes);
    }

    #[test]
    fn future_rejects_non_configurations() {
        let pes = pes_of(&fixtures::asymmetric_confusion());
        assert!(future(&pes, &node_set(["a", "d"])).is_err());
        assert!(future(&pes, &node_set(["c"])).is_err());
    }

    #[test]
    fn futures_compose_on_fixtures() {
        for (_, net) in fixtures::all() {
            let pes = pes_of(&net);
            for (config, _) in recursively_stopped(&pes) {
                let v = config.events;
                let f1 = future(&pes, &v).unwrap();
                for w in maximal_configurations(&f1) {
                    let direct: NodeSet = v.union(&w).cloned().collect();
                    if pes.is_configuration(&direct) {
                        let via = future(&f1, &w).unwrap();
                        let whole = future(&pes, &direct).unwrap();
                        assert_eq!(via, whole);
                    }
                }
            }
        }
    }

    #[test]
    fn recursively_stopped_configurations_of_or_causes() {
        let pes = pes_of(&fixtures::or_causes());
        let all = recursively_stopped(&pes);
        let find = |events: &NodeSet| all.iter().find(|(c, _)| c.events == *events);

        let v = node_set(["a", "b", "e", "g"]);
        let (config, decompositions) = find(&v).expect("recursively stopped");
        assert!(config.maximal);
        assert!(decompositions.contains(&vec![
            node_set(["a"]),
            node_set(["e"]),
            node_set(["b", "g"])
        ]));

        assert!(find(&node_set(["a", "b", "e"])).is_none());
        let (empty, chains) = find(&NodeSet::new()).expect("empty is recursively stopped");
        assert!(!empty.maximal);
        assert!(chains.contains(&Vec::new()));
    }

    #[test]
    fn every_cell_stopped_configuration_is_recursively_stopped_with_unit_chain() {
        for (_, net) in fixtures::all() {
            let pes = pes_of(&net);
            let rs = recursively_stopped(&pes);
            for v in cell_stopped_configurations(&pes) {
                let entry = rs.iter().find(|(c, _)| c.events == v);
                let (config, decompositions) =
                    entry.expect("stopped must be recursively stopped");
                assert!(config.stopped);
                assert!(decompositions.iter().any(|d| d.len() == 1));
            }
        }
    }

    #[test]
    fn stopped_predicate_accepts_transaction_shaped_steps() {
        // A joint transaction is stopped even though it spans two branching
        // cells of the dynamic decomposition.
        let pes = pes_of(&fixtures::sequential_cells());
        assert!(is_stopped_configuration(&pes, &node_set(["b", "c"])));
        assert!(is_stopped_configuration(&pes, &node_set(["a"])));
        assert!(is_stopped_configuration(&pes, &node_set(["b"])));
        assert!(!is_stopped_configuration(&pes, &node_set(["c"])));
        assert!(!is_stopped_configuration(&pes, &NodeSet::new()));
    }

    #[test]
    fn maximal_recursively_stopped_of_asymmetric_confusion() {
        let pes = pes_of(&fixtures::asymmetric_confusion());
        let maximal: Vec<NodeSet> = recursively_stopped(&pes)
            .into_iter()
            .filter(|(c, _)| c.maximal)
            .map(|(c, _)| c.events)
            .collect();
        assert_eq!(
            maximal,
            vec![node_set(["a", "b"]), node_set(["a", "c"]), node_set(["b", "d"])]
        );
    }

    #[test]
    fn dec_of_compiled_transitions() {
        let c = Compilation::compile(&fixtures::or_causes()).unwrap();
        assert_eq!(
            dec(&c, &"tx:2,3,8/b,g".into()).unwrap(),
            node_set(["b", "g"])
        );
        assert_eq!(dec(&c, &"tx:1/a".into()).unwrap(), node_set(["a"]));
        assert_eq!(dec(&c, &"prop:2,3,8/3".into()).unwrap(), NodeSet::new());
        assert_eq!(dec(&c, &"prop:8/8".into()).unwrap(), NodeSet::new());
        assert!(dec(&c, &"unrelated".into()).is_err());
    }

    #[test]
    fn correspondence_on_fixtures() {
        for (name, net) in fixtures::all() {
            let c = Compilation::compile(&net).unwrap();
            let report = check_correspondence(&c, 1_000_000).unwrap();
            assert!(report.passed(), "{name}: {:?}", report.witness);
        }
    }

    #[test]
    fn single_transition_net_corresponds_trivially() {
        let net = crate::net::OccurrenceNet::build(
            [("t", ["p"].as_slice(), ["q"].as_slice())],
            &[],
        );
        let c = Compilation::compile(&net).unwrap();
        assert!(check_correspondence(&c, 1_000_000).unwrap().passed());
    }

    #[test]
    fn the_paper_decomposition_is_realized_by_the_expected_run() {
        let c = Compilation::compile(&fixtures::or_causes()).unwrap();
        let decomposition = vec![node_set(["a"]), node_set(["e"]), node_set(["b", "g"])];
        let run = realize(&c, &c.flat, &decomposition, 1_000_000)
            .unwrap()
            .expect("realizable");
        let observable: Vec<NodeId> = run
            .iter()
            .filter(|t| !dec(&c, t).unwrap().is_empty())
            .cloned()
            .collect();
        assert_eq!(
            observable,
            vec![
                NodeId::from("tx:1/a"),
                NodeId::from("tx:7/e"),
                NodeId::from("tx:2,3,8/b,g")
            ]
        );
    }
}
