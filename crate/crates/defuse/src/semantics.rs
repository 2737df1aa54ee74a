//! Execution engine and certifiers: firing, reachability, 1-∞-safety,
//! confusion detection, token exclusion, and the dynamic/flat bisimulation.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::time::Instant;

use serde_json::json;

use crate::encode::{flatten, Compilation, DynTransition, DynamicPNet};
use crate::net::{Bag, Count, NodeId, NodeSet, PNet};
use crate::report::CertReport;

pub const DEFAULT_STATE_BUDGET: usize = 1_000_000;

#[derive(Debug, thiserror::Error)]
pub enum SemanticsError {
    #[error("transition {transition} is not enabled; missing {missing:?}")]
    NotEnabled {
        transition: NodeId,
        missing: Vec<NodeId>,
    },
    #[error("state budget of {budget} exceeded; {frontier} states on the frontier")]
    BudgetExceeded { budget: usize, frontier: usize },
}

/// A p-net state under the non-stuttering semantics: the bag plus the
/// persistent transitions already fired in this run.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct PState {
    pub bag: Bag,
    pub fired: NodeSet,
}

impl PState {
    pub fn initial(net: &PNet) -> PState {
        PState {
            bag: net.initial().clone(),
            fired: NodeSet::new(),
        }
    }
}

/// Transitions enabled at a state; persistent transitions already fired in
/// this run are excluded.
pub fn enabled(net: &PNet, state: &PState) -> Vec<NodeId> {
    net.transitions()
        .filter(|(t, tr)| {
            state.bag.covers(&tr.preset)
                && !(state.fired.contains(*t) && net.is_persistent_transition(t))
        })
        .map(|(t, _)| t.clone())
        .collect()
}

pub fn fire(net: &PNet, state: &PState, t: &NodeId) -> Result<PState, SemanticsError> {
    let tr = net.transition(t).ok_or_else(|| SemanticsError::NotEnabled {
        transition: t.clone(),
        missing: vec![],
    })?;
    let missing: Vec<NodeId> = tr
        .preset
        .iter()
        .filter(|p| !state.bag.contains(p))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(SemanticsError::NotEnabled {
            transition: t.clone(),
            missing,
        });
    }
    let bag = state.bag.minus_set(&tr.preset).union(&tr.postset);
    let mut fired = state.fired.clone();
    if net.is_persistent_transition(t) {
        fired.insert(t.clone());
    }
    Ok(PState { bag, fired })
}

/// Reachability graph over explicit states.
#[derive(Clone, Debug)]
pub struct StateGraph<S> {
    pub states: Vec<S>,
    /// Outgoing labeled edges per state index.
    pub edges: Vec<Vec<(NodeId, usize)>>,
    pub initial: usize,
}

impl<S> StateGraph<S> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn maximal(&self) -> Vec<usize> {
        (0..self.states.len())
            .filter(|i| self.edges[*i].is_empty())
            .collect()
    }
}

fn bfs<S, FE>(initial: S, budget: usize, mut successors: FE) -> Result<StateGraph<S>, SemanticsError>
where
    S: Clone + Eq + std::hash::Hash,
    FE: FnMut(&S) -> Vec<(NodeId, S)>,
{
    let mut states = vec![initial.clone()];
    let mut index: HashMap<S, usize> = HashMap::from([(initial, 0)]);
    let mut edges: Vec<Vec<(NodeId, usize)>> = vec![Vec::new()];
    let mut frontier = vec![0usize];
    while let Some(i) = frontier.pop() {
        for (label, next) in successors(&states[i].clone()) {
            let j = match index.get(&next) {
                Some(&j) => j,
                None => {
                    if states.len() >= budget {
                        return Err(SemanticsError::BudgetExceeded {
                            budget,
                            frontier: frontier.len() + 1,
                        });
                    }
                    let j = states.len();
                    states.push(next.clone());
                    index.insert(next, j);
                    edges.push(Vec::new());
                    frontier.push(j);
                    j
                }
            };
            edges[i].push((label, j));
        }
    }
    Ok(StateGraph {
        states,
        edges,
        initial: 0,
    })
}

/// Full reachability graph of a p-net under the non-stuttering semantics.
pub fn explore(net: &PNet, budget: usize) -> Result<StateGraph<PState>, SemanticsError> {
    bfs(PState::initial(net), budget, |s| {
        enabled(net, s)
            .into_iter()
            .map(|t| {
                let next = fire(net, s, &t).expect("enabled transition fires");
                (t, next)
            })
            .collect()
    })
}

/// A state of a dynamic p-net: released transitions grow monotonically
/// along runs.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct DynState {
    pub transitions: std::collections::BTreeSet<DynTransition>,
    pub bag: Bag,
    pub fired: NodeSet,
}

impl DynState {
    pub fn initial(net: &DynamicPNet) -> DynState {
        DynState {
            transitions: net.top.transitions.clone(),
            bag: net.top.bag.clone(),
            fired: NodeSet::new(),
        }
    }
}

/// A dynamic transition is persistent when its preset and produced tokens
/// touch persistent places only; re-releasing transitions is idempotent.
fn dyn_is_persistent(net: &DynamicPNet, t: &DynTransition) -> bool {
    t.preset.iter().all(|p| net.persistent.contains(p))
        && t.post.bag.iter().all(|(p, _)| net.persistent.contains(p))
}

pub fn dyn_enabled(net: &DynamicPNet, state: &DynState) -> Vec<DynTransition> {
    state
        .transitions
        .iter()
        .filter(|t| {
            state.bag.covers(&t.preset)
                && !(state.fired.contains(&t.name) && dyn_is_persistent(net, t))
        })
        .cloned()
        .collect()
}

pub fn dyn_fire(net: &DynamicPNet, state: &DynState, t: &DynTransition) -> DynState {
    let mut transitions = state.transitions.clone();
    transitions.extend(t.post.transitions.iter().cloned());
    let bag = state.bag.minus_set(&t.preset).union(&t.post.bag);
    let mut fired = state.fired.clone();
    if dyn_is_persistent(net, t) {
        fired.insert(t.name.clone());
    }
    DynState {
        transitions,
        bag,
        fired,
    }
}

pub fn dyn_explore(
    net: &DynamicPNet,
    budget: usize,
) -> Result<StateGraph<DynState>, SemanticsError> {
    bfs(DynState::initial(net), budget, |s| {
        dyn_enabled(net, s)
            .into_iter()
            .map(|t| (t.name.clone(), dyn_fire(net, s, &t)))
            .collect()
    })
}

/// Certifies 1-∞-safety: every reachable bag keeps regular places at or
/// below one token and persistent places at zero or infinity.
pub fn check_safety(net: &PNet, budget: usize) -> Result<CertReport, SemanticsError> {
    let start = Instant::now();
    let graph = explore(net, budget)?;
    for state in &graph.states {
        for (p, c) in state.bag.iter() {
            let ok = if net.is_persistent_place(p) {
                c == Count::Omega
            } else {
                matches!(c, Count::Finite(0 | 1))
            };
            if !ok {
                return Ok(CertReport::fail(
                    "safety",
                    json!({ "bag": state.bag.render(), "place": p, "count": c.to_string() }),
                    graph.len(),
                    start.elapsed().as_millis(),
                ));
            }
        }
    }
    Ok(CertReport::pass(
        "safety",
        graph.len(),
        start.elapsed().as_millis(),
    ))
}

fn regular_preset(net: &PNet, t: &NodeId) -> NodeSet {
    net.transition(t)
        .map(|tr| {
            tr.preset
                .iter()
                .filter(|p| !net.is_persistent_place(p))
                .cloned()
                .collect()
        })
        .unwrap_or_default()
}

/// Preset with activation places stripped: the choice structure of a
/// transition, used for the equal-or-disjoint certificate.
fn choice_preset(net: &PNet, t: &NodeId) -> NodeSet {
    net.transition(t)
        .map(|tr| {
            tr.preset
                .iter()
                .filter(|p| !p.as_str().starts_with("act:"))
                .cloned()
                .collect()
        })
        .unwrap_or_default()
}

/// Searches every reachable state for symmetric and asymmetric confusion
/// and certifies that co-enabled transitions have equal or disjoint
/// presets. Direct conflict is judged on regular places. The witness on
/// failure carries the first pattern found of each kind.
pub fn check_confusion_free(net: &PNet, budget: usize) -> Result<CertReport, SemanticsError> {
    let start = Instant::now();
    let graph = explore(net, budget)?;
    let mut preset_violation: Option<serde_json::Value> = None;
    let mut symmetric: Option<serde_json::Value> = None;
    let mut asymmetric: Option<serde_json::Value> = None;
    for state in &graph.states {
        let here = enabled(net, state);
        if preset_violation.is_none() {
            'pairs: for t in &here {
                for u in &here {
                    if t >= u {
                        continue;
                    }
                    let (pt, pu) = (choice_preset(net, t), choice_preset(net, u));
                    if pt != pu && !pt.is_disjoint(&pu) {
                        preset_violation = Some(json!({
                            "state": state.bag.render(),
                            "t": t, "u": u,
                        }));
                        break 'pairs;
                    }
                }
            }
        }
        // Symmetric: t, u, v co-enabled; firing t or v discards u.
        if symmetric.is_none() {
            'sym: for t in &here {
                for u in &here {
                    for v in &here {
                        if t == u || u == v || t == v || t > v {
                            continue;
                        }
                        let (pt, pu, pv) = (
                            regular_preset(net, t),
                            regular_preset(net, u),
                            regular_preset(net, v),
                        );
                        if !pt.is_disjoint(&pu) && !pu.is_disjoint(&pv) && pt.is_disjoint(&pv) {
                            symmetric = Some(json!({
                                "state": state.bag.render(),
                                "t": t, "u": u, "v": v,
                            }));
                            break 'sym;
                        }
                    }
                }
            }
        }
        // Asymmetric: firing t enables a fresh alternative u to v.
        if asymmetric.is_none() {
            'asym: for t in &here {
                let after = fire(net, state, t).expect("enabled");
                for u in enabled(net, &after) {
                    if here.contains(&u) || u == *t {
                        continue;
                    }
                    for v in &here {
                        if v == t {
                            continue;
                        }
                        let (pt, pu, pv) = (
                            regular_preset(net, t),
                            regular_preset(net, &u),
                            regular_preset(net, v),
                        );
                        if pt.is_disjoint(&pv) && !pv.is_disjoint(&pu) {
                            asymmetric = Some(json!({
                                "state": state.bag.render(),
                                "t": t, "u": u, "v": v,
                            }));
                            break 'asym;
                        }
                    }
                }
            }
        }
    }
    if preset_violation.is_none() && symmetric.is_none() && asymmetric.is_none() {
        return Ok(CertReport::pass(
            "confusion-free",
            graph.len(),
            start.elapsed().as_millis(),
        ));
    }
    let mut witness = serde_json::Map::new();
    if let Some(v) = preset_violation {
        witness.insert("overlapping_presets".into(), v);
    }
    if let Some(v) = symmetric {
        witness.insert("symmetric".into(), v);
    }
    if let Some(v) = asymmetric {
        witness.insert("asymmetric".into(), v);
    }
    Ok(CertReport::fail(
        "confusion-free",
        serde_json::Value::Object(witness),
        graph.len(),
        start.elapsed().as_millis(),
    ))
}

/// Certifies the exclusion discipline of a compiled net: positive and
/// negative tokens for the same place never coexist, negatives are final
/// (once `neg:p` is marked, `p` stays unmarked downstream), negatives block
/// causal descendants, blocked descendants of marked places have an already
/// blocked ancestor, and an enabled transaction's cell has no marked or
/// blocked maximal place.
pub fn check_exclusion(
    compilation: &Compilation,
    net: &PNet,
    budget: usize,
) -> Result<CertReport, SemanticsError> {
    let start = Instant::now();
    let graph = explore(net, budget)?;
    let causality = compilation.source.descendants_map();
    let places = compilation.source.places().clone();

    let fail = |clause: &str, state: &PState, detail: serde_json::Value, n: usize| {
        Ok(CertReport::fail(
            "exclusion",
            json!({ "clause": clause, "state": state.bag.render(), "detail": detail }),
            n,
            start.elapsed().as_millis(),
        ))
    };

    // Regular places marked anywhere at or after each state.
    let mut future_marked: Vec<NodeSet> = graph
        .states
        .iter()
        .map(|s| {
            places
                .iter()
                .filter(|p| s.bag.contains(p))
                .cloned()
                .collect()
        })
        .collect();
    loop {
        let mut changed = false;
        for i in 0..graph.states.len() {
            for (_, j) in graph.edges[i].clone() {
                let add: Vec<NodeId> = future_marked[j]
                    .difference(&future_marked[i])
                    .cloned()
                    .collect();
                if !add.is_empty() {
                    future_marked[i].extend(add);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    for (i, state) in graph.states.iter().enumerate() {
        for p in &places {
            let neg = p.negated();
            if state.bag.contains(&neg) {
                if state.bag.contains(p) {
                    return fail(
                        "positive-negative-coexist",
                        state,
                        json!({ "place": p }),
                        graph.len(),
                    );
                }
                if future_marked[i].contains(p) {
                    return fail("negative-not-final", state, json!({ "place": p }), graph.len());
                }
                for q in causality[p].iter().filter(|q| places.contains(*q)) {
                    if state.bag.contains(q) {
                        return fail(
                            "descendant-of-blocked-marked",
                            state,
                            json!({ "blocked": p, "descendant": q }),
                            graph.len(),
                        );
                    }
                }
            }
        }
        // If p is marked, p precedes q, and q is blocked, some strict
        // ancestor of q must already be blocked.
        for p in places.iter().filter(|p| state.bag.contains(*p)) {
            for q in causality[p].iter().filter(|q| places.contains(*q) && *q != p) {
                if state.bag.contains(&q.negated()) {
                    let witness = places.iter().any(|r| {
                        r != q && causality[r].contains(q) && state.bag.contains(&r.negated())
                    });
                    if !witness {
                        return fail(
                            "blocked-without-blocked-ancestor",
                            state,
                            json!({ "marked": p, "blocked": q }),
                            graph.len(),
                        );
                    }
                }
            }
        }
        // Enabled transactions: the whole cell is still unresolved.
        for t in enabled(net, state) {
            if let Some(info) = compilation.tx_info.get(&t) {
                let cell = &compilation.cells[&info.cell];
                for q in &cell.max {
                    if state.bag.contains(q) || state.bag.contains(&q.negated()) {
                        return fail(
                            "enabled-cell-output-touched",
                            state,
                            json!({ "transition": t, "place": q }),
                            graph.len(),
                        );
                    }
                }
            }
        }
    }
    Ok(CertReport::pass(
        "exclusion",
        graph.len(),
        start.elapsed().as_millis(),
    ))
}

/// Certifies step-for-step mutual simulation between a dynamic p-net and
/// its flattening, matching states by bag restriction to the shared places.
pub fn check_dyn_flat_bisim(
    dynamic: &DynamicPNet,
    budget: usize,
) -> Result<CertReport, SemanticsError> {
    let start = Instant::now();
    let flat = flatten(dynamic);
    let shared: NodeSet = dynamic
        .regular
        .union(&dynamic.persistent)
        .cloned()
        .collect();

    let restrict = |bag: &Bag| -> Bag {
        bag.iter()
            .filter(|(p, _)| shared.contains(*p))
            .map(|(p, c)| (p.clone(), c))
            .collect()
    };

    // Joint breadth-first walk: both sides are deterministic per label, so
    // equal label sets at every joint state give a mutual simulation.
    let mut states = vec![(DynState::initial(dynamic), PState::initial(&flat))];
    let mut seen: std::collections::HashSet<(Bag, NodeSet, Bag, NodeSet)> = Default::default();
    seen.insert((
        states[0].0.bag.clone(),
        states[0].0.fired.clone(),
        states[0].1.bag.clone(),
        states[0].1.fired.clone(),
    ));
    let mut frontier = vec![0usize];
    let mut explored = 0usize;
    while let Some(i) = frontier.pop() {
        let (dstate, fstate) = states[i].clone();
        explored += 1;
        let dyn_labels: NodeSet = dyn_enabled(dynamic, &dstate)
            .iter()
            .map(|t| t.name.clone())
            .collect();
        let flat_labels: NodeSet = enabled(&flat, &fstate).into_iter().collect();
        if dyn_labels != flat_labels {
            return Ok(CertReport::fail(
                "dyn-flat-bisim",
                json!({
                    "dyn_state": dstate.bag.render(),
                    "flat_state": fstate.bag.render(),
                    "dyn_only": dyn_labels.difference(&flat_labels).collect::<Vec<_>>(),
                    "flat_only": flat_labels.difference(&dyn_labels).collect::<Vec<_>>(),
                }),
                explored,
                start.elapsed().as_millis(),
            ));
        }
        if restrict(&dstate.bag) != restrict(&fstate.bag) {
            return Ok(CertReport::fail(
                "dyn-flat-bisim",
                json!({
                    "dyn_state": dstate.bag.render(),
                    "flat_state": fstate.bag.render(),
                    "reason": "bags differ on shared places",
                }),
                explored,
                start.elapsed().as_millis(),
            ));
        }
        for t in dyn_enabled(dynamic, &dstate) {
            let dnext = dyn_fire(dynamic, &dstate, &t);
            let fnext = fire(&flat, &fstate, &t.name).expect("matched label");
            let k = (
                dnext.bag.clone(),
                dnext.fired.clone(),
                fnext.bag.clone(),
                fnext.fired.clone(),
            );
            if seen.insert(k) {
                if states.len() >= budget {
                    return Err(SemanticsError::BudgetExceeded {
                        budget,
                        frontier: frontier.len() + 1,
                    });
                }
                frontier.push(states.len());
                states.push((dnext, fnext));
            }
        }
    }
    Ok(CertReport::pass(
        "dyn-flat-bisim",
        explored,
        start.elapsed().as_millis(),
    ))
}

/// Certifies that reachable transitions of the compiled dynamic net with
/// unequal, overlapping presets over the source places are separated by a
/// negative token in every reachable state.
pub fn check_nested_rules_do_not_collide(
    compilation: &Compilation,
    budget: usize,
) -> Result<CertReport, SemanticsError> {
    let start = Instant::now();
    let regular = &compilation.dynamic.regular;
    let graph = dyn_explore(&compilation.dynamic, budget)?;
    for state in &graph.states {
        let ts: Vec<&DynTransition> = state.transitions.iter().collect();
        for t in &ts {
            for u in &ts {
                if t.name >= u.name || t.preset == u.preset {
                    continue;
                }
                let shared: NodeSet = t
                    .preset
                    .intersection(&u.preset)
                    .filter(|p| regular.contains(*p))
                    .cloned()
                    .collect();
                if shared.is_empty() {
                    continue;
                }
                let blocked = t
                    .preset
                    .union(&u.preset)
                    .filter(|p| regular.contains(*p))
                    .any(|p| state.bag.contains(&p.negated()));
                if !blocked {
                    return Ok(CertReport::fail(
                        "nested-rules-do-not-collide",
                        json!({
                            "state": state.bag.render(),
                            "t": t.name, "u": u.name,
                            "shared": shared,
                        }),
                        graph.len(),
                        start.elapsed().as_millis(),
                    ));
                }
            }
        }
    }
    Ok(CertReport::pass(
        "nested-rules-do-not-collide",
        graph.len(),
        start.elapsed().as_millis(),
    ))
}

/// Canonical fired sets of all maximal non-stuttering runs. One entry per
/// run equivalence class.
pub fn maximal_fired_sets(net: &PNet, budget: usize) -> Result<Vec<NodeSet>, SemanticsError> {
    let mut result: std::collections::BTreeSet<NodeSet> = Default::default();
    let mut seen: std::collections::HashSet<(Bag, NodeSet)> = Default::default();
    let mut stack = vec![(PState::initial(net), NodeSet::new())];
    let mut visited = 0usize;
    while let Some((state, fired_all)) = stack.pop() {
        if !seen.insert((state.bag.clone(), fired_all.clone())) {
            continue;
        }
        visited += 1;
        if visited > budget {
            return Err(SemanticsError::BudgetExceeded {
                budget,
                frontier: stack.len(),
            });
        }
        let here = enabled(net, &state);
        if here.is_empty() {
            result.insert(fired_all);
            continue;
        }
        for t in here {
            let next = fire(net, &state, &t).expect("enabled");
            let mut fired_next = fired_all.clone();
            fired_next.insert(t);
            stack.push((next, fired_next));
        }
    }
    Ok(result.into_iter().collect())
}

#[derive(Clone, Debug)]
pub struct ChoiceGroup {
    pub preset: NodeSet,
    pub members: Vec<NodeId>,
}

/// Groups the transitions enabled at a state by their choice preset. On a
/// compiled net each group is one cell's set of transactions or a single
/// propagation transition.
pub fn enabled_choice_groups(net: &PNet, state: &PState) -> Vec<ChoiceGroup> {
    let mut groups: BTreeMap<NodeSet, Vec<NodeId>> = BTreeMap::new();
    for t in enabled(net, state) {
        groups.entry(choice_preset(net, &t)).or_default().push(t);
    }
    groups
        .into_iter()
        .map(|(preset, members)| ChoiceGroup { preset, members })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode;
    use crate::fixtures;
    use crate::net::{node_set, OccurrenceNet};

    fn budget() -> usize {
        DEFAULT_STATE_BUDGET
    }

    #[test]
    fn initially_enabled_transactions_of_asymmetric_confusion() {
        let c = Compilation::compile(&fixtures::asymmetric_confusion()).unwrap();
        let state = PState::initial(&c.pruned);
        let here: NodeSet = enabled(&c.pruned, &state).into_iter().collect();
        assert_eq!(here, node_set(["tx:1/a", "tx:1/d"]));
    }

    #[test]
    fn empty_bag_enables_nothing() {
        let mut net = PNet::new();
        net.add_regular("p".into());
        net.add_transition("t".into(), [NodeId::from("p")], []);
        assert!(enabled(&net, &PState::initial(&net)).is_empty());
    }

    #[test]
    fn persistent_tokens_survive_consumption() {
        // After a and c, d stays enabled off the persistent place even
        // though b has not fired.
        let mut net = PNet::new();
        for p in ["1", "2", "3", "5", "6", "7"] {
            net.add_regular(p.into());
        }
        net.add_persistent("p4".into());
        net.add_transition("a".into(), [NodeId::from("1")], [NodeId::from("3"), NodeId::from("p4")]);
        net.add_transition("b".into(), [NodeId::from("2")], [NodeId::from("p4"), NodeId::from("5")]);
        net.add_transition("c".into(), [NodeId::from("3"), NodeId::from("p4")], [NodeId::from("6")]);
        net.add_transition("d".into(), [NodeId::from("p4"), NodeId::from("5")], [NodeId::from("7")]);
        net.mark([NodeId::from("1"), NodeId::from("2"), NodeId::from("3"), NodeId::from("5")]);
        let s0 = PState::initial(&net);
        let s1 = fire(&net, &s0, &"a".into()).unwrap();
        let s2 = fire(&net, &s1, &"c".into()).unwrap();
        assert!(enabled(&net, &s2).contains(&NodeId::from("d")));
        assert_eq!(s2.bag.count(&NodeId::from("p4")), Count::Omega);
    }

    #[test]
    fn dyn_firing_matches_paper_step() {
        let c = Compilation::compile(&fixtures::or_causes()).unwrap();
        let s0 = DynState::initial(&c.dynamic);
        let ta = dyn_enabled(&c.dynamic, &s0)
            .into_iter()
            .find(|t| t.name.as_str() == "tx:1/a")
            .unwrap();
        let s1 = dyn_fire(&c.dynamic, &s0, &ta);
        assert_eq!(s1.bag.render(), "{2, 3, 7, neg:6=inf}");
        assert_eq!(s1.transitions, s0.transitions);
    }

    #[test]
    fn firing_a_disabled_transition_reports_missing_places() {
        let c = Compilation::compile(&fixtures::asymmetric_confusion()).unwrap();
        let state = PState::initial(&c.pruned);
        let err = fire(&c.pruned, &state, &"tx:2,3/c".into()).unwrap_err();
        match err {
            SemanticsError::NotEnabled { missing, .. } => {
                assert!(missing.contains(&NodeId::from("3")));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn flat_firing_after_choice_of_d() {
        let c = Compilation::compile(&fixtures::asymmetric_confusion()).unwrap();
        let s0 = PState::initial(&c.pruned);
        let s1 = fire(&c.pruned, &s0, &"tx:1/d".into()).unwrap();
        assert!(s1.bag.contains(&NodeId::from("2")));
        assert!(s1.bag.contains(&NodeId::from("6")));
        assert_eq!(s1.bag.count(&NodeId::from("neg:3")), Count::Omega);
    }

    /// Independent oracle: firing-sequence enumeration over set markings,
    /// written directly against the occurrence-net firing rule.
    fn brute_force_markings(net: &OccurrenceNet) -> (usize, usize) {
        let mut seen: std::collections::BTreeSet<NodeSet> = Default::default();
        let mut maximal: std::collections::BTreeSet<NodeSet> = Default::default();
        let mut stack = vec![net.initial().clone()];
        while let Some(m) = stack.pop() {
            if !seen.insert(m.clone()) {
                continue;
            }
            let enabled: Vec<NodeId> = net
                .transitions()
                .iter()
                .filter(|t| net.preset(t).is_subset(&m))
                .cloned()
                .collect();
            if enabled.is_empty() {
                maximal.insert(m.clone());
            }
            for t in enabled {
                let mut next: NodeSet = m.difference(&net.preset(&t)).cloned().collect();
                next.extend(net.postset(&t));
                stack.push(next);
            }
        }
        (seen.len(), maximal.len())
    }

    #[test]
    fn explore_counts_on_asymmetric_confusion() {
        let net = fixtures::asymmetric_confusion();
        let (states, maximal) = brute_force_markings(&net);
        assert_eq!((states, maximal), (7, 3));
        let graph = explore(&PNet::from_occurrence(&net), budget()).unwrap();
        assert_eq!(graph.len(), states);
        assert_eq!(graph.maximal().len(), maximal);
    }

    #[test]
    fn explore_of_transitionless_net_has_one_state() {
        let mut net = PNet::new();
        net.add_regular("p".into());
        net.mark([NodeId::from("p")]);
        let graph = explore(&net, budget()).unwrap();
        assert_eq!(graph.len(), 1);
        assert_eq!(graph.maximal(), vec![0]);
    }

    #[test]
    fn explore_budget_is_enforced() {
        let net = fixtures::or_causes();
        let c = Compilation::compile(&net).unwrap();
        match explore(&c.pruned, 3) {
            Err(SemanticsError::BudgetExceeded { budget: 3, .. }) => {}
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn or_causes_has_five_maximal_run_classes() {
        let c = Compilation::compile(&fixtures::or_causes()).unwrap();
        let classes = maximal_fired_sets(&c.pruned, budget()).unwrap();
        assert_eq!(classes.len(), 5);
    }

    #[test]
    fn compiled_nets_are_safe() {
        for (_, net) in fixtures::all() {
            let c = Compilation::compile(&net).unwrap();
            assert!(check_safety(&c.pruned, budget()).unwrap().passed());
            assert!(check_safety(&c.flat, budget()).unwrap().passed());
        }
    }

    #[test]
    fn double_token_is_reported_unsafe() {
        let mut net = PNet::new();
        for p in ["a", "b", "c"] {
            net.add_regular(p.into());
        }
        net.add_transition("t".into(), [NodeId::from("a")], [NodeId::from("c")]);
        net.add_transition("u".into(), [NodeId::from("b")], [NodeId::from("c")]);
        net.mark([NodeId::from("a"), NodeId::from("b")]);
        let report = check_safety(&net, budget()).unwrap();
        assert!(!report.passed());
        let witness = report.witness.unwrap();
        assert_eq!(witness["place"], "c");
    }

    #[test]
    fn raw_asymmetric_confusion_is_detected() {
        let net = fixtures::asymmetric_confusion();
        let report = check_confusion_free(&PNet::from_occurrence(&net), budget()).unwrap();
        assert!(!report.passed());
        let w = &report.witness.unwrap()["asymmetric"];
        assert_eq!(w["state"], "{1, 2}");
        assert_eq!(w["t"], "a");
        assert_eq!(w["u"], "c");
        assert_eq!(w["v"], "b");
    }

    #[test]
    fn raw_or_causes_has_symmetric_confusion() {
        let net = fixtures::or_causes();
        let report = check_confusion_free(&PNet::from_occurrence(&net), budget()).unwrap();
        assert!(!report.passed());
        let w = &report.witness.unwrap()["symmetric"];
        assert_eq!(w["state"], "{2, 3, 8}");
        assert_eq!(w["t"], "b");
        assert_eq!(w["u"], "c");
        assert_eq!(w["v"], "g");
    }

    #[test]
    fn compiled_nets_are_confusion_free() {
        for (_, net) in fixtures::all() {
            let c = Compilation::compile(&net).unwrap();
            assert!(check_confusion_free(&c.pruned, budget()).unwrap().passed());
            assert!(check_confusion_free(&c.flat, budget()).unwrap().passed());
        }
    }

    #[test]
    fn exclusion_holds_on_compiled_nets() {
        for (_, net) in fixtures::all() {
            let c = Compilation::compile(&net).unwrap();
            assert!(check_exclusion(&c, &c.pruned, budget()).unwrap().passed());
            assert!(check_exclusion(&c, &c.flat, budget()).unwrap().passed());
        }
    }

    #[test]
    fn producing_both_polarities_fails_exclusion() {
        let net = fixtures::asymmetric_confusion();
        let c = Compilation::compile(&net).unwrap();
        let mut broken = c.pruned.clone();
        broken.add_transition(
            "both".into(),
            [NodeId::from("1")],
            [NodeId::from("3"), NodeId::from("neg:3")],
        );
        let report = check_exclusion(&c, &broken, budget()).unwrap();
        assert!(!report.passed());
        assert_eq!(report.witness.unwrap()["clause"], "positive-negative-coexist");
    }

    #[test]
    fn bisimulation_on_hand_built_dynamic_net() {
        // One dynamic transition released by a propagation off a marked
        // negative place; the flat version must match step for step.
        use crate::encode::{DynNet, DynTransition, DynamicPNet};
        let tb = DynTransition {
            name: "tb".into(),
            preset: node_set(["2"]),
            post: DynNet::new([], Bag::from_set(&node_set(["4"]))),
        };
        let mut neg5 = Bag::new();
        neg5.insert("neg:5".into(), Count::Omega);
        let t3 = DynTransition {
            name: "t3".into(),
            preset: node_set(["neg:3"]),
            post: DynNet::new([tb], neg5),
        };
        let mut post_c = Bag::from_set(&node_set(["5"]));
        post_c.insert("neg:4".into(), Count::Omega);
        let tc = DynTransition {
            name: "tc".into(),
            preset: node_set(["2", "3"]),
            post: DynNet::new([], post_c),
        };
        let mut initial = Bag::from_set(&node_set(["2"]));
        initial.insert("neg:3".into(), Count::Omega);
        let dynamic = DynamicPNet {
            regular: node_set(["2", "3", "4", "5"]),
            persistent: node_set(["neg:3", "neg:4", "neg:5"]),
            top: DynNet::new([t3, tc], initial),
        };
        assert!(check_dyn_flat_bisim(&dynamic, budget()).unwrap().passed());
    }

    #[test]
    fn transitionless_net_is_trivially_bisimilar() {
        use crate::encode::{DynNet, DynamicPNet};
        let dynamic = DynamicPNet {
            regular: node_set(["p"]),
            persistent: NodeSet::new(),
            top: DynNet::new([], Bag::from_set(&node_set(["p"]))),
        };
        assert!(check_dyn_flat_bisim(&dynamic, budget()).unwrap().passed());
    }

    #[test]
    fn encodings_are_bisimilar_to_their_flattenings() {
        for (_, net) in fixtures::all() {
            let d = encode::encode(&net).unwrap();
            assert!(check_dyn_flat_bisim(&d, budget()).unwrap().passed());
        }
    }

    #[test]
    fn nested_rules_do_not_collide_on_fixtures() {
        for (_, net) in fixtures::all() {
            let c = Compilation::compile(&net).unwrap();
            assert!(check_nested_rules_do_not_collide(&c, budget())
                .unwrap()
                .passed());
        }
    }

    #[test]
    fn choice_groups_pair_cell_transactions() {
        let c = Compilation::compile(&fixtures::or_causes()).unwrap();
        let s0 = PState::initial(&c.pruned);
        let s1 = fire(&c.pruned, &s0, &"tx:1/a".into()).unwrap();
        let s2 = fire(&c.pruned, &s1, &"tx:7/e".into()).unwrap();
        let groups = enabled_choice_groups(&c.pruned, &s2);
        assert_eq!(groups.len(), 1);
        assert_eq!(
            groups[0].members,
            vec![NodeId::from("tx:2,3,8/b,g"), NodeId::from("tx:2,3,8/c")]
        );
    }
}
