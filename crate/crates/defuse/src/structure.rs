//! Causal and conflict relations, s-cell decomposition, removal of minimal
//! places, transactions, and extraction of the prime event structure.

use std::collections::BTreeMap;

use petgraph::graph::DiGraph;

use crate::net::{NodeId, NodeSet, OccurrenceNet};

#[derive(Debug, thiserror::Error)]
pub enum StructureError {
    #[error("place {0} is not minimal in this net")]
    NotMinimal(NodeId),
}

/// Symmetric relation stored as ordered pairs (both orientations present).
pub type PairSet = std::collections::BTreeSet<(NodeId, NodeId)>;

fn insert_sym(set: &mut PairSet, a: &NodeId, b: &NodeId) {
    set.insert((a.clone(), b.clone()));
    set.insert((b.clone(), a.clone()));
}

/// The relations that drive the decomposition: causality, immediate
/// conflict, inherited conflict, the cell preorder and its equivalence
/// classes.
#[derive(Clone, Debug)]
pub struct CausalStructure {
    /// Reflexive causality: node -> all nodes it precedes (including itself).
    pub causality: BTreeMap<NodeId, NodeSet>,
    /// Distinct transitions with overlapping presets.
    pub immediate_conflict: PairSet,
    /// Conflict inherited along causality from immediate conflicts.
    pub conflict: PairSet,
    /// Cell preorder: node -> nodes above it under (causality ∪ inverse preset)*.
    pub cell_preorder: BTreeMap<NodeId, NodeSet>,
    /// Equivalence classes of the cell preorder, in canonical order.
    pub cell_classes: Vec<NodeSet>,
}

impl CausalStructure {
    pub fn precedes(&self, a: &NodeId, b: &NodeId) -> bool {
        self.causality.get(a).is_some_and(|s| s.contains(b))
    }

    pub fn in_conflict(&self, a: &NodeId, b: &NodeId) -> bool {
        self.conflict.contains(&(a.clone(), b.clone()))
    }

    pub fn in_immediate_conflict(&self, a: &NodeId, b: &NodeId) -> bool {
        self.immediate_conflict.contains(&(a.clone(), b.clone()))
    }
}

/// Materializes all five relations of the decomposition on a valid
/// occurrence net.
pub fn compute_relations(net: &OccurrenceNet) -> CausalStructure {
    let causality = net.descendants_map();

    let mut immediate_conflict = PairSet::new();
    for t in net.transitions() {
        for p in net.preset(t) {
            for u in net.postset(&p) {
                if &u != t {
                    insert_sym(&mut immediate_conflict, t, &u);
                }
            }
        }
    }

    let mut conflict = PairSet::new();
    for (t1, t2) in &immediate_conflict {
        for x in &causality[t1] {
            for y in &causality[t2] {
                if x != y {
                    insert_sym(&mut conflict, x, y);
                }
            }
        }
    }

    // Cell preorder digraph: flow arcs plus one arc from each transition
    // back into each place of its preset.
    let nodes: Vec<NodeId> = net.nodes().into_iter().collect();
    let index: BTreeMap<&NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (n, i)).collect();
    let mut graph: DiGraph<(), ()> = DiGraph::new();
    let gids: Vec<_> = nodes.iter().map(|_| graph.add_node(())).collect();
    for (src, dst) in net.arcs() {
        graph.add_edge(gids[index[&src]], gids[index[&dst]], ());
        if net.is_transition(&dst) {
            graph.add_edge(gids[index[&dst]], gids[index[&src]], ());
        }
    }

    let sccs = petgraph::algo::tarjan_scc(&graph);
    let mut cell_classes: Vec<NodeSet> = sccs
        .into_iter()
        .map(|scc| scc.into_iter().map(|g| nodes[g.index()].clone()).collect())
        .collect();
    cell_classes.sort_by(|a, b| a.iter().next().cmp(&b.iter().next()));

    let mut cell_preorder: BTreeMap<NodeId, NodeSet> = BTreeMap::new();
    for n in &nodes {
        let mut seen = NodeSet::new();
        let mut stack = vec![n.clone()];
        while let Some(x) = stack.pop() {
            if seen.insert(x.clone()) {
                for y in net.postset(&x) {
                    stack.push(y.clone());
                }
                if net.is_transition(&x) {
                    for p in net.preset(&x) {
                        stack.push(p);
                    }
                }
            }
        }
        cell_preorder.insert(n.clone(), seen);
    }

    CausalStructure {
        causality,
        immediate_conflict,
        conflict,
        cell_preorder,
        cell_classes,
    }
}

/// A structural branching cell: one equivalence class of transitions
/// together with its subnet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SCell {
    pub transitions: NodeSet,
    pub places: NodeSet,
    pub min: NodeSet,
    pub max: NodeSet,
    pub subnet: OccurrenceNet,
}

/// Partitions the transitions of a valid occurrence net into s-cells. Cells
/// come out sorted by their transition sets, so derived artifacts are
/// deterministic.
pub fn scell_decomposition(net: &OccurrenceNet) -> Vec<SCell> {
    let relations = compute_relations(net);
    let mut cells = Vec::new();
    for class in &relations.cell_classes {
        let transitions: NodeSet = class
            .iter()
            .filter(|n| net.is_transition(n))
            .cloned()
            .collect();
        if transitions.is_empty() {
            continue;
        }
        cells.push(cell_from_transitions(net, &transitions));
    }
    cells.sort_by(|a, b| a.transitions.cmp(&b.transitions));
    cells
}

/// Packages a transition class into its cell: the subnet holds the class
/// places (presets) extended with the postset places.
pub fn cell_from_transitions(net: &OccurrenceNet, transitions: &NodeSet) -> SCell {
    let mut places = NodeSet::new();
    for t in transitions {
        places.extend(net.preset(t));
    }
    let mut keep: NodeSet = transitions.union(&places).cloned().collect();
    for t in transitions {
        keep.extend(net.postset(t));
    }
    let mut subnet = net.induced(&keep);
    subnet.mark([]);
    SCell {
        transitions: transitions.clone(),
        places,
        min: subnet.minimal_places(),
        max: subnet.maximal_places(),
        subnet,
    }
}

/// Removes a minimal place and everything that causally depends on it: the
/// least fixed point keeps the other minimal places, every transition whose
/// whole preset survives, and the postsets of surviving transitions.
pub fn ominus(net: &OccurrenceNet, p: &NodeId) -> Result<OccurrenceNet, StructureError> {
    if !net.minimal_places().contains(p) {
        return Err(StructureError::NotMinimal(p.clone()));
    }
    let mut keep: NodeSet = net.minimal_places();
    keep.remove(p);
    loop {
        let mut changed = false;
        for t in net.transitions() {
            if !keep.contains(t) && net.preset(t).is_subset(&keep) {
                keep.insert(t.clone());
                for q in net.postset(t) {
                    keep.insert(q);
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(net.induced(&keep))
}

/// A transaction: one maximal deterministic process of a cell's subnet,
/// identified by its transition set.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Transaction {
    pub transitions: NodeSet,
    /// Places of the process with no producer inside it.
    pub min_places: NodeSet,
    /// Places of the process with no consumer inside it.
    pub max_places: NodeSet,
}

impl Transaction {
    /// Builds the transaction record for a conflict-free transition set; the
    /// process places are the presets and postsets of its transitions.
    pub fn from_transitions(net: &OccurrenceNet, transitions: &NodeSet) -> Transaction {
        let mut places = NodeSet::new();
        for t in transitions {
            places.extend(net.preset(t));
            places.extend(net.postset(t));
        }
        let consumed: NodeSet = transitions.iter().flat_map(|t| net.preset(t)).collect();
        let produced: NodeSet = transitions.iter().flat_map(|t| net.postset(t)).collect();
        Transaction {
            transitions: transitions.clone(),
            min_places: places.difference(&produced).cloned().collect(),
            max_places: places.difference(&consumed).cloned().collect(),
        }
    }
}

/// Enumerates the transactions of a cell: every maximal conflict-free,
/// causally closed transition set of the cell subnet, in canonical order.
pub fn transactions(cell: &SCell) -> Vec<Transaction> {
    let net = &cell.subnet;
    let relations = compute_relations(net);
    let all: Vec<NodeId> = cell.transitions.iter().cloned().collect();

    // Depth-first extension over configurations of the cell subnet, memoized
    // on the set reached so far.
    let mut maximal: std::collections::BTreeSet<NodeSet> = Default::default();
    let mut seen: std::collections::HashSet<NodeSet> = Default::default();
    let mut stack: Vec<NodeSet> = vec![NodeSet::new()];
    while let Some(current) = stack.pop() {
        if !seen.insert(current.clone()) {
            continue;
        }
        let extensions: Vec<&NodeId> = all
            .iter()
            .filter(|t| {
                !current.contains(t)
                    && causally_ready(net, &relations, &current, t)
                    && current.iter().all(|u| !relations.in_conflict(t, u))
            })
            .collect();
        if extensions.is_empty() {
            maximal.insert(current);
        } else {
            for t in extensions {
                let mut next = current.clone();
                next.insert(t.clone());
                stack.push(next);
            }
        }
    }

    maximal
        .into_iter()
        .map(|set| Transaction::from_transitions(net, &set))
        .collect()
}

/// Causal closure within the cell subnet: all predecessor transitions of `t`
/// are already chosen.
fn causally_ready(
    net: &OccurrenceNet,
    relations: &CausalStructure,
    chosen: &NodeSet,
    t: &NodeId,
) -> bool {
    net.transitions()
        .iter()
        .filter(|u| *u != t && relations.precedes(u, t))
        .all(|u| chosen.contains(u))
}

/// A prime event structure: events with causality and inherited conflict.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pes {
    pub events: NodeSet,
    /// e -> all events it precedes, including itself.
    pub successors: BTreeMap<NodeId, NodeSet>,
    pub conflict: PairSet,
}

impl Pes {
    pub fn causes(&self, e: &NodeId) -> NodeSet {
        self.events
            .iter()
            .filter(|d| self.successors[*d].contains(e))
            .cloned()
            .collect()
    }

    pub fn precedes(&self, a: &NodeId, b: &NodeId) -> bool {
        self.successors.get(a).is_some_and(|s| s.contains(b))
    }

    pub fn in_conflict(&self, a: &NodeId, b: &NodeId) -> bool {
        self.conflict.contains(&(a.clone(), b.clone()))
    }

    /// Immediate conflict on events: in conflict, but with compatible causes.
    pub fn immediate_conflicts(&self) -> PairSet {
        let mut out = PairSet::new();
        for a in &self.events {
            for b in &self.events {
                if a < b && self.in_conflict(a, b) {
                    let compatible = self.causes(a).iter().all(|x| {
                        self.causes(b)
                            .iter()
                            .all(|y| (x == a && y == b) || !self.in_conflict(x, y))
                    });
                    if compatible {
                        insert_sym(&mut out, a, b);
                    }
                }
            }
        }
        out
    }

    /// Checks conflict inheritance: e1 # e2 and e2 before e3 forces e1 # e3.
    pub fn inheritance_holds(&self) -> bool {
        for (e1, e2) in &self.conflict {
            for e3 in &self.successors[e2] {
                if e1 != e3 && !self.in_conflict(e1, e3) {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_configuration(&self, v: &NodeSet) -> bool {
        v.iter().all(|e| self.causes(e).is_subset(v))
            && v.iter().all(|a| v.iter().all(|b| !self.in_conflict(a, b)))
    }

    /// The event structure induced by a subset of events.
    pub fn restrict(&self, keep: &NodeSet) -> Pes {
        Pes {
            events: keep.clone(),
            successors: keep
                .iter()
                .map(|e| {
                    (
                        e.clone(),
                        self.successors[e].intersection(keep).cloned().collect(),
                    )
                })
                .collect(),
            conflict: self
                .conflict
                .iter()
                .filter(|(a, b)| keep.contains(a) && keep.contains(b))
                .cloned()
                .collect(),
        }
    }
}

/// Extracts the PES of a valid occurrence net: events are the transitions,
/// with causality and conflict restricted to them.
pub fn to_pes(net: &OccurrenceNet) -> Pes {
    let relations = compute_relations(net);
    let events = net.transitions().clone();
    let successors = events
        .iter()
        .map(|t| {
            (
                t.clone(),
                relations.causality[t]
                    .intersection(&events)
                    .cloned()
                    .collect(),
            )
        })
        .collect();
    let conflict = relations
        .conflict
        .iter()
        .filter(|(a, b)| events.contains(a) && events.contains(b))
        .cloned()
        .collect();
    Pes {
        events,
        successors,
        conflict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::net::node_set;

    fn cell_sets(net: &OccurrenceNet) -> Vec<NodeSet> {
        scell_decomposition(net)
            .into_iter()
            .map(|c| c.transitions)
            .collect()
    }

    #[test]
    fn relations_on_asymmetric_confusion() {
        let net = fixtures::asymmetric_confusion();
        let rel = compute_relations(&net);
        assert!(rel.in_immediate_conflict(&"a".into(), &"d".into()));
        assert!(rel.in_immediate_conflict(&"b".into(), &"c".into()));
        assert!(rel.precedes(&"a".into(), &"c".into()));
        assert!(rel.in_conflict(&"d".into(), &"c".into()));
        assert!(!rel.in_conflict(&"a".into(), &"b".into()));
    }

    #[test]
    fn relations_on_single_transition_net() {
        let net = OccurrenceNet::build([("t", ["p"].as_slice(), ["q"].as_slice())], &[]);
        let rel = compute_relations(&net);
        assert!(rel.immediate_conflict.is_empty());
        assert!(rel.precedes(&"p".into(), &"q".into()));
        assert!(rel.precedes(&"t".into(), &"t".into()));
    }

    #[test]
    fn relations_on_or_causes() {
        let net = fixtures::or_causes();
        let rel = compute_relations(&net);
        assert!(rel.precedes(&"e".into(), &"g".into()));
        assert!(rel.in_immediate_conflict(&"c".into(), &"g".into()));
    }

    #[test]
    fn cells_of_asymmetric_confusion() {
        let net = fixtures::asymmetric_confusion();
        assert_eq!(
            cell_sets(&net),
            vec![node_set(["a", "d"]), node_set(["b", "c"])]
        );
    }

    #[test]
    fn cells_of_or_causes() {
        let net = fixtures::or_causes();
        assert_eq!(
            cell_sets(&net),
            vec![
                node_set(["a", "d"]),
                node_set(["b", "c", "g"]),
                node_set(["e", "f"]),
            ]
        );
    }

    #[test]
    fn disconnected_transitions_make_singleton_cells() {
        let net = OccurrenceNet::build(
            [
                ("t", ["p"].as_slice(), ["q"].as_slice()),
                ("u", ["r"].as_slice(), ["s"].as_slice()),
            ],
            &[],
        );
        assert_eq!(cell_sets(&net), vec![node_set(["t"]), node_set(["u"])]);
    }

    #[test]
    fn decomposition_is_a_partition() {
        for (_, net) in fixtures::all() {
            let cells = scell_decomposition(&net);
            let mut union = NodeSet::new();
            for c in &cells {
                assert!(union.is_disjoint(&c.transitions));
                union.extend(c.transitions.iter().cloned());
            }
            assert_eq!(&union, net.transitions());
        }
    }

    #[test]
    fn free_choice_cells_share_presets() {
        let net = fixtures::free_choice();
        for cell in scell_decomposition(&net) {
            let presets: Vec<NodeSet> =
                cell.transitions.iter().map(|t| net.preset(t)).collect();
            assert!(presets.windows(2).all(|w| w[0] == w[1]));
        }
    }

    fn cell_of(net: &OccurrenceNet, t: &str) -> SCell {
        scell_decomposition(net)
            .into_iter()
            .find(|c| c.transitions.contains(&NodeId::from(t)))
            .unwrap()
    }

    #[test]
    fn ominus_on_or_causes_choice_cell() {
        let net = fixtures::or_causes();
        let c3 = cell_of(&net, "b");
        assert_eq!(c3.min, node_set(["2", "3", "8"]));
        assert_eq!(c3.max, node_set(["10", "4", "5"]));

        let rem3 = ominus(&c3.subnet, &"3".into()).unwrap();
        assert_eq!(rem3.transitions(), &node_set(["b", "g"]));
        assert_eq!(rem3.places(), &node_set(["10", "2", "4", "8"]));
        assert_eq!(cell_sets(&rem3), vec![node_set(["b"]), node_set(["g"])]);

        let rem2 = ominus(&c3.subnet, &"2".into()).unwrap();
        assert_eq!(rem2.transitions(), &node_set(["g"]));
        assert_eq!(rem2.places(), &node_set(["10", "3", "8"]));
        assert_eq!(rem2.maximal_places(), node_set(["10", "3"]));
    }

    #[test]
    fn ominus_can_empty_a_cell() {
        let net = fixtures::or_causes();
        let c1 = cell_of(&net, "a");
        let rem = ominus(&c1.subnet, &"1".into()).unwrap();
        assert!(rem.is_empty());
    }

    #[test]
    fn ominus_of_untouched_place_only_drops_it() {
        let net = OccurrenceNet::build(
            [("t", ["p"].as_slice(), ["q"].as_slice())],
            &[],
        );
        let mut with_extra = net.clone();
        with_extra.add_place("r");
        with_extra.mark([]);
        let rem = ominus(&with_extra, &"r".into()).unwrap();
        let mut expected = net;
        expected.mark([]);
        assert_eq!(rem, expected);
    }

    #[test]
    fn ominus_rejects_non_minimal_places() {
        let net = fixtures::asymmetric_confusion();
        assert!(ominus(&net, &"3".into()).is_err());
    }

    #[test]
    fn ominus_strictly_shrinks_and_terminates() {
        for (_, net) in fixtures::all() {
            let mut frontier = vec![net];
            while let Some(n) = frontier.pop() {
                for p in n.minimal_places() {
                    let rem = ominus(&n, &p).unwrap();
                    assert!(rem.nodes().len() < n.nodes().len());
                    if !rem.is_empty() {
                        frontier.push(rem);
                    }
                }
            }
        }
    }

    #[test]
    fn transactions_of_or_causes() {
        let net = fixtures::or_causes();
        let c3 = cell_of(&net, "b");
        let txs: Vec<NodeSet> = transactions(&c3).iter().map(|t| t.transitions.clone()).collect();
        assert_eq!(txs, vec![node_set(["b", "g"]), node_set(["c"])]);
        let c1 = cell_of(&net, "a");
        let txs: Vec<NodeSet> = transactions(&c1).iter().map(|t| t.transitions.clone()).collect();
        assert_eq!(txs, vec![node_set(["a"]), node_set(["d"])]);
    }

    #[test]
    fn transaction_min_max_places() {
        let net = fixtures::or_causes();
        let c3 = cell_of(&net, "b");
        for tx in transactions(&c3) {
            assert!(tx.min_places.is_subset(&c3.min));
            let internal: NodeSet = tx
                .transitions
                .iter()
                .flat_map(|t| net.preset(t).union(&net.postset(t)).cloned().collect::<Vec<_>>())
                .collect();
            assert!(tx
                .max_places
                .iter()
                .all(|p| c3.max.contains(p) || internal.contains(p)));
        }
        let bg = transactions(&c3)
            .into_iter()
            .find(|t| t.transitions == node_set(["b", "g"]))
            .unwrap();
        assert_eq!(bg.max_places, node_set(["10", "4"]));
        assert_eq!(bg.min_places, node_set(["2", "8"]));
    }

    #[test]
    fn singleton_cell_has_one_transaction() {
        let net = OccurrenceNet::build([("t", ["p"].as_slice(), ["q"].as_slice())], &[]);
        let cells = scell_decomposition(&net);
        assert_eq!(transactions(&cells[0]).len(), 1);
    }

    /// Brute-force oracle: transactions are exactly the maximal elements of
    /// all conflict-free, causally closed transition subsets of the cell.
    fn brute_force_transactions(cell: &SCell) -> Vec<NodeSet> {
        let net = &cell.subnet;
        let rel = compute_relations(net);
        let all: Vec<NodeId> = cell.transitions.iter().cloned().collect();
        let n = all.len();
        assert!(n <= 10, "oracle only runs on small cells");
        let mut family: Vec<NodeSet> = Vec::new();
        for mask in 0u32..(1 << n) {
            let set: NodeSet = (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| all[i].clone())
                .collect();
            let conflict_free = set
                .iter()
                .all(|a| set.iter().all(|b| !rel.in_conflict(a, b)));
            let closed = set.iter().all(|t| {
                net.transitions()
                    .iter()
                    .filter(|u| *u != t && rel.precedes(u, t))
                    .all(|u| set.contains(u))
            });
            if conflict_free && closed {
                family.push(set);
            }
        }
        let mut maximal: Vec<NodeSet> = family
            .iter()
            .filter(|s| !family.iter().any(|t| *s != t && s.is_subset(t)))
            .cloned()
            .collect();
        maximal.sort();
        maximal.dedup();
        maximal
    }

    #[test]
    fn transaction_enumeration_matches_brute_force() {
        for (_, net) in fixtures::all() {
            for cell in scell_decomposition(&net) {
                let fast: Vec<NodeSet> = transactions(&cell)
                    .iter()
                    .map(|t| t.transitions.clone())
                    .collect();
                assert_eq!(fast, brute_force_transactions(&cell));
            }
        }
    }

    #[test]
    fn pes_of_asymmetric_confusion() {
        let net = fixtures::asymmetric_confusion();
        let pes = to_pes(&net);
        assert_eq!(pes.events, node_set(["a", "b", "c", "d"]));
        assert!(pes.precedes(&"a".into(), &"c".into()));
        assert!(pes.in_conflict(&"a".into(), &"d".into()));
        assert!(pes.in_conflict(&"d".into(), &"c".into()));
        assert!(!pes.in_conflict(&"a".into(), &"b".into()));
        assert!(pes.inheritance_holds());
        let im = pes.immediate_conflicts();
        assert!(im.contains(&("a".into(), "d".into())));
        assert!(im.contains(&("b".into(), "c".into())));
        assert!(!im.contains(&("d".into(), "c".into())));
    }

    #[test]
    fn pes_of_or_causes() {
        let net = fixtures::or_causes();
        let pes = to_pes(&net);
        let im = pes.immediate_conflicts();
        for (a, b) in [("a", "d"), ("e", "f"), ("b", "c"), ("c", "g")] {
            assert!(im.contains(&(a.into(), b.into())), "{a} #0 {b} missing");
        }
        assert!(pes.precedes(&"e".into(), &"c".into()));
        assert!(pes.in_conflict(&"f".into(), &"g".into()));
        assert!(pes.inheritance_holds());
    }

    #[test]
    fn conflict_free_net_has_empty_pes_conflict() {
        let net = OccurrenceNet::build(
            [
                ("t", ["p"].as_slice(), ["q"].as_slice()),
                ("u", ["q"].as_slice(), ["r"].as_slice()),
            ],
            &[],
        );
        let pes = to_pes(&net);
        assert!(pes.conflict.is_empty());
        assert!(pes.precedes(&"t".into(), &"u".into()));
    }
}
