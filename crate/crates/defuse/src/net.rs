//! Core net data types: occurrence nets, bags, nets with persistency, and
//! well-formedness validation.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Name prefixes reserved for generated nodes. Input nets must not use them.
pub const RESERVED_PREFIXES: &[&str] = &["neg:", "act:", "tx:", "prop:", "guard:"];

/// Identifier of a place or transition. Ordering is lexicographic on the
/// name, which fixes the canonical order used everywhere a set of nodes is
/// serialized.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn new(name: impl Into<String>) -> Self {
        NodeId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The negative-information place for a regular place.
    pub fn negated(&self) -> NodeId {
        NodeId(format!("neg:{}", self.0))
    }

    /// The activation place of a flattened transition.
    pub fn activation(&self) -> NodeId {
        NodeId(format!("act:{}", self.0))
    }

    pub fn is_reserved(&self) -> bool {
        RESERVED_PREFIXES.iter().any(|p| self.0.starts_with(p))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

pub type NodeSet = BTreeSet<NodeId>;

pub fn node_set<I: IntoIterator<Item = impl Into<NodeId>>>(items: I) -> NodeSet {
    items.into_iter().map(Into::into).collect()
}

/// Token count of a place in a bag: finite for regular places, `Omega` for
/// marked persistent places.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum Count {
    Finite(u64),
    Omega,
}

impl Count {
    pub fn is_zero(&self) -> bool {
        matches!(self, Count::Finite(0))
    }
}

impl fmt::Display for Count {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Count::Finite(n) => write!(f, "{n}"),
            Count::Omega => write!(f, "inf"),
        }
    }
}

/// A bag over places: finite multiplicities on regular places, 0 or infinity
/// on persistent ones. Infinity absorbs union and is a fixed point of
/// difference. Zero entries are never stored.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bag(BTreeMap<NodeId, Count>);

impl Bag {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_set(places: &NodeSet) -> Self {
        Bag(places
            .iter()
            .map(|p| (p.clone(), Count::Finite(1)))
            .collect())
    }

    pub fn count(&self, p: &NodeId) -> Count {
        self.0.get(p).copied().unwrap_or(Count::Finite(0))
    }

    pub fn contains(&self, p: &NodeId) -> bool {
        !self.count(p).is_zero()
    }

    pub fn insert(&mut self, p: NodeId, c: Count) {
        if c.is_zero() {
            self.0.remove(&p);
        } else {
            self.0.insert(p, c);
        }
    }

    pub fn add(&mut self, p: &NodeId, c: Count) {
        let next = match (self.count(p), c) {
            (_, Count::Omega) | (Count::Omega, _) => Count::Omega,
            (Count::Finite(a), Count::Finite(b)) => Count::Finite(a + b),
        };
        self.insert(p.clone(), next);
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, Count)> {
        self.0.iter().map(|(p, c)| (p, *c))
    }

    pub fn support(&self) -> NodeSet {
        self.0.keys().cloned().collect()
    }

    /// Set inclusion: every place of `places` carries at least one token.
    pub fn covers(&self, places: &NodeSet) -> bool {
        places.iter().all(|p| self.contains(p))
    }

    /// Multiset union (pointwise addition, with infinity absorbing).
    pub fn union(&self, other: &Bag) -> Bag {
        let mut out = self.clone();
        for (p, c) in other.iter() {
            out.add(p, c);
        }
        out
    }

    /// Difference by a set (each removed place loses one token). Infinite
    /// entries are unchanged. Panics if a finite entry would go negative;
    /// callers check enabledness first.
    pub fn minus_set(&self, places: &NodeSet) -> Bag {
        let mut out = self.clone();
        for p in places {
            match out.count(p) {
                Count::Omega => {}
                Count::Finite(n) => {
                    assert!(n > 0, "bag difference below zero at {p}");
                    out.insert(p.clone(), Count::Finite(n - 1));
                }
            }
        }
        out
    }

    /// Canonical one-line rendering, used for state identity and witnesses.
    pub fn render(&self) -> String {
        let items: Vec<String> = self
            .iter()
            .map(|(p, c)| match c {
                Count::Finite(1) => p.to_string(),
                c => format!("{p}={c}"),
            })
            .collect();
        format!("{{{}}}", items.join(", "))
    }
}

impl fmt::Debug for Bag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl FromIterator<(NodeId, Count)> for Bag {
    fn from_iter<T: IntoIterator<Item = (NodeId, Count)>>(iter: T) -> Self {
        let mut bag = Bag::new();
        for (p, c) in iter {
            bag.insert(p, c);
        }
        bag
    }
}

/// A finite occurrence net: acyclic flow, no backward conflicts, no
/// self-conflicts, together with a 1-safe initial marking.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct OccurrenceNet {
    places: NodeSet,
    transitions: NodeSet,
    pre: BTreeMap<NodeId, NodeSet>,
    post: BTreeMap<NodeId, NodeSet>,
    initial: NodeSet,
}

impl OccurrenceNet {
    pub fn new() -> Self {
        OccurrenceNet {
            places: NodeSet::new(),
            transitions: NodeSet::new(),
            pre: BTreeMap::new(),
            post: BTreeMap::new(),
            initial: NodeSet::new(),
        }
    }

    /// Builds a net from transition descriptions; places are created as
    /// mentioned. `initial` defaults to the minimal places when empty.
    pub fn build<'a>(
        transitions: impl IntoIterator<Item = (&'a str, &'a [&'a str], &'a [&'a str])>,
        initial: &[&str],
    ) -> Self {
        let mut net = OccurrenceNet::new();
        for (name, pre, post) in transitions {
            net.add_transition(
                name,
                pre.iter().copied().map(NodeId::from),
                post.iter().copied().map(NodeId::from),
            );
        }
        if initial.is_empty() {
            net.initial = net.minimal_places();
        } else {
            net.initial = node_set(initial.iter().copied());
        }
        net
    }

    pub fn add_place(&mut self, p: impl Into<NodeId>) -> NodeId {
        let p = p.into();
        self.places.insert(p.clone());
        p
    }

    pub fn add_transition(
        &mut self,
        t: impl Into<NodeId>,
        pre: impl IntoIterator<Item = NodeId>,
        post: impl IntoIterator<Item = NodeId>,
    ) -> NodeId {
        let t = t.into();
        self.transitions.insert(t.clone());
        for p in pre {
            self.add_place(p.clone());
            self.pre.entry(t.clone()).or_default().insert(p.clone());
            self.post.entry(p).or_default().insert(t.clone());
        }
        for q in post {
            self.add_place(q.clone());
            self.post.entry(t.clone()).or_default().insert(q.clone());
            self.pre.entry(q).or_default().insert(t.clone());
        }
        t
    }

    pub fn mark(&mut self, places: impl IntoIterator<Item = NodeId>) {
        self.initial = places.into_iter().collect();
    }

    pub fn places(&self) -> &NodeSet {
        &self.places
    }

    pub fn transitions(&self) -> &NodeSet {
        &self.transitions
    }

    pub fn initial(&self) -> &NodeSet {
        &self.initial
    }

    pub fn is_place(&self, n: &NodeId) -> bool {
        self.places.contains(n)
    }

    pub fn is_transition(&self, n: &NodeId) -> bool {
        self.transitions.contains(n)
    }

    pub fn preset(&self, n: &NodeId) -> NodeSet {
        self.pre.get(n).cloned().unwrap_or_default()
    }

    pub fn postset(&self, n: &NodeId) -> NodeSet {
        self.post.get(n).cloned().unwrap_or_default()
    }

    /// Flow arcs in canonical order.
    pub fn arcs(&self) -> Vec<(NodeId, NodeId)> {
        let mut arcs = Vec::new();
        for (src, dsts) in &self.post {
            for dst in dsts {
                arcs.push((src.clone(), dst.clone()));
            }
        }
        arcs
    }

    pub fn nodes(&self) -> NodeSet {
        self.places.union(&self.transitions).cloned().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.places.is_empty() && self.transitions.is_empty()
    }

    /// Places with no producer.
    pub fn minimal_places(&self) -> NodeSet {
        self.places
            .iter()
            .filter(|p| self.preset(p).is_empty())
            .cloned()
            .collect()
    }

    /// Places with no consumer.
    pub fn maximal_places(&self) -> NodeSet {
        self.places
            .iter()
            .filter(|p| self.postset(p).is_empty())
            .cloned()
            .collect()
    }

    /// The subnet induced by `keep`: arcs with both endpoints inside, initial
    /// marking restricted.
    pub fn induced(&self, keep: &NodeSet) -> OccurrenceNet {
        let mut net = OccurrenceNet::new();
        for p in self.places.intersection(keep) {
            net.add_place(p.clone());
        }
        for t in self.transitions.intersection(keep) {
            let pre = self.preset(t).intersection(keep).cloned().collect::<Vec<_>>();
            let post = self.postset(t).intersection(keep).cloned().collect::<Vec<_>>();
            net.add_transition(t.clone(), pre, post);
        }
        net.initial = self.initial.intersection(keep).cloned().collect();
        net
    }

    /// Topological order of all nodes along the flow relation, or the nodes
    /// of some cycle if the flow is not acyclic.
    pub fn topological_order(&self) -> Result<Vec<NodeId>, NodeSet> {
        let mut indegree: BTreeMap<NodeId, usize> =
            self.nodes().into_iter().map(|n| (n, 0)).collect();
        for (_, dst) in self.arcs() {
            *indegree.get_mut(&dst).unwrap() += 1;
        }
        let mut ready: Vec<NodeId> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(n, _)| n.clone())
            .collect();
        let mut order = Vec::new();
        while let Some(n) = ready.pop() {
            order.push(n.clone());
            for m in self.postset(&n) {
                let d = indegree.get_mut(&m).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(m);
                }
            }
        }
        if order.len() == indegree.len() {
            Ok(order)
        } else {
            Err(indegree
                .into_iter()
                .filter(|(n, _)| !order.contains(n))
                .map(|(n, _)| n)
                .collect())
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        for n in self.nodes() {
            if n.is_reserved() || n.as_str().is_empty() || n.as_str().contains(['@', ' ', '\t']) {
                report.push(ViolationKind::ReservedName, vec![n.clone()]);
            }
        }
        if let Err(cycle) = self.topological_order() {
            report.push(ViolationKind::Acyclic, cycle.into_iter().collect());
            // Remaining checks assume acyclicity.
            return report;
        }
        for p in &self.places {
            if self.preset(p).len() > 1 {
                report.push(ViolationKind::BackwardConflict, vec![p.clone()]);
            }
        }
        for t in &self.transitions {
            if self.preset(t).is_empty() || self.postset(t).is_empty() {
                report.push(ViolationKind::EmptyPrePost, vec![t.clone()]);
            }
        }
        for t in self.self_conflicting() {
            report.push(ViolationKind::SelfConflict, vec![t]);
        }
        if !self.initial.is_empty() {
            for p in &self.initial {
                if !self.places.contains(p) {
                    report.push(ViolationKind::UnknownInitialPlace, vec![p.clone()]);
                }
            }
            if self.initial != self.minimal_places() {
                let diff: NodeSet = self
                    .initial
                    .symmetric_difference(&self.minimal_places())
                    .cloned()
                    .collect();
                report.push(ViolationKind::InitialNotMinimal, diff.into_iter().collect());
            }
        }
        report
    }

    /// Transitions `t` with `t # t`: two conflicting causes feed the same
    /// transition. Assumes acyclic flow.
    fn self_conflicting(&self) -> Vec<NodeId> {
        let desc = self.descendants_map();
        let mut bad = Vec::new();
        'outer: for t in &self.transitions {
            for t1 in &self.transitions {
                if !desc[t1].contains(t) {
                    continue;
                }
                for t2 in self.immediate_conflicts(t1) {
                    if desc[&t2].contains(t) {
                        bad.push(t.clone());
                        continue 'outer;
                    }
                }
            }
        }
        bad
    }

    fn immediate_conflicts(&self, t: &NodeId) -> Vec<NodeId> {
        let mut out = NodeSet::new();
        for p in self.preset(t) {
            for u in self.postset(&p) {
                if &u != t {
                    out.insert(u);
                }
            }
        }
        out.into_iter().collect()
    }

    /// For each node, the set of nodes reachable along the flow (reflexive).
    pub fn descendants_map(&self) -> BTreeMap<NodeId, NodeSet> {
        let mut map = BTreeMap::new();
        for n in self.nodes() {
            let mut seen = NodeSet::new();
            let mut stack = vec![n.clone()];
            while let Some(x) = stack.pop() {
                if seen.insert(x.clone()) {
                    for y in self.postset(&x) {
                        stack.push(y.clone());
                    }
                }
            }
            map.insert(n, seen);
        }
        map
    }
}

impl Default for OccurrenceNet {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Acyclic,
    BackwardConflict,
    SelfConflict,
    EmptyPrePost,
    InitialNotMinimal,
    UnknownInitialPlace,
    ReservedName,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub nodes: Vec<NodeId>,
}

/// Violations are data, not failures: an empty report certifies
/// well-formedness.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn push(&mut self, kind: ViolationKind, nodes: Vec<NodeId>) {
        self.violations.push(Violation { kind, nodes });
    }

    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

/// A transition of a p-net: set preset, bag postset (1 on regular places,
/// infinity on persistent ones).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PTransition {
    pub preset: NodeSet,
    pub postset: Bag,
}

/// A net with persistency: regular and persistent places, bag-valued states.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PNet {
    regular: NodeSet,
    persistent: NodeSet,
    transitions: BTreeMap<NodeId, PTransition>,
    initial: Bag,
}

impl PNet {
    pub fn new() -> Self {
        PNet {
            regular: NodeSet::new(),
            persistent: NodeSet::new(),
            transitions: BTreeMap::new(),
            initial: Bag::new(),
        }
    }

    /// Views an occurrence net as a p-net with no persistent places.
    pub fn from_occurrence(net: &OccurrenceNet) -> Self {
        let mut out = PNet::new();
        for p in net.places() {
            out.add_regular(p.clone());
        }
        for t in net.transitions() {
            out.add_transition(t.clone(), net.preset(t), net.postset(t));
        }
        out.initial = Bag::from_set(net.initial());
        out
    }

    pub fn add_regular(&mut self, p: NodeId) {
        assert!(!self.persistent.contains(&p), "place kind clash: {p}");
        self.regular.insert(p);
    }

    pub fn add_persistent(&mut self, p: NodeId) {
        assert!(!self.regular.contains(&p), "place kind clash: {p}");
        self.persistent.insert(p);
    }

    /// Adds a transition; postset multiplicities are derived from place
    /// kinds, so the p-net postset invariant holds by construction. Places
    /// must have been declared.
    pub fn add_transition(
        &mut self,
        t: NodeId,
        preset: impl IntoIterator<Item = NodeId>,
        postset: impl IntoIterator<Item = NodeId>,
    ) {
        let preset: NodeSet = preset.into_iter().collect();
        let mut bag = Bag::new();
        for q in postset {
            let c = if self.persistent.contains(&q) {
                Count::Omega
            } else {
                assert!(self.regular.contains(&q), "unknown place {q} in postset of {t}");
                Count::Finite(1)
            };
            bag.add(&q, c);
        }
        for p in &preset {
            assert!(
                self.regular.contains(p) || self.persistent.contains(p),
                "unknown place {p} in preset of {t}"
            );
        }
        self.transitions.insert(t, PTransition { preset, postset: bag });
    }

    /// Marks the given places: one token on regular places, infinity on
    /// persistent ones.
    pub fn mark(&mut self, places: impl IntoIterator<Item = NodeId>) {
        let mut bag = Bag::new();
        for p in places {
            let c = if self.persistent.contains(&p) {
                Count::Omega
            } else {
                Count::Finite(1)
            };
            bag.insert(p, c);
        }
        self.initial = bag;
    }

    pub fn set_initial(&mut self, bag: Bag) {
        self.initial = bag;
    }

    pub fn regular(&self) -> &NodeSet {
        &self.regular
    }

    pub fn persistent(&self) -> &NodeSet {
        &self.persistent
    }

    pub fn is_persistent_place(&self, p: &NodeId) -> bool {
        self.persistent.contains(p)
    }

    pub fn places(&self) -> NodeSet {
        self.regular.union(&self.persistent).cloned().collect()
    }

    pub fn transitions(&self) -> impl Iterator<Item = (&NodeId, &PTransition)> {
        self.transitions.iter()
    }

    pub fn transition_names(&self) -> NodeSet {
        self.transitions.keys().cloned().collect()
    }

    pub fn transition(&self, t: &NodeId) -> Option<&PTransition> {
        self.transitions.get(t)
    }

    pub fn initial(&self) -> &Bag {
        &self.initial
    }

    /// A persistent transition touches persistent places only; it is fired
    /// at most once per run under the non-stuttering semantics.
    pub fn is_persistent_transition(&self, t: &NodeId) -> bool {
        let tr = &self.transitions[t];
        tr.preset.iter().all(|p| self.persistent.contains(p))
            && tr.postset.iter().all(|(p, _)| self.persistent.contains(p))
    }

    pub fn remove_transition(&mut self, t: &NodeId) {
        self.transitions.remove(t);
    }

    pub fn remove_place(&mut self, p: &NodeId) {
        self.regular.remove(p);
        self.persistent.remove(p);
        let mut initial = std::mem::take(&mut self.initial);
        initial.insert(p.clone(), Count::Finite(0));
        self.initial = initial;
    }

    /// Producers of a place among the transitions.
    pub fn producers(&self, p: &NodeId) -> NodeSet {
        self.transitions
            .iter()
            .filter(|(_, tr)| tr.postset.contains(p))
            .map(|(t, _)| t.clone())
            .collect()
    }

    /// Consumers of a place among the transitions.
    pub fn consumers(&self, p: &NodeId) -> NodeSet {
        self.transitions
            .iter()
            .filter(|(_, tr)| tr.preset.contains(p))
            .map(|(t, _)| t.clone())
            .collect()
    }
}

impl Default for PNet {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn asymmetric_confusion_net_is_valid() {
        let net = fixtures::asymmetric_confusion();
        assert!(net.validate().is_valid());
    }

    #[test]
    fn arc_cycle_is_reported() {
        let mut net = OccurrenceNet::new();
        net.add_transition("t", [NodeId::from("p")], [NodeId::from("p")]);
        let report = net.validate();
        assert!(report.has(ViolationKind::Acyclic));
    }

    #[test]
    fn two_producers_are_a_backward_conflict() {
        let net = OccurrenceNet::build(
            [
                ("t", ["a"].as_slice(), ["p"].as_slice()),
                ("u", ["b"].as_slice(), ["p"].as_slice()),
            ],
            &[],
        );
        let report = net.validate();
        assert!(report.has(ViolationKind::BackwardConflict));
        assert!(report
            .violations
            .iter()
            .any(|v| v.nodes == vec![NodeId::from("p")]));
    }

    #[test]
    fn inherited_self_conflict_is_reported() {
        // u1 and u2 compete for x; t needs the outputs of both.
        let net = OccurrenceNet::build(
            [
                ("u1", ["x"].as_slice(), ["p"].as_slice()),
                ("u2", ["x"].as_slice(), ["q"].as_slice()),
                ("t", ["p", "q"].as_slice(), ["r"].as_slice()),
            ],
            &[],
        );
        let report = net.validate();
        assert!(report.has(ViolationKind::SelfConflict));
    }

    #[test]
    fn min_max_places() {
        let net = fixtures::or_causes();
        assert_eq!(net.minimal_places(), node_set(["1", "2", "7"]));
        assert_eq!(net.maximal_places(), node_set(["10", "4", "5", "6", "9"]));

        let mut isolated = OccurrenceNet::new();
        isolated.add_place("p");
        assert_eq!(isolated.minimal_places(), node_set(["p"]));
        assert_eq!(isolated.maximal_places(), node_set(["p"]));
    }

    #[test]
    fn concurrent_run_min_max() {
        // The two-transition deterministic run: a: 1 -> 3, b: 2 -> 4.
        let net = OccurrenceNet::build(
            [
                ("a", ["1"].as_slice(), ["3"].as_slice()),
                ("b", ["2"].as_slice(), ["4"].as_slice()),
            ],
            &[],
        );
        assert_eq!(net.minimal_places(), node_set(["1", "2"]));
        assert_eq!(net.maximal_places(), node_set(["3", "4"]));
    }

    #[test]
    fn non_minimal_marking_is_rejected() {
        let mut net = OccurrenceNet::build(
            [("a", ["1"].as_slice(), ["2"].as_slice())],
            &[],
        );
        net.mark([NodeId::from("2")]);
        assert!(net.validate().has(ViolationKind::InitialNotMinimal));
    }

    #[test]
    fn bag_union_difference_roundtrip() {
        let m = node_set(["a", "b"]);
        let mut b = Bag::from_set(&node_set(["c"]));
        b.insert(NodeId::from("x"), Count::Omega);
        let roundtrip = b.union(&Bag::from_set(&m)).minus_set(&m);
        assert_eq!(roundtrip, b);
        // Infinity is a fixed point of union with itself and difference.
        let omega_again = b.union(&b).minus_set(&node_set(["x"]));
        assert_eq!(omega_again.count(&NodeId::from("x")), Count::Omega);
    }

    #[test]
    fn reserved_names_are_rejected() {
        let net = OccurrenceNet::build(
            [("t", ["neg:p"].as_slice(), ["q"].as_slice())],
            &[],
        );
        assert!(net.validate().has(ViolationKind::ReservedName));
    }
}
