//! The compiler core: occurrence nets to dynamic p-nets, flattening to
//! static p-nets, pruning, and transaction expansion.

use std::collections::BTreeMap;
use std::collections::HashMap;

use crate::net::{Bag, Count, NodeId, NodeSet, OccurrenceNet, PNet, ValidationReport};
use crate::structure::{self, Transaction};

#[derive(Debug, thiserror::Error)]
pub enum CompileError {
    #[error("input is not a valid occurrence net: {0:?}")]
    Invalid(ValidationReport),
}

/// The recursive body of a dynamic p-net: a finite set of transitions and a
/// bag. Transition postsets are again values of this type.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct DynNet {
    pub transitions: std::collections::BTreeSet<DynTransition>,
    pub bag: Bag,
}

impl DynNet {
    pub fn new(transitions: impl IntoIterator<Item = DynTransition>, bag: Bag) -> Self {
        DynNet {
            transitions: transitions.into_iter().collect(),
            bag,
        }
    }
}

/// A dynamic transition: consuming the preset releases the transitions and
/// tokens of the nested net. Equality is structural; the encoder guarantees
/// that equal values always carry the same name, so identical transitions
/// are one.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct DynTransition {
    pub name: NodeId,
    pub preset: NodeSet,
    pub post: DynNet,
}

/// A dynamic p-net with its place signature. Regular and persistent places
/// cover everything mentioned in the nested transitions.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DynamicPNet {
    pub regular: NodeSet,
    pub persistent: NodeSet,
    pub top: DynNet,
}

impl DynamicPNet {
    /// All transitions appearing at any nesting depth, deduplicated by
    /// value.
    pub fn all_transitions(&self) -> std::collections::BTreeSet<DynTransition> {
        let mut out = std::collections::BTreeSet::new();
        collect_transitions(&self.top, &mut out);
        out
    }

    pub fn top_transitions(&self) -> &std::collections::BTreeSet<DynTransition> {
        &self.top.transitions
    }
}

fn collect_transitions(
    net: &DynNet,
    out: &mut std::collections::BTreeSet<DynTransition>,
) {
    for t in &net.transitions {
        if out.insert(t.clone()) {
            collect_transitions(&t.post, out);
        }
    }
}

/// Everything the rest of the pipeline needs to know about one transaction
/// transition of the encoding.
#[derive(Clone, Debug)]
pub struct TxInfo {
    /// Transitions of the source net executed atomically by this transition.
    pub events: NodeSet,
    /// The cell the transaction belongs to, as its transition set.
    pub cell: NodeSet,
    /// Presets and postsets of the member transitions in the source net.
    pub theta: Transaction,
}

/// One s-cell encountered during compilation, top-level or nested.
#[derive(Clone, Debug)]
pub struct CellInfo {
    /// The cell's transitions in the source net.
    pub transitions: NodeSet,
    pub min: NodeSet,
    pub max: NodeSet,
    /// Transaction transition name per transaction, in canonical order.
    pub choices: Vec<(NodeId, Transaction)>,
}

/// The full compilation artifact: source, dynamic encoding, flat net,
/// pruned flat net, and the bookkeeping tables tying them together.
#[derive(Clone, Debug)]
pub struct Compilation {
    pub source: OccurrenceNet,
    pub dynamic: DynamicPNet,
    pub flat: PNet,
    pub pruned: PNet,
    /// Transaction transitions by name.
    pub tx_info: BTreeMap<NodeId, TxInfo>,
    /// Names of negative-propagation transitions.
    pub prop_names: NodeSet,
    /// Every distinct cell met during encoding, keyed by transition set.
    pub cells: BTreeMap<NodeSet, CellInfo>,
}

impl Compilation {
    pub fn compile(net: &OccurrenceNet) -> Result<Compilation, CompileError> {
        let report = net.validate();
        if !report.is_valid() {
            return Err(CompileError::Invalid(report));
        }
        let mut encoder = Encoder::new();
        let top = encoder.encode_subnet(net);
        let mut persistent = NodeSet::new();
        collect_negatives(&top, &mut persistent);
        let dynamic = DynamicPNet {
            regular: net.places().clone(),
            persistent,
            top: DynNet::new(top, Bag::from_set(net.initial())),
        };
        let flat = flatten(&dynamic);
        let pruned = prune(&flat);
        Ok(Compilation {
            source: net.clone(),
            dynamic,
            flat,
            pruned,
            tx_info: encoder.tx_info,
            prop_names: encoder.prop_names,
            cells: encoder.cells,
        })
    }

    /// Events of the source net encoded by a compiled transition: the
    /// transaction's transitions, or nothing for negative propagation.
    pub fn dec(&self, t: &NodeId) -> NodeSet {
        match self.tx_info.get(t) {
            Some(info) => info.events.clone(),
            None => NodeSet::new(),
        }
    }

    /// The uniformed net: pruned by default, matching the CLI.
    pub fn uniformed(&self, pruned: bool) -> &PNet {
        if pruned {
            &self.pruned
        } else {
            &self.flat
        }
    }

    /// Replaces every non-atomic transaction transition by a choice
    /// transition followed by a fresh copy of the transaction's process.
    pub fn expand_transactions(&self, net: &PNet) -> PNet {
        expand_transactions(net, &self.source, &self.tx_info)
    }
}

fn collect_negatives(transitions: &std::collections::BTreeSet<DynTransition>, out: &mut NodeSet) {
    for t in transitions {
        for p in &t.preset {
            if p.as_str().starts_with("neg:") {
                out.insert(p.clone());
            }
        }
        for (p, c) in t.post.bag.iter() {
            if c == Count::Omega {
                out.insert(p.clone());
            }
        }
        collect_negatives(&t.post.transitions, out);
    }
}

struct Encoder {
    /// Residual subnets are identified by their node sets; encoding the same
    /// residue reached along different removal orders is done once.
    memo: HashMap<NodeSet, std::collections::BTreeSet<DynTransition>>,
    /// Canonical name per distinct transition value.
    names: HashMap<(NodeSet, DynNet), NodeId>,
    used: NodeSet,
    tx_info: BTreeMap<NodeId, TxInfo>,
    prop_names: NodeSet,
    cells: BTreeMap<NodeSet, CellInfo>,
}

impl Encoder {
    fn new() -> Self {
        Encoder {
            memo: HashMap::new(),
            names: HashMap::new(),
            used: NodeSet::new(),
            tx_info: BTreeMap::new(),
            prop_names: NodeSet::new(),
            cells: BTreeMap::new(),
        }
    }

    /// One transaction transition per transaction of each cell, one
    /// propagation transition per minimal place of each cell.
    fn encode_subnet(&mut self, sub: &OccurrenceNet) -> std::collections::BTreeSet<DynTransition> {
        let key = sub.nodes();
        if let Some(done) = self.memo.get(&key) {
            return done.clone();
        }
        let mut out = std::collections::BTreeSet::new();
        for cell in structure::scell_decomposition(sub) {
            let mut choices = Vec::new();
            for theta in structure::transactions(&cell) {
                let mut post = Bag::from_set(&theta.max_places);
                for p in cell.max.difference(&theta.max_places) {
                    post.insert(p.negated(), Count::Omega);
                }
                let value = DynNet::new([], post);
                let name = self.name_for(
                    format!("tx:{}/{}", join(&cell.min), join(&theta.transitions)),
                    &cell.min,
                    &value,
                );
                self.tx_info.entry(name.clone()).or_insert_with(|| TxInfo {
                    events: theta.transitions.clone(),
                    cell: cell.transitions.clone(),
                    theta: theta.clone(),
                });
                choices.push((name.clone(), theta));
                out.insert(DynTransition {
                    name,
                    preset: cell.min.clone(),
                    post: value,
                });
            }
            for p in &cell.min {
                let residual = structure::ominus(&cell.subnet, p).expect("minimal by construction");
                let released = self.encode_subnet(&residual);
                let mut post = Bag::new();
                for q in cell.max.difference(&residual.maximal_places()) {
                    post.insert(q.negated(), Count::Omega);
                }
                let value = DynNet::new(released, post);
                let preset: NodeSet = [p.negated()].into_iter().collect();
                let name = self.name_for(
                    format!("prop:{}/{}", join(&cell.min), p),
                    &preset,
                    &value,
                );
                self.prop_names.insert(name.clone());
                out.insert(DynTransition {
                    name,
                    preset,
                    post: value,
                });
            }
            self.cells
                .entry(cell.transitions.clone())
                .or_insert_with(|| CellInfo {
                    transitions: cell.transitions.clone(),
                    min: cell.min.clone(),
                    max: cell.max.clone(),
                    choices,
                });
        }
        self.memo.insert(key, out.clone());
        out
    }

    /// Returns the canonical name of a transition value. The readable base
    /// name is taken when free; a distinct value that would collide gets a
    /// numeric suffix (deterministic, since encoding order is canonical).
    fn name_for(&mut self, base: String, preset: &NodeSet, post: &DynNet) -> NodeId {
        let key = (preset.clone(), post.clone());
        if let Some(existing) = self.names.get(&key) {
            return existing.clone();
        }
        let mut candidate = NodeId::new(base.clone());
        let mut k = 1;
        while self.used.contains(&candidate) {
            k += 1;
            candidate = NodeId::new(format!("{base}#{k}"));
        }
        self.used.insert(candidate.clone());
        self.names.insert(key, candidate.clone());
        candidate
    }
}

fn join(set: &NodeSet) -> String {
    set.iter()
        .map(|n| n.as_str())
        .collect::<Vec<_>>()
        .join(",")
}

/// Encodes a marked occurrence net as a dynamic p-net: the transitions are
/// the transactions and negative propagations of its s-cells, the bag is
/// the initial marking.
pub fn encode(net: &OccurrenceNet) -> Result<DynamicPNet, CompileError> {
    Ok(Compilation::compile(net)?.dynamic)
}

/// Flattens a dynamic p-net: every nested transition becomes a flat one
/// guarded by a persistent activation place; firing a releaser marks the
/// activation places of the transitions it releases.
pub fn flatten(dynamic: &DynamicPNet) -> PNet {
    let all = dynamic.all_transitions();
    let mut net = PNet::new();
    for p in &dynamic.regular {
        net.add_regular(p.clone());
    }
    for p in &dynamic.persistent {
        net.add_persistent(p.clone());
    }
    for t in &all {
        net.add_persistent(t.name.activation());
    }
    for t in &all {
        let mut preset = t.preset.clone();
        preset.insert(t.name.activation());
        let mut postset: Vec<NodeId> = t.post.bag.iter().map(|(p, _)| p.clone()).collect();
        for released in &t.post.transitions {
            postset.push(released.name.activation());
        }
        net.add_transition(t.name.clone(), preset, postset);
    }
    let mut initial = dynamic.top.bag.clone();
    for t in &dynamic.top.transitions {
        initial.insert(t.name.activation(), Count::Omega);
    }
    net.set_initial(initial);
    net
}

/// Removes transitions that can never fire and places that can never be
/// marked (least fixed point over the flow graph), then auxiliary places
/// left with no arcs. Firing behavior from the initial bag is unchanged.
pub fn prune(net: &PNet) -> PNet {
    let mut markable: NodeSet = net.initial().support();
    let mut fireable: NodeSet = NodeSet::new();
    loop {
        let mut changed = false;
        for (t, tr) in net.transitions() {
            if !fireable.contains(t) && tr.preset.iter().all(|p| markable.contains(p)) {
                fireable.insert(t.clone());
                for (q, _) in tr.postset.iter() {
                    markable.insert(q.clone());
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut out = PNet::new();
    let mut touched = NodeSet::new();
    for (t, tr) in net.transitions() {
        if fireable.contains(t) {
            touched.extend(tr.preset.iter().cloned());
            touched.extend(tr.postset.iter().map(|(p, _)| p.clone()));
        }
    }
    let keep = |p: &NodeId, persistent: bool| {
        markable.contains(p) && (touched.contains(p) || !persistent)
    };
    for p in net.regular() {
        if keep(p, false) {
            out.add_regular(p.clone());
        }
    }
    for p in net.persistent() {
        if keep(p, true) {
            out.add_persistent(p.clone());
        }
    }
    for (t, tr) in net.transitions() {
        if fireable.contains(t) {
            out.add_transition(
                t.clone(),
                tr.preset.clone(),
                tr.postset.iter().map(|(p, _)| p.clone()).collect::<Vec<_>>(),
            );
        }
    }
    let initial: Bag = net
        .initial()
        .iter()
        .filter(|(p, _)| out.places().contains(*p))
        .map(|(p, c)| (p.clone(), c))
        .collect();
    out.set_initial(initial);
    out
}

/// Rebuilds the net with every non-atomic transaction transition split into
/// a choice transition plus a fresh copy of the transaction's process.
/// Non-final nodes of the copy are renamed; final places stay shared.
pub fn expand_transactions(
    net: &PNet,
    source: &OccurrenceNet,
    tx_info: &BTreeMap<NodeId, TxInfo>,
) -> PNet {
    let expanded: Vec<(NodeId, &TxInfo)> = net
        .transitions()
        .filter_map(|(t, _)| {
            tx_info
                .get(t)
                .filter(|info| info.theta.transitions.len() > 1)
                .map(|info| (t.clone(), info))
        })
        .collect();

    let mut out = PNet::new();
    for p in net.regular() {
        out.add_regular(p.clone());
    }
    for p in net.persistent() {
        out.add_persistent(p.clone());
    }
    // Fresh copies of the non-final places of each expanded transaction.
    for (t, info) in &expanded {
        let mut places = NodeSet::new();
        for u in &info.theta.transitions {
            places.extend(source.preset(u));
            places.extend(source.postset(u));
        }
        for p in places.difference(&info.theta.max_places) {
            out.add_regular(rename(p, t));
        }
    }

    for (t, tr) in net.transitions() {
        match expanded.iter().find(|(name, _)| name == t) {
            None => {
                out.add_transition(
                    t.clone(),
                    tr.preset.clone(),
                    tr.postset.iter().map(|(p, _)| p.clone()).collect::<Vec<_>>(),
                );
            }
            Some((_, info)) => {
                // Choice transition: same preset; the postset enables the
                // copy's initial places and keeps the negative places.
                let mut postset: Vec<NodeId> = info
                    .theta
                    .min_places
                    .iter()
                    .map(|p| rename(p, t))
                    .collect();
                for (p, _) in tr.postset.iter() {
                    if net.persistent().contains(p) {
                        postset.push(p.clone());
                    }
                }
                out.add_transition(t.clone(), tr.preset.clone(), postset);
            }
        }
    }
    for (t, info) in &expanded {
        for u in &info.theta.transitions {
            let pre: Vec<NodeId> = source
                .preset(u)
                .iter()
                .map(|p| rename_unless_final(p, t, &info.theta.max_places))
                .collect();
            let post: Vec<NodeId> = source
                .postset(u)
                .iter()
                .map(|p| rename_unless_final(p, t, &info.theta.max_places))
                .collect();
            out.add_transition(rename(u, t), pre, post);
        }
    }
    out.set_initial(net.initial().clone());
    out
}

fn rename(n: &NodeId, host: &NodeId) -> NodeId {
    NodeId::new(format!("{n}@{host}"))
}

fn rename_unless_final(p: &NodeId, host: &NodeId, finals: &NodeSet) -> NodeId {
    if finals.contains(p) {
        p.clone()
    } else {
        rename(p, host)
    }
}
