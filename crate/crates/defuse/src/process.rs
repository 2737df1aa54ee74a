//! Persistent processes of uniformed nets: enumeration, cause formulas with
//! OR-fan-in on persistent places, legal sequences, and the
//! complete-concurrency certificate.

use std::collections::BTreeMap;
use std::time::Instant;

use serde_json::json;

use crate::net::{Bag, NodeId, NodeSet, PNet};
use crate::report::CertReport;
use crate::semantics::{self, SemanticsError};

#[derive(Debug, thiserror::Error)]
pub enum ProcessError {
    #[error("sequence repeats transition {0}")]
    Duplicate(NodeId),
    #[error("transition {0} is not part of this process")]
    Foreign(NodeId),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}

/// A persistent process: the subnet of a host p-net induced by the fired
/// transitions of one run class, recording every producer of each
/// persistent place as an OR-cause. The morphism into the host is the
/// identity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PersistentProcess {
    pub transitions: NodeSet,
    pub places: NodeSet,
    pub persistent: NodeSet,
    /// Producers within the process, per place.
    pub producers: BTreeMap<NodeId, NodeSet>,
    /// Consumers within the process, per place.
    pub consumers: BTreeMap<NodeId, NodeSet>,
    /// Preset per transition (as in the host net).
    pub preset: BTreeMap<NodeId, NodeSet>,
    /// Postset support per transition (as in the host net).
    pub postset: BTreeMap<NodeId, NodeSet>,
    /// Host marking restricted to the process places.
    pub initial: Bag,
}

impl PersistentProcess {
    /// Builds the process induced by a fired transition set: places are the
    /// presets and postsets of the fired transitions.
    pub fn from_fired(net: &PNet, fired: &NodeSet) -> PersistentProcess {
        let mut places = NodeSet::new();
        let mut preset = BTreeMap::new();
        let mut postset = BTreeMap::new();
        for t in fired {
            let tr = net.transition(t).expect("fired transition exists in host");
            places.extend(tr.preset.iter().cloned());
            places.extend(tr.postset.iter().map(|(p, _)| p.clone()));
            preset.insert(t.clone(), tr.preset.clone());
            postset.insert(t.clone(), tr.postset.support());
        }
        let mut producers: BTreeMap<NodeId, NodeSet> =
            places.iter().map(|p| (p.clone(), NodeSet::new())).collect();
        let mut consumers = producers.clone();
        for t in fired {
            for p in &preset[t] {
                consumers.get_mut(p).unwrap().insert(t.clone());
            }
            for p in &postset[t] {
                producers.get_mut(p).unwrap().insert(t.clone());
            }
        }
        let initial: Bag = net
            .initial()
            .iter()
            .filter(|(p, _)| places.contains(*p))
            .map(|(p, c)| (p.clone(), c))
            .collect();
        PersistentProcess {
            transitions: fired.clone(),
            persistent: places
                .iter()
                .filter(|p| net.is_persistent_place(p))
                .cloned()
                .collect(),
            places,
            producers,
            consumers,
            preset,
            postset,
            initial,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// The process as a standalone p-net, for replay and export.
    pub fn as_pnet(&self) -> PNet {
        let mut net = PNet::new();
        for p in &self.places {
            if self.persistent.contains(p) {
                net.add_persistent(p.clone());
            } else {
                net.add_regular(p.clone());
            }
        }
        for t in &self.transitions {
            net.add_transition(
                t.clone(),
                self.preset[t].clone(),
                self.postset[t].iter().cloned().collect::<Vec<_>>(),
            );
        }
        net.set_initial(self.initial.clone());
        net
    }

    /// Causal order induced by the formulas: `a` precedes `b` when `a`
    /// appears in every prime implicant of `b`'s causes.
    pub fn always_precedes(&self, a: &NodeId, b: &NodeId) -> bool {
        let phi = cause_formula(self, b);
        !phi.implicants.is_empty() && phi.implicants.iter().all(|imp| imp.contains(a))
    }
}

/// A negation-free cause formula in canonical disjunctive normal form: the
/// prime implicants are the alternative cause collections. `true` is the
/// singleton empty implicant; formulas of process nodes are never false.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct CauseFormula {
    pub implicants: std::collections::BTreeSet<NodeSet>,
}

impl CauseFormula {
    pub fn truth() -> CauseFormula {
        CauseFormula {
            implicants: [NodeSet::new()].into_iter().collect(),
        }
    }

    pub fn is_truth(&self) -> bool {
        self.implicants.len() == 1 && self.implicants.iter().next().unwrap().is_empty()
    }

    /// Keeps only minimal implicants; the antichain is the set of prime
    /// implicants of a monotone formula.
    fn absorb(implicants: impl IntoIterator<Item = NodeSet>) -> CauseFormula {
        let all: Vec<NodeSet> = implicants.into_iter().collect();
        let minimal = all
            .iter()
            .filter(|s| !all.iter().any(|t| *t != **s && t.is_subset(s)))
            .cloned()
            .collect();
        CauseFormula { implicants: minimal }
    }

    pub fn or(&self, other: &CauseFormula) -> CauseFormula {
        Self::absorb(self.implicants.iter().chain(&other.implicants).cloned())
    }

    pub fn and(&self, other: &CauseFormula) -> CauseFormula {
        let mut products = Vec::new();
        for a in &self.implicants {
            for b in &other.implicants {
                products.push(a.union(b).cloned().collect());
            }
        }
        Self::absorb(products)
    }

    pub fn and_atom(&self, t: &NodeId) -> CauseFormula {
        Self::absorb(self.implicants.iter().map(|imp| {
            let mut next = imp.clone();
            next.insert(t.clone());
            next
        }))
    }

    /// Some collection of causes already appears in the fired set.
    pub fn satisfied_by(&self, fired: &NodeSet) -> bool {
        self.implicants.iter().any(|imp| imp.is_subset(fired))
    }

    pub fn render(&self) -> String {
        let terms: Vec<String> = self
            .implicants
            .iter()
            .map(|imp| {
                if imp.is_empty() {
                    "true".to_string()
                } else {
                    imp.iter()
                        .map(|t| t.as_str())
                        .collect::<Vec<_>>()
                        .join(" & ")
                }
            })
            .collect();
        terms.join(" | ")
    }
}

/// The alternative sets of causes of a node, by well-founded recursion: an
/// initial place holds vacuously, a produced place is the disjunction of
/// its producers (each with its own causes), a transition is the
/// conjunction over its preset.
pub fn cause_formula(proc: &PersistentProcess, x: &NodeId) -> CauseFormula {
    fn go(
        proc: &PersistentProcess,
        x: &NodeId,
        memo: &mut BTreeMap<NodeId, CauseFormula>,
    ) -> CauseFormula {
        if let Some(done) = memo.get(x) {
            return done.clone();
        }
        let result = if proc.places.contains(x) {
            let producers = &proc.producers[x];
            if producers.is_empty() {
                CauseFormula::truth()
            } else {
                let mut acc: Option<CauseFormula> = None;
                for t in producers {
                    let term = go(proc, t, memo).and_atom(t);
                    acc = Some(match acc {
                        None => term,
                        Some(f) => f.or(&term),
                    });
                }
                acc.unwrap()
            }
        } else {
            let mut acc = CauseFormula::truth();
            for s in &proc.preset[x] {
                acc = acc.and(&go(proc, s, memo));
            }
            acc
        };
        memo.insert(x.clone(), result.clone());
        result
    }
    let mut memo = BTreeMap::new();
    go(proc, x, &mut memo)
}

/// One process per equivalence class of maximal non-stuttering runs of the
/// net, in canonical order of their transition sets.
pub fn enumerate_maximal_processes(
    net: &PNet,
    budget: usize,
) -> Result<Vec<PersistentProcess>, SemanticsError> {
    let classes = semantics::maximal_fired_sets(net, budget)?;
    Ok(classes
        .into_iter()
        .map(|fired| PersistentProcess::from_fired(net, &fired))
        .collect())
}

/// A duplicate-free sequence is legal when each step's causes are implied
/// by the steps before it.
pub fn is_legal(proc: &PersistentProcess, seq: &[NodeId]) -> Result<bool, ProcessError> {
    let mut fired = NodeSet::new();
    for t in seq {
        if !proc.transitions.contains(t) {
            return Err(ProcessError::Foreign(t.clone()));
        }
        if fired.contains(t) {
            return Err(ProcessError::Duplicate(t.clone()));
        }
        if !cause_formula(proc, t).satisfied_by(&fired) {
            return Ok(false);
        }
        fired.insert(t.clone());
    }
    Ok(true)
}

fn replay_bag(proc: &PersistentProcess, net: &PNet, fired: &NodeSet) -> Bag {
    let mut state = semantics::PState {
        bag: proc.initial.clone(),
        fired: NodeSet::new(),
    };
    // Within a process any firing order of the set reaches the same bag.
    let mut remaining: Vec<NodeId> = fired.iter().cloned().collect();
    while !remaining.is_empty() {
        let i = remaining
            .iter()
            .position(|t| state.bag.covers(&net.transition(t).unwrap().preset))
            .expect("fired set is replayable in some order");
        let t = remaining.remove(i);
        state = semantics::fire(net, &state, &t).expect("enabled");
    }
    state.bag
}

/// Brute-force certificate of complete concurrency: at every reachable
/// fired set, the transitions whose cause formulas are satisfied are
/// exactly the enabled ones, so legal sequences and firing sequences
/// coincide and enabledness after any sequence is decided by the formulas.
pub fn check_complete_concurrency(
    proc: &PersistentProcess,
    budget: usize,
) -> Result<CertReport, ProcessError> {
    let start = Instant::now();
    let net = proc.as_pnet();
    let formulas: BTreeMap<NodeId, CauseFormula> = proc
        .transitions
        .iter()
        .map(|t| (t.clone(), cause_formula(proc, t)))
        .collect();

    let mut seen: std::collections::HashSet<NodeSet> = Default::default();
    let mut stack = vec![NodeSet::new()];
    let mut visited = 0usize;
    while let Some(fired) = stack.pop() {
        if !seen.insert(fired.clone()) {
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
        let bag = replay_bag(proc, &net, &fired);
        let state = semantics::PState {
            bag,
            fired: fired.clone(),
        };
        let enabled: NodeSet = semantics::enabled(&net, &state)
            .into_iter()
            .filter(|t| !fired.contains(t))
            .collect();
        let legal: NodeSet = proc
            .transitions
            .iter()
            .filter(|t| !fired.contains(*t) && formulas[*t].satisfied_by(&fired))
            .cloned()
            .collect();
        if enabled != legal {
            return Ok(CertReport::fail(
                "complete-concurrency",
                json!({
                    "fired": fired,
                    "enabled_not_legal": enabled.difference(&legal).collect::<Vec<_>>(),
                    "legal_not_enabled": legal.difference(&enabled).collect::<Vec<_>>(),
                }),
                visited,
                start.elapsed().as_millis(),
            ));
        }
        for t in enabled {
            let mut next = fired.clone();
            next.insert(t);
            stack.push(next);
        }
    }
    Ok(CertReport::pass(
        "complete-concurrency",
        visited,
        start.elapsed().as_millis(),
    ))
}

/// All maximal legal sequences of the process.
pub fn linearizations(
    proc: &PersistentProcess,
    budget: usize,
) -> Result<Vec<Vec<NodeId>>, ProcessError> {
    let formulas: BTreeMap<NodeId, CauseFormula> = proc
        .transitions
        .iter()
        .map(|t| (t.clone(), cause_formula(proc, t)))
        .collect();
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<NodeId>, NodeSet)> = vec![(Vec::new(), NodeSet::new())];
    let mut visited = 0usize;
    while let Some((seq, fired)) = stack.pop() {
        visited += 1;
        if visited > budget {
            return Err(SemanticsError::BudgetExceeded {
                budget,
                frontier: stack.len(),
            }
            .into());
        }
        let candidates: Vec<NodeId> = proc
            .transitions
            .iter()
            .filter(|t| !fired.contains(*t) && formulas[*t].satisfied_by(&fired))
            .cloned()
            .collect();
        if candidates.is_empty() {
            out.push(seq);
            continue;
        }
        for t in candidates {
            let mut next_seq = seq.clone();
            next_seq.push(t.clone());
            let mut next_fired = fired.clone();
            next_fired.insert(t);
            stack.push((next_seq, next_fired));
        }
    }
    out.sort();
    Ok(out)
}
