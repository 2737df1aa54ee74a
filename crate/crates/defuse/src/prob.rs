//! Exact-rational probability assignment per s-cell, process probabilities,
//! the sum-to-one certificate, and seeded run sampling.

use std::collections::BTreeMap;
use std::time::Instant;

use num::{BigRational, One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use serde_json::json;

use crate::encode::Compilation;
use crate::net::{NodeId, NodeSet};
use crate::process::{self, PersistentProcess};
use crate::report::CertReport;
use crate::semantics::{self, PState, SemanticsError};

/// Exact probability value. No floating point enters any verdict; only run
/// sampling draws with floats.
pub type Rational = BigRational;

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(num.into(), den.into())
}

#[derive(Debug, thiserror::Error)]
pub enum ProbError {
    #[error("weights of arcs leaving place {place} sum to {sum}, expected 1")]
    PlaceWeightsNotNormalized { place: NodeId, sum: String },
    #[error("missing weight for arc {place} -> {transition}")]
    MissingWeight { place: NodeId, transition: NodeId },
    #[error("weight for arc {place} -> {transition} is negative")]
    NegativeWeight { place: NodeId, transition: NodeId },
    #[error("cell {{{0}}} has no transaction with positive weight; cannot normalize")]
    NoFeasibleTransaction(String),
    #[error("cell {{{cell}}}: supplied distribution sums to {sum}, expected 1")]
    CellMapNotNormalized { cell: String, sum: String },
    #[error("cell {{{cell}}}: transaction {{{transaction}}} is not one of its transactions")]
    UnknownTransaction { cell: String, transaction: String },
    #[error("transition {0} has no probability assigned")]
    UnknownCompiledTransition(NodeId),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}

fn join(set: &NodeSet) -> String {
    set.iter()
        .map(|n| n.as_str())
        .collect::<Vec<_>>()
        .join(",")
}

/// Weights on the arcs of the source net, one rational per place-to-
/// transition arc. Weights of arcs leaving the same place must sum to one.
#[derive(Clone, Debug, Default)]
pub struct ArcWeights(pub BTreeMap<(NodeId, NodeId), Rational>);

impl ArcWeights {
    /// Uniform distribution at each place over its consumers.
    pub fn uniform(net: &crate::net::OccurrenceNet) -> ArcWeights {
        let mut weights = BTreeMap::new();
        for p in net.places() {
            let consumers = net.postset(p);
            let n = consumers.len() as i64;
            for t in consumers {
                weights.insert((p.clone(), t), ratio(1, n));
            }
        }
        ArcWeights(weights)
    }

    pub fn set(&mut self, place: impl Into<NodeId>, transition: impl Into<NodeId>, w: Rational) {
        self.0.insert((place.into(), transition.into()), w);
    }

    fn get(&self, place: &NodeId, transition: &NodeId) -> Result<&Rational, ProbError> {
        self.0
            .get(&(place.clone(), transition.clone()))
            .ok_or_else(|| ProbError::MissingWeight {
                place: place.clone(),
                transition: transition.clone(),
            })
    }

    fn validate(&self, net: &crate::net::OccurrenceNet) -> Result<(), ProbError> {
        for ((p, t), w) in &self.0 {
            if w.is_negative() {
                return Err(ProbError::NegativeWeight {
                    place: p.clone(),
                    transition: t.clone(),
                });
            }
        }
        for p in net.places() {
            let consumers = net.postset(p);
            if consumers.is_empty() {
                continue;
            }
            let mut sum = Rational::zero();
            for t in &consumers {
                sum += self.get(p, t)?;
            }
            if !sum.is_one() {
                return Err(ProbError::PlaceWeightsNotNormalized {
                    place: p.clone(),
                    sum: sum.to_string(),
                });
            }
        }
        Ok(())
    }
}

/// Per-cell probability of each transaction, carried to the compiled
/// transitions: transaction transitions get their cell's value, negative
/// propagations get one.
#[derive(Clone, Debug)]
pub struct Distribution {
    /// Cell (by transition set) to transaction transition name to value.
    pub cells: BTreeMap<NodeSet, BTreeMap<NodeId, Rational>>,
    by_transition: BTreeMap<NodeId, Rational>,
}

impl Distribution {
    fn from_cell_values(
        cells: BTreeMap<NodeSet, BTreeMap<NodeId, Rational>>,
    ) -> Distribution {
        let by_transition = cells
            .values()
            .flat_map(|m| m.iter())
            .map(|(t, v)| (t.clone(), v.clone()))
            .collect();
        Distribution {
            cells,
            by_transition,
        }
    }

    /// Caller-supplied per-cell maps, keyed by cell transition set and
    /// transaction transition set. Each cell's values must sum to one;
    /// unmentioned cells default to their sole transaction when unique.
    pub fn from_cell_maps(
        compilation: &Compilation,
        maps: &BTreeMap<NodeSet, BTreeMap<NodeSet, Rational>>,
    ) -> Result<Distribution, ProbError> {
        let mut cells = BTreeMap::new();
        for (cell_key, info) in &compilation.cells {
            let mut values = BTreeMap::new();
            match maps.get(cell_key) {
                None => {
                    for (name, _) in &info.choices {
                        let n = info.choices.len() as i64;
                        values.insert(name.clone(), ratio(1, n));
                    }
                }
                Some(map) => {
                    let mut sum = Rational::zero();
                    for (theta_key, value) in map {
                        let name = info
                            .choices
                            .iter()
                            .find(|(_, theta)| theta.transitions == *theta_key)
                            .map(|(name, _)| name.clone())
                            .ok_or_else(|| ProbError::UnknownTransaction {
                                cell: join(cell_key),
                                transaction: join(theta_key),
                            })?;
                        sum += value;
                        values.insert(name, value.clone());
                    }
                    if !sum.is_one() {
                        return Err(ProbError::CellMapNotNormalized {
                            cell: join(cell_key),
                            sum: sum.to_string(),
                        });
                    }
                }
            }
            cells.insert(cell_key.clone(), values);
        }
        Ok(Distribution::from_cell_values(cells))
    }

    /// Probability of a compiled transition: the cell value for transaction
    /// transitions, one for negative propagations and expansion copies.
    pub fn transition_probability(&self, t: &NodeId) -> Result<Rational, ProbError> {
        if let Some(v) = self.by_transition.get(t) {
            return Ok(v.clone());
        }
        if t.as_str().starts_with("prop:") || t.as_str().contains('@') {
            return Ok(Rational::one());
        }
        Err(ProbError::UnknownCompiledTransition(t.clone()))
    }
}

/// The purely local distribution: weigh each transaction by the product of
/// the arc weights entering its transitions, then normalize per cell. The
/// same rule applies recursively to every nested cell of the compilation.
pub fn local_distribution(
    compilation: &Compilation,
    weights: &ArcWeights,
) -> Result<Distribution, ProbError> {
    weights.validate(&compilation.source)?;
    let mut cells = BTreeMap::new();
    for (cell_key, info) in &compilation.cells {
        let mut raw: Vec<(NodeId, Rational)> = Vec::new();
        for (name, theta) in &info.choices {
            let mut q = Rational::one();
            for t in &theta.transitions {
                for p in compilation.source.preset(t) {
                    q *= weights.get(&p, t)?;
                }
            }
            raw.push((name.clone(), q));
        }
        let total: Rational = raw.iter().map(|(_, q)| q.clone()).sum();
        if total.is_zero() {
            return Err(ProbError::NoFeasibleTransaction(join(cell_key)));
        }
        let values: BTreeMap<NodeId, Rational> = raw
            .into_iter()
            .map(|(name, q)| (name, q / total.clone()))
            .collect();
        cells.insert(cell_key.clone(), values);
    }
    Ok(Distribution::from_cell_values(cells))
}

/// Probability of a process: the product over its transitions, independent
/// of firing order.
pub fn process_probability(
    proc: &PersistentProcess,
    dist: &Distribution,
) -> Result<Rational, ProbError> {
    let mut p = Rational::one();
    for t in &proc.transitions {
        p *= dist.transition_probability(t)?;
    }
    Ok(p)
}

/// Certifies that the probabilities of the maximal processes of the pruned
/// uniformed net sum to exactly one.
pub fn total_probability(
    compilation: &Compilation,
    dist: &Distribution,
    budget: usize,
) -> Result<(CertReport, Rational), ProbError> {
    let start = Instant::now();
    let procs = process::enumerate_maximal_processes(&compilation.pruned, budget)?;
    let mut sum = Rational::zero();
    let mut breakdown = Vec::new();
    for proc in &procs {
        let p = process_probability(proc, dist)?;
        breakdown.push(json!({
            "transitions": proc.transitions,
            "probability": p.to_string(),
        }));
        sum += p;
    }
    let report = if sum.is_one() {
        CertReport::pass("total-probability", procs.len(), start.elapsed().as_millis())
    } else {
        CertReport::fail(
            "total-probability",
            json!({ "sum": sum.to_string(), "processes": breakdown }),
            procs.len(),
            start.elapsed().as_millis(),
        )
    };
    Ok((report, sum))
}

/// One sampled maximal run of the pruned uniformed net.
#[derive(Clone, Debug)]
pub struct SampledRun {
    pub sequence: Vec<NodeId>,
    /// Transition set identifying the process the run collapses to.
    pub process: NodeSet,
}

/// Draws a maximal run: every enabled equal-preset choice group resolves by
/// its cell distribution, independent groups draw independently. Sampling
/// uses floating point internally; the returned run is exact.
pub fn sample_run(
    compilation: &Compilation,
    dist: &Distribution,
    seed: u64,
) -> Result<SampledRun, ProbError> {
    let net = &compilation.pruned;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut state = PState::initial(net);
    let mut sequence = Vec::new();
    loop {
        let groups = semantics::enabled_choice_groups(net, &state);
        if groups.is_empty() {
            break;
        }
        let group = &groups[0];
        let winner = if group.members.len() == 1 {
            group.members[0].clone()
        } else {
            let mut weights = Vec::new();
            for t in &group.members {
                let p = dist.transition_probability(t)?;
                weights.push(p.to_f64().unwrap_or(0.0));
            }
            let draw: f64 = rng.gen::<f64>() * weights.iter().sum::<f64>();
            let mut acc = 0.0;
            let mut chosen = group.members.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                acc += w;
                if draw < acc {
                    chosen = i;
                    break;
                }
            }
            group.members[chosen].clone()
        };
        state = semantics::fire(net, &state, &winner).expect("enabled");
        sequence.push(winner);
    }
    let process: NodeSet = sequence.iter().cloned().collect();
    Ok(SampledRun { sequence, process })
}

/// Empirical process frequencies over a number of seeded samples, keyed by
/// process transition set.
pub fn sample_frequencies(
    compilation: &Compilation,
    dist: &Distribution,
    samples: usize,
    seed: u64,
) -> Result<BTreeMap<NodeSet, usize>, ProbError> {
    let mut counts: BTreeMap<NodeSet, usize> = BTreeMap::new();
    for i in 0..samples {
        let run = sample_run(compilation, dist, seed.wrapping_add(i as u64))?;
        *counts.entry(run.process).or_default() += 1;
    }
    Ok(counts)
}
