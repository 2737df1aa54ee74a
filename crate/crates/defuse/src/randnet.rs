//! Seeded random occurrence nets, the fuel for the property and acceptance
//! suites. Construction is layered and keeps all occurrence-net invariants
//! by never giving a place two producers and never wiring a transition to
//! conflicting causes.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::net::{NodeId, NodeSet, OccurrenceNet};
use crate::structure;

/// Deterministic per seed. `max_transitions` and `max_width` must be at
/// least one; width bounds both the initial places and each postset.
pub fn generate_random_net(seed: u64, max_transitions: usize, max_width: usize) -> OccurrenceNet {
    assert!(max_transitions >= 1 && max_width >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = OccurrenceNet::new();

    let initial_width = rng.gen_range(1..=max_width);
    let mut place_count = 0usize;
    let fresh_place = |net: &mut OccurrenceNet, count: &mut usize| {
        let p = NodeId::new(format!("p{}", *count));
        *count += 1;
        net.add_place(p.clone());
        p
    };
    for _ in 0..initial_width {
        fresh_place(&mut net, &mut place_count);
    }

    let transition_count = rng.gen_range(1..=max_transitions);
    for i in 0..transition_count {
        let places: Vec<NodeId> = net.places().iter().cloned().collect();
        let preset_size = rng.gen_range(1..=max_width.min(3));
        let mut preset = NodeSet::new();
        for _ in 0..preset_size * 4 {
            if preset.len() >= preset_size {
                break;
            }
            let candidate = places[rng.gen_range(0..places.len())].clone();
            if preset.contains(&candidate) {
                continue;
            }
            let mut probe = preset.clone();
            probe.insert(candidate.clone());
            if preset_is_compatible(&net, &probe) {
                preset.insert(candidate);
            }
        }
        if preset.is_empty() {
            // Any single existing place is compatible with itself.
            preset.insert(places[rng.gen_range(0..places.len())].clone());
        }
        let postset_size = rng.gen_range(1..=max_width);
        let postset: Vec<NodeId> = (0..postset_size)
            .map(|_| fresh_place(&mut net, &mut place_count))
            .collect();
        net.add_transition(NodeId::new(format!("t{i}")), preset, postset);
    }
    let minimal = net.minimal_places();
    net.mark(minimal);
    net
}

/// A transition consuming exactly these places would be free of
/// self-conflict: no two of them are in conflict, and no consumer of one
/// precedes another.
fn preset_is_compatible(net: &OccurrenceNet, preset: &NodeSet) -> bool {
    let relations = structure::compute_relations(net);
    for x in preset {
        for y in preset {
            if relations.in_conflict(x, y) {
                return false;
            }
            if x != y {
                let consumer_precedes = net
                    .postset(x)
                    .iter()
                    .any(|v| relations.precedes(v, y));
                if consumer_precedes {
                    return false;
                }
            }
        }
    }
    true
}

/// The seeded corpus used across the verification suites.
pub fn corpus(count: usize, max_transitions: usize, max_width: usize) -> Vec<OccurrenceNet> {
    (0..count as u64)
        .map(|seed| generate_random_net(seed, max_transitions, max_width))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_nets_are_valid() {
        for seed in 0..1000 {
            let net = generate_random_net(seed, 6, 3);
            let report = net.validate();
            assert!(report.is_valid(), "seed {seed}: {:?}", report.violations);
        }
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let a = generate_random_net(0, 6, 3);
        let b = generate_random_net(0, 6, 3);
        assert_eq!(a, b);
        let c = generate_random_net(1, 6, 3);
        assert!(a != c || a.places() == c.places());
    }

    #[test]
    fn smallest_bounds_give_a_single_transition() {
        let net = generate_random_net(0, 1, 1);
        assert_eq!(net.transitions().len(), 1);
        assert!(net.validate().is_valid());
    }

    #[test]
    fn frozen_shape_of_seed_zero() {
        // Committed once from the generator, so accidental changes to the
        // construction are caught.
        let net = generate_random_net(0, 6, 3);
        assert_eq!(net.transitions().len(), 5);
        assert_eq!(net.places().len(), 13);
        assert!(net.validate().is_valid());
    }
}
