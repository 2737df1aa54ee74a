//! The worked-example nets used throughout the test suite and the docs.

use crate::net::OccurrenceNet;

/// The smallest net with asymmetric confusion: `a` and `b` are concurrent,
/// but firing `a` enables `c` as an alternative to `b`.
pub fn asymmetric_confusion() -> OccurrenceNet {
    OccurrenceNet::build(
        [
            ("a", ["1"].as_slice(), ["3"].as_slice()),
            ("d", ["1"].as_slice(), ["6"].as_slice()),
            ("b", ["2"].as_slice(), ["4"].as_slice()),
            ("c", ["2", "3"].as_slice(), ["5"].as_slice()),
        ],
        &["1", "2"],
    )
}

/// The running example with OR-causes: `c` is discarded as soon as `d` or
/// `f` fires, and choosing against `c` executes `b` and `g` jointly.
pub fn or_causes() -> OccurrenceNet {
    OccurrenceNet::build(
        [
            ("a", ["1"].as_slice(), ["3"].as_slice()),
            ("d", ["1"].as_slice(), ["6"].as_slice()),
            ("e", ["7"].as_slice(), ["8"].as_slice()),
            ("f", ["7"].as_slice(), ["9"].as_slice()),
            ("b", ["2"].as_slice(), ["4"].as_slice()),
            ("c", ["2", "3", "8"].as_slice(), ["5"].as_slice()),
            ("g", ["8"].as_slice(), ["10"].as_slice()),
        ],
        &["1", "2", "7"],
    )
}

/// A two-place free-choice net: both transitions consume both tokens.
pub fn free_choice() -> OccurrenceNet {
    OccurrenceNet::build(
        [
            ("a", ["1", "2"].as_slice(), ["3"].as_slice()),
            ("b", ["1", "2"].as_slice(), ["4"].as_slice()),
        ],
        &["1", "2"],
    )
}

/// Two cells in sequence inside one cell: the transaction {b, c} runs
/// alongside the independent `d`, so expanding it buys back interleavings.
pub fn sequential_cells() -> OccurrenceNet {
    OccurrenceNet::build(
        [
            ("a", ["1", "2"].as_slice(), ["6"].as_slice()),
            ("b", ["2"].as_slice(), ["4"].as_slice()),
            ("c", ["1", "4"].as_slice(), ["7"].as_slice()),
            ("d", ["3"].as_slice(), ["5"].as_slice()),
        ],
        &["1", "2", "3"],
    )
}

/// All four fixture nets with stable labels, for corpus-style tests.
pub fn all() -> Vec<(&'static str, OccurrenceNet)> {
    vec![
        ("asymmetric_confusion", asymmetric_confusion()),
        ("or_causes", or_causes()),
        ("free_choice", free_choice()),
        ("sequential_cells", sequential_cells()),
    ]
}
