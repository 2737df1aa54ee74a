//! Compiles finite occurrence Petri nets (possibly with confusion) into
//! confusion-free nets with persistent places, and certifies the
//! transformation by execution: safety, confusion-freeness, process
//! enumeration with OR-causality, probability assignment, and equivalence
//! with the branching-cell semantics of the event structure.

pub mod ab;
pub mod encode;
pub mod fixtures;
pub mod io;
pub mod net;
pub mod prob;
pub mod process;
pub mod randnet;
pub mod report;
pub mod semantics;
pub mod structure;

pub use encode::Compilation;
pub use net::{Bag, Count, NodeId, NodeSet, OccurrenceNet, PNet};
pub use report::CertReport;
