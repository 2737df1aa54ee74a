//! Verdict reports produced by the certifiers, serialized as versioned JSON.

use serde::{Deserialize, Serialize};

pub const REPORT_VERSION: u32 = 1;

pub fn tool_version() -> String {
    format!("defuse {}", env!("CARGO_PKG_VERSION"))
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Outcome of one executable certificate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertReport {
    pub version: u32,
    pub check: String,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<serde_json::Value>,
    pub states_explored: usize,
    pub elapsed_ms: u128,
}

impl CertReport {
    pub fn pass(check: &str, states: usize, elapsed_ms: u128) -> Self {
        CertReport {
            version: REPORT_VERSION,
            check: check.to_string(),
            verdict: Verdict::Pass,
            witness: None,
            states_explored: states,
            elapsed_ms,
        }
    }

    pub fn fail(check: &str, witness: serde_json::Value, states: usize, elapsed_ms: u128) -> Self {
        CertReport {
            version: REPORT_VERSION,
            check: check.to_string(),
            verdict: Verdict::Fail,
            witness: Some(witness),
            states_explored: states,
            elapsed_ms,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}
