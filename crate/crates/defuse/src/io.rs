//! File formats: PNML (core subset), a diff-friendly native text format,
//! and DOT export.

pub mod dot;
pub mod native;
pub mod pnml;

use crate::net::{OccurrenceNet, PNet};

/// A parsed net document: occurrence nets are the compiler inputs, p-nets
/// come back from exported artifacts.
#[derive(Clone, Debug)]
pub enum NetDocument {
    Occurrence(OccurrenceNet),
    Persistent(PNet),
}

impl NetDocument {
    pub fn kind(&self) -> &'static str {
        match self {
            NetDocument::Occurrence(_) => "occurrence",
            NetDocument::Persistent(_) => "pnet",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("xml parse error: {0}")]
    Xml(String),
    #[error("{context}: {message}")]
    Malformed { context: String, message: String },
    #[error("unsupported net feature: {0}")]
    Unsupported(String),
}

impl IoError {
    pub fn malformed(context: impl Into<String>, message: impl Into<String>) -> IoError {
        IoError::Malformed {
            context: context.into(),
            message: message.into(),
        }
    }
}
