//! Tri-state decision outcome shared by every decision procedure.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Yes,
    No,
    /// The parameters fall outside every theorem that could decide the
    /// question; the string names the violated hypothesis.
    OutOfTheoremScope(String),
}

impl Verdict {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Verdict::Yes
        } else {
            Verdict::No
        }
    }

    pub fn is_yes(&self) -> bool {
        matches!(self, Verdict::Yes)
    }

    pub fn is_no(&self) -> bool {
        matches!(self, Verdict::No)
    }

    pub fn scope_reason(&self) -> Option<&str> {
        match self {
            Verdict::OutOfTheoremScope(r) => Some(r),
            _ => None,
        }
    }

    /// Short tag without the scope reason.
    pub fn tag(&self) -> &'static str {
        match self {
            Verdict::Yes => "Yes",
            Verdict::No => "No",
            Verdict::OutOfTheoremScope(_) => "OutOfTheoremScope",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}
