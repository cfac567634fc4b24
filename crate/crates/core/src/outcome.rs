use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Every test procedure the library runs, by tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Truncated-normal test conditional on the selection event.
    Conditional,
    /// Unconditional noncentral-t test on the selected asset alone.
    Naive,
    Bonferroni,
    BonferroniFixed,
    BonferroniSlepian,
    Chibar,
    Follman,
    HansenChibar,
    HansenSpa,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Conditional,
        Method::Naive,
        Method::Bonferroni,
        Method::BonferroniFixed,
        Method::BonferroniSlepian,
        Method::Chibar,
        Method::Follman,
        Method::HansenChibar,
        Method::HansenSpa,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Conditional => "conditional",
            Method::Naive => "naive",
            Method::Bonferroni => "bonferroni",
            Method::BonferroniFixed => "bonferroni_fixed",
            Method::BonferroniSlepian => "bonferroni_slepian",
            Method::Chibar => "chibar",
            Method::Follman => "follman",
            Method::HansenChibar => "hansen_chibar",
            Method::HansenSpa => "hansen_spa",
        }
    }

    /// Methods that take a common-correlation parameter rho.
    pub fn uses_rho(&self) -> bool {
        matches!(
            self,
            Method::BonferroniFixed | Method::Chibar | Method::Follman | Method::HansenChibar | Method::HansenSpa
        )
    }

    /// Parses a comma separated list; `all` expands to every method.
    pub fn parse_list(s: &str) -> Result<Vec<Method>, Error> {
        let mut out = Vec::new();
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            if tok == "all" {
                out.extend(Method::ALL);
            } else {
                out.push(tok.parse()?);
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidArgument("empty method list".into()));
        }
        let mut seen = std::collections::HashSet::new();
        out.retain(|m| seen.insert(*m));
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

/// Result of one hypothesis test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub method: Method,
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    /// Null value the test was run at.
    pub null_value: f64,
    /// One-sided lower confidence bound, when the test was inverted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl TestOutcome {
    /// Outcome for a p-value based test: rejects iff `p <= alpha`.
    pub fn from_p_value(method: Method, statistic: f64, p_value: f64, alpha: f64, null_value: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        TestOutcome {
            method,
            statistic,
            p_value,
            reject: p_value <= alpha,
            alpha,
            null_value,
            lower_bound: None,
            warnings: Vec::new(),
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<(), Error> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be in (0, 1), got {alpha}")));
    }
    Ok(())
}
