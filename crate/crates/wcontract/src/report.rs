//! Signed-margin records produced by every check.

use std::fmt;

/// Tags naming the inequality or identity a report verifies.
pub mod anchor {
    pub const IDENTITY: &str = "discrete-identity";
    pub const W2_ORACLE: &str = "w2-oracle";
    pub const KANTOROVICH: &str = "kantorovich-duality";
    pub const HAMILTON_JACOBI: &str = "hamilton-jacobi";
    pub const CD_POINTWISE: &str = "cd-pointwise";
    pub const CD_WEAK: &str = "cd-weak";
    pub const CONTRACTION_SINH: &str = "contraction-sinh";
    pub const CONTRACTION_SQUARE: &str = "contraction-square";
    pub const TWO_TIME: &str = "contraction-two-time";
    pub const EVI: &str = "evi";
    pub const GEODESIC_REFINEMENT: &str = "geodesic-refinement";
    pub const CONVERSE_LOWER: &str = "converse-transport-lower";
    pub const CONVERSE_UPPER: &str = "converse-transport-upper";
    pub const CONVERSE_ENTROPY: &str = "converse-entropy-derivative";
    pub const GRADFLOW_CONVEXITY: &str = "gradflow-convexity";
    pub const GRADFLOW_CONTRACTION: &str = "gradflow-contraction";
    pub const GRADFLOW_CONVERSE: &str = "gradflow-converse";
    pub const ENTROPY_ENERGY: &str = "entropy-energy";
    pub const LOG_SOBOLEV: &str = "log-sobolev";
    pub const FISHER_DECAY: &str = "fisher-decay";
    pub const FISHER_DIFFERENTIAL: &str = "fisher-differential";
    pub const DE_BRUIJN: &str = "de-bruijn";
    pub const ENTROPY_CREATION: &str = "entropy-creation";
    pub const HWI: &str = "hwi";
    pub const HWI_REGULARIZATION: &str = "hwi-regularization";
    pub const METRIC_DERIVATIVE: &str = "metric-derivative";

    pub const ALL: &[&str] = &[
        IDENTITY,
        W2_ORACLE,
        KANTOROVICH,
        HAMILTON_JACOBI,
        CD_POINTWISE,
        CD_WEAK,
        CONTRACTION_SINH,
        CONTRACTION_SQUARE,
        TWO_TIME,
        EVI,
        GEODESIC_REFINEMENT,
        CONVERSE_LOWER,
        CONVERSE_UPPER,
        CONVERSE_ENTROPY,
        GRADFLOW_CONVEXITY,
        GRADFLOW_CONTRACTION,
        GRADFLOW_CONVERSE,
        ENTROPY_ENERGY,
        LOG_SOBOLEV,
        FISHER_DECAY,
        FISHER_DIFFERENTIAL,
        DE_BRUIJN,
        ENTROPY_CREATION,
        HWI,
        HWI_REGULARIZATION,
        METRIC_DERIVATIVE,
    ];

    pub fn is_known(tag: &str) -> bool {
        ALL.contains(&tag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
    Skipped,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
            Status::Skipped => "skipped",
        };
        f.write_str(s)
    }
}

/// One verified inequality `LHS ≤ RHS` with `margin = RHS − LHS`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub anchor: &'static str,
    pub t: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub tol: f64,
    pub pass: bool,
    pub status: Status,
    pub meta: Vec<(String, String)>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, anchor: &'static str, lhs: f64, rhs: f64, tol: f64) -> Self {
        debug_assert!(!anchor.is_empty());
        let margin = rhs - lhs;
        let pass = margin >= -tol;
        Self {
            name: name.into(),
            anchor,
            t: None,
            lhs,
            rhs,
            margin,
            tol,
            pass,
            status: if pass { Status::Pass } else { Status::Fail },
            meta: Vec::new(),
        }
    }

    /// Report for a check that was not evaluated (e.g. infinite quantities).
    pub fn skipped(name: impl Into<String>, anchor: &'static str, reason: &str) -> Self {
        let mut r = Self::new(name, anchor, 0.0, 0.0, 0.0);
        r.status = Status::Skipped;
        r.meta.push(("skip".into(), reason.into()));
        r
    }

    pub fn at(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    /// Marks the report inconclusive; `pass` keeps the numerical verdict.
    pub fn inconclusive(mut self, reason: &str) -> Self {
        self.status = Status::Inconclusive;
        self.meta.push(("inconclusive".into(), reason.into()));
        self
    }

    /// Overrides the verdict (used by two-sided and ratio-gated checks).
    pub fn with_verdict(mut self, pass: bool) -> Self {
        self.pass = pass;
        if self.status != Status::Inconclusive && self.status != Status::Skipped {
            self.status = if pass { Status::Pass } else { Status::Fail };
        }
        self
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Conjunction of several reports.
pub fn aggregate(name: &str, anchor: &'static str, parts: &[CheckReport]) -> CheckReport {
    let worst = parts
        .iter()
        .filter(|r| r.status != Status::Skipped)
        .min_by(|a, b| (a.margin + a.tol).total_cmp(&(b.margin + b.tol)));
    let mut out = match worst {
        Some(w) => CheckReport::new(name, anchor, w.lhs, w.rhs, w.tol),
        None => CheckReport::new(name, anchor, 0.0, 0.0, 0.0),
    };
    let all = parts.iter().all(|r| r.pass || r.status == Status::Skipped);
    out = out.with_verdict(all).with("parts", parts.len());
    if parts.iter().any(|r| r.status == Status::Inconclusive) {
        out = out.inconclusive("a component is inconclusive");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_iff_margin_above_minus_tol() {
        let r = CheckReport::new("x", anchor::EVI, 1.0, 0.96, 0.05);
        assert!(r.pass);
        let r = CheckReport::new("x", anchor::EVI, 1.0, 0.94, 0.05);
        assert!(!r.pass && r.status == Status::Fail);
        assert!((r.margin + 0.06).abs() < 1e-15);
    }

    #[test]
    fn anchors_are_unique_and_nonempty() {
        let mut v = anchor::ALL.to_vec();
        v.sort();
        v.dedup();
        assert_eq!(v.len(), anchor::ALL.len());
        assert!(v.iter().all(|a| !a.is_empty()));
    }
}
