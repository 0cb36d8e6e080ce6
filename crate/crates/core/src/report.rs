//! Pass/fail claim reports shared by the verification modules.

use std::fmt::Write;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Claim {
    pub name: String,
    pub expected: Option<f64>,
    pub fitted: Option<f64>,
    pub slope: Option<f64>,
    pub pass: bool,
}

impl Claim {
    /// `fitted` within `rel` relative (or `abs`, whichever is looser) of `expected`.
    pub fn close(name: impl Into<String>, expected: f64, fitted: f64, rel: f64, abs: f64) -> Self {
        let pass = (fitted - expected).abs() <= (rel * expected.abs()).max(abs);
        Self { name: name.into(), expected: Some(expected), fitted: Some(fitted), slope: None, pass }
    }

    /// Convergence slope at or above `threshold`.
    pub fn slope_at_least(name: impl Into<String>, threshold: f64, slope: f64) -> Self {
        Self { name: name.into(), expected: Some(threshold), fitted: None, slope: Some(slope), pass: slope >= threshold }
    }

    pub fn at_most(name: impl Into<String>, bound: f64, value: f64) -> Self {
        Self { name: name.into(), expected: Some(bound), fitted: Some(value), slope: None, pass: value <= bound }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ClaimReport {
    pub claims: Vec<Claim>,
}

impl ClaimReport {
    pub fn push(&mut self, c: Claim) {
        self.claims.push(c);
    }

    pub fn extend(&mut self, other: ClaimReport) {
        self.claims.extend(other.claims);
    }

    pub fn pass(&self) -> bool {
        self.claims.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Claim> {
        self.claims.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("claims serialise")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
        for c in &self.claims {
            writeln!(
                out,
                "{} {}  expected={} fitted={} slope={}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                opt(c.expected),
                opt(c.fitted),
                opt(c.slope)
            )
            .unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let mut r = ClaimReport::default();
        r.push(Claim::slope_at_least("x", 2.7, 3.0));
        r.push(Claim::close("y", 1.0, 1.5, 0.1, 0.0));
        assert!(!r.pass());
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["claims"][0]["name"], "x");
        assert_eq!(v["claims"][0]["pass"], true);
        assert_eq!(v["claims"][1]["pass"], false);
        assert!(r.to_text().starts_with("PASS x"));
    }
}
