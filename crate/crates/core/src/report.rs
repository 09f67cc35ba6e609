//! Named residual tables shared by every audit.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
    /// `value < tol` rather than `value ≤ tol`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub strict: bool,
}

/// Residuals keyed by name; iteration order is the key order, so reports
/// serialise deterministically.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResidualTable {
    pub entries: BTreeMap<String, Residual>,
}

impl ResidualTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Passes when `value ≤ tol` (NaN never passes).
    pub fn at_most(&mut self, name: impl Into<String>, value: f64, tol: f64) -> bool {
        let pass = value <= tol;
        self.entries.insert(name.into(), Residual { value, tol, pass, strict: false });
        pass
    }

    /// Passes when `value < bound` strictly.
    pub fn below(&mut self, name: impl Into<String>, value: f64, bound: f64) -> bool {
        let pass = value < bound;
        self.entries.insert(name.into(), Residual { value, tol: bound, pass, strict: true });
        pass
    }

    /// Informational entry that always passes.
    pub fn note(&mut self, name: impl Into<String>, value: f64) {
        self.entries.insert(name.into(), Residual { value, tol: f64::INFINITY, pass: true, strict: false });
    }

    /// Re-evaluates one entry against a new tolerance. Returns `false` when
    /// no entry has that name.
    pub fn set_tol(&mut self, name: &str, tol: f64) -> bool {
        match self.entries.get_mut(name) {
            Some(r) => {
                r.tol = tol;
                r.pass = if r.strict { r.value < tol } else { r.value <= tol };
                true
            }
            None => false,
        }
    }

    pub fn get(&self, name: &str) -> Option<&Residual> {
        self.entries.get(name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.entries.get(name).map(|r| r.value)
    }

    pub fn passed(&self) -> bool {
        self.entries.values().all(|r| r.pass)
    }

    pub fn failures(&self) -> Vec<(&str, &Residual)> {
        self.entries.iter().filter(|(_, r)| !r.pass).map(|(k, r)| (k.as_str(), r)).collect()
    }

    /// Copies `other` in with `prefix.` prepended to each name.
    pub fn merge(&mut self, prefix: &str, other: &ResidualTable) {
        for (k, r) in &other.entries {
            let name = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            self.entries.insert(name, *r);
        }
    }

    /// Keeps the worse of two residuals under the same name.
    pub fn absorb_worst(&mut self, other: &ResidualTable) {
        for (k, r) in &other.entries {
            match self.entries.get_mut(k) {
                Some(cur) => {
                    if (!r.pass && cur.pass) || (r.pass == cur.pass && r.value > cur.value) {
                        *cur = *r;
                    }
                }
                None => {
                    self.entries.insert(k.clone(), *r);
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl fmt::Display for ResidualTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.entries.keys().map(|k| k.chars().count()).max().unwrap_or(0);
        for (k, r) in &self.entries {
            let pad = width - k.chars().count();
            writeln!(
                f,
                "{k}{}  {:>12.4e}  {:>10.1e}  {}",
                " ".repeat(pad),
                r.value,
                r.tol,
                if r.pass { "ok" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_keep_strictness() {
        let mut t = ResidualTable::new();
        t.below("gap", 1.0, 2.0);
        t.at_most("err", 1e-9, 1e-10);
        assert!(t.set_tol("err", 1e-9) && t.passed());
        assert!(t.set_tol("gap", 1.0));
        assert!(!t.passed());
        assert!(!t.set_tol("missing", 1.0));
    }

    #[test]
    fn pass_rules() {
        let mut t = ResidualTable::new();
        assert!(t.at_most("a", 1e-12, 1e-10));
        assert!(!t.at_most("nan", f64::NAN, 1.0));
        assert!(!t.below("strict", 0.0, 0.0));
        assert_eq!(t.failures().len(), 2);
        assert!(!t.passed());
    }

    #[test]
    fn worst_is_kept() {
        let mut a = ResidualTable::new();
        a.at_most("x", 1e-12, 1e-9);
        let mut b = ResidualTable::new();
        b.at_most("x", 1e-10, 1e-9);
        a.absorb_worst(&b);
        assert_eq!(a.value("x"), Some(1e-10));
        let json = serde_json::to_string(&a).unwrap();
        assert!(json.starts_with("{\"x\":"));
    }
}
