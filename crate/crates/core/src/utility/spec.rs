use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::profile::{ConstraintSet, Mode, Profile};
use crate::error::{Error, Result};

/// `U`, `U′`, `U″` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityValues {
    pub u: f64,
    pub u1: f64,
    pub u2: f64,
}

#[derive(Debug, Clone)]
pub enum Family {
    /// `x^{1−γ}/(1−γ)`, or `ln x` at `γ = 1`.
    Power { gamma: f64 },
    /// `Σ w_i · power(γ_i)`.
    Blend { terms: Vec<(f64, f64)> },
    Profile(Arc<Profile>),
}

/// A utility with its declared risk-aversion corridor `(c1, c2)` and the
/// range of `x` on which its evaluators are trusted.
#[derive(Debug, Clone)]
pub struct UtilitySpec {
    pub name: String,
    pub family: Family,
    pub corridor: (f64, f64),
    pub domain: (f64, f64),
}

const WIDE_DOMAIN: (f64, f64) = (1e-150, 1e150);

fn power_values(gamma: f64, x: f64) -> UtilityValues {
    let u1 = x.powf(-gamma);
    let u = if gamma == 1.0 { x.ln() } else { x * u1 / (1.0 - gamma) };
    UtilityValues { u, u1, u2: -gamma * u1 / x }
}

impl UtilitySpec {
    /// Power utility with the default corridor `(0.95γ, 1.05γ)`.
    pub fn power(gamma: f64) -> Self {
        assert!(gamma > 0.0, "relative risk aversion must be positive");
        Self {
            name: format!("power(γ={gamma})"),
            family: Family::Power { gamma },
            corridor: (0.95 * gamma, 1.05 * gamma),
            domain: WIDE_DOMAIN,
        }
    }

    pub fn log() -> Self {
        Self { name: "log".into(), ..Self::power(1.0) }
    }

    /// Positive combination of power utilities; the corridor is the hull of
    /// the exponents, which the relative risk aversion never leaves.
    pub fn blend(terms: Vec<(f64, f64)>) -> Self {
        assert!(!terms.is_empty() && terms.iter().all(|(w, g)| *w > 0.0 && *g > 0.0));
        let lo = terms.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
        let hi = terms.iter().map(|t| t.1).fold(0.0, f64::max);
        let name = terms.iter().map(|(w, g)| format!("{w}·power({g})")).collect::<Vec<_>>().join(" + ");
        // equal exponents collapse the hull to a point; widen as for power
        let corridor = if lo < hi { (lo, hi) } else { (0.95 * lo, 1.05 * hi) };
        Self { name, family: Family::Blend { terms }, corridor, domain: WIDE_DOMAIN }
    }

    pub fn from_profile(name: impl Into<String>, profile: Profile, corridor: (f64, f64)) -> Self {
        let range = profile.range();
        let domain = match profile.mode {
            Mode::Utility => range,
            // x = −V′(y) is decreasing in y
            Mode::Dual => (profile.marginal(range.1), profile.marginal(range.0)),
        };
        Self { name: name.into(), family: Family::Profile(Arc::new(profile)), corridor, domain }
    }

    pub fn with_corridor(mut self, c1: f64, c2: f64) -> Self {
        self.corridor = (c1, c2);
        self
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.domain = (lo, hi);
        self
    }

    /// Constant relative risk aversion, if the family has one.
    pub fn constant_rra(&self) -> Option<f64> {
        match self.family {
            Family::Power { gamma } => Some(gamma),
            _ => None,
        }
    }

    pub fn profile(&self) -> Option<&Profile> {
        match &self.family {
            Family::Profile(p) => Some(p),
            _ => None,
        }
    }

    pub fn check_domain(&self, x: f64) -> Result<()> {
        let (lo, hi) = self.domain;
        if x >= lo * (1.0 - 1e-12) && x <= hi * (1.0 + 1e-12) {
            Ok(())
        } else {
            Err(Error::Domain { x, lo, hi })
        }
    }

    /// `U′` and `U″` only (no quadrature for profile utilities).
    pub fn marginals(&self, x: f64) -> Result<(f64, f64)> {
        self.check_domain(x)?;
        Ok(match &self.family {
            Family::Power { gamma } => {
                let u1 = x.powf(-gamma);
                (u1, -gamma * u1 / x)
            }
            Family::Blend { terms } => terms.iter().fold((0.0, 0.0), |(a, b), (w, g)| {
                let v = power_values(*g, x);
                (a + w * v.u1, b + w * v.u2)
            }),
            Family::Profile(p) => match p.mode {
                Mode::Utility => (p.marginal(x), -p.curvature(x)),
                Mode::Dual => {
                    let y = p.invert_marginal(x)?;
                    (y, -1.0 / p.curvature(y))
                }
            },
        })
    }

    pub fn eval(&self, x: f64) -> Result<UtilityValues> {
        self.check_domain(x)?;
        Ok(match &self.family {
            Family::Power { gamma } => power_values(*gamma, x),
            Family::Blend { terms } => terms.iter().fold(UtilityValues { u: 0.0, u1: 0.0, u2: 0.0 }, |acc, (w, g)| {
                let v = power_values(*g, x);
                UtilityValues { u: acc.u + w * v.u, u1: acc.u1 + w * v.u1, u2: acc.u2 + w * v.u2 }
            }),
            Family::Profile(p) => match p.mode {
                Mode::Utility => UtilityValues { u: p.potential(x), u1: p.marginal(x), u2: -p.curvature(x) },
                Mode::Dual => {
                    let y = p.invert_marginal(x)?;
                    UtilityValues { u: -p.potential(y) + x * y, u1: y, u2: -1.0 / p.curvature(y) }
                }
            },
        })
    }

    pub fn u(&self, x: f64) -> Result<f64> {
        Ok(self.eval(x)?.u)
    }

    pub fn u1(&self, x: f64) -> Result<f64> {
        Ok(self.marginals(x)?.0)
    }

    pub fn u2(&self, x: f64) -> Result<f64> {
        Ok(self.marginals(x)?.1)
    }
}

/// Utility document as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum UtilityDocument {
    Power {
        gamma: f64,
        #[serde(default)]
        corridor: Option<(f64, f64)>,
    },
    Log {
        #[serde(default)]
        corridor: Option<(f64, f64)>,
    },
    Blend {
        terms: Vec<BlendTerm>,
        #[serde(default)]
        corridor: Option<(f64, f64)>,
    },
    Constrained(Box<ConstraintSet>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlendTerm {
    pub weight: f64,
    pub gamma: f64,
}

impl UtilityDocument {
    pub fn build(&self) -> Result<UtilitySpec> {
        let check_corridor = |c: (f64, f64)| {
            if c.0 > 0.0 && c.0 < c.1 {
                Ok(c)
            } else {
                Err(Error::Parse(format!("corridor ({}, {}) must satisfy 0 < c1 < c2", c.0, c.1)))
            }
        };
        Ok(match self {
            UtilityDocument::Power { gamma, corridor } => {
                if !(*gamma > 0.0) {
                    return Err(Error::Parse(format!("gamma must be positive, got {gamma}")));
                }
                let u = UtilitySpec::power(*gamma);
                match corridor {
                    Some(c) => {
                        let c = check_corridor(*c)?;
                        u.with_corridor(c.0, c.1)
                    }
                    None => u,
                }
            }
            UtilityDocument::Log { corridor } => {
                let u = UtilitySpec::log();
                match corridor {
                    Some(c) => {
                        let c = check_corridor(*c)?;
                        u.with_corridor(c.0, c.1)
                    }
                    None => u,
                }
            }
            UtilityDocument::Blend { terms, corridor } => {
                if terms.is_empty() || terms.iter().any(|t| !(t.weight > 0.0 && t.gamma > 0.0)) {
                    return Err(Error::Parse("blend terms need positive weights and exponents".into()));
                }
                let u = UtilitySpec::blend(terms.iter().map(|t| (t.weight, t.gamma)).collect());
                match corridor {
                    Some(c) => {
                        let c = check_corridor(*c)?;
                        u.with_corridor(c.0, c.1)
                    }
                    None => u,
                }
            }
            UtilityDocument::Constrained(c) => super::build_constrained_utility(c)?,
        })
    }
}

pub fn parse_utility(text: &str) -> Result<UtilitySpec> {
    let doc: UtilityDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    doc.build()
}

pub fn load_utility(path: impl AsRef<std::path::Path>) -> Result<UtilitySpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_utility(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_closed_forms() {
        let u = UtilitySpec::power(2.0);
        let v = u.eval(0.5).unwrap();
        assert_eq!((v.u, v.u1, v.u2), (-2.0, 4.0, -16.0));
        let l = UtilitySpec::log().eval(std::f64::consts::E).unwrap();
        assert!((l.u - 1.0).abs() < 1e-15);
    }

    #[test]
    fn blend_adds_components() {
        let b = UtilitySpec::blend(vec![(1.0, 0.5), (1.0, 2.0)]);
        let v = b.eval(4.0).unwrap();
        assert!((v.u - (4.0 - 0.25)).abs() < 1e-14);
        assert!((v.u1 - (0.5 + 1.0 / 16.0)).abs() < 1e-15);
        assert_eq!(b.corridor, (0.5, 2.0));
    }

    #[test]
    fn documents_parse() {
        let u = parse_utility(r#"{"family":"power","gamma":3}"#).unwrap();
        assert_eq!(u.constant_rra(), Some(3.0));
        let b = parse_utility(r#"{"family":"blend","terms":[{"weight":1,"gamma":0.5},{"weight":2,"gamma":2}]}"#).unwrap();
        assert!(b.u1(1.0).unwrap() > 0.0);
        assert!(parse_utility(r#"{"family":"power","gamma":-1}"#).is_err());
        assert!(parse_utility(r#"{"family":"log","corridor":[2,1]}"#).is_err());
    }

    #[test]
    fn domain_is_enforced() {
        let u = UtilitySpec::log().with_domain(0.1, 10.0);
        assert!(matches!(u.u1(20.0), Err(Error::Domain { .. })));
        assert!(u.u1(10.0).is_ok());
    }
}
