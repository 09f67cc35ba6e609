//! Utilities built from a prescribed risk-aversion profile.
//!
//! Everything is done in log coordinates `t = ln z`. A profile `θ(t) > 0`
//! defines a positive decreasing marginal
//!
//! ```text
//! g(t) = g_ref · exp(−∫_{t_ref}^t θ(s) ds)
//! ```
//!
//! and the curvature magnitude `κ(z) = θ(ln z) g(ln z) / z`. In utility mode
//! `U′ = g`, `U″ = −κ` and `θ` is the relative risk aversion. In dual mode
//! `−V′ = g`, `V″ = κ` and `θ` is the relative risk tolerance. The primitive
//! of `θ` is available in closed form for every baseline and bump shape, so
//! anchored marginals hold to rounding; only `U` itself (or `V`) needs
//! quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::quad::adaptive_simpson;
use crate::numerics::roots::{brent, newton_bisect};

/// Integral of the unit peak `(1 − u²)³` over `[−1, 1]`.
pub const PEAK_MASS: f64 = 32.0 / 35.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// The profile is the relative risk aversion of `U`.
    Utility,
    /// The profile is the relative risk tolerance of `V`.
    Dual,
}

/// Smooth reference profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Baseline {
    /// Piecewise-linear in `t` through `(t_i, θ_i)`, constant beyond the ends.
    Knots { t: Vec<f64>, theta: Vec<f64> },
    /// `lo + (hi − lo) σ((t − center) / scale)`.
    Logistic { lo: f64, hi: f64, center: f64, scale: f64 },
    /// `c0 + c1 z`.
    Affine { c0: f64, c1: f64 },
}

impl Baseline {
    pub fn constant(c: f64) -> Self {
        Baseline::Affine { c0: c, c1: 0.0 }
    }

    fn theta(&self, t: f64) -> f64 {
        match self {
            Baseline::Knots { t: ts, theta } => {
                let n = ts.len();
                if t <= ts[0] {
                    return theta[0];
                }
                if t >= ts[n - 1] {
                    return theta[n - 1];
                }
                let i = ts.partition_point(|&k| k <= t) - 1;
                let s = (t - ts[i]) / (ts[i + 1] - ts[i]);
                theta[i] + s * (theta[i + 1] - theta[i])
            }
            Baseline::Logistic { lo, hi, center, scale } => lo + (hi - lo) * sigmoid((t - center) / scale),
            Baseline::Affine { c0, c1 } => c0 + c1 * t.exp(),
        }
    }

    /// A primitive of `θ` (any fixed constant of integration).
    fn primitive(&self, t: f64) -> f64 {
        match self {
            Baseline::Knots { t: ts, theta } => {
                let n = ts.len();
                if t <= ts[0] {
                    return theta[0] * (t - ts[0]);
                }
                let mut acc = 0.0;
                for i in 0..n - 1 {
                    let (a, b) = (ts[i], ts[i + 1]);
                    if t <= b {
                        let s = t - a;
                        let slope = (theta[i + 1] - theta[i]) / (b - a);
                        return acc + theta[i] * s + 0.5 * slope * s * s;
                    }
                    acc += 0.5 * (theta[i] + theta[i + 1]) * (b - a);
                }
                acc + theta[n - 1] * (t - ts[n - 1])
            }
            Baseline::Logistic { lo, hi, center, scale } => lo * t + (hi - lo) * scale * softplus((t - center) / scale),
            Baseline::Affine { c0, c1 } => c0 * t + c1 * t.exp(),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Baseline::Knots { t, .. } => t.clone(),
            Baseline::Logistic { center, .. } => vec![*center],
            Baseline::Affine { .. } => Vec::new(),
        }
    }
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// Compactly supported perturbation of `θ`, centred at `z = center`
/// with half-width `half_width` in log units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Bump {
    /// `amplitude · (1 − u²)³`; adds mass `amplitude · half_width · 32/35`.
    Peak { center: f64, half_width: f64, amplitude: f64 },
    /// Value `amplitude` at the centre; each half integrates to zero, so `g`
    /// is unchanged outside the support and at the centre.
    ZeroMeanHalves { center: f64, half_width: f64, amplitude: f64, rho: f64 },
}

/// `∫_{−1}^{u} (1 − s²)³ ds`, clamped outside `[−1, 1]`.
fn peak_primitive(u: f64) -> f64 {
    if u <= -1.0 {
        0.0
    } else if u >= 1.0 {
        PEAK_MASS
    } else {
        let u2 = u * u;
        u * (1.0 - u2 + 0.6 * u2 * u2 - u2 * u2 * u2 / 7.0) + 0.5 * PEAK_MASS
    }
}

fn peak(u: f64) -> f64 {
    if u.abs() < 1.0 {
        let s = 1.0 - u * u;
        s * s * s
    } else {
        0.0
    }
}

impl Bump {
    pub fn center(&self) -> f64 {
        match *self {
            Bump::Peak { center, .. } | Bump::ZeroMeanHalves { center, .. } => center,
        }
    }

    pub fn half_width(&self) -> f64 {
        match *self {
            Bump::Peak { half_width, .. } | Bump::ZeroMeanHalves { half_width, .. } => half_width,
        }
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            Bump::Peak { amplitude, .. } | Bump::ZeroMeanHalves { amplitude, .. } => amplitude,
        }
    }

    pub fn with_amplitude(mut self, a: f64) -> Self {
        match &mut self {
            Bump::Peak { amplitude, .. } | Bump::ZeroMeanHalves { amplitude, .. } => *amplitude = a,
        }
        self
    }

    /// Net change of `∫θ` across the support.
    pub fn mass(&self) -> f64 {
        match *self {
            Bump::Peak { half_width, amplitude, .. } => amplitude * half_width * PEAK_MASS,
            Bump::ZeroMeanHalves { .. } => 0.0,
        }
    }

    fn value(&self, tc: f64, t: f64) -> f64 {
        match *self {
            Bump::Peak { half_width, amplitude, .. } => {
                if t == tc {
                    amplitude
                } else {
                    amplitude * peak((t - tc) / half_width)
                }
            }
            Bump::ZeroMeanHalves { half_width, amplitude, rho, .. } => {
                let u = (t - tc) / half_width;
                amplitude * (peak(u / rho) - rho * peak(u)) / (1.0 - rho)
            }
        }
    }

    fn primitive(&self, tc: f64, t: f64) -> f64 {
        match *self {
            Bump::Peak { half_width, amplitude, .. } => {
                let u = if t == tc { 0.0 } else { (t - tc) / half_width };
                amplitude * half_width * peak_primitive(u)
            }
            Bump::ZeroMeanHalves { half_width, amplitude, rho, .. } => {
                let u = (t - tc) / half_width;
                let inner = rho * (peak_primitive(u / rho) - 0.5 * PEAK_MASS);
                let outer = rho * (peak_primitive(u) - 0.5 * PEAK_MASS);
                amplitude * half_width * (inner - outer) / (1.0 - rho)
            }
        }
    }
}

/// Additive normalisation of the potential `Φ = level + ∫ g e^t dt`
/// (`U = Φ` in utility mode, `V = −Φ` in dual mode).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Level {
    /// `Φ(z_ref) = value`.
    Reference(f64),
    /// `Φ(0+) = 0`, extrapolating `θ` as constant below the domain.
    VanishBelow,
    /// `Φ(∞) = 0`, extrapolating `θ` as constant above the domain.
    VanishAbove,
}

/// Fully assembled profile; cheap to evaluate.
#[derive(Debug, Clone)]
pub struct Profile {
    pub mode: Mode,
    baseline: Baseline,
    bumps: Vec<(f64, Bump)>,
    t_ref: f64,
    lng_ref: f64,
    prim_ref: f64,
    t_lo: f64,
    t_hi: f64,
    breaks: Vec<f64>,
    cum: Vec<f64>,
    level: f64,
}

impl Profile {
    /// `g(z_ref) = g_ref`; the trusted range is `[z_lo, z_hi]`.
    pub fn new(
        mode: Mode,
        baseline: Baseline,
        bumps: Vec<Bump>,
        reference: (f64, f64),
        range: (f64, f64),
        level: Level,
    ) -> Result<Self> {
        if !(range.0 > 0.0 && range.0 < range.1 && range.1.is_finite()) {
            return Err(Error::Infeasible(format!("bad profile range [{}, {}]", range.0, range.1)));
        }
        if !(reference.0 > 0.0 && reference.1 > 0.0) {
            return Err(Error::Infeasible("reference point must be positive".into()));
        }
        let bumps: Vec<(f64, Bump)> = bumps.into_iter().map(|b| (b.center().ln(), b)).collect();
        let mut p = Profile {
            mode,
            baseline,
            bumps,
            t_ref: reference.0.ln(),
            lng_ref: reference.1.ln(),
            prim_ref: 0.0,
            t_lo: range.0.ln(),
            t_hi: range.1.ln(),
            breaks: Vec::new(),
            cum: Vec::new(),
            level: 0.0,
        };
        p.prim_ref = p.theta_primitive(p.t_ref);
        p.tabulate();
        p.level = match level {
            Level::Reference(v) => v - p.big_g(p.t_ref),
            Level::VanishBelow => {
                let th = p.theta(p.t_lo);
                if !(th < 1.0) {
                    return Err(Error::Infeasible(format!("lower tail not integrable (θ = {th})")));
                }
                let tail = (p.lng(p.t_lo) + p.t_lo).exp() / (1.0 - th);
                tail - p.big_g(p.t_lo)
            }
            Level::VanishAbove => {
                let th = p.theta(p.t_hi);
                if !(th > 1.0) {
                    return Err(Error::Infeasible(format!("upper tail not integrable (θ = {th})")));
                }
                let tail = (p.lng(p.t_hi) + p.t_hi).exp() / (th - 1.0);
                -tail - p.big_g(p.t_hi)
            }
        };
        Ok(p)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.t_lo.exp(), self.t_hi.exp())
    }

    pub fn bumps(&self) -> impl Iterator<Item = &Bump> {
        self.bumps.iter().map(|(_, b)| b)
    }

    pub fn baseline(&self) -> &Baseline {
        &self.baseline
    }

    fn theta_primitive(&self, t: f64) -> f64 {
        self.baseline.primitive(t) + self.bumps.iter().map(|(tc, b)| b.primitive(*tc, t)).sum::<f64>()
    }

    /// Profile value at `t = ln z`.
    pub fn theta(&self, t: f64) -> f64 {
        self.baseline.theta(t)
            + self
                .bumps
                .iter()
                .filter(|(tc, b)| t == *tc || (t - tc).abs() < b.half_width())
                .map(|(tc, b)| b.value(*tc, t))
                .sum::<f64>()
    }

    /// `ln g(t)`.
    pub fn lng(&self, t: f64) -> f64 {
        self.lng_ref - (self.theta_primitive(t) - self.prim_ref)
    }

    /// `g` at `z`.
    pub fn marginal(&self, z: f64) -> f64 {
        self.lng(z.ln()).exp()
    }

    /// `θ g / z`.
    pub fn curvature(&self, z: f64) -> f64 {
        let t = z.ln();
        self.theta(t) * self.lng(t).exp() / z
    }

    pub fn contains(&self, z: f64) -> bool {
        let t = z.ln();
        t >= self.t_lo - 1e-12 && t <= self.t_hi + 1e-12
    }

    fn integrand(&self, s: f64) -> f64 {
        (self.lng(s) + s).exp()
    }

    fn segment(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let f = |s: f64| self.integrand(s);
        let scale = (f(a).abs() + f(b).abs() + f(0.5 * (a + b)).abs()) * (b - a).abs();
        adaptive_simpson(&f, a, b, 1e-15 * scale.max(f64::MIN_POSITIVE))
    }

    fn tabulate(&mut self) {
        let mut br = vec![self.t_lo, self.t_hi, self.t_ref.clamp(self.t_lo, self.t_hi)];
        br.extend(self.baseline.breakpoints());
        for (tc, b) in &self.bumps {
            br.extend([tc - b.half_width(), *tc, tc + b.half_width()]);
        }
        br.retain(|t| *t >= self.t_lo && *t <= self.t_hi && t.is_finite());
        br.sort_by(|a, b| a.partial_cmp(b).unwrap());
        br.dedup();
        let mut fine = Vec::with_capacity(br.len() * 2);
        for w in br.windows(2) {
            let n = ((w[1] - w[0]) / 0.5).ceil().max(1.0) as usize;
            for k in 0..n {
                fine.push(w[0] + (w[1] - w[0]) * k as f64 / n as f64);
            }
        }
        fine.push(*br.last().unwrap());
        let mut cum = vec![0.0; fine.len()];
        for i in 1..fine.len() {
            cum[i] = cum[i - 1] + self.segment(fine[i - 1], fine[i]);
        }
        self.breaks = fine;
        self.cum = cum;
    }

    /// `∫_{t_lo}^{t} g(s) e^s ds`.
    fn big_g(&self, t: f64) -> f64 {
        let i = self.breaks.partition_point(|&b| b <= t).max(1) - 1;
        self.cum[i] + self.segment(self.breaks[i], t)
    }

    /// The potential `Φ(z) = level + ∫ g dz`.
    pub fn potential(&self, z: f64) -> f64 {
        self.level + self.big_g(z.ln())
    }

    /// Solves `g(t) = target` on the trusted range (`g` is decreasing).
    pub fn invert_marginal(&self, target: f64) -> Result<f64> {
        let ln_target = target.ln();
        let hi_val = self.lng(self.t_lo);
        let lo_val = self.lng(self.t_hi);
        if !(ln_target <= hi_val + 1e-13 && ln_target >= lo_val - 1e-13) {
            return Err(Error::Unreachable(target));
        }
        let t0 = (self.t_lo + (hi_val - ln_target) / (hi_val - lo_val) * (self.t_hi - self.t_lo))
            .clamp(self.t_lo, self.t_hi);
        let t = newton_bisect(
            |t| Ok((self.lng(t) - ln_target, -self.theta(t))),
            self.t_lo,
            self.t_hi,
            t0,
            1e-16,
        )?;
        Ok(t.exp())
    }
}

/// Prescribed curvature magnitude at one point, realised by a narrow peak of
/// fixed `θ`-mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureTarget {
    pub at: f64,
    /// `−U″(at)` in utility mode, `V″(at)` in dual mode.
    pub value: f64,
    /// Mass added to `∫θ` by the peak (controls how much `g` drops across it).
    pub mass: f64,
}

/// `Σ p_i s_i-curvature w_i = 0`, met by choosing the amplitude of `bump`
/// inside `bracket`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCondition {
    pub points: Vec<f64>,
    pub probs: Vec<f64>,
    pub weights: Vec<f64>,
    pub bump: Bump,
    pub bracket: (f64, f64),
}

impl MomentCondition {
    /// `Σ p_i U″(s_i) w_i` (utility mode) for a given profile.
    pub fn residual(&self, profile: &Profile) -> f64 {
        let sign = match profile.mode {
            Mode::Utility => -1.0,
            Mode::Dual => 1.0,
        };
        self.points
            .iter()
            .zip(&self.probs)
            .zip(&self.weights)
            .map(|((s, p), w)| sign * p * profile.curvature(*s) * w)
            .sum()
    }
}

/// Everything `build_constrained_utility` needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub mode: Mode,
    /// `(z, g(z))` pairs; with no explicit baseline they define a knot
    /// baseline through their log-slopes.
    #[serde(default)]
    pub anchors: Vec<(f64, f64)>,
    #[serde(default)]
    pub baseline: Option<Baseline>,
    #[serde(default)]
    pub bumps: Vec<Bump>,
    #[serde(default)]
    pub curvature_targets: Vec<CurvatureTarget>,
    #[serde(default)]
    pub moment: Option<MomentCondition>,
    pub corridor: (f64, f64),
    /// Trusted range of the profile variable (`x` in utility mode, `y` in
    /// dual mode).
    pub range: (f64, f64),
    pub level: Level,
}

impl ConstraintSet {
    /// Baseline, the correction bumps it needs, and the reference point.
    fn resolve_baseline(&self) -> Result<(Baseline, Vec<Bump>, (f64, f64))> {
        match &self.baseline {
            Some(b) => {
                let reference = match self.anchors.as_slice() {
                    [r] => *r,
                    _ => {
                        return Err(Error::Infeasible(
                            "an explicit baseline needs exactly one anchor as reference".into(),
                        ))
                    }
                };
                Ok((b.clone(), Vec::new(), reference))
            }
            None => {
                let mut a = self.anchors.clone();
                if a.len() < 2 {
                    return Err(Error::Infeasible("at least two anchors are needed without a baseline".into()));
                }
                a.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
                let ts: Vec<f64> = a.iter().map(|p| p.0.ln()).collect();
                let mut avg = Vec::with_capacity(a.len() - 1);
                for i in 0..a.len() - 1 {
                    if !(ts[i + 1] > ts[i]) || !(a[i].1 > a[i + 1].1) || !(a[i + 1].1 > 0.0) {
                        return Err(Error::Infeasible(format!(
                            "anchored marginals must be positive and strictly decreasing (at z = {})",
                            a[i + 1].0
                        )));
                    }
                    avg.push((a[i].1 / a[i + 1].1).ln() / (ts[i + 1] - ts[i]));
                }
                let n = a.len();
                let mut knots = Vec::with_capacity(n);
                knots.push(avg[0]);
                for i in 1..n - 1 {
                    knots.push(0.5 * (avg[i - 1] + avg[i]));
                }
                knots.push(avg[n - 2]);
                let mut corrections = Vec::new();
                for i in 0..n - 1 {
                    let dt = ts[i + 1] - ts[i];
                    let need = (avg[i] - 0.5 * (knots[i] + knots[i + 1])) * dt;
                    if need.abs() > 1e-15 * dt {
                        let hw = 0.5 * dt;
                        corrections.push(Bump::Peak {
                            center: (0.5 * (ts[i] + ts[i + 1])).exp(),
                            half_width: hw,
                            amplitude: need / (hw * PEAK_MASS),
                        });
                    }
                }
                Ok((Baseline::Knots { t: ts, theta: knots }, corrections, a[0]))
            }
        }
    }

    /// Assembles the profile for a given amplitude of the moment bump.
    fn assemble(&self, moment_amplitude: Option<f64>) -> Result<Profile> {
        let (baseline, mut bumps, reference) = self.resolve_baseline()?;
        bumps.extend(self.bumps.iter().copied());
        if let (Some(m), Some(a)) = (&self.moment, moment_amplitude) {
            bumps.push(m.bump.with_amplitude(a));
        }
        if self.curvature_targets.is_empty() {
            return Profile::new(self.mode, baseline, bumps, reference, self.range, self.level);
        }
        // heights need g at each target, which depends on every peak mass
        // to its left and half of its own
        let mut targets = self.curvature_targets.clone();
        targets.sort_by(|p, q| p.at.partial_cmp(&q.at).unwrap());
        let provisional = Profile::new(self.mode, baseline.clone(), bumps.clone(), reference, self.range, self.level)?;
        let ref_t = reference.0.ln();
        let mut spikes = Vec::with_capacity(targets.len());
        for tg in &targets {
            let t = tg.at.ln();
            // peak masses strictly between the reference and the target shift ln g
            let between: f64 = targets
                .iter()
                .map(|o| (o.at.ln(), o.mass))
                .filter(|(to, _)| (*to > ref_t.min(t)) && (*to < ref_t.max(t)))
                .map(|(_, m)| m)
                .sum();
            let shift = if t > ref_t {
                -between - 0.5 * tg.mass
            } else if t < ref_t {
                between + 0.5 * tg.mass
            } else {
                0.0
            };
            let g = (provisional.lng(t) + shift).exp();
            let h = tg.value * tg.at / g - provisional.theta(t);
            if !(h > 0.0) {
                return Err(Error::Infeasible(format!(
                    "curvature target {} at {} is below the unperturbed curvature",
                    tg.value, tg.at
                )));
            }
            spikes.push(Bump::Peak { center: tg.at, half_width: tg.mass / (h * PEAK_MASS), amplitude: h });
        }
        for w in spikes.windows(2) {
            let (a, b) = (w[0].center().ln(), w[1].center().ln());
            if a + w[0].half_width() >= b - w[1].half_width() {
                return Err(Error::Infeasible(format!("curvature peaks at {} and {} overlap", w[0].center(), w[1].center())));
            }
        }
        bumps.extend(spikes);
        Profile::new(self.mode, baseline, bumps, reference, self.range, self.level)
    }

    /// Builds the profile, solving the moment condition if present.
    pub fn build(&self) -> Result<Profile> {
        if !(self.corridor.0 > 0.0 && self.corridor.0 < self.corridor.1) {
            return Err(Error::Infeasible(format!("bad corridor ({}, {})", self.corridor.0, self.corridor.1)));
        }
        let Some(m) = &self.moment else {
            return self.assemble(None);
        };
        let f = |a: f64| -> Result<f64> { Ok(m.residual(&self.assemble(Some(a))?)) };
        let (lo, hi) = m.bracket;
        let (flo, fhi) = (f(lo)?, f(hi)?);
        if flo.signum() == fhi.signum() && flo != 0.0 && fhi != 0.0 {
            return Err(Error::Infeasible(format!(
                "moment condition not bracketed on [{lo}, {hi}] (residuals {flo:e}, {fhi:e})"
            )));
        }
        let a = brent(f, lo, hi, 1e-15)?;
        self.assemble(Some(a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_anchors() -> ConstraintSet {
        ConstraintSet {
            mode: Mode::Utility,
            anchors: [0.125, 0.25, 0.5, 2.0].iter().map(|&x| (x, 1.0 / x)).collect(),
            baseline: None,
            bumps: vec![],
            curvature_targets: vec![],
            moment: None,
            corridor: (0.5, 2.0),
            range: (1e-3, 1e3),
            level: Level::Reference(0.0),
        }
    }

    #[test]
    fn peak_primitive_matches_quadrature() {
        for &u in &[-1.0, -0.7, 0.0, 0.3, 0.99, 1.0] {
            let q = adaptive_simpson(&peak, -1.0, u, 1e-15);
            assert!((peak_primitive(u) - q).abs() < 1e-13, "{u}");
        }
    }

    #[test]
    fn zero_mean_halves() {
        let b = Bump::ZeroMeanHalves { center: 1.0, half_width: 0.5, amplitude: 2.0, rho: 0.2 };
        assert!((b.value(0.0, 0.0) - 2.0).abs() < 1e-15);
        assert!(b.primitive(0.0, 0.0).abs() < 1e-15);
        assert!(b.primitive(0.0, 0.5).abs() < 1e-15);
        let left = adaptive_simpson(&|t| b.value(0.0, t), -0.5, -0.1, 1e-15)
            + adaptive_simpson(&|t| b.value(0.0, t), -0.1, 0.0, 1e-15);
        assert!((b.primitive(0.0, -0.1) - adaptive_simpson(&|t| b.value(0.0, t), -0.5, -0.1, 1e-15)).abs() < 1e-13);
        assert!(left.abs() < 1e-13);
    }

    #[test]
    fn log_anchors_reproduce_log_utility() {
        let p = log_anchors().build().unwrap();
        assert_eq!(p.bumps().count(), 0);
        for &x in &[0.01, 0.125, 0.3, 2.0, 50.0] {
            assert!((p.marginal(x) * x - 1.0).abs() < 1e-13);
            assert!((p.curvature(x) * x * x - 1.0).abs() < 1e-13);
            assert!((p.potential(x) - x.ln() + 0.125f64.ln()).abs() < 1e-11, "{x}");
        }
    }

    #[test]
    fn uneven_anchors_are_met_exactly() {
        let mut c = log_anchors();
        c.anchors = vec![(0.5, 4.0), (1.0, 1.0), (3.0, 0.3), (4.0, 0.2)];
        let p = c.build().unwrap();
        for (x, g) in &c.anchors {
            assert!((p.marginal(*x) / g - 1.0).abs() < 1e-13);
        }
        c.anchors[2].1 = 2.0;
        assert!(matches!(c.build(), Err(Error::Infeasible(_))));
    }

    #[test]
    fn logistic_baseline_closed_form() {
        let c = ConstraintSet {
            baseline: Some(Baseline::Logistic { lo: 0.5, hi: 1.5, center: 0.0, scale: 1.0 }),
            anchors: vec![(1.0, 0.5)],
            ..log_anchors()
        };
        let p = c.build().unwrap();
        for &x in &[0.01f64, 1.0, 7.0, 300.0] {
            let expect = x.powf(-0.5) / (1.0 + x);
            assert!((p.marginal(x) / expect - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn curvature_targets_hit_exactly() {
        let mut c = log_anchors();
        c.curvature_targets = (2..8)
            .map(|k| CurvatureTarget { at: k as f64, value: 2f64.powi(k), mass: 1e-12 })
            .collect();
        let p = c.build().unwrap();
        for k in 2..8 {
            assert!((p.curvature(k as f64) / 2f64.powi(k) - 1.0).abs() < 1e-12);
        }
        // marginals barely move
        assert!((p.marginal(10.0) * 10.0 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn moment_condition_is_solved() {
        let mut c = log_anchors();
        let pts = vec![0.125, 0.25, 0.5, 2.0];
        c.moment = Some(MomentCondition {
            weights: pts.iter().map(|s| 1.0 - s * s).collect(),
            probs: vec![0.01, 0.04, 0.15, 0.8],
            points: pts,
            bump: Bump::ZeroMeanHalves { center: 2.0, half_width: 0.6, amplitude: 0.0, rho: 0.2 },
            bracket: (0.0, 20.0),
        });
        let p = c.build().unwrap();
        assert!(c.moment.as_ref().unwrap().residual(&p).abs() < 1e-12);
        assert!((p.marginal(2.0) * 2.0 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn vanishing_levels() {
        let up = ConstraintSet { level: Level::VanishAbove, anchors: vec![(1.0, 1.0)], baseline: Some(Baseline::constant(2.0)), ..log_anchors() };
        let p = up.build().unwrap();
        // U = −1/x
        assert!((p.potential(3.0) + 1.0 / 3.0).abs() < 1e-12);
        let down = ConstraintSet { level: Level::VanishBelow, baseline: Some(Baseline::constant(0.5)), ..up };
        let p = down.build().unwrap();
        // U = 2 √x
        assert!((p.potential(4.0) - 4.0).abs() < 1e-12);
        assert!((p.invert_marginal(0.25).unwrap() - 16.0).abs() < 1e-11);
    }
}
