//! Lévy measures described through their one-sided tail functions.
//!
//! A [`LevyMeasureSpec`] carries the triplet `(γ, σ², Π)` with `Π` given by
//! the positive tail `Π̄⁺(x) = Π((x, ∞))` and the negative tail
//! `Π̄⁻(x) = Π((−∞, −x))`. Everything downstream (samplers, norming, tie
//! corrections) is written against the operations here: tails and their left
//! limits, right-continuous inverses and truncated moments.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, LevyError, Result};
use crate::quad;
use crate::smoother::SmoothedTail;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Plus,
    Minus,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

impl Atom {
    pub fn new(location: f64, mass: f64) -> Self {
        Atom { location, mass }
    }
}

/// A one-sided tail `x ↦ Π̄(x)` on `(0, ∞)`: nonincreasing, right-continuous.
#[derive(Debug, Clone)]
pub enum TailFunction {
    /// `c·x^(−α)` for all `x > 0`.
    PowerLaw { c: f64, alpha: f64 },
    /// `c·x^(−α)` below `cap` and `0` from `cap` on; the measure carries an
    /// atom of mass `c·cap^(−α)` at `cap`.
    PowerLawCapped { c: f64, alpha: f64, cap: f64 },
    /// Point masses; sorted by location, duplicates merged.
    StepAtoms(Vec<Atom>),
    /// Tail of the measure after the quadratic smoothing transform.
    Smoothed(Arc<SmoothedTail>),
    Composite(Vec<TailFunction>),
    /// The base measure restricted to jumps strictly below `upper`.
    Restricted { base: Box<TailFunction>, upper: f64 },
}

fn pl_first_moment(c: f64, alpha: f64, a: f64, b: f64) -> f64 {
    // ∫_a^b y · αc y^(−α−1) dy
    if b <= a {
        return 0.0;
    }
    if (alpha - 1.0).abs() < 1e-12 {
        alpha * c * (b / a).ln()
    } else {
        alpha * c * (b.powf(1.0 - alpha) - a.powf(1.0 - alpha)) / (1.0 - alpha)
    }
}

fn pl_second_moment(c: f64, alpha: f64, x: f64) -> f64 {
    alpha * c * x.powf(2.0 - alpha) / (2.0 - alpha)
}

fn merge_atoms(mut atoms: Vec<Atom>) -> Vec<Atom> {
    atoms.retain(|a| a.mass > 0.0);
    atoms.sort_by(|x, y| x.location.partial_cmp(&y.location).unwrap());
    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    for a in atoms {
        match out.last_mut() {
            Some(last) if last.location == a.location => last.mass += a.mass,
            _ => out.push(a),
        }
    }
    out
}

impl TailFunction {
    pub fn zero() -> Self {
        TailFunction::StepAtoms(Vec::new())
    }

    pub fn power(c: f64, alpha: f64) -> Self {
        TailFunction::PowerLaw { c, alpha }
    }

    pub fn capped(c: f64, alpha: f64, cap: f64) -> Self {
        TailFunction::PowerLawCapped { c, alpha, cap }
    }

    pub fn atoms(atoms: &[(f64, f64)]) -> Self {
        TailFunction::StepAtoms(merge_atoms(atoms.iter().map(|&(l, m)| Atom::new(l, m)).collect()))
    }

    pub fn restricted(base: TailFunction, upper: f64) -> Self {
        TailFunction::Restricted {
            base: Box::new(base),
            upper,
        }
    }

    /// Sum of two tails, collapsing power laws with a common index (and cap)
    /// and merging atom lists so that closed-form inversion stays available.
    pub fn sum(a: &TailFunction, b: &TailFunction) -> TailFunction {
        use TailFunction::*;
        match (a, b) {
            (StepAtoms(x), _) if x.is_empty() => b.clone(),
            (_, StepAtoms(y)) if y.is_empty() => a.clone(),
            (PowerLaw { c: c1, alpha: a1 }, PowerLaw { c: c2, alpha: a2 }) if a1 == a2 => PowerLaw {
                c: c1 + c2,
                alpha: *a1,
            },
            (
                PowerLawCapped {
                    c: c1,
                    alpha: a1,
                    cap: k1,
                },
                PowerLawCapped {
                    c: c2,
                    alpha: a2,
                    cap: k2,
                },
            ) if a1 == a2 && k1 == k2 => PowerLawCapped {
                c: c1 + c2,
                alpha: *a1,
                cap: *k1,
            },
            (StepAtoms(x), StepAtoms(y)) => StepAtoms(merge_atoms(x.iter().chain(y.iter()).copied().collect())),
            _ => {
                let mut parts = Vec::new();
                for t in [a, b] {
                    match t {
                        Composite(p) => parts.extend(p.iter().cloned()),
                        other => parts.push(other.clone()),
                    }
                }
                Composite(parts)
            }
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        use TailFunction::*;
        let bad = |m: String| Err(LevyError::InvalidMeasure(m));
        match self {
            PowerLaw { c, alpha } | PowerLawCapped { c, alpha, .. } => {
                if !(*c > 0.0 && c.is_finite()) {
                    return bad(format!("power-law scale must be positive, got {c}"));
                }
                if !(*alpha > 0.0 && *alpha < 2.0) {
                    return bad(format!("power-law index must lie in (0,2), got {alpha}"));
                }
                if let PowerLawCapped { cap, .. } = self {
                    if !(*cap > 0.0 && cap.is_finite()) {
                        return bad(format!("cap must be positive, got {cap}"));
                    }
                }
                Ok(())
            }
            StepAtoms(atoms) => {
                for a in atoms {
                    if !(a.location > 0.0 && a.location.is_finite() && a.mass > 0.0 && a.mass.is_finite()) {
                        return bad(format!("atoms need positive location and mass, got {a:?}"));
                    }
                }
                Ok(())
            }
            Smoothed(_) => Ok(()),
            Composite(parts) => parts.iter().try_for_each(|p| p.validate()),
            Restricted { base, upper } => {
                if !(*upper > 0.0) {
                    return bad(format!("restriction level must be positive, got {upper}"));
                }
                base.validate()
            }
        }
    }

    /// `Π̄(x)` for `x > 0`.
    pub fn tail(&self, x: f64) -> f64 {
        use TailFunction::*;
        match self {
            PowerLaw { c, alpha } => c * x.powf(-alpha),
            PowerLawCapped { c, alpha, cap } => {
                if x < *cap {
                    c * x.powf(-alpha)
                } else {
                    0.0
                }
            }
            StepAtoms(atoms) => atoms.iter().filter(|a| a.location > x).map(|a| a.mass).sum(),
            Smoothed(s) => s.tail(x).unwrap_or(f64::NAN),
            Composite(parts) => parts.iter().map(|p| p.tail(x)).sum(),
            Restricted { base, upper } => {
                if x < *upper {
                    (base.tail(x) - base.left_limit(*upper)).max(0.0)
                } else {
                    0.0
                }
            }
        }
    }

    /// `Π̄(x−) = Π([x, ∞))`.
    pub fn left_limit(&self, x: f64) -> f64 {
        use TailFunction::*;
        match self {
            PowerLaw { .. } | Smoothed(_) => self.tail(x),
            PowerLawCapped { c, alpha, cap } => {
                if x <= *cap {
                    c * x.powf(-alpha)
                } else {
                    0.0
                }
            }
            StepAtoms(atoms) => atoms.iter().filter(|a| a.location >= x).map(|a| a.mass).sum(),
            Composite(parts) => parts.iter().map(|p| p.left_limit(x)).sum(),
            Restricted { base, upper } => {
                if x < *upper {
                    (base.left_limit(x) - base.left_limit(*upper)).max(0.0)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn atom_mass(&self, x: f64) -> f64 {
        use TailFunction::*;
        match self {
            PowerLaw { .. } | Smoothed(_) => 0.0,
            PowerLawCapped { c, alpha, cap } => {
                if x == *cap {
                    c * cap.powf(-alpha)
                } else {
                    0.0
                }
            }
            StepAtoms(atoms) => atoms.iter().filter(|a| a.location == x).map(|a| a.mass).sum(),
            Composite(parts) => parts.iter().map(|p| p.atom_mass(x)).sum(),
            Restricted { base, upper } => {
                if x < *upper {
                    base.atom_mass(x)
                } else {
                    0.0
                }
            }
        }
    }

    /// `Π̄(0+)`; `+∞` for infinite activity.
    pub fn total_mass(&self) -> f64 {
        use TailFunction::*;
        match self {
            PowerLaw { .. } | PowerLawCapped { .. } => f64::INFINITY,
            StepAtoms(atoms) => atoms.iter().map(|a| a.mass).sum(),
            Smoothed(s) => s.base_total_mass(),
            Composite(parts) => parts.iter().map(|p| p.total_mass()).sum(),
            Restricted { base, upper } => {
                let m = base.total_mass();
                if m.is_infinite() {
                    m
                } else {
                    (m - base.left_limit(*upper)).max(0.0)
                }
            }
        }
    }

    pub fn is_infinite_activity(&self) -> bool {
        self.total_mass().is_infinite()
    }

    /// Known atoms of the measure, sorted by location.
    pub fn atom_list(&self) -> Vec<Atom> {
        use TailFunction::*;
        match self {
            PowerLaw { .. } | Smoothed(_) => Vec::new(),
            PowerLawCapped { c, alpha, cap } => vec![Atom::new(*cap, c * cap.powf(-alpha))],
            StepAtoms(atoms) => atoms.clone(),
            Composite(parts) => merge_atoms(parts.iter().flat_map(|p| p.atom_list()).collect()),
            Restricted { base, upper } => base.atom_list().into_iter().filter(|a| a.location < *upper).collect(),
        }
    }

    /// Supremum of the support (`∞` when unbounded, `0` for the zero tail).
    pub fn support_sup(&self) -> f64 {
        use TailFunction::*;
        match self {
            PowerLaw { .. } => f64::INFINITY,
            PowerLawCapped { cap, .. } => *cap,
            StepAtoms(atoms) => atoms.last().map_or(0.0, |a| a.location),
            Smoothed(s) => s.support_sup(),
            Composite(parts) => parts.iter().map(|p| p.support_sup()).fold(0.0, f64::max),
            Restricted { base, upper } => base.support_sup().min(*upper),
        }
    }

    /// Flatten into summands that can be sampled independently.
    pub fn components(&self) -> Vec<TailFunction> {
        use TailFunction::*;
        match self {
            Composite(parts) => parts.iter().flat_map(|p| p.components()).collect(),
            Restricted { base, upper } => base
                .components()
                .into_iter()
                .map(|b| TailFunction::restricted(b, *upper))
                .collect(),
            StepAtoms(a) if a.is_empty() => Vec::new(),
            other => vec![other.clone()],
        }
    }

    /// Right-continuous inverse `inf{y > 0 : Π̄(y) ≤ v}`, `v > 0`.
    pub fn inverse(&self, v: f64) -> f64 {
        use TailFunction::*;
        match self {
            PowerLaw { c, alpha } => (c / v).powf(1.0 / alpha),
            PowerLawCapped { c, alpha, cap } => (c / v).powf(1.0 / alpha).min(*cap),
            StepAtoms(atoms) => {
                // tail is constant on [loc_i, loc_{i+1}) and equals the total on (0, loc_0)
                let mut remaining: f64 = atoms.iter().map(|a| a.mass).sum();
                if remaining <= v {
                    return 0.0;
                }
                for a in atoms {
                    remaining -= a.mass;
                    if remaining <= v * (1.0 + 1e-15) {
                        return a.location;
                    }
                }
                atoms.last().map_or(0.0, |a| a.location)
            }
            Restricted { base, upper } => {
                let shifted = v + base.left_limit(*upper);
                base.inverse(shifted).min(*upper)
            }
            Composite(_) | Smoothed(_) => self.inverse_by_bisection(v),
        }
    }

    fn inverse_by_bisection(&self, v: f64) -> f64 {
        if self.total_mass() <= v {
            return 0.0;
        }
        let mut hi = 1.0_f64;
        let mut guard = 0;
        while self.tail(hi) > v {
            hi *= 2.0;
            guard += 1;
            if guard > 2000 {
                return f64::NAN;
            }
        }
        let mut lo = hi * 0.5;
        guard = 0;
        while self.tail(lo) <= v {
            hi = lo;
            lo *= 0.5;
            guard += 1;
            if guard > 2000 || lo == 0.0 {
                return 0.0;
            }
        }
        // invariant: tail(lo) > v >= tail(hi)
        for _ in 0..200 {
            if hi - lo <= 1e-12 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.tail(mid) > v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // the exact inverse sits on an atom when the tail drops across one
        for a in self.atom_list() {
            if a.location >= lo && a.location <= hi && self.tail(a.location) <= v {
                return a.location;
            }
        }
        hi
    }

    /// `∫_{(a,b]} y Π(dy)` for `0 < a ≤ b`.
    pub fn first_moment(&self, a: f64, b: f64) -> Result<f64> {
        use TailFunction::*;
        if b <= a {
            return Ok(0.0);
        }
        Ok(match self {
            PowerLaw { c, alpha } => pl_first_moment(*c, *alpha, a, b),
            PowerLawCapped { c, alpha, cap } => {
                if a >= *cap {
                    0.0
                } else {
                    let mut m = pl_first_moment(*c, *alpha, a, b.min(*cap));
                    if *cap <= b {
                        m += cap * c * cap.powf(-alpha);
                    }
                    m
                }
            }
            StepAtoms(atoms) => atoms
                .iter()
                .filter(|at| at.location > a && at.location <= b)
                .map(|at| at.location * at.mass)
                .sum(),
            Composite(parts) => {
                let mut s = 0.0;
                for p in parts {
                    s += p.first_moment(a, b)?;
                }
                s
            }
            Restricted { base, upper } => {
                if a >= *upper {
                    0.0
                } else {
                    let hi = b.min(*upper);
                    let mut m = base.first_moment(a, hi)?;
                    if b >= *upper {
                        m -= upper * base.atom_mass(*upper);
                    }
                    m
                }
            }
            Smoothed(_) => {
                // ∫_{(a,b]} y Π(dy) = a Π̄(a) − b Π̄(b) + ∫_a^b Π̄(y) dy
                let bp = self.breakpoints();
                let integral = quad::integrate(|y| self.tail(y), a, b, &bp)?;
                a * self.tail(a) - b * self.tail(b) + integral
            }
        })
    }

    /// `∫_{(0,x]} y² Π(dy)`.
    pub fn second_moment(&self, x: f64) -> Result<f64> {
        use TailFunction::*;
        Ok(match self {
            PowerLaw { c, alpha } => pl_second_moment(*c, *alpha, x),
            PowerLawCapped { c, alpha, cap } => {
                let mut m = pl_second_moment(*c, *alpha, x.min(*cap));
                if *cap <= x {
                    m += cap * cap * c * cap.powf(-alpha);
                }
                m
            }
            StepAtoms(atoms) => atoms
                .iter()
                .filter(|at| at.location <= x)
                .map(|at| at.location * at.location * at.mass)
                .sum(),
            Composite(parts) => {
                let mut s = 0.0;
                for p in parts {
                    s += p.second_moment(x)?;
                }
                s
            }
            Restricted { base, upper } => {
                if x < *upper {
                    base.second_moment(x)?
                } else {
                    base.second_moment(*upper)? - upper * upper * base.atom_mass(*upper)
                }
            }
            Smoothed(_) => {
                // V-part = 2∫_0^x y Π̄(y) dy − x² Π̄(x)
                let bp = self.breakpoints();
                let integral = quad::integrate_from_zero(|y| y * self.tail(y), x, 8.0, &bp)?;
                2.0 * integral - x * x * self.tail(x)
            }
        })
    }

    /// Points where the tail may jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            TailFunction::Smoothed(s) => s.discontinuity_hints(),
            other => other.atom_list().iter().map(|a| a.location).collect(),
        }
    }
}

/// The canonical Lévy triplet `(γ, σ², Π)`.
#[derive(Debug, Clone)]
pub struct LevyMeasureSpec {
    pub gamma: f64,
    pub sigma2: f64,
    pub plus: TailFunction,
    pub minus: TailFunction,
    both: TailFunction,
}

/// Which sides have `Π̄^±(0+) = ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Activity {
    pub plus_infinite: bool,
    pub minus_infinite: bool,
}

impl Activity {
    pub fn both_infinite(&self) -> bool {
        self.plus_infinite && self.minus_infinite
    }
    pub fn any_infinite(&self) -> bool {
        self.plus_infinite || self.minus_infinite
    }
}

/// Move an approximate inverse to the smallest float `y` with `tail(y) ≤ v`,
/// so that `inverse(v) ≤ y ⇔ tail(y) ≤ v` holds in floating point.
fn snap_to_float(tail: &TailFunction, v: f64, y: f64) -> f64 {
    if !(y > 0.0 && y.is_finite()) {
        return y;
    }
    let mut hi = y;
    let mut steps = 0;
    while tail.tail(hi) > v {
        hi = hi.next_up();
        steps += 1;
        if steps > 64 {
            return y;
        }
    }
    let below = hi.next_down();
    if below <= 0.0 || tail.tail(below) > v {
        return hi;
    }
    let mut lo = hi * (1.0 - 1e-10);
    if tail.tail(lo) <= v {
        return hi;
    }
    // positive floats are ordered like their bit patterns
    while hi.to_bits() - lo.to_bits() > 1 {
        let mid = f64::from_bits(lo.to_bits() + (hi.to_bits() - lo.to_bits()) / 2);
        if tail.tail(mid) > v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

impl LevyMeasureSpec {
    pub fn new(gamma: f64, sigma2: f64, plus: TailFunction, minus: TailFunction) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(LevyError::InvalidMeasure(format!("gamma must be finite, got {gamma}")));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(LevyError::InvalidMeasure(format!("sigma2 must be nonnegative, got {sigma2}")));
        }
        plus.validate()?;
        minus.validate()?;
        let both = TailFunction::sum(&plus, &minus);
        let m = LevyMeasureSpec {
            gamma,
            sigma2,
            plus,
            minus,
            both,
        };
        // ∫ (x² ∧ 1) Π(dx) < ∞  ⟺  U(1) < ∞
        let u1 = m.u_fn(1.0)?;
        if !u1.is_finite() {
            return Err(LevyError::InvalidMeasure(format!("U(1) = {u1} is not finite")));
        }
        Ok(m)
    }

    /// Pure-jump measure with power-law tails `c₊x^(−α)` and `c₋x^(−α)`.
    pub fn stable(c_plus: f64, c_minus: f64, alpha: f64) -> Result<Self> {
        let side = |c: f64| {
            if c > 0.0 {
                TailFunction::power(c, alpha)
            } else {
                TailFunction::zero()
            }
        };
        Self::new(0.0, 0.0, side(c_plus), side(c_minus))
    }

    pub fn side_tail(&self, side: Side) -> &TailFunction {
        match side {
            Side::Plus => &self.plus,
            Side::Minus => &self.minus,
            Side::Both => &self.both,
        }
    }

    pub fn activity(&self) -> Activity {
        Activity {
            plus_infinite: self.plus.is_infinite_activity(),
            minus_infinite: self.minus.is_infinite_activity(),
        }
    }

    /// `Π̄⁺(x)`, `Π̄⁻(x)` or `Π̄(x)`. At `x = 0` the value `Π̄(0+)` is returned,
    /// which is `+∞` for infinite activity.
    pub fn tail(&self, side: Side, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(self.side_tail(side).total_mass());
        }
        check_positive("x", x)?;
        let v = self.side_tail(side).tail(x);
        if v.is_nan() {
            return Err(LevyError::Quadrature {
                a: 0.0,
                b: 1.0,
                detail: format!("tail evaluation failed at x = {x}"),
            });
        }
        Ok(v)
    }

    pub fn left_limit_tail(&self, side: Side, x: f64) -> Result<f64> {
        check_positive("x", x)?;
        Ok(self.side_tail(side).left_limit(x))
    }

    /// `ΔΠ̄(x) = Π̄(x−) − Π̄(x)`.
    pub fn atom_mass(&self, side: Side, x: f64) -> Result<f64> {
        check_positive("x", x)?;
        Ok(self.side_tail(side).atom_mass(x))
    }

    pub fn inverse_tail(&self, side: Side, v: f64) -> Result<f64> {
        check_positive("v", v)?;
        let tail = self.side_tail(side);
        let y = tail.inverse(v);
        if y.is_nan() {
            return Err(LevyError::Inversion(format!("no bracket found for level {v}")));
        }
        Ok(snap_to_float(tail, v, y))
    }

    /// `ν(x) = γ − ∫_{x<|y|≤1} y Π(dy)`.
    pub fn nu(&self, x: f64) -> Result<f64> {
        check_positive("x", x)?;
        if x >= 1.0 {
            return Ok(self.gamma);
        }
        Ok(self.gamma - (self.plus.first_moment(x, 1.0)? - self.minus.first_moment(x, 1.0)?))
    }

    /// `V(x) = σ² + ∫_{|y|≤x} y² Π(dy)`.
    pub fn v_fn(&self, x: f64) -> Result<f64> {
        check_positive("x", x)?;
        Ok(self.sigma2 + self.plus.second_moment(x)? + self.minus.second_moment(x)?)
    }

    /// `U(x) = V(x) + x² Π̄(x)`.
    pub fn u_fn(&self, x: f64) -> Result<f64> {
        Ok(self.v_fn(x)? + x * x * self.tail(Side::Both, x)?)
    }

    /// All atoms, tagged by side.
    pub fn atoms(&self) -> Vec<(Side, Atom)> {
        let mut out: Vec<(Side, Atom)> = self.plus.atom_list().into_iter().map(|a| (Side::Plus, a)).collect();
        out.extend(self.minus.atom_list().into_iter().map(|a| (Side::Minus, a)));
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MeasureDoc = serde_json::from_str(text)?;
        doc.build()
    }
}

/// JSON form of a tail family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyDoc {
    Power {
        c: f64,
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<f64>,
    },
    Zero,
    Sum {
        parts: Vec<FamilyDoc>,
    },
}

impl FamilyDoc {
    pub fn build(&self) -> TailFunction {
        match self {
            FamilyDoc::Power { c, alpha, cap: None } => TailFunction::power(*c, *alpha),
            FamilyDoc::Power {
                c,
                alpha,
                cap: Some(cap),
            } => TailFunction::capped(*c, *alpha, *cap),
            FamilyDoc::Zero => TailFunction::zero(),
            FamilyDoc::Sum { parts } => parts
                .iter()
                .map(|p| p.build())
                .fold(TailFunction::zero(), |acc, t| TailFunction::sum(&acc, &t)),
        }
    }
}

fn zero_family() -> FamilyDoc {
    FamilyDoc::Zero
}

/// JSON measure document:
/// `{"gamma":0,"sigma2":0,"plus":{"family":"power","c":1,"alpha":1.2},"minus":{...},"atoms_plus":[[1,2]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureDoc {
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub sigma2: f64,
    #[serde(default = "zero_family")]
    pub plus: FamilyDoc,
    #[serde(default = "zero_family")]
    pub minus: FamilyDoc,
    #[serde(default)]
    pub atoms_plus: Vec<[f64; 2]>,
    #[serde(default)]
    pub atoms_minus: Vec<[f64; 2]>,
}

impl MeasureDoc {
    pub fn build(&self) -> Result<LevyMeasureSpec> {
        let side = |fam: &FamilyDoc, atoms: &[[f64; 2]]| {
            let pairs: Vec<(f64, f64)> = atoms.iter().map(|a| (a[0], a[1])).collect();
            TailFunction::sum(&fam.build(), &TailFunction::atoms(&pairs))
        };
        for a in self.atoms_plus.iter().chain(self.atoms_minus.iter()) {
            if !(a[0] > 0.0 && a[1] > 0.0) {
                return Err(LevyError::InvalidMeasure(format!(
                    "atoms need positive location and mass, got {a:?}"
                )));
            }
        }
        LevyMeasureSpec::new(
            self.gamma,
            self.sigma2,
            side(&self.plus, &self.atoms_plus),
            side(&self.minus, &self.atoms_minus),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step() -> LevyMeasureSpec {
        LevyMeasureSpec::new(0.0, 0.0, TailFunction::atoms(&[(1.0, 2.0), (2.0, 1.0)]), TailFunction::zero()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn tail_examples() {
        let m = LevyMeasureSpec::new(0.0, 0.0, TailFunction::power(1.0, 1.0), TailFunction::zero()).unwrap();
        assert_eq!(m.tail(Side::Plus, 2.0).unwrap(), 0.5);
        let s = step();
        assert_eq!(s.tail(Side::Plus, 0.5).unwrap(), 3.0);
        assert_eq!(s.tail(Side::Plus, 1.0).unwrap(), 1.0);
        assert_eq!(s.tail(Side::Plus, 2.0).unwrap(), 0.0);
        let sym = LevyMeasureSpec::stable(1.0, 1.0, 0.5).unwrap();
        assert!(close(sym.tail(Side::Both, 4.0).unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn tail_domain_errors_and_zero() {
        let m = LevyMeasureSpec::stable(1.0, 1.0, 1.2).unwrap();
        assert!(matches!(m.tail(Side::Plus, -1.0), Err(LevyError::Domain(_))));
        assert!(m.tail(Side::Both, 0.0).unwrap().is_infinite());
        assert_eq!(step().tail(Side::Plus, 0.0).unwrap(), 3.0);
        assert!(m.inverse_tail(Side::Plus, 0.0).is_err());
        assert!(m.nu(0.0).is_err());
        assert!(m.v_fn(-2.0).is_err());
        assert!(m.atom_mass(Side::Plus, 0.0).is_err());
    }

    #[test]
    fn left_limit_examples() {
        let m = LevyMeasureSpec::stable(2.0, 1.0, 1.3).unwrap();
        assert_eq!(m.left_limit_tail(Side::Plus, 1.0).unwrap(), m.tail(Side::Plus, 1.0).unwrap());
        let s = step();
        assert_eq!(s.left_limit_tail(Side::Plus, 1.0).unwrap(), 3.0);
        assert_eq!(s.left_limit_tail(Side::Plus, 1.5).unwrap(), 1.0);
    }

    #[test]
    fn inverse_examples() {
        let m = LevyMeasureSpec::new(0.0, 0.0, TailFunction::power(1.0, 0.5), TailFunction::zero()).unwrap();
        assert!(close(m.inverse_tail(Side::Plus, 4.0).unwrap(), 0.0625, 1e-14));
        let s = step();
        assert_eq!(s.inverse_tail(Side::Plus, 1.5).unwrap(), 1.0);
        assert_eq!(s.inverse_tail(Side::Plus, 3.5).unwrap(), 0.0);
        assert_eq!(s.inverse_tail(Side::Plus, 0.5).unwrap(), 2.0);
        assert_eq!(s.inverse_tail(Side::Plus, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn composite_inverse_snaps_to_atoms() {
        let plus = TailFunction::sum(&TailFunction::capped(1.0, 1.2, 1.0), &TailFunction::atoms(&[(0.5, 2.0)]));
        let m = LevyMeasureSpec::new(0.0, 0.0, plus, TailFunction::zero()).unwrap();
        // tail just right of 0.5 is 0.5^{-1.2}; left limit adds 2
        let right = 0.5f64.powf(-1.2);
        let y = m.inverse_tail(Side::Plus, right + 1.0).unwrap();
        assert_eq!(y, 0.5);
        // beyond the cap the tail vanishes
        let y = m.inverse_tail(Side::Plus, 0.5).unwrap();
        assert_eq!(y, 1.0);
        assert_eq!(m.inverse_tail(Side::Plus, 3.0).unwrap(), 0.5);
        let y = m.inverse_tail(Side::Plus, 1.5).unwrap();
        let expect = 1.5f64.powf(-1.0 / 1.2);
        assert!(close(y, expect, 1e-11), "{y} vs {expect}");
    }

    #[test]
    fn nu_examples() {
        let sym = LevyMeasureSpec::new(0.7, 0.0, TailFunction::power(1.0, 1.5), TailFunction::power(1.0, 1.5)).unwrap();
        assert!(close(sym.nu(0.01).unwrap(), 0.7, 1e-12));
        let one = LevyMeasureSpec::new(0.0, 0.0, TailFunction::power(1.0, 0.5), TailFunction::zero()).unwrap();
        assert!(close(one.nu(0.25).unwrap(), -0.5, 1e-14));
        assert_eq!(one.nu(2.0).unwrap(), 0.0);
    }

    #[test]
    fn v_examples() {
        let m = LevyMeasureSpec::new(0.0, 0.0, TailFunction::power(1.0, 1.0), TailFunction::zero()).unwrap();
        assert!(close(m.v_fn(1.0).unwrap(), 1.0, 1e-14));
        let a = LevyMeasureSpec::new(0.0, 0.0, TailFunction::atoms(&[(1.0, 2.0)]), TailFunction::zero()).unwrap();
        assert_eq!(a.v_fn(0.5).unwrap(), 0.0);
        assert_eq!(a.v_fn(1.0).unwrap(), 2.0);
        let g = LevyMeasureSpec::new(0.0, 3.0, TailFunction::zero(), TailFunction::zero()).unwrap();
        assert_eq!(g.v_fn(0.3).unwrap(), 3.0);
        assert_eq!(g.u_fn(7.0).unwrap(), 3.0);
    }

    #[test]
    fn atom_mass_examples() {
        let m = LevyMeasureSpec::stable(1.0, 1.0, 1.2).unwrap();
        assert_eq!(m.atom_mass(Side::Plus, 0.3).unwrap(), 0.0);
        let s = step();
        assert_eq!(s.atom_mass(Side::Plus, 1.0).unwrap(), 2.0);
        assert_eq!(s.atom_mass(Side::Plus, 1.5).unwrap(), 0.0);
    }

    #[test]
    fn capped_carries_atom_at_cap() {
        let t = TailFunction::capped(2.0, 1.5, 0.5);
        let mass = 2.0 * 0.5f64.powf(-1.5);
        assert!(close(t.atom_mass(0.5), mass, 1e-15));
        assert_eq!(t.tail(0.5), 0.0);
        assert!(close(t.left_limit(0.5), mass, 1e-15));
        assert_eq!(t.inverse(0.1), 0.5);
    }

    #[test]
    fn restricted_tail_matches_definition() {
        let base = TailFunction::sum(&TailFunction::power(1.0, 1.2), &TailFunction::atoms(&[(0.4, 1.0), (0.9, 0.5)]));
        let r = TailFunction::restricted(base.clone(), 0.9);
        for &x in &[0.05, 0.3, 0.4, 0.6, 0.89] {
            let expect = base.tail(x) - base.left_limit(0.9);
            assert!(close(r.tail(x), expect, 1e-14));
        }
        assert_eq!(r.tail(0.95), 0.0);
        assert_eq!(r.atom_mass(0.9), 0.0);
        assert_eq!(r.atom_mass(0.4), 1.0);
        // moments exclude the atom sitting at the restriction level
        let m2 = r.second_moment(2.0).unwrap();
        let expect = base.second_moment(0.9).unwrap() - 0.81 * 0.5;
        assert!(close(m2, expect, 1e-13));
        let m1 = r.first_moment(0.1, 1.0).unwrap();
        let expect = base.first_moment(0.1, 0.9).unwrap() - 0.9 * 0.5;
        assert!(close(m1, expect, 1e-13));
        // inverse lands below the level
        let v = r.tail(0.5);
        assert!(close(r.inverse(v), 0.5, 1e-10));
    }

    #[test]
    fn power_law_regular_variation_is_exact() {
        let t = TailFunction::power(2.5, 1.3);
        for &(z, y) in &[(0.1, 2.0), (1e-5, 7.0), (3.0, 0.2)] {
            let ratio: f64 = t.tail(z) / t.tail(z * y);
            assert!(close(ratio, y.powf(1.3), 1e-13));
        }
    }

    #[test]
    fn json_round_trip_and_rejects_unknown() {
        let text = r#"{"gamma": 0.0, "sigma2": 0.0,
            "plus": {"family":"power","c":1.0,"alpha":1.2},
            "minus": {"family":"power","c":0.5,"alpha":1.2,"cap":1.0},
            "atoms_plus": [[1.0,2.0]]}"#;
        let m = LevyMeasureSpec::from_json(text).unwrap();
        assert!(close(m.tail(Side::Plus, 0.5).unwrap(), 0.5f64.powf(-1.2) + 2.0, 1e-14));
        assert_eq!(m.tail(Side::Minus, 1.5).unwrap(), 0.0);
        assert!(LevyMeasureSpec::from_json(r#"{"gamma":0,"plus":{"family":"power","c":1,"alpha":1.2},"bogus":1}"#).is_err());
        assert!(LevyMeasureSpec::from_json(r#"{"plus":{"family":"power","c":1,"alpha":1.2,"beta":3}}"#).is_err());
        assert!(LevyMeasureSpec::from_json(r#"{"plus":{"family":"power","c":1,"alpha":2.5}}"#).is_err());
        let doc: MeasureDoc = serde_json::from_str(text).unwrap();
        let again: MeasureDoc = serde_json::from_str(&serde_json::to_string(&doc).unwrap()).unwrap();
        assert_eq!(doc, again);
    }

    #[test]
    fn negative_sigma_rejected() {
        assert!(LevyMeasureSpec::new(0.0, -1.0, TailFunction::zero(), TailFunction::zero()).is_err());
    }
}
