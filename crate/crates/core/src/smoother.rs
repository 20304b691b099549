//! Removal of atoms by randomized quadratic inflation of jumps.
//!
//! Every jump `Δ` is replaced by `Δ + sign(Δ)·U·Δ²` with an independent
//! `U ~ Uniform(0,1)` mark. The resulting measure has continuous tails
//!
//! `Π̄*(x) = ∫₀¹ Π̄((√(1+4ux) − 1)/(2u)) du`
//!
//! on each side, and the perturbation of a path is bounded by its quadratic
//! variation.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rand::Rng;
use serde::Serialize;

use crate::error::{check_positive, Result};
use crate::jump_sampler::{JumpRecord, PathSample};
use crate::levy_measure::{Atom, LevyMeasureSpec, Side, TailFunction};
use crate::quad;
use crate::rng::open_unit;

const CACHE_LIMIT: usize = 1 << 16;

/// Smoothed tail of one side of a base measure, with memoized evaluations.
#[derive(Debug)]
pub struct SmoothedTail {
    base: TailFunction,
    cache: RwLock<HashMap<u64, f64>>,
}

/// Preimage `y` of `x` under `y ↦ y + u·y²`, in a form stable at `u → 0`.
#[inline]
fn preimage(u: f64, x: f64) -> f64 {
    2.0 * x / ((1.0 + 4.0 * u * x).sqrt() + 1.0)
}

impl SmoothedTail {
    pub fn new(base: TailFunction) -> Self {
        SmoothedTail {
            base,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn base(&self) -> &TailFunction {
        &self.base
    }

    pub fn tail(&self, x: f64) -> Result<f64> {
        check_positive("x", x)?;
        let key = x.to_bits();
        if let Some(v) = self.cache.read().ok().and_then(|c| c.get(&key).copied()) {
            return Ok(v);
        }
        let v = self.compute(x)?;
        if let Ok(mut c) = self.cache.write() {
            if c.len() >= CACHE_LIMIT {
                c.clear();
            }
            c.insert(key, v);
        }
        Ok(v)
    }

    fn compute(&self, x: f64) -> Result<f64> {
        // the integrand steps where a base atom a is mapped onto x
        let bp: Vec<f64> = self
            .base
            .atom_list()
            .iter()
            .map(|a| (x - a.location) / (a.location * a.location))
            .filter(|&u| u > 0.0 && u < 1.0)
            .collect();
        quad::integrate(|u| self.base.tail(preimage(u, x)), 0.0, 1.0, &bp)
    }

    pub fn base_total_mass(&self) -> f64 {
        self.base.total_mass()
    }

    pub fn support_sup(&self) -> f64 {
        let s = self.base.support_sup();
        s + s * s
    }

    /// Points where the smoothed tail has kinks: each base atom `a` and `a + a²`.
    pub fn discontinuity_hints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .base
            .atom_list()
            .iter()
            .flat_map(|a| [a.location, a.location + a.location * a.location])
            .collect();
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup();
        out
    }
}

/// `Π̄*,±(x)` of the smoothed version of `base`.
pub fn smooth_tail(base: &LevyMeasureSpec, side: Side, x: f64) -> Result<f64> {
    match side {
        Side::Both => Ok(smooth_tail(base, Side::Plus, x)? + smooth_tail(base, Side::Minus, x)?),
        s => SmoothedTail::new(base.side_tail(s).clone()).tail(x),
    }
}

fn smooth_side(tail: &TailFunction) -> TailFunction {
    if tail.components().is_empty() {
        TailFunction::zero()
    } else {
        TailFunction::Smoothed(Arc::new(SmoothedTail::new(tail.clone())))
    }
}

/// Drift change of one side: `∫₀¹ ∫ [T_u(x)·1{T_u(x) ≤ 1} − x·1{x ≤ 1}] Π(dx) du`
/// with `T_u(x) = x + u·x²`.
fn drift_shift(tail: &TailFunction) -> Result<f64> {
    if tail.components().is_empty() {
        return Ok(0.0);
    }
    let mut failure = None;
    let value = quad::integrate(
        |u| {
            let g = preimage(u, 1.0);
            let inflated = tail.second_moment(g).map(|m| u * m);
            let leaving = tail.first_moment(g, 1.0);
            match (inflated, leaving) {
                (Ok(a), Ok(b)) => a - b,
                (Err(e), _) | (_, Err(e)) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        0.0,
        1.0,
        &tail.atom_list().iter().map(|a| (1.0 - a.location) / (a.location * a.location)).collect::<Vec<_>>(),
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// The triplet of the smoothed process `X* = X + Y`.
pub fn smoothed_measure(base: &LevyMeasureSpec) -> Result<LevyMeasureSpec> {
    let gamma = base.gamma + drift_shift(&base.plus)? - drift_shift(&base.minus)?;
    LevyMeasureSpec::new(gamma, base.sigma2, smooth_side(&base.plus), smooth_side(&base.minus))
}

/// Inflate every recorded jump by `sign(Δ)·u·Δ²`, `u ~ Uniform(0,1)`.
pub fn smooth_path<R: Rng + ?Sized>(path: &PathSample, rng: &mut R) -> PathSample {
    let mut shift = 0.0;
    let jumps: Vec<JumpRecord> = path
        .jumps
        .iter()
        .map(|j| {
            let inc = j.size.signum() * open_unit(rng) * j.size * j.size;
            shift += inc;
            JumpRecord {
                time: j.time,
                size: j.size + inc,
            }
        })
        .collect();
    PathSample {
        jumps,
        value: path.value + shift,
        ..path.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffuseReport {
    pub diffuse: bool,
    pub atoms: Vec<(Side, Atom)>,
    /// Locations where a smoothed tail was found to jump.
    pub discontinuities: Vec<f64>,
}

/// Whether the measure has no atoms; atoms and detected jumps are listed.
pub fn is_diffuse(measure: &LevyMeasureSpec) -> DiffuseReport {
    let atoms = measure.atoms();
    let mut discontinuities = Vec::new();
    for tail in [&measure.plus, &measure.minus] {
        for c in tail.components() {
            if let TailFunction::Smoothed(s) = &c {
                for x in s.discontinuity_hints() {
                    let d = 1e-9 * x;
                    let (lo, hi) = (s.tail(x - d), s.tail(x + d));
                    match (lo, hi) {
                        (Ok(lo), Ok(hi)) if (lo - hi).abs() <= 1e-6 * (1.0 + lo.abs()) => {}
                        _ => discontinuities.push(x),
                    }
                }
            }
        }
    }
    DiffuseReport {
        diffuse: atoms.is_empty() && discontinuities.is_empty(),
        atoms,
        discontinuities,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jump_sampler::quadratic_variation;
    use crate::rng::stream;

    fn unit_atom() -> LevyMeasureSpec {
        LevyMeasureSpec::new(0.0, 0.0, TailFunction::atoms(&[(1.0, 1.0)]), TailFunction::zero()).unwrap()
    }

    #[test]
    fn unit_atom_piecewise_form() {
        let m = unit_atom();
        for &(x, expect) in &[(0.5, 1.0), (1.0, 1.0), (1.25, 0.75), (1.9, 0.1), (2.0, 0.0), (3.0, 0.0)] {
            let v = smooth_tail(&m, Side::Plus, x).unwrap();
            assert!((v - expect).abs() < 1e-9, "x={x}: {v}");
        }
    }

    #[test]
    fn atom_is_removed() {
        let m = unit_atom();
        let d = 1e-4;
        let lo = smooth_tail(&m, Side::Plus, 1.0 - d).unwrap();
        let hi = smooth_tail(&m, Side::Plus, 1.0 + d).unwrap();
        assert!((lo - hi).abs() < 1e-3);
        let s = smoothed_measure(&m).unwrap();
        assert!(is_diffuse(&s).diffuse);
        let r = is_diffuse(&m);
        assert!(!r.diffuse);
        assert_eq!(r.atoms, vec![(Side::Plus, Atom::new(1.0, 1.0))]);
        assert!(is_diffuse(&LevyMeasureSpec::stable(1.0, 1.0, 1.2).unwrap()).diffuse);
    }

    #[test]
    fn diffuse_base_bounds_and_blowup() {
        let m = LevyMeasureSpec::stable(1.0, 0.0, 1.2).unwrap();
        for &x in &[0.01, 0.3, 2.0] {
            let v = smooth_tail(&m, Side::Plus, x).unwrap();
            // preimages lie between the u = 1 transform point and x
            assert!(v >= m.tail(Side::Plus, x).unwrap());
            assert!(v <= m.tail(Side::Plus, preimage(1.0, x)).unwrap());
        }
        assert!(smooth_tail(&m, Side::Plus, 1e-8).unwrap() > 1e9);
    }

    #[test]
    fn smoothed_drift_for_single_atom() {
        // atom at 0.5 with mass 2: T_u(0.5) = 0.5 + 0.25u ≤ 1, so the shift is 2·0.25·E[u]
        let m = LevyMeasureSpec::new(0.1, 0.0, TailFunction::atoms(&[(0.5, 2.0)]), TailFunction::zero()).unwrap();
        let s = smoothed_measure(&m).unwrap();
        assert!((s.gamma - (0.1 + 0.25)).abs() < 1e-9, "{}", s.gamma);
        // atom at 0.9: T_u(0.9) > 1 once u > 0.1/0.81
        let m = LevyMeasureSpec::new(0.0, 0.0, TailFunction::atoms(&[(0.9, 1.0)]), TailFunction::zero()).unwrap();
        let s = smoothed_measure(&m).unwrap();
        let ustar = 0.1 / 0.81;
        let expect = 0.81 * ustar * ustar / 2.0 - 0.9 * (1.0 - ustar);
        assert!((s.gamma - expect).abs() < 1e-9, "{} vs {expect}", s.gamma);
    }

    #[test]
    fn path_smoothing_bounds() {
        let m = LevyMeasureSpec::new(0.0, 0.0, TailFunction::sum(&TailFunction::capped(0.5, 1.2, 1.0), &TailFunction::atoms(&[(0.2, 1.0)])), TailFunction::capped(0.5, 1.2, 1.0)).unwrap();
        let mut rng = stream(8, 0, 0);
        for _ in 0..200 {
            let p = crate::jump_sampler::sample_path(&m, 0.5, 0.01, &mut rng).unwrap();
            let s = smooth_path(&p, &mut rng);
            assert_eq!(s.small_component, p.small_component);
            for (a, b) in p.jumps.iter().zip(&s.jumps) {
                assert_eq!(a.size.signum(), b.size.signum());
                let grow = b.size.abs() - a.size.abs();
                assert!(grow >= 0.0 && grow <= a.size * a.size);
            }
            assert!((s.value - p.value).abs() <= quadratic_variation(&p));
        }
    }
}
