//! Simulation of the jump structure of a Lévy process on `(0, t]`.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::Serialize;

use crate::error::{check_positive, LevyError, Result};
use crate::levy_measure::{LevyMeasureSpec, Side, TailFunction};
use crate::rng::{exp1, open_unit};

/// Expected number of recorded jumps per path used when no cutoff is given.
pub const DEFAULT_JUMP_BUDGET: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpRecord {
    pub time: f64,
    pub size: f64,
}

/// Terminal value of one path together with its above-cutoff jumps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSample {
    pub t: f64,
    pub epsilon: f64,
    pub jumps: Vec<JumpRecord>,
    pub small_component: f64,
    pub drift_component: f64,
    pub gaussian_component: f64,
    pub value: f64,
    /// `t·(V(ε) − σ²)`, the variance substituted for the sub-cutoff jumps.
    pub small_variance: f64,
}

impl PathSample {
    pub fn jump_sum(&self) -> f64 {
        self.jumps.iter().map(|j| j.size).sum()
    }
}

/// `(Π̄^←(Γ₁/t), …, Π̄^←(Γ_k/t))` from the given cumulative levels.
pub fn ordered_jumps_from_levels(measure: &LevyMeasureSpec, t: f64, side: Side, gammas: &[f64]) -> Result<Vec<f64>> {
    check_positive("t", t)?;
    let tail = measure.side_tail(side);
    let total = tail.total_mass();
    let mut out = Vec::with_capacity(gammas.len());
    for (j, &g) in gammas.iter().enumerate() {
        let level = g / t;
        if level >= total {
            return Err(LevyError::FiniteActivity(format!(
                "the {side:?} side has total mass {total}; only {j} jumps occurred, use sample_path instead"
            )));
        }
        out.push(measure.inverse_tail(side, level)?);
    }
    Ok(out)
}

/// The `k` largest jump magnitudes on the given side (`Side::Both` = modulus),
/// via `Π̄^←(Γ_j/t)` with `Γ_j` a sum of `j` unit exponentials.
pub fn sample_ordered_jumps<R: Rng + ?Sized>(
    measure: &LevyMeasureSpec,
    t: f64,
    k: usize,
    side: Side,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_positive("t", t)?;
    if k == 0 {
        return Err(LevyError::Domain("k must be at least 1".into()));
    }
    let mut g = 0.0;
    let gammas: Vec<f64> = (0..k)
        .map(|_| {
            g += exp1(rng);
            g
        })
        .collect();
    ordered_jumps_from_levels(measure, t, side, &gammas)
}

/// Smallest `ε ≤ 1` with `t·Π̄(ε) ≤ budget`.
pub fn default_cutoff(measure: &LevyMeasureSpec, t: f64, budget: f64) -> Result<f64> {
    check_positive("t", t)?;
    check_positive("budget", budget)?;
    let eps = measure.inverse_tail(Side::Both, budget / t)?;
    if eps <= 0.0 {
        // finite activity within budget: every jump can be recorded
        return Ok(f64::MIN_POSITIVE.sqrt());
    }
    Ok(eps.min(1.0))
}

struct Component {
    sign: f64,
    tail: TailFunction,
    mass: f64,
    count: Option<Poisson<f64>>,
}

/// Precomputed path sampler for a fixed `(measure, t, ε)`.
pub struct PathSampler {
    t: f64,
    epsilon: f64,
    components: Vec<Component>,
    drift: f64,
    small_variance: f64,
    sigma_sqrt_t: f64,
}

impl PathSampler {
    pub fn new(measure: &LevyMeasureSpec, t: f64, epsilon: f64) -> Result<Self> {
        check_positive("t", t)?;
        check_positive("epsilon", epsilon)?;
        if epsilon > 1.0 {
            return Err(LevyError::Domain(format!("epsilon must not exceed 1, got {epsilon}")));
        }
        let mut components = Vec::new();
        for (sign, side) in [(1.0, &measure.plus), (-1.0, &measure.minus)] {
            for tail in side.components() {
                let mass = tail.tail(epsilon);
                if !mass.is_finite() {
                    return Err(LevyError::Quadrature {
                        a: epsilon,
                        b: f64::INFINITY,
                        detail: "tail mass above the cutoff is not finite".into(),
                    });
                }
                let count = if mass > 0.0 {
                    Some(Poisson::new(t * mass).map_err(|e| LevyError::Domain(e.to_string()))?)
                } else {
                    None
                };
                components.push(Component {
                    sign,
                    tail,
                    mass,
                    count,
                });
            }
        }
        let nu = measure.nu(epsilon)?;
        let small_variance = t * (measure.v_fn(epsilon)? - measure.sigma2);
        Ok(PathSampler {
            t,
            epsilon,
            components,
            drift: t * nu,
            small_variance: small_variance.max(0.0),
            sigma_sqrt_t: (measure.sigma2 * t).sqrt(),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn expected_jumps(&self) -> f64 {
        self.t * self.components.iter().map(|c| c.mass).sum::<f64>()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PathSample {
        let mut jumps = Vec::new();
        for c in &self.components {
            let Some(count) = &c.count else { continue };
            let n = count.sample(rng) as usize;
            jumps.reserve(n);
            for _ in 0..n {
                let level = open_unit(rng) * c.mass;
                let size = c.sign * c.tail.inverse(level);
                let time = (1.0 - open_unit(rng)) * self.t;
                jumps.push(JumpRecord { time, size });
            }
        }
        let small = if self.small_variance > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            z * self.small_variance.sqrt()
        } else {
            0.0
        };
        let gaussian = if self.sigma_sqrt_t > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            z * self.sigma_sqrt_t
        } else {
            0.0
        };
        let jump_total: f64 = jumps.iter().map(|j| j.size).sum();
        PathSample {
            t: self.t,
            epsilon: self.epsilon,
            jumps,
            small_component: small,
            drift_component: self.drift,
            gaussian_component: gaussian,
            value: self.drift + gaussian + small + jump_total,
            small_variance: self.small_variance,
        }
    }
}

/// One path on `(0, t]` with jumps above `epsilon` recorded individually.
pub fn sample_path<R: Rng + ?Sized>(measure: &LevyMeasureSpec, t: f64, epsilon: f64, rng: &mut R) -> Result<PathSample> {
    Ok(PathSampler::new(measure, t, epsilon)?.sample(rng))
}

/// Recorded squared jumps plus the sub-cutoff variance.
pub fn quadratic_variation(path: &PathSample) -> f64 {
    path.jumps.iter().map(|j| j.size * j.size).sum::<f64>() + path.small_variance
}

/// Write the jump list as CSV with columns `time,size`.
pub fn write_jumps_csv<W: Write>(path: &PathSample, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for j in &path.jumps {
        w.serialize(j)?;
    }
    w.flush()?;
    Ok(())
}
