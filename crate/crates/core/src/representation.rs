//! Distributional representations of trimmed processes.
//!
//! Given Gamma levels `v = Γ_r/t` and `u = Γ̃_s/t`, the `(r,s)`-trimmed value
//! is equal in law to a Lévy process with jumps restricted to the window
//! `(−Π̄⁻^←(u), Π̄⁺^←(v))`, plus Poisson corrections for jumps tied with the
//! boundary order statistics. The modulus case is analogous with a single
//! symmetric window `(−Π̄^←(v), Π̄^←(v))`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::error::{check_positive, LevyError, Result};
use crate::jump_sampler::{PathSample, PathSampler};
use crate::levy_measure::{LevyMeasureSpec, Side, TailFunction};
use crate::rng::gamma_int;

/// `P(N ≥ k)` for `N ~ Poisson(m)`, i.e. the regularized lower incomplete
/// gamma function `P(k, m)`.
pub fn poisson_at_least(k: usize, m: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if m <= 0.0 {
        return 0.0;
    }
    if m.is_infinite() {
        return 1.0;
    }
    if m < k as f64 + 1.0 {
        // e^{−m} Σ_{j≥k} m^j / j!
        let mut term = (-m).exp();
        for j in 1..=k {
            term *= m / j as f64;
        }
        let mut sum = 0.0;
        let mut j = k;
        while term > 1e-18 * sum || sum == 0.0 {
            sum += term;
            j += 1;
            term *= m / j as f64;
            if term == 0.0 {
                break;
            }
        }
        sum
    } else {
        let mut term = (-m).exp();
        let mut sum = term;
        for j in 1..k {
            term *= m / j as f64;
            sum += term;
        }
        (1.0 - sum).max(0.0)
    }
}

/// `P(ΔX_t^{(r+1)} > y) = P(Γ_{r+1} ≤ t·Π̄(y))` on the given side.
pub fn order_statistic_cdf(measure: &LevyMeasureSpec, t: f64, r: usize, side: Side, y: f64) -> Result<f64> {
    check_positive("t", t)?;
    let m = t * measure.tail(side, y)?;
    Ok(poisson_at_least(r + 1, m))
}

/// `ρ(w) = Π̄(Π̄^←(w)−) − w` for a one-sided tail.
pub fn rho(measure: &LevyMeasureSpec, side: Side, w: f64) -> Result<f64> {
    check_positive("w", w)?;
    let tail = measure.side_tail(side);
    let y = measure.inverse_tail(side, w)?;
    if y <= 0.0 || tail.atom_mass(y) == 0.0 {
        return Ok(0.0);
    }
    Ok((tail.left_limit(y) - w).max(0.0))
}

/// `κ^±(v)`: the share of the modulus overshoot at `Π̄^←(v)` carried by the
/// atom of the given sign.
pub fn kappa(measure: &LevyMeasureSpec, sign: Side, v: f64) -> Result<f64> {
    check_positive("v", v)?;
    let y = measure.inverse_tail(Side::Both, v)?;
    if y <= 0.0 {
        return Ok(0.0);
    }
    let total_atom = measure.plus.atom_mass(y) + measure.minus.atom_mass(y);
    if total_atom == 0.0 {
        return Ok(0.0);
    }
    let own = match sign {
        Side::Plus => measure.plus.atom_mass(y),
        Side::Minus => measure.minus.atom_mass(y),
        Side::Both => return Err(LevyError::Domain("kappa takes a signed side".into())),
    };
    let overshoot = (measure.side_tail(Side::Both).left_limit(y) - v).max(0.0);
    Ok(overshoot * own / total_atom)
}

/// Tie-correction parameters at one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TieParams {
    pub side: Side,
    pub level: f64,
    pub rho: f64,
    pub kappa_plus: f64,
    pub kappa_minus: f64,
    pub jump_location: f64,
}

impl TieParams {
    pub fn compute(measure: &LevyMeasureSpec, side: Side, level: f64) -> Result<Self> {
        let jump_location = measure.inverse_tail(side, level)?;
        let (rho, kappa_plus, kappa_minus) = match side {
            Side::Both => (0.0, kappa(measure, Side::Plus, level)?, kappa(measure, Side::Minus, level)?),
            s => (rho(measure, s, level)?, 0.0, 0.0),
        };
        Ok(TieParams {
            side,
            level,
            rho,
            kappa_plus,
            kappa_minus,
            jump_location,
        })
    }
}

fn poisson_draw<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Poisson::new(mean).map(|p| p.sample(rng)).unwrap_or(0.0)
}

/// `G = Π̄^←(w) · Y_{tρ(w)}` with `Y` a unit-rate Poisson process.
pub fn sample_tie_g<R: Rng + ?Sized>(measure: &LevyMeasureSpec, side: Side, t: f64, w: f64, rng: &mut R) -> Result<f64> {
    check_positive("t", t)?;
    let r = rho(measure, side, w)?;
    if r == 0.0 {
        return Ok(0.0);
    }
    let loc = measure.inverse_tail(side, w)?;
    Ok(loc * poisson_draw(t * r, rng))
}

/// Triplet of the process with jumps restricted to an open window around 0.
#[derive(Debug, Clone)]
pub struct TruncatedTriplet {
    pub beta: f64,
    pub tau2: f64,
    /// Restricted measure; its `gamma` equals `beta`.
    pub lambda_spec: LevyMeasureSpec,
    /// Gamma value of the negative side (0 = untrimmed).
    pub u: f64,
    /// Gamma value of the positive side (0 = untrimmed).
    pub v: f64,
    pub t: f64,
    /// Window `(−lower, upper)`.
    pub lower: f64,
    pub upper: f64,
}

/// `∫_{[a,1]} x Π(dx)` on one side, zero when `a > 1`.
fn closed_first_moment(tail: &TailFunction, a: f64) -> Result<f64> {
    if a > 1.0 {
        return Ok(0.0);
    }
    Ok(tail.first_moment(a, 1.0)? + a * tail.atom_mass(a))
}

fn restrict(tail: &TailFunction, upper: f64) -> TailFunction {
    if upper.is_infinite() {
        tail.clone()
    } else {
        TailFunction::restricted(tail.clone(), upper)
    }
}

fn level_location(measure: &LevyMeasureSpec, side: Side, level: f64) -> Result<f64> {
    if level <= 0.0 {
        return Ok(f64::INFINITY);
    }
    measure.inverse_tail(side, level)
}

/// Triplet of `X_t^{u/t, v/t}`: positive jumps below `Π̄⁺^←(v/t)`, negative
/// jumps above `−Π̄⁻^←(u/t)`. A zero `u` or `v` leaves that side untouched.
pub fn truncated_triplet(measure: &LevyMeasureSpec, t: f64, u: f64, v: f64) -> Result<TruncatedTriplet> {
    check_positive("t", t)?;
    if u < 0.0 || v < 0.0 {
        return Err(LevyError::Domain(format!("levels must be nonnegative, got u={u}, v={v}")));
    }
    let upper = level_location(measure, Side::Plus, v / t)?;
    let lower = level_location(measure, Side::Minus, u / t)?;
    let beta = measure.gamma - closed_first_moment(&measure.plus, upper)? + closed_first_moment(&measure.minus, lower)?;
    let lambda_spec = LevyMeasureSpec::new(beta, measure.sigma2, restrict(&measure.plus, upper), restrict(&measure.minus, lower))?;
    Ok(TruncatedTriplet {
        beta,
        tau2: measure.sigma2,
        lambda_spec,
        u,
        v,
        t,
        lower,
        upper,
    })
}

/// Triplet of the modulus-truncated process: jumps with `|x| < w`.
pub fn modulus_triplet(measure: &LevyMeasureSpec, w: f64) -> Result<LevyMeasureSpec> {
    let beta = measure.gamma - closed_first_moment(&measure.plus, w)? + closed_first_moment(&measure.minus, w)?;
    LevyMeasureSpec::new(beta, measure.sigma2, restrict(&measure.plus, w), restrict(&measure.minus, w))
}

/// One draw of the time-`t` value of the truncated process, with jumps
/// below `epsilon` replaced by their Gaussian surrogate.
pub fn sample_truncated_id<R: Rng + ?Sized>(triplet: &TruncatedTriplet, epsilon: f64, rng: &mut R) -> Result<f64> {
    Ok(PathSampler::new(&triplet.lambda_spec, triplet.t, epsilon)?.sample(rng).value)
}

/// Output of the asymmetric representation sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymRepDraw {
    pub trimmed_value: f64,
    /// `Π̄⁺^←(Γ_r/t)`; `None` when `r = 0`.
    pub r_th_pos_jump: Option<f64>,
    /// `Π̄⁻^←(Γ̃_s/t)`; `None` when `s = 0`.
    pub s_th_neg_jump: Option<f64>,
}

/// Output of the modulus representation sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModRepDraw {
    pub trimmed_value: f64,
    pub r_th_modulus: f64,
}

fn require_infinite(measure: &LevyMeasureSpec, side: Side) -> Result<()> {
    if measure.side_tail(side).is_infinite_activity() {
        Ok(())
    } else {
        Err(LevyError::FiniteActivity(format!(
            "the {side:?} side has finite activity; the representation needs infinitely many jumps"
        )))
    }
}

/// `(X_t^{u,v} + G_t^{+,v} − G_t^{−,u}, Π̄⁺^←(v), Π̄⁻^←(u))` at
/// `v = Γ_r/t`, `u = Γ̃_s/t`. With `r = s = 0` this is a plain path draw.
pub fn sample_trimmed_asym_rep<R: Rng + ?Sized>(
    measure: &LevyMeasureSpec,
    t: f64,
    r: usize,
    s: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<AsymRepDraw> {
    check_positive("t", t)?;
    if r == 0 && s == 0 {
        let p: PathSample = PathSampler::new(measure, t, epsilon)?.sample(rng);
        return Ok(AsymRepDraw {
            trimmed_value: p.value,
            r_th_pos_jump: None,
            s_th_neg_jump: None,
        });
    }
    if r > 0 {
        require_infinite(measure, Side::Plus)?;
    }
    if s > 0 {
        require_infinite(measure, Side::Minus)?;
    }
    let v = if r > 0 { gamma_int(rng, r) } else { 0.0 };
    let u = if s > 0 { gamma_int(rng, s) } else { 0.0 };
    let triplet = truncated_triplet(measure, t, u, v)?;
    let mut value = sample_truncated_id(&triplet, epsilon, rng)?;
    if r > 0 {
        value += sample_tie_g(measure, Side::Plus, t, v / t, rng)?;
    }
    if s > 0 {
        value -= sample_tie_g(measure, Side::Minus, t, u / t, rng)?;
    }
    Ok(AsymRepDraw {
        trimmed_value: value,
        r_th_pos_jump: (r > 0).then_some(triplet.upper),
        s_th_neg_jump: (s > 0).then_some(triplet.lower),
    })
}

/// `(X̃_t^v + G̃_t^v, Π̄^←(v))` at `v = Γ_r/t`, where
/// `G̃ = Π̄^←(v)·(Y⁺_{tκ⁺(v)} − Y⁻_{tκ⁻(v)})`.
pub fn sample_trimmed_mod_rep<R: Rng + ?Sized>(
    measure: &LevyMeasureSpec,
    t: f64,
    r: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<ModRepDraw> {
    check_positive("t", t)?;
    if r == 0 {
        return Err(LevyError::Domain("modulus representation needs r ≥ 1".into()));
    }
    require_infinite(measure, Side::Both)?;
    let level = gamma_int(rng, r) / t;
    let w = measure.inverse_tail(Side::Both, level)?;
    let truncated = modulus_triplet(measure, w)?;
    let mut value = PathSampler::new(&truncated, t, epsilon)?.sample(rng).value;
    let kp = kappa(measure, Side::Plus, level)?;
    let km = kappa(measure, Side::Minus, level)?;
    if kp > 0.0 || km > 0.0 {
        value += w * (poisson_draw(t * kp, rng) - poisson_draw(t * km, rng));
    }
    Ok(ModRepDraw {
        trimmed_value: value,
        r_th_modulus: w,
    })
}
