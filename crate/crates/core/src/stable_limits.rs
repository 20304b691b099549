//! Stable and trimmed-stable limit laws, characteristic exponents of
//! infinitely divisible triplets, and the norming functions `(a_t, b_t)`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, LevyError, Result};
use crate::levy_measure::{LevyMeasureSpec, Side, TailFunction};
use crate::quad;
use crate::representation::{sample_trimmed_asym_rep, sample_trimmed_mod_rep};
use crate::rng::{exp1, open_unit};
use crate::trimmer::TrimMode;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Stable law with Lévy tails `Λ̄⁺(x) = c₊x^(−α)`, `Λ̄⁻(x) = c₋x^(−α)` and
/// zero drift under truncation at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub alpha: f64,
    pub c_plus: f64,
    pub c_minus: f64,
}

impl StableParams {
    pub fn new(alpha: f64, c_plus: f64, c_minus: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(LevyError::Domain(format!("alpha must lie in (0,2), got {alpha}")));
        }
        if !(c_plus >= 0.0 && c_minus >= 0.0 && c_plus + c_minus > 0.0 && (c_plus + c_minus).is_finite()) {
            return Err(LevyError::Domain(format!(
                "tail scales must be nonnegative and not both zero, got ({c_plus}, {c_minus})"
            )));
        }
        Ok(StableParams { alpha, c_plus, c_minus })
    }

    pub fn skewness(&self) -> f64 {
        (self.c_plus - self.c_minus) / (self.c_plus + self.c_minus)
    }

    /// Scale `σ` of the classical parameterization.
    pub fn scale(&self) -> f64 {
        let c = self.c_plus + self.c_minus;
        if self.is_cauchy_index() {
            c * FRAC_PI_2
        } else {
            let a = self.alpha;
            (libm::tgamma(1.0 - a) * (FRAC_PI_2 * a).cos() * c).powf(1.0 / a)
        }
    }

    /// Location `μ` of the classical parameterization; for `α < 1` and
    /// `c₋ = 0` the law is supported on `[μ, ∞)`.
    pub fn shift(&self) -> f64 {
        let d = self.c_plus - self.c_minus;
        if self.is_cauchy_index() {
            d * (1.0 - EULER_GAMMA)
        } else {
            d * self.alpha / (self.alpha - 1.0)
        }
    }

    fn is_cauchy_index(&self) -> bool {
        self.alpha == 1.0
    }

    pub fn measure(&self) -> Result<LevyMeasureSpec> {
        LevyMeasureSpec::stable(self.c_plus, self.c_minus, self.alpha)
    }

    /// Closed-form characteristic exponent.
    pub fn char_exponent(&self, theta: f64) -> Complex64 {
        if theta == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let (sigma, beta, mu) = (self.scale(), self.skewness(), self.shift());
        let at = theta.abs();
        let sg = theta.signum();
        if self.is_cauchy_index() {
            Complex64::new(-sigma * at, -sigma * beta * 2.0 / PI * sg * at.ln() * at + mu * theta)
        } else {
            let a = self.alpha;
            let s = (sigma * at).powf(a);
            Complex64::new(-s, s * beta * sg * (FRAC_PI_2 * a).tan() + mu * theta)
        }
    }
}

/// One draw from the stable law, by the uniform-exponential transformation.
pub fn sample_stable<R: Rng + ?Sized>(params: &StableParams, rng: &mut R) -> f64 {
    let v = PI * (open_unit(rng) - 0.5);
    let w = exp1(rng);
    let beta = params.skewness();
    let sigma = params.scale();
    if params.is_cauchy_index() {
        let b = FRAC_PI_2 + beta * v;
        let x = (b * v.tan() - beta * (FRAC_PI_2 * w * v.cos() / b).ln()) / FRAC_PI_2;
        sigma * x + 2.0 / PI * beta * sigma * sigma.ln() + params.shift()
    } else {
        let a = params.alpha;
        let zeta = beta * (FRAC_PI_2 * a).tan();
        let b = zeta.atan() / a;
        let s = (1.0 + zeta * zeta).powf(1.0 / (2.0 * a));
        let x = s * (a * (v + b)).sin() / v.cos().powf(1.0 / a) * ((v - a * (v + b)).cos() / w).powf((1.0 - a) / a);
        sigma * x + params.shift()
    }
}

/// Sampler for the trimmed-stable law `^{(r,s)}Z₁` (or its modulus
/// counterpart), via the trimming representation at `t = 1`.
pub struct TrimmedStableSampler {
    pub params: StableParams,
    pub mode: TrimMode,
    measure: LevyMeasureSpec,
    epsilon: f64,
}

impl TrimmedStableSampler {
    pub fn new(params: StableParams, mode: TrimMode, epsilon: f64) -> Result<Self> {
        check_positive("epsilon", epsilon)?;
        Ok(TrimmedStableSampler {
            params,
            mode,
            measure: params.measure()?,
            epsilon: epsilon.min(1.0),
        })
    }

    /// Cutoff chosen so that about `budget` jumps are simulated per draw.
    pub fn with_budget(params: StableParams, mode: TrimMode, budget: f64) -> Result<Self> {
        let measure = params.measure()?;
        let eps = crate::jump_sampler::default_cutoff(&measure, 1.0, budget)?;
        Self::new(params, mode, eps)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match self.mode {
            TrimMode::Modulus { r: 0 } => Ok(sample_stable(&self.params, rng)),
            TrimMode::Modulus { r } => Ok(sample_trimmed_mod_rep(&self.measure, 1.0, r, self.epsilon, rng)?.trimmed_value),
            other => {
                let (r, s) = other.counts();
                if r == 0 && s == 0 {
                    return Ok(sample_stable(&self.params, rng));
                }
                Ok(sample_trimmed_asym_rep(&self.measure, 1.0, r, s, self.epsilon, rng)?.trimmed_value)
            }
        }
    }
}

pub fn sample_trimmed_stable<R: Rng + ?Sized>(params: &StableParams, mode: TrimMode, epsilon: f64, rng: &mut R) -> Result<f64> {
    TrimmedStableSampler::new(*params, mode, epsilon)?.sample(rng)
}

/// Characteristic triplet `(β, τ², Λ)` with truncation at 1.
#[derive(Debug, Clone)]
pub struct IDTriplet {
    pub beta: f64,
    pub tau2: f64,
    pub lambda: LevyMeasureSpec,
}

impl IDTriplet {
    pub fn from_measure(m: &LevyMeasureSpec) -> Self {
        IDTriplet {
            beta: m.gamma,
            tau2: m.sigma2,
            lambda: m.clone(),
        }
    }
}

fn complex_integral<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, bp: &[f64]) -> Result<Complex64> {
    let re = quad::integrate(|x| f(x).re, a, b, bp)?;
    let im = quad::integrate(|x| f(x).im, a, b, bp)?;
    Ok(Complex64::new(re, im))
}

fn complex_integral_from_zero<F: Fn(f64) -> Complex64>(f: F, upper: f64, power: f64, bp: &[f64]) -> Result<Complex64> {
    let re = quad::integrate_from_zero(|x| f(x).re, upper, power, bp)?;
    let im = quad::integrate_from_zero(|x| f(x).im, upper, power, bp)?;
    Ok(Complex64::new(re, im))
}

/// `e^{iz} − 1 − iz` without cancellation for small `z`.
fn compensated_exp(z: f64) -> Complex64 {
    let half = (0.5 * z).sin();
    let re = -2.0 * half * half;
    let im = if z.abs() < 0.1 {
        let z2 = z * z;
        z * z2 * (-1.0 / 6.0 + z2 * (1.0 / 120.0 + z2 * (-1.0 / 5040.0 + z2 / 362_880.0)))
    } else {
        z.sin() - z
    };
    Complex64::new(re, im)
}

/// `∫_{(0,∞)} (e^{iθx} − 1 − iθx·1{x ≤ 1}) F(dx)` for a one-sided tail `F`.
fn one_sided_exponent(tail: &TailFunction, theta: f64) -> Result<Complex64> {
    use TailFunction::*;
    if theta == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    match tail {
        Composite(parts) => {
            let mut s = Complex64::new(0.0, 0.0);
            for p in parts {
                s += one_sided_exponent(p, theta)?;
            }
            Ok(s)
        }
        StepAtoms(atoms) => Ok(atoms
            .iter()
            .map(|a| {
                let x = a.location;
                let h = if x <= 1.0 {
                    compensated_exp(theta * x)
                } else {
                    Complex64::new((theta * x).cos() - 1.0, (theta * x).sin())
                };
                h * a.mass
            })
            .sum()),
        PowerLaw { c, alpha } => power_exponent(*c, *alpha, None, theta),
        PowerLawCapped { c, alpha, cap } => power_exponent(*c, *alpha, Some(*cap), theta),
        Restricted { .. } | Smoothed(_) => tail_based_exponent(tail, theta),
    }
}

fn power_exponent(c: f64, alpha: f64, cap: Option<f64>, theta: f64) -> Result<Complex64> {
    let density = |x: f64| alpha * c * x.powf(-alpha - 1.0);
    let upper = cap.unwrap_or(f64::INFINITY);
    let inner = upper.min(1.0);
    let p = 2.0 / (2.0 - alpha);
    let mut total = complex_integral_from_zero(|x| compensated_exp(theta * x) * density(x), inner, p, &[])?;
    match cap {
        Some(k) => {
            if k > 1.0 {
                total += complex_integral(
                    |x| Complex64::new((theta * x).cos() - 1.0, (theta * x).sin()) * density(x),
                    1.0,
                    k,
                    &[],
                )?;
            }
            let mass = c * k.powf(-alpha);
            let h = if k <= 1.0 {
                compensated_exp(theta * k)
            } else {
                Complex64::new((theta * k).cos() - 1.0, (theta * k).sin())
            };
            total += h * mass;
        }
        None => total += power_outer(c, alpha, theta)?,
    }
    Ok(total)
}

/// `∫_1^∞ (e^{iθx} − 1) αc x^(−α−1) dx` by rotating the contour to
/// `x = 1 + iy/θ`.
fn power_outer(c: f64, alpha: f64, theta: f64) -> Result<Complex64> {
    let at = theta.abs();
    let j = complex_integral(
        |y| Complex64::new(1.0, y / at).powf(-alpha - 1.0) * (-y).exp(),
        0.0,
        60.0,
        &[1.0, 5.0, 20.0],
    )?;
    let phase = Complex64::new(at.cos(), at.sin());
    let v = Complex64::new(0.0, alpha * c / at) * phase * j - c;
    Ok(if theta > 0.0 { v } else { v.conj() })
}

/// Integration by parts against the tail:
/// `∫_0^∞ h'(s) F(s) ds + iθ F(1)` with `h(x) = e^{iθx} − 1 − iθx·1{x ≤ 1}`.
fn tail_based_exponent(tail: &TailFunction, theta: f64) -> Result<Complex64> {
    let sup = tail.support_sup();
    if !sup.is_finite() {
        return Err(LevyError::Quadrature {
            a: 1.0,
            b: f64::INFINITY,
            detail: "tail-based exponent needs a bounded support".into(),
        });
    }
    let mut bp = tail.breakpoints();
    bp.push(1.0);
    let i_theta = Complex64::new(0.0, theta);
    let inner = sup.min(1.0);
    let mut total = complex_integral_from_zero(
        |s| i_theta * Complex64::new((theta * s).cos() - 1.0, (theta * s).sin()) * tail.tail(s),
        inner,
        4.0,
        &bp,
    )?;
    if sup > 1.0 {
        total += complex_integral(
            |s| i_theta * Complex64::new((theta * s).cos(), (theta * s).sin()) * tail.tail(s),
            1.0,
            sup,
            &bp,
        )?;
    }
    total += i_theta * tail.tail(1.0);
    Ok(total)
}

/// `Ψ(θ) = iθβ − τ²θ²/2 + ∫ (e^{iθx} − 1 − iθx·1{|x| ≤ 1}) Λ(dx)`.
pub fn char_exponent(triplet: &IDTriplet, theta: f64) -> Result<Complex64> {
    let mut psi = Complex64::new(-0.5 * triplet.tau2 * theta * theta, triplet.beta * theta);
    psi += one_sided_exponent(&triplet.lambda.plus, theta)?;
    psi += one_sided_exponent(&triplet.lambda.minus, -theta)?;
    Ok(psi)
}

/// Norming and centering at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norming {
    pub a_t: f64,
    pub b_t: f64,
}

/// `b_t = Π̄^←(1/t)`, `a_t = t·ν(b_t)`.
pub fn norming(measure: &LevyMeasureSpec, t: f64) -> Result<Norming> {
    check_positive("t", t)?;
    let b_t = measure.inverse_tail(Side::Both, 1.0 / t)?;
    if b_t <= 0.0 {
        return Err(LevyError::FiniteActivity(format!(
            "Π̄(0+) ≤ 1/t at t = {t}; the norming function is degenerate"
        )));
    }
    Ok(Norming {
        a_t: t * measure.nu(b_t)?,
        b_t,
    })
}
