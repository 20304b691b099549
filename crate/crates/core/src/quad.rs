//! Adaptive Simpson quadrature with mandatory breakpoints.
//!
//! The integrands met in this crate are monotone or smooth except at known
//! points (atom locations and their preimages), which callers pass as
//! breakpoints. Panels are refined until the Richardson error estimate falls
//! below a share of the global tolerance proportional to the panel width.

use crate::error::{LevyError, Result};

#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Cap on the total number of panel bisections.
    pub max_subdivisions: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_subdivisions: 1_000_000,
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Integrate `f` over `[a, b]` with the default tolerances.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, breakpoints: &[f64]) -> Result<f64> {
    integrate_with(f, a, b, breakpoints, &QuadConfig::default())
}

pub fn integrate_with<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    cfg: &QuadConfig,
) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(LevyError::Domain(format!("integration bounds must be finite: [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return integrate_with(f, b, a, breakpoints, cfg).map(|v| -v);
    }

    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&p| p > a && p < b && p.is_finite())
        .collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();
    let mut nodes = Vec::with_capacity(cuts.len() + 2);
    nodes.push(a);
    nodes.extend(cuts);
    nodes.push(b);

    let mut eval = |x: f64| -> Result<f64> {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(LevyError::Quadrature {
                a,
                b,
                detail: format!("integrand is not finite at {x}"),
            })
        }
    };

    // four initial panels per piece
    let mut stack = Vec::new();
    for w in nodes.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let h = (hi - lo) / 4.0;
        for k in 0..4 {
            let pa = lo + h * k as f64;
            let pb = if k == 3 { hi } else { lo + h * (k + 1) as f64 };
            let pm = 0.5 * (pa + pb);
            let (fa, fm, fb) = (eval(pa)?, eval(pm)?, eval(pb)?);
            stack.push(Panel {
                a: pa,
                b: pb,
                fa,
                fm,
                fb,
                whole: simpson(pa, pb, fa, fm, fb),
            });
        }
    }

    let rough: f64 = stack.iter().map(|p| p.whole).sum();
    let tol = cfg.abs_tol.max(cfg.rel_tol * rough.abs());
    let width = b - a;

    let mut total = 0.0;
    let mut compensation = 0.0;
    let mut splits = 0usize;
    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let lm = 0.5 * (p.a + m);
        let rm = 0.5 * (m + p.b);
        let (flm, frm) = (eval(lm)?, eval(rm)?);
        let left = simpson(p.a, m, p.fa, flm, p.fm);
        let right = simpson(m, p.b, p.fm, frm, p.fb);
        let diff = left + right - p.whole;
        let local_tol = tol * (p.b - p.a) / width;
        let tiny = (p.b - p.a) <= 1e-13 * (1.0 + p.a.abs().max(p.b.abs()));
        if diff.abs() <= 15.0 * local_tol || tiny {
            // Kahan summation of accepted panels
            let term = left + right + diff / 15.0 - compensation;
            let next = total + term;
            compensation = (next - total) - term;
            total = next;
            continue;
        }
        splits += 1;
        if splits > cfg.max_subdivisions {
            return Err(LevyError::Quadrature {
                a,
                b,
                detail: format!("subdivision cap {} reached", cfg.max_subdivisions),
            });
        }
        stack.push(Panel {
            a: p.a,
            b: m,
            fa: p.fa,
            fm: flm,
            fb: p.fm,
            whole: left,
        });
        stack.push(Panel {
            a: m,
            b: p.b,
            fa: p.fm,
            fm: frm,
            fb: p.fb,
            whole: right,
        });
    }
    Ok(total)
}

/// `∫_0^L f(x) dx` for integrands with an integrable power singularity at 0,
/// computed through the substitution `x = L·w^p`.
pub fn integrate_from_zero<F: FnMut(f64) -> f64>(mut f: F, upper: f64, power: f64, breakpoints: &[f64]) -> Result<f64> {
    if upper <= 0.0 {
        return Ok(0.0);
    }
    let mapped: Vec<f64> = breakpoints
        .iter()
        .filter(|&&x| x > 0.0 && x < upper)
        .map(|&x| (x / upper).powf(1.0 / power))
        .collect();
    integrate(
        |w| {
            if w <= 0.0 {
                return 0.0;
            }
            let x = upper * w.powf(power);
            let v = f(x) * upper * power * w.powf(power - 1.0);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        &mapped,
    )
}
