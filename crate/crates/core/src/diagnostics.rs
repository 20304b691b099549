//! Empirical distributions, Kolmogorov–Smirnov comparisons, tail estimators
//! and the small-time convergence experiment for trimmed processes.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LevyError, Result};
use crate::jump_sampler::{default_cutoff, sample_ordered_jumps, PathSampler, DEFAULT_JUMP_BUDGET};
use crate::levy_measure::{LevyMeasureSpec, MeasureDoc, Side, TailFunction};
use crate::representation::{poisson_at_least, rho, sample_trimmed_asym_rep, sample_trimmed_mod_rep};
use crate::rng::{derive_key, stream};
use crate::smoother::smooth_path;
use crate::stable_limits::{norming, StableParams, TrimmedStableSampler};
use crate::trimmer::{studentize, OrderedJumps, TrimMode};

/// Sorted sample with its empirical distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(LevyError::Domain("empirical distribution needs at least one sample".into()));
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(LevyError::Domain("samples contain NaN".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(EmpiricalDistribution { sorted: samples })
    }

    pub fn n(&self) -> usize {
        self.sorted.len()
    }

    pub fn sorted_samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn median(&self) -> f64 {
        let n = self.sorted.len();
        if n % 2 == 1 {
            self.sorted[n / 2]
        } else {
            0.5 * (self.sorted[n / 2 - 1] + self.sorted[n / 2])
        }
    }

    /// Fraction of samples `≤ x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= x) as f64 / self.n() as f64
    }

    /// Fraction of samples `> x`.
    pub fn survival(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    pub fn shifted(&self, delta: f64) -> Self {
        EmpiricalDistribution {
            sorted: self.sorted.iter().map(|x| x + delta).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub distance: f64,
    /// Critical value at the 1% level.
    pub threshold: f64,
}

pub fn ks_threshold(na: usize, nb: usize) -> f64 {
    let (na, nb) = (na as f64, nb as f64);
    1.63 * ((na + nb) / (na * nb)).sqrt()
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> KsResult {
    let (xa, xb) = (&a.sorted, &b.sorted);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    KsResult {
        distance: d,
        threshold: ks_threshold(xa.len(), xb.len()),
    }
}

/// One-sample Kolmogorov–Smirnov distance against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(a: &EmpiricalDistribution, cdf: F) -> f64 {
    let n = a.n() as f64;
    a.sorted.iter().enumerate().fold(0.0, |d: f64, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RvEstimate {
    pub alpha: f64,
    /// `(z, log(Π̄(z)/Π̄(zy))/log y)` per grid point.
    pub per_point: Vec<(f64, f64)>,
}

/// Regular-variation index of `Π̄` at 0 from tail ratios on a decreasing
/// grid; the estimate averages the smallest quarter of the grid.
pub fn rv_index_estimate(measure: &LevyMeasureSpec, z_grid: &[f64], y: f64) -> Result<RvEstimate> {
    if !(y > 1.0) {
        return Err(LevyError::Domain(format!("ratio y must exceed 1, got {y}")));
    }
    if z_grid.is_empty() {
        return Err(LevyError::Domain("empty grid".into()));
    }
    let mut per_point = Vec::with_capacity(z_grid.len());
    for &z in z_grid {
        let a = measure.tail(Side::Both, z)?;
        let b = measure.tail(Side::Both, z * y)?;
        if a <= 0.0 || b <= 0.0 {
            return Err(LevyError::Domain(format!(
                "tail vanishes at z = {z} (Π̄(z) = {a}, Π̄(zy) = {b}); no index can be estimated"
            )));
        }
        per_point.push((z, (a / b).ln() / y.ln()));
    }
    let mut by_z = per_point.clone();
    by_z.sort_by(|p, q| p.0.total_cmp(&q.0));
    let k = by_z.len().div_ceil(4);
    let alpha = by_z[..k].iter().map(|p| p.1).sum::<f64>() / k as f64;
    Ok(RvEstimate { alpha, per_point })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignRatio {
    /// `(z, Π̄⁺(z)/Π̄(z))` per grid point.
    pub ratios: Vec<(f64, f64)>,
    /// Ratio at the smallest grid point.
    pub limit: f64,
    /// Oscillation over the smaller half of the grid is below 0.01.
    pub converged: bool,
}

pub fn sign_ratio_estimate(measure: &LevyMeasureSpec, z_grid: &[f64]) -> Result<SignRatio> {
    if z_grid.is_empty() {
        return Err(LevyError::Domain("empty grid".into()));
    }
    let mut ratios = Vec::with_capacity(z_grid.len());
    for &z in z_grid {
        let total = measure.tail(Side::Both, z)?;
        if total <= 0.0 {
            return Err(LevyError::Domain(format!("two-sided tail vanishes at z = {z}")));
        }
        ratios.push((z, measure.tail(Side::Plus, z)? / total));
    }
    let mut by_z = ratios.clone();
    by_z.sort_by(|p, q| p.0.total_cmp(&q.0));
    let half = &by_z[..by_z.len().div_ceil(2)];
    let hi = half.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let lo = half.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    Ok(SignRatio {
        limit: by_z[0].1,
        ratios,
        converged: hi - lo < 0.01,
    })
}

/// One cell of the order-statistic sandwich check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCell {
    pub t: f64,
    pub x: f64,
    /// `m = t·Π̄⁺(x·b_t)`.
    pub m: f64,
    pub ratio: f64,
    pub se: f64,
    pub lower: f64,
    pub upper: f64,
    pub skipped: bool,
    pub pass: bool,
}

/// Monte Carlo `P(ΔX^{(r+1)} > x·b_t)` divided by `m^{r+1}/(r+1)!`, checked
/// against `[e^{−0.1} − 3SE, 1 + 3SE]` on cells with `m ≤ 0.1`.
pub fn order_stat_bound_check(
    measure: &LevyMeasureSpec,
    t_grid: &[f64],
    x_grid: &[f64],
    r: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<BoundCell>> {
    let mut cells = Vec::new();
    for (ti, &t) in t_grid.iter().enumerate() {
        let b_t = norming(measure, t)?.b_t;
        let key = derive_key(0xB0_0D, ti as u64);
        let draws: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| sample_ordered_jumps(measure, t, r + 1, Side::Plus, &mut stream(seed, key, i as u64)).map(|v| v[r]))
            .collect::<Result<_>>()?;
        let dist = EmpiricalDistribution::new(draws)?;
        let fact: f64 = (1..=r + 1).map(|k| k as f64).product();
        for &x in x_grid {
            let m = t * measure.tail(Side::Plus, x * b_t)?;
            let bound = m.powi(r as i32 + 1) / fact;
            if !(m <= 0.1) || bound <= 0.0 {
                cells.push(BoundCell {
                    t,
                    x,
                    m,
                    ratio: f64::NAN,
                    se: f64::NAN,
                    lower: f64::NAN,
                    upper: f64::NAN,
                    skipped: true,
                    pass: true,
                });
                continue;
            }
            let p_hat = dist.survival(x * b_t);
            let p = poisson_at_least(r + 1, m);
            let se = (p * (1.0 - p) / n as f64).sqrt() / bound;
            let ratio = p_hat / bound;
            let lower = (-0.1f64).exp() - 3.0 * se;
            let upper = 1.0 + 3.0 * se;
            cells.push(BoundCell {
                t,
                x,
                m,
                ratio,
                se,
                lower,
                upper,
                skipped: false,
                pass: ratio >= lower && ratio <= upper,
            });
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerChoice {
    #[default]
    Path,
    Representation,
    Both,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceDoc {
    TrimmedStable {
        alpha: f64,
        c_plus: f64,
        c_minus: f64,
    },
    /// Stable parameters read off the measure's behaviour at 0.
    #[default]
    Auto,
    /// An independent sample at the smallest `t`.
    EmpiricalSmallestT,
}

fn default_modes() -> Vec<String> {
    vec!["asym(0,0)".into()]
}
fn default_t_grid() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4]
}
fn default_n() -> usize {
    100_000
}
fn default_budget() -> f64 {
    DEFAULT_JUMP_BUDGET
}
fn default_reference_samples() -> usize {
    1_000_000
}
fn default_tolerance() -> f64 {
    0.02
}

/// JSON form of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentDoc {
    pub measure: MeasureDoc,
    #[serde(default = "default_modes")]
    pub modes: Vec<String>,
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sampler: SamplerChoice,
    #[serde(default)]
    pub reference: ReferenceDoc,
    /// Expected number of simulated jumps per path.
    #[serde(default = "default_budget")]
    pub jump_budget: f64,
    #[serde(default = "default_reference_samples")]
    pub reference_samples: usize,
    #[serde(default = "default_tolerance")]
    pub ks_tolerance: f64,
    /// Smooth every path before trimming.
    #[serde(default)]
    pub smooth: bool,
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
}

impl ExperimentDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub doc: ExperimentDoc,
    pub measure: LevyMeasureSpec,
    pub modes: Vec<TrimMode>,
}

impl ExperimentConfig {
    pub fn from_doc(doc: ExperimentDoc) -> Result<Self> {
        let measure = doc.measure.build()?;
        let modes = doc.modes.iter().map(|m| TrimMode::parse(m)).collect::<Result<Vec<_>>>()?;
        if modes.is_empty() {
            return Err(LevyError::Config("at least one trim mode is required".into()));
        }
        if doc.t_grid.is_empty() || doc.t_grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(LevyError::Config("t_grid must be a nonempty list of positive numbers".into()));
        }
        if doc.t_grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(LevyError::Config("t_grid must be strictly decreasing".into()));
        }
        if doc.n < 1000 {
            return Err(LevyError::Config(format!("n must be at least 1000, got {}", doc.n)));
        }
        if doc.reference_samples < 1000 {
            return Err(LevyError::Config("reference_samples must be at least 1000".into()));
        }
        if !(doc.jump_budget > 0.0) || !(doc.ks_tolerance > 0.0) {
            return Err(LevyError::Config("jump_budget and ks_tolerance must be positive".into()));
        }
        if doc.smooth && doc.sampler != SamplerChoice::Path {
            return Err(LevyError::Config("smoothing is applied to simulated paths; use the path sampler".into()));
        }
        if doc.threads == Some(0) {
            return Err(LevyError::Config("threads must be positive".into()));
        }
        Ok(ExperimentConfig { doc, measure, modes })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_doc(ExperimentDoc::from_json(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub t: f64,
    pub mode: String,
    pub r: usize,
    pub s: usize,
    pub n: usize,
    pub ks_distance: f64,
    pub ks_threshold: f64,
    pub location_shift: f64,
    pub alpha_est: f64,
    pub sign_ratio_est: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSummary {
    pub mode: String,
    pub nonincreasing: bool,
    pub final_ks: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffInfo {
    pub t: f64,
    pub epsilon: f64,
    /// Variance of the Gaussian standing in for jumps below `epsilon`.
    pub small_variance: f64,
    pub a_t: f64,
    pub b_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TieTrace {
    pub t: f64,
    /// `1 − exp(−t(ρ₊(1/t) + ρ₋(1/t)))`.
    pub tie_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub modes: Vec<ModeSummary>,
    pub cutoffs: Vec<CutoffInfo>,
    pub tie_traces: Vec<TieTrace>,
    pub reference: StableParams,
    pub flags: Vec<String>,
    pub scope: String,
    pub seed: u64,
    pub config: ExperimentDoc,
    pub version: String,
    pub all_pass: bool,
}

const SCOPE_NOTE: &str = "Only convergence of trimmed values under the canonical norming \
b_t = inverse tail at 1/t and a_t = t*nu(b_t) is exercised. The converse implication ranges over \
all norming functions and cannot be exhibited by simulation. Distributions are compared after \
median alignment, so location_shift is reported separately.";

type RefKey = (u64, u64, u64, TrimMode, usize, u64, u64);

fn reference_cache() -> &'static Mutex<HashMap<RefKey, Arc<EmpiricalDistribution>>> {
    static CACHE: OnceLock<Mutex<HashMap<RefKey, Arc<EmpiricalDistribution>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Drop every cached reference sample.
pub fn clear_reference_cache() {
    reference_cache().lock().unwrap().clear();
}

/// `M` draws of the trimmed-stable law, cached per parameter set.
pub fn trimmed_stable_reference(params: &StableParams, mode: TrimMode, m: usize, seed: u64, budget: f64) -> Result<Arc<EmpiricalDistribution>> {
    let key: RefKey = (
        params.alpha.to_bits(),
        params.c_plus.to_bits(),
        params.c_minus.to_bits(),
        mode,
        m,
        seed,
        budget.to_bits(),
    );
    if let Some(d) = reference_cache().lock().unwrap().get(&key) {
        return Ok(d.clone());
    }
    let sampler = TrimmedStableSampler::with_budget(*params, mode, budget)?;
    let purpose = derive_key(0x5EF, mode_key(mode));
    let draws: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| sampler.sample(&mut stream(seed, purpose, i as u64)))
        .collect::<Result<_>>()?;
    let dist = Arc::new(EmpiricalDistribution::new(draws)?);
    reference_cache().lock().unwrap().insert(key, dist.clone());
    Ok(dist)
}

fn mode_key(mode: TrimMode) -> u64 {
    let (tag, a, b) = match mode {
        TrimMode::Asymmetric { r, s } => (1u64, r, s),
        TrimMode::OneSidedPos { r } => (2, r, 0),
        TrimMode::OneSidedNeg { s } => (3, 0, s),
        TrimMode::Modulus { r } => (4, r, 0),
    };
    (tag << 48) ^ ((a as u64) << 24) ^ b as u64
}

/// Leading power-law behaviour `(α, c)` of a one-sided tail at 0, when it is
/// built from power-law pieces.
fn leading_power(tail: &TailFunction) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for c in tail.components() {
        let piece = match &c {
            TailFunction::PowerLaw { c, alpha } | TailFunction::PowerLawCapped { c, alpha, .. } => Some((*alpha, *c)),
            TailFunction::Smoothed(s) => leading_power(s.base()),
            TailFunction::Restricted { base, .. } => leading_power(base),
            _ => None,
        };
        if let Some((a, k)) = piece {
            best = match best {
                Some((ba, bk)) if ba == a => Some((a, bk + k)),
                Some((ba, _)) if ba > a => best,
                _ => Some((a, k)),
            };
        }
    }
    best
}

/// Stable law with `Λ̄±(x) = p± x^(−α)`, `p₊ + p₋ = 1`, attracting the
/// normed process under the canonical norming.
pub fn limit_params(measure: &LevyMeasureSpec) -> Result<StableParams> {
    let plus = leading_power(&measure.plus);
    let minus = leading_power(&measure.minus);
    let (alpha, cp, cm) = match (plus, minus) {
        (Some((a, c)), None) => (a, c, 0.0),
        (None, Some((a, c))) => (a, 0.0, c),
        (Some((a1, c1)), Some((a2, c2))) => {
            if a1 == a2 {
                (a1, c1, c2)
            } else if a1 > a2 {
                (a1, c1, 0.0)
            } else {
                (a2, 0.0, c2)
            }
        }
        (None, None) => {
            let z0 = measure.inverse_tail(Side::Both, 1e8)?;
            let grid: Vec<f64> = (0..8).map(|k| z0 * 2f64.powi(-k)).collect();
            let a = rv_index_estimate(measure, &grid, 2.0)?.alpha;
            let p = sign_ratio_estimate(measure, &grid)?.limit;
            (a, p, 1.0 - p)
        }
    };
    let total = cp + cm;
    StableParams::new(alpha, cp / total, cm / total)
}

/// Cutoff below the default budget level, lowered until each needed order
/// statistic lies above it except with probability `target`.
fn harness_cutoff(measure: &LevyMeasureSpec, t: f64, budget: f64, needs: &[(Side, usize)], target: f64) -> Result<f64> {
    let mut eps = default_cutoff(measure, t, budget)?;
    for &(side, k) in needs {
        if k == 0 {
            continue;
        }
        let tail = measure.side_tail(side);
        let mut m = t * tail.tail(eps);
        if 1.0 - poisson_at_least(k, m) <= target {
            continue;
        }
        let total = t * tail.total_mass();
        if total.is_finite() && 1.0 - poisson_at_least(k, total) > target {
            eps = eps.min(f64::MIN_POSITIVE.sqrt());
            continue;
        }
        m = m.max(1.0);
        while 1.0 - poisson_at_least(k, m) > target {
            m *= 2.0;
        }
        eps = eps.min(measure.inverse_tail(side, m / t)?.max(f64::MIN_POSITIVE.sqrt()));
    }
    Ok(eps)
}

fn ks_after_alignment(sample: &EmpiricalDistribution, reference: &EmpiricalDistribution) -> (KsResult, f64) {
    let shift = sample.median() - reference.median();
    (ks_two_sample(&sample.shifted(-shift), reference), shift)
}

fn check_assumptions(measure: &LevyMeasureSpec, flags: &mut Vec<String>) -> Result<()> {
    if measure.sigma2 > 0.0 {
        return Err(LevyError::Assumption(
            "the harness assumes no Gaussian part (sigma2 = 0); a Gaussian component makes the small-time limit normal".into(),
        ));
    }
    let act = measure.activity();
    if !act.any_infinite() {
        return Err(LevyError::Assumption(
            "the harness assumes infinite activity, Π̄(0+) = ∞, throughout; this measure has finitely many jumps".into(),
        ));
    }
    if !act.both_infinite() {
        flags.push("only one side has infinite activity; trimming on the finite side may run out of jumps".into());
    }
    let atoms = measure.atoms();
    if !atoms.is_empty() {
        flags.push(format!(
            "measure has {} atoms; the path trimmer breaks magnitude ties by jump time",
            atoms.len()
        ));
    }
    let unequal_pair = atoms.iter().any(|(s, a)| {
        *s == Side::Plus
            && atoms
                .iter()
                .any(|(s2, b)| *s2 == Side::Minus && b.location == a.location && b.mass != a.mass)
    });
    if unequal_pair && atoms.len() > 2 {
        flags.push("signed atoms of unequal mass share a magnitude while other atoms exist; the modulus tie split follows the κ formula literally".into());
    }
    Ok(())
}

/// Run the experiment on the current rayon pool, or on a dedicated pool
/// when `threads` is set.
pub fn convergence_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    match config.doc.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| LevyError::Config(e.to_string()))?
            .install(|| run_experiment(config)),
        None => run_experiment(config),
    }
}

fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let doc = &config.doc;
    let measure = &config.measure;
    let mut flags = Vec::new();
    check_assumptions(measure, &mut flags)?;

    let params = match &doc.reference {
        ReferenceDoc::TrimmedStable { alpha, c_plus, c_minus } => StableParams::new(*alpha, *c_plus, *c_minus)?,
        _ => limit_params(measure)?,
    };

    let modes = &config.modes;
    let max_pos = modes.iter().filter(|m| !m.is_modulus()).map(|m| m.counts().0).max().unwrap_or(0);
    let max_neg = modes.iter().filter(|m| !m.is_modulus()).map(|m| m.counts().1).max().unwrap_or(0);
    let max_mod = modes.iter().filter(|m| m.is_modulus()).map(|m| m.counts().0).max().unwrap_or(0);
    let needs = [(Side::Plus, max_pos), (Side::Minus, max_neg), (Side::Both, max_mod)];
    let target = 1e-6f64.min(1e-3 / doc.n as f64);

    let samplers: Vec<SamplerChoice> = match doc.sampler {
        SamplerChoice::Both => vec![SamplerChoice::Path, SamplerChoice::Representation],
        s => vec![s],
    };
    let label = |mode: TrimMode, s: SamplerChoice| match doc.sampler {
        SamplerChoice::Both => format!(
            "{}[{}]",
            mode.label(),
            if s == SamplerChoice::Path { "path" } else { "rep" }
        ),
        _ => mode.label(),
    };

    // studentized samples indexed by [t][sampler][mode]
    let mut samples: Vec<Vec<Vec<EmpiricalDistribution>>> = Vec::new();
    let mut cutoffs = Vec::new();
    let mut tie_traces = Vec::new();
    for (ti, &t) in doc.t_grid.iter().enumerate() {
        let norm = norming(measure, t)?;
        let eps = harness_cutoff(measure, t, doc.jump_budget, &needs, target)?;
        let path_sampler = PathSampler::new(measure, t, eps).map_err(|e| at_t(t, e))?;
        cutoffs.push(CutoffInfo {
            t,
            epsilon: eps,
            small_variance: t * (measure.v_fn(eps)? - measure.sigma2),
            a_t: norm.a_t,
            b_t: norm.b_t,
        });
        let rho_sum = rho(measure, Side::Plus, 1.0 / t)? + rho(measure, Side::Minus, 1.0 / t)?;
        tie_traces.push(TieTrace {
            t,
            tie_probability: 1.0 - (-t * rho_sum).exp(),
        });

        let mut per_sampler = Vec::new();
        for &s in &samplers {
            let per_mode: Vec<Vec<f64>> = match s {
                SamplerChoice::Path => {
                    let key = derive_key(derive_key(0x9A7, ti as u64), 0);
                    let rows: Vec<Vec<f64>> = (0..doc.n)
                        .into_par_iter()
                        .map(|i| {
                            let mut rng = stream(doc.seed, key, i as u64);
                            let mut path = path_sampler.sample(&mut rng);
                            if doc.smooth {
                                path = smooth_path(&path, &mut rng);
                            }
                            let ordered = OrderedJumps::extract(&path, max_pos, max_neg, max_mod);
                            modes
                                .iter()
                                .map(|&m| studentize(ordered.trim(m)?.trimmed_value, norm.a_t, norm.b_t))
                                .collect::<Result<Vec<f64>>>()
                        })
                        .collect::<Result<_>>()
                        .map_err(|e| at_t(t, e))?;
                    (0..modes.len()).map(|mi| rows.iter().map(|r| r[mi]).collect()).collect()
                }
                _ => modes
                    .iter()
                    .map(|&m| {
                        let key = derive_key(derive_key(0x4E9, ti as u64), mode_key(m));
                        (0..doc.n)
                            .into_par_iter()
                            .map(|i| {
                                let mut rng = stream(doc.seed, key, i as u64);
                                let v = match m {
                                    TrimMode::Modulus { r } if r > 0 => sample_trimmed_mod_rep(measure, t, r, eps, &mut rng)?.trimmed_value,
                                    _ => {
                                        let (r, s) = m.counts();
                                        sample_trimmed_asym_rep(measure, t, r, s, eps, &mut rng)?.trimmed_value
                                    }
                                };
                                studentize(v, norm.a_t, norm.b_t)
                            })
                            .collect::<Result<Vec<f64>>>()
                            .map_err(|e| at_t(t, e))
                    })
                    .collect::<Result<_>>()?,
            };
            per_sampler.push(per_mode.into_iter().map(EmpiricalDistribution::new).collect::<Result<Vec<_>>>()?);
        }
        samples.push(per_sampler);
    }

    // references per mode
    let references: Vec<Arc<EmpiricalDistribution>> = match doc.reference {
        ReferenceDoc::EmpiricalSmallestT => {
            let t = *doc.t_grid.last().unwrap();
            let norm = norming(measure, t)?;
            let eps = harness_cutoff(measure, t, doc.jump_budget, &needs, target)?;
            let sampler = PathSampler::new(measure, t, eps)?;
            let key = derive_key(0x5EF, u64::MAX);
            let rows: Vec<Vec<f64>> = (0..doc.reference_samples)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream(doc.seed, key, i as u64);
                    let mut path = sampler.sample(&mut rng);
                    if doc.smooth {
                        path = smooth_path(&path, &mut rng);
                    }
                    let ordered = OrderedJumps::extract(&path, max_pos, max_neg, max_mod);
                    modes
                        .iter()
                        .map(|&m| studentize(ordered.trim(m)?.trimmed_value, norm.a_t, norm.b_t))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<_>>()?;
            (0..modes.len())
                .map(|mi| EmpiricalDistribution::new(rows.iter().map(|r| r[mi]).collect()).map(Arc::new))
                .collect::<Result<_>>()?
        }
        _ => modes
            .iter()
            .map(|&m| trimmed_stable_reference(&params, m, doc.reference_samples, doc.seed, doc.jump_budget))
            .collect::<Result<_>>()?,
    };

    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (si, &s) in samplers.iter().enumerate() {
        for (mi, &mode) in modes.iter().enumerate() {
            let (r, sc) = mode.counts();
            let name = label(mode, s);
            let mut prev: Option<f64> = None;
            let mut nonincreasing = true;
            let mut all_rows_pass = true;
            let mut final_ks = f64::NAN;
            for (ti, &t) in doc.t_grid.iter().enumerate() {
                let (ks, shift) = ks_after_alignment(&samples[ti][si][mi], &references[mi]);
                let step_ok = prev.is_none_or(|p| ks.distance <= p + 2.0 * ks.threshold);
                nonincreasing &= step_ok;
                let last = ti + 1 == doc.t_grid.len();
                let pass = step_ok && (!last || ks.distance < doc.ks_tolerance);
                all_rows_pass &= pass;
                let b_t = cutoffs[ti].b_t;
                let alpha_est = (measure.tail(Side::Both, b_t)? / measure.tail(Side::Both, 2.0 * b_t)?).ln() / 2f64.ln();
                let sign_ratio_est = measure.tail(Side::Plus, b_t)? / measure.tail(Side::Both, b_t)?;
                rows.push(ReportRow {
                    t,
                    mode: name.clone(),
                    r,
                    s: sc,
                    n: doc.n,
                    ks_distance: ks.distance,
                    ks_threshold: ks.threshold,
                    location_shift: shift,
                    alpha_est,
                    sign_ratio_est,
                    pass,
                });
                prev = Some(ks.distance);
                final_ks = ks.distance;
            }
            summaries.push(ModeSummary {
                mode: name,
                nonincreasing,
                final_ks,
                pass: all_rows_pass,
            });
        }
    }

    let all_pass = summaries.iter().all(|m| m.pass);
    Ok(ExperimentReport {
        rows,
        modes: summaries,
        cutoffs,
        tie_traces,
        reference: params,
        flags,
        scope: SCOPE_NOTE.into(),
        seed: doc.seed,
        config: doc.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        all_pass,
    })
}

fn at_t(t: f64, e: LevyError) -> LevyError {
    match e {
        LevyError::InsufficientJumps { kind, needed, found } => LevyError::Config(format!(
            "at t = {t}: needed {needed} {kind} jumps above the cutoff, found {found}"
        )),
        other => LevyError::Config(format!("at t = {t}: {other}")),
    }
}

pub fn write_report_csv<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report_json<W: Write>(report: &ExperimentReport, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, report)?;
    out.write_all(b"\n")?;
    Ok(())
}
