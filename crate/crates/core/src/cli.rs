//! Command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{
    convergence_experiment, rv_index_estimate, sign_ratio_estimate, write_report_csv, write_report_json, ExperimentConfig,
    ExperimentDoc,
};
use crate::error::{LevyError, Result};
use crate::jump_sampler::{default_cutoff, write_jumps_csv, PathSampler};
use crate::levy_measure::{LevyMeasureSpec, Side};
use crate::representation::{sample_trimmed_asym_rep, sample_trimmed_mod_rep};
use crate::rng::{derive_key, stream};
use crate::smoother::{is_diffuse, smooth_tail, smoothed_measure};
use crate::stable_limits::norming;
use crate::trimmer::{studentize, OrderedJumps, TrimMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Simulate paths and print one summary per path.
    Simulate,
    /// Draw trimmed values from the exact representation.
    Represent,
    /// Simulate paths and trim them with each configured mode.
    Trim,
    /// Tabulate smoothed tails against the base tails.
    Smooth,
    /// Run the small-time convergence experiment.
    Converge,
    /// Tail index, sign ratio, norming and atom diagnostics of a measure.
    Diagnose,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "levytrim", version, about = "Small-time trimming of Lévy processes")]
pub struct CliInvocation {
    #[command(subcommand)]
    pub command: Command,
    /// JSON experiment file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Single time horizon.
    #[arg(long, global = true)]
    pub t: Option<f64>,
    /// Smallest horizon of a decade grid starting at 1e-2.
    #[arg(long, global = true)]
    pub t_min: Option<f64>,
    /// Positive jumps to trim.
    #[arg(long, global = true)]
    pub r: Option<usize>,
    /// Negative jumps to trim.
    #[arg(long, global = true)]
    pub s: Option<usize>,
    /// Trim by modulus, removing `r` jumps.
    #[arg(long, global = true)]
    pub modulus: bool,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true, env = "LEVYTRIM_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write the jumps of the first simulated path to this CSV file.
    #[arg(long, global = true)]
    pub dump_jumps: Option<PathBuf>,
}

/// Exit status: 0 success, 1 failed check, 2 usage or configuration error.
pub fn run(inv: &CliInvocation) -> u8 {
    match execute(inv) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("levytrim: {e}");
            2
        }
    }
}

fn load_doc(inv: &CliInvocation) -> Result<ExperimentDoc> {
    let path = inv
        .config
        .as_ref()
        .ok_or_else(|| LevyError::Config("--config is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| LevyError::Config(format!("{}: {e}", path.display())))?;
    let mut doc = ExperimentDoc::from_json(&text).map_err(|e| LevyError::Config(format!("{}: {e}", path.display())))?;
    if let Some(t_min) = inv.t_min {
        if !(t_min > 0.0 && t_min <= 1e-2) {
            return Err(LevyError::Config(format!("--t-min must lie in (0, 0.01], got {t_min}")));
        }
        let mut grid = vec![1e-2];
        while grid[grid.len() - 1] / 10.0 >= t_min * (1.0 - 1e-12) {
            grid.push(grid[grid.len() - 1] / 10.0);
        }
        doc.t_grid = grid;
    }
    if let Some(t) = inv.t {
        doc.t_grid = vec![t];
    }
    if inv.r.is_some() || inv.s.is_some() {
        let (r, s) = (inv.r.unwrap_or(0), inv.s.unwrap_or(0));
        let mode = if inv.modulus {
            TrimMode::Modulus { r }
        } else {
            TrimMode::Asymmetric { r, s }
        };
        doc.modes = vec![mode.label()];
    }
    if let Some(n) = inv.n {
        doc.n = n;
    }
    if let Some(seed) = inv.seed {
        doc.seed = seed;
    }
    if inv.threads.is_some() {
        doc.threads = inv.threads;
    }
    if doc.threads == Some(0) {
        return Err(LevyError::Config("--threads must be positive".into()));
    }
    Ok(doc)
}

fn execute(inv: &CliInvocation) -> Result<bool> {
    let doc = load_doc(inv)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(doc.threads.unwrap_or(0))
        .build()
        .map_err(|e| LevyError::Config(e.to_string()))?;
    pool.install(|| dispatch(inv, doc))
}

fn dispatch(inv: &CliInvocation, doc: ExperimentDoc) -> Result<bool> {
    match inv.command {
        Command::Converge => {
            let config = ExperimentConfig::from_doc(ExperimentDoc { threads: None, ..doc })?;
            let report = convergence_experiment(&config)?;
            write_atomically(inv.output.as_deref(), |w| match inv.format {
                Format::Csv => write_report_csv(&report, w),
                Format::Json => write_report_json(&report, w),
            })?;
            Ok(report.all_pass)
        }
        Command::Simulate => simulate(inv, &doc).map(|_| true),
        Command::Trim => trim_paths(inv, &doc).map(|_| true),
        Command::Represent => represent(inv, &doc).map(|_| true),
        Command::Smooth => smooth(inv, &doc).map(|_| true),
        Command::Diagnose => diagnose(inv, &doc).map(|_| true),
    }
}

/// Write to `path` through a temporary file in the same directory, or to
/// stdout when no path is given.
fn write_atomically<F>(path: Option<&Path>, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let Some(path) = path else {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        body(&mut lock)?;
        lock.flush()?;
        return Ok(());
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut file = std::io::BufWriter::new(fs::File::create(&tmp)?);
        body(&mut file)?;
        file.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn write_rows<T: Serialize>(inv: &CliInvocation, rows: &[T]) -> Result<()> {
    write_atomically(inv.output.as_deref(), |w| match inv.format {
        Format::Csv => {
            let mut cw = csv::Writer::from_writer(w);
            for row in rows {
                cw.serialize(row)?;
            }
            cw.flush()?;
            Ok(())
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut *w, rows)?;
            w.write_all(b"\n")?;
            Ok(())
        }
    })
}

fn first_t(doc: &ExperimentDoc) -> Result<f64> {
    match doc.t_grid.first() {
        Some(&t) if t > 0.0 => Ok(t),
        _ => Err(LevyError::Config("a positive time horizon is required".into())),
    }
}

fn modes(doc: &ExperimentDoc) -> Result<Vec<TrimMode>> {
    doc.modes.iter().map(|m| TrimMode::parse(m)).collect()
}

fn measure_of(doc: &ExperimentDoc) -> Result<LevyMeasureSpec> {
    let base = doc.measure.build()?;
    if doc.smooth {
        smoothed_measure(&base)
    } else {
        Ok(base)
    }
}

#[derive(Serialize)]
struct PathSummary {
    replication: usize,
    t: f64,
    epsilon: f64,
    jumps: usize,
    jump_sum: f64,
    drift_component: f64,
    small_component: f64,
    gaussian_component: f64,
    value: f64,
}

fn simulate(inv: &CliInvocation, doc: &ExperimentDoc) -> Result<()> {
    let measure = measure_of(doc)?;
    let t = first_t(doc)?;
    let eps = default_cutoff(&measure, t, doc.jump_budget)?;
    let sampler = PathSampler::new(&measure, t, eps)?;
    let key = derive_key(0xC11, 1);
    let paths: Vec<_> = (0..doc.n)
        .into_par_iter()
        .map(|i| sampler.sample(&mut stream(doc.seed, key, i as u64)))
        .collect();
    if let (Some(dump), Some(first)) = (&inv.dump_jumps, paths.first()) {
        write_atomically(Some(dump), |w| write_jumps_csv(first, w))?;
    }
    let rows: Vec<PathSummary> = paths
        .iter()
        .enumerate()
        .map(|(i, p)| PathSummary {
            replication: i,
            t: p.t,
            epsilon: p.epsilon,
            jumps: p.jumps.len(),
            jump_sum: p.jump_sum(),
            drift_component: p.drift_component,
            small_component: p.small_component,
            gaussian_component: p.gaussian_component,
            value: p.value,
        })
        .collect();
    write_rows(inv, &rows)
}

#[derive(Serialize)]
struct TrimRow {
    replication: usize,
    mode: String,
    value: f64,
    trimmed_value: f64,
    studentized: f64,
}

fn trim_paths(inv: &CliInvocation, doc: &ExperimentDoc) -> Result<()> {
    let measure = measure_of(doc)?;
    let modes = modes(doc)?;
    let t = first_t(doc)?;
    let norm = norming(&doc.measure.build()?, t)?;
    let eps = default_cutoff(&measure, t, doc.jump_budget)?;
    let sampler = PathSampler::new(&measure, t, eps)?;
    let k = |f: fn(&TrimMode) -> Option<usize>| modes.iter().filter_map(f).max().unwrap_or(0);
    let kp = k(|m| (!m.is_modulus()).then(|| m.counts().0));
    let kn = k(|m| (!m.is_modulus()).then(|| m.counts().1));
    let km = k(|m| m.is_modulus().then(|| m.counts().0));
    let key = derive_key(0xC11, 2);
    let per_path: Vec<Vec<TrimRow>> = (0..doc.n)
        .into_par_iter()
        .map(|i| {
            let path = sampler.sample(&mut stream(doc.seed, key, i as u64));
            let ordered = OrderedJumps::extract(&path, kp, kn, km);
            modes
                .iter()
                .map(|&m| {
                    let tr = ordered.trim(m)?;
                    Ok(TrimRow {
                        replication: i,
                        mode: m.label(),
                        value: path.value,
                        trimmed_value: tr.trimmed_value,
                        studentized: studentize(tr.trimmed_value, norm.a_t, norm.b_t)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<TrimRow> = per_path.into_iter().flatten().collect();
    write_rows(inv, &rows)
}

#[derive(Serialize)]
struct RepRow {
    replication: usize,
    mode: String,
    trimmed_value: f64,
    boundary_positive: Option<f64>,
    boundary_negative: Option<f64>,
}

fn represent(inv: &CliInvocation, doc: &ExperimentDoc) -> Result<()> {
    let measure = measure_of(doc)?;
    let modes = modes(doc)?;
    let t = first_t(doc)?;
    let eps = default_cutoff(&measure, t, doc.jump_budget)?;
    let mut rows = Vec::new();
    for (mi, &mode) in modes.iter().enumerate() {
        let key = derive_key(derive_key(0xC11, 3), mi as u64);
        let block: Vec<RepRow> = (0..doc.n)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(doc.seed, key, i as u64);
                Ok(match mode {
                    TrimMode::Modulus { r } if r > 0 => {
                        let d = sample_trimmed_mod_rep(&measure, t, r, eps, &mut rng)?;
                        RepRow {
                            replication: i,
                            mode: mode.label(),
                            trimmed_value: d.trimmed_value,
                            boundary_positive: Some(d.r_th_modulus),
                            boundary_negative: None,
                        }
                    }
                    _ => {
                        let (r, s) = mode.counts();
                        let d = sample_trimmed_asym_rep(&measure, t, r, s, eps, &mut rng)?;
                        RepRow {
                            replication: i,
                            mode: mode.label(),
                            trimmed_value: d.trimmed_value,
                            boundary_positive: d.r_th_pos_jump,
                            boundary_negative: d.s_th_neg_jump,
                        }
                    }
                })
            })
            .collect::<Result<_>>()?;
        rows.extend(block);
    }
    write_rows(inv, &rows)
}

#[derive(Serialize)]
struct SmoothRow {
    x: f64,
    side: String,
    base_tail: f64,
    smoothed_tail: f64,
}

fn smooth(inv: &CliInvocation, doc: &ExperimentDoc) -> Result<()> {
    let base = doc.measure.build()?;
    let mut xs: Vec<f64> = (0..=40).map(|k| 10f64.powf(-3.0 + 0.1 * k as f64)).collect();
    for (_, a) in base.atoms() {
        xs.extend([a.location, a.location + a.location * a.location]);
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut rows = Vec::new();
    for side in [Side::Plus, Side::Minus] {
        for &x in &xs {
            rows.push(SmoothRow {
                x,
                side: format!("{side:?}").to_lowercase(),
                base_tail: base.tail(side, x)?,
                smoothed_tail: smooth_tail(&base, side, x)?,
            });
        }
    }
    write_rows(inv, &rows)
}

#[derive(Serialize)]
struct DiagnoseRow {
    t: f64,
    b_t: f64,
    a_t: f64,
    alpha_est: f64,
    sign_ratio_est: f64,
}

#[derive(Serialize)]
struct DiagnoseReport {
    rows: Vec<DiagnoseRow>,
    alpha_estimate: f64,
    sign_ratio_limit: f64,
    sign_ratio_converged: bool,
    plus_infinite_activity: bool,
    minus_infinite_activity: bool,
    diffuse: bool,
    atoms: usize,
}

fn diagnose(inv: &CliInvocation, doc: &ExperimentDoc) -> Result<()> {
    let measure = measure_of(doc)?;
    let mut rows = Vec::new();
    for &t in &doc.t_grid {
        let nm = norming(&measure, t)?;
        let both = |x: f64| measure.tail(Side::Both, x);
        rows.push(DiagnoseRow {
            t,
            b_t: nm.b_t,
            a_t: nm.a_t,
            alpha_est: (both(nm.b_t)? / both(2.0 * nm.b_t)?).ln() / 2f64.ln(),
            sign_ratio_est: measure.tail(Side::Plus, nm.b_t)? / both(nm.b_t)?,
        });
    }
    match inv.format {
        Format::Csv => write_rows(inv, &rows),
        Format::Json => {
            let z0 = measure.inverse_tail(Side::Both, 1e6)?;
            let grid: Vec<f64> = (0..12).map(|k| z0 * 2f64.powi(-k)).collect();
            let rv = rv_index_estimate(&measure, &grid, 2.0)?;
            let sr = sign_ratio_estimate(&measure, &grid)?;
            let act = measure.activity();
            let diffuse = is_diffuse(&measure);
            let report = DiagnoseReport {
                rows,
                alpha_estimate: rv.alpha,
                sign_ratio_limit: sr.limit,
                sign_ratio_converged: sr.converged,
                plus_infinite_activity: act.plus_infinite,
                minus_infinite_activity: act.minus_infinite,
                diffuse: diffuse.diffuse,
                atoms: diffuse.atoms.len(),
            };
            write_atomically(inv.output.as_deref(), |w| {
                serde_json::to_writer_pretty(&mut *w, &report)?;
                w.write_all(b"\n")?;
                Ok(())
            })
        }
    }
}
