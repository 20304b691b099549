//! Removal of the largest jumps from a sampled path.
//!
//! Ties in magnitude are broken by earlier jump time; in modulus trimming a
//! positive jump precedes a negative one of equal magnitude.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, LevyError, Result};
use crate::jump_sampler::{JumpRecord, PathSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrimMode {
    Asymmetric { r: usize, s: usize },
    OneSidedPos { r: usize },
    OneSidedNeg { s: usize },
    Modulus { r: usize },
}

impl TrimMode {
    /// `(r, s)` where `s` is 0 for modulus trimming.
    pub fn counts(&self) -> (usize, usize) {
        match *self {
            TrimMode::Asymmetric { r, s } => (r, s),
            TrimMode::OneSidedPos { r } => (r, 0),
            TrimMode::OneSidedNeg { s } => (0, s),
            TrimMode::Modulus { r } => (r, 0),
        }
    }

    pub fn is_modulus(&self) -> bool {
        matches!(self, TrimMode::Modulus { .. })
    }

    pub fn label(&self) -> String {
        match *self {
            TrimMode::Asymmetric { r, s } => format!("asym({r},{s})"),
            TrimMode::OneSidedPos { r } => format!("pos({r})"),
            TrimMode::OneSidedNeg { s } => format!("neg({s})"),
            TrimMode::Modulus { r } => format!("mod({r})"),
        }
    }

    /// Parse labels such as `asym(2,1)`, `pos(1)`, `neg(2)`, `mod(1)`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || LevyError::Config(format!("unrecognized trim mode '{text}'"));
        let text = text.trim();
        let open = text.find('(').ok_or_else(bad)?;
        if !text.ends_with(')') {
            return Err(bad());
        }
        let name = &text[..open];
        let args: Vec<usize> = text[open + 1..text.len() - 1]
            .split(',')
            .map(|a| a.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match (name, args.as_slice()) {
            ("asym", [r, s]) => Ok(TrimMode::Asymmetric { r: *r, s: *s }),
            ("pos", [r]) => Ok(TrimMode::OneSidedPos { r: *r }),
            ("neg", [s]) => Ok(TrimMode::OneSidedNeg { s: *s }),
            ("mod", [r]) => Ok(TrimMode::Modulus { r: *r }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrimResult {
    pub trimmed_value: f64,
    /// Removed positive jumps, nonincreasing.
    pub removed_positive: Vec<f64>,
    /// Magnitudes of removed negative jumps, nonincreasing.
    pub removed_negative: Vec<f64>,
    /// Removed signed jumps, nonincreasing in modulus.
    pub removed_modulus: Vec<f64>,
    pub mode: TrimMode,
}

fn by_magnitude_then_time(a: &JumpRecord, b: &JumpRecord) -> Ordering {
    b.size
        .abs()
        .partial_cmp(&a.size.abs())
        .unwrap_or(Ordering::Equal)
        .then(a.time.partial_cmp(&b.time).unwrap_or(Ordering::Equal))
}

fn by_modulus_rule(a: &JumpRecord, b: &JumpRecord) -> Ordering {
    b.size
        .abs()
        .partial_cmp(&a.size.abs())
        .unwrap_or(Ordering::Equal)
        .then((b.size > 0.0).cmp(&(a.size > 0.0)))
        .then(a.time.partial_cmp(&b.time).unwrap_or(Ordering::Equal))
}

/// The `k` first elements of `items` under `cmp`, in order.
fn top_k<F: Fn(&JumpRecord, &JumpRecord) -> Ordering>(items: impl Iterator<Item = JumpRecord>, k: usize, cmp: F) -> Vec<JumpRecord> {
    let mut best: Vec<JumpRecord> = Vec::with_capacity(k + 1);
    if k == 0 {
        return best;
    }
    for j in items {
        if best.len() == k && cmp(&j, &best[k - 1]) != Ordering::Less {
            continue;
        }
        let pos = best.partition_point(|b| cmp(b, &j) != Ordering::Greater);
        best.insert(pos, j);
        best.truncate(k);
    }
    best
}

/// The largest positive, negative and modulus jumps of one path, extracted
/// once so that several trimming modes can be evaluated cheaply.
#[derive(Debug, Clone)]
pub struct OrderedJumps {
    pub value: f64,
    /// Positive jumps, largest first.
    pub positive: Vec<f64>,
    /// Negative jump magnitudes, largest first.
    pub negative: Vec<f64>,
    /// Signed jumps, largest modulus first.
    pub modulus: Vec<f64>,
}

impl OrderedJumps {
    pub fn extract(path: &PathSample, k_pos: usize, k_neg: usize, k_mod: usize) -> Self {
        let pos = top_k(path.jumps.iter().copied().filter(|j| j.size > 0.0), k_pos, by_magnitude_then_time);
        let neg = top_k(path.jumps.iter().copied().filter(|j| j.size < 0.0), k_neg, by_magnitude_then_time);
        let modulus = top_k(path.jumps.iter().copied(), k_mod, by_modulus_rule);
        OrderedJumps {
            value: path.value,
            positive: pos.iter().map(|j| j.size).collect(),
            negative: neg.iter().map(|j| -j.size).collect(),
            modulus: modulus.iter().map(|j| j.size).collect(),
        }
    }

    pub fn trim(&self, mode: TrimMode) -> Result<TrimResult> {
        let shortfall = |kind: &'static str, needed: usize, found: usize| {
            if found < needed {
                Err(LevyError::InsufficientJumps { kind, needed, found })
            } else {
                Ok(())
            }
        };
        if let TrimMode::Modulus { r } = mode {
            shortfall("modulus", r, self.modulus.len())?;
            let removed: Vec<f64> = self.modulus[..r].to_vec();
            return Ok(TrimResult {
                trimmed_value: self.value - removed.iter().sum::<f64>(),
                removed_positive: Vec::new(),
                removed_negative: Vec::new(),
                removed_modulus: removed,
                mode,
            });
        }
        let (r, s) = mode.counts();
        shortfall("positive", r, self.positive.len())?;
        shortfall("negative", s, self.negative.len())?;
        let pos = self.positive[..r].to_vec();
        let neg = self.negative[..s].to_vec();
        Ok(TrimResult {
            trimmed_value: self.value - pos.iter().sum::<f64>() + neg.iter().sum::<f64>(),
            removed_positive: pos,
            removed_negative: neg,
            removed_modulus: Vec::new(),
            mode,
        })
    }
}

pub fn trim(path: &PathSample, mode: TrimMode) -> Result<TrimResult> {
    let (r, s) = mode.counts();
    let ordered = if mode.is_modulus() {
        OrderedJumps::extract(path, 0, 0, r)
    } else {
        OrderedJumps::extract(path, r, s, 0)
    };
    ordered.trim(mode)
}

/// Remove the `r` largest positive and the `s` most negative jumps.
pub fn trim_asymmetric(path: &PathSample, r: usize, s: usize) -> Result<TrimResult> {
    trim(path, TrimMode::Asymmetric { r, s })
}

pub fn trim_one_sided_pos(path: &PathSample, r: usize) -> Result<TrimResult> {
    trim(path, TrimMode::OneSidedPos { r })
}

pub fn trim_one_sided_neg(path: &PathSample, s: usize) -> Result<TrimResult> {
    trim(path, TrimMode::OneSidedNeg { s })
}

/// Remove the `r` largest jumps in absolute value, keeping their signs.
pub fn trim_modulus(path: &PathSample, r: usize) -> Result<TrimResult> {
    trim(path, TrimMode::Modulus { r })
}

/// `(value − a_t) / b_t`.
pub fn studentize(value: f64, a_t: f64, b_t: f64) -> Result<f64> {
    check_positive("b_t", b_t)?;
    Ok((value - a_t) / b_t)
}
