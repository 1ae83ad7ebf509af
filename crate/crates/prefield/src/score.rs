//! Prediction scores over replicated experiments.
//!
//! Truth and predictions are laid out replicate-major: `M` replicates by
//! `N` locations. Three measures are computed:
//!
//! - per-location prediction error, either averaging `|error|` across
//!   replicates (the root of each squared error, as the error measure is
//!   written) or the conventional root-mean-square variant;
//! - the mean ignorance score per replicate,
//!   `(1/N) sum_i [ e_ji^2 / (2 var_ji) + log sd_ji ]`;
//! - the location ignorance score per location (same summand averaged over
//!   replicates).
//!
//! Differences are preferential minus standard: negative values mean the
//! movement-aware model scored better.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which per-location error convention to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RmspeConvention {
    /// Mean absolute error across replicates (the measure exactly as its
    /// defining sum is written: the square root is applied per term).
    Paper,
    /// Root of the mean squared error across replicates.
    Rmse,
}

impl Default for RmspeConvention {
    fn default() -> Self {
        RmspeConvention::Paper
    }
}

impl std::str::FromStr for RmspeConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(RmspeConvention::Paper),
            "rmse" => Ok(RmspeConvention::Rmse),
            other => Err(Error::Config(format!("unknown error convention '{other}'"))),
        }
    }
}

/// Scores of one model across a replicated study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreReport {
    pub convention: RmspeConvention,
    /// Per-location error (length N).
    pub rmspe: Vec<f64>,
    /// Per-replicate mean ignorance (length M).
    pub mign: Vec<f64>,
    /// Per-location ignorance (length N).
    pub lign: Vec<f64>,
}

/// Differences of two score reports (first minus second).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreDiffs {
    pub rmspe: Vec<f64>,
    pub mign: Vec<f64>,
    pub lign: Vec<f64>,
}

fn check_layout(truth: &[Vec<f64>], other: &[Vec<f64>], what: &str) -> Result<(usize, usize)> {
    let m = truth.len();
    if m == 0 {
        return Err(Error::Dimension("no replicates".into()));
    }
    let n = truth[0].len();
    if other.len() != m {
        return Err(Error::Dimension(format!(
            "{what}: {} replicates of predictions for {m} of truth",
            other.len()
        )));
    }
    for j in 0..m {
        if truth[j].len() != n || other[j].len() != n {
            return Err(Error::Dimension(format!("{what}: ragged replicate {j}")));
        }
    }
    Ok((m, n))
}

/// Per-location prediction error across replicates.
pub fn rmspe(
    truth: &[Vec<f64>],
    pred_mean: &[Vec<f64>],
    convention: RmspeConvention,
) -> Result<Vec<f64>> {
    let (m, n) = check_layout(truth, pred_mean, "rmspe")?;
    let mf = m as f64;
    Ok((0..n)
        .map(|i| match convention {
            RmspeConvention::Paper => {
                (0..m).map(|j| (truth[j][i] - pred_mean[j][i]).abs()).sum::<f64>() / mf
            }
            RmspeConvention::Rmse => ((0..m)
                .map(|j| (truth[j][i] - pred_mean[j][i]).powi(2))
                .sum::<f64>()
                / mf)
                .sqrt(),
        })
        .collect())
}

fn ignorance(truth: f64, mean: f64, var: f64) -> Result<f64> {
    if !(var > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ignorance score needs a positive prediction variance, got {var}"
        )));
    }
    let e = truth - mean;
    Ok(e * e / (2.0 * var) + var.sqrt().ln())
}

/// Mean ignorance score per replicate.
pub fn mign(
    truth: &[Vec<f64>],
    pred_mean: &[Vec<f64>],
    pred_var: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let (m, n) = check_layout(truth, pred_mean, "mign")?;
    check_layout(truth, pred_var, "mign variance")?;
    let mut out = Vec::with_capacity(m);
    for j in 0..m {
        let mut acc = 0.0;
        for i in 0..n {
            acc += ignorance(truth[j][i], pred_mean[j][i], pred_var[j][i])?;
        }
        out.push(acc / n as f64);
    }
    Ok(out)
}

/// Location ignorance score per location.
pub fn lign(
    truth: &[Vec<f64>],
    pred_mean: &[Vec<f64>],
    pred_var: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let (m, n) = check_layout(truth, pred_mean, "lign")?;
    check_layout(truth, pred_var, "lign variance")?;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..m {
            acc += ignorance(truth[j][i], pred_mean[j][i], pred_var[j][i])?;
        }
        out.push(acc / m as f64);
    }
    Ok(out)
}

/// Assembles the full score report for one model.
pub fn score_report(
    truth: &[Vec<f64>],
    pred_mean: &[Vec<f64>],
    pred_var: &[Vec<f64>],
    convention: RmspeConvention,
) -> Result<ScoreReport> {
    Ok(ScoreReport {
        convention,
        rmspe: rmspe(truth, pred_mean, convention)?,
        mign: mign(truth, pred_mean, pred_var)?,
        lign: lign(truth, pred_mean, pred_var)?,
    })
}

/// Elementwise differences `pref - std` of the three score vectors.
pub fn score_diffs(pref: &ScoreReport, std: &ScoreReport) -> Result<ScoreDiffs> {
    if pref.rmspe.len() != std.rmspe.len()
        || pref.mign.len() != std.mign.len()
        || pref.lign.len() != std.lign.len()
    {
        return Err(Error::Dimension("score reports have different shapes".into()));
    }
    let sub = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
    Ok(ScoreDiffs {
        rmspe: sub(&pref.rmspe, &std.rmspe),
        mign: sub(&pref.mign, &std.mign),
        lign: sub(&pref.lign, &std.lign),
    })
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Dimension("quantile of an empty sample".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!("quantile level {q}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN in quantile input"));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Ok(sorted[lo] * (1.0 - frac) + sorted[hi] * frac)
}

/// Per-location quantile of the prediction differences
/// (preferential minus standard) across replicates.
pub fn quantile_of_differences(
    pref_mean: &[Vec<f64>],
    std_mean: &[Vec<f64>],
    q: f64,
) -> Result<Vec<f64>> {
    let (m, n) = check_layout(pref_mean, std_mean, "prediction stacks")?;
    (0..n)
        .map(|i| {
            let diffs: Vec<f64> = (0..m).map(|j| pref_mean[j][i] - std_mean[j][i]).collect();
            quantile(&diffs, q)
        })
        .collect()
}
