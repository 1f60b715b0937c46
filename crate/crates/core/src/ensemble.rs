//! Joint forecast ensembles: historical simulation and multiple splits.

use std::io::Write;
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::ols::{dot, fit_spec};
use crate::quantreg::PredictionInterval;
use crate::rng::SeedPath;

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleMeta {
    /// Method tag, e.g. `HS`, `MS(20)` or `MS-U(20)`.
    pub method: String,
    pub splits: usize,
    /// First and last day of the training sample.
    pub window: (usize, usize),
    pub seed: Option<u64>,
    pub note: String,
}

/// Members are K-vectors stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastEnsemble {
    variables: Vec<String>,
    members: Vec<f64>,
    target: (usize, u8),
    pub meta: EnsembleMeta,
}

impl ForecastEnsemble {
    pub fn new(
        variables: Vec<String>,
        members: Vec<f64>,
        target: (usize, u8),
        meta: EnsembleMeta,
    ) -> Result<Self> {
        let k = variables.len();
        if k == 0 || members.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        if members.len() % k != 0 {
            return Err(Error::ShapeMismatch {
                expected: k * (members.len() / k + 1),
                got: members.len(),
            });
        }
        Ok(ForecastEnsemble {
            variables,
            members,
            target,
            meta,
        })
    }

    pub fn from_members(
        variables: Vec<String>,
        members: &[Vec<f64>],
        target: (usize, u8),
        meta: EnsembleMeta,
    ) -> Result<Self> {
        let k = variables.len();
        if let Some(m) = members.iter().find(|m| m.len() != k) {
            return Err(Error::ShapeMismatch {
                expected: k,
                got: m.len(),
            });
        }
        Self::new(variables, members.concat(), target, meta)
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == label)
    }

    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    pub fn len(&self) -> usize {
        self.members.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, i: usize) -> &[f64] {
        let k = self.dim();
        &self.members[i * k..(i + 1) * k]
    }

    pub fn members(&self) -> impl Iterator<Item = &[f64]> {
        self.members.chunks_exact(self.dim())
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.members().map(|m| m[k]).collect()
    }

    /// Target day index and delivery hour.
    pub fn target(&self) -> (usize, u8) {
        self.target
    }

    /// One row per member.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["member".to_string()];
        header.extend(self.variables.iter().cloned());
        w.write_record(&header)?;
        for (i, m) in self.members().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(m.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One estimation/calibration partition of a training sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitPlan {
    /// Sorted ascending.
    pub estimation: Vec<usize>,
    /// In draw order.
    pub calibration: Vec<usize>,
}

/// Size of the estimation part: `floor(ratio * n)`, kept within `1..n`.
pub fn estimation_size(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64 + 1e-9).floor() as usize).clamp(1, n.saturating_sub(1).max(1))
}

pub fn random_split<R: Rng + ?Sized>(sample: &[usize], ratio: f64, rng: &mut R) -> SplitPlan {
    assert!(sample.len() >= 2, "a split needs at least two days");
    assert!(ratio > 0.0 && ratio < 1.0, "split ratio {ratio} outside (0, 1)");
    let mut days = sample.to_vec();
    days.shuffle(rng);
    let calibration = days.split_off(estimation_size(sample.len(), ratio));
    days.sort_unstable();
    SplitPlan {
        estimation: days,
        calibration,
    }
}

fn check_models(models: &[&DesignMatrix]) -> Result<u8> {
    let first = models.first().ok_or(Error::EmptyEnsemble)?;
    let hour = first.spec().hour;
    if models.iter().any(|m| m.spec().hour != hour) {
        return Err(Error::Misaligned("joint models must share the delivery hour".into()));
    }
    Ok(hour)
}

fn labels(models: &[&DesignMatrix]) -> Vec<String> {
    models.iter().map(|m| m.spec().kind.code().to_string()).collect()
}

fn forecast_on(design: &DesignMatrix, fit_days: &[usize], day: usize) -> Result<f64> {
    design.check_days(&[day])?;
    let coef = fit_spec(design, fit_days)?;
    dot(&coef.beta, design.row(day))
}

/// Rolling one-step errors `Y_t - Yhat_t`, where `Yhat_t` is fitted on the
/// `inner` days before `t`.
pub fn rolling_errors(design: &DesignMatrix, days: Range<usize>, inner: usize) -> Result<Vec<f64>> {
    days.map(|t| {
        if t < inner {
            return Err(Error::InsufficientHistory(format!("day {t} has no {inner}-day window")));
        }
        let window: Vec<usize> = (t - inner..t).collect();
        Ok(design.target(t) - forecast_on(design, &window, t)?)
    })
    .collect()
}

/// Assembles a historical-simulation ensemble from target point forecasts and
/// per-variable error series of equal length.
pub fn historical_from_errors(
    variables: Vec<String>,
    points: &[f64],
    errors: &[&[f64]],
    target: (usize, u8),
    meta: EnsembleMeta,
) -> Result<ForecastEnsemble> {
    let k = variables.len();
    if points.len() != k || errors.len() != k {
        return Err(Error::ShapeMismatch {
            expected: k,
            got: points.len().min(errors.len()),
        });
    }
    let n = errors[0].len();
    if errors.iter().any(|e| e.len() != n) {
        return Err(Error::Misaligned("error series differ in length".into()));
    }
    let mut members = Vec::with_capacity(n * k);
    for j in 0..n {
        members.extend((0..k).map(|v| points[v] + errors[v][j]));
    }
    ForecastEnsemble::new(variables, members, target, meta)
}

/// Historical simulation: point forecast of the target plus every rolling
/// error vector inside `train` that has `inner` days of history in `train`.
pub fn historical_ensemble(
    models: &[&DesignMatrix],
    train: Range<usize>,
    target: usize,
    inner: usize,
) -> Result<ForecastEnsemble> {
    let hour = check_models(models)?;
    if inner == 0 || train.len() <= inner {
        return Err(Error::InsufficientHistory(format!(
            "training window of {} days cannot hold a {inner}-day inner window",
            train.len()
        )));
    }
    let last: Vec<usize> = (train.end - inner..train.end).collect();
    let points = models
        .iter()
        .map(|m| forecast_on(m, &last, target))
        .collect::<Result<Vec<_>>>()?;
    let errors = models
        .iter()
        .map(|m| rolling_errors(m, train.start + inner..train.end, inner))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&[f64]> = errors.iter().map(Vec::as_slice).collect();
    let meta = EnsembleMeta {
        method: "HS".into(),
        splits: 0,
        window: (train.start, train.end - 1),
        seed: None,
        note: format!("inner window {inner}"),
    };
    historical_from_errors(labels(models), &points, &refs, (target, hour), meta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitMode {
    /// One split plan per repetition, shared by all variables.
    Correlated,
    /// Independent plans per variable.
    Uncorrelated,
}

/// Pools `N` split ensembles. Split `i` draws from `seed.child(i)`
/// (and `seed.path([i, k + 1])` for variable `k` in uncorrelated mode).
pub fn multiple_split_ensemble(
    models: &[&DesignMatrix],
    sample: &[usize],
    target: usize,
    n_splits: usize,
    ratio: f64,
    mode: SplitMode,
    seed: SeedPath,
) -> Result<ForecastEnsemble> {
    let hour = check_models(models)?;
    if n_splits == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if sample.len() < 2 {
        return Err(Error::InsufficientHistory("training sample has fewer than 2 days".into()));
    }
    if sample.iter().any(|&d| d >= target) {
        return Err(Error::Misaligned("training sample must precede the target day".into()));
    }
    let k = models.len();
    let per_split = (0..n_splits)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let plans: Vec<SplitPlan> = match mode {
                SplitMode::Correlated => {
                    let plan = random_split(sample, ratio, &mut seed.child(i as u64).rng());
                    vec![plan; k]
                }
                SplitMode::Uncorrelated => (0..k)
                    .map(|v| random_split(sample, ratio, &mut seed.path(&[i as u64, v as u64 + 1]).rng()))
                    .collect(),
            };
            let mut columns = Vec::with_capacity(k);
            for (m, plan) in models.iter().zip(&plans) {
                m.check_days(&[target])?;
                let coef = fit_spec(m, &plan.estimation).map_err(|e| e.in_split(i))?;
                let point = dot(&coef.beta, m.row(target))?;
                let col = plan
                    .calibration
                    .iter()
                    .map(|&t| Ok(point + m.target(t) - dot(&coef.beta, m.row(t))?))
                    .collect::<Result<Vec<f64>>>()?;
                columns.push(col);
            }
            let n = columns[0].len();
            let mut members = Vec::with_capacity(n * k);
            for j in 0..n {
                members.extend(columns.iter().map(|c| c[j]));
            }
            Ok(members)
        })
        .collect::<Result<Vec<_>>>()?;
    let tag = match mode {
        SplitMode::Correlated => "MS",
        SplitMode::Uncorrelated => "MS-U",
    };
    let meta = EnsembleMeta {
        method: format!("{tag}({n_splits})"),
        splits: n_splits,
        window: (
            *sample.iter().min().expect("non-empty"),
            *sample.iter().max().expect("non-empty"),
        ),
        seed: Some(seed.master()),
        note: "splits redrawn per target day".into(),
    };
    ForecastEnsemble::new(labels(models), per_split.concat(), (target, hour), meta)
}

/// Applies `f` to every member.
pub fn map_ensemble<F>(ens: &ForecastEnsemble, labels: Vec<String>, f: F) -> Result<ForecastEnsemble>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let j = labels.len();
    let mut members = Vec::with_capacity(ens.len() * j);
    for m in ens.members() {
        let out = f(m);
        if out.len() != j {
            return Err(Error::ShapeMismatch {
                expected: j,
                got: out.len(),
            });
        }
        members.extend(out);
    }
    ForecastEnsemble::new(labels, members, ens.target, ens.meta.clone())
}

/// 0-based index of the lower order statistic and the interpolation weight
/// for the 1-based position `1 + (n - 1) tau`.
fn position(n: usize, tau: f64) -> (usize, f64) {
    let h = 1.0 + (n - 1) as f64 * tau;
    let lo = h.floor();
    ((lo as usize - 1).min(n - 1), h - lo)
}

/// Interpolated order statistic of already sorted values.
pub fn sorted_quantile(sorted: &[f64], tau: f64) -> f64 {
    let (lo, frac) = position(sorted.len(), tau);
    if frac == 0.0 || lo + 1 >= sorted.len() {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

pub fn empirical_quantile(values: &[f64], tau: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Misaligned(format!("quantile level {tau} outside [0, 1]")));
    }
    let mut v = values.to_vec();
    let (lo, frac) = position(v.len(), tau);
    let (_, &mut a, rest) = v.select_nth_unstable_by(lo, f64::total_cmp);
    if frac == 0.0 || rest.is_empty() {
        return Ok(a);
    }
    let b = rest.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(a + frac * (b - a))
}

pub fn ensemble_quantile(ens: &ForecastEnsemble, k: usize, tau: f64) -> Result<f64> {
    empirical_quantile(&ens.column(k), tau)
}

pub fn ensemble_interval(ens: &ForecastEnsemble, k: usize, alpha: f64) -> Result<PredictionInterval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::UnsupportedAlpha(alpha));
    }
    let mut col = ens.column(k);
    col.sort_by(f64::total_cmp);
    Ok(PredictionInterval {
        lower: sorted_quantile(&col, alpha / 2.0),
        upper: sorted_quantile(&col, 1.0 - alpha / 2.0),
        nominal: 1.0 - alpha,
    })
}
