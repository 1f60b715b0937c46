//! Coverage, Kupiec tests, CRPS and rank-histogram reliability.

use rand::Rng;
use rayon::prelude::*;

use crate::ensemble::{sorted_quantile, ForecastEnsemble};
use crate::error::{Error, Result};
use crate::quantreg::{percentile, pinball, PredictionInterval, QuantileFan, PERCENTILES};
use crate::rng::SeedPath;

/// 95% quantile of the chi-square distribution with one degree of freedom.
pub const KUPIEC_CRITICAL: f64 = 3.841459;

/// Default number of rank-histogram bins.
pub const RANK_BINS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kupiec {
    pub lr: f64,
    pub reject: bool,
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Proportion-of-failures likelihood-ratio test of `hits / n == nominal`.
pub fn kupiec(hits: usize, n: usize, nominal: f64) -> Kupiec {
    assert!(n >= 1 && hits <= n, "kupiec needs 0 <= hits <= n and n >= 1");
    let (x, n) = (hits as f64, n as f64);
    let p_hat = x / n;
    if p_hat == nominal {
        return Kupiec { lr: 0.0, reject: false };
    }
    let lr = 2.0 * (xlogy(n - x, (1.0 - p_hat) / (1.0 - nominal)) + xlogy(x, p_hat / nominal));
    let lr = lr.max(0.0);
    Kupiec {
        lr,
        reject: lr > KUPIEC_CRITICAL,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HourCoverage {
    pub hour: u8,
    pub hits: usize,
    pub n: usize,
    pub picp: f64,
    pub kupiec: Kupiec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageReport {
    pub nominal: f64,
    pub hours: Vec<HourCoverage>,
    /// Mean of the hourly values.
    pub picp: f64,
    /// Share of hours where the Kupiec test does not reject at 5%.
    pub kupiec_pass_rate: f64,
}

/// Coverage of closed intervals. `intervals[i]` and `realized[i]` hold the
/// series of delivery hour `i + 1`.
pub fn picp(intervals: &[Vec<PredictionInterval>], realized: &[Vec<f64>]) -> Result<CoverageReport> {
    if intervals.is_empty() || intervals.len() != realized.len() {
        return Err(Error::Misaligned(format!(
            "{} interval series for {} observation series",
            intervals.len(),
            realized.len()
        )));
    }
    let nominal = intervals
        .iter()
        .flatten()
        .next()
        .map(|pi| pi.nominal)
        .ok_or_else(|| Error::Misaligned("no intervals".into()))?;
    let mut hours = Vec::with_capacity(intervals.len());
    for (i, (pis, ys)) in intervals.iter().zip(realized).enumerate() {
        if pis.len() != ys.len() || pis.is_empty() {
            return Err(Error::Misaligned(format!(
                "hour {}: {} intervals for {} observations",
                i + 1,
                pis.len(),
                ys.len()
            )));
        }
        let hits = pis.iter().zip(ys).filter(|(pi, &y)| pi.contains(y)).count();
        hours.push(HourCoverage {
            hour: i as u8 + 1,
            hits,
            n: ys.len(),
            picp: hits as f64 / ys.len() as f64,
            kupiec: kupiec(hits, ys.len(), nominal),
        });
    }
    let count = hours.len() as f64;
    Ok(CoverageReport {
        nominal,
        picp: hours.iter().map(|h| h.picp).sum::<f64>() / count,
        kupiec_pass_rate: hours.iter().filter(|h| !h.kupiec.reject).count() as f64 / count,
        hours,
    })
}

/// Mean pinball score over the 99 fan percentiles.
pub fn crps_from_fan(fan: &QuantileFan, y: f64) -> f64 {
    crps_from_quantiles(fan.values(), y)
}

fn crps_from_quantiles(q: &[f64], y: f64) -> f64 {
    q.iter()
        .enumerate()
        .map(|(i, &v)| pinball(y, v, percentile(i)))
        .sum::<f64>()
        / PERCENTILES as f64
}

/// The 99 interpolated percentiles of one ensemble variable.
pub fn ensemble_percentiles(ens: &ForecastEnsemble, k: usize) -> Result<Vec<f64>> {
    if ens.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut col = ens.column(k);
    col.sort_by(f64::total_cmp);
    Ok((0..PERCENTILES).map(|i| sorted_quantile(&col, percentile(i))).collect())
}

pub fn crps_from_ensemble(ens: &ForecastEnsemble, k: usize, y: f64) -> Result<f64> {
    Ok(crps_from_quantiles(&ensemble_percentiles(ens, k)?, y))
}

/// Share of members not above `y`.
pub fn univariate_rank(ens: &ForecastEnsemble, k: usize, y: f64) -> f64 {
    ens.members().filter(|m| m[k] <= y).count() as f64 / ens.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankMode {
    Univariate,
    Multivariate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReliabilityReport {
    pub bins: usize,
    pub mode: RankMode,
    /// Bin frequencies per hour slot.
    pub frequencies: Vec<Vec<f64>>,
    pub per_hour: Vec<f64>,
    /// Mean of `per_hour`.
    pub overall: f64,
}

/// Bin `j` (0-based) covers `[j/M, (j+1)/M)`; the last bin is closed.
pub fn rank_bin(r: f64, bins: usize) -> usize {
    let m = bins as f64;
    let mut j = ((r * m).floor().max(0.0) as usize).min(bins - 1);
    while j > 0 && r < j as f64 / m {
        j -= 1;
    }
    while j + 1 < bins && r >= (j + 1) as f64 / m {
        j += 1;
    }
    j
}

/// `ranks[i]` holds the ranks observed for hour slot `i`.
pub fn reliability_index(ranks: &[Vec<f64>], bins: usize, mode: RankMode) -> Result<ReliabilityReport> {
    if bins < 2 {
        return Err(Error::Config(format!("rank histogram needs at least 2 bins, got {bins}")));
    }
    if ranks.is_empty() || ranks.iter().any(Vec::is_empty) {
        return Err(Error::Misaligned("every hour needs at least one rank".into()));
    }
    let mut frequencies = Vec::with_capacity(ranks.len());
    let mut per_hour = Vec::with_capacity(ranks.len());
    for rs in ranks {
        let mut counts = vec![0usize; bins];
        for &r in rs {
            counts[rank_bin(r, bins)] += 1;
        }
        // sum |c_j / n - 1/M| evaluated as sum |c_j M - n| / (n M) in integers
        let n = rs.len();
        let l1: usize = counts.iter().map(|&c| (c * bins).abs_diff(n)).sum();
        per_hour.push(l1 as f64 / (n * bins) as f64);
        frequencies.push(counts.iter().map(|&c| c as f64 / n as f64).collect());
    }
    Ok(ReliabilityReport {
        bins,
        mode,
        overall: per_hour.iter().sum::<f64>() / per_hour.len() as f64,
        frequencies,
        per_hour,
    })
}

/// Randomized multivariate rank of `y0` among the ensemble members, in [0, 1].
pub fn multivariate_rank<R: Rng + ?Sized>(ens: &ForecastEnsemble, y0: &[f64], rng: &mut R) -> Result<f64> {
    let k = ens.dim();
    if y0.len() != k {
        return Err(Error::ShapeMismatch { expected: k, got: y0.len() });
    }
    let m = ens.len();
    let point = |i: usize| if i < m { ens.member(i) } else { y0 };

    // order by the first coordinate; only elements up to a point's first
    // coordinate can be dominated by it
    let mut order: Vec<usize> = (0..=m).collect();
    order.sort_by(|&a, &b| point(a)[0].total_cmp(&point(b)[0]));
    let firsts: Vec<f64> = order.iter().map(|&i| point(i)[0]).collect();
    let rest = k - 1;
    let mut tails = Vec::with_capacity((m + 1) * rest);
    for &i in &order {
        tails.extend_from_slice(&point(i)[1..]);
    }
    let pre_rank = |j: usize| -> usize {
        let p = point(j);
        let end = firsts.partition_point(|&v| v <= p[0]);
        if rest == 0 {
            return end;
        }
        tails[..end * rest]
            .chunks_exact(rest)
            .filter(|t| t.iter().zip(&p[1..]).all(|(a, b)| a <= b))
            .count()
    };
    let rho0 = pre_rank(m);
    let (mut below, mut ties) = (0usize, 1usize);
    for j in 0..m {
        let rho = pre_rank(j);
        if rho < rho0 {
            below += 1;
        } else if rho == rho0 {
            ties += 1;
        }
    }
    let r = rng.random_range(below + 1..=below + ties);
    Ok((r - 1) as f64 / m as f64)
}

/// One scored target: hour, ensemble and realized vector.
pub type RankedTarget<'a> = (u8, &'a ForecastEnsemble, &'a [f64]);

/// Multivariate ranks (observation `i` draws from `seed.child(i)`) binned by hour.
pub fn multivariate_reliability(
    targets: &[RankedTarget<'_>],
    bins: usize,
    seed: SeedPath,
) -> Result<ReliabilityReport> {
    let ranks = targets
        .par_iter()
        .enumerate()
        .map(|(i, (hour, ens, y))| Ok((*hour, multivariate_rank(ens, y, &mut seed.child(i as u64).rng())?)))
        .collect::<Result<Vec<_>>>()?;
    reliability_index(&group_by_hour(&ranks), bins, RankMode::Multivariate)
}

/// Collects `(hour, value)` pairs into per-hour series in ascending hour order.
pub fn group_by_hour(values: &[(u8, f64)]) -> Vec<Vec<f64>> {
    let mut hours: Vec<u8> = values.iter().map(|v| v.0).collect();
    hours.sort_unstable();
    hours.dedup();
    hours
        .iter()
        .map(|&h| values.iter().filter(|v| v.0 == h).map(|v| v.1).collect())
        .collect()
}
