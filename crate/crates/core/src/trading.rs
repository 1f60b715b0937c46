//! Bidding strategies for a price-taking wind producer.
//!
//! A fraction `q` of the forecasted generation is offered day-ahead and the
//! rest of the realized output is settled intraday. Profits are per MWh of
//! realized generation.

use crate::ensemble::{empirical_quantile, ForecastEnsemble};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ProfitParams {
    /// Operations and maintenance cost, EUR/MWh.
    pub c_om: f64,
    pub q_grid: Vec<f64>,
    /// Quantile threshold of the stopping rule; `None` never curtails.
    pub stopping_tau: Option<f64>,
    /// Generation at or below this level counts as zero output.
    pub w_floor: f64,
}

impl Default for ProfitParams {
    fn default() -> Self {
        ProfitParams {
            c_om: 10.0,
            q_grid: (0..=100).map(|i| i as f64 / 100.0).collect(),
            stopping_tau: None,
            w_floor: 0.0,
        }
    }
}

impl ProfitParams {
    pub fn validate(&self) -> Result<()> {
        let g = &self.q_grid;
        if g.first() != Some(&0.0) || g.last() != Some(&1.0) {
            return Err(Error::Config("q grid must start at 0 and end at 1".into()));
        }
        if g.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("q grid must be strictly increasing".into()));
        }
        if let Some(tau) = self.stopping_tau {
            if !(tau > 0.0 && tau <= 1.0) {
                return Err(Error::Config(format!("stopping quantile {tau} outside (0, 1]")));
            }
        }
        if !self.c_om.is_finite() || !self.w_floor.is_finite() {
            return Err(Error::Config("costs and floors must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Naive,
    LimitedBid,
    Epi,
    VaR,
    SR,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Naive,
        Strategy::LimitedBid,
        Strategy::Epi,
        Strategy::VaR,
        Strategy::SR,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Strategy::Naive => "Naive",
            Strategy::LimitedBid => "LimitedBid",
            Strategy::Epi => "Epi",
            Strategy::VaR => "VaR",
            Strategy::SR => "SR",
        }
    }

    pub fn is_data_driven(self) -> bool {
        matches!(self, Strategy::Epi | Strategy::VaR | Strategy::SR)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TradeDecision {
    pub strategy: Strategy,
    pub q_star: f64,
    pub curtail: bool,
    /// Criterion value at `q_star` (NaN for naive rules).
    pub criterion: f64,
    /// SR had zero spread at every q and fell back to the median rule.
    pub degenerate_sr: bool,
}

/// Profit per MWh of realized generation; zero when `w` is at or below the floor.
pub fn profit_per_mwh(q: f64, w_hat: f64, w: f64, da: f64, id: f64, params: &ProfitParams) -> f64 {
    if w <= params.w_floor {
        return 0.0;
    }
    // q w_hat DA + (1 - q w_hat) ID - C, rearranged so DA == ID cancels exactly
    id + q * (w_hat / w) * (da - id) - params.c_om
}

/// Total profit of an hour, EUR.
pub fn total_profit(q: f64, w_hat: f64, w: f64, da: f64, id: f64, c_om: f64) -> f64 {
    q * w_hat * da + (w - q * w_hat) * id - w * c_om
}

/// Per-member profit as `a + q b`, so pools for every q share one pass.
#[derive(Clone, Debug)]
pub struct ProfitPool {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl ProfitPool {
    pub fn new(ens: &ForecastEnsemble, w_hat: f64, params: &ProfitParams) -> Result<ProfitPool> {
        let idx = |label: &str| {
            ens.index_of(label)
                .ok_or_else(|| Error::Misaligned(format!("ensemble has no `{label}` variable")))
        };
        let (da, id, w) = (idx("DA")?, idx("ID")?, idx("W")?);
        let n = ens.len();
        let (mut a, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for m in ens.members() {
            if m[w] <= params.w_floor {
                a.push(0.0);
                b.push(0.0);
            } else {
                a.push(m[id] - params.c_om);
                b.push(w_hat / m[w] * (m[da] - m[id]));
            }
        }
        Ok(ProfitPool { a, b })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn at(&self, q: f64) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(a, b)| a + q * b).collect()
    }
}

/// The one-dimensional profit ensemble for a fixed `q`.
pub fn profit_ensemble(ens: &ForecastEnsemble, w_hat: f64, q: f64, params: &ProfitParams) -> Result<ForecastEnsemble> {
    let pool = ProfitPool::new(ens, w_hat, params)?;
    ForecastEnsemble::new(vec!["PI".into()], pool.at(q), ens.target(), ens.meta.clone())
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Scans the grid; ties go to the smallest q.
pub fn choose_q(strategy: Strategy, grid: &[f64], pools: &[Vec<f64>]) -> Result<TradeDecision> {
    if !strategy.is_data_driven() {
        return Err(Error::Config(format!("{} does not optimize q", strategy.code())));
    }
    if grid.len() != pools.len() || grid.is_empty() {
        return Err(Error::ShapeMismatch {
            expected: grid.len(),
            got: pools.len(),
        });
    }
    let argmax = |crit: &dyn Fn(&[f64]) -> Result<f64>| -> Result<(usize, f64)> {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, p) in pools.iter().enumerate() {
            let c = crit(p)?;
            if c > best.1 {
                best = (i, c);
            }
        }
        Ok(best)
    };
    let median = |p: &[f64]| empirical_quantile(p, 0.5);
    let mut degenerate_sr = false;
    let (i, c) = match strategy {
        Strategy::Epi => argmax(&median)?,
        Strategy::VaR => argmax(&|p| empirical_quantile(p, 0.05))?,
        _ => {
            if pools.iter().any(Vec::is_empty) {
                return Err(Error::EmptyEnsemble);
            }
            if pools.iter().all(|p| mean_sd(p).1 == 0.0) {
                degenerate_sr = true;
                argmax(&median)?
            } else {
                argmax(&|p| {
                    let (m, s) = mean_sd(p);
                    Ok(if s > 0.0 { m / s } else { f64::NEG_INFINITY })
                })?
            }
        }
    };
    Ok(TradeDecision {
        strategy,
        q_star: grid[i],
        curtail: false,
        criterion: c,
        degenerate_sr,
    })
}

/// Curtails when the `tau` quantile of the chosen profit pool is negative.
/// `tau = 1` never curtails.
pub fn stopping_rule(decision: TradeDecision, pool: &[f64], tau: f64) -> Result<TradeDecision> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Config(format!("stopping quantile {tau} outside (0, 1]")));
    }
    if tau == 1.0 {
        return Ok(TradeDecision { curtail: false, ..decision });
    }
    Ok(TradeDecision {
        curtail: empirical_quantile(pool, tau)? < 0.0,
        ..decision
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NaiveMode {
    Unlimited,
    LimitedBid,
}

pub fn naive_decision(mode: NaiveMode, realized_da: f64) -> TradeDecision {
    let (strategy, curtail) = match mode {
        NaiveMode::Unlimited => (Strategy::Naive, false),
        NaiveMode::LimitedBid => (Strategy::LimitedBid, realized_da < 0.0),
    };
    TradeDecision {
        strategy,
        q_star: 1.0,
        curtail,
        criterion: f64::NAN,
        degenerate_sr: false,
    }
}

/// Realized market outcome of one hour.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Realized {
    pub da: f64,
    pub id: f64,
    pub w: f64,
    pub w_hat: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategyOutcome {
    /// Realized profit per hour; curtailed hours are 0.
    pub per_hour: Vec<f64>,
    pub average_profit: f64,
    /// `None` when nothing was traded.
    pub profit_per_trade: Option<f64>,
    pub trade_frequency: f64,
    /// 5% quantile of traded-hour profits.
    pub var5: Option<f64>,
}

pub fn evaluate_strategy(
    decisions: &[TradeDecision],
    realized: &[Realized],
    params: &ProfitParams,
) -> Result<StrategyOutcome> {
    if decisions.len() != realized.len() || decisions.is_empty() {
        return Err(Error::Misaligned(format!(
            "{} decisions for {} realized hours",
            decisions.len(),
            realized.len()
        )));
    }
    let mut per_hour = Vec::with_capacity(decisions.len());
    let mut traded = Vec::new();
    for (d, r) in decisions.iter().zip(realized) {
        if d.curtail {
            per_hour.push(0.0);
        } else {
            let p = profit_per_mwh(d.q_star, r.w_hat, r.w, r.da, r.id, params);
            per_hour.push(p);
            traded.push(p);
        }
    }
    let n = per_hour.len() as f64;
    let (profit_per_trade, var5) = if traded.is_empty() {
        (None, None)
    } else {
        (
            Some(traded.iter().sum::<f64>() / traded.len() as f64),
            Some(empirical_quantile(&traded, 0.05)?),
        )
    };
    Ok(StrategyOutcome {
        average_profit: per_hour.iter().sum::<f64>() / n,
        trade_frequency: traded.len() as f64 / n,
        profit_per_trade,
        var5,
        per_hour,
    })
}

/// `(value - benchmark) / benchmark`.
pub fn relative_to(benchmark: f64, value: f64) -> f64 {
    (value - benchmark) / benchmark
}

/// Chooses q on the pool grid, then applies the stopping rule if configured.
pub fn decide(strategy: Strategy, pool: &ProfitPool, params: &ProfitParams) -> Result<TradeDecision> {
    let pools: Vec<Vec<f64>> = params.q_grid.iter().map(|&q| pool.at(q)).collect();
    let d = choose_q(strategy, &params.q_grid, &pools)?;
    match params.stopping_tau {
        Some(tau) => stopping_rule(d, &pool.at(d.q_star), tau),
        None => Ok(d),
    }
}
