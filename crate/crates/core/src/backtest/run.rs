use std::ops::Range;

use chrono::NaiveDate;
use rayon::prelude::*;

use super::config::{ExperimentConfig, Method};
use crate::data::{ModelData, FORECAST_HOUR, HOURS};
use crate::design::{DesignMatrix, ModelKind, ModelSpec};
use crate::ensemble::{
    historical_from_errors, map_ensemble, multiple_split_ensemble, rolling_errors, sorted_quantile,
    EnsembleMeta, ForecastEnsemble,
};
use crate::error::{Error, Result};
use crate::evaluation::{crps_from_fan, multivariate_rank, univariate_rank};
use crate::ols::{dot, fit_spec};
use crate::quantreg::{fit_quantiles, grid_index, percentile, PredictionInterval, QuantileFan, PERCENTILES};
use crate::rng::SeedPath;
use crate::trading::{
    choose_q, naive_decision, profit_per_mwh, stopping_rule, NaiveMode, ProfitPool, Realized, Strategy,
};

const MV_RANK_STREAM: u64 = 0x4d56;

#[derive(Clone, Debug, PartialEq)]
pub struct VariableForecast {
    pub variable: ModelKind,
    pub method: Method,
    /// Percentiles 0.01..=0.99.
    pub percentiles: Vec<f64>,
    /// One interval per configured coverage level.
    pub intervals: Vec<PredictionInterval>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariableScore {
    pub realized: f64,
    pub crps: f64,
    /// Univariate rank, ensemble methods only.
    pub rank: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleRecord {
    pub method: Method,
    pub members: usize,
    pub meta: EnsembleMeta,
    pub mv_rank: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionRecord {
    pub strategy: Strategy,
    pub q_star: f64,
    pub criterion: f64,
    pub degenerate_sr: bool,
    /// Curtailment per stopping quantile (a single entry for naive rules).
    pub curtail: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TradingRecord {
    pub realized: Realized,
    pub decisions: Vec<DecisionRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HourResult {
    pub hour: u8,
    /// Point forecasts in [`ModelKind::ALL`] order.
    pub points: Vec<f64>,
    pub realized: Vec<f64>,
    pub forecasts: Vec<VariableForecast>,
    pub scores: Vec<VariableScore>,
    pub ensembles: Vec<EnsembleRecord>,
    pub trading: Option<TradingRecord>,
}

/// Everything of an [`HourResult`] that is decided before delivery.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastView {
    pub points: Vec<f64>,
    pub forecasts: Vec<VariableForecast>,
    pub ensembles: Vec<(Method, usize, EnsembleMeta)>,
    pub w_hat: Option<f64>,
    pub decisions: Vec<DecisionRecord>,
}

impl HourResult {
    pub fn forecast_view(&self) -> ForecastView {
        ForecastView {
            points: self.points.clone(),
            forecasts: self.forecasts.clone(),
            ensembles: self
                .ensembles
                .iter()
                .map(|e| (e.method, e.members, e.meta.clone()))
                .collect(),
            w_hat: self.trading.as_ref().map(|t| t.realized.w_hat),
            decisions: self
                .trading
                .iter()
                .flat_map(|t| t.decisions.iter())
                .filter(|d| d.strategy.is_data_driven())
                .cloned()
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DayResult {
    pub day: usize,
    pub date: NaiveDate,
    pub hours: Vec<HourResult>,
}

/// Prepared experiment: design matrices and cached historical errors.
pub struct Backtest<'a> {
    config: &'a ExperimentConfig,
    data: &'a ModelData,
    eval_days: Range<usize>,
    evaluated: Vec<ModelKind>,
    /// `[kind][hour - 1]` over [`ModelKind::ALL`].
    designs: Vec<Vec<DesignMatrix>>,
    /// Spread on the day-ahead regressor list, `[hour - 1]`.
    spread_qr: Vec<DesignMatrix>,
    /// `[variable][hour - 1]`: first day and rolling errors from it on.
    hs_errors: Vec<Vec<(usize, Vec<f64>)>>,
    qr_extra: Vec<f64>,
}

fn kind_index(kind: ModelKind) -> usize {
    ModelKind::ALL.iter().position(|&k| k == kind).expect("known kind")
}

impl<'a> Backtest<'a> {
    pub fn new(config: &'a ExperimentConfig, data: &'a ModelData) -> Result<Self> {
        config.validate()?;
        let t = config.calibration_window;
        let first = match config.first_evaluation_date {
            Some(date) => data
                .panel
                .day_of(date)
                .ok_or_else(|| Error::Config(format!("first evaluation date {date} is not in the panel")))?,
            None => data.days().checked_sub(config.evaluation_days).ok_or_else(|| {
                Error::InsufficientHistory(format!(
                    "panel has {} days, fewer than {} evaluation days",
                    data.days(),
                    config.evaluation_days
                ))
            })?,
        };
        let eval_days = first..first + config.evaluation_days;
        if eval_days.end > data.days() {
            return Err(Error::InsufficientHistory(format!(
                "evaluation period needs {} days after {}, panel ends earlier",
                config.evaluation_days,
                data.date(first)
            )));
        }
        if first < t + 8 {
            return Err(Error::InsufficientHistory(format!(
                "a {t}-day calibration window needs {} days before the first evaluation day, found {first}",
                t + 8
            )));
        }

        let designs: Vec<Vec<DesignMatrix>> = ModelKind::ALL
            .par_iter()
            .map(|&kind| {
                (1..=HOURS as u8)
                    .map(|h| DesignMatrix::build(ModelSpec::new(kind, h), data))
                    .collect()
            })
            .collect();
        let spread_qr = (1..=HOURS as u8)
            .into_par_iter()
            .map(|h| DesignMatrix::for_quantiles(ModelSpec::new(ModelKind::Spread, h), data))
            .collect();

        let mut qr_extra = Vec::new();
        for level in &config.levels {
            let alpha = 1.0 - level;
            for tau in [alpha / 2.0, 1.0 - alpha / 2.0] {
                if grid_index(tau).is_none() && !qr_extra.contains(&tau) {
                    qr_extra.push(tau);
                }
            }
        }

        let mut bt = Backtest {
            config,
            data,
            eval_days,
            evaluated: config.evaluated_variables(),
            designs,
            spread_qr,
            hs_errors: Vec::new(),
            qr_extra,
        };
        if config.methods.contains(&Method::Hs) {
            bt.hs_errors = bt.historical_errors()?;
        }
        Ok(bt)
    }

    pub fn evaluation_days(&self) -> Range<usize> {
        self.eval_days.clone()
    }

    fn design(&self, kind: ModelKind, hour: u8) -> &DesignMatrix {
        &self.designs[kind_index(kind)][hour as usize - 1]
    }

    fn qr_design(&self, kind: ModelKind, hour: u8) -> &DesignMatrix {
        if kind.quantile_design() != kind {
            &self.spread_qr[hour as usize - 1]
        } else {
            self.design(kind, hour)
        }
    }

    /// Training days for target `day` and `hour`: the last realized value of
    /// the hour is known on the previous day only up to the forecast hour.
    pub fn sample(&self, day: usize, hour: u8) -> Range<usize> {
        let last = if hour <= FORECAST_HOUR { day - 1 } else { day - 2 };
        last + 1 - self.config.calibration_window..last + 1
    }

    fn inner_window(&self) -> usize {
        self.config.calibration_window / 2
    }

    fn historical_errors(&self) -> Result<Vec<Vec<(usize, Vec<f64>)>>> {
        let inner = self.inner_window();
        let last_day = self.eval_days.end - 1;
        self.config
            .variables
            .iter()
            .map(|&kind| {
                (1..=HOURS as u8)
                    .map(|h| {
                        let start = self.sample(self.eval_days.start, h).start + inner;
                        let end = self.sample(last_day, h).end;
                        let design = self.design(kind, h);
                        let errors = (start..end)
                            .into_par_iter()
                            .map(|t| {
                                rolling_errors(design, t..t + 1, inner)
                                    .map(|e| e[0])
                                    .map_err(|e| e.at_target(self.data.date(t), h, format!("HS errors {kind}")))
                            })
                            .collect::<Result<Vec<f64>>>()?;
                        Ok((start, errors))
                    })
                    .collect()
            })
            .collect()
    }

    fn historical(&self, day: usize, hour: u8) -> Result<ForecastEnsemble> {
        let inner = self.inner_window();
        let s = self.sample(day, hour);
        let last: Vec<usize> = (s.end - inner..s.end).collect();
        let mut points = Vec::with_capacity(self.config.variables.len());
        let mut slices = Vec::with_capacity(self.config.variables.len());
        for (v, &kind) in self.config.variables.iter().enumerate() {
            let design = self.design(kind, hour);
            let coef = fit_spec(design, &last)?;
            points.push(dot(&coef.beta, design.row(day))?);
            let (first, errors) = &self.hs_errors[v][hour as usize - 1];
            slices.push(&errors[s.start + inner - first..s.end - first]);
        }
        let meta = EnsembleMeta {
            method: Method::Hs.label(),
            splits: 0,
            window: (s.start, s.end - 1),
            seed: None,
            note: format!("inner window {inner}"),
        };
        historical_from_errors(self.labels(&self.config.variables), &points, &slices, (day, hour), meta)
    }

    fn labels(&self, kinds: &[ModelKind]) -> Vec<String> {
        kinds.iter().map(|k| k.code().to_string()).collect()
    }

    fn build_ensemble(&self, method: Method, day: usize, hour: u8) -> Result<ForecastEnsemble> {
        let base = match method {
            Method::Qr => unreachable!("quantile regression has no ensemble"),
            Method::Hs => self.historical(day, hour)?,
            Method::Ms { splits, mode } => {
                let models: Vec<&DesignMatrix> =
                    self.config.variables.iter().map(|&k| self.design(k, hour)).collect();
                let sample: Vec<usize> = self.sample(day, hour).collect();
                // no hour in the stream: every hour of a target day shares the split positions
                let seed = SeedPath::new(self.config.seed).path(&[day as u64, method.stream_tag()]);
                multiple_split_ensemble(&models, &sample, day, splits, self.config.split_ratio, mode, seed)?
            }
        };
        let index = |k: ModelKind| self.config.variables.iter().position(|&v| v == k);
        let sources: Vec<Box<dyn Fn(&[f64]) -> f64>> = self
            .evaluated
            .iter()
            .map(|&k| -> Box<dyn Fn(&[f64]) -> f64> {
                match (index(k), k) {
                    (Some(i), _) => Box::new(move |m: &[f64]| m[i]),
                    (None, ModelKind::Spread) => {
                        let (a, b) = (index(ModelKind::DayAhead).unwrap(), index(ModelKind::Intraday).unwrap());
                        Box::new(move |m: &[f64]| m[a] - m[b])
                    }
                    (None, _) => {
                        let (a, b) = (index(ModelKind::Load).unwrap(), index(ModelKind::Res).unwrap());
                        Box::new(move |m: &[f64]| m[a] - m[b])
                    }
                }
            })
            .collect();
        map_ensemble(&base, self.labels(&self.evaluated), |m| sources.iter().map(|f| f(m)).collect())
    }

    fn intervals_from_sorted(&self, sorted: &[f64]) -> Vec<PredictionInterval> {
        self.config
            .levels
            .iter()
            .map(|&level| {
                let alpha = 1.0 - level;
                PredictionInterval {
                    lower: sorted_quantile(sorted, alpha / 2.0),
                    upper: sorted_quantile(sorted, 1.0 - alpha / 2.0),
                    nominal: level,
                }
            })
            .collect()
    }

    fn quantile_forecast(&self, kind: ModelKind, day: usize, hour: u8) -> Result<VariableForecast> {
        let design = self.qr_design(kind, hour);
        let sample: Vec<usize> = self.sample(day, hour).collect();
        let model = fit_quantiles(design, &sample, &self.qr_extra)?;
        let raw = model.predict(design.row(day))?;
        // rearrange all levels jointly
        let mut order: Vec<usize> = (0..model.taus.len()).collect();
        order.sort_by(|&a, &b| model.taus[a].total_cmp(&model.taus[b]));
        let mut values: Vec<f64> = raw.clone();
        values.sort_by(f64::total_cmp);
        let at = |tau: f64| -> f64 {
            let pos = order.iter().position(|&i| model.taus[i] == tau).expect("fitted level");
            values[pos]
        };
        let fan = QuantileFan::from_raw((0..PERCENTILES).map(|i| at(percentile(i))).collect())?;
        let intervals = self
            .config
            .levels
            .iter()
            .map(|&level| {
                let alpha = 1.0 - level;
                let pick = |tau: f64| match grid_index(tau) {
                    Some(i) => fan.values()[i],
                    None => at(tau),
                };
                PredictionInterval {
                    lower: pick(alpha / 2.0),
                    upper: pick(1.0 - alpha / 2.0),
                    nominal: level,
                }
            })
            .collect();
        Ok(VariableForecast {
            variable: kind,
            method: Method::Qr,
            percentiles: fan.values().to_vec(),
            intervals,
        })
    }

    fn hour(&self, day: usize, hour: u8) -> Result<HourResult> {
        let date = self.data.date(day);
        let ctx = |what: String| move |e: Error| e.at_target(date, hour, what);
        let sample: Vec<usize> = self.sample(day, hour).collect();

        let mut points = Vec::with_capacity(ModelKind::ALL.len());
        let mut realized = Vec::with_capacity(ModelKind::ALL.len());
        for kind in ModelKind::ALL {
            let design = self.design(kind, hour);
            let coef = fit_spec(design, &sample).map_err(ctx(format!("point {kind}")))?;
            points.push(dot(&coef.beta, design.row(day))?);
            realized.push(design.target(day));
        }
        let actual = |k: ModelKind| realized[kind_index(k)];

        let mut forecasts = Vec::new();
        let mut scores = Vec::new();
        let mut ensembles = Vec::new();
        let mut trading_ens = None;
        let trading_method = if self.config.trades() { self.config.trading_ensemble() } else { None };
        for &method in &self.config.methods {
            if method == Method::Qr {
                for &kind in &self.evaluated {
                    let f = self
                        .quantile_forecast(kind, day, hour)
                        .map_err(ctx(format!("QR {kind}")))?;
                    let fan = QuantileFan::from_raw(f.percentiles.clone())?;
                    scores.push(VariableScore {
                        realized: actual(kind),
                        crps: crps_from_fan(&fan, actual(kind)),
                        rank: None,
                    });
                    forecasts.push(f);
                }
                continue;
            }
            let ens = self
                .build_ensemble(method, day, hour)
                .map_err(ctx(method.label()))?;
            for (k, &kind) in self.evaluated.iter().enumerate() {
                let mut col = ens.column(k);
                col.sort_by(f64::total_cmp);
                let percentiles: Vec<f64> = (0..PERCENTILES).map(|i| sorted_quantile(&col, percentile(i))).collect();
                let y = actual(kind);
                scores.push(VariableScore {
                    realized: y,
                    crps: crps_from_fan(&QuantileFan::from_raw(percentiles.clone())?, y),
                    rank: Some(univariate_rank(&ens, k, y)),
                });
                forecasts.push(VariableForecast {
                    variable: kind,
                    method,
                    intervals: self.intervals_from_sorted(&col),
                    percentiles,
                });
            }
            let mv_rank = if self.config.joint_variables.is_empty() {
                None
            } else {
                let idx: Vec<usize> = self
                    .config
                    .joint_variables
                    .iter()
                    .map(|j| self.evaluated.iter().position(|e| e == j).expect("validated"))
                    .collect();
                let joint = map_ensemble(&ens, self.labels(&self.config.joint_variables), |m| {
                    idx.iter().map(|&i| m[i]).collect()
                })?;
                let y0: Vec<f64> = self.config.joint_variables.iter().map(|&k| actual(k)).collect();
                let mut rng = SeedPath::new(self.config.seed)
                    .path(&[day as u64, hour as u64, method.stream_tag(), MV_RANK_STREAM])
                    .rng();
                Some(multivariate_rank(&joint, &y0, &mut rng)?)
            };
            ensembles.push(EnsembleRecord {
                method,
                members: ens.len(),
                meta: ens.meta.clone(),
                mv_rank,
            });
            if Some(method) == trading_method {
                trading_ens = Some(ens);
            }
        }

        let trading = match trading_ens {
            Some(ens) => Some(self.trade(&ens, &points, &actual).map_err(ctx("trading".into()))?),
            None => None,
        };
        Ok(HourResult {
            hour,
            points,
            realized,
            forecasts,
            scores,
            ensembles,
            trading,
        })
    }

    fn trade(
        &self,
        ens: &ForecastEnsemble,
        points: &[f64],
        actual: &dyn Fn(ModelKind) -> f64,
    ) -> Result<TradingRecord> {
        let params = &self.config.profit;
        let w_hat = points[kind_index(ModelKind::Wind)].max(0.0);
        let realized = Realized {
            da: actual(ModelKind::DayAhead),
            id: actual(ModelKind::Intraday),
            w: actual(ModelKind::Wind),
            w_hat,
        };
        let pool = ProfitPool::new(ens, w_hat, params)?;
        let mut pools: Option<Vec<Vec<f64>>> = None;
        let mut decisions = Vec::with_capacity(self.config.strategies.len());
        for &strategy in &self.config.strategies {
            let record = match strategy {
                Strategy::Naive | Strategy::LimitedBid => {
                    let mode = if strategy == Strategy::Naive { NaiveMode::Unlimited } else { NaiveMode::LimitedBid };
                    let d = naive_decision(mode, realized.da);
                    DecisionRecord {
                        strategy,
                        q_star: d.q_star,
                        criterion: d.criterion,
                        degenerate_sr: false,
                        curtail: vec![d.curtail],
                    }
                }
                _ => {
                    let pools = pools.get_or_insert_with(|| params.q_grid.iter().map(|&q| pool.at(q)).collect());
                    let d = choose_q(strategy, &params.q_grid, pools)?;
                    let chosen = pool.at(d.q_star);
                    let curtail = self
                        .config
                        .stop_taus
                        .iter()
                        .map(|&tau| stopping_rule(d, &chosen, tau).map(|s| s.curtail))
                        .collect::<Result<Vec<_>>>()?;
                    DecisionRecord {
                        strategy,
                        q_star: d.q_star,
                        criterion: d.criterion,
                        degenerate_sr: d.degenerate_sr,
                        curtail,
                    }
                }
            };
            decisions.push(record);
        }
        Ok(TradingRecord { realized, decisions })
    }

    /// All forecasts and scores for one target day.
    pub fn forecast_day(&self, day: usize) -> Result<DayResult> {
        let hours = (1..=HOURS as u8)
            .into_par_iter()
            .map(|h| self.hour(day, h))
            .collect::<Result<Vec<_>>>()?;
        Ok(DayResult {
            day,
            date: self.data.date(day),
            hours,
        })
    }

    pub fn run_days(&self) -> Result<Vec<DayResult>> {
        self.eval_days
            .clone()
            .into_par_iter()
            .map(|d| self.forecast_day(d))
            .collect()
    }

    pub fn config(&self) -> &ExperimentConfig {
        self.config
    }

    pub fn data(&self) -> &ModelData {
        self.data
    }

    pub fn evaluated(&self) -> &[ModelKind] {
        &self.evaluated
    }
}

/// Realized profit of trading `q` at an hour, before curtailment.
pub(crate) fn realized_profit(q: f64, r: &Realized, config: &ExperimentConfig) -> f64 {
    profit_per_mwh(q, r.w_hat, r.w, r.da, r.id, &config.profit)
}
