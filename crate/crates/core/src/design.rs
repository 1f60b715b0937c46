//! Regressor rows for the seven ARX specifications.
//!
//! Each specification is estimated separately for every delivery hour. The
//! regressor order below is fixed so coefficient vectors line up across runs.

use chrono::{Datelike, Weekday};
use nalgebra::DMatrix;

use crate::data::{cell, Fuel, ModelData, Quantity, HOURS};
use crate::error::{Error, Result};

/// Deepest lag used by any specification (weekly autoregression).
pub const MAX_LAG: usize = 7;

const WEEKDAYS: [Weekday; 7] = [
    Weekday::Mon,
    Weekday::Tue,
    Weekday::Wed,
    Weekday::Thu,
    Weekday::Fri,
    Weekday::Sat,
    Weekday::Sun,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Load,
    Wind,
    Res,
    ResidualLoad,
    DayAhead,
    Intraday,
    Spread,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Load,
        ModelKind::Wind,
        ModelKind::Res,
        ModelKind::ResidualLoad,
        ModelKind::DayAhead,
        ModelKind::Intraday,
        ModelKind::Spread,
    ];

    pub fn code(self) -> &'static str {
        self.target().code()
    }

    pub fn from_code(code: &str) -> Option<ModelKind> {
        Self::ALL.into_iter().find(|k| k.code().eq_ignore_ascii_case(code))
    }

    /// The endogenous variable on the left-hand side.
    pub fn target(self) -> Quantity {
        match self {
            ModelKind::Load => Quantity::Load,
            ModelKind::Wind => Quantity::Wind,
            ModelKind::Res => Quantity::Res,
            ModelKind::ResidualLoad => Quantity::ResidualLoad,
            ModelKind::DayAhead => Quantity::DayAhead,
            ModelKind::Intraday => Quantity::Intraday,
            ModelKind::Spread => Quantity::Spread,
        }
    }

    /// Regressor list used by quantile regression for this target. The spread
    /// reuses the day-ahead exogenous block.
    pub fn quantile_design(self) -> ModelKind {
        match self {
            ModelKind::Spread => ModelKind::DayAhead,
            k => k,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Delivery hour, 1..=24.
    pub hour: u8,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, hour: u8) -> Self {
        assert!((1..=24).contains(&hour), "hour {hour} outside 1..=24");
        ModelSpec { kind, hour }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DailyStat {
    Mean,
    Min,
    Max,
}

/// One regressor slot. `lag` counts days back from the target day.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regressor {
    Intercept,
    Weekday(Weekday),
    /// `X*[t-lag, h]`
    Starred { q: Quantity, lag: u8 },
    /// `X[t-lag, h]`
    Lagged { q: Quantity, lag: u8 },
    /// `X[t, h+shift]` for a TSO forecast series.
    Forecast { q: Quantity, shift: i8 },
    /// Statistic of `X` over the 24 hours of day `t-lag`.
    Daily { q: Quantity, lag: u8, stat: DailyStat },
    Fuel { fuel: Fuel, lag: u8 },
}

impl Regressor {
    pub fn label(&self) -> String {
        let day = |lag: u8| if lag == 0 { "t".to_string() } else { format!("t-{lag}") };
        match *self {
            Regressor::Intercept => "const".into(),
            Regressor::Weekday(d) => format!("D_{d}"),
            Regressor::Starred { q, lag } => format!("{}*[{},h]", q.code(), day(lag)),
            Regressor::Lagged { q, lag } => format!("{}[{},h]", q.code(), day(lag)),
            Regressor::Forecast { q, shift } => match shift {
                0 => format!("{}[t,h]", q.code()),
                s if s > 0 => format!("{}[t,h+{s}]", q.code()),
                s => format!("{}[t,h{s}]", q.code()),
            },
            Regressor::Daily { q, lag, stat } => {
                let s = match stat {
                    DailyStat::Mean => "ave",
                    DailyStat::Min => "min",
                    DailyStat::Max => "max",
                };
                format!("{}[{},{s}]", q.code(), day(lag))
            }
            Regressor::Fuel { fuel, lag } => format!("{}[{}]", fuel.code(), day(lag)),
        }
    }

    /// Whether the value is published by 11:00 on the day before delivery,
    /// for every delivery hour. Realized hourly values of day `t-1` are only
    /// known up to hour 10, so they must enter through a starred series.
    pub fn is_known_at_forecast_time(&self) -> bool {
        match *self {
            Regressor::Intercept | Regressor::Weekday(_) => true,
            Regressor::Starred { lag, .. } => lag >= 1,
            Regressor::Lagged { q, lag } => match q {
                Quantity::DayAhead => lag >= 1,
                q if q.is_forecast() => true,
                _ => lag >= 2,
            },
            Regressor::Forecast { q, .. } => q.is_forecast(),
            Regressor::Daily { q, lag, .. } => match q {
                Quantity::DayAhead => lag >= 1,
                q => q.is_forecast(),
            },
            Regressor::Fuel { lag, .. } => lag >= 1,
        }
    }

    fn value(&self, data: &ModelData, t: usize, hour: u8) -> f64 {
        match *self {
            Regressor::Intercept => 1.0,
            Regressor::Weekday(d) => {
                if data.date(t).weekday() == d {
                    1.0
                } else {
                    0.0
                }
            }
            Regressor::Starred { q, lag } => {
                let s = data.starred_series(q).expect("starred quantity");
                s[cell(t - lag as usize, hour)]
            }
            Regressor::Lagged { q, lag } => data.value(q, t - lag as usize, hour),
            Regressor::Forecast { q, shift } => {
                data.value(q, t, (hour as i8 + shift) as u8)
            }
            Regressor::Daily { q, lag, stat } => {
                let day = t - lag as usize;
                let values = &data.series(q)[day * HOURS..(day + 1) * HOURS];
                match stat {
                    DailyStat::Mean => values.iter().sum::<f64>() / HOURS as f64,
                    DailyStat::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
                    DailyStat::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                }
            }
            Regressor::Fuel { fuel, lag } => data.fuel(fuel, t - lag as usize),
        }
    }
}

fn neighbour_forecasts(q: Quantity, hour: u8) -> Vec<Regressor> {
    [-1i8, 0, 1]
        .into_iter()
        .filter(|&s| (1..=24).contains(&(hour as i8 + s)))
        .map(|shift| Regressor::Forecast { q, shift })
        .collect()
}

fn daily(q: Quantity, lag: u8, stats: [DailyStat; 3]) -> impl Iterator<Item = Regressor> {
    stats.into_iter().map(move |stat| Regressor::Daily { q, lag, stat })
}

/// The regressor list of a specification; depends only on kind and hour.
pub fn regressor_terms(spec: ModelSpec) -> Vec<Regressor> {
    use DailyStat::{Max, Mean, Min};
    use Quantity as Q;
    let h = spec.hour;
    let mut terms = Vec::new();
    let load_block = |terms: &mut Vec<Regressor>| {
        terms.push(Regressor::Starred { q: Q::Load, lag: 1 });
        terms.push(Regressor::Lagged { q: Q::Load, lag: 2 });
        terms.push(Regressor::Lagged { q: Q::Load, lag: 7 });
    };
    let price_block = |terms: &mut Vec<Regressor>, own: Q, starred_first: bool| {
        terms.extend(WEEKDAYS.iter().map(|&d| Regressor::Weekday(d)));
        if starred_first {
            terms.push(Regressor::Starred { q: own, lag: 1 });
            terms.extend((2..=7).map(|lag| Regressor::Lagged { q: own, lag }));
        } else {
            terms.extend((1..=7).map(|lag| Regressor::Lagged { q: own, lag }));
        }
        terms.extend(daily(Q::DayAhead, 1, [Mean, Min, Max]));
        terms.push(Regressor::Forecast { q: Q::LoadForecast, shift: 0 });
        terms.push(Regressor::Forecast { q: Q::ResForecast, shift: 0 });
        terms.push(Regressor::Fuel { fuel: Fuel::Coal, lag: 1 });
        terms.push(Regressor::Fuel { fuel: Fuel::Gas, lag: 1 });
    };
    match spec.kind {
        ModelKind::Load => {
            terms.push(Regressor::Intercept);
            load_block(&mut terms);
            terms.push(Regressor::Forecast { q: Q::LoadForecast, shift: 0 });
            terms.push(Regressor::Forecast { q: Q::ResForecast, shift: 0 });
            terms.extend(daily(Q::LoadForecast, 0, [Mean, Max, Min]));
        }
        ModelKind::Wind => {
            terms.push(Regressor::Intercept);
            terms.push(Regressor::Starred { q: Q::Wind, lag: 1 });
            terms.extend(neighbour_forecasts(Q::WindForecast, h));
        }
        ModelKind::Res => {
            terms.push(Regressor::Intercept);
            terms.push(Regressor::Starred { q: Q::Res, lag: 1 });
            terms.extend(neighbour_forecasts(Q::ResForecast, h));
        }
        ModelKind::ResidualLoad => {
            terms.push(Regressor::Intercept);
            load_block(&mut terms);
            terms.push(Regressor::Forecast { q: Q::LoadForecast, shift: 0 });
            terms.extend(daily(Q::LoadForecast, 0, [Mean, Max, Min]));
            terms.push(Regressor::Starred { q: Q::Res, lag: 1 });
            terms.extend(neighbour_forecasts(Q::ResForecast, h));
        }
        ModelKind::DayAhead => price_block(&mut terms, Q::DayAhead, false),
        ModelKind::Intraday => price_block(&mut terms, Q::Intraday, true),
        ModelKind::Spread => price_block(&mut terms, Q::Spread, true),
    }
    terms
}

/// Regressor values with their labels.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressorRow {
    pub values: Vec<f64>,
    pub labels: Vec<String>,
}

/// Daily statistics entering the load and price specifications.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DailyStats {
    pub fl_ave: f64,
    pub fl_max: f64,
    pub fl_min: f64,
    pub da_ave: f64,
    pub da_min: f64,
    pub da_max: f64,
}

pub fn daily_stats(data: &ModelData, day: usize) -> DailyStats {
    let stat = |q, s| Regressor::Daily { q, lag: 0, stat: s }.value(data, day, 1);
    DailyStats {
        fl_ave: stat(Quantity::LoadForecast, DailyStat::Mean),
        fl_max: stat(Quantity::LoadForecast, DailyStat::Max),
        fl_min: stat(Quantity::LoadForecast, DailyStat::Min),
        da_ave: stat(Quantity::DayAhead, DailyStat::Mean),
        da_min: stat(Quantity::DayAhead, DailyStat::Min),
        da_max: stat(Quantity::DayAhead, DailyStat::Max),
    }
}

fn check_day(data: &ModelData, t: usize) -> Result<()> {
    if t < MAX_LAG {
        return Err(Error::InsufficientHistory(format!(
            "day {t} has fewer than {MAX_LAG} preceding days"
        )));
    }
    if t >= data.days() {
        return Err(Error::InsufficientHistory(format!(
            "day {t} is beyond the panel ({} days)",
            data.days()
        )));
    }
    Ok(())
}

pub fn regressors(spec: ModelSpec, data: &ModelData, t: usize) -> Result<RegressorRow> {
    check_day(data, t)?;
    let terms = regressor_terms(spec);
    Ok(RegressorRow {
        values: terms.iter().map(|r| r.value(data, t, spec.hour)).collect(),
        labels: terms.iter().map(Regressor::label).collect(),
    })
}

/// Realized value of the endogenous variable.
pub fn target(spec: ModelSpec, data: &ModelData, t: usize) -> f64 {
    data.value(spec.kind.target(), t, spec.hour)
}

/// All rows and targets of one specification for days `MAX_LAG..days`.
#[derive(Clone, Debug)]
pub struct DesignMatrix {
    spec: ModelSpec,
    terms: Vec<Regressor>,
    rows: Vec<f64>,
    targets: Vec<f64>,
    days: usize,
}

impl DesignMatrix {
    pub fn build(spec: ModelSpec, data: &ModelData) -> DesignMatrix {
        Self::with_terms(spec, regressor_terms(spec), data)
    }

    /// Target of `spec` on the quantile-regression regressor list.
    pub fn for_quantiles(spec: ModelSpec, data: &ModelData) -> DesignMatrix {
        let terms = regressor_terms(ModelSpec::new(spec.kind.quantile_design(), spec.hour));
        Self::with_terms(spec, terms, data)
    }

    fn with_terms(spec: ModelSpec, terms: Vec<Regressor>, data: &ModelData) -> DesignMatrix {
        let days = data.days();
        let p = terms.len();
        let mut rows = Vec::with_capacity(days.saturating_sub(MAX_LAG) * p);
        let mut targets = Vec::with_capacity(days.saturating_sub(MAX_LAG));
        for t in MAX_LAG..days {
            rows.extend(terms.iter().map(|r| r.value(data, t, spec.hour)));
            targets.push(target(spec, data, t));
        }
        DesignMatrix {
            spec,
            terms,
            rows,
            targets,
            days,
        }
    }

    pub fn spec(&self) -> ModelSpec {
        self.spec
    }

    pub fn terms(&self) -> &[Regressor] {
        &self.terms
    }

    pub fn labels(&self) -> Vec<String> {
        self.terms.iter().map(Regressor::label).collect()
    }

    pub fn ncols(&self) -> usize {
        self.terms.len()
    }

    /// Days with a complete row.
    pub fn available(&self) -> std::ops::Range<usize> {
        MAX_LAG.min(self.days)..self.days
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let p = self.ncols();
        let i = t - MAX_LAG;
        &self.rows[i * p..(i + 1) * p]
    }

    pub fn target(&self, t: usize) -> f64 {
        self.targets[t - MAX_LAG]
    }

    pub fn check_days(&self, days: &[usize]) -> Result<()> {
        match days.iter().find(|d| !self.available().contains(d)) {
            Some(d) => Err(Error::InsufficientHistory(format!(
                "{} hour {}: day {d} has no complete regressor row",
                self.spec.kind, self.spec.hour
            ))),
            None => Ok(()),
        }
    }

    /// Stacks the rows of `days` into an `n x p` matrix.
    pub fn matrix(&self, days: &[usize]) -> DMatrix<f64> {
        let p = self.ncols();
        DMatrix::from_fn(days.len(), p, |i, j| self.row(days[i])[j])
    }

    pub fn targets(&self, days: &[usize]) -> Vec<f64> {
        days.iter().map(|&d| self.target(d)).collect()
    }
}
