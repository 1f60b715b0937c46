//! Hourly market panel: loading, DST repair, derived series and the 11:00
//! information set.
//!
//! Every hourly series is stored flat in day-major order, so the cell for
//! day `t` and delivery hour `h` (1..=24) lives at `t * 24 + h - 1`.

mod derived;
mod dst;
mod io;
mod synth;

pub use derived::{build_info_set, derive_series, DerivedSeries, InfoSet, ModelData, Quantity};
pub use dst::dst_normalize;
pub use io::{load_panel, read_panel, write_panel, write_panel_to, ColumnSchema};
pub use synth::{
    generate_synthetic_panel, DgpConfig, FuelDgp, PriceDgp, SeriesDgp, INNOVATION_ORDER,
};

use chrono::NaiveDate;

use crate::error::{Error, Result};

pub const HOURS: usize = 24;

/// Last delivery hour whose realized values are known when forecasts are made.
pub const FORECAST_HOUR: u8 = 10;

#[inline]
pub(crate) fn cell(day: usize, hour: u8) -> usize {
    debug_assert!((1..=24).contains(&hour));
    day * HOURS + hour as usize - 1
}

/// Hourly columns of the raw panel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Series {
    DayAhead,
    Intraday,
    Load,
    Wind,
    Solar,
    LoadForecast,
    WindForecast,
    SolarForecast,
}

impl Series {
    pub const ALL: [Series; 8] = [
        Series::DayAhead,
        Series::Intraday,
        Series::Load,
        Series::Wind,
        Series::Solar,
        Series::LoadForecast,
        Series::WindForecast,
        Series::SolarForecast,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Series::DayAhead => "DA",
            Series::Intraday => "ID",
            Series::Load => "L",
            Series::Wind => "W",
            Series::Solar => "S",
            Series::LoadForecast => "FL",
            Series::WindForecast => "FW",
            Series::SolarForecast => "FS",
        }
    }

    /// Volumes (GWh) must be non-negative; prices may go below zero.
    pub fn is_generation(self) -> bool {
        !matches!(self, Series::DayAhead | Series::Intraday)
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Daily fuel futures closes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Fuel {
    Coal,
    Gas,
}

impl Fuel {
    pub const ALL: [Fuel; 2] = [Fuel::Coal, Fuel::Gas];

    pub fn code(self) -> &'static str {
        match self {
            Fuel::Coal => "C",
            Fuel::Gas => "G",
        }
    }
}

/// Complete, validated date x hour grid of all market variables.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketPanel {
    dates: Vec<NaiveDate>,
    hourly: Vec<Vec<f64>>,
    res: Vec<f64>,
    fres: Vec<f64>,
    coal: Vec<f64>,
    gas: Vec<f64>,
}

impl MarketPanel {
    /// `hourly` is indexed in [`Series::ALL`] order.
    pub fn new(
        dates: Vec<NaiveDate>,
        hourly: Vec<Vec<f64>>,
        coal: Vec<f64>,
        gas: Vec<f64>,
    ) -> Result<Self> {
        let days = dates.len();
        if days == 0 {
            return Err(Error::InvalidPanel("panel has no days".into()));
        }
        for pair in dates.windows(2) {
            if pair[0].succ_opt() != Some(pair[1]) {
                return Err(Error::InvalidPanel(format!(
                    "dates {} and {} are not consecutive",
                    pair[0], pair[1]
                )));
            }
        }
        if hourly.len() != Series::ALL.len() {
            return Err(Error::InvalidPanel(format!(
                "expected {} hourly series, got {}",
                Series::ALL.len(),
                hourly.len()
            )));
        }
        for (series, values) in Series::ALL.iter().zip(&hourly) {
            if values.len() != days * HOURS {
                return Err(Error::InvalidPanel(format!(
                    "series {} has {} cells, expected {}",
                    series.code(),
                    values.len(),
                    days * HOURS
                )));
            }
            for (i, &v) in values.iter().enumerate() {
                let (date, hour) = (dates[i / HOURS], (i % HOURS + 1) as u8);
                if !v.is_finite() {
                    return Err(Error::InvalidPanel(format!(
                        "non-finite {} on {date} hour {hour}",
                        series.code()
                    )));
                }
                if series.is_generation() && v < 0.0 {
                    return Err(Error::NegativeGeneration {
                        series: series.code(),
                        date,
                        hour,
                        value: v,
                    });
                }
            }
        }
        for (fuel, values) in [(Fuel::Coal, &coal), (Fuel::Gas, &gas)] {
            if values.len() != days {
                return Err(Error::InvalidPanel(format!(
                    "fuel {} has {} days, expected {days}",
                    fuel.code(),
                    values.len()
                )));
            }
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidPanel(format!(
                    "non-finite fuel {} on {}",
                    fuel.code(),
                    dates[i]
                )));
            }
        }
        let sum = |a: Series, b: Series| -> Vec<f64> {
            hourly[a.index()]
                .iter()
                .zip(&hourly[b.index()])
                .map(|(x, y)| x + y)
                .collect()
        };
        let res = sum(Series::Wind, Series::Solar);
        let fres = sum(Series::WindForecast, Series::SolarForecast);
        Ok(MarketPanel {
            dates,
            hourly,
            res,
            fres,
            coal,
            gas,
        })
    }

    pub fn days(&self) -> usize {
        self.dates.len()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn date(&self, day: usize) -> NaiveDate {
        self.dates[day]
    }

    pub fn day_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.dates[0]).num_days();
        (0..self.days() as i64)
            .contains(&offset)
            .then_some(offset as usize)
    }

    pub fn get(&self, series: Series, day: usize, hour: u8) -> f64 {
        self.hourly[series.index()][cell(day, hour)]
    }

    pub fn series(&self, series: Series) -> &[f64] {
        &self.hourly[series.index()]
    }

    /// Renewable generation, W + S.
    pub fn res(&self) -> &[f64] {
        &self.res
    }

    /// Forecasted renewable generation, FW + FS.
    pub fn fres(&self) -> &[f64] {
        &self.fres
    }

    pub fn fuel(&self, fuel: Fuel, day: usize) -> f64 {
        match fuel {
            Fuel::Coal => self.coal[day],
            Fuel::Gas => self.gas[day],
        }
    }

    pub fn fuel_series(&self, fuel: Fuel) -> &[f64] {
        match fuel {
            Fuel::Coal => &self.coal,
            Fuel::Gas => &self.gas,
        }
    }

    /// Sub-panel covering `days` (a contiguous day range).
    pub fn slice_days(&self, days: std::ops::Range<usize>) -> Result<MarketPanel> {
        if days.end > self.days() || days.is_empty() {
            return Err(Error::InvalidPanel(format!(
                "day range {days:?} outside panel of {} days",
                self.days()
            )));
        }
        let cells = days.start * HOURS..days.end * HOURS;
        MarketPanel::new(
            self.dates[days.clone()].to_vec(),
            self.hourly.iter().map(|s| s[cells.clone()].to_vec()).collect(),
            self.coal[days.clone()].to_vec(),
            self.gas[days].to_vec(),
        )
    }
}

/// One hourly cell of a panel as read from disk, before DST repair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Observed(f64),
    /// No row (spring-forward hour) or a blank value.
    Missing,
    /// Two rows for the same hour (fall-back hour).
    Duplicated(f64, f64),
}

/// Panel in file form: DST gaps and duplicates are still explicit.
#[derive(Clone, Debug, PartialEq)]
pub struct RawPanel {
    pub dates: Vec<NaiveDate>,
    /// Indexed in [`Series::ALL`] order, `days * 24` cells each.
    pub hourly: Vec<Vec<Cell>>,
    pub coal: Vec<Option<f64>>,
    pub gas: Vec<Option<f64>>,
}

impl RawPanel {
    pub fn days(&self) -> usize {
        self.dates.len()
    }

    pub fn cell(&self, series: Series, day: usize, hour: u8) -> Cell {
        self.hourly[series.index()][cell(day, hour)]
    }

    pub fn set(&mut self, series: Series, day: usize, hour: u8, value: Cell) {
        self.hourly[series.index()][cell(day, hour)] = value;
    }

    /// (date, hour) slots where at least one series is missing.
    pub fn missing_slots(&self) -> Vec<(NaiveDate, u8)> {
        self.slots(|c| matches!(c, Cell::Missing))
    }

    pub fn duplicated_slots(&self) -> Vec<(NaiveDate, u8)> {
        self.slots(|c| matches!(c, Cell::Duplicated(..)))
    }

    /// Days whose fuel closes will be forward-filled.
    pub fn fuel_gap_days(&self) -> Vec<NaiveDate> {
        self.dates
            .iter()
            .zip(self.coal.iter().zip(&self.gas))
            .filter(|(_, (c, g))| c.is_none() || g.is_none())
            .map(|(d, _)| *d)
            .collect()
    }

    fn slots(&self, pred: impl Fn(&Cell) -> bool) -> Vec<(NaiveDate, u8)> {
        (0..self.days() * HOURS)
            .filter(|&i| self.hourly.iter().any(|s| pred(&s[i])))
            .map(|i| (self.dates[i / HOURS], (i % HOURS + 1) as u8))
            .collect()
    }
}

impl From<&MarketPanel> for RawPanel {
    fn from(panel: &MarketPanel) -> Self {
        RawPanel {
            dates: panel.dates.clone(),
            hourly: panel
                .hourly
                .iter()
                .map(|s| s.iter().map(|&v| Cell::Observed(v)).collect())
                .collect(),
            coal: panel.coal.iter().map(|&v| Some(v)).collect(),
            gas: panel.gas.iter().map(|&v| Some(v)).collect(),
        }
    }
}
