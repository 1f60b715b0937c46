use chrono::NaiveDate;

use super::{cell, Fuel, MarketPanel, Series, FORECAST_HOUR, HOURS};

/// Residual load and price spread on the panel grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivedSeries {
    /// RL = L - RES.
    pub residual_load: Vec<f64>,
    /// SP = DA - ID.
    pub spread: Vec<f64>,
}

pub fn derive_series(panel: &MarketPanel) -> DerivedSeries {
    let residual_load = panel
        .series(Series::Load)
        .iter()
        .zip(panel.res())
        .map(|(l, r)| l - r)
        .collect();
    let spread = panel
        .series(Series::DayAhead)
        .iter()
        .zip(panel.series(Series::Intraday))
        .map(|(da, id)| da - id)
        .collect();
    DerivedSeries {
        residual_load,
        spread,
    }
}

/// Starred series: the realized value where it is known at 11:00 (hours up
/// to [`FORECAST_HOUR`]) and its substitute otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct InfoSet {
    /// L* (substitute FL)
    pub load: Vec<f64>,
    /// W* (substitute FW)
    pub wind: Vec<f64>,
    /// RES* (substitute FRES)
    pub res: Vec<f64>,
    /// ID* (substitute DA)
    pub intraday: Vec<f64>,
    /// SP* (substitute DA)
    pub spread: Vec<f64>,
}

pub fn build_info_set(panel: &MarketPanel, derived: &DerivedSeries) -> InfoSet {
    let star = |known: &[f64], substitute: &[f64]| -> Vec<f64> {
        known
            .iter()
            .zip(substitute)
            .enumerate()
            .map(|(i, (&k, &s))| if (i % HOURS) as u8 + 1 <= FORECAST_HOUR { k } else { s })
            .collect()
    };
    let da = panel.series(Series::DayAhead);
    InfoSet {
        load: star(panel.series(Series::Load), panel.series(Series::LoadForecast)),
        wind: star(panel.series(Series::Wind), panel.series(Series::WindForecast)),
        res: star(panel.res(), panel.fres()),
        intraday: star(panel.series(Series::Intraday), da),
        spread: star(&derived.spread, da),
    }
}

/// Every series a model can reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quantity {
    DayAhead,
    Intraday,
    Load,
    Wind,
    Res,
    ResidualLoad,
    Spread,
    LoadForecast,
    WindForecast,
    ResForecast,
}

impl Quantity {
    pub fn code(self) -> &'static str {
        match self {
            Quantity::DayAhead => "DA",
            Quantity::Intraday => "ID",
            Quantity::Load => "L",
            Quantity::Wind => "W",
            Quantity::Res => "RES",
            Quantity::ResidualLoad => "RL",
            Quantity::Spread => "SP",
            Quantity::LoadForecast => "FL",
            Quantity::WindForecast => "FW",
            Quantity::ResForecast => "FRES",
        }
    }

    /// TSO forecasts are published before the auction for the whole next day.
    pub fn is_forecast(self) -> bool {
        matches!(
            self,
            Quantity::LoadForecast | Quantity::WindForecast | Quantity::ResForecast
        )
    }
}

/// Panel plus derived and starred series: everything the design matrices read.
#[derive(Clone, Debug)]
pub struct ModelData {
    pub panel: MarketPanel,
    pub derived: DerivedSeries,
    pub info: InfoSet,
}

impl ModelData {
    pub fn new(panel: MarketPanel) -> Self {
        let derived = derive_series(&panel);
        let info = build_info_set(&panel, &derived);
        ModelData {
            panel,
            derived,
            info,
        }
    }

    pub fn days(&self) -> usize {
        self.panel.days()
    }

    pub fn date(&self, day: usize) -> NaiveDate {
        self.panel.date(day)
    }

    pub fn series(&self, q: Quantity) -> &[f64] {
        match q {
            Quantity::DayAhead => self.panel.series(Series::DayAhead),
            Quantity::Intraday => self.panel.series(Series::Intraday),
            Quantity::Load => self.panel.series(Series::Load),
            Quantity::Wind => self.panel.series(Series::Wind),
            Quantity::Res => self.panel.res(),
            Quantity::ResidualLoad => &self.derived.residual_load,
            Quantity::Spread => &self.derived.spread,
            Quantity::LoadForecast => self.panel.series(Series::LoadForecast),
            Quantity::WindForecast => self.panel.series(Series::WindForecast),
            Quantity::ResForecast => self.panel.fres(),
        }
    }

    pub fn value(&self, q: Quantity, day: usize, hour: u8) -> f64 {
        self.series(q)[cell(day, hour)]
    }

    /// Starred counterpart of `q`, if the quantity has one.
    pub fn starred_series(&self, q: Quantity) -> Option<&[f64]> {
        match q {
            Quantity::Load => Some(&self.info.load),
            Quantity::Wind => Some(&self.info.wind),
            Quantity::Res => Some(&self.info.res),
            Quantity::Intraday => Some(&self.info.intraday),
            Quantity::Spread => Some(&self.info.spread),
            _ => None,
        }
    }

    pub fn fuel(&self, fuel: Fuel, day: usize) -> f64 {
        self.panel.fuel(fuel, day)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tests::fixture_panel;

    #[test]
    fn residual_load_and_spread() {
        let panel = fixture_panel(3);
        let d = derive_series(&panel);
        for day in 0..3 {
            for hour in 1..=24u8 {
                let i = cell(day, hour);
                // independent route: L - W - S
                let rl = panel.get(Series::Load, day, hour)
                    - panel.get(Series::Wind, day, hour)
                    - panel.get(Series::Solar, day, hour);
                assert!((d.residual_load[i] - rl).abs() < 1e-9);
                assert_eq!(
                    d.spread[i],
                    panel.get(Series::DayAhead, day, hour) - panel.get(Series::Intraday, day, hour)
                );
            }
        }
    }

    #[test]
    fn spread_vanishes_when_prices_agree() {
        let panel = fixture_panel(2);
        let mut hourly: Vec<Vec<f64>> = Series::ALL.iter().map(|s| panel.series(*s).to_vec()).collect();
        hourly[1] = hourly[0].clone();
        let same = MarketPanel::new(
            panel.dates().to_vec(),
            hourly,
            panel.fuel_series(Fuel::Coal).to_vec(),
            panel.fuel_series(Fuel::Gas).to_vec(),
        )
        .unwrap();
        assert!(derive_series(&same).spread.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn simple_residual_load() {
        let panel = fixture_panel(1);
        let data = ModelData::new(panel);
        let l = data.value(Quantity::Load, 0, 5);
        let res = data.value(Quantity::Res, 0, 5);
        assert_eq!(data.value(Quantity::ResidualLoad, 0, 5), l - res);
    }

    #[test]
    fn starred_values_follow_the_cutoff_exhaustively() {
        let data = ModelData::new(fixture_panel(4));
        let p = &data.panel;
        for day in 0..4 {
            for hour in 1..=24u8 {
                let i = cell(day, hour);
                let known = hour <= 10;
                let pick = |real: f64, sub: f64| if known { real } else { sub };
                assert_eq!(
                    data.info.load[i],
                    pick(p.get(Series::Load, day, hour), p.get(Series::LoadForecast, day, hour))
                );
                assert_eq!(
                    data.info.wind[i],
                    pick(p.get(Series::Wind, day, hour), p.get(Series::WindForecast, day, hour))
                );
                assert_eq!(data.info.res[i], pick(p.res()[i], p.fres()[i]));
                let da = p.get(Series::DayAhead, day, hour);
                assert_eq!(data.info.intraday[i], pick(p.get(Series::Intraday, day, hour), da));
                assert_eq!(data.info.spread[i], pick(data.derived.spread[i], da));
            }
        }
        // boundary hours
        assert_eq!(data.info.load[cell(1, 10)], p.get(Series::Load, 1, 10));
        assert_eq!(data.info.load[cell(1, 11)], p.get(Series::LoadForecast, 1, 11));
        assert_eq!(data.info.intraday[cell(1, 23)], p.get(Series::DayAhead, 1, 23));
    }
}
