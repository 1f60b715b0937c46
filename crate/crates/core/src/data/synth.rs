use chrono::NaiveDate;
use nalgebra::{Matrix5, Vector5};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{MarketPanel, FORECAST_HOUR, HOURS};
use crate::error::{Error, Result};

/// Order of the jointly drawn hourly innovations in [`DgpConfig::correlation`].
pub const INNOVATION_ORDER: [&str; 5] = ["L", "W", "S", "DA", "ID"];

/// A volume series: mean profile plus AR(1) on the starred lag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesDgp {
    pub level: f64,
    /// Peak-to-mean amplitude of the diurnal cosine (peak at hour 18).
    pub amplitude: f64,
    pub phi: f64,
    pub sd: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriceDgp {
    pub level: f64,
    pub amplitude: f64,
    pub phi: f64,
    pub sd: f64,
    /// EUR/MWh per GWh of forecasted load above its mean profile.
    pub load_beta: f64,
    /// EUR/MWh per GWh of forecasted renewables above their mean profile.
    pub res_beta: f64,
    pub coal_beta: f64,
    pub gas_beta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FuelDgp {
    pub coal_level: f64,
    pub gas_level: f64,
    pub phi: f64,
    pub coal_sd: f64,
    pub gas_sd: f64,
}

/// Linear-Gaussian generating process for test panels.
///
/// Volumes follow `X[t,h] = m(h) + phi (X*[t-1,h] - m(h)) + e`, where `X*` is
/// the starred lag, so every ARX specification nests its generating
/// equation. TSO forecasts are the truth plus independent noise. Prices load
/// on the forecasts, the previous day's fuel closes and their own (starred)
/// lag. Solar mean and noise are scaled by a daylight profile. Volumes are
/// floored at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct DgpConfig {
    pub days: usize,
    pub start: NaiveDate,
    /// Days simulated and discarded before `start`.
    pub burn_in: usize,
    pub load: SeriesDgp,
    pub wind: SeriesDgp,
    pub solar: SeriesDgp,
    pub day_ahead: PriceDgp,
    pub intraday: PriceDgp,
    /// Noise sd of FL, FW, FS around the truth.
    pub forecast_sd: [f64; 3],
    /// Correlation of the innovations, ordered as [`INNOVATION_ORDER`].
    pub correlation: [[f64; 5]; 5],
    pub fuel: FuelDgp,
}

impl Default for DgpConfig {
    fn default() -> Self {
        let mut correlation = [[0.0; 5]; 5];
        for (i, row) in correlation.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        correlation[3][4] = 0.9;
        correlation[4][3] = 0.9;
        DgpConfig {
            days: 1461,
            start: NaiveDate::from_ymd_opt(2015, 10, 1).expect("valid date"),
            burn_in: 60,
            load: SeriesDgp {
                level: 55.0,
                amplitude: 8.0,
                phi: 0.6,
                sd: 2.0,
            },
            wind: SeriesDgp {
                level: 12.0,
                amplitude: 1.0,
                phi: 0.6,
                sd: 2.5,
            },
            solar: SeriesDgp {
                level: 9.0,
                amplitude: 0.0,
                phi: 0.6,
                sd: 1.5,
            },
            day_ahead: PriceDgp {
                level: 38.0,
                amplitude: 8.0,
                phi: 0.4,
                sd: 6.0,
                load_beta: 0.8,
                res_beta: -1.2,
                coal_beta: 0.05,
                gas_beta: 0.3,
            },
            intraday: PriceDgp {
                level: 38.0,
                amplitude: 8.0,
                phi: 0.4,
                sd: 7.0,
                load_beta: 0.8,
                res_beta: -1.5,
                coal_beta: 0.05,
                gas_beta: 0.3,
            },
            forecast_sd: [1.0, 1.5, 0.8],
            correlation,
            fuel: FuelDgp {
                coal_level: 60.0,
                gas_level: 20.0,
                phi: 0.95,
                coal_sd: 1.0,
                gas_sd: 0.5,
            },
        }
    }
}

impl DgpConfig {
    fn validate(&self) -> Result<Matrix5<f64>> {
        if self.days == 0 {
            return Err(Error::InvalidDgp("days must be positive".into()));
        }
        let phis = [
            ("load", self.load.phi),
            ("wind", self.wind.phi),
            ("solar", self.solar.phi),
            ("day-ahead", self.day_ahead.phi),
            ("intraday", self.intraday.phi),
            ("fuel", self.fuel.phi),
        ];
        for (name, phi) in phis {
            if !(phi.abs() < 1.0) {
                return Err(Error::InvalidDgp(format!(
                    "{name} AR coefficient {phi} is not stationary (|phi| must be < 1)"
                )));
            }
        }
        let sds = [
            self.load.sd,
            self.wind.sd,
            self.solar.sd,
            self.day_ahead.sd,
            self.intraday.sd,
            self.fuel.coal_sd,
            self.fuel.gas_sd,
        ];
        if sds
            .iter()
            .chain(&self.forecast_sd)
            .any(|s| !(s.is_finite() && *s >= 0.0))
        {
            return Err(Error::InvalidDgp("standard deviations must be finite and >= 0".into()));
        }
        let corr = Matrix5::from_fn(|i, j| self.correlation[i][j]);
        for i in 0..5 {
            if corr[(i, i)] != 1.0 {
                return Err(Error::InvalidDgp("correlation diagonal must be 1".into()));
            }
            for j in 0..5 {
                if corr[(i, j)] != corr[(j, i)] {
                    return Err(Error::InvalidDgp("correlation must be symmetric".into()));
                }
            }
        }
        corr.cholesky()
            .map(|c| c.l())
            .ok_or_else(|| Error::InvalidDgp("correlation is not positive definite".into()))
    }
}

fn diurnal(level: f64, amplitude: f64, hour: usize) -> f64 {
    let angle = 2.0 * std::f64::consts::PI * (hour as f64 - 18.0) / 24.0;
    level + amplitude * angle.cos()
}

fn daylight(hour: usize) -> f64 {
    if (6..=20).contains(&hour) {
        (std::f64::consts::PI * (hour as f64 - 6.0) / 14.0).sin().max(0.0)
    } else {
        0.0
    }
}

/// Simulates a complete panel. Identical `(config, seed)` pairs produce
/// bit-identical panels.
pub fn generate_synthetic_panel(config: &DgpConfig, seed: u64) -> Result<MarketPanel> {
    let chol = config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = config.burn_in + config.days;

    let mut normal = move || -> f64 { rng.sample(StandardNormal) };

    let mean_load: Vec<f64> = (1..=HOURS)
        .map(|h| diurnal(config.load.level, config.load.amplitude, h))
        .collect();
    let mean_wind: Vec<f64> = (1..=HOURS)
        .map(|h| diurnal(config.wind.level, config.wind.amplitude, h))
        .collect();
    let mean_solar: Vec<f64> = (1..=HOURS)
        .map(|h| config.solar.level * daylight(h))
        .collect();
    let mean_da: Vec<f64> = (1..=HOURS)
        .map(|h| diurnal(config.day_ahead.level, config.day_ahead.amplitude, h))
        .collect();
    let mean_id: Vec<f64> = (1..=HOURS)
        .map(|h| diurnal(config.intraday.level, config.intraday.amplitude, h))
        .collect();

    let mut load_star = mean_load.clone();
    let mut wind_star = mean_wind.clone();
    let mut solar_star = mean_solar.clone();
    let mut da_prev = mean_da.clone();
    let mut id_star = mean_id.clone();
    let (mut coal_prev, mut gas_prev) = (config.fuel.coal_level, config.fuel.gas_level);

    let keep = config.days * HOURS;
    let mut hourly = vec![Vec::with_capacity(keep); 8];
    let mut coal = Vec::with_capacity(config.days);
    let mut gas = Vec::with_capacity(config.days);

    for day in 0..total {
        let coal_today = (config.fuel.coal_level
            + config.fuel.phi * (coal_prev - config.fuel.coal_level)
            + config.fuel.coal_sd * normal())
        .max(0.01);
        let gas_today = (config.fuel.gas_level
            + config.fuel.phi * (gas_prev - config.fuel.gas_level)
            + config.fuel.gas_sd * normal())
        .max(0.01);

        let mut row = [[0.0; 8]; HOURS];
        for h in 0..HOURS {
            let z = Vector5::from_fn(|_, _| normal());
            let e = chol * z;
            let noise = [normal(), normal(), normal()];
            let light = daylight(h + 1);

            let l = (mean_load[h]
                + config.load.phi * (load_star[h] - mean_load[h])
                + config.load.sd * e[0])
                .max(0.0);
            let w = (mean_wind[h]
                + config.wind.phi * (wind_star[h] - mean_wind[h])
                + config.wind.sd * e[1])
                .max(0.0);
            let s = (mean_solar[h]
                + config.solar.phi * (solar_star[h] - mean_solar[h])
                + config.solar.sd * light * e[2])
                .max(0.0);
            let fl = (l + config.forecast_sd[0] * noise[0]).max(0.0);
            let fw = (w + config.forecast_sd[1] * noise[1]).max(0.0);
            let fs = (s + config.forecast_sd[2] * light * noise[2]).max(0.0);

            let fres_dev = fw + fs - mean_wind[h] - mean_solar[h];
            let price = |p: &PriceDgp, mean: f64, lag: f64, innovation: f64| {
                mean + p.phi * (lag - mean)
                    + p.load_beta * (fl - mean_load[h])
                    + p.res_beta * fres_dev
                    + p.coal_beta * (coal_prev - config.fuel.coal_level)
                    + p.gas_beta * (gas_prev - config.fuel.gas_level)
                    + p.sd * innovation
            };
            let da = price(&config.day_ahead, mean_da[h], da_prev[h], e[3]);
            let id = price(&config.intraday, mean_id[h], id_star[h], e[4]);
            row[h] = [da, id, l, w, s, fl, fw, fs];
        }

        for h in 0..HOURS {
            let [da, id, l, w, s, fl, fw, fs] = row[h];
            let known = h + 1 <= FORECAST_HOUR as usize;
            load_star[h] = if known { l } else { fl };
            wind_star[h] = if known { w } else { fw };
            solar_star[h] = if known { s } else { fs };
            id_star[h] = if known { id } else { da };
            da_prev[h] = da;
        }
        coal_prev = coal_today;
        gas_prev = gas_today;

        if day >= config.burn_in {
            for values in &row {
                for (series, v) in hourly.iter_mut().zip(values) {
                    series.push(*v);
                }
            }
            coal.push(coal_today);
            gas.push(gas_today);
        }
    }

    let dates = (0..config.days)
        .map(|d| config.start + chrono::Days::new(d as u64))
        .collect();
    MarketPanel::new(dates, hourly, coal, gas)
}
