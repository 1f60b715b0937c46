use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use crate::data::ColumnSchema;
use crate::design::ModelKind;
use crate::ensemble::SplitMode;
use crate::error::{Error, Result};
use crate::trading::{ProfitParams, Strategy};

/// A probabilistic forecasting method of the experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Qr,
    Hs,
    Ms { splits: usize, mode: SplitMode },
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Qr => "QR".into(),
            Method::Hs => "HS".into(),
            Method::Ms { splits, mode: SplitMode::Correlated } => format!("MS({splits})"),
            Method::Ms { splits, mode: SplitMode::Uncorrelated } => format!("MS-U({splits})"),
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        let s = s.trim();
        let inner = |prefix: &str| -> Option<usize> {
            s.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?.parse().ok()
        };
        match s {
            "QR" => Ok(Method::Qr),
            "HS" => Ok(Method::Hs),
            _ => {
                if let Some(n) = inner("MS-U") {
                    Ok(Method::Ms { splits: n, mode: SplitMode::Uncorrelated })
                } else if let Some(n) = inner("MS") {
                    Ok(Method::Ms { splits: n, mode: SplitMode::Correlated })
                } else {
                    Err(Error::Config(format!("unknown method `{s}`")))
                }
            }
        }
    }

    /// Stable numeric tag used to derive random streams.
    pub(crate) fn stream_tag(&self) -> u64 {
        match self {
            Method::Qr => 1,
            Method::Hs => 2,
            Method::Ms { splits, mode: SplitMode::Correlated } => 1_000 + *splits as u64,
            Method::Ms { splits, mode: SplitMode::Uncorrelated } => 1_000_000 + *splits as u64,
        }
    }

    pub fn is_ensemble(&self) -> bool {
        !matches!(self, Method::Qr)
    }
}

/// Settings of a rolling-window experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub input: Option<PathBuf>,
    pub output: PathBuf,
    pub schema: ColumnSchema,
    pub seed: u64,
    /// Length `T` of the training sample.
    pub calibration_window: usize,
    pub evaluation_days: usize,
    /// First target day; defaults to the last `evaluation_days` days of the panel.
    pub first_evaluation_date: Option<NaiveDate>,
    pub splits: Vec<usize>,
    pub split_ratio: f64,
    /// Jointly modelled variables.
    pub variables: Vec<ModelKind>,
    /// Variables entering the multivariate rank histogram.
    pub joint_variables: Vec<ModelKind>,
    pub methods: Vec<Method>,
    /// Nominal coverages of the evaluated intervals.
    pub levels: Vec<f64>,
    pub rank_bins: usize,
    pub strategies: Vec<Strategy>,
    pub stop_taus: Vec<f64>,
    /// Ensemble feeding the trading strategies; `None` picks the largest correlated MS.
    pub trading_method: Option<Method>,
    pub profit: ProfitParams,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    pub write_forecasts: bool,
    /// Last textual `methods` value; `MS` and `MS-U` follow later `splits` changes.
    methods_spec: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            input: None,
            output: PathBuf::from("report"),
            schema: ColumnSchema::default(),
            seed: 1,
            calibration_window: 365,
            evaluation_days: 730,
            first_evaluation_date: None,
            splits: vec![1, 20],
            split_ratio: 0.5,
            variables: vec![
                ModelKind::DayAhead,
                ModelKind::Intraday,
                ModelKind::Load,
                ModelKind::Res,
                ModelKind::Wind,
            ],
            joint_variables: vec![
                ModelKind::DayAhead,
                ModelKind::Intraday,
                ModelKind::Load,
                ModelKind::Res,
            ],
            methods: vec![
                Method::Qr,
                Method::Hs,
                Method::Ms { splits: 1, mode: SplitMode::Correlated },
                Method::Ms { splits: 20, mode: SplitMode::Correlated },
                Method::Ms { splits: 20, mode: SplitMode::Uncorrelated },
            ],
            levels: vec![0.8, 0.9, 0.95],
            rank_bins: 10,
            strategies: Strategy::ALL.to_vec(),
            stop_taus: vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            trading_method: None,
            profit: ProfitParams::default(),
            threads: 0,
            write_forecasts: false,
            methods_spec: Some("QR, HS, MS, MS-U".into()),
        }
    }
}

fn list<T>(value: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(item)
        .collect()
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn kind(code: &str) -> Result<ModelKind> {
    ModelKind::from_code(code).ok_or_else(|| Error::Config(format!("unknown variable `{code}`")))
}

fn strategy(code: &str) -> Result<Strategy> {
    Strategy::ALL
        .into_iter()
        .find(|s| s.code().eq_ignore_ascii_case(code))
        .ok_or_else(|| Error::Config(format!("unknown strategy `{code}`")))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        v => Err(Error::Config(format!("`{key}`: expected true or false, got `{v}`"))),
    }
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            config
                .set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets one key; used by the parser and for command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if let Some(column) = key.strip_prefix("column.") {
            return self.schema.rename(column, value);
        }
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "output" => self.output = PathBuf::from(value),
            "seed" => self.seed = number(key, value)?,
            "calibration_window" => self.calibration_window = number(key, value)?,
            "evaluation_days" => self.evaluation_days = number(key, value)?,
            "first_evaluation_date" => {
                self.first_evaluation_date = Some(
                    NaiveDate::parse_from_str(value, "%Y-%m-%d")
                        .map_err(|_| Error::Config(format!("`{key}`: bad date `{value}`")))?,
                )
            }
            "splits" => {
                self.splits = list(value, |v| number(key, v))?;
                if let Some(spec) = self.methods_spec.clone() {
                    self.methods = self.expand_methods(&spec)?;
                }
            }
            "split_ratio" => self.split_ratio = number(key, value)?,
            "variables" => self.variables = list(value, kind)?,
            "joint_variables" => self.joint_variables = list(value, kind)?,
            "methods" => {
                self.methods = self.expand_methods(value)?;
                self.methods_spec = Some(value.to_string());
            }
            "levels" => self.levels = list(value, |v| number(key, v))?,
            "rank_bins" => self.rank_bins = number(key, value)?,
            "strategies" => self.strategies = list(value, strategy)?,
            "stop_taus" => self.stop_taus = list(value, |v| number(key, v))?,
            "trading_method" => {
                self.trading_method = match value {
                    "auto" => None,
                    v => Some(Method::parse(v)?),
                }
            }
            "c_om" => self.profit.c_om = number(key, value)?,
            "w_floor" => self.profit.w_floor = number(key, value)?,
            "q_step" => {
                let step: f64 = number(key, value)?;
                let n = (1.0 / step).round();
                if !(step > 0.0 && step <= 1.0) || (n * step - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!("`q_step` {step} must divide 1")));
                }
                self.profit.q_grid = (0..=n as usize).map(|i| i as f64 / n).collect();
            }
            "threads" => self.threads = number(key, value)?,
            "write_forecasts" => self.write_forecasts = boolean(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// `MS` expands to one correlated method per split count, `MS-U` to the
    /// uncorrelated variant with the largest split count.
    fn expand_methods(&self, value: &str) -> Result<Vec<Method>> {
        let max = self.splits.iter().copied().max().unwrap_or(1);
        let mut out = Vec::new();
        for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "MS" => out.extend(self.splits.iter().map(|&n| Method::Ms { splits: n, mode: SplitMode::Correlated })),
                "MS-U" => out.push(Method::Ms { splits: max, mode: SplitMode::Uncorrelated }),
                m => out.push(Method::parse(m)?),
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.calibration_window < 4 {
            return bad(format!("calibration window {} is too short", self.calibration_window));
        }
        if self.evaluation_days == 0 {
            return bad("evaluation_days must be positive".into());
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad(format!("split_ratio {} outside (0, 1)", self.split_ratio));
        }
        if self.splits.iter().any(|&n| n == 0) {
            return bad("split counts must be positive".into());
        }
        if self.variables.is_empty() {
            return bad("no variables".into());
        }
        if let Some(k) = self.joint_variables.iter().find(|k| !self.evaluated_variables().contains(k)) {
            return bad(format!("joint variable {k} is not evaluated"));
        }
        if let Some(l) = self.levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return bad(format!("coverage level {l} outside (0, 1)"));
        }
        if self.rank_bins < 2 {
            return bad("rank_bins must be at least 2".into());
        }
        if let Some(t) = self.stop_taus.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return bad(format!("stopping quantile {t} outside (0, 1]"));
        }
        self.profit.validate()?;
        if let Some(m) = self.trading_method {
            if !self.methods.contains(&m) || !m.is_ensemble() {
                return bad(format!("trading method {} is not an evaluated ensemble method", m.label()));
            }
        }
        if self.trades() {
            for k in [ModelKind::DayAhead, ModelKind::Intraday, ModelKind::Wind] {
                if !self.variables.contains(&k) {
                    return bad(format!("trading needs variable {k}"));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn trades(&self) -> bool {
        !self.strategies.is_empty() && self.methods.iter().any(Method::is_ensemble)
    }

    /// Joint variables plus the derived spread and residual load.
    pub fn evaluated_variables(&self) -> Vec<ModelKind> {
        let mut out = self.variables.clone();
        let has = |k| self.variables.contains(&k);
        if has(ModelKind::DayAhead) && has(ModelKind::Intraday) && !has(ModelKind::Spread) {
            out.push(ModelKind::Spread);
        }
        if has(ModelKind::Load) && has(ModelKind::Res) && !has(ModelKind::ResidualLoad) {
            out.push(ModelKind::ResidualLoad);
        }
        out
    }

    pub fn trading_ensemble(&self) -> Option<Method> {
        self.trading_method.or_else(|| {
            let ms = self
                .methods
                .iter()
                .filter(|m| matches!(m, Method::Ms { mode: SplitMode::Correlated, .. }))
                .max_by_key(|m| match m {
                    Method::Ms { splits, .. } => *splits,
                    _ => 0,
                });
            ms.or_else(|| self.methods.iter().find(|m| m.is_ensemble())).copied()
        })
    }
}
