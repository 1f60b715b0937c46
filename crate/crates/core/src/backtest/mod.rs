//! Rolling-window forecasting experiment with scoring and trading.

mod config;
mod report;
mod run;

pub use config::{ExperimentConfig, Method};
pub use report::{
    evaluate_forecasts, figure_series, fmt6, level_tag, report_bundle, summarize, CoverageRow, CrpsRow,
    ReliabilityRow, ReportBundle, StrategyRow, Summary,
};
pub use run::{
    Backtest, DayResult, DecisionRecord, EnsembleRecord, ForecastView, HourResult, TradingRecord,
    VariableForecast, VariableScore,
};

use crate::data::ModelData;
use crate::error::Result;

/// Output of a full experiment run.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub days: Vec<DayResult>,
    pub summary: Summary,
}

impl Experiment {
    pub fn bundle(&self, config: &ExperimentConfig) -> Result<ReportBundle> {
        report_bundle(config, &self.days, &self.summary)
    }
}

/// Runs every evaluation day on a pool of `config.threads` workers
/// (0 uses the global pool). Results do not depend on the thread count.
pub fn run_experiment(config: &ExperimentConfig, data: &ModelData) -> Result<Experiment> {
    let go = || -> Result<Experiment> {
        let bt = Backtest::new(config, data)?;
        let days = bt.run_days()?;
        let summary = summarize(config, &days)?;
        Ok(Experiment { days, summary })
    };
    if config.threads == 0 {
        return go();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| crate::error::Error::Config(format!("thread pool: {e}")))?;
    pool.install(go)
}
