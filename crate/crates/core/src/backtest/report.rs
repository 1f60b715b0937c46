use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use super::config::ExperimentConfig;
use super::run::{realized_profit, DayResult};
use crate::design::ModelKind;
use crate::error::{Error, Result};
use crate::evaluation::{crps_from_fan, group_by_hour, kupiec, picp, reliability_index, CoverageReport, Kupiec, RankMode, ReliabilityReport};
use crate::quantreg::{PredictionInterval, QuantileFan, PERCENTILES};
use crate::trading::{evaluate_strategy, naive_decision, relative_to, NaiveMode, Strategy, StrategyOutcome, TradeDecision};

/// Six significant digits; negative zero prints as `0`.
pub fn fmt6(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { String::new() } else { x.to_string() };
    }
    let v: f64 = format!("{x:.5e}").parse().expect("formatted float");
    if v == 0.0 {
        "0".into()
    } else {
        v.to_string()
    }
}

fn opt6(x: Option<f64>) -> String {
    x.map(fmt6).unwrap_or_default()
}

/// `0.8` -> `80`, `0.975` -> `97.5`.
pub fn level_tag(level: f64) -> String {
    fmt6((level * 1e8).round() / 1e6)
}

fn percentile_tag(i: usize) -> String {
    format!("q{:02}", i + 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageRow {
    pub method: String,
    pub variable: String,
    pub report: CoverageReport,
    /// Kupiec test on all hours pooled.
    pub pooled: Kupiec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrpsRow {
    pub method: String,
    pub variable: String,
    /// `(hour, n, mean CRPS)`.
    pub hours: Vec<(u8, usize, f64)>,
    pub overall: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReliabilityRow {
    pub method: String,
    /// `joint` for multivariate ranks.
    pub variable: String,
    /// Ranks per hour slot.
    pub counts: Vec<usize>,
    pub report: ReliabilityReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategyRow {
    pub strategy: Strategy,
    /// Stopping quantile; `None` for the naive rules.
    pub tau: Option<f64>,
    pub outcome: StrategyOutcome,
    pub vs_naive_average: f64,
    pub vs_naive_per_trade: Option<f64>,
}

/// Aggregated scores of an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub coverage: Vec<CoverageRow>,
    pub crps: Vec<CrpsRow>,
    pub reliability: Vec<ReliabilityRow>,
    pub strategies: Vec<StrategyRow>,
}

impl Summary {
    pub fn coverage_of(&self, method: &str, variable: &str, level: f64) -> Option<&CoverageRow> {
        self.coverage
            .iter()
            .find(|c| c.method == method && c.variable == variable && (c.report.nominal - level).abs() < 1e-9)
    }

    pub fn reliability_of(&self, method: &str, variable: &str) -> Option<&ReliabilityRow> {
        self.reliability
            .iter()
            .find(|r| r.method == method && r.variable == variable)
    }

    pub fn strategy(&self, strategy: Strategy, tau: Option<f64>) -> Option<&StrategyRow> {
        self.strategies.iter().find(|s| {
            s.strategy == strategy
                && match (s.tau, tau) {
                    (None, None) => true,
                    (Some(a), Some(b)) => (a - b).abs() < 1e-12,
                    _ => false,
                }
        })
    }
}

/// One scored forecast series: hour-major intervals, fans and observations.
struct Series {
    method: String,
    variable: String,
    /// `[hour][obs]`.
    intervals: Vec<Vec<Vec<PredictionInterval>>>,
    fans: Vec<Vec<Vec<f64>>>,
    realized: Vec<Vec<f64>>,
}

impl Series {
    fn new(method: String, variable: String) -> Self {
        Series {
            method,
            variable,
            intervals: Vec::new(),
            fans: Vec::new(),
            realized: Vec::new(),
        }
    }

    fn push(&mut self, hour: u8, intervals: Vec<PredictionInterval>, fan: Vec<f64>, y: f64) {
        let h = hour as usize - 1;
        while self.realized.len() <= h {
            self.intervals.push(Vec::new());
            self.fans.push(Vec::new());
            self.realized.push(Vec::new());
        }
        self.intervals[h].push(intervals);
        self.fans[h].push(fan);
        self.realized[h].push(y);
    }

    fn coverage(&self, levels: usize) -> Result<Vec<CoverageRow>> {
        let hours: Vec<usize> = (0..self.realized.len()).filter(|&h| !self.realized[h].is_empty()).collect();
        (0..levels)
            .map(|l| {
                let pis: Vec<Vec<PredictionInterval>> = hours
                    .iter()
                    .map(|&h| self.intervals[h].iter().map(|v| v[l]).collect())
                    .collect();
                let ys: Vec<Vec<f64>> = hours.iter().map(|&h| self.realized[h].clone()).collect();
                let mut report = picp(&pis, &ys)?;
                for (hc, &h) in report.hours.iter_mut().zip(&hours) {
                    hc.hour = h as u8 + 1;
                }
                let hits = report.hours.iter().map(|h| h.hits).sum();
                let n = report.hours.iter().map(|h| h.n).sum();
                Ok(CoverageRow {
                    method: self.method.clone(),
                    variable: self.variable.clone(),
                    pooled: kupiec(hits, n, report.nominal),
                    report,
                })
            })
            .collect()
    }

    fn crps(&self) -> Result<CrpsRow> {
        let mut hours = Vec::new();
        let (mut total, mut count) = (0.0, 0usize);
        for (h, (fans, ys)) in self.fans.iter().zip(&self.realized).enumerate() {
            if ys.is_empty() {
                continue;
            }
            let mut sum = 0.0;
            for (f, &y) in fans.iter().zip(ys) {
                sum += crps_from_fan(&QuantileFan::from_raw(f.clone())?, y);
            }
            total += sum;
            count += ys.len();
            hours.push((h as u8 + 1, ys.len(), sum / ys.len() as f64));
        }
        Ok(CrpsRow {
            method: self.method.clone(),
            variable: self.variable.clone(),
            hours,
            overall: total / count as f64,
        })
    }
}

fn strategy_rows(config: &ExperimentConfig, days: &[DayResult]) -> Result<Vec<StrategyRow>> {
    let trading: Vec<_> = days
        .iter()
        .flat_map(|d| d.hours.iter())
        .filter_map(|h| h.trading.as_ref())
        .collect();
    if trading.is_empty() {
        return Ok(Vec::new());
    }
    let realized: Vec<_> = trading.iter().map(|t| t.realized).collect();
    let params = &config.profit;
    let naive: Vec<TradeDecision> = realized
        .iter()
        .map(|r| naive_decision(NaiveMode::Unlimited, r.da))
        .collect();
    let bench = evaluate_strategy(&naive, &realized, params)?;
    let row = |strategy: Strategy, tau: Option<f64>, outcome: StrategyOutcome| StrategyRow {
        strategy,
        tau,
        vs_naive_average: relative_to(bench.average_profit, outcome.average_profit),
        vs_naive_per_trade: outcome
            .profit_per_trade
            .zip(bench.profit_per_trade)
            .map(|(v, b)| relative_to(b, v)),
        outcome,
    };
    let mut rows = Vec::new();
    for (s, &strategy) in config.strategies.iter().enumerate() {
        let decision = |t: &super::run::TradingRecord, stop: usize| {
            let d = &t.decisions[s];
            TradeDecision {
                strategy,
                q_star: d.q_star,
                curtail: d.curtail[stop.min(d.curtail.len() - 1)],
                criterion: d.criterion,
                degenerate_sr: d.degenerate_sr,
            }
        };
        if strategy.is_data_driven() {
            for (i, &tau) in config.stop_taus.iter().enumerate() {
                let ds: Vec<_> = trading.iter().map(|t| decision(t, i)).collect();
                rows.push(row(strategy, Some(tau), evaluate_strategy(&ds, &realized, params)?));
            }
        } else {
            let ds: Vec<_> = trading.iter().map(|t| decision(t, 0)).collect();
            rows.push(row(strategy, None, evaluate_strategy(&ds, &realized, params)?));
        }
    }
    Ok(rows)
}

fn reliability_row(method: String, variable: String, ranks: &[(u8, f64)], bins: usize, mode: RankMode) -> Result<ReliabilityRow> {
    let grouped = group_by_hour(ranks);
    Ok(ReliabilityRow {
        method,
        variable,
        counts: grouped.iter().map(Vec::len).collect(),
        report: reliability_index(&grouped, bins, mode)?,
    })
}

/// Aggregates per-day results into coverage, CRPS, reliability and trading scores.
pub fn summarize(config: &ExperimentConfig, days: &[DayResult]) -> Result<Summary> {
    let first = days
        .iter()
        .flat_map(|d| d.hours.first())
        .next()
        .ok_or_else(|| Error::Misaligned("no forecast days".into()))?;
    let levels = config.levels.len();
    let mut series: Vec<Series> = first
        .forecasts
        .iter()
        .map(|f| Series::new(f.method.label(), f.variable.code().into()))
        .collect();
    // univariate ranks per forecast slot, multivariate per ensemble slot
    let mut uni: Vec<Vec<(u8, f64)>> = vec![Vec::new(); first.forecasts.len()];
    let mut multi: Vec<Vec<(u8, f64)>> = vec![Vec::new(); first.ensembles.len()];
    for hour in days.iter().flat_map(|d| d.hours.iter()) {
        for (i, (f, s)) in hour.forecasts.iter().zip(&hour.scores).enumerate() {
            series[i].push(hour.hour, f.intervals.clone(), f.percentiles.clone(), s.realized);
            if let Some(r) = s.rank {
                uni[i].push((hour.hour, r));
            }
        }
        for (i, e) in hour.ensembles.iter().enumerate() {
            if let Some(r) = e.mv_rank {
                multi[i].push((hour.hour, r));
            }
        }
    }

    let mut coverage = Vec::new();
    let mut crps = Vec::new();
    let mut reliability = Vec::new();
    for (i, s) in series.iter().enumerate() {
        coverage.extend(s.coverage(levels)?);
        crps.push(s.crps()?);
        if !uni[i].is_empty() {
            reliability.push(reliability_row(s.method.clone(), s.variable.clone(), &uni[i], config.rank_bins, RankMode::Univariate)?);
        }
    }
    for (i, e) in first.ensembles.iter().enumerate() {
        if !multi[i].is_empty() {
            reliability.push(reliability_row(e.method.label(), "joint".into(), &multi[i], config.rank_bins, RankMode::Multivariate)?);
        }
    }
    Ok(Summary {
        coverage,
        crps,
        reliability,
        strategies: strategy_rows(config, days)?,
    })
}

/// Named report files, kept in memory until written.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReportBundle {
    pub files: Vec<(String, String)>,
}

impl ReportBundle {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|f| f.0 == name).map(|f| f.1.as_str())
    }

    fn add(&mut self, name: &str, content: String) {
        self.files.push((name.into(), content));
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, content) in &self.files {
            std::fs::write(dir.join(name), content)?;
        }
        Ok(())
    }
}

fn table(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn coverage_csv(rows: &[CoverageRow]) -> Result<String> {
    let header = strings(&[
        "method", "variable", "level", "hour", "n", "hits", "picp", "kupiec_lr", "kupiec_reject", "kupiec_pass_rate",
    ]);
    let mut out = Vec::new();
    for c in rows {
        let base = [c.method.clone(), c.variable.clone(), fmt6(c.report.nominal)];
        for h in &c.report.hours {
            let mut r = base.to_vec();
            r.extend([
                h.hour.to_string(),
                h.n.to_string(),
                h.hits.to_string(),
                fmt6(h.picp),
                fmt6(h.kupiec.lr),
                h.kupiec.reject.to_string(),
                String::new(),
            ]);
            out.push(r);
        }
        let mut r = base.to_vec();
        r.extend([
            "all".into(),
            c.report.hours.iter().map(|h| h.n).sum::<usize>().to_string(),
            c.report.hours.iter().map(|h| h.hits).sum::<usize>().to_string(),
            fmt6(c.report.picp),
            fmt6(c.pooled.lr),
            c.pooled.reject.to_string(),
            fmt6(c.report.kupiec_pass_rate),
        ]);
        out.push(r);
    }
    table(&header, &out)
}

fn crps_csv(rows: &[CrpsRow]) -> Result<String> {
    let mut out = Vec::new();
    for c in rows {
        for &(h, n, v) in &c.hours {
            out.push(vec![c.method.clone(), c.variable.clone(), h.to_string(), n.to_string(), fmt6(v)]);
        }
        let n: usize = c.hours.iter().map(|h| h.1).sum();
        out.push(vec![c.method.clone(), c.variable.clone(), "all".into(), n.to_string(), fmt6(c.overall)]);
    }
    table(&strings(&["method", "variable", "hour", "n", "crps"]), &out)
}

fn reliability_csv(rows: &[ReliabilityRow], bins: usize) -> Result<String> {
    let mut header = strings(&["method", "variable", "mode", "hour", "n", "delta"]);
    header.extend((1..=bins).map(|j| format!("f{j}")));
    let mut out = Vec::new();
    for r in rows {
        let mode = match r.report.mode {
            RankMode::Univariate => "univariate",
            RankMode::Multivariate => "multivariate",
        };
        for (i, (freq, delta)) in r.report.frequencies.iter().zip(&r.report.per_hour).enumerate() {
            let mut row = vec![r.method.clone(), r.variable.clone(), mode.into(), (i + 1).to_string(), r.counts[i].to_string(), fmt6(*delta)];
            row.extend(freq.iter().map(|&f| fmt6(f)));
            out.push(row);
        }
        let total: usize = r.counts.iter().sum();
        let mut row = vec![r.method.clone(), r.variable.clone(), mode.into(), "all".into(), total.to_string(), fmt6(r.report.overall)];
        row.extend(std::iter::repeat_n(String::new(), bins));
        out.push(row);
    }
    table(&header, &out)
}

fn strategies_csv(rows: &[StrategyRow]) -> Result<String> {
    let header = strings(&[
        "strategy",
        "tau",
        "trade_frequency",
        "average_profit",
        "profit_per_trade",
        "var5",
        "average_profit_vs_naive",
        "profit_per_trade_vs_naive",
    ]);
    let out: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.strategy.code().into(),
                opt6(r.tau),
                fmt6(r.outcome.trade_frequency),
                fmt6(r.outcome.average_profit),
                opt6(r.outcome.profit_per_trade),
                opt6(r.outcome.var5),
                fmt6(r.vs_naive_average),
                opt6(r.vs_naive_per_trade),
            ]
        })
        .collect();
    table(&header, &out)
}

fn forecast_header(levels: &[f64]) -> Vec<String> {
    let mut h = strings(&["date", "hour", "variable", "method", "realized"]);
    for &l in levels {
        h.push(format!("lo_{}", level_tag(l)));
        h.push(format!("hi_{}", level_tag(l)));
    }
    h.extend((0..PERCENTILES).map(percentile_tag));
    h
}

/// All report files of an experiment.
pub fn report_bundle(config: &ExperimentConfig, days: &[DayResult], summary: &Summary) -> Result<ReportBundle> {
    let mut b = ReportBundle::default();
    b.add("summary.txt", summary_text(config, days, summary));
    b.add("coverage.csv", coverage_csv(&summary.coverage)?);
    b.add("crps.csv", crps_csv(&summary.crps)?);
    b.add("reliability.csv", reliability_csv(&summary.reliability, config.rank_bins)?);
    b.add("strategies.csv", strategies_csv(&summary.strategies)?);

    // decisions
    let mut header = strings(&["date", "hour", "strategy", "q_star", "criterion", "w_hat", "realized_profit"]);
    header.extend(config.stop_taus.iter().map(|t| format!("curtail_{}", fmt6(*t))));
    let mut rows = Vec::new();
    for d in days {
        for h in &d.hours {
            let Some(t) = &h.trading else { continue };
            for rec in &t.decisions {
                let mut r = vec![
                    d.date.to_string(),
                    h.hour.to_string(),
                    rec.strategy.code().into(),
                    fmt6(rec.q_star),
                    fmt6(rec.criterion),
                    fmt6(t.realized.w_hat),
                    fmt6(realized_profit(rec.q_star, &t.realized, config)),
                ];
                r.extend((0..config.stop_taus.len()).map(|i| {
                    let c = rec.curtail[i.min(rec.curtail.len() - 1)];
                    u8::from(c).to_string()
                }));
                rows.push(r);
            }
        }
    }
    b.add("decisions.csv", table(&header, &rows)?);

    // points
    let mut rows = Vec::new();
    for d in days {
        for h in &d.hours {
            for (i, kind) in ModelKind::ALL.iter().enumerate() {
                rows.push(vec![
                    d.date.to_string(),
                    h.hour.to_string(),
                    kind.code().into(),
                    fmt6(h.points[i]),
                    fmt6(h.realized[i]),
                ]);
            }
        }
    }
    b.add("points.csv", table(&strings(&["date", "hour", "variable", "point", "realized"]), &rows)?);

    // ensemble metadata
    let mut rows = Vec::new();
    for d in days {
        for h in &d.hours {
            for e in &h.ensembles {
                rows.push(vec![
                    d.date.to_string(),
                    h.hour.to_string(),
                    e.method.label(),
                    e.members.to_string(),
                    e.meta.splits.to_string(),
                    days_date(days, e.meta.window.0, d),
                    days_date(days, e.meta.window.1, d),
                    e.meta.seed.map(|s| s.to_string()).unwrap_or_default(),
                    e.meta.note.clone(),
                ]);
            }
        }
    }
    b.add(
        "ensembles_meta.csv",
        table(
            &strings(&["date", "hour", "method", "members", "splits", "window_start", "window_end", "seed", "note"]),
            &rows,
        )?,
    );

    if config.write_forecasts {
        let mut rows = Vec::new();
        for d in days {
            for h in &d.hours {
                for (f, s) in h.forecasts.iter().zip(&h.scores) {
                    let mut r = vec![
                        d.date.to_string(),
                        h.hour.to_string(),
                        f.variable.code().into(),
                        f.method.label(),
                        fmt6(s.realized),
                    ];
                    for pi in &f.intervals {
                        r.push(fmt6(pi.lower));
                        r.push(fmt6(pi.upper));
                    }
                    r.extend(f.percentiles.iter().map(|&q| fmt6(q)));
                    rows.push(r);
                }
            }
        }
        b.add("forecasts.csv", table(&forecast_header(&config.levels), &rows)?);
    }
    Ok(b)
}

/// Window bounds are day indices; print them as dates relative to the target.
fn days_date(_days: &[DayResult], index: usize, target: &DayResult) -> String {
    let offset = target.day as i64 - index as i64;
    (target.date - chrono::Duration::days(offset)).to_string()
}

fn summary_text(config: &ExperimentConfig, days: &[DayResult], s: &Summary) -> String {
    let mut t = String::new();
    let (first, last) = (days.first().map(|d| d.date), days.last().map(|d| d.date));
    if let (Some(a), Some(b)) = (first, last) {
        let _ = writeln!(t, "evaluation period {a} .. {b} ({} days)", days.len());
    }
    let _ = writeln!(
        t,
        "calibration window {} days, seed {}, split ratio {}",
        config.calibration_window, config.seed, config.split_ratio
    );
    let _ = writeln!(t, "\ncoverage (mean hourly PICP / Kupiec pass rate)");
    for c in &s.coverage {
        let _ = writeln!(
            t,
            "  {:<10} {:<4} {:>5}%  picp {:<8} pass {}",
            c.method,
            c.variable,
            level_tag(c.report.nominal),
            fmt6(c.report.picp),
            fmt6(c.report.kupiec_pass_rate)
        );
    }
    let _ = writeln!(t, "\nCRPS");
    for c in &s.crps {
        let _ = writeln!(t, "  {:<10} {:<4} {}", c.method, c.variable, fmt6(c.overall));
    }
    if !s.reliability.is_empty() {
        let _ = writeln!(t, "\nreliability index (mean over hours)");
    }
    for r in &s.reliability {
        let _ = writeln!(t, "  {:<10} {:<5} {}", r.method, r.variable, fmt6(r.report.overall));
    }
    if !s.strategies.is_empty() {
        let _ = writeln!(t, "\ntrading (EUR/MWh)");
        for r in &s.strategies {
            let _ = writeln!(
                t,
                "  {:<10} tau {:<5} freq {:<8} avg {:<10} per trade {:<10} var5 {}",
                r.strategy.code(),
                opt6(r.tau),
                fmt6(r.outcome.trade_frequency),
                fmt6(r.outcome.average_profit),
                opt6(r.outcome.profit_per_trade),
                opt6(r.outcome.var5)
            );
        }
    }
    t
}

/// Coverage and CRPS recomputed from a `forecasts.csv` file.
pub fn evaluate_forecasts<R: Read>(input: R) -> Result<(Summary, ReportBundle)> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.into()))
    };
    let (hour_c, var_c, method_c, real_c) = (col("hour")?, col("variable")?, col("method")?, col("realized")?);
    let mut levels = Vec::new();
    for (i, h) in header.iter().enumerate() {
        if let Some(tag) = h.strip_prefix("lo_") {
            let level: f64 = tag
                .parse()
                .map_err(|_| Error::Config(format!("bad interval column `{h}`")))?;
            levels.push((level / 100.0, i, col(&format!("hi_{tag}"))?));
        }
    }
    let qcols = (0..PERCENTILES)
        .map(|i| col(&percentile_tag(i)))
        .collect::<Result<Vec<_>>>()?;

    let mut series: BTreeMap<(String, String), Series> = BTreeMap::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| Error::InvalidValue {
                line: line + 2,
                column: header[i].to_string(),
                value: rec[i].to_string(),
            })
        };
        let hour: u8 = rec[hour_c].parse().map_err(|_| Error::InvalidValue {
            line: line + 2,
            column: "hour".into(),
            value: rec[hour_c].to_string(),
        })?;
        if hour == 0 {
            return Err(Error::InvalidValue { line: line + 2, column: "hour".into(), value: "0".into() });
        }
        let intervals = levels
            .iter()
            .map(|&(nominal, lo, hi)| Ok(PredictionInterval { lower: num(lo)?, upper: num(hi)?, nominal }))
            .collect::<Result<Vec<_>>>()?;
        let fan = qcols.iter().map(|&i| num(i)).collect::<Result<Vec<_>>>()?;
        let key = (rec[method_c].to_string(), rec[var_c].to_string());
        series
            .entry(key.clone())
            .or_insert_with(|| Series::new(key.0, key.1))
            .push(hour, intervals, fan, num(real_c)?);
    }
    let mut summary = Summary {
        coverage: Vec::new(),
        crps: Vec::new(),
        reliability: Vec::new(),
        strategies: Vec::new(),
    };
    for s in series.values() {
        summary.coverage.extend(s.coverage(levels.len())?);
        summary.crps.push(s.crps()?);
    }
    let mut b = ReportBundle::default();
    b.add("coverage.csv", coverage_csv(&summary.coverage)?);
    b.add("crps.csv", crps_csv(&summary.crps)?);
    Ok((summary, b))
}

/// Figure series from `strategies.csv` and `decisions.csv`: one file per
/// metric against the stopping quantile, and a histogram of chosen q.
pub fn figure_series<R1: Read, R2: Read>(strategies: R1, decisions: R2) -> Result<ReportBundle> {
    let mut reader = csv::Reader::from_reader(strategies);
    let header = reader.headers()?.clone();
    let col = |h: &csv::StringRecord, name: &str| {
        h.iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingColumn(name.into()))
    };
    let (sc, tc) = (col(&header, "strategy")?, col(&header, "tau")?);
    let metrics = ["average_profit", "profit_per_trade", "trade_frequency", "var5"];
    let mcols = metrics
        .iter()
        .map(|m| col(&header, m))
        .collect::<Result<Vec<_>>>()?;
    // tau -> strategy -> values
    let mut grid: BTreeMap<String, BTreeMap<String, Vec<String>>> = BTreeMap::new();
    let mut baselines: Vec<(String, Vec<String>)> = Vec::new();
    let mut order: Vec<String> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let values: Vec<String> = mcols.iter().map(|&i| rec[i].to_string()).collect();
        let strategy = rec[sc].to_string();
        if rec[tc].is_empty() {
            baselines.push((strategy, values));
        } else {
            if !order.contains(&strategy) {
                order.push(strategy.clone());
            }
            grid.entry(rec[tc].to_string()).or_default().insert(strategy, values);
        }
    }
    let mut taus: Vec<(f64, String)> = grid
        .keys()
        .map(|k| k.parse().map(|v: f64| (v, k.clone())))
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config("non-numeric tau in strategies".into()))?;
    taus.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut b = ReportBundle::default();
    for (m, metric) in metrics.iter().enumerate() {
        let mut header = vec!["tau".to_string()];
        header.extend(order.iter().cloned());
        header.extend(baselines.iter().map(|(s, _)| s.clone()));
        let rows: Vec<Vec<String>> = taus
            .iter()
            .map(|(_, key)| {
                let mut r = vec![key.clone()];
                r.extend(order.iter().map(|s| grid[key].get(s).map(|v| v[m].clone()).unwrap_or_default()));
                r.extend(baselines.iter().map(|(_, v)| v[m].clone()));
                r
            })
            .collect();
        b.add(&format!("figure_{metric}.csv"), table(&header, &rows)?);
    }

    let mut reader = csv::Reader::from_reader(decisions);
    let header = reader.headers()?.clone();
    let (sc, qc) = (col(&header, "strategy")?, col(&header, "q_star")?);
    let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec?;
        *counts.entry((rec[sc].to_string(), rec[qc].to_string())).or_default() += 1;
    }
    let mut rows: Vec<(String, f64, String, usize)> = Vec::new();
    for ((s, q), n) in counts {
        let v: f64 = q
            .parse()
            .map_err(|_| Error::Config(format!("non-numeric q_star `{q}`")))?;
        rows.push((s, v, q, n));
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let rows: Vec<Vec<String>> = rows
        .into_iter()
        .map(|(s, _, q, n)| vec![s, q, n.to_string()])
        .collect();
    b.add("figure_q_histogram.csv", table(&strings(&["strategy", "q_star", "count"]), &rows)?);
    Ok(b)
}
