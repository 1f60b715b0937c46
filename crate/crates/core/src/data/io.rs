use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use super::{Cell, Fuel, MarketPanel, RawPanel, Series, HOURS};
use crate::error::{Error, Result};

/// Maps logical columns (`date`, `hour`, `DA`, ..., `G`) to CSV header names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnSchema {
    names: HashMap<String, String>,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        let names = Self::logical_columns()
            .map(|c| (c.to_string(), c.to_string()))
            .collect();
        ColumnSchema { names }
    }
}

impl ColumnSchema {
    pub fn logical_columns() -> impl Iterator<Item = &'static str> {
        ["date", "hour"]
            .into_iter()
            .chain(Series::ALL.iter().map(|s| s.code()))
            .chain(Fuel::ALL.iter().map(|f| f.code()))
    }

    /// Rename a logical column. Unknown logical names are rejected.
    pub fn rename(&mut self, logical: &str, header: impl Into<String>) -> Result<()> {
        match self.names.get_mut(logical) {
            Some(slot) => {
                *slot = header.into();
                Ok(())
            }
            None => Err(Error::Config(format!("unknown panel column `{logical}`"))),
        }
    }

    pub fn header(&self, logical: &str) -> &str {
        &self.names[logical]
    }
}

pub fn load_panel(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<RawPanel> {
    read_panel(File::open(path)?, schema)
}

struct DayRows {
    date: NaiveDate,
    // per hour: list of rows, each row = values for the 8 hourly series
    hours: Vec<Vec<[Option<f64>; 8]>>,
    last_hour: u8,
    coal: Option<f64>,
    gas: Option<f64>,
}

/// Reads one row per (date, hour). Spring-forward gaps (a missing hour row)
/// and fall-back duplicates (two rows for one hour) are kept as explicit
/// [`Cell`] markers for [`super::dst_normalize`]. Blank fuel cells mark
/// non-trading days.
pub fn read_panel<R: Read>(reader: R, schema: &ColumnSchema) -> Result<RawPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |logical: &str| -> Result<usize> {
        let name = schema.header(logical);
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let date_col = find("date")?;
    let hour_col = find("hour")?;
    let series_cols = Series::ALL
        .iter()
        .map(|s| find(s.code()))
        .collect::<Result<Vec<_>>>()?;
    let coal_col = find(Fuel::Coal.code())?;
    let gas_col = find(Fuel::Gas.code())?;

    let mut days: Vec<DayRows> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let raw_date = record.get(date_col).unwrap_or("");
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|_| {
            Error::UnparseableTimestamp {
                line,
                value: raw_date.to_string(),
            }
        })?;
        let raw_hour = record.get(hour_col).unwrap_or("");
        let hour: i64 = raw_hour.parse().map_err(|_| Error::UnparseableTimestamp {
            line,
            value: raw_hour.to_string(),
        })?;
        if !(1..=24).contains(&hour) {
            return Err(Error::NonHourlyResolution(format!(
                "line {line}: hour {hour} outside 1..=24"
            )));
        }

        let parse = |col: usize, logical: &str| -> Result<Option<f64>> {
            let raw = record.get(col).unwrap_or("");
            if raw.is_empty() {
                return Ok(None);
            }
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                _ => Err(Error::InvalidValue {
                    line,
                    column: schema.header(logical).to_string(),
                    value: raw.to_string(),
                }),
            }
        };
        let mut values = [None; 8];
        for (k, (series, &col)) in Series::ALL.iter().zip(&series_cols).enumerate() {
            let v = parse(col, series.code())?;
            if let Some(x) = v {
                if series.is_generation() && x < 0.0 {
                    return Err(Error::NegativeGeneration {
                        series: series.code(),
                        date,
                        hour: hour as u8,
                        value: x,
                    });
                }
            }
            values[k] = v;
        }
        let coal = parse(coal_col, Fuel::Coal.code())?;
        let gas = parse(gas_col, Fuel::Gas.code())?;

        if let Some(last) = days.last() {
            if date != last.date && last.date.succ_opt() != Some(date) {
                let why = if date < last.date {
                    format!("date {date} after {} (rows must be in time order)", last.date)
                } else {
                    format!("days missing between {} and {date}", last.date)
                };
                return Err(Error::NonHourlyResolution(format!("line {line}: {why}")));
            }
        }
        if days.last().map(|d| d.date) != Some(date) {
            days.push(DayRows {
                date,
                hours: vec![Vec::new(); HOURS],
                last_hour: 0,
                coal: None,
                gas: None,
            });
        }
        let day = days.last_mut().expect("pushed above");
        if (hour as u8) < day.last_hour {
            return Err(Error::NonHourlyResolution(format!(
                "line {line}: hour {hour} after hour {} on {date}",
                day.last_hour
            )));
        }
        day.last_hour = hour as u8;
        day.hours[hour as usize - 1].push(values);
        day.coal = coal.or(day.coal);
        day.gas = gas.or(day.gas);
    }
    if days.is_empty() {
        return Err(Error::InvalidPanel("no data rows".into()));
    }

    let n = days.len();
    let mut hourly = vec![Vec::with_capacity(n * HOURS); Series::ALL.len()];
    for day in &days {
        let absent = day.hours.iter().filter(|r| r.is_empty()).count();
        let doubled = day.hours.iter().filter(|r| r.len() == 2).count();
        if absent > 1 || doubled > 1 || day.hours.iter().any(|r| r.len() > 2) {
            return Err(Error::NonHourlyResolution(format!(
                "{}: {} rows do not form a 23/24/25-hour day",
                day.date,
                day.hours.iter().map(Vec::len).sum::<usize>()
            )));
        }
        for rows in &day.hours {
            for (k, series_cells) in hourly.iter_mut().enumerate() {
                let cell = match rows.as_slice() {
                    [] => Cell::Missing,
                    [r] => r[k].map_or(Cell::Missing, Cell::Observed),
                    [a, b] => match (a[k], b[k]) {
                        (Some(x), Some(y)) => Cell::Duplicated(x, y),
                        (Some(x), None) | (None, Some(x)) => Cell::Observed(x),
                        (None, None) => Cell::Missing,
                    },
                    _ => unreachable!("checked above"),
                };
                series_cells.push(cell);
            }
        }
    }
    Ok(RawPanel {
        dates: days.iter().map(|d| d.date).collect(),
        hourly,
        coal: days.iter().map(|d| d.coal).collect(),
        gas: days.iter().map(|d| d.gas).collect(),
    })
}

pub fn write_panel(panel: &MarketPanel, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_panel_to(panel, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Writes the panel with default column names. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_panel_to<W: Write>(panel: &MarketPanel, out: &mut W) -> Result<()> {
    let mut header: Vec<&str> = vec!["date", "hour"];
    header.extend(Series::ALL.iter().map(|s| s.code()));
    header.extend(Fuel::ALL.iter().map(|f| f.code()));
    writeln!(out, "{}", header.join(","))?;
    for day in 0..panel.days() {
        let date = panel.date(day);
        for hour in 1..=HOURS as u8 {
            write!(out, "{date},{hour}")?;
            for s in Series::ALL {
                write!(out, ",{}", panel.get(s, day, hour))?;
            }
            for f in Fuel::ALL {
                write!(out, ",{}", panel.fuel(f, day))?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}
