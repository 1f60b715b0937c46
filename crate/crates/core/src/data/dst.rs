use super::{Cell, MarketPanel, RawPanel, Series, HOURS};
use crate::error::{Error, Result};

/// Repairs the time-change artefacts of a raw panel.
///
/// Duplicated hours become the mean of the two values. A missing cell becomes
/// the mean of the nearest observed values before and after it in the same
/// series. Fuel closes on non-trading days are carried forward from the last
/// trading day.
pub fn dst_normalize(raw: &RawPanel) -> Result<MarketPanel> {
    let days = raw.days();
    let mut hourly = Vec::with_capacity(Series::ALL.len());
    for (series, cells) in Series::ALL.iter().zip(&raw.hourly) {
        if cells.len() != days * HOURS {
            return Err(Error::InvalidPanel(format!(
                "series {} has {} cells for {days} days",
                series.code(),
                cells.len()
            )));
        }
        let mut values: Vec<Option<f64>> = cells
            .iter()
            .map(|c| match *c {
                Cell::Observed(v) => Some(v),
                Cell::Duplicated(a, b) => Some(0.5 * (a + b)),
                Cell::Missing => None,
            })
            .collect();

        let mut i = 0;
        while i < values.len() {
            if values[i].is_some() {
                i += 1;
                continue;
            }
            let run_end = (i..values.len())
                .find(|&j| values[j].is_some())
                .unwrap_or(values.len());
            let before = i.checked_sub(1).and_then(|j| values[j]);
            let after = values.get(run_end).copied().flatten();
            let (Some(a), Some(b)) = (before, after) else {
                let at = if before.is_none() { i } else { run_end - 1 };
                return Err(Error::GapAtBoundary {
                    series: series.code(),
                    date: raw.dates[at / HOURS],
                    hour: (at % HOURS + 1) as u8,
                });
            };
            let fill = 0.5 * (a + b);
            for v in &mut values[i..run_end] {
                *v = Some(fill);
            }
            i = run_end;
        }
        hourly.push(values.into_iter().map(|v| v.expect("filled")).collect());
    }

    let forward_fill = |values: &[Option<f64>], code: &'static str| -> Result<Vec<f64>> {
        let mut last = None;
        values
            .iter()
            .enumerate()
            .map(|(d, v)| {
                last = v.or(last);
                last.ok_or(Error::GapAtBoundary {
                    series: code,
                    date: raw.dates[d],
                    hour: 1,
                })
            })
            .collect()
    };
    let coal = forward_fill(&raw.coal, "C")?;
    let gas = forward_fill(&raw.gas, "G")?;
    MarketPanel::new(raw.dates.clone(), hourly, coal, gas)
}
