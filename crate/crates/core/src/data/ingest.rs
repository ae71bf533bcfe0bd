use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};

use super::raster::{RasterSeries, DEFAULT_PERIOD_SECS};
use crate::error::{data, Result};

/// Largest share of interpolated cells tolerated per sensor.
pub const MAX_MISSING_FRACTION: f64 = 0.10;

const DATETIME_FORMATS: &[&str] = &[
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M",
    "%m/%d/%Y %H:%M:%S",
    "%m/%d/%Y %H:%M",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CsvLayout {
    /// `timestamp,s1,s2,...`
    Wide,
    /// `timestamp,sensor_id,flow`
    Long,
    /// Long when the header is exactly three columns ending in a sensor id and a value.
    Auto,
}

#[derive(Clone, Debug)]
pub struct CsvSchema {
    pub layout: CsvLayout,
    /// Line order of sensors. Wide files default to column order, long
    /// files to first appearance.
    pub sensor_order: Option<Vec<String>>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            layout: CsvLayout::Auto,
            sensor_order: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct IngestReport {
    pub series: RasterSeries,
    /// Interpolated cells per sensor.
    pub filled: Vec<usize>,
}

/// Numeric timestamps are taken as-is; date-times become epoch seconds.
fn parse_timestamp(raw: &str) -> Option<(f64, bool)> {
    let raw = raw.trim();
    if let Ok(v) = raw.parse::<f64>() {
        return Some((v, false));
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some((dt.timestamp() as f64, true));
    }
    DATETIME_FORMATS
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(raw, fmt).ok())
        .map(|dt| (dt.and_utc().timestamp() as f64, true))
}

fn parse_cell(raw: &str) -> Result<Option<f64>> {
    let raw = raw.trim();
    if raw.is_empty() || ["na", "nan", "null"].contains(&raw.to_ascii_lowercase().as_str()) {
        return Ok(None);
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => data(format!("unparseable value {raw:?}")),
    }
}

pub fn ingest_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<IngestReport> {
    let file = std::fs::File::open(path.as_ref())?;
    ingest_reader(file, schema)
}

pub fn ingest_reader(reader: impl Read, schema: &CsvSchema) -> Result<IngestReport> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers.len() < 2 {
        return data("CSV needs a timestamp column and at least one value column");
    }
    let layout = match schema.layout {
        CsvLayout::Auto => {
            let h: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
            if h.len() == 3 && (h[1] == "sensor_id" || h[1] == "sensor") {
                CsvLayout::Long
            } else {
                CsvLayout::Wide
            }
        }
        other => other,
    };

    // (timestamp label, per-sensor cells)
    let mut times: Vec<(String, f64, bool)> = Vec::new();
    let mut sensor_ids: Vec<String>;
    let mut cells: Vec<Vec<Option<f64>>>;

    match layout {
        CsvLayout::Wide => {
            sensor_ids = headers[1..].to_vec();
            cells = vec![Vec::new(); sensor_ids.len()];
            for (row_no, record) in rdr.records().enumerate() {
                let record = record?;
                let label = record.get(0).unwrap_or_default().to_string();
                let Some((ts, is_dt)) = parse_timestamp(&label) else {
                    return data(format!("row {}: unparseable timestamp {label:?}", row_no + 2));
                };
                times.push((label, ts, is_dt));
                for (s, column) in cells.iter_mut().enumerate() {
                    column.push(parse_cell(record.get(s + 1).unwrap_or_default())?);
                }
            }
        }
        CsvLayout::Long | CsvLayout::Auto => {
            sensor_ids = Vec::new();
            let mut sensor_pos: HashMap<String, usize> = HashMap::new();
            let mut entries: Vec<(usize, usize, Option<f64>)> = Vec::new();
            for (row_no, record) in rdr.records().enumerate() {
                let record = record?;
                let label = record.get(0).unwrap_or_default().to_string();
                let Some((ts, is_dt)) = parse_timestamp(&label) else {
                    return data(format!("row {}: unparseable timestamp {label:?}", row_no + 2));
                };
                let same_as_last = times.last().is_some_and(|(l, _, _)| *l == label);
                if !same_as_last {
                    times.push((label, ts, is_dt));
                }
                let sensor = record.get(1).unwrap_or_default().to_string();
                let pos = *sensor_pos.entry(sensor.clone()).or_insert_with(|| {
                    sensor_ids.push(sensor);
                    sensor_ids.len() - 1
                });
                entries.push((times.len() - 1, pos, parse_cell(record.get(2).unwrap_or_default())?));
            }
            cells = vec![vec![None; times.len()]; sensor_ids.len()];
            let mut seen = vec![vec![false; times.len()]; sensor_ids.len()];
            for (t, s, v) in entries {
                if seen[s][t] {
                    return data(format!(
                        "sensor {} reported twice at {}",
                        sensor_ids[s], times[t].0
                    ));
                }
                seen[s][t] = true;
                cells[s][t] = v;
            }
        }
    }

    for pair in times.windows(2) {
        if pair[1].1 <= pair[0].1 {
            return data(format!(
                "timestamps not strictly increasing: {} follows {}",
                pair[1].0, pair[0].0
            ));
        }
    }
    if times.is_empty() {
        return data("CSV has no data rows");
    }

    if let Some(order) = &schema.sensor_order {
        let mut reordered = Vec::with_capacity(order.len());
        for id in order {
            let Some(pos) = sensor_ids.iter().position(|s| s == id) else {
                return data(format!("sensor {id} not present in the file"));
            };
            reordered.push(std::mem::take(&mut cells[pos]));
        }
        cells = reordered;
        sensor_ids = order.clone();
    }

    let n_times = times.len();
    let mut filled = Vec::with_capacity(sensor_ids.len());
    let mut values = Vec::with_capacity(sensor_ids.len() * n_times);
    for (id, column) in sensor_ids.iter().zip(&cells) {
        let missing = column.iter().filter(|c| c.is_none()).count();
        if missing as f64 > MAX_MISSING_FRACTION * n_times as f64 {
            return data(format!(
                "sensor {id} is missing {missing} of {n_times} cells (limit {:.0}%)",
                MAX_MISSING_FRACTION * 100.0
            ));
        }
        values.extend(interpolate_gaps(column));
        filled.push(missing);
    }

    let period_secs = match (times.first(), times.get(1)) {
        (Some(a), Some(b)) if a.2 && b.2 => (b.1 - a.1) as u64,
        _ => DEFAULT_PERIOD_SECS,
    };
    let series = RasterSeries::new(
        sensor_ids,
        times.into_iter().map(|(l, _, _)| l).collect(),
        1,
        values,
        period_secs,
    )?;
    Ok(IngestReport { series, filled })
}

/// Linear interpolation over interior gaps; leading and trailing gaps take
/// the nearest observed value.
pub fn interpolate_gaps(column: &[Option<f64>]) -> Vec<f64> {
    let known: Vec<(usize, f64)> = column
        .iter()
        .enumerate()
        .filter_map(|(t, v)| v.map(|v| (t, v)))
        .collect();
    if known.is_empty() {
        return vec![0.0; column.len()];
    }
    let mut out = Vec::with_capacity(column.len());
    let mut next = 0;
    for t in 0..column.len() {
        while next < known.len() && known[next].0 < t {
            next += 1;
        }
        let v = match (next.checked_sub(1).map(|p| known[p]), known.get(next)) {
            (_, Some(&(kt, kv))) if kt == t => kv,
            (Some((lt, lv)), Some(&(rt, rv))) => lv + (rv - lv) * (t - lt) as f64 / (rt - lt) as f64,
            (Some((_, lv)), None) => lv,
            (None, Some(&(_, rv))) => rv,
            (None, None) => unreachable!("known is non-empty"),
        };
        out.push(v);
    }
    out
}
