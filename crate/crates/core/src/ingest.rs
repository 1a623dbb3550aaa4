//! CSV ingestion of geolocated incident records.
//!
//! Public incident feeds are dirty; malformed rows are skipped and
//! counted per reason rather than failing the run, but a skip ratio
//! above 50% aborts since that almost always means a misconfigured
//! schema.

use std::io::Read;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One geolocated event: 1-based day index within the schema's date
/// range, plus latitude/longitude in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidentRecord {
    pub day: u32,
    pub lat: f64,
    pub lon: f64,
}

/// Column names, date format, and date range for one CSV shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub date_col: String,
    pub lat_col: String,
    pub lon_col: String,
    /// chrono format string; parsed first as a datetime, then as a date.
    pub date_format: String,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
}

impl DatasetSchema {
    /// Named presets for the two supported public feeds plus the bundled
    /// synthetic fixture. All fields can be overridden via config.
    pub fn preset(name: &str) -> Option<DatasetSchema> {
        match name {
            "cincinnati" => Some(DatasetSchema {
                date_col: "CREATE_TIME_INCIDENT".to_string(),
                lat_col: "LATITUDE_X".to_string(),
                lon_col: "LONGITUDE_X".to_string(),
                date_format: "%m/%d/%Y %I:%M:%S %p".to_string(),
                start_date: NaiveDate::from_ymd_opt(2016, 1, 1).unwrap(),
                end_date: NaiveDate::from_ymd_opt(2019, 5, 19).unwrap(),
            }),
            "connecticut" => Some(DatasetSchema {
                date_col: "Date".to_string(),
                lat_col: "Latitude".to_string(),
                lon_col: "Longitude".to_string(),
                date_format: "%m/%d/%Y".to_string(),
                start_date: NaiveDate::from_ymd_opt(2012, 1, 1).unwrap(),
                end_date: NaiveDate::from_ymd_opt(2018, 12, 31).unwrap(),
            }),
            "synthetic" => Some(DatasetSchema {
                date_col: "date".to_string(),
                lat_col: "lat".to_string(),
                lon_col: "lon".to_string(),
                date_format: "%Y-%m-%d".to_string(),
                start_date: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
                // end_date is overridden per fixture length
                end_date: NaiveDate::from_ymd_opt(2024, 12, 31).unwrap(),
            }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.start_date > self.end_date {
            return Err(Error::config(format!(
                "schema start_date {} is after end_date {}",
                self.start_date, self.end_date
            )));
        }
        Ok(())
    }

    /// Number of calendar days in the range, inclusive.
    pub fn day_count(&self) -> u32 {
        (self.end_date - self.start_date).num_days() as u32 + 1
    }

    fn parse_date(&self, raw: &str) -> Option<NaiveDate> {
        if let Ok(dt) = NaiveDateTime::parse_from_str(raw, &self.date_format) {
            return Some(dt.date());
        }
        NaiveDate::parse_from_str(raw, &self.date_format).ok()
    }
}

/// Geographic bounding box in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    pub fn validate(&self) -> Result<()> {
        if !(self.lat_min < self.lat_max) || !(self.lon_min < self.lon_max) {
            return Err(Error::config(format!(
                "degenerate bounding box [{}, {}] x [{}, {}]",
                self.lat_min, self.lat_max, self.lon_min, self.lon_max
            )));
        }
        Ok(())
    }

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        lat >= self.lat_min && lat <= self.lat_max && lon >= self.lon_min && lon <= self.lon_max
    }
}

/// Per-reason counts of rows dropped during parsing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipReport {
    pub missing_coord: usize,
    pub bad_coord: usize,
    pub missing_date: usize,
    pub bad_date: usize,
    pub out_of_range_date: usize,
}

impl SkipReport {
    pub fn total(&self) -> usize {
        self.missing_coord
            + self.bad_coord
            + self.missing_date
            + self.bad_date
            + self.out_of_range_date
    }
}

/// Parse a header-first CSV stream into day-indexed incident records.
///
/// Rows with missing or unparseable coordinates/dates are counted in
/// the [`SkipReport`]; coordinates outside [-90, 90] / [-180, 180] and
/// dates outside the schema range are likewise skipped, never silently
/// dropped. Missing schema columns and empty inputs are fatal, as is a
/// skip ratio above 50%.
pub fn parse_incidents<R: Read>(
    reader: R,
    schema: &DatasetSchema,
) -> Result<(Vec<IncidentRecord>, SkipReport)> {
    schema.validate()?;
    let mut csv_reader = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = csv_reader
        .headers()
        .map_err(|e| Error::data(format!("cannot read CSV header: {e}")))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::data(format!("schema column '{name}' not found in CSV header")))
    };
    let date_idx = col(&schema.date_col)?;
    let lat_idx = col(&schema.lat_col)?;
    let lon_idx = col(&schema.lon_col)?;

    let mut records = Vec::new();
    let mut skipped = SkipReport::default();
    let mut rows = 0usize;
    for row in csv_reader.records() {
        let row = row.map_err(|e| Error::data(format!("malformed CSV row: {e}")))?;
        rows += 1;
        let field = |idx: usize| row.get(idx).unwrap_or("").trim();

        let date_raw = field(date_idx);
        if date_raw.is_empty() {
            skipped.missing_date += 1;
            continue;
        }
        let date = match schema.parse_date(date_raw) {
            Some(d) => d,
            None => {
                skipped.bad_date += 1;
                continue;
            }
        };
        if date < schema.start_date || date > schema.end_date {
            skipped.out_of_range_date += 1;
            continue;
        }

        let lat_raw = field(lat_idx);
        let lon_raw = field(lon_idx);
        if lat_raw.is_empty() || lon_raw.is_empty() {
            skipped.missing_coord += 1;
            continue;
        }
        let (lat, lon) = match (lat_raw.parse::<f64>(), lon_raw.parse::<f64>()) {
            (Ok(lat), Ok(lon)) if lat.is_finite() && lon.is_finite() => (lat, lon),
            _ => {
                skipped.bad_coord += 1;
                continue;
            }
        };
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            skipped.bad_coord += 1;
            continue;
        }

        let day = (date - schema.start_date).num_days() as u32 + 1;
        records.push(IncidentRecord { day, lat, lon });
    }

    if rows == 0 {
        return Err(Error::data("CSV contains no data rows".to_string()));
    }
    if skipped.total() * 2 > rows {
        return Err(Error::data(format!(
            "{} of {} rows skipped (>50%); schema is likely misconfigured",
            skipped.total(),
            rows
        )));
    }
    debug_assert_eq!(records.len() + skipped.total(), rows);
    Ok((records, skipped))
}

/// Bucket records by day index. The output always has exactly
/// `schema.day_count()` entries; days with no incidents map to empty
/// lists, which rasterize to blank images downstream. Within-day order
/// follows the input.
pub fn group_by_day(records: &[IncidentRecord], schema: &DatasetSchema) -> Vec<Vec<IncidentRecord>> {
    let days = schema.day_count() as usize;
    let mut grouped: Vec<Vec<IncidentRecord>> = vec![Vec::new(); days];
    for r in records {
        debug_assert!(r.day >= 1 && r.day as usize <= days);
        grouped[r.day as usize - 1].push(r.clone());
    }
    grouped
}

/// Pick the scale space: a configured box verbatim, otherwise the tight
/// box over all records expanded by 2% of the span per side. Degenerate
/// extents (single point, collinear records) are fatal and demand an
/// explicit box.
pub fn resolve_bbox(
    records: &[IncidentRecord],
    configured: Option<BoundingBox>,
) -> Result<BoundingBox> {
    if let Some(bbox) = configured {
        bbox.validate()?;
        return Ok(bbox);
    }
    if records.is_empty() {
        return Err(Error::data(
            "no records and no configured bounding box".to_string(),
        ));
    }
    let mut lat_min = f64::INFINITY;
    let mut lat_max = f64::NEG_INFINITY;
    let mut lon_min = f64::INFINITY;
    let mut lon_max = f64::NEG_INFINITY;
    for r in records {
        lat_min = lat_min.min(r.lat);
        lat_max = lat_max.max(r.lat);
        lon_min = lon_min.min(r.lon);
        lon_max = lon_max.max(r.lon);
    }
    let lat_span = lat_max - lat_min;
    let lon_span = lon_max - lon_min;
    if lat_span <= 0.0 || lon_span <= 0.0 {
        return Err(Error::data(format!(
            "records span a degenerate box [{lat_min}, {lat_max}] x [{lon_min}, {lon_max}]; \
             configure an explicit bounding box"
        )));
    }
    Ok(BoundingBox {
        lat_min: lat_min - 0.02 * lat_span,
        lat_max: lat_max + 0.02 * lat_span,
        lon_min: lon_min - 0.02 * lon_span,
        lon_max: lon_max + 0.02 * lon_span,
    })
}

/// Drop records outside the box; returns survivors and the drop count.
pub fn filter_bbox(records: Vec<IncidentRecord>, bbox: &BoundingBox) -> (Vec<IncidentRecord>, usize) {
    let before = records.len();
    let kept: Vec<IncidentRecord> = records
        .into_iter()
        .filter(|r| bbox.contains(r.lat, r.lon))
        .collect();
    let dropped = before - kept.len();
    (kept, dropped)
}
