//! Country data ingestion.
//!
//! Input is a daily CSV in the layout of the COVID-19 Data Hub: cumulative
//! counters (`confirmed`, `deaths`, `tests`, `vaccines`), current hospital
//! occupancy (`hosp`) and ordinal policy indicators. Output is a contiguous
//! daily [`PolicyDay`] timeline plus the ground-truth series, all still at
//! country scale.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{EpiError, Result};
use crate::policy::PolicyDay;

pub const REQUIRED_COLUMNS: [&str; 11] = [
    "date",
    "confirmed",
    "deaths",
    "hosp",
    "tests",
    "vaccines",
    "stay_home_restrictions",
    "school_closing",
    "workplace_closing",
    "testing_policy",
    "contact_tracing",
];

pub const INTERNATIONAL_COLUMN: &str = "international_movement_restrictions";

/// Observed outcome series, country scale, one entry per day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub dates: Vec<NaiveDate>,
    pub confirmed_cumulative: Vec<f64>,
    pub deaths_cumulative: Vec<f64>,
    pub hospitalized_current: Vec<f64>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn daily_deaths(&self) -> Vec<f64> {
        daily_from_cumulative(&self.deaths_cumulative)
    }

    /// Same series divided by `scale_factor` (persons per node).
    pub fn scaled(&self, scale_factor: f64) -> GroundTruth {
        let s = |v: &[f64]| v.iter().map(|x| x / scale_factor).collect();
        GroundTruth {
            dates: self.dates.clone(),
            confirmed_cumulative: s(&self.confirmed_cumulative),
            deaths_cumulative: s(&self.deaths_cumulative),
            hospitalized_current: s(&self.hospitalized_current),
        }
    }
}

/// Day-over-day differences with negative corrections clamped to zero; the
/// first day keeps its cumulative value.
pub fn daily_from_cumulative(cumulative: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    cumulative
        .iter()
        .map(|&c| {
            let d = (c - prev).max(0.0);
            prev = c;
            d
        })
        .collect()
}

/// Centered moving average; the window is truncated at both ends.
pub fn smooth(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window % 2 == 0 {
        return Err(EpiError::InvalidInput(format!(
            "smoothing window must be odd and positive, got {window}"
        )));
    }
    let half = window / 2;
    let n = series.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in series {
        prefix.push(prefix.last().unwrap() + v);
    }
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect())
}

#[derive(Debug, Default, Clone)]
struct RawRow {
    confirmed: Option<f64>,
    deaths: Option<f64>,
    hosp: Option<f64>,
    tests: Option<f64>,
    vaccines: Option<f64>,
    stay_home: Option<f64>,
    school: Option<f64>,
    workplace: Option<f64>,
    testing: Option<f64>,
    tracing: Option<f64>,
    international: Option<f64>,
}

fn parse_cell(raw: &str, column: &str, line: u64) -> Result<Option<f64>> {
    let t = raw.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    t.parse::<f64>().map(Some).map_err(|_| EpiError::Row {
        line,
        reason: format!("column `{column}`: cannot parse `{t}` as a number"),
    })
}

/// A series observed on some days, expanded to every day of the range.
struct Sparse<'a> {
    start: NaiveDate,
    n_days: usize,
    rows: &'a BTreeMap<NaiveDate, RawRow>,
}

impl Sparse<'_> {
    fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.n_days).map(move |k| self.start + chrono::Duration::days(k as i64))
    }

    /// Carry the last value forward; `default` before the first value.
    fn forward_fill(&self, get: impl Fn(&RawRow) -> Option<f64>, default: f64) -> Vec<f64> {
        let mut last = default;
        self.dates()
            .map(|d| {
                if let Some(v) = self.rows.get(&d).and_then(&get) {
                    last = v;
                }
                last
            })
            .collect()
    }

    /// Cumulative counter: dates absent from the file are linearly
    /// interpolated between neighbouring rows, empty cells in present rows are
    /// carried forward.
    fn cumulative(&self, get: impl Fn(&RawRow) -> Option<f64>) -> Vec<f64> {
        let filled = self.forward_fill(&get, 0.0);
        let present: Vec<(usize, f64)> = self
            .dates()
            .enumerate()
            .filter(|(_, d)| self.rows.contains_key(d))
            .map(|(k, _)| (k, filled[k]))
            .collect();
        let mut out = filled;
        for w in present.windows(2) {
            let ((a, va), (b, vb)) = (w[0], w[1]);
            for (k, slot) in out.iter_mut().enumerate().take(b).skip(a + 1) {
                *slot = va + (vb - va) * (k - a) as f64 / (b - a) as f64;
            }
        }
        out
    }
}

fn ordinal(v: f64, max: u8) -> u8 {
    (v.abs().round() as i64).clamp(0, max as i64) as u8
}

/// Loads a country CSV into a policy timeline and ground truth.
pub fn load_country(path: &Path, population: u64) -> Result<(Vec<PolicyDay>, GroundTruth)> {
    let file = std::fs::File::open(path).map_err(|e| EpiError::io(path, e))?;
    load_country_from_reader(file, population)
}

pub fn load_country_from_reader<R: std::io::Read>(reader: R, population: u64) -> Result<(Vec<PolicyDay>, GroundTruth)> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let mut idx = BTreeMap::new();
    for col in REQUIRED_COLUMNS {
        let i = find(col).ok_or_else(|| EpiError::MissingColumn(col.to_string()))?;
        idx.insert(col, i);
    }
    let international = find(INTERNATIONAL_COLUMN);

    let mut rows: BTreeMap<NaiveDate, RawRow> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |col: &str| record.get(idx[col]).unwrap_or("");
        let date_text = cell("date").trim();
        let date = NaiveDate::parse_from_str(date_text, "%Y-%m-%d").map_err(|_| EpiError::Row {
            line,
            reason: format!("unparseable date `{date_text}`"),
        })?;
        let num = |col: &str| parse_cell(cell(col), col, line);
        let row = RawRow {
            confirmed: num("confirmed")?,
            deaths: num("deaths")?,
            hosp: num("hosp")?,
            tests: num("tests")?,
            vaccines: num("vaccines")?,
            stay_home: num("stay_home_restrictions")?,
            school: num("school_closing")?,
            workplace: num("workplace_closing")?,
            testing: num("testing_policy")?,
            tracing: num("contact_tracing")?,
            international: match international {
                Some(i) => parse_cell(record.get(i).unwrap_or(""), INTERNATIONAL_COLUMN, line)?,
                None => None,
            },
        };
        rows.insert(date, row);
    }
    let (Some(&start), Some(&end)) = (rows.keys().next(), rows.keys().next_back()) else {
        return Err(EpiError::InvalidInput("country file has no data rows".into()));
    };
    let sparse = Sparse {
        start,
        n_days: (end - start).num_days() as usize + 1,
        rows: &rows,
    };
    info!(
        "loaded {} rows spanning {} days from {start} (population {population}); contact_tracing 0..=2 mapped to 1..=3",
        rows.len(),
        sparse.n_days
    );

    let tests = daily_from_cumulative(&sparse.cumulative(|r| r.tests));
    let vaccines = daily_from_cumulative(&sparse.cumulative(|r| r.vaccines));
    let stay_home = sparse.forward_fill(|r| r.stay_home, 0.0);
    let school = sparse.forward_fill(|r| r.school, 0.0);
    let workplace = sparse.forward_fill(|r| r.workplace, 0.0);
    let testing = sparse.forward_fill(|r| r.testing, 0.0);
    let tracing = sparse.forward_fill(|r| r.tracing, 0.0);
    let intl = sparse.forward_fill(|r| r.international, 0.0);

    let dates: Vec<NaiveDate> = sparse.dates().collect();
    let timeline = dates
        .iter()
        .enumerate()
        .map(|(k, &date)| {
            let stay_home = ordinal(stay_home[k], 1);
            PolicyDay {
                date,
                stay_home,
                school_closing: ordinal(school[k], 3),
                workplace_closing: ordinal(workplace[k], 3),
                testing_policy: ordinal(testing[k], 3),
                contact_tracing: ordinal(tracing[k], 2) + 1,
                daily_tests: tests[k],
                daily_vaccines: vaccines[k],
                international_open: international.is_none() || ordinal(intl[k], 4) == 0,
                internal_travel_open: stay_home == 0,
            }
        })
        .collect();
    let gt = GroundTruth {
        confirmed_cumulative: sparse.cumulative(|r| r.confirmed),
        deaths_cumulative: sparse.cumulative(|r| r.deaths),
        hospitalized_current: sparse.forward_fill(|r| r.hosp, 0.0),
        dates,
    };
    Ok((timeline, gt))
}
