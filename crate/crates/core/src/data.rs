//! Hourly load series, lagged feature construction, chronological splits and
//! synthetic demand generation.

use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Weekday};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::DemandDistribution;

/// Number of lagged hourly loads in a feature vector.
pub const LAGS: usize = 24;
/// Feature vector length: the lags plus a weekend indicator.
pub const N_FEATURES: usize = LAGS + 1;
const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("timestamps not strictly increasing at {0}")]
    NonMonotoneTimestamps(NaiveDateTime),
    #[error("negative load {value} at {timestamp}")]
    NegativeLoad { timestamp: NaiveDateTime, value: f64 },
    #[error("gap in hourly series before {0}")]
    Gap(NaiveDateTime),
    #[error("step at {0} is shorter than one hour")]
    IrregularStep(NaiveDateTime),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadSeries {
    pub timestamps: Vec<NaiveDateTime>,
    pub total_load: Vec<f64>,
    /// Optional per-bus loads, one row per timestamp.
    pub bus_loads: Option<Vec<Vec<f64>>>,
    /// True when gaps longer than an hour were accepted on load.
    pub gaps_flagged: bool,
}

impl LoadSeries {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Checks ordering, sign and hourly spacing.
    pub fn validate(&self, allow_gaps: bool) -> Result<(), DataError> {
        if self.total_load.len() != self.timestamps.len() {
            return Err(DataError::InvalidParams("load and timestamp counts differ".into()));
        }
        for (i, (&t, &v)) in self.timestamps.iter().zip(&self.total_load).enumerate() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(DataError::NegativeLoad { timestamp: t, value: v });
            }
            if i > 0 {
                let step = t - self.timestamps[i - 1];
                if step <= Duration::zero() {
                    return Err(DataError::NonMonotoneTimestamps(t));
                }
                if step < Duration::hours(1) || step.num_seconds() % 3600 != 0 {
                    return Err(DataError::IrregularStep(t));
                }
                if step > Duration::hours(1) && !allow_gaps {
                    return Err(DataError::Gap(t));
                }
            }
        }
        Ok(())
    }
}

fn parse_timestamp(text: &str) -> Option<NaiveDateTime> {
    let text = text.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Some(dt.naive_local());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(text, fmt) {
            return Some(t);
        }
    }
    None
}

/// Reads `timestamp,load_mw[,bus_0,...]` CSV; gaps are an error.
pub fn load_csv(path: impl AsRef<Path>) -> Result<LoadSeries, DataError> {
    load_csv_with(path, false)
}

pub fn load_csv_with(path: impl AsRef<Path>, allow_gaps: bool) -> Result<LoadSeries, DataError> {
    read_csv(std::fs::File::open(path)?, allow_gaps)
}

pub fn read_csv<R: Read>(input: R, allow_gaps: bool) -> Result<LoadSeries, DataError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "timestamp" || &headers[1] != "load_mw" {
        return Err(DataError::ParseError {
            line: 1,
            reason: "header must start with `timestamp,load_mw`".into(),
        });
    }
    let n_bus = headers.len() - 2;
    let mut timestamps = Vec::new();
    let mut total_load = Vec::new();
    let mut bus_loads = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| DataError::ParseError {
            line,
            reason: e.to_string(),
        })?;
        let field = |k: usize| -> Result<f64, DataError> {
            record[k].parse::<f64>().map_err(|_| DataError::ParseError {
                line,
                reason: format!("`{}` is not a number", &record[k]),
            })
        };
        let t = parse_timestamp(&record[0]).ok_or_else(|| DataError::ParseError {
            line,
            reason: format!("`{}` is not an ISO-8601 timestamp", &record[0]),
        })?;
        timestamps.push(t);
        total_load.push(field(1)?);
        if n_bus > 0 {
            bus_loads.push((2..2 + n_bus).map(field).collect::<Result<Vec<_>, _>>()?);
        }
    }
    let series = LoadSeries {
        timestamps,
        total_load,
        bus_loads: (n_bus > 0).then_some(bus_loads),
        gaps_flagged: allow_gaps,
    };
    series.validate(allow_gaps)?;
    Ok(series)
}

/// Formats `v` rounded to 12 significant digits, shortest form.
fn fmt_sig12(v: f64) -> String {
    let rounded: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    format!("{rounded}")
}

pub fn write_csv<W: Write>(series: &LoadSeries, out: W) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_writer(out);
    let n_bus = series.bus_loads.as_ref().map_or(0, |b| b.first().map_or(0, Vec::len));
    let mut header = vec!["timestamp".to_string(), "load_mw".to_string()];
    header.extend((0..n_bus).map(|i| format!("bus_{i}")));
    writer.write_record(&header)?;
    for (i, t) in series.timestamps.iter().enumerate() {
        let mut row = vec![t.format(TIMESTAMP_FORMAT).to_string(), fmt_sig12(series.total_load[i])];
        if let Some(bus) = &series.bus_loads {
            row.extend(bus[i].iter().map(|&v| fmt_sig12(v)));
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_csv_file(series: &LoadSeries, path: impl AsRef<Path>) -> Result<(), DataError> {
    write_csv(series, std::fs::File::create(path)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Lagged loads oldest first, then the weekend flag of the target hour.
    pub features: Vec<f64>,
    pub target: f64,
    pub timestamp: NaiveDateTime,
    /// Hours since the first timestamp of the series.
    pub hour_index: usize,
}

impl Sample {
    pub fn hour_of_day(&self) -> u32 {
        self.timestamp.hour()
    }
}

pub fn is_weekend(t: NaiveDateTime) -> bool {
    matches!(t.weekday(), Weekday::Sat | Weekday::Sun)
}

/// One sample per hour that has 24 contiguous preceding hours.
pub fn lagged_samples(series: &LoadSeries) -> Vec<Sample> {
    let Some(&start) = series.timestamps.first() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for t in LAGS..series.len() {
        let window = &series.timestamps[t - LAGS..=t];
        let contiguous = window.windows(2).all(|w| w[1] - w[0] == Duration::hours(1));
        if !contiguous {
            continue;
        }
        let mut features = series.total_load[t - LAGS..t].to_vec();
        features.push(if is_weekend(series.timestamps[t]) { 1.0 } else { 0.0 });
        out.push(Sample {
            features,
            target: series.total_load[t],
            timestamp: series.timestamps[t],
            hour_index: (series.timestamps[t] - start).num_hours() as usize,
        });
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_days: usize,
    pub val_days: usize,
    pub test_days: usize,
}

impl SplitSpec {
    pub fn total_days(&self) -> usize {
        self.train_days + self.val_days + self.test_days
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SplitSamples {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Lagged samples assigned to train/val/test by target hour. The first day
/// of the training window is consumed by the lag warm-up.
pub fn make_samples(series: &LoadSeries, split: SplitSpec) -> Result<SplitSamples, DataError> {
    if split.train_days == 0 || split.val_days == 0 || split.test_days == 0 {
        return Err(DataError::InvalidParams("every split needs at least one day".into()));
    }
    let needed = split.total_days() * 24;
    let span = match (series.timestamps.first(), series.timestamps.last()) {
        (Some(&a), Some(&b)) => (b - a).num_hours() as usize + 1,
        _ => 0,
    };
    if span < needed {
        return Err(DataError::InsufficientData(format!(
            "split needs {needed} hours, series covers {span}"
        )));
    }
    let train_end = split.train_days * 24;
    let val_end = train_end + split.val_days * 24;
    let mut out = SplitSamples::default();
    for s in lagged_samples(series) {
        let bucket = match s.hour_index {
            h if h < train_end => &mut out.train,
            h if h < val_end => &mut out.val,
            h if h < needed => &mut out.test,
            _ => continue,
        };
        bucket.push(s);
    }
    if out.train.is_empty() {
        return Err(DataError::InsufficientData("training split is empty".into()));
    }
    Ok(out)
}

/// Per-feature z-score normalization fitted on training features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self, DataError> {
        let Some(first) = rows.first() else {
            return Err(DataError::InsufficientData("cannot fit a scaler on no rows".into()));
        };
        let n = rows.len() as f64;
        let dim = first.len();
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let mut scale = Vec::with_capacity(dim);
        for (j, s) in var.into_iter().enumerate() {
            let sd = (s / n).sqrt();
            if sd < 1e-12 * mean[j].abs().max(1.0) {
                // constant feature: centre on its value so it maps to exactly 0
                mean[j] = first[j];
                scale.push(1.0);
            } else {
                scale.push(sd);
            }
        }
        Ok(FeatureScaler { mean, scale })
    }

    pub fn fit_samples(samples: &[Sample]) -> Result<Self, DataError> {
        let rows: Vec<Vec<f64>> = samples.iter().map(|s| s.features.clone()).collect();
        Self::fit(&rows)
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Deterministic diurnal shape layered on top of the noise draws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiurnalSpec {
    /// Peak-to-mean swing of the daily sinusoid, MW.
    pub amplitude: f64,
    /// Hour of day at which the sinusoid peaks.
    pub peak_hour: f64,
    /// Relative noise-scale swing in phase with the sinusoid, in [0, 1).
    #[serde(default)]
    pub heteroskedasticity: f64,
    /// Multiplier on the base level at weekends.
    #[serde(default = "one")]
    pub weekend_factor: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub family: DemandDistribution,
    pub hours: usize,
    pub seed: u64,
    #[serde(default)]
    pub start: Option<NaiveDateTime>,
    #[serde(default)]
    pub diurnal: Option<DiurnalSpec>,
}

pub fn default_start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2012, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid date")
}

/// Draws an hourly series from `spec.family`. With a diurnal spec each draw
/// `x` becomes `m·w + A·s(h) + (x - m)(1 + k·s(h))`, where `m` is the family
/// mean, `w` the weekend factor on weekends, and `s(h)` a unit sinusoid
/// peaking at `peak_hour`. Loads are floored at zero.
pub fn synth(spec: &SynthSpec) -> Result<LoadSeries, DataError> {
    if spec.hours == 0 {
        return Err(DataError::InvalidParams("hours must be positive".into()));
    }
    if let Some(d) = &spec.diurnal {
        let ok = d.amplitude.is_finite()
            && d.peak_hour.is_finite()
            && (0.0..1.0).contains(&d.heteroskedasticity.abs())
            && d.weekend_factor > 0.0;
        if !ok {
            return Err(DataError::InvalidParams(format!("bad diurnal spec {d:?}")));
        }
    }
    let start = spec.start.unwrap_or_else(default_start);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let center = spec.family.mean();
    let mut timestamps = Vec::with_capacity(spec.hours);
    let mut total_load = Vec::with_capacity(spec.hours);
    for i in 0..spec.hours {
        let t = start + Duration::hours(i as i64);
        let x = spec.family.sample(&mut rng);
        let v = match &spec.diurnal {
            None => x,
            Some(d) => {
                let h = t.hour() as f64;
                let s = (2.0 * std::f64::consts::PI * (h - d.peak_hour + 6.0) / 24.0).sin();
                let w = if is_weekend(t) { d.weekend_factor } else { 1.0 };
                center * w + d.amplitude * s + (x - center) * (1.0 + d.heteroskedasticity * s)
            }
        };
        timestamps.push(t);
        total_load.push(v.max(0.0));
    }
    Ok(LoadSeries {
        timestamps,
        total_load,
        bus_loads: None,
        gaps_flagged: false,
    })
}
