//! OHLCV ingestion, min-max normalization, next-day labels, chronological
//! split and a seeded synthetic series with a plantable momentum signal.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::encoders::FeatureVector;
use crate::error::{Error, Result};

pub const OHLCV_HEADER: [&str; 6] = ["date", "open", "high", "low", "close", "volume"];
pub const SAMPLE_HEADER: [&str; 6] = ["f1", "f2", "f3", "f4", "f5", "label"];
/// Feature order of every [`MarketSample`].
pub const FEATURE_NAMES: [&str; 5] = ["open", "close", "high", "low", "volume"];

#[derive(Debug, Clone, PartialEq)]
pub struct OhlcvRow {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl OhlcvRow {
    fn features(&self) -> [f64; 5] {
        [self.open, self.close, self.high, self.low, self.volume]
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        let vals = [self.open, self.high, self.low, self.close, self.volume];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err("non-finite value".into());
        }
        let body_lo = self.open.min(self.close);
        let body_hi = self.open.max(self.close);
        if !(self.low <= body_lo && body_hi <= self.high) {
            return Err(format!(
                "expected low <= open, close <= high (low {}, open {}, close {}, high {})",
                self.low, self.open, self.close, self.high
            ));
        }
        if self.volume < 0.0 {
            return Err(format!("negative volume {}", self.volume));
        }
        Ok(())
    }
}

/// One supervised example: five normalized features and the next-day direction.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSample {
    pub features: FeatureVector,
    pub label: u8,
    pub date: Option<NaiveDate>,
    /// `close[t+1] / close[t] - 1`, when known.
    pub next_return: Option<f64>,
}

impl MarketSample {
    pub fn new(features: FeatureVector, label: u8) -> Self {
        Self {
            features,
            label,
            date: None,
            next_return: None,
        }
    }
}

/// Per-feature `(min, max)` in [`FEATURE_NAMES`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub min: [f64; 5],
    pub max: [f64; 5],
}

impl NormalizationStats {
    pub fn fit(rows: &[OhlcvRow]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InsufficientData("no rows to fit normalization on".into()));
        }
        let mut min = [f64::INFINITY; 5];
        let mut max = [f64::NEG_INFINITY; 5];
        for row in rows {
            for (k, v) in row.features().into_iter().enumerate() {
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
        }
        if let Some(k) = (0..5).find(|&k| max[k] <= min[k]) {
            return Err(Error::ConstantFeature(FEATURE_NAMES[k]));
        }
        Ok(Self { min, max })
    }

    /// Min-max scales a row, clamping values outside the fitted range.
    pub fn apply(&self, row: &OhlcvRow) -> FeatureVector {
        let values = row
            .features()
            .into_iter()
            .enumerate()
            .map(|(k, v)| ((v - self.min[k]) / (self.max[k] - self.min[k])).clamp(0.0, 1.0))
            .collect();
        FeatureVector::new(values).expect("clamped features lie in [0, 1]")
    }
}

#[derive(Debug, Clone)]
pub struct SplitDataset {
    pub train: Vec<MarketSample>,
    pub test: Vec<MarketSample>,
    pub normalization_stats: NormalizationStats,
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<OhlcvRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ohlcv(file)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = reader.headers().map_err(csv_error)?;
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    if found != expected {
        return Err(Error::Format(format!(
            "expected header `{}`, found `{}`",
            expected.join(","),
            found.join(",")
        )));
    }
    Ok(())
}

fn parse_number(field: &str, name: &str, line: u64) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("{name}: `{field}` is not a finite number"),
        })
}

/// Parses `date,open,high,low,close,volume` CSV with ISO-8601 dates,
/// validating each row and requiring strictly increasing dates.
pub fn parse_ohlcv(input: impl Read) -> Result<Vec<OhlcvRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    check_header(&mut reader, &OHLCV_HEADER)?;
    let mut rows: Vec<OhlcvRow> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != OHLCV_HEADER.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected 6 fields, found {}", record.len()),
            });
        }
        let date = NaiveDate::parse_from_str(record[0].trim(), "%Y-%m-%d").map_err(|e| {
            Error::Parse {
                line,
                message: format!("date `{}`: {e}", &record[0]),
            }
        })?;
        let row = OhlcvRow {
            date,
            open: parse_number(&record[1], "open", line)?,
            high: parse_number(&record[2], "high", line)?,
            low: parse_number(&record[3], "low", line)?,
            close: parse_number(&record[4], "close", line)?,
            volume: parse_number(&record[5], "volume", line)?,
        };
        row.check()
            .map_err(|message| Error::Validation { line, message })?;
        if let Some(prev) = rows.last() {
            if row.date <= prev.date {
                return Err(Error::Ordering {
                    line,
                    date: row.date.to_string(),
                    previous: prev.date.to_string(),
                });
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_ohlcv(rows: &[OhlcvRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(OHLCV_HEADER).map_err(wrap)?;
    for r in rows {
        w.write_record([
            r.date.format("%Y-%m-%d").to_string(),
            r.open.to_string(),
            r.high.to_string(),
            r.low.to_string(),
            r.close.to_string(),
            r.volume.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

/// Labels row `i` with `close[i+1] > close[i]` (ties are 0) and scales its
/// features with stats fitted on the first `fit_rows` rows. The final row has
/// no next day and yields no sample.
pub fn normalize_and_label(
    rows: &[OhlcvRow],
    fit_rows: usize,
) -> Result<(Vec<MarketSample>, NormalizationStats)> {
    if rows.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 rows, got {}",
            rows.len()
        )));
    }
    for (i, row) in rows.iter().enumerate() {
        row.check().map_err(|message| Error::Validation {
            line: i as u64 + 2,
            message,
        })?;
    }
    let stats = NormalizationStats::fit(&rows[..fit_rows.clamp(1, rows.len())])?;
    let samples = rows
        .windows(2)
        .map(|pair| {
            let (today, next) = (&pair[0], &pair[1]);
            MarketSample {
                features: stats.apply(today),
                label: u8::from(next.close > today.close),
                date: Some(today.date),
                next_return: Some(next.close / today.close - 1.0),
            }
        })
        .collect();
    Ok((samples, stats))
}

pub fn train_len(n: usize, ratio: f64) -> usize {
    // 0.8 * n can land a hair under an integer
    ((ratio * n as f64) + 1e-9).floor() as usize
}

/// First `floor(ratio * n)` samples train, the rest test. No shuffling.
pub fn chronological_split(
    samples: Vec<MarketSample>,
    stats: NormalizationStats,
    ratio: f64,
) -> Result<SplitDataset> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::domain(format!("split ratio {ratio} must lie in (0, 1)")));
    }
    if samples.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "need at least 5 samples to split, got {}",
            samples.len()
        )));
    }
    let n_train = train_len(samples.len(), ratio);
    if n_train == 0 || n_train == samples.len() {
        return Err(Error::InsufficientData(
            "split leaves one side empty".into(),
        ));
    }
    let mut train = samples;
    let test = train.split_off(n_train);
    Ok(SplitDataset {
        train,
        test,
        normalization_stats: stats,
    })
}

/// Full pipeline: label, fit normalization on the training rows only, split.
pub fn prepare_dataset(rows: &[OhlcvRow], ratio: f64) -> Result<SplitDataset> {
    let n_samples = rows.len().saturating_sub(1);
    if n_samples < 5 {
        return Err(Error::InsufficientData(format!(
            "need at least 6 rows, got {}",
            rows.len()
        )));
    }
    let (samples, stats) = normalize_and_label(rows, train_len(n_samples, ratio))?;
    chronological_split(samples, stats, ratio)
}

pub fn write_samples(samples: &[MarketSample], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(SAMPLE_HEADER).map_err(wrap)?;
    for s in samples {
        let mut record: Vec<String> = s.features.values().iter().map(f64::to_string).collect();
        record.push(s.label.to_string());
        w.write_record(&record).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

/// Reads the `f1,f2,f3,f4,f5,label` dump format.
pub fn parse_samples(input: impl Read) -> Result<Vec<MarketSample>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    check_header(&mut reader, &SAMPLE_HEADER)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != SAMPLE_HEADER.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected 6 fields, found {}", record.len()),
            });
        }
        let values = (0..5)
            .map(|k| parse_number(&record[k], SAMPLE_HEADER[k], line))
            .collect::<Result<Vec<_>>>()?;
        let features = FeatureVector::new(values).map_err(|e| Error::Validation {
            line,
            message: e.to_string(),
        })?;
        let label = match record[5].trim() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("label `{other}` is not 0 or 1"),
                })
            }
        };
        out.push(MarketSample::new(features, label));
    }
    Ok(out)
}

/// Knobs for [`synthetic_series`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub n_days: usize,
    /// Log drift per day.
    pub trend: f64,
    /// Scale of the daily log-return shocks.
    pub noise: f64,
    /// Probability-weight in `[0, 1]` that a day repeats the previous day's direction.
    pub signal_strength: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            n_days: 500,
            trend: 0.0,
            noise: 0.01,
            signal_strength: 0.0,
        }
    }
}

/// Damping of shocks that push the detrended log price further from zero,
/// per unit of deviation measured in `noise`.
const REVERSION: f64 = 1.0;
const BASE_PRICE: f64 = 100.0;
const BASE_VOLUME: f64 = 1.0e6;

fn next_business_day(d: NaiveDate) -> NaiveDate {
    let mut next = d + Duration::days(1);
    while matches!(next.weekday(), Weekday::Sat | Weekday::Sun) {
        next += Duration::days(1);
    }
    next
}

/// Seeded OHLCV series. The sign of each day's shock repeats the previous
/// day's with probability `(1 + signal_strength) / 2`, so for positive
/// signal the next-day direction follows the current-day return. Opens
/// equal the previous close; highs and lows bracket the body.
pub fn synthetic_series(spec: &SyntheticSpec) -> Result<Vec<OhlcvRow>> {
    if spec.n_days < 2 {
        return Err(Error::domain(format!("n_days = {} must be at least 2", spec.n_days)));
    }
    if !(0.0..=1.0).contains(&spec.signal_strength) {
        return Err(Error::domain("signal_strength must lie in [0, 1]"));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite() && spec.trend.is_finite()) {
        return Err(Error::domain("noise must be >= 0 and trend finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let persist = (1.0 + spec.signal_strength) / 2.0;
    let mut date = NaiveDate::from_ymd_opt(2015, 1, 1).expect("valid start date");
    let mut deviation = 0.0_f64;
    let mut prev_close = BASE_PRICE;
    let mut direction = 1.0_f64;
    let mut rows = Vec::with_capacity(spec.n_days);
    for day in 0..spec.n_days {
        if day > 0 {
            date = next_business_day(date);
        }
        if rng.random::<f64>() >= persist {
            direction = -direction;
        }
        let size: f64 = StandardNormal.sample(&mut rng);
        let pull = if spec.noise > 0.0 {
            2.0 / (1.0 + (REVERSION * direction * deviation / spec.noise).exp())
        } else {
            1.0
        };
        let shock = direction * spec.noise * (0.5 + size.abs()) * pull;
        deviation += shock;
        let log_return = spec.trend + shock;

        let open = prev_close;
        let close = open * log_return.exp();
        let wick_hi: f64 = StandardNormal.sample(&mut rng);
        let wick_lo: f64 = StandardNormal.sample(&mut rng);
        let high = open.max(close) * (1.0 + 0.25 * spec.noise * wick_hi.abs());
        let low = open.min(close) * (1.0 - 0.25 * spec.noise * wick_lo.abs());
        let vol_noise: f64 = StandardNormal.sample(&mut rng);
        let volume = BASE_VOLUME * (0.3 * vol_noise).exp();
        rows.push(OhlcvRow {
            date,
            open,
            high,
            low,
            close,
            volume,
        });
        prev_close = close;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<OhlcvRow>> {
        parse_ohlcv(text.as_bytes())
    }

    const GOOD: &str = "date,open,high,low,close,volume\n\
        2024-01-02,10,12,9,11,100\n\
        2024-01-03,11,13,10,12,150\n\
        2024-01-04,12,12.5,10.5,11,90\n";

    fn row(day: u32, close: f64, open: f64) -> OhlcvRow {
        OhlcvRow {
            date: NaiveDate::from_ymd_opt(2024, 1, day).unwrap(),
            open,
            high: open.max(close) + 1.0,
            low: open.min(close) - 1.0,
            close,
            volume: 100.0 + day as f64,
        }
    }

    #[test]
    fn parses_well_formed_rows() {
        let rows = parse(GOOD).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].close, 12.0);
        assert!(rows.windows(2).all(|w| w[0].date < w[1].date));
    }

    #[test]
    fn rejects_bad_input() {
        let high_below_low = "date,open,high,low,close,volume\n2024-01-02,10,8,9,10,1\n";
        match parse(high_below_low) {
            Err(Error::Validation { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let dup = "date,open,high,low,close,volume\n2024-01-02,1,1,1,1,1\n2024-01-02,1,1,1,1,1\n";
        assert!(matches!(parse(dup), Err(Error::Ordering { line: 3, .. })));
        assert!(matches!(
            parse("2024-01-02,1,1,1,1,1\n"),
            Err(Error::Format(_))
        ));
        assert!(matches!(parse(""), Err(Error::Format(_))));
        let bad_num = "date,open,high,low,close,volume\n2024-01-02,x,1,1,1,1\n";
        assert!(matches!(parse(bad_num), Err(Error::Parse { line: 2, .. })));
        let short = "date,open,high,low,close,volume\n2024-01-02,1,1,1\n";
        assert!(matches!(parse(short), Err(Error::Parse { .. })));
        let bad_date = "date,open,high,low,close,volume\n02/01/2024,1,1,1,1,1\n";
        assert!(matches!(parse(bad_date), Err(Error::Parse { .. })));
        let neg_vol = "date,open,high,low,close,volume\n2024-01-02,1,1,1,1,-1\n";
        assert!(matches!(parse(neg_vol), Err(Error::Validation { .. })));
    }

    #[test]
    fn labels_follow_next_close() {
        let rows = vec![row(2, 100.0, 100.0), row(3, 101.0, 99.0), row(4, 99.0, 100.0)];
        let (samples, _) = normalize_and_label(&rows, 3).unwrap();
        assert_eq!(samples.iter().map(|s| s.label).collect::<Vec<_>>(), vec![1, 0]);
        let flat = vec![row(2, 100.0, 99.0), row(3, 100.0, 101.0), row(4, 105.0, 100.0)];
        let (samples, _) = normalize_and_label(&flat, 3).unwrap();
        assert_eq!(samples[0].label, 0);
        assert!(normalize_and_label(&rows[..1], 1).is_err());
    }

    #[test]
    fn min_max_endpoints() {
        let rows: Vec<_> = [(10.0, 11.0), (20.0, 19.0), (30.0, 31.0)]
            .iter()
            .enumerate()
            .map(|(i, &(c, o))| row(2 + i as u32, c, o))
            .collect();
        let stats = NormalizationStats::fit(&rows).unwrap();
        let closes: Vec<f64> = rows.iter().map(|r| stats.apply(r).values()[1]).collect();
        assert_eq!(closes, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_feature_is_named() {
        let mut rows = vec![row(2, 100.0, 100.0), row(3, 101.0, 99.0)];
        for r in &mut rows {
            r.volume = 5.0;
        }
        assert!(matches!(
            normalize_and_label(&rows, 2),
            Err(Error::ConstantFeature("volume"))
        ));
    }

    #[test]
    fn test_range_is_clamped() {
        let rows = vec![
            row(2, 100.0, 100.0),
            row(3, 101.0, 99.0),
            row(4, 150.0, 140.0),
            row(5, 10.0, 20.0),
        ];
        let (samples, stats) = normalize_and_label(&rows, 2).unwrap();
        assert_eq!(stats.max[1], 101.0);
        assert_eq!(samples[2].features.values()[1], 1.0);
    }

    #[test]
    fn split_sizes() {
        let rows: Vec<_> = (0..11).map(|i| row(2 + i, 100.0 + i as f64, 99.0 + i as f64)).collect();
        let (samples, stats) = normalize_and_label(&rows, 8).unwrap();
        let split = chronological_split(samples.clone(), stats.clone(), 0.8).unwrap();
        assert_eq!((split.train.len(), split.test.len()), (8, 2));
        assert!(split.train.last().unwrap().date < split.test[0].date);
        let split = chronological_split(samples[..5].to_vec(), stats.clone(), 0.8).unwrap();
        assert_eq!((split.train.len(), split.test.len()), (4, 1));
        assert!(chronological_split(samples[..4].to_vec(), stats, 0.8).is_err());
    }

    #[test]
    fn synthetic_is_seeded_and_valid() {
        let spec = SyntheticSpec {
            seed: 3,
            n_days: 300,
            signal_strength: 0.5,
            ..SyntheticSpec::default()
        };
        let a = synthetic_series(&spec).unwrap();
        assert_eq!(a, synthetic_series(&spec).unwrap());
        assert!(a.iter().all(|r| r.check().is_ok()));
        assert!(a.windows(2).all(|w| w[0].date < w[1].date));
        assert_ne!(a, synthetic_series(&SyntheticSpec { seed: 4, ..spec }).unwrap());
        assert!(synthetic_series(&SyntheticSpec { n_days: 1, ..spec }).is_err());
    }

    #[test]
    fn noiseless_uptrend_is_all_ups() {
        let spec = SyntheticSpec {
            noise: 0.0,
            trend: 0.001,
            n_days: 50,
            ..SyntheticSpec::default()
        };
        let rows = synthetic_series(&spec).unwrap();
        let (samples, _) = normalize_and_label(&rows, rows.len()).unwrap();
        assert!(samples.iter().all(|s| s.label == 1));
    }

    #[test]
    fn sample_dump_round_trip() {
        let rows = synthetic_series(&SyntheticSpec::default()).unwrap();
        let (samples, _) = normalize_and_label(&rows, rows.len()).unwrap();
        let mut buf = Vec::new();
        write_samples(&samples, &mut buf).unwrap();
        assert!(buf.starts_with(b"f1,f2,f3,f4,f5,label\n"));
        let back = parse_samples(buf.as_slice()).unwrap();
        assert_eq!(back.len(), samples.len());
        for (a, b) in back.iter().zip(&samples) {
            assert_eq!(a.label, b.label);
            for (x, y) in a.features.values().iter().zip(b.features.values()) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
        assert!(parse_samples("f1,f2,f3,f4,f5,label\n0.1,0.2,0.3,0.4,0.5,2\n".as_bytes()).is_err());
        assert!(parse_samples("f1,f2,f3,f4,f5,label\n0.1,0.2,0.3,0.4,1.5,1\n".as_bytes()).is_err());
    }

    #[test]
    fn ohlcv_write_round_trip() {
        let rows = synthetic_series(&SyntheticSpec::default()).unwrap();
        let mut buf = Vec::new();
        write_ohlcv(&rows, &mut buf).unwrap();
        assert_eq!(parse_ohlcv(buf.as_slice()).unwrap(), rows);
    }
}
