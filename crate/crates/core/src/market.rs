//! Hourly OHLCV ingestion and the exchange-independent global average
//! series that feeds every indicator.
//!
//! Hours reported by no exchange become recorded gaps; prices are never
//! forward-filled, and sells landing in gap hours are excluded from
//! classification downstream.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use thiserror::Error;

use crate::report::ParseReport;

pub const HOUR_SECONDS: i64 = 3600;

/// One exchange's bar for one hour.
#[derive(Debug, Clone, PartialEq)]
pub struct OhlcBar {
    /// UTC unix seconds, aligned to the hour.
    pub hour_start: i64,
    pub exchange: String,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl OhlcBar {
    fn validate(&self) -> Result<(), String> {
        let OhlcBar {
            open,
            high,
            low,
            close,
            volume,
            ..
        } = *self;
        for (name, v) in [
            ("open", open),
            ("high", high),
            ("low", low),
            ("close", close),
            ("volume", volume),
        ] {
            if !v.is_finite() {
                return Err(format!("{name} is not finite"));
            }
        }
        if self.hour_start.rem_euclid(HOUR_SECONDS) != 0 {
            return Err(format!("hour_start {} not aligned to the hour", self.hour_start));
        }
        if low > high {
            return Err(format!("low {low} > high {high}"));
        }
        if open < low || open > high {
            return Err(format!("open {open} outside [{low}, {high}]"));
        }
        if close < low || close > high {
            return Err(format!("close {close} outside [{low}, {high}]"));
        }
        if volume < 0.0 {
            return Err(format!("negative volume {volume}"));
        }
        Ok(())
    }
}

/// One bar of the global (exchange-averaged) series.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalBar {
    pub hour_start: i64,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    /// Summed across exchanges, not averaged.
    pub volume: f64,
}

/// The global series: bars with strictly increasing hour_start plus the
/// hours inside the covered range that no exchange reported.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GlobalBarSeries {
    bars: Vec<GlobalBar>,
    gaps: Vec<i64>,
    index: HashMap<i64, usize>,
}

/// How per-hour fields are combined across exchanges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AverageMode {
    /// Arithmetic mean of each price field.
    #[default]
    Simple,
    /// Volume-weighted mean; falls back to the simple mean for hours whose
    /// total volume is zero.
    VolumeWeighted,
}

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Format(String),
}

/// Load hourly bars from CSV with header
/// `hour_start,exchange,open,high,low,close,volume`. Invariant violations
/// and duplicate (hour, exchange) keys are rejected per line.
pub fn load_ohlc<R: Read>(r: R) -> Result<(Vec<OhlcBar>, ParseReport), MarketError> {
    let mut rdr = csv::Reader::from_reader(r);
    let want = ["hour_start", "exchange", "open", "high", "low", "close", "volume"];
    if rdr.headers()?.iter().ne(want) {
        return Err(MarketError::Format(format!(
            "expected header {:?}",
            want.join(",")
        )));
    }
    let mut bars = Vec::new();
    let mut report = ParseReport::default();
    let mut seen: HashMap<(i64, String), ()> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        report.lines += 1;
        if rec.len() != 7 {
            report.reject(line, format!("expected 7 fields, got {}", rec.len()));
            continue;
        }
        let parsed = (|| -> Result<OhlcBar, String> {
            Ok(OhlcBar {
                hour_start: rec[0].parse().map_err(|_| format!("bad hour_start {:?}", &rec[0]))?,
                exchange: rec[1].to_string(),
                open: rec[2].parse().map_err(|_| format!("bad open {:?}", &rec[2]))?,
                high: rec[3].parse().map_err(|_| format!("bad high {:?}", &rec[3]))?,
                low: rec[4].parse().map_err(|_| format!("bad low {:?}", &rec[4]))?,
                close: rec[5].parse().map_err(|_| format!("bad close {:?}", &rec[5]))?,
                volume: rec[6].parse().map_err(|_| format!("bad volume {:?}", &rec[6]))?,
            })
        })();
        match parsed {
            Ok(bar) => {
                if let Err(msg) = bar.validate() {
                    report.reject(line, msg);
                } else if seen
                    .insert((bar.hour_start, bar.exchange.clone()), ())
                    .is_some()
                {
                    report.reject(
                        line,
                        format!("duplicate bar for ({}, {})", bar.hour_start, bar.exchange),
                    );
                } else {
                    report.accepted += 1;
                    bars.push(bar);
                }
            }
            Err(msg) => report.reject(line, msg),
        }
    }
    Ok((bars, report))
}

pub fn write_ohlc_csv<W: Write>(bars: &[OhlcBar], w: W) -> Result<(), MarketError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["hour_start", "exchange", "open", "high", "low", "close", "volume"])?;
    for b in bars {
        wtr.write_record([
            b.hour_start.to_string(),
            b.exchange.clone(),
            b.open.to_string(),
            b.high.to_string(),
            b.low.to_string(),
            b.close.to_string(),
            b.volume.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Average per-exchange bars into the global series.
///
/// Per hour, each price field is combined over the exchanges reporting
/// that hour and volume is summed. Hours between the first and last
/// reported hour with no bars at all are recorded as gaps; no bar is
/// synthesized for them. Exchanges are combined in sorted hour order, so
/// the result does not depend on input ordering.
pub fn global_average(bars: &[OhlcBar], mode: AverageMode) -> GlobalBarSeries {
    let mut by_hour: BTreeMap<i64, Vec<&OhlcBar>> = BTreeMap::new();
    for bar in bars {
        by_hour.entry(bar.hour_start).or_default().push(bar);
    }
    let mut series = GlobalBarSeries::default();
    let hours: Vec<i64> = by_hour.keys().copied().collect();
    if hours.is_empty() {
        return series;
    }
    let (first, last) = (hours[0], *hours.last().unwrap());
    let mut hour = first;
    while hour <= last {
        match by_hour.get(&hour) {
            Some(group) => {
                // sort within the hour so float summation order is fixed
                let mut group = group.clone();
                group.sort_by(|a, b| a.exchange.cmp(&b.exchange));
                let total_volume: f64 = group.iter().map(|b| b.volume).sum();
                let combine = |field: fn(&OhlcBar) -> f64| -> f64 {
                    match mode {
                        AverageMode::VolumeWeighted if total_volume > 0.0 => {
                            group.iter().map(|b| field(b) * b.volume).sum::<f64>() / total_volume
                        }
                        _ => {
                            group.iter().map(|b| field(b)).sum::<f64>() / group.len() as f64
                        }
                    }
                };
                series.bars.push(GlobalBar {
                    hour_start: hour,
                    open: combine(|b| b.open),
                    high: combine(|b| b.high),
                    low: combine(|b| b.low),
                    close: combine(|b| b.close),
                    volume: total_volume,
                });
            }
            None => series.gaps.push(hour),
        }
        hour += HOUR_SECONDS;
    }
    series.rebuild_index();
    series
}

impl GlobalBarSeries {
    fn rebuild_index(&mut self) {
        self.index = self
            .bars
            .iter()
            .enumerate()
            .map(|(i, b)| (b.hour_start, i))
            .collect();
    }

    pub fn from_bars(bars: Vec<GlobalBar>, gaps: Vec<i64>) -> Self {
        let mut s = GlobalBarSeries {
            bars,
            gaps,
            index: HashMap::new(),
        };
        s.rebuild_index();
        s
    }

    pub fn bars(&self) -> &[GlobalBar] {
        &self.bars
    }

    pub fn gaps(&self) -> &[i64] {
        &self.gaps
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    /// The bar whose [hour_start, hour_start + 3600) interval contains
    /// `timestamp`, if that hour was reported.
    pub fn bucket_of(&self, timestamp: i64) -> Option<&GlobalBar> {
        let hour = timestamp.div_euclid(HOUR_SECONDS) * HOUR_SECONDS;
        self.index.get(&hour).map(|&i| &self.bars[i])
    }

    /// Position of the bar containing `timestamp` in [`Self::bars`].
    pub fn bucket_index_of(&self, timestamp: i64) -> Option<usize> {
        let hour = timestamp.div_euclid(HOUR_SECONDS) * HOUR_SECONDS;
        self.index.get(&hour).copied()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.close).collect()
    }

    pub fn highs(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.high).collect()
    }

    pub fn lows(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.low).collect()
    }

    pub fn volumes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.volume).collect()
    }

    /// Export as `hour_start,open,high,low,close,volume`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), MarketError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["hour_start", "open", "high", "low", "close", "volume"])?;
        for b in &self.bars {
            wtr.write_record([
                b.hour_start.to_string(),
                b.open.to_string(),
                b.high.to_string(),
                b.low.to_string(),
                b.close.to_string(),
                b.volume.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}
