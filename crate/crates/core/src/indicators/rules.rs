//! The 18-rule GR/LR signal catalogue.
//!
//! Each rule compares per-hour quantities derived from the global series
//! and labels the hour Gain Realised, Loss Realised, or Neutral. Strict
//! inequalities return Neutral on exact equality; the single exception is
//! RSI, which sends its `>= 50` boundary to Gain. Warm-up and undefined
//! positions are always Neutral.

use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use super::kernels::{self, IndicatorError, ObvMode, TrbMode};
use crate::exec;
use crate::market::{GlobalBar, GlobalBarSeries};

/// Hour sentiment under one trading rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Signal {
    Gain,
    Loss,
    Neutral,
}

impl Signal {
    pub fn as_str(self) -> &'static str {
        match self {
            Signal::Gain => "GR",
            Signal::Loss => "LR",
            Signal::Neutral => "Neutral",
        }
    }
}

impl FromStr for Signal {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "GR" => Ok(Signal::Gain),
            "LR" => Ok(Signal::Loss),
            "Neutral" => Ok(Signal::Neutral),
            _ => Err(()),
        }
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The trading rule catalogue. `SmaK_N` reads "K-hour SMA against N-hour
/// SMA" with K = 1 meaning the raw close; OBV variants compare against
/// (or between) SMAs of the on-balance volume series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleId {
    Odean,
    Sma1_50,
    Sma1_150,
    Sma5_150,
    Sma1_200,
    Sma2_200,
    Trb50,
    Trb150,
    Trb200,
    Macd,
    Roc,
    Obv1_50,
    Obv1_150,
    Obv5_150,
    Obv1_200,
    Obv2_200,
    Rsi,
    Bb,
}

/// Catalogue order; also the canonical column/report order.
pub const ALL_RULES: [RuleId; 18] = [
    RuleId::Odean,
    RuleId::Sma1_50,
    RuleId::Sma1_150,
    RuleId::Sma5_150,
    RuleId::Sma1_200,
    RuleId::Sma2_200,
    RuleId::Trb50,
    RuleId::Trb150,
    RuleId::Trb200,
    RuleId::Macd,
    RuleId::Roc,
    RuleId::Obv1_50,
    RuleId::Obv1_150,
    RuleId::Obv5_150,
    RuleId::Obv1_200,
    RuleId::Obv2_200,
    RuleId::Rsi,
    RuleId::Bb,
];

impl RuleId {
    pub fn name(self) -> &'static str {
        match self {
            RuleId::Odean => "Odean",
            RuleId::Sma1_50 => "SMA1-50",
            RuleId::Sma1_150 => "SMA1-150",
            RuleId::Sma5_150 => "SMA5-150",
            RuleId::Sma1_200 => "SMA1-200",
            RuleId::Sma2_200 => "SMA2-200",
            RuleId::Trb50 => "TRB50",
            RuleId::Trb150 => "TRB150",
            RuleId::Trb200 => "TRB200",
            RuleId::Macd => "MACD",
            RuleId::Roc => "ROC",
            RuleId::Obv1_50 => "OBV1-50",
            RuleId::Obv1_150 => "OBV1-150",
            RuleId::Obv5_150 => "OBV5-150",
            RuleId::Obv1_200 => "OBV1-200",
            RuleId::Obv2_200 => "OBV2-200",
            RuleId::Rsi => "RSI",
            RuleId::Bb => "BB",
        }
    }
}

impl FromStr for RuleId {
    type Err = UnknownRule;

    fn from_str(s: &str) -> Result<Self, UnknownRule> {
        ALL_RULES
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| UnknownRule(s.to_string()))
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
#[error("unknown rule id {0:?}")]
pub struct UnknownRule(pub String);

/// Tunable indicator parameters. Periods embedded in rule names (SMA50,
/// TRB200, ...) are fixed by the catalogue and not configurable.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorOptions {
    pub macd_short: usize,
    pub macd_long: usize,
    pub macd_signal: usize,
    pub rsi_period: usize,
    pub roc_period: usize,
    pub bb_period: usize,
    pub bb_scale: f64,
    pub obv_mode: ObvMode,
    pub trb_mode: TrbMode,
}

impl Default for IndicatorOptions {
    fn default() -> Self {
        IndicatorOptions {
            macd_short: 12,
            macd_long: 26,
            macd_signal: 9,
            rsi_period: 14,
            roc_period: 10,
            bb_period: 20,
            bb_scale: 2.0,
            obv_mode: ObvMode::Carry,
            trb_mode: TrbMode::Midpoint,
        }
    }
}

impl IndicatorOptions {
    pub fn validate(&self) -> Result<(), IndicatorError> {
        if self.macd_short == 0
            || self.macd_long == 0
            || self.macd_signal == 0
            || self.rsi_period == 0
            || self.roc_period == 0
            || self.bb_period == 0
        {
            return Err(IndicatorError::InvalidPeriod);
        }
        if self.macd_short >= self.macd_long {
            return Err(IndicatorError::PeriodOrder {
                short: self.macd_short,
                long: self.macd_long,
            });
        }
        if self.bb_scale.is_nan() || self.bb_scale <= 0.0 {
            return Err(IndicatorError::InvalidScale);
        }
        Ok(())
    }
}

/// Per-hour indicator values behind one rule's decision, in dump order.
///
/// The layout per rule: Odean stores the open/close average in `v1`;
/// single-series rules (SMA1-x, OBV1-x, MACD line, ROC, RSI) store that
/// series in `v1`; crossover rules store (short, long) in (`v1`, `v2`);
/// TRB and BB store (lower, middle, upper).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RuleValues {
    pub v1: Option<f64>,
    pub v2: Option<f64>,
    pub v3: Option<f64>,
}

impl RuleValues {
    fn one(v: Option<f64>) -> Self {
        RuleValues {
            v1: v,
            ..Default::default()
        }
    }

    fn two(a: Option<f64>, b: Option<f64>) -> Self {
        RuleValues {
            v1: a,
            v2: b,
            v3: None,
        }
    }

    fn three(a: Option<f64>, b: Option<f64>, c: Option<f64>) -> Self {
        RuleValues { v1: a, v2: b, v3: c }
    }
}

fn cmp_signal(a: f64, b: f64) -> Signal {
    if a > b {
        Signal::Gain
    } else if a < b {
        Signal::Loss
    } else {
        Signal::Neutral
    }
}

/// Apply one catalogue row to one bar given its indicator values.
/// Missing values (warm-up, undefined) yield Neutral.
pub fn evaluate_rule(rule: RuleId, bar: &GlobalBar, values: &RuleValues) -> Signal {
    match rule {
        // average price above the open means a rising hour
        RuleId::Odean => match values.v1 {
            Some(avg) => cmp_signal(avg, bar.open),
            None => Signal::Neutral,
        },
        // close against a long SMA of the close
        RuleId::Sma1_50 | RuleId::Sma1_150 | RuleId::Sma1_200 => match values.v1 {
            Some(sma) => cmp_signal(bar.close, sma),
            None => Signal::Neutral,
        },
        // short SMA against long SMA
        RuleId::Sma5_150 | RuleId::Sma2_200 => match (values.v1, values.v2) {
            (Some(short), Some(long)) => cmp_signal(short, long),
            _ => Signal::Neutral,
        },
        // close against the middle channel
        RuleId::Trb50 | RuleId::Trb150 | RuleId::Trb200 => match values.v2 {
            Some(mc) => cmp_signal(bar.close, mc),
            None => Signal::Neutral,
        },
        RuleId::Macd => match values.v1 {
            Some(line) => cmp_signal(line, 0.0),
            None => Signal::Neutral,
        },
        RuleId::Roc => match values.v1 {
            Some(r) => cmp_signal(r, 0.0),
            None => Signal::Neutral,
        },
        // close price against an SMA of OBV; dimensionally odd but
        // that is the rule as defined
        RuleId::Obv1_50 | RuleId::Obv1_150 | RuleId::Obv1_200 => match values.v1 {
            Some(obv_sma) => cmp_signal(bar.close, obv_sma),
            None => Signal::Neutral,
        },
        RuleId::Obv5_150 | RuleId::Obv2_200 => match (values.v1, values.v2) {
            (Some(short), Some(long)) => cmp_signal(short, long),
            _ => Signal::Neutral,
        },
        // the >= boundary goes to Gain
        RuleId::Rsi => match values.v1 {
            Some(r) => {
                if r >= 50.0 {
                    Signal::Gain
                } else {
                    Signal::Loss
                }
            }
            None => Signal::Neutral,
        },
        // contrarian band rule: below the lower band is a buy
        RuleId::Bb => match (values.v1, values.v3) {
            (Some(lower), Some(upper)) => {
                if bar.close < lower {
                    Signal::Gain
                } else if bar.close > upper {
                    Signal::Loss
                } else {
                    Signal::Neutral
                }
            }
            _ => Signal::Neutral,
        },
    }
}

/// Signals and backing values for a set of rules over one series, rule by
/// rule in the order requested.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTable {
    rules: Vec<RuleId>,
    /// `columns[r][t]`: values and signal of rule `r` at bar `t`.
    columns: Vec<Vec<(RuleValues, Signal)>>,
}

impl SignalTable {
    pub fn rules(&self) -> &[RuleId] {
        &self.rules
    }

    pub fn rule_index(&self, rule: RuleId) -> Option<usize> {
        self.rules.iter().position(|&r| r == rule)
    }

    pub fn signal_at(&self, rule_idx: usize, bar_idx: usize) -> Signal {
        self.columns[rule_idx][bar_idx].1
    }

    pub fn values_at(&self, rule_idx: usize, bar_idx: usize) -> &RuleValues {
        &self.columns[rule_idx][bar_idx].0
    }

    pub fn column(&self, rule_idx: usize) -> &[(RuleValues, Signal)] {
        &self.columns[rule_idx]
    }
}

fn series_values(rule: RuleId, series: &GlobalBarSeries, opts: &IndicatorOptions) -> Result<Vec<RuleValues>, IndicatorError> {
    let closes = series.closes();
    let n_bars = closes.len();
    let opt_sma = |n: usize, xs: &[f64]| kernels::sma(xs, n);
    match rule {
        RuleId::Odean => Ok(series
            .bars()
            .iter()
            .map(|b| RuleValues::one(Some((b.open + b.close) / 2.0)))
            .collect()),
        RuleId::Sma1_50 => Ok(opt_sma(50, &closes)?.into_iter().map(RuleValues::one).collect()),
        RuleId::Sma1_150 => Ok(opt_sma(150, &closes)?.into_iter().map(RuleValues::one).collect()),
        RuleId::Sma1_200 => Ok(opt_sma(200, &closes)?.into_iter().map(RuleValues::one).collect()),
        RuleId::Sma5_150 => {
            let short = opt_sma(5, &closes)?;
            let long = opt_sma(150, &closes)?;
            Ok(short
                .into_iter()
                .zip(long)
                .map(|(s, l)| RuleValues::two(s, l))
                .collect())
        }
        RuleId::Sma2_200 => {
            let short = opt_sma(2, &closes)?;
            let long = opt_sma(200, &closes)?;
            Ok(short
                .into_iter()
                .zip(long)
                .map(|(s, l)| RuleValues::two(s, l))
                .collect())
        }
        RuleId::Trb50 | RuleId::Trb150 | RuleId::Trb200 => {
            let n = match rule {
                RuleId::Trb50 => 50,
                RuleId::Trb150 => 150,
                _ => 200,
            };
            let bands = kernels::trb(&series.highs(), &series.lows(), n, opts.trb_mode)?;
            Ok(bands
                .into_iter()
                .map(|b| match b {
                    Some(b) => RuleValues::three(Some(b.lower), Some(b.middle), Some(b.upper)),
                    None => RuleValues::default(),
                })
                .collect())
        }
        RuleId::Macd => {
            let points = kernels::macd(&closes, opts.macd_short, opts.macd_long, opts.macd_signal)?;
            Ok(points
                .into_iter()
                .map(|p| RuleValues::three(Some(p.macd), Some(p.signal), Some(p.histogram)))
                .collect())
        }
        RuleId::Roc => Ok(kernels::roc(&closes, opts.roc_period)?
            .into_iter()
            .map(RuleValues::one)
            .collect()),
        RuleId::Obv1_50 | RuleId::Obv1_150 | RuleId::Obv1_200 => {
            let n = match rule {
                RuleId::Obv1_50 => 50,
                RuleId::Obv1_150 => 150,
                _ => 200,
            };
            let obv = kernels::obv(&closes, &series.volumes(), opts.obv_mode)?;
            Ok(opt_sma(n, &obv)?.into_iter().map(RuleValues::one).collect())
        }
        RuleId::Obv5_150 | RuleId::Obv2_200 => {
            let (ns, nl) = if rule == RuleId::Obv5_150 { (5, 150) } else { (2, 200) };
            let obv = kernels::obv(&closes, &series.volumes(), opts.obv_mode)?;
            let short = opt_sma(ns, &obv)?;
            let long = opt_sma(nl, &obv)?;
            Ok(short
                .into_iter()
                .zip(long)
                .map(|(s, l)| RuleValues::two(s, l))
                .collect())
        }
        RuleId::Rsi => Ok(kernels::rsi(&closes, opts.rsi_period)?
            .into_iter()
            .map(|v| RuleValues::one(Some(v)))
            .collect()),
        RuleId::Bb => {
            let bands = kernels::bbands(&closes, opts.bb_period, opts.bb_scale)?;
            Ok(bands
                .into_iter()
                .map(|b| match b {
                    Some(b) => RuleValues::three(Some(b.lower), Some(b.middle), Some(b.upper)),
                    None => RuleValues::default(),
                })
                .collect())
        }
    }
    .inspect(|v: &Vec<RuleValues>| debug_assert_eq!(v.len(), n_bars))
}

/// Evaluate each requested rule over every bar of the series. Rules are
/// independent and computed in parallel when the `parallel` feature is on.
pub fn compute_signal_table(
    series: &GlobalBarSeries,
    rules: &[RuleId],
    opts: &IndicatorOptions,
) -> Result<SignalTable, IndicatorError> {
    opts.validate()?;
    let columns = exec::map_slice(rules, |&rule| {
        series_values(rule, series, opts).map(|values| {
            values
                .into_iter()
                .zip(series.bars())
                .map(|(v, bar)| (v, evaluate_rule(rule, bar, &v)))
                .collect::<Vec<_>>()
        })
    });
    let mut cols = Vec::with_capacity(columns.len());
    for c in columns {
        cols.push(c?);
    }
    Ok(SignalTable {
        rules: rules.to_vec(),
        columns: cols,
    })
}
