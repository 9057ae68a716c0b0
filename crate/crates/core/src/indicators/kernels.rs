//! Indicator series transforms.
//!
//! Every kernel maps input series to an output series of the same length,
//! aligned position by position. Windowed transforms (SMA, TRB, BB) are
//! undefined for the first `n - 1` positions; ROC is undefined for the
//! first `n` and wherever the reference price is zero. Recursive
//! transforms (EMA, OBV, RSI) are defined from position 0 via their seed
//! values. Undefined positions are `None` and classify as Neutral
//! downstream.

use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IndicatorError {
    #[error("period must be >= 1")]
    InvalidPeriod,
    #[error("short period {short} must be less than long period {long}")]
    PeriodOrder { short: usize, long: usize },
    #[error("series length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("band scale must be positive")]
    InvalidScale,
}

/// MACD line, its signal line, and their difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacdPoint {
    pub macd: f64,
    pub signal: f64,
    pub histogram: f64,
}

/// A lower/middle/upper channel value (TRB channels, Bollinger bands).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bands {
    pub lower: f64,
    pub middle: f64,
    pub upper: f64,
}

/// Behaviour of the OBV running total when the close is unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObvMode {
    /// Carry the previous total forward (standard definition).
    #[default]
    Carry,
    /// Reset the total to zero on an unchanged close.
    Reset,
}

/// Middle-channel convention for the trading range breakout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrbMode {
    /// Midpoint of the channel: (UC + LC) / 2.
    #[default]
    Midpoint,
    /// Half the channel width: (UC - LC) / 2.
    HalfRange,
}

/// Simple moving average over the trailing `n` positions.
pub fn sma(input: &[f64], n: usize) -> Result<Vec<Option<f64>>, IndicatorError> {
    if n < 1 {
        return Err(IndicatorError::InvalidPeriod);
    }
    let mut out = vec![None; input.len()];
    let mut running = 0.0;
    for t in 0..input.len() {
        running += input[t];
        if t >= n {
            running -= input[t - n];
        }
        if t + 1 >= n {
            out[t] = Some(running / n as f64);
        }
    }
    Ok(out)
}

/// Exponential moving average with smoothing `a = 2 / (n + 1)`, seeded
/// with the first input.
pub fn ema(input: &[f64], n: usize) -> Result<Vec<f64>, IndicatorError> {
    if n < 1 {
        return Err(IndicatorError::InvalidPeriod);
    }
    let a = 2.0 / (n as f64 + 1.0);
    let mut out = Vec::with_capacity(input.len());
    for (t, &x) in input.iter().enumerate() {
        if t == 0 {
            out.push(x);
        } else {
            out.push((1.0 - a) * out[t - 1] + a * x);
        }
    }
    Ok(out)
}

/// MACD: fast EMA minus slow EMA, a signal EMA over that difference, and
/// the histogram between the two.
pub fn macd(
    input: &[f64],
    short: usize,
    long: usize,
    signal: usize,
) -> Result<Vec<MacdPoint>, IndicatorError> {
    if short < 1 || long < 1 || signal < 1 {
        return Err(IndicatorError::InvalidPeriod);
    }
    if short >= long {
        return Err(IndicatorError::PeriodOrder { short, long });
    }
    let fast = ema(input, short)?;
    let slow = ema(input, long)?;
    let line: Vec<f64> = fast.iter().zip(&slow).map(|(f, s)| f - s).collect();
    let sig = ema(&line, signal)?;
    Ok(line
        .iter()
        .zip(&sig)
        .map(|(&m, &s)| MacdPoint {
            macd: m,
            signal: s,
            histogram: m - s,
        })
        .collect())
}

/// Rate of change against the price `n` positions back. Undefined while
/// the lookback is out of range or the reference price is zero.
pub fn roc(input: &[f64], n: usize) -> Result<Vec<Option<f64>>, IndicatorError> {
    if n < 1 {
        return Err(IndicatorError::InvalidPeriod);
    }
    let mut out = vec![None; input.len()];
    for t in n..input.len() {
        let past = input[t - n];
        if past != 0.0 {
            out[t] = Some((input[t] - past) / past);
        }
    }
    Ok(out)
}

/// On-balance volume: a running total that adds volume when the close
/// rises and subtracts it when the close falls. Starts at zero.
pub fn obv(close: &[f64], volume: &[f64], mode: ObvMode) -> Result<Vec<f64>, IndicatorError> {
    if close.len() != volume.len() {
        return Err(IndicatorError::LengthMismatch {
            left: close.len(),
            right: volume.len(),
        });
    }
    let mut out = Vec::with_capacity(close.len());
    for t in 0..close.len() {
        if t == 0 {
            out.push(0.0);
            continue;
        }
        let prev = out[t - 1];
        let v = if close[t] > close[t - 1] {
            prev + volume[t]
        } else if close[t] < close[t - 1] {
            prev - volume[t]
        } else {
            match mode {
                ObvMode::Carry => prev,
                ObvMode::Reset => 0.0,
            }
        };
        out.push(v);
    }
    Ok(out)
}

/// Relative strength index with `1/n` smoothing of the up and down moves,
/// both smoothers seeded at zero.
///
/// Degenerate cases: no observed losses with some gains gives 100, no
/// moves at all gives 50 (in particular at position 0).
pub fn rsi(input: &[f64], n: usize) -> Result<Vec<f64>, IndicatorError> {
    if n < 1 {
        return Err(IndicatorError::InvalidPeriod);
    }
    let mut out = Vec::with_capacity(input.len());
    let mut sup = 0.0;
    let mut sdown = 0.0;
    let w = (n as f64 - 1.0) / n as f64;
    for t in 0..input.len() {
        if t > 0 {
            let delta = input[t] - input[t - 1];
            let up = if delta > 0.0 { delta } else { 0.0 };
            let down = if delta < 0.0 { -delta } else { 0.0 };
            sup = w * sup + up / n as f64;
            sdown = w * sdown + down / n as f64;
        }
        let value = if sdown == 0.0 {
            if sup > 0.0 {
                100.0
            } else {
                50.0
            }
        } else {
            100.0 - 100.0 / (1.0 + sup / sdown)
        };
        out.push(value);
    }
    Ok(out)
}

/// Sliding-window extremum via a monotonic deque. `better` decides which
/// of two values survives at the deque front.
fn sliding_extremum(xs: &[f64], n: usize, better: impl Fn(f64, f64) -> bool) -> Vec<Option<f64>> {
    let mut out = vec![None; xs.len()];
    let mut deque: VecDeque<usize> = VecDeque::new();
    for t in 0..xs.len() {
        while deque.front().is_some_and(|&i| i + n <= t) {
            deque.pop_front();
        }
        while deque.back().is_some_and(|&i| better(xs[t], xs[i])) {
            deque.pop_back();
        }
        deque.push_back(t);
        if t + 1 >= n {
            out[t] = Some(xs[*deque.front().unwrap()]);
        }
    }
    out
}

/// Trading range breakout channels over the trailing `n` bars: highest
/// high (upper), lowest low (lower), and the middle channel per `mode`.
pub fn trb(
    high: &[f64],
    low: &[f64],
    n: usize,
    mode: TrbMode,
) -> Result<Vec<Option<Bands>>, IndicatorError> {
    if n < 1 {
        return Err(IndicatorError::InvalidPeriod);
    }
    if high.len() != low.len() {
        return Err(IndicatorError::LengthMismatch {
            left: high.len(),
            right: low.len(),
        });
    }
    let uc = sliding_extremum(high, n, |a, b| a >= b);
    let lc = sliding_extremum(low, n, |a, b| a <= b);
    Ok(uc
        .into_iter()
        .zip(lc)
        .map(|pair| match pair {
            (Some(u), Some(l)) => Some(Bands {
                lower: l,
                middle: match mode {
                    TrbMode::Midpoint => (u + l) / 2.0,
                    TrbMode::HalfRange => (u - l) / 2.0,
                },
                upper: u,
            }),
            _ => None,
        })
        .collect())
}

/// Bollinger bands: SMA middle band offset by `scale` population standard
/// deviations of the same window.
pub fn bbands(input: &[f64], n: usize, scale: f64) -> Result<Vec<Option<Bands>>, IndicatorError> {
    if n < 1 {
        return Err(IndicatorError::InvalidPeriod);
    }
    if scale.is_nan() || scale <= 0.0 {
        return Err(IndicatorError::InvalidScale);
    }
    let middle = sma(input, n)?;
    Ok(middle
        .into_iter()
        .enumerate()
        .map(|(t, m)| {
            m.map(|mid| {
                let window = &input[t + 1 - n..=t];
                let var = window.iter().map(|x| (x - mid) * (x - mid)).sum::<f64>() / n as f64;
                let offset = scale * var.sqrt();
                Bands {
                    lower: mid - offset,
                    middle: mid,
                    upper: mid + offset,
                }
            })
        })
        .collect())
}
