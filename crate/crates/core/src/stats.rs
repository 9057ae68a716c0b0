//! GR/LR tallies and windowed two-sample t-statistics.
//!
//! Each sell is joined to its hourly bar and labelled per rule; labels
//! are counted by (receiving exchange entity, sub-bucket) and the GR and
//! LR count vectors feed a two-sample t-test per window and rule,
//! oriented so that GR-dominant windows produce negative t.
//!
//! The sampling unit (what one t-test observation is) is a methodological
//! free parameter; it defaults to one entity-day of counts, with hour and
//! whole-entity units available.

mod student;

use chrono::{Datelike, TimeZone, Utc};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::str::FromStr;
use thiserror::Error;

use crate::chain::TxId;
use crate::entity::EntityId;
use crate::exec;
use crate::indicators::{RuleId, Signal, SignalTable};
use crate::market::GlobalBarSeries;
use crate::sells::SellEvent;

pub use student::{reg_inc_beta, two_sided_p};

/// Half-open UTC interval [start, end).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeWindow {
    pub start: i64,
    pub end: i64,
}

impl TimeWindow {
    pub fn contains(&self, ts: i64) -> bool {
        self.start <= ts && ts < self.end
    }
}

/// What one t-test observation is: counts per (entity, sub-bucket).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleUnit {
    Hour,
    #[default]
    Day,
    /// One row per entity over the whole window.
    EntityTotal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TestVariant {
    /// Pooled-variance two-sample Student's t.
    #[default]
    Student,
    /// Welch's unequal-variance variant.
    Welch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Windowing {
    Monthly,
    Yearly,
    FullRange,
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("degrees of freedom must be positive")]
    InvalidDf,
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Format(String),
}

/// One sell with its per-rule labels, aligned to a rule list.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedSell {
    pub tx_id: TxId,
    pub timestamp: i64,
    pub exchange: EntityId,
    pub signals: Vec<Signal>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassifyDiagnostics {
    /// Sells landing in hours with no bar (gaps or outside the series);
    /// they classify Neutral under every rule.
    pub gap_sells: u64,
}

/// Join each sell to its hourly bar and label it under every rule of the
/// table. Sells in gap hours are Neutral everywhere and counted.
pub fn classify_sells(
    sells: &[SellEvent],
    series: &GlobalBarSeries,
    table: &SignalTable,
) -> (Vec<ClassifiedSell>, ClassifyDiagnostics) {
    let n_rules = table.rules().len();
    let labelled: Vec<(ClassifiedSell, bool)> = exec::map_slice(sells, |sell| {
        let bar_idx = series.bucket_index_of(sell.timestamp);
        let signals = match bar_idx {
            Some(idx) => (0..n_rules).map(|r| table.signal_at(r, idx)).collect(),
            None => vec![Signal::Neutral; n_rules],
        };
        (
            ClassifiedSell {
                tx_id: sell.tx_id.clone(),
                timestamp: sell.timestamp,
                exchange: sell.target_exchange.clone(),
                signals,
            },
            bar_idx.is_none(),
        )
    });
    let mut diag = ClassifyDiagnostics::default();
    let mut out = Vec::with_capacity(labelled.len());
    for (sell, gap) in labelled {
        diag.gap_sells += gap as u64;
        out.push(sell);
    }
    (out, diag)
}

/// One tally row: counts for one (entity, sub-bucket) cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TallyRow {
    pub entity: EntityId,
    pub bucket_start: i64,
    pub gr: u64,
    pub lr: u64,
    pub neutral: u64,
}

/// Per-window, per-rule GR/LR/Neutral counts grouped by sampling unit.
/// Cells with no sells are omitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrLrTally {
    pub window: TimeWindow,
    pub rule: RuleId,
    pub rows: Vec<TallyRow>,
    pub gr_total: u64,
    pub lr_total: u64,
    pub neutral_total: u64,
}

fn bucket_start(ts: i64, unit: SampleUnit, window: TimeWindow) -> i64 {
    match unit {
        SampleUnit::Hour => ts.div_euclid(3600) * 3600,
        SampleUnit::Day => ts.div_euclid(86_400) * 86_400,
        SampleUnit::EntityTotal => window.start,
    }
}

/// Count one rule's labels over the window, grouped by (entity,
/// sub-bucket). `rule_idx` indexes the signal column inside each
/// [`ClassifiedSell`].
pub fn tally(
    classified: &[ClassifiedSell],
    rule_idx: usize,
    rule: RuleId,
    window: TimeWindow,
    unit: SampleUnit,
) -> GrLrTally {
    let mut cells: BTreeMap<(EntityId, i64), (u64, u64, u64)> = BTreeMap::new();
    for sell in classified {
        if !window.contains(sell.timestamp) {
            continue;
        }
        let key = (
            sell.exchange.clone(),
            bucket_start(sell.timestamp, unit, window),
        );
        let cell = cells.entry(key).or_insert((0, 0, 0));
        match sell.signals[rule_idx] {
            Signal::Gain => cell.0 += 1,
            Signal::Loss => cell.1 += 1,
            Signal::Neutral => cell.2 += 1,
        }
    }
    let mut out = GrLrTally {
        window,
        rule,
        rows: Vec::with_capacity(cells.len()),
        gr_total: 0,
        lr_total: 0,
        neutral_total: 0,
    };
    for ((entity, bucket), (gr, lr, neutral)) in cells {
        out.gr_total += gr;
        out.lr_total += lr;
        out.neutral_total += neutral;
        out.rows.push(TallyRow {
            entity,
            bucket_start: bucket,
            gr,
            lr,
            neutral,
        });
    }
    out
}

/// Two-sample test result. Statistics are `None` when the test is
/// undefined (fewer than two rows, or no variance with equal means);
/// report writers render those as blank fields.
#[derive(Debug, Clone, PartialEq)]
pub struct TTestResult {
    pub window: TimeWindow,
    pub rule: RuleId,
    pub t_stat: Option<f64>,
    pub p_value: Option<f64>,
    pub df: Option<f64>,
    pub n_gr: usize,
    pub n_lr: usize,
}

/// Two-sided p for Student's t. Errors on non-positive `df`.
pub fn p_value(t: f64, df: f64) -> Result<f64, StatsError> {
    if df <= 0.0 {
        return Err(StatsError::InvalidDf);
    }
    Ok(two_sided_p(t, df))
}

/// Two-sample t-test of the per-row GR counts against the per-row LR
/// counts, oriented so that GR-dominant tallies give negative t.
pub fn t_test(tally: &GrLrTally, variant: TestVariant) -> TTestResult {
    let n = tally.rows.len();
    let mut result = TTestResult {
        window: tally.window,
        rule: tally.rule,
        t_stat: None,
        p_value: None,
        df: None,
        n_gr: n,
        n_lr: n,
    };
    if n < 2 {
        return result;
    }
    let nf = n as f64;
    let gr: Vec<f64> = tally.rows.iter().map(|r| r.gr as f64).collect();
    let lr: Vec<f64> = tally.rows.iter().map(|r| r.lr as f64).collect();
    let mean_gr = gr.iter().sum::<f64>() / nf;
    let mean_lr = lr.iter().sum::<f64>() / nf;
    let ss_gr: f64 = gr.iter().map(|x| (x - mean_gr) * (x - mean_gr)).sum();
    let ss_lr: f64 = lr.iter().map(|x| (x - mean_lr) * (x - mean_lr)).sum();

    let (se, df) = match variant {
        TestVariant::Student => {
            let df = 2.0 * nf - 2.0;
            let pooled = (ss_gr + ss_lr) / df;
            ((pooled * 2.0 / nf).sqrt(), df)
        }
        TestVariant::Welch => {
            let v_gr = ss_gr / (nf - 1.0) / nf;
            let v_lr = ss_lr / (nf - 1.0) / nf;
            let se = (v_gr + v_lr).sqrt();
            let df = if se > 0.0 {
                (v_gr + v_lr) * (v_gr + v_lr)
                    / (v_gr * v_gr / (nf - 1.0) + v_lr * v_lr / (nf - 1.0))
            } else {
                2.0 * nf - 2.0
            };
            (se, df)
        }
    };

    if se == 0.0 {
        if mean_gr == mean_lr {
            return result; // nothing to test
        }
        // no within-sample variance but distinct means: the limit case
        result.t_stat = Some(if mean_lr > mean_gr {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        });
        result.p_value = Some(0.0);
        result.df = Some(df);
        return result;
    }

    let t = (mean_lr - mean_gr) / se;
    result.t_stat = Some(t);
    result.p_value = Some(two_sided_p(t, df));
    result.df = Some(df);
    result
}

/// One report line: the tally and its test.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub tally: GrLrTally,
    pub test: TTestResult,
}

fn month_start(ts: i64) -> i64 {
    let dt = Utc.timestamp_opt(ts, 0).unwrap();
    Utc.with_ymd_and_hms(dt.year(), dt.month(), 1, 0, 0, 0)
        .unwrap()
        .timestamp()
}

fn next_month(ts: i64) -> i64 {
    let dt = Utc.timestamp_opt(ts, 0).unwrap();
    let (y, m) = if dt.month() == 12 {
        (dt.year() + 1, 1)
    } else {
        (dt.year(), dt.month() + 1)
    };
    Utc.with_ymd_and_hms(y, m, 1, 0, 0, 0).unwrap().timestamp()
}

fn year_start(ts: i64) -> i64 {
    let dt = Utc.timestamp_opt(ts, 0).unwrap();
    Utc.with_ymd_and_hms(dt.year(), 1, 1, 0, 0, 0)
        .unwrap()
        .timestamp()
}

fn next_year(ts: i64) -> i64 {
    let dt = Utc.timestamp_opt(ts, 0).unwrap();
    Utc.with_ymd_and_hms(dt.year() + 1, 1, 1, 0, 0, 0)
        .unwrap()
        .timestamp()
}

/// The calendar windows covering [min_ts, max_ts] under a windowing mode.
pub fn windows_covering(min_ts: i64, max_ts: i64, windowing: Windowing) -> Vec<TimeWindow> {
    match windowing {
        Windowing::FullRange => vec![TimeWindow {
            start: min_ts,
            end: max_ts + 1,
        }],
        Windowing::Monthly => {
            let mut out = Vec::new();
            let mut start = month_start(min_ts);
            while start <= max_ts {
                let end = next_month(start);
                out.push(TimeWindow { start, end });
                start = end;
            }
            out
        }
        Windowing::Yearly => {
            let mut out = Vec::new();
            let mut start = year_start(min_ts);
            while start <= max_ts {
                let end = next_year(start);
                out.push(TimeWindow { start, end });
                start = end;
            }
            out
        }
    }
}

/// Tally and test every (window, rule) pair. Windows cover the classified
/// data span; empty windows inside the span still emit rows (with blank
/// statistics). Output is ordered by window then catalogue rule order.
pub fn windowed_report(
    classified: &[ClassifiedSell],
    rules: &[RuleId],
    windowing: Windowing,
    unit: SampleUnit,
    variant: TestVariant,
) -> Vec<ReportRow> {
    if classified.is_empty() {
        return Vec::new();
    }
    let min_ts = classified.iter().map(|s| s.timestamp).min().unwrap();
    let max_ts = classified.iter().map(|s| s.timestamp).max().unwrap();
    let windows = windows_covering(min_ts, max_ts, windowing);

    let pairs: Vec<(TimeWindow, usize)> = windows
        .iter()
        .flat_map(|&w| (0..rules.len()).map(move |r| (w, r)))
        .collect();
    exec::map_vec(pairs, |(window, rule_idx)| {
        let tally = tally(classified, rule_idx, rules[rule_idx], window, unit);
        let test = t_test(&tally, variant);
        ReportRow { tally, test }
    })
}

pub fn format_iso(ts: i64) -> String {
    Utc.timestamp_opt(ts, 0)
        .unwrap()
        .format("%Y-%m-%dT%H:%M:%SZ")
        .to_string()
}

pub fn format_month(ts: i64) -> String {
    Utc.timestamp_opt(ts, 0).unwrap().format("%Y-%m").to_string()
}

fn opt_num(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        // Display never uses an exponent, which turns small p-values into
        // hundreds of digits
        Some(x) if x != 0.0 && x.abs() < 1e-4 => format!("{x:e}"),
        Some(x) => x.to_string(),
    }
}

/// Report CSV:
/// `window_start,window_end,rule_id,gr,lr,neutral,t_stat,p_value,df,n_gr,n_lr`.
/// Window bounds are ISO-8601 UTC; the end bound is exclusive. Undefined
/// statistics are blank.
pub fn write_report_csv<W: Write>(rows: &[ReportRow], w: W) -> Result<(), StatsError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "window_start",
        "window_end",
        "rule_id",
        "gr",
        "lr",
        "neutral",
        "t_stat",
        "p_value",
        "df",
        "n_gr",
        "n_lr",
    ])?;
    for row in rows {
        let t = &row.test;
        let ta = &row.tally;
        wtr.write_record([
            format_iso(ta.window.start),
            format_iso(ta.window.end),
            ta.rule.name().to_string(),
            ta.gr_total.to_string(),
            ta.lr_total.to_string(),
            ta.neutral_total.to_string(),
            opt_num(t.t_stat),
            opt_num(t.p_value),
            opt_num(t.df),
            t.n_gr.to_string(),
            t.n_lr.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Monthly plot data: `month,rule_id,t_stat,p_value`.
pub fn write_monthly_plot_csv<W: Write>(rows: &[ReportRow], w: W) -> Result<(), StatsError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["month", "rule_id", "t_stat", "p_value"])?;
    for row in rows {
        wtr.write_record([
            format_month(row.tally.window.start),
            row.tally.rule.name().to_string(),
            opt_num(row.test.t_stat),
            opt_num(row.test.p_value),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Classified sells as CSV: fixed columns then one signal column per rule.
pub fn write_classified_csv<W: Write>(
    classified: &[ClassifiedSell],
    rules: &[RuleId],
    w: W,
) -> Result<(), StatsError> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["tx_id".to_string(), "timestamp".into(), "target_exchange".into()];
    header.extend(rules.iter().map(|r| r.name().to_string()));
    wtr.write_record(&header)?;
    for sell in classified {
        let mut rec = vec![
            sell.tx_id.clone(),
            sell.timestamp.to_string(),
            sell.exchange.as_str().to_string(),
        ];
        rec.extend(sell.signals.iter().map(|s| s.as_str().to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_classified_csv<R: Read>(
    r: R,
) -> Result<(Vec<ClassifiedSell>, Vec<RuleId>), StatsError> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let fixed = ["tx_id", "timestamp", "target_exchange"];
    if headers.len() < fixed.len() || headers.iter().take(3).ne(fixed) {
        return Err(StatsError::Format(
            "classified csv must start with tx_id,timestamp,target_exchange".into(),
        ));
    }
    let rules: Vec<RuleId> = headers
        .iter()
        .skip(3)
        .map(|h| RuleId::from_str(h).map_err(|e| StatsError::Format(e.to_string())))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let timestamp: i64 = rec[1]
            .parse()
            .map_err(|_| StatsError::Format(format!("line {line}: bad timestamp {:?}", &rec[1])))?;
        let signals: Vec<Signal> = rec
            .iter()
            .skip(3)
            .map(|s| {
                Signal::from_str(s)
                    .map_err(|_| StatsError::Format(format!("line {line}: bad signal {s:?}")))
            })
            .collect::<Result<_, _>>()?;
        if signals.len() != rules.len() {
            return Err(StatsError::Format(format!(
                "line {line}: expected {} signals, got {}",
                rules.len(),
                signals.len()
            )));
        }
        out.push(ClassifiedSell {
            tx_id: rec[0].to_string(),
            timestamp,
            exchange: EntityId::new(&rec[2]),
            signals,
        });
    }
    Ok((out, rules))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indicators::{compute_signal_table, IndicatorOptions, ALL_RULES};
    use crate::market::{global_average, AverageMode, OhlcBar, HOUR_SECONDS};
    use proptest::prelude::*;

    fn day_window(days: i64) -> TimeWindow {
        TimeWindow {
            start: 0,
            end: days * 86_400,
        }
    }

    fn sell(ts: i64, exchange: &str, signal: Signal) -> ClassifiedSell {
        ClassifiedSell {
            tx_id: format!("t{ts}-{exchange}"),
            timestamp: ts,
            exchange: EntityId::new(exchange),
            signals: vec![signal],
        }
    }

    // --- tally ---

    #[test]
    fn tally_counts_one_entity_one_day() {
        let sells: Vec<ClassifiedSell> = [
            Signal::Gain,
            Signal::Gain,
            Signal::Gain,
            Signal::Loss,
            Signal::Loss,
        ]
        .iter()
        .enumerate()
        .map(|(i, &s)| sell(1000 + i as i64, "E1", s))
        .collect();
        let t = tally(&sells, 0, RuleId::Odean, day_window(1), SampleUnit::Day);
        assert_eq!(t.rows.len(), 1);
        let row = &t.rows[0];
        assert_eq!((row.gr, row.lr, row.neutral), (3, 2, 0));
        assert_eq!(row.bucket_start, 0);
        assert_eq!((t.gr_total, t.lr_total), (3, 2));
    }

    #[test]
    fn tally_splits_by_exchange() {
        let sells = vec![sell(10, "E1", Signal::Gain), sell(20, "E2", Signal::Loss)];
        let t = tally(&sells, 0, RuleId::Odean, day_window(1), SampleUnit::Day);
        assert_eq!(t.rows.len(), 2);
    }

    #[test]
    fn tally_ignores_out_of_window() {
        let sells = vec![
            sell(10, "E1", Signal::Gain),
            sell(100_000_000, "E1", Signal::Gain),
        ];
        let t = tally(&sells, 0, RuleId::Odean, day_window(1), SampleUnit::Day);
        assert_eq!(t.gr_total, 1);
    }

    proptest! {
        #[test]
        fn tally_totals_equal_row_sums(
            raw in prop::collection::vec((0i64..200_000, 0usize..3, 0usize..3), 0..80),
        ) {
            let signals = [Signal::Gain, Signal::Loss, Signal::Neutral];
            let sells: Vec<ClassifiedSell> = raw
                .iter()
                .map(|&(ts, e, s)| sell(ts, &format!("E{e}"), signals[s]))
                .collect();
            let t = tally(&sells, 0, RuleId::Odean, day_window(3), SampleUnit::Day);
            prop_assert_eq!(t.gr_total, t.rows.iter().map(|r| r.gr).sum::<u64>());
            prop_assert_eq!(t.lr_total, t.rows.iter().map(|r| r.lr).sum::<u64>());
            prop_assert_eq!(t.neutral_total, t.rows.iter().map(|r| r.neutral).sum::<u64>());
            let total: u64 = t.rows.iter().map(|r| r.gr + r.lr + r.neutral).sum();
            let in_window = raw.iter().filter(|(ts, _, _)| *ts < 3 * 86_400).count() as u64;
            prop_assert_eq!(total, in_window);
        }
    }

    // --- t test ---

    fn tally_from(gr: &[u64], lr: &[u64]) -> GrLrTally {
        let rows: Vec<TallyRow> = gr
            .iter()
            .zip(lr)
            .enumerate()
            .map(|(i, (&g, &l))| TallyRow {
                entity: EntityId::new("E"),
                bucket_start: i as i64 * 86_400,
                gr: g,
                lr: l,
                neutral: 0,
            })
            .collect();
        GrLrTally {
            window: day_window(gr.len() as i64),
            rule: RuleId::Odean,
            gr_total: gr.iter().sum(),
            lr_total: lr.iter().sum(),
            neutral_total: 0,
            rows,
        }
    }

    #[test]
    fn equal_samples_t_zero_p_one() {
        let t = t_test(&tally_from(&[3, 5, 9], &[3, 5, 9]), TestVariant::Student);
        assert_eq!(t.t_stat, Some(0.0));
        assert_eq!(t.p_value, Some(1.0));
        assert_eq!(t.df, Some(4.0));
    }

    #[test]
    fn hand_computed_pooled_example() {
        // GR [4,5,6] vs LR [1,2,3]: pooled variance 1, se sqrt(2/3)
        let t = t_test(&tally_from(&[4, 5, 6], &[1, 2, 3]), TestVariant::Student);
        let got = t.t_stat.unwrap();
        assert!((got - (-3.674_234_614_174_767)).abs() < 1e-12, "{got}");
        assert!((t.p_value.unwrap() - 0.021_311_641_128_756_7).abs() < 1e-10);
        assert!(got < 0.0, "GR-dominant must be negative");
    }

    #[test]
    fn single_row_is_undefined() {
        let t = t_test(&tally_from(&[4], &[1]), TestVariant::Student);
        assert_eq!(t.t_stat, None);
        assert_eq!(t.p_value, None);
    }

    #[test]
    fn zero_variance_equal_means_undefined() {
        let t = t_test(&tally_from(&[2, 2, 2], &[2, 2, 2]), TestVariant::Student);
        assert_eq!(t.t_stat, None);
    }

    #[test]
    fn zero_variance_unequal_means_is_directional() {
        let t = t_test(&tally_from(&[5, 5, 5], &[1, 1, 1]), TestVariant::Student);
        assert_eq!(t.t_stat, Some(f64::NEG_INFINITY));
        assert_eq!(t.p_value, Some(0.0));
    }

    #[test]
    fn welch_agrees_with_student_on_equal_sizes() {
        let a = t_test(&tally_from(&[4, 5, 6], &[1, 2, 3]), TestVariant::Student);
        let b = t_test(&tally_from(&[4, 5, 6], &[1, 2, 3]), TestVariant::Welch);
        assert!((a.t_stat.unwrap() - b.t_stat.unwrap()).abs() < 1e-12);
        assert!((a.df.unwrap() - b.df.unwrap()).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn swapping_samples_negates_t(
            gr in prop::collection::vec(0u64..50, 2..20),
            lr_seed in prop::collection::vec(0u64..50, 2..20),
        ) {
            let n = gr.len().min(lr_seed.len());
            let gr = &gr[..n];
            let lr = &lr_seed[..n];
            let fwd = t_test(&tally_from(gr, lr), TestVariant::Student);
            let rev = t_test(&tally_from(lr, gr), TestVariant::Student);
            match (fwd.t_stat, rev.t_stat) {
                (Some(a), Some(b)) => prop_assert_eq!(a, -b),
                (None, None) => {}
                other => prop_assert!(false, "asymmetric definedness {:?}", other),
            }
        }

        #[test]
        fn row_permutation_invariant(
            gr in prop::collection::vec(0u64..50, 2..15),
            lr_seed in prop::collection::vec(0u64..50, 2..15),
            rot in 0usize..15,
        ) {
            let n = gr.len().min(lr_seed.len());
            let base = tally_from(&gr[..n], &lr_seed[..n]);
            let mut rotated = base.clone();
            rotated.rows.rotate_left(rot % n);
            let a = t_test(&base, TestVariant::Student);
            let b = t_test(&rotated, TestVariant::Student);
            match (a.t_stat, b.t_stat) {
                (Some(x), Some(y)) if x.is_infinite() || y.is_infinite() => {
                    prop_assert_eq!(x, y)
                }
                (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0)),
                (None, None) => {}
                other => prop_assert!(false, "{:?}", other),
            }
        }

        #[test]
        fn gr_dominant_means_negative_t(
            base in prop::collection::vec(0u64..20, 3..15),
            lift in 1u64..30,
        ) {
            let gr: Vec<u64> = base.iter().map(|x| x + lift).collect();
            let t = t_test(&tally_from(&gr, &base), TestVariant::Student);
            if let Some(v) = t.t_stat {
                prop_assert!(v < 0.0);
            }
        }
    }

    // --- p value ---

    #[test]
    fn p_value_rejects_bad_df() {
        assert!(p_value(1.0, 0.0).is_err());
        assert!(p_value(1.0, -3.0).is_err());
        assert!(p_value(1.0, 5.0).is_ok());
    }

    // --- classify ---

    fn rising_series(hours: usize) -> GlobalBarSeries {
        let bars: Vec<OhlcBar> = (0..hours)
            .map(|i| {
                let open = 100.0 + i as f64;
                let close = open + 1.0;
                OhlcBar {
                    hour_start: i as i64 * HOUR_SECONDS,
                    exchange: "x".into(),
                    open,
                    high: close,
                    low: open,
                    close,
                    volume: 1.0,
                }
            })
            .collect();
        global_average(&bars, AverageMode::Simple)
    }

    #[test]
    fn classify_odean_labels_match_hand_evaluation() {
        // rising closes: every hour is a Gain under Odean
        let series = rising_series(5);
        let table =
            compute_signal_table(&series, &[RuleId::Odean], &IndicatorOptions::default()).unwrap();
        let sells: Vec<SellEvent> = (0..5)
            .map(|i| SellEvent {
                tx_id: format!("s{i}"),
                timestamp: i * HOUR_SECONDS + 30,
                source_entity: EntityId::new("inv"),
                target_exchange: EntityId::new("E1"),
                value: 10,
            })
            .collect();
        let (classified, diag) = classify_sells(&sells, &series, &table);
        assert_eq!(diag.gap_sells, 0);
        assert!(classified.iter().all(|c| c.signals[0] == Signal::Gain));
    }

    #[test]
    fn classify_gap_sell_is_neutral_with_diagnostic() {
        let series = rising_series(2);
        let table =
            compute_signal_table(&series, &[RuleId::Odean], &IndicatorOptions::default()).unwrap();
        let sells = vec![SellEvent {
            tx_id: "s".into(),
            timestamp: 10 * HOUR_SECONDS,
            source_entity: EntityId::new("inv"),
            target_exchange: EntityId::new("E1"),
            value: 10,
        }];
        let (classified, diag) = classify_sells(&sells, &series, &table);
        assert_eq!(diag.gap_sells, 1);
        assert_eq!(classified[0].signals[0], Signal::Neutral);
    }

    // --- windows & report ---

    #[test]
    fn monthly_windows_cover_span() {
        // 2017-01-15 .. 2017-03-02
        let min = Utc.with_ymd_and_hms(2017, 1, 15, 12, 0, 0).unwrap().timestamp();
        let max = Utc.with_ymd_and_hms(2017, 3, 2, 1, 0, 0).unwrap().timestamp();
        let w = windows_covering(min, max, Windowing::Monthly);
        assert_eq!(w.len(), 3);
        assert_eq!(format_month(w[0].start), "2017-01");
        assert_eq!(format_month(w[2].start), "2017-03");
        for pair in w.windows(2) {
            assert_eq!(pair[0].end, pair[1].start);
        }
    }

    #[test]
    fn two_month_report_has_two_windows_per_rule() {
        let jan = Utc.with_ymd_and_hms(2017, 1, 10, 0, 0, 0).unwrap().timestamp();
        let feb = Utc.with_ymd_and_hms(2017, 2, 10, 0, 0, 0).unwrap().timestamp();
        let sells = vec![sell(jan, "E1", Signal::Gain), sell(feb, "E1", Signal::Loss)];
        let rows = windowed_report(
            &sells,
            &[RuleId::Odean],
            Windowing::Monthly,
            SampleUnit::Day,
            TestVariant::Student,
        );
        assert_eq!(rows.len(), 2);
        // too few samples in each window: blank stats but rows present
        assert!(rows.iter().all(|r| r.test.t_stat.is_none()));
    }

    #[test]
    fn full_range_covers_union() {
        let sells = vec![
            sell(5_000, "E1", Signal::Gain),
            sell(9_000_000, "E2", Signal::Loss),
        ];
        let rows = windowed_report(
            &sells,
            &[RuleId::Odean],
            Windowing::FullRange,
            SampleUnit::Day,
            TestVariant::Student,
        );
        assert_eq!(rows.len(), 1);
        let w = rows[0].tally.window;
        assert_eq!(w.start, 5_000);
        assert_eq!(w.end, 9_000_001);
        assert_eq!(rows[0].tally.gr_total + rows[0].tally.lr_total, 2);
    }

    proptest! {
        #[test]
        fn monthly_tallies_sum_to_yearly(
            raw in prop::collection::vec((0i64..31_000_000, 0usize..3, 0usize..3), 1..120),
        ) {
            // timestamps within 1970, so one year covers them all
            let signals = [Signal::Gain, Signal::Loss, Signal::Neutral];
            let sells: Vec<ClassifiedSell> = raw
                .iter()
                .map(|&(ts, e, s)| sell(ts, &format!("E{e}"), signals[s]))
                .collect();
            let monthly = windowed_report(
                &sells, &[RuleId::Odean], Windowing::Monthly, SampleUnit::Day, TestVariant::Student,
            );
            let yearly = windowed_report(
                &sells, &[RuleId::Odean], Windowing::Yearly, SampleUnit::Day, TestVariant::Student,
            );
            prop_assert_eq!(yearly.len(), 1);
            let gr: u64 = monthly.iter().map(|r| r.tally.gr_total).sum();
            let lr: u64 = monthly.iter().map(|r| r.tally.lr_total).sum();
            let neutral: u64 = monthly.iter().map(|r| r.tally.neutral_total).sum();
            prop_assert_eq!(gr, yearly[0].tally.gr_total);
            prop_assert_eq!(lr, yearly[0].tally.lr_total);
            prop_assert_eq!(neutral, yearly[0].tally.neutral_total);
        }
    }

    // --- csv ---

    #[test]
    fn classified_csv_roundtrip() {
        let rules = &ALL_RULES[..3];
        let sells = vec![ClassifiedSell {
            tx_id: "t1".into(),
            timestamp: 1_483_228_800,
            exchange: EntityId::new("E1"),
            signals: vec![Signal::Gain, Signal::Neutral, Signal::Loss],
        }];
        let mut buf = Vec::new();
        write_classified_csv(&sells, rules, &mut buf).unwrap();
        let (back, back_rules) = read_classified_csv(buf.as_slice()).unwrap();
        assert_eq!(back, sells);
        assert_eq!(back_rules, rules);
    }

    #[test]
    fn report_csv_blank_for_undefined() {
        let t = tally_from(&[1], &[2]);
        let test = t_test(&t, TestVariant::Student);
        let rows = vec![ReportRow { tally: t, test }];
        let mut buf = Vec::new();
        write_report_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let line = text.lines().nth(1).unwrap();
        assert!(line.contains(",,,"), "expected blank stats: {line}");
        assert!(line.starts_with("1970-01-01T00:00:00Z,"));
    }
}
