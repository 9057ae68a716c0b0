//! Pipeline stages. Each stage reads its declared inputs, writes its CSV
//! artifacts into the output directory, and prints diagnostics to stderr.
//! Artifacts are written to a temporary name and renamed on success, so a
//! failed stage never leaves a partial output behind.

use anyhow::{bail, Context, Result};
use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use dispo_core::chain::{self, RawTransaction, TxId};
use dispo_core::entity::{self, EntityCategories, Partition};
use dispo_core::indicators::{compute_signal_table, SignalTable};
use dispo_core::market::{self, AverageMode, GlobalBarSeries};
use dispo_core::report::ParseReport;
use dispo_core::sells;
use dispo_core::stats;
use dispo_core::synth;

use crate::config::Settings;

pub const PARTITION_FILE: &str = "partition.csv";
pub const CATEGORIES_FILE: &str = "entity_categories.csv";
pub const SELLS_FILE: &str = "sells.csv";
pub const MONTHLY_VOLUME_FILE: &str = "monthly_volume.csv";
pub const GLOBAL_SERIES_FILE: &str = "global_series.csv";
pub const INDICATOR_DUMP_FILE: &str = "indicator_dump.csv";
pub const CLASSIFIED_FILE: &str = "classified.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const MONTHLY_PLOT_FILE: &str = "monthly_tstats.csv";
pub const TRANSACTIONS_FILE: &str = "transactions.jsonl";
pub const TAGS_FILE: &str = "tags.csv";
pub const OHLC_FILE: &str = "ohlc.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

/// Write through a temp file and rename into place on success.
pub fn write_atomic(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let file = File::create(&tmp)
        .with_context(|| format!("cannot create output file {}", tmp.display()))?;
    let mut writer = BufWriter::new(file);
    write(&mut writer)?;
    writer.flush()?;
    drop(writer);
    fs::rename(&tmp, path)
        .with_context(|| format!("cannot move output into place at {}", path.display()))?;
    Ok(())
}

fn open_input(path: &Path, hint: &str) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| {
        format!(
            "missing input file {} ({hint})",
            path.display()
        )
    })?;
    Ok(BufReader::new(file))
}

fn require<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    path.as_deref()
        .with_context(|| format!("no {key} path given (set `{key}` in the config or pass --{key})"))
}

/// Where parse summaries go: stderr by default, or collected into one
/// file written at the end of the stage.
pub enum ReportSink {
    Stderr,
    File(PathBuf, String),
}

impl ReportSink {
    pub fn new(path: Option<&Path>) -> Self {
        match path {
            Some(p) => ReportSink::File(p.to_path_buf(), String::new()),
            None => ReportSink::Stderr,
        }
    }

    fn emit(&mut self, report: &ParseReport, source: &str) {
        let text = report.render(source);
        match self {
            ReportSink::Stderr => eprint!("{text}"),
            ReportSink::File(_, buf) => buf.push_str(&text),
        }
    }

    fn finish(self) -> Result<()> {
        if let ReportSink::File(path, buf) = self {
            fs::write(&path, buf)
                .with_context(|| format!("cannot write parse report to {}", path.display()))?;
        }
        Ok(())
    }
}

fn load_transactions(settings: &Settings, sink: &mut ReportSink) -> Result<Vec<RawTransaction>> {
    let path = require(&settings.transactions, "transactions")?;
    let reader = open_input(path, "a line-delimited transaction dump")?;
    let (txs, report) = chain::parse_transactions(reader)?;
    sink.emit(&report, &path.display().to_string());
    Ok(txs)
}

fn load_series(settings: &Settings) -> Result<GlobalBarSeries> {
    let path = require(&settings.ohlc, "ohlc")?;
    let reader = open_input(path, "hourly OHLC bars, run `dispo synth` for a sample")?;
    let (bars, report) = market::load_ohlc(reader)?;
    ReportSink::Stderr.emit(&report, &path.display().to_string());
    if bars.is_empty() {
        bail!("no valid OHLC bars in {}", path.display());
    }
    Ok(market::global_average(&bars, AverageMode::Simple))
}

fn signal_table(settings: &Settings, series: &GlobalBarSeries) -> Result<SignalTable> {
    compute_signal_table(series, &settings.rules, &settings.indicators)
        .context("indicator configuration rejected")
}

pub fn run_cluster(settings: &Settings, report_path: Option<&Path>) -> Result<()> {
    let mut sink = ReportSink::new(report_path);
    let txs = load_transactions(settings, &mut sink)?;
    let tags_path = require(&settings.tags, "tags")?;
    let (tags, tag_report) = entity::load_tags(open_input(tags_path, "address tag CSV")?)?;
    sink.emit(&tag_report, &tags_path.display().to_string());
    sink.finish()?;

    let verdicts = chain::coinjoin_verdicts(&txs, settings.coinjoin_min_equal_outputs);
    let n_coinjoin = verdicts.values().filter(|v| v.is_coinjoin).count();
    let partition = entity::cluster_addresses(&txs, &verdicts)?;
    let (categories, diag) = entity::attribute_categories(&partition, &tags);

    fs::create_dir_all(&settings.out)?;
    write_atomic(&settings.out.join(PARTITION_FILE), |w| {
        partition.write_csv(w).map_err(Into::into)
    })?;
    write_atomic(&settings.out.join(CATEGORIES_FILE), |w| {
        categories.write_csv(w).map_err(Into::into)
    })?;
    eprintln!(
        "cluster: {} transactions ({} coinjoin filtered), {} addresses, {} unknown tag addresses",
        txs.len(),
        n_coinjoin,
        partition.address_count(),
        diag.unknown_address_tags,
    );
    Ok(())
}

pub fn run_extract_sells(settings: &Settings) -> Result<()> {
    let mut sink = ReportSink::Stderr;
    let txs = load_transactions(settings, &mut sink)?;
    let partition_path = settings.out.join(PARTITION_FILE);
    let categories_path = settings.out.join(CATEGORIES_FILE);
    let partition = Partition::read_csv(open_input(
        &partition_path,
        "run `dispo cluster` first",
    )?)?;
    let categories = EntityCategories::read_csv(open_input(
        &categories_path,
        "run `dispo cluster` first",
    )?)?;

    let verdicts = chain::coinjoin_verdicts(&txs, settings.coinjoin_min_equal_outputs);
    let graph = entity::build_entity_graph(&txs, &verdicts, &partition, categories)?;
    let tx_map: HashMap<TxId, RawTransaction> =
        txs.into_iter().map(|t| (t.tx_id.clone(), t)).collect();
    let events = sells::extract_sells(&graph, &tx_map);

    write_atomic(&settings.out.join(SELLS_FILE), |w| {
        sells::write_sells_csv(&events, w).map_err(Into::into)
    })?;
    write_atomic(&settings.out.join(MONTHLY_VOLUME_FILE), |w| {
        sells::write_monthly_volume_csv(&events, w).map_err(Into::into)
    })?;
    eprintln!("extract-sells: {} sell events", events.len());
    Ok(())
}

pub fn run_indicators(settings: &Settings) -> Result<()> {
    let series = load_series(settings)?;
    let table = signal_table(settings, &series)?;

    fs::create_dir_all(&settings.out)?;
    write_atomic(&settings.out.join(GLOBAL_SERIES_FILE), |w| {
        series.write_csv(w).map_err(Into::into)
    })?;
    write_atomic(&settings.out.join(INDICATOR_DUMP_FILE), |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["hour_start", "rule_id", "value_1", "value_2", "value_3", "signal"])?;
        let fmt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        for (bar_idx, bar) in series.bars().iter().enumerate() {
            for (rule_idx, rule) in table.rules().iter().enumerate() {
                let values = table.values_at(rule_idx, bar_idx);
                wtr.write_record([
                    bar.hour_start.to_string(),
                    rule.name().to_string(),
                    fmt(values.v1),
                    fmt(values.v2),
                    fmt(values.v3),
                    table.signal_at(rule_idx, bar_idx).as_str().to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    })?;
    eprintln!(
        "indicators: {} bars, {} gap hours, {} rules",
        series.bars().len(),
        series.gaps().len(),
        table.rules().len()
    );
    Ok(())
}

pub fn run_classify(settings: &Settings) -> Result<()> {
    let sells_path = settings.out.join(SELLS_FILE);
    let events = sells::read_sells_csv(open_input(&sells_path, "run `dispo extract-sells` first")?)?;
    let series = load_series(settings)?;
    let table = signal_table(settings, &series)?;
    let (classified, diag) = stats::classify_sells(&events, &series, &table);

    write_atomic(&settings.out.join(CLASSIFIED_FILE), |w| {
        stats::write_classified_csv(&classified, &settings.rules, w).map_err(Into::into)
    })?;
    eprintln!(
        "classify: {} sells, {} in price gaps (neutral)",
        classified.len(),
        diag.gap_sells
    );
    Ok(())
}

pub fn run_report(settings: &Settings) -> Result<()> {
    let classified_path = settings.out.join(CLASSIFIED_FILE);
    let (classified, rules) = stats::read_classified_csv(open_input(
        &classified_path,
        "run `dispo classify` first",
    )?)?;

    let mut rows = Vec::new();
    let mut monthly_rows = Vec::new();
    for windowing in settings.windowing.windowings() {
        let batch = stats::windowed_report(
            &classified,
            &rules,
            windowing,
            settings.sub_bucket,
            settings.t_test,
        );
        if windowing == stats::Windowing::Monthly {
            monthly_rows = batch.clone();
        }
        rows.extend(batch);
    }

    write_atomic(&settings.out.join(REPORT_FILE), |w| {
        stats::write_report_csv(&rows, w).map_err(Into::into)
    })?;
    if settings.windowing.includes_monthly() {
        write_atomic(&settings.out.join(MONTHLY_PLOT_FILE), |w| {
            stats::write_monthly_plot_csv(&monthly_rows, w).map_err(Into::into)
        })?;
    }
    eprintln!("report: {} rows over {} rules", rows.len(), rules.len());
    Ok(())
}

pub fn run_synth(settings: &Settings) -> Result<()> {
    let data = synth::generate(&settings.synth)?;
    fs::create_dir_all(&settings.out)?;
    write_atomic(&settings.out.join(TRANSACTIONS_FILE), |w| {
        chain::write_transactions(&data.transactions, w).map_err(Into::into)
    })?;
    write_atomic(&settings.out.join(TAGS_FILE), |w| {
        entity::write_tags_csv(&data.tags, w).map_err(Into::into)
    })?;
    write_atomic(&settings.out.join(OHLC_FILE), |w| {
        market::write_ohlc_csv(&data.bars, w).map_err(Into::into)
    })?;
    write_atomic(&settings.out.join(GROUND_TRUTH_FILE), |w| {
        synth::write_ground_truth_csv(&data.ground_truth, w).map_err(Into::into)
    })?;
    eprintln!(
        "synth: {} transactions ({} sells, planted GR {} / LR {}), {} bars",
        data.transactions.len(),
        data.ground_truth.sell_labels.len(),
        data.ground_truth.planted_gr,
        data.ground_truth.planted_lr,
        data.bars.len()
    );
    Ok(())
}

pub fn run_all(settings: &Settings, report_path: Option<&Path>) -> Result<()> {
    run_cluster(settings, report_path)?;
    run_extract_sells(settings)?;
    run_indicators(settings)?;
    run_classify(settings)?;
    run_report(settings)?;
    Ok(())
}
