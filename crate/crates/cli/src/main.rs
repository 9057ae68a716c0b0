//! `dispo`: disposition-effect analytics pipeline for UTXO chains.
//!
//! Subcommands mirror the pipeline stages; `all` chains them. Every
//! option can come from a `--config` key=value file, with command-line
//! flags taking precedence.

mod config;
mod stages;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

use config::{parse_rules, parse_sample_unit, parse_t_test, Settings, WindowingMode};
use dispo_core::indicators::{ObvMode, TrbMode};

#[derive(Parser)]
#[command(name = "dispo", version, about = "Disposition-effect analytics for UTXO chains")]
struct Cli {
    /// Flat key=value config file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for stage artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct IoOverrides {
    /// Transactions dump (line-delimited JSON).
    #[arg(long)]
    transactions: Option<PathBuf>,

    /// Address tag CSV (`address,label,category`).
    #[arg(long)]
    tags: Option<PathBuf>,

    /// Hourly OHLC CSV (`hour_start,exchange,open,high,low,close,volume`).
    #[arg(long)]
    ohlc: Option<PathBuf>,
}

#[derive(Args, Default)]
struct IndicatorOverrides {
    /// Comma-separated rule ids (default: the whole 18-rule catalogue).
    #[arg(long)]
    rules: Option<String>,

    /// Reset the OBV running total on unchanged closes instead of
    /// carrying it forward.
    #[arg(long)]
    obv_literal: bool,

    /// Use half the channel width (UC-LC)/2 as the TRB middle channel
    /// instead of the midpoint (UC+LC)/2.
    #[arg(long)]
    trb_literal: bool,

    /// Bollinger band width in standard deviations.
    #[arg(long)]
    bb_scale: Option<f64>,

    /// MACD periods as short,long,signal.
    #[arg(long, value_name = "S,L,P")]
    macd: Option<String>,
}

#[derive(Args, Default)]
struct ReportOverrides {
    /// monthly, yearly, full-range, or all.
    #[arg(long)]
    windowing: Option<String>,

    /// t-test sampling unit: hour, day, or entity.
    #[arg(long)]
    sub_bucket: Option<String>,

    /// t-test variant: student or welch.
    #[arg(long)]
    t_test: Option<String>,
}

#[derive(Args, Default)]
struct SynthOverrides {
    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    n_investors: Option<usize>,

    #[arg(long)]
    n_exchanges: Option<usize>,

    #[arg(long)]
    n_hours: Option<usize>,

    /// Mean hourly log return of the price path.
    #[arg(long)]
    price_drift: Option<f64>,

    /// Hourly log-return standard deviation.
    #[arg(long)]
    price_vol: Option<f64>,

    /// Per-investor sell probability in rising hours.
    #[arg(long)]
    sell_prob_up: Option<f64>,

    /// Per-investor sell probability in falling hours.
    #[arg(long)]
    sell_prob_down: Option<f64>,

    /// Fraction of exchange addresses that receive a tag.
    #[arg(long)]
    tag_coverage: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster addresses into entities and attribute tag categories.
    Cluster {
        #[command(flatten)]
        io: IoOverrides,

        /// CoinJoin filter: minimum equal-output multiplicity.
        #[arg(long)]
        coinjoin_min_equal_outputs: Option<u32>,

        /// Write parse reports here instead of stderr.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Extract non-exchange to exchange transfers as sell events.
    ExtractSells {
        #[command(flatten)]
        io: IoOverrides,

        #[arg(long)]
        coinjoin_min_equal_outputs: Option<u32>,
    },
    /// Build the global price series and dump per-rule indicator values.
    Indicators {
        #[command(flatten)]
        io: IoOverrides,

        #[command(flatten)]
        indicators: IndicatorOverrides,
    },
    /// Label each sell under every rule.
    Classify {
        #[command(flatten)]
        io: IoOverrides,

        #[command(flatten)]
        indicators: IndicatorOverrides,
    },
    /// Tally GR/LR and compute windowed t-statistics.
    Report {
        #[command(flatten)]
        report: ReportOverrides,
    },
    /// Generate a synthetic chain, tags, prices, and ground truth.
    Synth {
        #[command(flatten)]
        synth: SynthOverrides,
    },
    /// Run cluster, extract-sells, indicators, classify, and report.
    All {
        #[command(flatten)]
        io: IoOverrides,

        #[command(flatten)]
        indicators: IndicatorOverrides,

        #[command(flatten)]
        report: ReportOverrides,

        #[arg(long)]
        coinjoin_min_equal_outputs: Option<u32>,

        /// Write parse reports here instead of stderr.
        #[arg(long)]
        report_file: Option<PathBuf>,
    },
}

fn apply_io(settings: &mut Settings, io: &IoOverrides) {
    if let Some(p) = &io.transactions {
        settings.transactions = Some(p.clone());
    }
    if let Some(p) = &io.tags {
        settings.tags = Some(p.clone());
    }
    if let Some(p) = &io.ohlc {
        settings.ohlc = Some(p.clone());
    }
}

fn apply_indicators(settings: &mut Settings, ind: &IndicatorOverrides) -> Result<()> {
    if let Some(rules) = &ind.rules {
        settings.rules = parse_rules(rules)?;
    }
    if ind.obv_literal {
        settings.indicators.obv_mode = ObvMode::Reset;
    }
    if ind.trb_literal {
        settings.indicators.trb_mode = TrbMode::HalfRange;
    }
    if let Some(scale) = ind.bb_scale {
        settings.indicators.bb_scale = scale;
    }
    if let Some(macd) = &ind.macd {
        let parts: Vec<&str> = macd.split(',').collect();
        anyhow::ensure!(parts.len() == 3, "--macd takes short,long,signal");
        settings.indicators.macd_short = parts[0].trim().parse()?;
        settings.indicators.macd_long = parts[1].trim().parse()?;
        settings.indicators.macd_signal = parts[2].trim().parse()?;
    }
    Ok(())
}

fn apply_report(settings: &mut Settings, rep: &ReportOverrides) -> Result<()> {
    if let Some(w) = &rep.windowing {
        settings.windowing = w.parse::<WindowingMode>()?;
    }
    if let Some(s) = &rep.sub_bucket {
        settings.sub_bucket = parse_sample_unit(s)?;
    }
    if let Some(t) = &rep.t_test {
        settings.t_test = parse_t_test(t)?;
    }
    Ok(())
}

fn apply_synth(settings: &mut Settings, ov: &SynthOverrides) {
    let s = &mut settings.synth;
    if let Some(v) = ov.seed {
        s.seed = v;
    }
    if let Some(v) = ov.n_investors {
        s.n_investors = v;
    }
    if let Some(v) = ov.n_exchanges {
        s.n_exchanges = v;
    }
    if let Some(v) = ov.n_hours {
        s.n_hours = v;
    }
    if let Some(v) = ov.price_drift {
        s.price_drift = v;
    }
    if let Some(v) = ov.price_vol {
        s.price_vol = v;
    }
    if let Some(v) = ov.sell_prob_up {
        s.sell_prob_up = v;
    }
    if let Some(v) = ov.sell_prob_down {
        s.sell_prob_down = v;
    }
    if let Some(v) = ov.tag_coverage {
        s.tag_coverage = v;
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut settings = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    if let Some(out) = &cli.out {
        settings.out = out.clone();
    }

    match &cli.command {
        Command::Cluster {
            io,
            coinjoin_min_equal_outputs,
            report,
        } => {
            apply_io(&mut settings, io);
            if let Some(v) = coinjoin_min_equal_outputs {
                anyhow::ensure!(*v >= 2, "coinjoin_min_equal_outputs must be >= 2");
                settings.coinjoin_min_equal_outputs = *v;
            }
            stages::run_cluster(&settings, report.as_deref())
        }
        Command::ExtractSells {
            io,
            coinjoin_min_equal_outputs,
        } => {
            apply_io(&mut settings, io);
            if let Some(v) = coinjoin_min_equal_outputs {
                anyhow::ensure!(*v >= 2, "coinjoin_min_equal_outputs must be >= 2");
                settings.coinjoin_min_equal_outputs = *v;
            }
            stages::run_extract_sells(&settings)
        }
        Command::Indicators { io, indicators } => {
            apply_io(&mut settings, io);
            apply_indicators(&mut settings, indicators)?;
            stages::run_indicators(&settings)
        }
        Command::Classify { io, indicators } => {
            apply_io(&mut settings, io);
            apply_indicators(&mut settings, indicators)?;
            stages::run_classify(&settings)
        }
        Command::Report { report } => {
            apply_report(&mut settings, report)?;
            stages::run_report(&settings)
        }
        Command::Synth { synth } => {
            apply_synth(&mut settings, synth);
            stages::run_synth(&settings)
        }
        Command::All {
            io,
            indicators,
            report,
            coinjoin_min_equal_outputs,
            report_file,
        } => {
            apply_io(&mut settings, io);
            apply_indicators(&mut settings, indicators)?;
            apply_report(&mut settings, report)?;
            if let Some(v) = coinjoin_min_equal_outputs {
                anyhow::ensure!(*v >= 2, "coinjoin_min_equal_outputs must be >= 2");
                settings.coinjoin_min_equal_outputs = *v;
            }
            stages::run_all(&settings, report_file.as_deref())
        }
    }
}
