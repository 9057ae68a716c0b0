//! Flat key=value configuration with command-line overrides.
//!
//! One config file records a whole reproducible run; every key can also
//! be set (and then wins) as a flag on the relevant subcommand. Unknown
//! keys are rejected.

use anyhow::{bail, Context, Result};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dispo_core::indicators::{IndicatorOptions, ObvMode, RuleId, TrbMode};
use dispo_core::stats::{SampleUnit, TestVariant, Windowing};
use dispo_core::synth::SynthConfig;

/// Which calendar windowings the report stage emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowingMode {
    Monthly,
    Yearly,
    FullRange,
    /// Full-range, yearly, and monthly rows in one report.
    #[default]
    All,
}

impl WindowingMode {
    pub fn windowings(self) -> Vec<Windowing> {
        match self {
            WindowingMode::Monthly => vec![Windowing::Monthly],
            WindowingMode::Yearly => vec![Windowing::Yearly],
            WindowingMode::FullRange => vec![Windowing::FullRange],
            WindowingMode::All => {
                vec![Windowing::FullRange, Windowing::Yearly, Windowing::Monthly]
            }
        }
    }

    pub fn includes_monthly(self) -> bool {
        matches!(self, WindowingMode::Monthly | WindowingMode::All)
    }
}

impl FromStr for WindowingMode {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "monthly" => Ok(WindowingMode::Monthly),
            "yearly" => Ok(WindowingMode::Yearly),
            "full-range" => Ok(WindowingMode::FullRange),
            "all" => Ok(WindowingMode::All),
            _ => bail!("windowing must be monthly, yearly, full-range, or all (got {s:?})"),
        }
    }
}

pub fn parse_sample_unit(s: &str) -> Result<SampleUnit> {
    match s {
        "hour" => Ok(SampleUnit::Hour),
        "day" => Ok(SampleUnit::Day),
        "entity" => Ok(SampleUnit::EntityTotal),
        _ => bail!("sub_bucket must be hour, day, or entity (got {s:?})"),
    }
}

pub fn parse_t_test(s: &str) -> Result<TestVariant> {
    match s {
        "student" => Ok(TestVariant::Student),
        "welch" => Ok(TestVariant::Welch),
        _ => bail!("t_test must be student or welch (got {s:?})"),
    }
}

pub fn parse_rules(s: &str) -> Result<Vec<RuleId>> {
    s.split(',')
        .map(|part| {
            let part = part.trim();
            RuleId::from_str(part).map_err(|e| anyhow::anyhow!("{e}"))
        })
        .collect()
}

/// Everything a run needs. Paths stay optional until the subcommand that
/// requires them.
#[derive(Debug, Clone)]
pub struct Settings {
    pub transactions: Option<PathBuf>,
    pub tags: Option<PathBuf>,
    pub ohlc: Option<PathBuf>,
    pub out: PathBuf,
    pub rules: Vec<RuleId>,
    pub windowing: WindowingMode,
    pub sub_bucket: SampleUnit,
    pub t_test: TestVariant,
    pub coinjoin_min_equal_outputs: u32,
    pub indicators: IndicatorOptions,
    pub synth: SynthConfig,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            transactions: None,
            tags: None,
            ohlc: None,
            out: PathBuf::from("out"),
            rules: dispo_core::indicators::ALL_RULES.to_vec(),
            windowing: WindowingMode::default(),
            sub_bucket: SampleUnit::default(),
            t_test: TestVariant::default(),
            coinjoin_min_equal_outputs: 2,
            indicators: IndicatorOptions::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl Settings {
    /// Apply one config-file entry. Unknown keys are errors.
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            value
                .parse()
                .map_err(|e| anyhow::anyhow!("bad value for {key}: {e}"))
        }
        match key {
            "transactions" => self.transactions = Some(PathBuf::from(value)),
            "tags" => self.tags = Some(PathBuf::from(value)),
            "ohlc" => self.ohlc = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            "rules" => self.rules = parse_rules(value)?,
            "windowing" => self.windowing = value.parse()?,
            "sub_bucket" => self.sub_bucket = parse_sample_unit(value)?,
            "t_test" => self.t_test = parse_t_test(value)?,
            "coinjoin_min_equal_outputs" => {
                self.coinjoin_min_equal_outputs = num(key, value)?;
                if self.coinjoin_min_equal_outputs < 2 {
                    bail!("coinjoin_min_equal_outputs must be >= 2");
                }
            }
            "obv_literal" => {
                self.indicators.obv_mode = if num::<bool>(key, value)? {
                    ObvMode::Reset
                } else {
                    ObvMode::Carry
                }
            }
            "trb_literal" => {
                self.indicators.trb_mode = if num::<bool>(key, value)? {
                    TrbMode::HalfRange
                } else {
                    TrbMode::Midpoint
                }
            }
            "bb_scale" => self.indicators.bb_scale = num(key, value)?,
            "macd_short" => self.indicators.macd_short = num(key, value)?,
            "macd_long" => self.indicators.macd_long = num(key, value)?,
            "macd_signal" => self.indicators.macd_signal = num(key, value)?,
            "seed" => self.synth.seed = num(key, value)?,
            "n_investors" => self.synth.n_investors = num(key, value)?,
            "n_exchanges" => self.synth.n_exchanges = num(key, value)?,
            "n_hours" => self.synth.n_hours = num(key, value)?,
            "price_drift" => self.synth.price_drift = num(key, value)?,
            "price_vol" => self.synth.price_vol = num(key, value)?,
            "sell_prob_up" => self.synth.sell_prob_up = num(key, value)?,
            "sell_prob_down" => self.synth.sell_prob_down = num(key, value)?,
            "tag_coverage" => self.synth.tag_coverage = num(key, value)?,
            _ => bail!("unknown config key {key:?}"),
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut settings = Settings::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("{}:{}: expected key=value", path.display(), idx + 1))?;
            settings
                .set(key.trim(), value.trim())
                .with_context(|| format!("{}:{}", path.display(), idx + 1))?;
        }
        Ok(settings)
    }
}
