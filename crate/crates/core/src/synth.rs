//! Synthetic chain and market generator with a planted disposition bias.
//!
//! Produces the three ingest artifacts (transaction dump, tag file, OHLC
//! file) plus ground truth, so the whole pipeline can be validated
//! against a known answer. The price path is a geometric random walk
//! sampled into hourly per-exchange bars; each investor entity spans 3-10
//! addresses consolidated by one co-spend at the start (so clustering is
//! exercised), and sells fire with probability `sell_prob_up` in hours
//! whose close rose and `sell_prob_down` otherwise. A sprinkling of
//! CoinJoin-shaped and coinbase transactions exercises the filters.
//!
//! Everything is drawn from one ChaCha8 stream seeded by `seed`: reruns
//! are byte-identical, and distinct seeds are independent. Generation is
//! deliberately single-threaded; run seeds in parallel instead.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::collections::BTreeSet;
use std::io::Write;
use thiserror::Error;

use crate::chain::{Address, RawTransaction, TxId, TxSlot};
use crate::entity::{Category, TagRecord};
use crate::indicators::Signal;
use crate::market::{OhlcBar, HOUR_SECONDS};

/// 2017-01-01T00:00:00Z; with 8760 hours the data covers exactly one year.
pub const SERIES_START: i64 = 1_483_228_800;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_investors: usize,
    pub n_exchanges: usize,
    pub n_hours: usize,
    /// Mean hourly log return.
    pub price_drift: f64,
    /// Hourly log-return standard deviation.
    pub price_vol: f64,
    /// Chance an investor sells in an hour whose close rose.
    pub sell_prob_up: f64,
    /// Chance an investor sells in an hour whose close fell.
    pub sell_prob_down: f64,
    /// Fraction of exchange addresses that get a tag (at least one per
    /// exchange whenever positive).
    pub tag_coverage: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            n_investors: 5,
            n_exchanges: 3,
            n_hours: 2000,
            price_drift: 0.0,
            price_vol: 0.02,
            sell_prob_up: 0.5,
            sell_prob_down: 0.5,
            tag_coverage: 1.0,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SynthError {
    #[error("{0}")]
    InvalidConfig(&'static str),
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_investors < 1 || self.n_exchanges < 1 || self.n_hours < 1 {
            return Err(SynthError::InvalidConfig("n_* parameters must be >= 1"));
        }
        if !(self.price_vol >= 0.0 && self.price_vol.is_finite()) {
            return Err(SynthError::InvalidConfig("price_vol must be >= 0"));
        }
        if !self.price_drift.is_finite() {
            return Err(SynthError::InvalidConfig("price_drift must be finite"));
        }
        for (name, p) in [
            ("sell_prob_up", self.sell_prob_up),
            ("sell_prob_down", self.sell_prob_down),
            ("tag_coverage", self.tag_coverage),
        ] {
            if !(0.0..=1.0).contains(&p) {
                let _ = name;
                return Err(SynthError::InvalidConfig("probabilities must be in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// What the generator planted, for end-to-end verification.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Sign of each hour's close move on the base path.
    pub hour_signals: Vec<Signal>,
    /// Planted label of each sell transaction.
    pub sell_labels: Vec<(TxId, Signal)>,
    pub planted_gr: u64,
    pub planted_lr: u64,
    /// Address sets of the planted investor entities.
    pub investor_entities: Vec<BTreeSet<Address>>,
    /// Address sets of the planted exchange entities.
    pub exchange_entities: Vec<BTreeSet<Address>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub transactions: Vec<RawTransaction>,
    pub tags: Vec<TagRecord>,
    pub bars: Vec<OhlcBar>,
    pub ground_truth: GroundTruth,
}

/// Generate a synthetic dataset. Deterministic in `config.seed`.
pub fn generate(config: &SynthConfig) -> Result<SynthData, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // entity layouts
    let investor_addrs: Vec<Vec<Address>> = (0..config.n_investors)
        .map(|i| {
            let k = rng.gen_range(3..=10);
            (0..k).map(|j| format!("inv{i:04}-a{j:02}")).collect()
        })
        .collect();
    let exchange_addrs: Vec<Vec<Address>> = (0..config.n_exchanges)
        .map(|x| {
            let deposits = rng.gen_range(2..=5);
            let mut addrs = vec![format!("exch{x:02}-hot")];
            addrs.extend((0..deposits).map(|j| format!("exch{x:02}-d{j:02}")));
            addrs
        })
        .collect();

    // base price path and per-exchange bars
    let mut path = Vec::with_capacity(config.n_hours + 1);
    path.push(100.0);
    for t in 0..config.n_hours {
        let z: f64 = rng.sample(StandardNormal);
        path.push(path[t] * (config.price_drift + config.price_vol * z).exp());
    }
    let mut bars = Vec::with_capacity(config.n_hours * config.n_exchanges);
    for t in 0..config.n_hours {
        let hour_start = SERIES_START + t as i64 * HOUR_SECONDS;
        for x in 0..config.n_exchanges {
            let open = path[t] * (1.0 + 0.002 * rng.sample::<f64, _>(StandardNormal));
            let close = path[t + 1] * (1.0 + 0.002 * rng.sample::<f64, _>(StandardNormal));
            let high = open.max(close) * (1.0 + 0.001 * rng.sample::<f64, _>(StandardNormal).abs());
            let low = open.min(close) * (1.0 - 0.001 * rng.sample::<f64, _>(StandardNormal).abs());
            let volume = (6.0 + 0.5 * rng.sample::<f64, _>(StandardNormal)).exp();
            bars.push(OhlcBar {
                hour_start,
                exchange: format!("exchange-{x:02}"),
                open,
                high,
                low,
                close,
                volume,
            });
        }
    }

    let hour_signals: Vec<Signal> = (0..config.n_hours)
        .map(|t| {
            if path[t + 1] > path[t] {
                Signal::Gain
            } else if path[t + 1] < path[t] {
                Signal::Loss
            } else {
                Signal::Neutral
            }
        })
        .collect();

    // consolidation co-spends plant each entity as one cluster
    let mut transactions = Vec::new();
    for (i, addrs) in investor_addrs.iter().enumerate() {
        transactions.push(RawTransaction {
            tx_id: format!("setup-inv{i:04}"),
            timestamp: SERIES_START + (i as i64 % 3599),
            inputs: addrs.iter().map(|a| TxSlot::new(a.clone(), 10_000_000)).collect(),
            outputs: vec![TxSlot::new(
                addrs[0].clone(),
                10_000_000 * addrs.len() as u64,
            )],
        });
    }
    for (x, addrs) in exchange_addrs.iter().enumerate() {
        transactions.push(RawTransaction {
            tx_id: format!("setup-exch{x:02}"),
            timestamp: SERIES_START + 1 + (x as i64 % 3599),
            inputs: addrs.iter().map(|a| TxSlot::new(a.clone(), 10_000_000)).collect(),
            outputs: vec![TxSlot::new(
                addrs[0].clone(),
                10_000_000 * addrs.len() as u64,
            )],
        });
    }

    // hourly traffic
    let mut sell_labels = Vec::new();
    let (mut planted_gr, mut planted_lr) = (0u64, 0u64);
    for (t, &hour_signal) in hour_signals.iter().enumerate() {
        let hour_start = SERIES_START + t as i64 * HOUR_SECONDS;
        if t % 1000 == 500 {
            transactions.push(RawTransaction {
                tx_id: format!("cb{t:06}"),
                timestamp: hour_start + 600,
                inputs: vec![],
                outputs: vec![TxSlot::new(format!("miner-{t:06}"), 6_250_000_000)],
            });
        }
        if t % 500 == 250 {
            let mut outputs: Vec<TxSlot> = (0..3)
                .map(|k| TxSlot::new(format!("cj{t:06}-out{k}"), 5_000_000))
                .collect();
            outputs.push(TxSlot::new(format!("cj{t:06}-chg"), 1_234_567));
            transactions.push(RawTransaction {
                tx_id: format!("cj{t:06}"),
                timestamp: hour_start + 1800,
                inputs: (0..3)
                    .map(|k| TxSlot::new(format!("cj{t:06}-in{k}"), 7_000_000 + k))
                    .collect(),
                outputs,
            });
        }
        let sell_prob = match hour_signal {
            Signal::Gain => config.sell_prob_up,
            _ => config.sell_prob_down,
        };
        for (i, addrs) in investor_addrs.iter().enumerate() {
            if rng.gen::<f64>() >= sell_prob {
                continue;
            }
            let x = rng.gen_range(0..config.n_exchanges);
            let deposits = &exchange_addrs[x][1..];
            let deposit = deposits[rng.gen_range(0..deposits.len())].clone();
            let n_in = rng.gen_range(1..=3.min(addrs.len()));
            let chosen = sample(&mut rng, addrs.len(), n_in);
            let inputs: Vec<TxSlot> = chosen
                .iter()
                .map(|j| TxSlot::new(addrs[j].clone(), rng.gen_range(100_000..10_000_000)))
                .collect();
            let total: u64 = inputs.iter().map(|s| s.value).sum();
            let keep_change = rng.gen::<f64>() < 0.8;
            let outputs = if keep_change {
                let sold = total * 7 / 10;
                let change_addr = addrs[rng.gen_range(0..addrs.len())].clone();
                vec![
                    TxSlot::new(deposit, sold),
                    TxSlot::new(change_addr, total - sold),
                ]
            } else {
                vec![TxSlot::new(deposit, total)]
            };
            let tx_id = format!("s{t:06}-i{i:04}");
            match hour_signal {
                Signal::Gain => planted_gr += 1,
                Signal::Loss => planted_lr += 1,
                Signal::Neutral => {}
            }
            sell_labels.push((tx_id.clone(), hour_signal));
            transactions.push(RawTransaction {
                tx_id,
                timestamp: hour_start + rng.gen_range(0..HOUR_SECONDS),
                inputs,
                outputs,
            });
        }
    }

    // tags over a deterministic subset of each exchange's addresses
    let mut tags = Vec::new();
    for (x, addrs) in exchange_addrs.iter().enumerate() {
        let n_tagged = if config.tag_coverage <= 0.0 {
            0
        } else {
            ((config.tag_coverage * addrs.len() as f64).round() as usize).clamp(1, addrs.len())
        };
        let mut sorted: Vec<&Address> = addrs.iter().collect();
        sorted.sort();
        for addr in sorted.into_iter().take(n_tagged) {
            tags.push(TagRecord {
                address: addr.clone(),
                label: format!("Exchange {x:02}"),
                category: Category::Exchange,
            });
        }
    }

    Ok(SynthData {
        transactions,
        tags,
        bars,
        ground_truth: GroundTruth {
            hour_signals,
            sell_labels,
            planted_gr,
            planted_lr,
            investor_entities: investor_addrs
                .into_iter()
                .map(|v| v.into_iter().collect())
                .collect(),
            exchange_entities: exchange_addrs
                .into_iter()
                .map(|v| v.into_iter().collect())
                .collect(),
        },
    })
}

/// Export the planted sell labels as `tx_id,planted_signal`.
pub fn write_ground_truth_csv<W: Write>(
    truth: &GroundTruth,
    w: W,
) -> Result<(), std::io::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["tx_id", "planted_signal"])
        .map_err(std::io::Error::other)?;
    for (tx_id, signal) in &truth.sell_labels {
        wtr.write_record([tx_id.as_str(), signal.as_str()])
            .map_err(std::io::Error::other)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{self, coinjoin_verdicts};
    use crate::entity::{self, attribute_categories, cluster_addresses};
    use crate::market;

    #[test]
    fn same_seed_is_byte_identical() {
        let config = SynthConfig::default();
        let a = generate(&config).unwrap();
        let b = generate(&config).unwrap();
        assert_eq!(a, b);
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        chain::write_transactions(&a.transactions, &mut buf_a).unwrap();
        chain::write_transactions(&b.transactions, &mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate(&SynthConfig::default()).unwrap();
        let b = generate(&SynthConfig {
            seed: 43,
            ..SynthConfig::default()
        })
        .unwrap();
        assert_ne!(a.transactions, b.transactions);
    }

    #[test]
    fn rejects_bad_probabilities() {
        let bad = SynthConfig {
            sell_prob_up: 1.5,
            ..SynthConfig::default()
        };
        assert!(generate(&bad).is_err());
        let bad = SynthConfig {
            n_exchanges: 0,
            ..SynthConfig::default()
        };
        assert!(generate(&bad).is_err());
    }

    #[test]
    fn generated_files_pass_all_three_ingest_validators() {
        let config = SynthConfig {
            n_hours: 300,
            ..SynthConfig::default()
        };
        let data = generate(&config).unwrap();

        let mut tx_buf = Vec::new();
        chain::write_transactions(&data.transactions, &mut tx_buf).unwrap();
        let (txs, report) = chain::parse_transactions(tx_buf.as_slice()).unwrap();
        assert!(report.is_clean(), "{}", report.render("transactions"));
        assert_eq!(txs.len(), data.transactions.len());

        let mut tag_buf = Vec::new();
        entity::write_tags_csv(&data.tags, &mut tag_buf).unwrap();
        let (tags, report) = entity::load_tags(tag_buf.as_slice()).unwrap();
        assert!(report.is_clean());
        assert_eq!(tags.len(), data.tags.len());

        let mut ohlc_buf = Vec::new();
        market::write_ohlc_csv(&data.bars, &mut ohlc_buf).unwrap();
        let (bars, report) = market::load_ohlc(ohlc_buf.as_slice()).unwrap();
        assert!(report.is_clean(), "{}", report.render("ohlc"));
        assert_eq!(bars.len(), data.bars.len());
        // no gaps: every hour has bars
        let series = market::global_average(&bars, market::AverageMode::Simple);
        assert!(series.gaps().is_empty());
        assert_eq!(series.bars().len(), config.n_hours);
    }

    #[test]
    fn clustering_recovers_planted_partition() {
        let config = SynthConfig {
            n_hours: 400,
            ..SynthConfig::default()
        };
        let data = generate(&config).unwrap();
        let verdicts = coinjoin_verdicts(&data.transactions, 2);
        let partition = cluster_addresses(&data.transactions, &verdicts).unwrap();

        for planted in data
            .ground_truth
            .investor_entities
            .iter()
            .chain(&data.ground_truth.exchange_entities)
        {
            let expected = planted.iter().min().unwrap();
            for addr in planted {
                assert_eq!(
                    partition.entity_of(addr).unwrap().as_str(),
                    expected.as_str(),
                    "address {addr} not in planted entity"
                );
            }
        }
        // coinjoin inputs and outputs stay singletons
        let lambda = partition.entity_addresses();
        for (ent, addrs) in &lambda {
            if ent.as_str().starts_with("cj") {
                assert_eq!(addrs.len(), 1);
            }
        }
        // every exchange entity is attributed Exchange
        let (cats, diag) = attribute_categories(&partition, &data.tags);
        assert_eq!(diag.unknown_address_tags, 0);
        for planted in &data.ground_truth.exchange_entities {
            let ent = partition.entity_of(planted.iter().next().unwrap()).unwrap();
            assert!(cats.is_exchange(ent));
        }
    }

    #[test]
    fn planted_bias_shows_in_ground_truth() {
        // binomial-tail oracle: with p_up 0.6 vs p_down 0.4 over ~2000
        // hours x 5 investors, P(GR <= LR) is far below 1e-2
        let base = SynthConfig {
            sell_prob_up: 0.6,
            sell_prob_down: 0.4,
            ..SynthConfig::default()
        };
        let (i, q) = (base.n_investors as f64, 0.5);
        let (pu, pd) = (base.sell_prob_up, base.sell_prob_down);
        let mean_hour = q * i * pu - (1.0 - q) * i * pd;
        let ex2 = q * (i * pu * (1.0 - pu) + (i * pu) * (i * pu))
            + (1.0 - q) * (i * pd * (1.0 - pd) + (i * pd) * (i * pd));
        let var_hour = ex2 - mean_hour * mean_hour;
        let n = base.n_hours as f64;
        let z = (n * mean_hour) / (n * var_hour).sqrt();
        let tail = crate::stats::two_sided_p(z, 1e6) / 2.0; // ~ normal tail
        assert!(tail < 0.01, "oracle tail {tail} too large for the test to be meaningful");

        for seed in 0..20 {
            let data = generate(&SynthConfig { seed, ..base.clone() }).unwrap();
            assert!(
                data.ground_truth.planted_gr > data.ground_truth.planted_lr,
                "seed {seed}: GR {} <= LR {}",
                data.ground_truth.planted_gr,
                data.ground_truth.planted_lr
            );
        }
    }

    #[test]
    fn ground_truth_csv_lists_sells() {
        let data = generate(&SynthConfig {
            n_hours: 50,
            ..SynthConfig::default()
        })
        .unwrap();
        let mut buf = Vec::new();
        write_ground_truth_csv(&data.ground_truth, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().count(),
            data.ground_truth.sell_labels.len() + 1
        );
        assert!(text.starts_with("tx_id,planted_signal\n"));
    }
}
