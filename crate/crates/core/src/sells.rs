//! Sell transaction extraction: transfers from non-exchange entities to
//! exchange entities, the on-chain proxy for a sell order.
//!
//! Exchange-to-exchange flows are excluded, as are flows that never reach
//! an exchange. A transaction paying several exchange entities yields one
//! event per receiving exchange; the value is what that exchange's
//! addresses received in that transaction. Values are recorded for volume
//! reporting but play no role in GR/LR counting.

use std::collections::HashMap;
use std::io::{Read, Write};
use thiserror::Error;

use crate::chain::{RawTransaction, TxId};
use crate::entity::{EntityGraph, EntityId};

/// One identified sell: `source_entity` (non-exchange) sent `value`
/// satoshis to `target_exchange` in transaction `tx_id`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SellEvent {
    pub tx_id: TxId,
    /// UTC unix seconds of the carrying transaction.
    pub timestamp: i64,
    pub source_entity: EntityId,
    pub target_exchange: EntityId,
    pub value: u64,
}

#[derive(Debug, Error)]
pub enum SellError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Format(String),
}

/// Extract sell events from the entity graph.
///
/// Events are ordered by (timestamp, tx_id, target_exchange) so the
/// result is identical however the graph or transaction map were built.
pub fn extract_sells(
    graph: &EntityGraph,
    txs: &HashMap<TxId, RawTransaction>,
) -> Vec<SellEvent> {
    let mut events = Vec::new();
    for ((source, target), edge_txs) in graph.edges() {
        if graph.is_exchange(source) || !graph.is_exchange(target) {
            continue;
        }
        let target_addrs = graph
            .addresses_of(target)
            .expect("edge target exists in graph");
        for tx_id in edge_txs {
            let tx = &txs[tx_id];
            let value: u64 = tx
                .outputs
                .iter()
                .filter(|o| target_addrs.contains(o.address.as_str()))
                .map(|o| o.value)
                .sum();
            if value > 0 {
                events.push(SellEvent {
                    tx_id: tx_id.clone(),
                    timestamp: tx.timestamp,
                    source_entity: source.clone(),
                    target_exchange: target.clone(),
                    value,
                });
            }
        }
    }
    events.sort_by(|a, b| {
        (a.timestamp, &a.tx_id, &a.target_exchange).cmp(&(b.timestamp, &b.tx_id, &b.target_exchange))
    });
    events
}

/// Export as `tx_id,timestamp,source_entity,target_exchange,value_satoshi`.
pub fn write_sells_csv<W: Write>(events: &[SellEvent], w: W) -> Result<(), SellError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "tx_id",
        "timestamp",
        "source_entity",
        "target_exchange",
        "value_satoshi",
    ])?;
    for e in events {
        wtr.write_record([
            e.tx_id.as_str(),
            &e.timestamp.to_string(),
            e.source_entity.as_str(),
            e.target_exchange.as_str(),
            &e.value.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Monthly sell volume: `month,tx_count,value_satoshi`. The value column
/// never enters GR/LR counting; this export exists for volume-over-time
/// plots.
pub fn write_monthly_volume_csv<W: Write>(events: &[SellEvent], w: W) -> Result<(), SellError> {
    use chrono::{TimeZone, Utc};
    let mut months: std::collections::BTreeMap<String, (u64, u64)> = Default::default();
    for e in events {
        let month = Utc
            .timestamp_opt(e.timestamp, 0)
            .unwrap()
            .format("%Y-%m")
            .to_string();
        let cell = months.entry(month).or_insert((0, 0));
        cell.0 += 1;
        cell.1 += e.value;
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["month", "tx_count", "value_satoshi"])?;
    for (month, (count, value)) in months {
        wtr.write_record([month, count.to_string(), value.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_sells_csv<R: Read>(r: R) -> Result<Vec<SellEvent>, SellError> {
    let mut rdr = csv::Reader::from_reader(r);
    let want = ["tx_id", "timestamp", "source_entity", "target_exchange", "value_satoshi"];
    if rdr.headers()?.iter().ne(want) {
        return Err(SellError::Format(format!(
            "expected header {:?}",
            want.join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |what: &str, s: &str| {
            SellError::Format(format!("line {line}: bad {what} {s:?}"))
        };
        out.push(SellEvent {
            tx_id: rec[0].to_string(),
            timestamp: rec[1].parse().map_err(|_| bad("timestamp", &rec[1]))?,
            source_entity: EntityId::new(&rec[2]),
            target_exchange: EntityId::new(&rec[3]),
            value: rec[4].parse().map_err(|_| bad("value", &rec[4]))?,
        });
    }
    Ok(out)
}
