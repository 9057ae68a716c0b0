//! Raw UTXO transaction model, dump parsing, and CoinJoin flagging.
//!
//! The external format is UTF-8 line-delimited JSON, one transaction per
//! line. Values are integer satoshis end to end; no floating point enters
//! the chain data. Coinbase transactions (empty input list) are retained
//! but carry no spender entity, so later stages skip them.

use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::io::{self, BufRead, Write};
use thiserror::Error;

use crate::exec;
use crate::report::ParseReport;

pub type Address = String;
pub type TxId = String;

/// One input or output slot: an address and the satoshis it carries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxSlot {
    pub address: Address,
    pub value: u64,
}

impl TxSlot {
    pub fn new(address: impl Into<Address>, value: u64) -> Self {
        TxSlot {
            address: address.into(),
            value,
        }
    }
}

/// One parsed transaction. Input order and output order follow the dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTransaction {
    pub tx_id: TxId,
    /// UTC unix seconds.
    pub timestamp: i64,
    pub inputs: Vec<TxSlot>,
    pub outputs: Vec<TxSlot>,
}

impl RawTransaction {
    /// Coinbase transactions mint coins and have no inputs. They are never
    /// clustered and never produce sell events.
    pub fn is_coinbase(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn distinct_input_addresses(&self) -> HashSet<&str> {
        self.inputs.iter().map(|s| s.address.as_str()).collect()
    }
}

/// CoinJoin classification for one transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoinJoinVerdict {
    pub tx_id: TxId,
    pub is_coinjoin: bool,
    /// The repeated output value that triggered the verdict.
    pub matched_output_value: Option<u64>,
    /// Multiplicity of the most frequent output value (0 for no outputs).
    pub equal_output_count: u32,
}

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Parse a line-delimited transaction dump.
///
/// Malformed lines (bad JSON, wrong field types, negative values) are
/// reported with their line number in the [`ParseReport`] and skipped;
/// well-formed transactions are returned in file order. A duplicate
/// `tx_id` rejects the later line. An empty stream yields an empty vector.
pub fn parse_transactions<R: BufRead>(
    reader: R,
) -> Result<(Vec<RawTransaction>, ParseReport), ChainError> {
    let mut txs = Vec::new();
    let mut report = ParseReport::default();
    let mut seen: HashSet<TxId> = HashSet::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        report.lines += 1;
        match serde_json::from_str::<RawTransaction>(&line) {
            Ok(tx) => {
                if !seen.insert(tx.tx_id.clone()) {
                    report.reject(lineno, format!("duplicate tx_id {:?}", tx.tx_id));
                } else {
                    report.accepted += 1;
                    txs.push(tx);
                }
            }
            Err(e) => report.reject(lineno, e.to_string()),
        }
    }
    Ok((txs, report))
}

/// Serialize transactions back to the line-delimited dump format.
pub fn write_transactions<W: Write>(txs: &[RawTransaction], mut w: W) -> Result<(), ChainError> {
    for tx in txs {
        serde_json::to_writer(&mut w, tx).map_err(io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Flag a probable CoinJoin: a transaction combining payments from several
/// spenders into uniform-denomination outputs.
///
/// The verdict is positive iff all three hold, where `k` is the
/// multiplicity of the most frequent output value:
///
/// (a) `k >= min_equal_outputs`;
/// (b) the number of distinct input addresses is at least `k`;
/// (c) there are at least as many outputs as inputs.
///
/// Ties for the most frequent value resolve to the smallest value, which
/// keeps the verdict invariant under reordering of the output list.
pub fn detect_coinjoin(tx: &RawTransaction, min_equal_outputs: u32) -> CoinJoinVerdict {
    assert!(min_equal_outputs >= 2, "min_equal_outputs must be >= 2");

    let mut counts: HashMap<u64, u32> = HashMap::new();
    for out in &tx.outputs {
        *counts.entry(out.value).or_insert(0) += 1;
    }
    let (best_value, k) = counts
        .iter()
        .map(|(v, c)| (*v, *c))
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .unwrap_or((0, 0));

    let distinct_inputs = tx.distinct_input_addresses().len() as u32;
    let is_coinjoin =
        k >= min_equal_outputs && distinct_inputs >= k && tx.outputs.len() >= tx.inputs.len();

    CoinJoinVerdict {
        tx_id: tx.tx_id.clone(),
        is_coinjoin,
        matched_output_value: is_coinjoin.then_some(best_value),
        equal_output_count: k,
    }
}

/// Run [`detect_coinjoin`] over a whole dataset, keyed by tx id.
pub fn coinjoin_verdicts(
    txs: &[RawTransaction],
    min_equal_outputs: u32,
) -> HashMap<TxId, CoinJoinVerdict> {
    exec::map_slice(txs, |tx| {
        (tx.tx_id.clone(), detect_coinjoin(tx, min_equal_outputs))
    })
    .into_iter()
    .collect()
}
