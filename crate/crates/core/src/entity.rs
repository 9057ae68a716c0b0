//! Multiple-input clustering, tag attribution, and the entity graph.
//!
//! All input addresses of one (non-CoinJoin, non-coinbase) transaction are
//! assumed controlled by the same actor; the partition is the transitive
//! closure of that relation, i.e. the connected components of the
//! co-spend graph. An entity's id is the lexicographically smallest
//! address it contains, which makes cluster ids independent of processing
//! order and reruns byte-identical.

mod union_find;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use thiserror::Error;

use crate::chain::{Address, CoinJoinVerdict, RawTransaction, TxId};
use crate::exec;
use crate::report::ParseReport;
use union_find::UnionFind;

/// Cluster identifier: the smallest address in the cluster.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(String);

impl EntityId {
    pub fn new(addr: impl Into<String>) -> Self {
        EntityId(addr.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The seven attribution categories. String forms are case-sensitive and
/// match the tag file format exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    Exchange,
    WalletService,
    Miner,
    Marketplace,
    Gambling,
    MixingService,
    Other,
}

pub const ALL_CATEGORIES: [Category; 7] = [
    Category::Exchange,
    Category::WalletService,
    Category::Miner,
    Category::Marketplace,
    Category::Gambling,
    Category::MixingService,
    Category::Other,
];

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Exchange => "Exchange",
            Category::WalletService => "Wallet Service",
            Category::Miner => "Miner",
            Category::Marketplace => "Marketplace",
            Category::Gambling => "Gambling",
            Category::MixingService => "Mixing Service",
            Category::Other => "Other",
        }
    }
}

impl FromStr for Category {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        ALL_CATEGORIES
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or(())
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One attribution tag: a single address, a free-form label, a category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagRecord {
    pub address: Address,
    pub label: String,
    pub category: Category,
}

#[derive(Debug, Error)]
pub enum EntityError {
    #[error("transaction {0} has no CoinJoin verdict")]
    MissingVerdict(TxId),
    #[error("transaction {tx_id} input addresses span multiple entities (clustering is inconsistent)")]
    InputsSpanEntities { tx_id: TxId },
    #[error("transaction {tx_id} references address {address} missing from the partition")]
    UnknownAddress { tx_id: TxId, address: Address },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Format(String),
}

/// Address → entity assignment. Covers every address observed in the
/// dataset; addresses seen only in CoinJoin or coinbase transactions get
/// singleton entities.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Partition {
    map: HashMap<Address, EntityId>,
}

impl Partition {
    pub fn entity_of(&self, address: &str) -> Option<&EntityId> {
        self.map.get(address)
    }

    /// Number of observed addresses.
    pub fn address_count(&self) -> usize {
        self.map.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Address, &EntityId)> {
        self.map.iter()
    }

    /// Entity → address set (the λ map), sorted both ways.
    pub fn entity_addresses(&self) -> BTreeMap<EntityId, BTreeSet<Address>> {
        let mut out: BTreeMap<EntityId, BTreeSet<Address>> = BTreeMap::new();
        for (addr, ent) in &self.map {
            out.entry(ent.clone()).or_default().insert(addr.clone());
        }
        out
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Address, EntityId)>) -> Self {
        Partition {
            map: pairs.into_iter().collect(),
        }
    }

    /// Export as `address,entity_id`, sorted by address.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), EntityError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["address", "entity_id"])?;
        let mut rows: Vec<_> = self.map.iter().collect();
        rows.sort();
        for (addr, ent) in rows {
            wtr.write_record([addr.as_str(), ent.as_str()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, EntityError> {
        let mut rdr = csv::Reader::from_reader(r);
        check_headers(&mut rdr, &["address", "entity_id"])?;
        let mut map = HashMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            map.insert(rec[0].to_string(), EntityId::new(&rec[1]));
        }
        Ok(Partition { map })
    }
}

fn check_headers<R: Read>(rdr: &mut csv::Reader<R>, want: &[&str]) -> Result<(), EntityError> {
    let got = rdr.headers()?;
    if got.iter().ne(want.iter().copied()) {
        return Err(EntityError::Format(format!(
            "expected header {:?}, got {:?}",
            want.join(","),
            got.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

/// Cluster addresses with the multiple-input heuristic.
///
/// Every transaction must have a verdict; CoinJoin and coinbase
/// transactions contribute no co-spend links, but their addresses still
/// receive singleton entities if seen nowhere else. The result is the
/// finest partition merging all input addresses of each included
/// transaction, regardless of transaction order.
pub fn cluster_addresses(
    txs: &[RawTransaction],
    verdicts: &HashMap<TxId, CoinJoinVerdict>,
) -> Result<Partition, EntityError> {
    // Intern addresses in file order.
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut names: Vec<&str> = Vec::new();
    for tx in txs {
        for slot in tx.inputs.iter().chain(tx.outputs.iter()) {
            index.entry(slot.address.as_str()).or_insert_with(|| {
                names.push(slot.address.as_str());
                names.len() - 1
            });
        }
    }

    let mut included: Vec<&RawTransaction> = Vec::with_capacity(txs.len());
    for tx in txs {
        let verdict = verdicts
            .get(&tx.tx_id)
            .ok_or_else(|| EntityError::MissingVerdict(tx.tx_id.clone()))?;
        if !verdict.is_coinjoin && !tx.is_coinbase() {
            included.push(tx);
        }
    }

    // Co-spend links: first input against every other input.
    let links: Vec<Vec<(usize, usize)>> = exec::map_slice(&included, |tx| {
        let mut pairs = Vec::new();
        if let Some(first) = tx.inputs.first() {
            let a = index[first.address.as_str()];
            for slot in &tx.inputs[1..] {
                pairs.push((a, index[slot.address.as_str()]));
            }
        }
        pairs
    });

    let mut uf = UnionFind::new(names.len());
    for pairs in &links {
        for &(a, b) in pairs {
            uf.union(a, b);
        }
    }

    // Entity id = lexicographically smallest address per component.
    let mut smallest: Vec<Option<usize>> = vec![None; names.len()];
    for i in 0..names.len() {
        let root = uf.find(i);
        match smallest[root] {
            Some(cur) if names[cur] <= names[i] => {}
            _ => smallest[root] = Some(i),
        }
    }
    let mut map = HashMap::with_capacity(names.len());
    for i in 0..names.len() {
        let root = uf.find(i);
        let id = names[smallest[root].expect("root has a smallest member")];
        map.insert(names[i].to_string(), EntityId::new(id));
    }
    Ok(Partition { map })
}

/// Per-entity category sets (the σ map). Entities without tags are simply
/// absent; [`EntityCategories::of`] treats absence as the empty set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityCategories {
    map: HashMap<EntityId, BTreeSet<Category>>,
}

impl EntityCategories {
    pub fn of(&self, entity: &EntityId) -> Option<&BTreeSet<Category>> {
        self.map.get(entity)
    }

    pub fn has(&self, entity: &EntityId, category: Category) -> bool {
        self.map.get(entity).is_some_and(|s| s.contains(&category))
    }

    pub fn is_exchange(&self, entity: &EntityId) -> bool {
        self.has(entity, Category::Exchange)
    }

    pub fn insert(&mut self, entity: EntityId, category: Category) {
        self.map.entry(entity).or_default().insert(category);
    }

    /// Export as `entity_id,category`, one row per pair, sorted.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), EntityError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["entity_id", "category"])?;
        let sorted: BTreeMap<_, _> = self.map.iter().collect();
        for (ent, cats) in sorted {
            for cat in cats {
                wtr.write_record([ent.as_str(), cat.as_str()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, EntityError> {
        let mut rdr = csv::Reader::from_reader(r);
        check_headers(&mut rdr, &["entity_id", "category"])?;
        let mut out = EntityCategories::default();
        for rec in rdr.records() {
            let rec = rec?;
            let cat = Category::from_str(&rec[1])
                .map_err(|_| EntityError::Format(format!("unknown category {:?}", &rec[1])))?;
            out.insert(EntityId::new(&rec[0]), cat);
        }
        Ok(out)
    }
}

/// Tag-attribution diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TagDiagnostics {
    /// Tags whose address never appears in the chain data.
    pub unknown_address_tags: u64,
}

/// Union the categories of all tagged addresses inside each entity.
/// A tag for an unobserved address is counted, not an error.
pub fn attribute_categories(
    partition: &Partition,
    tags: &[TagRecord],
) -> (EntityCategories, TagDiagnostics) {
    let mut cats = EntityCategories::default();
    let mut diag = TagDiagnostics::default();
    for tag in tags {
        match partition.entity_of(&tag.address) {
            Some(ent) => cats.insert(ent.clone(), tag.category),
            None => diag.unknown_address_tags += 1,
        }
    }
    (cats, diag)
}

/// Load a tag file: CSV with header `address,label,category`. Rows with
/// an unknown category string are reported per line and skipped.
pub fn load_tags<R: Read>(r: R) -> Result<(Vec<TagRecord>, ParseReport), EntityError> {
    let mut rdr = csv::Reader::from_reader(r);
    check_headers(&mut rdr, &["address", "label", "category"])?;
    let mut tags = Vec::new();
    let mut report = ParseReport::default();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        report.lines += 1;
        if rec.len() != 3 {
            report.reject(line, format!("expected 3 fields, got {}", rec.len()));
            continue;
        }
        match Category::from_str(&rec[2]) {
            Ok(category) => {
                report.accepted += 1;
                tags.push(TagRecord {
                    address: rec[0].to_string(),
                    label: rec[1].to_string(),
                    category,
                });
            }
            Err(()) => report.reject(line, format!("unknown category {:?}", &rec[2])),
        }
    }
    Ok((tags, report))
}

pub fn write_tags_csv<W: Write>(tags: &[TagRecord], w: W) -> Result<(), EntityError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["address", "label", "category"])?;
    for t in tags {
        wtr.write_record([t.address.as_str(), t.label.as_str(), t.category.as_str()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// The entity graph: entities, their address sets and categories, and
/// transaction-labelled edges between them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityGraph {
    entities: BTreeSet<EntityId>,
    addresses: BTreeMap<EntityId, BTreeSet<Address>>,
    categories: EntityCategories,
    edges: BTreeMap<(EntityId, EntityId), BTreeSet<TxId>>,
}

impl EntityGraph {
    pub fn entities(&self) -> &BTreeSet<EntityId> {
        &self.entities
    }

    pub fn addresses_of(&self, entity: &EntityId) -> Option<&BTreeSet<Address>> {
        self.addresses.get(entity)
    }

    pub fn categories(&self) -> &EntityCategories {
        &self.categories
    }

    pub fn is_exchange(&self, entity: &EntityId) -> bool {
        self.categories.is_exchange(entity)
    }

    pub fn edges(&self) -> &BTreeMap<(EntityId, EntityId), BTreeSet<TxId>> {
        &self.edges
    }

    pub fn edge_txs(&self, source: &EntityId, target: &EntityId) -> Option<&BTreeSet<TxId>> {
        self.edges.get(&(source.clone(), target.clone()))
    }
}

/// Assemble the entity graph over the included (non-CoinJoin,
/// non-coinbase) transactions. Each included transaction contributes one
/// edge from its single input entity to each distinct output entity;
/// self-edges (change back to the spender) are recorded like any other.
pub fn build_entity_graph(
    txs: &[RawTransaction],
    verdicts: &HashMap<TxId, CoinJoinVerdict>,
    partition: &Partition,
    categories: EntityCategories,
) -> Result<EntityGraph, EntityError> {
    let mut graph = EntityGraph {
        categories,
        ..Default::default()
    };
    for (_, ent) in partition.iter() {
        graph.entities.insert(ent.clone());
    }
    graph.addresses = partition.entity_addresses();

    for tx in txs {
        let verdict = verdicts
            .get(&tx.tx_id)
            .ok_or_else(|| EntityError::MissingVerdict(tx.tx_id.clone()))?;
        if verdict.is_coinjoin || tx.is_coinbase() {
            continue;
        }
        let lookup = |addr: &str| -> Result<&EntityId, EntityError> {
            partition
                .entity_of(addr)
                .ok_or_else(|| EntityError::UnknownAddress {
                    tx_id: tx.tx_id.clone(),
                    address: addr.to_string(),
                })
        };
        let source = lookup(&tx.inputs[0].address)?;
        for slot in &tx.inputs[1..] {
            if lookup(&slot.address)? != source {
                return Err(EntityError::InputsSpanEntities {
                    tx_id: tx.tx_id.clone(),
                });
            }
        }
        let mut targets: BTreeSet<&EntityId> = BTreeSet::new();
        for out in &tx.outputs {
            targets.insert(lookup(&out.address)?);
        }
        for target in targets {
            graph
                .edges
                .entry((source.clone(), target.clone()))
                .or_default()
                .insert(tx.tx_id.clone());
        }
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{coinjoin_verdicts, TxSlot};
    use proptest::prelude::*;
    use std::collections::VecDeque;

    fn tx(id: &str, inputs: &[&str], outputs: &[&str]) -> RawTransaction {
        RawTransaction {
            tx_id: id.to_string(),
            timestamp: 0,
            inputs: inputs.iter().map(|a| TxSlot::new(*a, 10)).collect(),
            // distinct output values so nothing trips the CoinJoin filter
            outputs: outputs
                .iter()
                .enumerate()
                .map(|(i, a)| TxSlot::new(*a, 5 + i as u64))
                .collect(),
        }
    }

    fn cluster(txs: &[RawTransaction]) -> Partition {
        let verdicts = coinjoin_verdicts(txs, 2);
        cluster_addresses(txs, &verdicts).unwrap()
    }

    // --- clustering ---

    #[test]
    fn shared_input_merges_transitively() {
        let txs = vec![tx("t1", &["A", "B"], &["X"]), tx("t2", &["B", "C"], &["Y"])];
        let p = cluster(&txs);
        let e = p.entity_of("A").unwrap();
        assert_eq!(p.entity_of("B").unwrap(), e);
        assert_eq!(p.entity_of("C").unwrap(), e);
        assert_eq!(e.as_str(), "A");
        assert_ne!(p.entity_of("X").unwrap(), e);
    }

    #[test]
    fn lone_input_is_singleton() {
        let txs = vec![tx("t1", &["D"], &["E"])];
        let p = cluster(&txs);
        assert_eq!(p.entity_of("D").unwrap().as_str(), "D");
        assert_eq!(p.entity_of("E").unwrap().as_str(), "E");
    }

    #[test]
    fn coinjoin_does_not_merge() {
        let mut cj = tx("cj", &["A", "B"], &["X", "Y", "Z"]);
        cj.outputs[0].value = 9;
        cj.outputs[1].value = 9;
        let txs = vec![cj, tx("t2", &["C", "D"], &["W"])];
        let verdicts = coinjoin_verdicts(&txs, 2);
        assert!(verdicts["cj"].is_coinjoin);
        let p = cluster_addresses(&txs, &verdicts).unwrap();
        assert_ne!(p.entity_of("A"), p.entity_of("B"));
        assert_eq!(p.entity_of("C"), p.entity_of("D"));
    }

    #[test]
    fn missing_verdict_names_tx() {
        let txs = vec![tx("t9", &["A"], &["B"])];
        let err = cluster_addresses(&txs, &HashMap::new()).unwrap_err();
        assert!(err.to_string().contains("t9"));
    }

    // --- attribution ---

    #[test]
    fn tag_union_over_cluster() {
        let txs = vec![tx("t1", &["A", "B"], &["X"])];
        let p = cluster(&txs);
        let tags = vec![
            TagRecord {
                address: "A".into(),
                label: "Kraken".into(),
                category: Category::Exchange,
            },
            TagRecord {
                address: "B".into(),
                label: "Kraken hot".into(),
                category: Category::WalletService,
            },
        ];
        let (cats, diag) = attribute_categories(&p, &tags);
        let ent = p.entity_of("A").unwrap();
        let set = cats.of(ent).unwrap();
        assert!(set.contains(&Category::Exchange));
        assert!(set.contains(&Category::WalletService));
        assert_eq!(diag.unknown_address_tags, 0);
    }

    #[test]
    fn unknown_tag_address_is_diagnostic_not_error() {
        let txs = vec![tx("t1", &["A"], &["B"])];
        let p = cluster(&txs);
        let tags = vec![TagRecord {
            address: "nowhere".into(),
            label: "x".into(),
            category: Category::Exchange,
        }];
        let (cats, diag) = attribute_categories(&p, &tags);
        assert_eq!(diag.unknown_address_tags, 1);
        assert!(cats.of(p.entity_of("A").unwrap()).is_none());
    }

    #[test]
    fn no_tags_means_empty_sets() {
        let txs = vec![tx("t1", &["A", "B"], &["X"])];
        let p = cluster(&txs);
        let (cats, _) = attribute_categories(&p, &[]);
        for (_, ent) in p.iter() {
            assert!(cats.of(ent).is_none());
        }
    }

    // --- graph ---

    #[test]
    fn one_tx_two_output_entities_two_edges() {
        let txs = vec![
            tx("t1", &["a1", "a2"], &["b1", "c1"]),
            tx("t2", &["b1"], &["b2"]), // keeps b1 its own entity
        ];
        let verdicts = coinjoin_verdicts(&txs, 2);
        let p = cluster_addresses(&txs, &verdicts).unwrap();
        let g = build_entity_graph(&txs, &verdicts, &p, EntityCategories::default()).unwrap();
        let n1 = p.entity_of("a1").unwrap();
        let n2 = p.entity_of("b1").unwrap();
        let n3 = p.entity_of("c1").unwrap();
        assert!(g.edge_txs(n1, n2).unwrap().contains("t1"));
        assert!(g.edge_txs(n1, n3).unwrap().contains("t1"));
    }

    #[test]
    fn change_to_self_is_a_self_edge() {
        let txs = vec![tx("t1", &["A", "B"], &["A", "X"])];
        let verdicts = coinjoin_verdicts(&txs, 2);
        let p = cluster_addresses(&txs, &verdicts).unwrap();
        let g = build_entity_graph(&txs, &verdicts, &p, EntityCategories::default()).unwrap();
        let n1 = p.entity_of("A").unwrap();
        assert!(g.edge_txs(n1, n1).unwrap().contains("t1"));
    }

    #[test]
    fn inputs_spanning_entities_is_a_consistency_error() {
        // hand-built partition that contradicts the tx's co-spend
        let txs = vec![tx("t1", &["A", "B"], &["X"])];
        let verdicts = coinjoin_verdicts(&txs, 2);
        let bogus = Partition::from_pairs([
            ("A".to_string(), EntityId::new("A")),
            ("B".to_string(), EntityId::new("B")),
            ("X".to_string(), EntityId::new("X")),
        ]);
        let err =
            build_entity_graph(&txs, &verdicts, &bogus, EntityCategories::default()).unwrap_err();
        assert!(matches!(err, EntityError::InputsSpanEntities { .. }));
    }

    #[test]
    fn empty_tx_list_yields_entities_no_edges() {
        let p = Partition::from_pairs([
            ("A".to_string(), EntityId::new("A")),
            ("B".to_string(), EntityId::new("B")),
        ]);
        let g = build_entity_graph(&[], &HashMap::new(), &p, EntityCategories::default()).unwrap();
        assert_eq!(g.entities().len(), 2);
        assert!(g.edges().is_empty());
    }

    // --- csv round trips ---

    #[test]
    fn partition_csv_roundtrip() {
        let p = Partition::from_pairs([
            ("addr2".to_string(), EntityId::new("addr1")),
            ("addr1".to_string(), EntityId::new("addr1")),
        ]);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let back = Partition::read_csv(buf.as_slice()).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn tags_csv_rejects_unknown_category() {
        let data = "address,label,category\nA,x,Exchange\nB,y,exchange\n";
        let (tags, report) = load_tags(data.as_bytes()).unwrap();
        assert_eq!(tags.len(), 1);
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].line, 3);
    }

    // --- oracle: brute-force connected components over the co-spend graph ---

    fn bfs_components(txs: &[RawTransaction]) -> HashMap<String, String> {
        let mut adj: HashMap<&str, Vec<&str>> = HashMap::new();
        let mut nodes: BTreeSet<&str> = BTreeSet::new();
        for t in txs {
            for s in t.inputs.iter().chain(t.outputs.iter()) {
                nodes.insert(s.address.as_str());
            }
            for w in t.inputs.windows(2) {
                adj.entry(w[0].address.as_str())
                    .or_default()
                    .push(w[1].address.as_str());
                adj.entry(w[1].address.as_str())
                    .or_default()
                    .push(w[0].address.as_str());
            }
        }
        let mut out = HashMap::new();
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        for &start in &nodes {
            if seen.contains(start) {
                continue;
            }
            let mut comp = vec![];
            let mut queue = VecDeque::from([start]);
            seen.insert(start);
            while let Some(n) = queue.pop_front() {
                comp.push(n);
                for &m in adj.get(n).into_iter().flatten() {
                    if seen.insert(m) {
                        queue.push_back(m);
                    }
                }
            }
            let id = comp.iter().min().unwrap().to_string();
            for n in comp {
                out.insert(n.to_string(), id.clone());
            }
        }
        out
    }

    proptest! {
        #[test]
        fn matches_bfs_components(
            raw in prop::collection::vec(
                prop::collection::vec(0u32..40, 1..4),
                1..60,
            ),
        ) {
            let txs: Vec<RawTransaction> = raw
                .iter()
                .enumerate()
                .map(|(i, ins)| RawTransaction {
                    tx_id: format!("t{i}"),
                    timestamp: 0,
                    inputs: ins.iter().map(|a| TxSlot::new(format!("a{a:03}"), 1)).collect(),
                    outputs: vec![TxSlot::new(format!("o{i:03}"), 1)],
                })
                .collect();
            let p = cluster(&txs);
            let oracle = bfs_components(&txs);
            prop_assert_eq!(p.address_count(), oracle.len());
            for (addr, id) in &oracle {
                prop_assert_eq!(p.entity_of(addr).unwrap().as_str(), id.as_str());
            }
        }

        #[test]
        fn partition_is_order_independent(
            raw in prop::collection::vec(prop::collection::vec(0u32..25, 1..4), 1..30),
            rot in 0usize..30,
        ) {
            let txs: Vec<RawTransaction> = raw
                .iter()
                .enumerate()
                .map(|(i, ins)| RawTransaction {
                    tx_id: format!("t{i}"),
                    timestamp: 0,
                    inputs: ins.iter().map(|a| TxSlot::new(format!("a{a:03}"), 1)).collect(),
                    outputs: vec![],
                })
                .collect();
            let mut shuffled = txs.clone();
            shuffled.rotate_left(rot % txs.len());
            prop_assert_eq!(cluster(&txs), cluster(&shuffled));
        }

        #[test]
        fn every_address_in_exactly_one_entity(
            raw in prop::collection::vec(prop::collection::vec(0u32..30, 1..5), 1..40),
        ) {
            let txs: Vec<RawTransaction> = raw
                .iter()
                .enumerate()
                .map(|(i, ins)| RawTransaction {
                    tx_id: format!("t{i}"),
                    timestamp: 0,
                    inputs: ins.iter().map(|a| TxSlot::new(format!("a{a:03}"), 1)).collect(),
                    outputs: vec![],
                })
                .collect();
            let p = cluster(&txs);
            let lambda = p.entity_addresses();
            let total: usize = lambda.values().map(|s| s.len()).sum();
            prop_assert_eq!(total, p.address_count());
            // entity id is a member of its own address set
            for (ent, addrs) in &lambda {
                prop_assert!(addrs.contains(ent.as_str()));
                prop_assert_eq!(addrs.iter().min().unwrap().as_str(), ent.as_str());
            }
        }

        #[test]
        fn attribution_is_monotone(
            n_tags in 1usize..12,
        ) {
            let txs = vec![
                tx("t1", &["a0", "a1"], &[]),
                tx("t2", &["a2"], &[]),
                tx("t3", &["a3", "a4"], &[]),
            ];
            let p = cluster(&txs);
            let tags: Vec<TagRecord> = (0..n_tags)
                .map(|i| TagRecord {
                    address: format!("a{}", i % 5),
                    label: format!("l{i}"),
                    category: ALL_CATEGORIES[i % 7],
                })
                .collect();
            let (before, _) = attribute_categories(&p, &tags[..n_tags - 1]);
            let (after, _) = attribute_categories(&p, &tags);
            for (_, ent) in p.iter() {
                if let Some(set) = before.of(ent) {
                    for c in set {
                        prop_assert!(after.has(ent, *c));
                    }
                }
            }
        }
    }
}
