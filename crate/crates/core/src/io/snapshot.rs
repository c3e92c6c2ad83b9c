//! Final-state snapshots stored as embedding tables.
//!
//! Row kinds are distinguished by a label prefix:
//!
//! | rows            | flag | class_index        | label                          |
//! |-----------------|------|--------------------|--------------------------------|
//! | meta            | 2    | absent             | `meta\|queue_len=<L>`          |
//! | positive text   | 2    | class              | `tp\|<label>`                  |
//! | negative text   | 2    | row                | `tn\|<added_at or init>\|<label>` |
//! | positive slots  | 1    | class              | `vp\|<seq>\|<entropy or seed>` |
//! | negative slots  | 0    | negative proxy     | `vn\|<seq>\|<entropy or seed>` |
//!
//! The meta row carries the first basis vector as a placeholder.

use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::io::table::{EmbeddingTable, RecordFlag, TableRecord};
use crate::numeric::Embedding;
use crate::visual::{VisualQueue, SEED_ENTROPY};

fn entropy_text(h: f64) -> String {
    if h == SEED_ENTROPY {
        "seed".into()
    } else {
        h.to_string()
    }
}

fn push_queues(table: &mut EmbeddingTable, queues: &[VisualQueue], flag: RecordFlag, prefix: &str) {
    for (i, q) in queues.iter().enumerate() {
        for slot in q.slots() {
            table.push(
                flag,
                Some(i as u32),
                format!("{prefix}|{}|{}", slot.seq, entropy_text(slot.entropy)),
                &slot.embedding,
            );
        }
    }
}

pub fn snapshot_table(engine: &Engine) -> EmbeddingTable {
    let dim = engine.dim();
    let mut table = EmbeddingTable::new(dim as u32);
    let mut basis = vec![0.0; dim];
    basis[0] = 1.0;
    let basis = Embedding::new(basis).expect("basis vector is a unit vector");
    table.push(
        RecordFlag::Unlabeled,
        None,
        format!("meta|queue_len={}", engine.cache().capacity()),
        &basis,
    );
    for (k, e) in engine.positive().entries().iter().enumerate() {
        table.push(RecordFlag::Unlabeled, Some(k as u32), format!("tp|{}", e.label), &e.embedding);
    }
    let t_n = engine.negative();
    for (m, (e, at)) in t_n.entries().iter().zip(t_n.added_at()).enumerate() {
        let at = at.map_or_else(|| "init".to_string(), |a| a.to_string());
        table.push(
            RecordFlag::Unlabeled,
            Some(m as u32),
            format!("tn|{at}|{}", e.label),
            &e.embedding,
        );
    }
    push_queues(&mut table, engine.cache().positive(), RecordFlag::Id, "vp");
    push_queues(&mut table, engine.cache().negative(), RecordFlag::Ood, "vn");
    table
}

/// One cached slot as recorded in a snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotInfo {
    pub queue: usize,
    pub seq: u64,
    /// `None` for seed slots.
    pub entropy: Option<f64>,
}

/// Queue-level view of a snapshot, without the vectors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CacheSnapshot {
    pub queue_len: usize,
    pub positive_labels: Vec<String>,
    pub negative_labels: Vec<String>,
    /// Sample index that appended each negative; `None` for the initial set.
    pub negative_added_at: Vec<Option<u64>>,
    pub positive_slots: Vec<SlotInfo>,
    pub negative_slots: Vec<SlotInfo>,
}

impl CacheSnapshot {
    pub fn from_table(table: &EmbeddingTable) -> Result<Self> {
        let mut snap = CacheSnapshot::default();
        for (i, r) in table.records.iter().enumerate() {
            parse_row(&mut snap, r).map_err(|message| Error::Record {
                index: i,
                source: Box::new(Error::Format {
                    offset: 0,
                    message,
                }),
            })?;
        }
        Ok(snap)
    }

    /// Number of slots per queue, in queue order.
    pub fn occupancy(slots: &[SlotInfo], queues: usize) -> Vec<usize> {
        let mut counts = vec![0; queues];
        for s in slots {
            if let Some(c) = counts.get_mut(s.queue) {
                *c += 1;
            }
        }
        counts
    }

    /// Entropies of the non-seed slots.
    pub fn entropies(slots: &[SlotInfo]) -> Vec<f64> {
        slots.iter().filter_map(|s| s.entropy).collect()
    }
}

fn parse_row(snap: &mut CacheSnapshot, r: &TableRecord) -> std::result::Result<(), String> {
    let (kind, rest) = r.label.split_once('|').ok_or("label has no kind prefix")?;
    let class = || r.class_index.map(|c| c as usize).ok_or("row needs a class index");
    match kind {
        "meta" => {
            let v = rest.strip_prefix("queue_len=").ok_or("unknown meta row")?;
            snap.queue_len = v.parse().map_err(|e| format!("queue_len: {e}"))?;
        }
        "tp" => snap.positive_labels.push(rest.to_string()),
        "tn" => {
            let (at, label) = rest.split_once('|').ok_or("negative row missing its origin")?;
            let at = match at {
                "init" => None,
                v => Some(v.parse().map_err(|e| format!("origin: {e}"))?),
            };
            snap.negative_added_at.push(at);
            snap.negative_labels.push(label.to_string());
        }
        "vp" | "vn" => {
            let (seq, h) = rest.split_once('|').ok_or("slot row missing its entropy")?;
            let slot = SlotInfo {
                queue: class()?,
                seq: seq.parse().map_err(|e| format!("seq: {e}"))?,
                entropy: match h {
                    "seed" => None,
                    v => Some(v.parse().map_err(|e| format!("entropy: {e}"))?),
                },
            };
            if kind == "vp" {
                snap.positive_slots.push(slot);
            } else {
                snap.negative_slots.push(slot);
            }
        }
        other => return Err(format!("unknown row kind `{other}`")),
    }
    Ok(())
}
