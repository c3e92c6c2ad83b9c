//! Visual proxy cache.
//!
//! Every ID class and every negative text proxy owns a small queue of cached
//! test embeddings. A queue is scored through an attention-weighted average of
//! its populated slots, so a queue holding only its text seed behaves exactly
//! like the text row it was seeded from.

use crate::error::{Error, Result};
use crate::numeric::{
    attention_weights, cosine, cosine_to_vector, entropy, group_ratio_score, softmax, Embedding,
    Score,
};
use crate::textual::{argmax, LabeledEmbedding, NegativeTextQueue, PositiveTextQueue};

/// Confidence carried by a seed slot. Compares above every finite entropy, so
/// seeds are the first slots displaced once a queue fills.
pub const SEED_ENTROPY: f64 = f64::INFINITY;

#[derive(Clone, Debug, PartialEq)]
pub struct VisualSlot {
    pub embedding: Embedding,
    /// Entropy of the assignment that admitted this slot, or [`SEED_ENTROPY`].
    pub entropy: f64,
    /// Cache-wide insertion counter.
    pub seq: u64,
}

impl VisualSlot {
    pub fn is_seed(&self) -> bool {
        self.entropy == SEED_ENTROPY
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertOutcome {
    Appended,
    Replaced(usize),
    Rejected,
}

/// Up to `capacity` cached exemplars for one proxy.
#[derive(Clone, Debug, PartialEq)]
pub struct VisualQueue {
    slots: Vec<VisualSlot>,
    capacity: usize,
}

impl VisualQueue {
    fn seeded(seed: Embedding, capacity: usize, seq: u64) -> Self {
        let mut slots = Vec::with_capacity(capacity);
        slots.push(VisualSlot {
            embedding: seed,
            entropy: SEED_ENTROPY,
            seq,
        });
        VisualQueue { slots, capacity }
    }

    /// Rebuilds a queue from explicit slots (used when reloading snapshots).
    pub fn from_slots(slots: Vec<VisualSlot>, capacity: usize) -> Result<Self> {
        if slots.is_empty() || slots.len() > capacity {
            return Err(Error::Init(format!(
                "visual queue needs 1..={capacity} slots, got {}",
                slots.len()
            )));
        }
        Ok(VisualQueue { slots, capacity })
    }

    pub fn slots(&self) -> &[VisualSlot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_full(&self) -> bool {
        self.slots.len() >= self.capacity
    }

    /// Admits `f_v` if there is room, otherwise displaces the least confident
    /// slot when `h` is strictly lower than its entropy.
    pub fn insert_with_entropy(&mut self, f_v: Embedding, h: f64, seq: u64) -> InsertOutcome {
        debug_assert!(h.is_finite() && h >= 0.0);
        if !self.is_full() {
            self.slots.push(VisualSlot {
                embedding: f_v,
                entropy: h,
                seq,
            });
            return InsertOutcome::Appended;
        }
        let mut worst = 0;
        for (i, slot) in self.slots.iter().enumerate().skip(1) {
            let current = &self.slots[worst];
            if slot.entropy > current.entropy
                || (slot.entropy == current.entropy && slot.seq < current.seq)
            {
                worst = i;
            }
        }
        if h < self.slots[worst].entropy {
            self.slots[worst] = VisualSlot {
                embedding: f_v,
                entropy: h,
                seq,
            };
            InsertOutcome::Replaced(worst)
        } else {
            InsertOutcome::Rejected
        }
    }
}

/// Attention-weighted average of the populated slots of `q`. Not renormalized.
pub fn aggregate(f_v: &Embedding, q: &VisualQueue, beta: f64) -> Result<Vec<f64>> {
    match q.slots.as_slice() {
        [] => Err(Error::contract("aggregate over an empty visual queue")),
        [only] => {
            crate::numeric::check_dims(f_v.dim(), only.embedding.dim())?;
            Ok(only.embedding.to_vec())
        }
        slots => {
            let sims = slots
                .iter()
                .map(|s| cosine(f_v, &s.embedding))
                .collect::<Result<Vec<_>>>()?;
            let weights = attention_weights(&sims, beta)?;
            let mut out = vec![0.0; f_v.dim()];
            for (w, slot) in weights.iter().zip(slots) {
                for (o, x) in out.iter_mut().zip(slot.embedding.iter()) {
                    *o += w * x;
                }
            }
            Ok(out)
        }
    }
}

/// Softmax over the cosines of `f_v` to each aggregated proxy, plus the index
/// of the closest proxy (lowest index on ties).
pub fn assign(f_v: &Embedding, aggregates: &[Vec<f64>]) -> Result<(Vec<f64>, usize)> {
    if aggregates.is_empty() {
        return Err(Error::contract("assignment over zero proxies"));
    }
    let sims = aggregates
        .iter()
        .map(|a| cosine_to_vector(f_v, a))
        .collect::<Result<Vec<_>>>()?;
    let probs = softmax(&sims)?;
    Ok((probs, argmax(&sims)))
}

/// Result of [`assign`] together with the entropy used as an insertion confidence.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub index: usize,
    pub probs: Vec<f64>,
    pub entropy: f64,
}

impl Assignment {
    pub fn compute(f_v: &Embedding, aggregates: &[Vec<f64>]) -> Result<Self> {
        let (probs, index) = assign(f_v, aggregates)?;
        let entropy = entropy(&probs)?;
        Ok(Assignment {
            index,
            probs,
            entropy,
        })
    }
}

/// Positive and negative visual queues.
#[derive(Clone, Debug, PartialEq)]
pub struct VisualCache {
    positive: Vec<VisualQueue>,
    negative: Vec<VisualQueue>,
    capacity: usize,
    next_seq: u64,
}

impl VisualCache {
    /// Seeds one queue per positive and per negative text row.
    pub fn new(t_p: &PositiveTextQueue, t_n: &NegativeTextQueue, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Init("visual queue length must be at least 1".into()));
        }
        let mut cache = VisualCache {
            positive: Vec::with_capacity(t_p.len()),
            negative: Vec::with_capacity(t_n.len()),
            capacity,
            next_seq: 0,
        };
        for entry in t_p.entries() {
            let seq = cache.bump();
            cache
                .positive
                .push(VisualQueue::seeded(entry.embedding.clone(), capacity, seq));
        }
        cache.expand_negatives(t_n.entries());
        Ok(cache)
    }

    /// Rebuilds a cache from explicit queues (used when reloading snapshots).
    pub fn from_parts(positive: Vec<VisualQueue>, negative: Vec<VisualQueue>, capacity: usize) -> Self {
        let next_seq = positive
            .iter()
            .chain(&negative)
            .flat_map(|q| q.slots.iter().map(|s| s.seq + 1))
            .max()
            .unwrap_or(0);
        VisualCache {
            positive,
            negative,
            capacity,
            next_seq,
        }
    }

    fn bump(&mut self) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        seq
    }

    pub fn positive(&self) -> &[VisualQueue] {
        &self.positive
    }

    pub fn negative(&self) -> &[VisualQueue] {
        &self.negative
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Adds one seeded negative queue per newly appended text negative.
    pub fn expand_negatives(&mut self, new_text: &[LabeledEmbedding]) {
        for entry in new_text {
            let seq = self.bump();
            self.negative
                .push(VisualQueue::seeded(entry.embedding.clone(), self.capacity, seq));
        }
    }

    pub fn positive_aggregates(&self, f_v: &Embedding, beta: f64) -> Result<Vec<Vec<f64>>> {
        self.positive.iter().map(|q| aggregate(f_v, q, beta)).collect()
    }

    pub fn negative_aggregates(&self, f_v: &Embedding, beta: f64) -> Result<Vec<Vec<f64>>> {
        self.negative.iter().map(|q| aggregate(f_v, q, beta)).collect()
    }

    pub fn insert_positive(&mut self, class: usize, f_v: Embedding, h: f64) -> Result<InsertOutcome> {
        let seq = self.bump();
        let queue = self
            .positive
            .get_mut(class)
            .ok_or_else(|| Error::contract(format!("no positive visual queue {class}")))?;
        Ok(queue.insert_with_entropy(f_v, h, seq))
    }

    pub fn insert_negative(&mut self, proxy: usize, f_v: Embedding, h: f64) -> Result<InsertOutcome> {
        let seq = self.bump();
        let queue = self
            .negative
            .get_mut(proxy)
            .ok_or_else(|| Error::contract(format!("no negative visual queue {proxy}")))?;
        Ok(queue.insert_with_entropy(f_v, h, seq))
    }
}

pub fn init_visual(
    t_p: &PositiveTextQueue,
    t_n: &NegativeTextQueue,
    capacity: usize,
) -> Result<VisualCache> {
    VisualCache::new(t_p, t_n, capacity)
}

fn aggregate_sims(f_v: &Embedding, queues: &[VisualQueue], beta: f64) -> Result<Vec<f64>> {
    queues
        .iter()
        .map(|q| aggregate(f_v, q, beta).and_then(|a| cosine_to_vector(f_v, &a)))
        .collect()
}

/// Ratio score over the aggregated positive versus negative visual proxies.
pub fn visual_score(f_v: &Embedding, cache: &VisualCache, tau: f64, beta: f64) -> Result<Score> {
    let pos = aggregate_sims(f_v, &cache.positive, beta)?;
    let neg = aggregate_sims(f_v, &cache.negative, beta)?;
    group_ratio_score(&pos, &neg, tau)
}
