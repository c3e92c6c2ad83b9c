//! Textual proxy cache: the fixed positive queue, the growing negative
//! queue, and the candidate corpus negatives are mined from.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::numeric::{check_dims, cosine, group_ratio_score, Embedding, Score};

/// A class name or corpus word together with its text embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledEmbedding {
    pub label: String,
    pub embedding: Embedding,
}

impl LabeledEmbedding {
    pub fn new(label: impl Into<String>, embedding: Embedding) -> Result<Self> {
        let label = label.into();
        if label.is_empty() {
            return Err(Error::Init("label must be non-empty".into()));
        }
        Ok(LabeledEmbedding { label, embedding })
    }
}

/// Text embeddings of the ID classes. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct PositiveTextQueue {
    entries: Vec<LabeledEmbedding>,
}

impl PositiveTextQueue {
    pub fn new(id_classes: Vec<LabeledEmbedding>) -> Result<Self> {
        let first = id_classes
            .first()
            .ok_or_else(|| Error::Init("positive queue needs at least one ID class".into()))?;
        let dim = first.embedding.dim();
        let mut seen = HashSet::new();
        for entry in &id_classes {
            if entry.embedding.dim() != dim {
                return Err(Error::Init(format!(
                    "class `{}` has dimension {}, expected {dim}",
                    entry.label,
                    entry.embedding.dim()
                )));
            }
            if !seen.insert(entry.label.as_str()) {
                return Err(Error::Init(format!("duplicate ID class label `{}`", entry.label)));
            }
        }
        Ok(PositiveTextQueue { entries: id_classes })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.entries[0].embedding.dim()
    }

    pub fn entries(&self) -> &[LabeledEmbedding] {
        &self.entries
    }

    pub fn contains_label(&self, label: &str) -> bool {
        self.entries.iter().any(|e| e.label == label)
    }

    /// Cosine of `f_v` to every class row.
    pub fn similarities(&self, f_v: &Embedding) -> Result<Vec<f64>> {
        self.entries.iter().map(|e| cosine(f_v, &e.embedding)).collect()
    }

    /// Index of the class row with the highest cosine to `f_v` (lowest index on ties).
    pub fn nearest_class(&self, f_v: &Embedding) -> Result<usize> {
        Ok(argmax(&self.similarities(f_v)?))
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Negative text proxies. Append-only; labels stay unique.
#[derive(Clone, Debug, PartialEq)]
pub struct NegativeTextQueue {
    entries: Vec<LabeledEmbedding>,
    labels: HashSet<String>,
    /// Stream index of the sample that appended each entry; `None` for the initial set.
    added_at: Vec<Option<u64>>,
    max_len: Option<usize>,
}

impl NegativeTextQueue {
    /// Builds a queue from explicit entries, rejecting duplicates and ID-label collisions.
    pub fn from_entries(entries: Vec<LabeledEmbedding>, t_p: &PositiveTextQueue) -> Result<Self> {
        let mut queue = NegativeTextQueue {
            entries: Vec::with_capacity(entries.len()),
            labels: HashSet::new(),
            added_at: Vec::new(),
            max_len: None,
        };
        for entry in entries {
            check_dims(entry.embedding.dim(), t_p.dim()).map_err(|e| Error::Init(e.to_string()))?;
            if t_p.contains_label(&entry.label) {
                return Err(Error::Init(format!(
                    "negative label `{}` collides with an ID class",
                    entry.label
                )));
            }
            if !queue.labels.insert(entry.label.clone()) {
                return Err(Error::Init(format!("duplicate negative label `{}`", entry.label)));
            }
            queue.entries.push(entry);
            queue.added_at.push(None);
        }
        Ok(queue)
    }

    /// Caps the total queue length; once reached, further appends are dropped.
    pub fn with_max_len(mut self, max_len: Option<usize>) -> Self {
        self.max_len = max_len;
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LabeledEmbedding] {
        &self.entries
    }

    pub fn added_at(&self) -> &[Option<u64>] {
        &self.added_at
    }

    pub fn contains_label(&self, label: &str) -> bool {
        self.labels.contains(label)
    }

    pub fn similarities(&self, f_v: &Embedding) -> Result<Vec<f64>> {
        self.entries.iter().map(|e| cosine(f_v, &e.embedding)).collect()
    }
}

/// Vocabulary negatives are mined from.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    entries: Vec<LabeledEmbedding>,
    index: HashMap<String, usize>,
    enqueued: Vec<bool>,
}

impl Corpus {
    /// Builds a corpus, dropping entries whose label matches an ID class.
    pub fn new(entries: Vec<LabeledEmbedding>, t_p: &PositiveTextQueue) -> Result<Self> {
        let mut kept = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        for entry in entries {
            check_dims(entry.embedding.dim(), t_p.dim()).map_err(|e| Error::Init(e.to_string()))?;
            if t_p.contains_label(&entry.label) {
                log::debug!("corpus entry `{}` collides with an ID class, skipped", entry.label);
                continue;
            }
            if index.insert(entry.label.clone(), kept.len()).is_some() {
                return Err(Error::Init(format!("duplicate corpus label `{}`", entry.label)));
            }
            kept.push(entry);
        }
        let enqueued = vec![false; kept.len()];
        Ok(Corpus {
            entries: kept,
            index,
            enqueued,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LabeledEmbedding] {
        &self.entries
    }

    pub fn is_enqueued(&self, i: usize) -> bool {
        self.enqueued[i]
    }

    pub fn eligible_count(&self) -> usize {
        self.enqueued.iter().filter(|&&f| !f).count()
    }

    fn mark(&mut self, label: &str) {
        if let Some(&i) = self.index.get(label) {
            self.enqueued[i] = true;
        }
    }

    /// Top-`n` eligible entries under `key` (larger is better), ties by ascending index.
    fn top_by(&self, f_v: &Embedding, n: usize, key: impl Fn(f64) -> f64) -> Result<Vec<LabeledEmbedding>> {
        let mut scored = Vec::with_capacity(self.entries.len());
        for (i, entry) in self.entries.iter().enumerate() {
            if !self.enqueued[i] {
                scored.push((key(cosine(f_v, &entry.embedding)?), i));
            }
        }
        let by_rank = |a: &(f64, usize), b: &(f64, usize)| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1));
        let n = n.min(scored.len());
        if n == 0 {
            return Ok(Vec::new());
        }
        if n < scored.len() {
            scored.select_nth_unstable_by(n - 1, by_rank);
            scored.truncate(n);
        }
        scored.sort_by(by_rank);
        Ok(scored
            .into_iter()
            .map(|(_, i)| self.entries[i].clone())
            .collect())
    }

    /// The `n` eligible entries most similar to `f_v`.
    pub fn retrieve_near(&self, f_v: &Embedding, n: usize) -> Result<Vec<LabeledEmbedding>> {
        self.top_by(f_v, n, |c| c)
    }

    /// The `n` eligible entries least similar to `f_v`.
    pub fn retrieve_far(&self, f_v: &Embedding, n: usize) -> Result<Vec<LabeledEmbedding>> {
        self.top_by(f_v, n, |c| -c)
    }
}

/// How the initial negative queue is drawn from the corpus.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NegativeInit {
    /// The `m` entries whose closest ID class is farthest away.
    Farthest,
    /// The first `m` corpus entries, as listed.
    GivenList,
}

impl std::str::FromStr for NegativeInit {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "farthest" => Ok(NegativeInit::Farthest),
            "given-list" => Ok(NegativeInit::GivenList),
            other => Err(format!("unknown negative init mode `{other}` (farthest | given-list)")),
        }
    }
}

impl std::fmt::Display for NegativeInit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NegativeInit::Farthest => "farthest",
            NegativeInit::GivenList => "given-list",
        })
    }
}

pub fn init_positive(id_classes: Vec<LabeledEmbedding>) -> Result<PositiveTextQueue> {
    PositiveTextQueue::new(id_classes)
}

/// Seeds the negative queue with `m` corpus entries and flags them in the corpus.
pub fn init_negative(
    corpus: &mut Corpus,
    t_p: &PositiveTextQueue,
    m: usize,
    mode: NegativeInit,
) -> Result<NegativeTextQueue> {
    if m > corpus.len() {
        return Err(Error::Init(format!(
            "requested {m} initial negatives but the corpus has {} eligible entries",
            corpus.len()
        )));
    }
    let chosen: Vec<usize> = match mode {
        NegativeInit::GivenList => (0..m).collect(),
        NegativeInit::Farthest => {
            let mut keyed = Vec::with_capacity(corpus.len());
            for (i, entry) in corpus.entries.iter().enumerate() {
                let closest = t_p
                    .similarities(&entry.embedding)?
                    .into_iter()
                    .fold(f64::NEG_INFINITY, f64::max);
                keyed.push((closest, i));
            }
            keyed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
            keyed.truncate(m);
            keyed.into_iter().map(|(_, i)| i).collect()
        }
    };
    let entries: Vec<LabeledEmbedding> = chosen.iter().map(|&i| corpus.entries[i].clone()).collect();
    let queue = NegativeTextQueue::from_entries(entries, t_p)?;
    for &i in &chosen {
        corpus.enqueued[i] = true;
    }
    Ok(queue)
}

/// Ratio of exponential mass on the ID class rows versus the current negatives.
pub fn textual_score(
    f_v: &Embedding,
    t_p: &PositiveTextQueue,
    t_n: &NegativeTextQueue,
    tau: f64,
) -> Result<Score> {
    let pos = t_p.similarities(f_v)?;
    let neg = t_n.similarities(f_v)?;
    group_ratio_score(&pos, &neg, tau)
}

/// Appends candidates whose labels are not yet in the queue and flags them in
/// the corpus. Returns the entries actually appended, in order.
pub fn enqueue_negatives(
    t_n: &mut NegativeTextQueue,
    corpus: &mut Corpus,
    candidates: Vec<LabeledEmbedding>,
    sample_id: Option<u64>,
) -> Vec<LabeledEmbedding> {
    let mut appended = Vec::new();
    for candidate in candidates {
        if t_n.max_len.is_some_and(|cap| t_n.entries.len() >= cap) {
            break;
        }
        if t_n.labels.contains(&candidate.label) {
            continue;
        }
        corpus.mark(&candidate.label);
        t_n.labels.insert(candidate.label.clone());
        t_n.entries.push(candidate.clone());
        t_n.added_at.push(sample_id);
        appended.push(candidate);
    }
    appended
}
