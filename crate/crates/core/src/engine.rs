//! Per-sample co-evolution loop.
//!
//! For each test embedding the engine scores it against the current caches,
//! gates it against the adaptive threshold, lets confident samples grow the
//! negative text queue and refresh the visual cache, then scores it again
//! against the updated caches.

use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::numeric::{check_dims, Embedding};
use crate::textual::{
    enqueue_negatives, init_negative, init_positive, textual_score, Corpus, LabeledEmbedding,
    NegativeTextQueue, PositiveTextQueue,
};
use crate::threshold::{gate, Decision, ScoreWindow};
use crate::visual::{visual_score, Assignment, VisualCache};

/// Pre-evolution fusion: `λ s_t + (1 - λ) s_v`.
pub fn fuse_pre(s_t: f64, s_v: f64, lambda: f64) -> f64 {
    lambda * s_t + (1.0 - lambda) * s_v
}

/// Post-evolution fusion with the weights flipped: `(1 - λ) s_t + λ s_v`.
pub fn fuse_post(s_t: f64, s_v: f64, lambda: f64) -> f64 {
    (1.0 - lambda) * s_t + lambda * s_v
}

/// Trace of one processed sample.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRecord {
    pub sample_id: u64,
    pub s_t_pre: f64,
    pub s_v_pre: f64,
    pub s_pre: f64,
    /// Threshold in force when the sample was gated.
    pub delta: f64,
    pub decision: Decision,
    /// Closest aggregated positive visual proxy before any update.
    pub predicted_class: Option<usize>,
    /// Negative visual proxy the sample was assigned to (confident-OOD samples only).
    pub predicted_negative: Option<usize>,
    pub s_t_post: f64,
    pub s_v_post: f64,
    pub s_post: f64,
}

/// A test sample that could not be processed.
#[derive(Debug)]
pub struct SkippedSample {
    pub index: usize,
    pub error: Error,
}

#[derive(Debug, Default)]
pub struct RunOutput {
    pub records: Vec<ScoreRecord>,
    pub skipped: Vec<SkippedSample>,
}

/// Full mutable state of one stream.
#[derive(Clone, Debug, PartialEq)]
pub struct Engine {
    config: EngineConfig,
    positive: PositiveTextQueue,
    negative: NegativeTextQueue,
    corpus: Corpus,
    cache: VisualCache,
    window: ScoreWindow,
}

impl Engine {
    pub fn new(
        config: EngineConfig,
        id_classes: Vec<LabeledEmbedding>,
        corpus: Vec<LabeledEmbedding>,
    ) -> Result<Self> {
        config.validate()?;
        let positive = init_positive(id_classes)?;
        let mut corpus = Corpus::new(corpus, &positive)?;
        let negative = init_negative(&mut corpus, &positive, config.negatives, config.neg_init)?
            .with_max_len(config.max_negatives);
        let cache = VisualCache::new(&positive, &negative, config.queue_len)?;
        let window = ScoreWindow::new(config.window, config.bins);
        Ok(Engine {
            config,
            positive,
            negative,
            corpus,
            cache,
            window,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn positive(&self) -> &PositiveTextQueue {
        &self.positive
    }

    pub fn negative(&self) -> &NegativeTextQueue {
        &self.negative
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn cache(&self) -> &VisualCache {
        &self.cache
    }

    pub fn window(&self) -> &ScoreWindow {
        &self.window
    }

    pub fn dim(&self) -> usize {
        self.positive.dim()
    }

    fn scores(&self, f_v: &Embedding) -> Result<(f64, f64)> {
        let s_t = textual_score(f_v, &self.positive, &self.negative, self.config.tau)?;
        let s_v = visual_score(f_v, &self.cache, self.config.tau, self.config.beta)?;
        Ok((s_t.get(), s_v.get()))
    }

    /// Runs one step of the loop. On error the state is left untouched.
    pub fn process_sample(&mut self, sample_id: u64, f_v: &Embedding) -> Result<ScoreRecord> {
        check_dims(f_v.dim(), self.dim())?;
        let cfg = self.config.clone();

        let (s_t_pre, s_v_pre) = self.scores(f_v)?;
        let s_pre = fuse_pre(s_t_pre, s_v_pre, cfg.lambda);

        let delta = self.window.compute_delta();
        self.window.push_score(s_pre);
        let decision = gate(s_pre, delta, cfg.gamma, cfg.margin_form);

        let positive = Assignment::compute(f_v, &self.cache.positive_aggregates(f_v, cfg.beta)?)?;
        let predicted_class = Some(positive.index);
        let mut predicted_negative = None;

        match decision {
            Decision::PredId => {
                if cfg.ablation.evolves_text() {
                    let far = self.corpus.retrieve_far(f_v, cfg.top_n)?;
                    self.grow_negatives(far, sample_id);
                }
                if cfg.ablation.evolves_visual() {
                    self.cache
                        .insert_positive(positive.index, f_v.clone(), positive.entropy)?;
                }
            }
            Decision::PredOod => {
                if cfg.ablation.evolves_text() {
                    let near = self.corpus.retrieve_near(f_v, cfg.top_n)?;
                    self.grow_negatives(near, sample_id);
                }
                // Assignment runs over the negative queues as expanded above.
                let negative =
                    Assignment::compute(f_v, &self.cache.negative_aggregates(f_v, cfg.beta)?);
                match negative {
                    Ok(negative) => {
                        predicted_negative = Some(negative.index);
                        if cfg.ablation.evolves_visual() {
                            self.cache
                                .insert_negative(negative.index, f_v.clone(), negative.entropy)?;
                        }
                    }
                    // No negative proxies at all: nothing to assign to.
                    Err(Error::Contract(_)) if self.cache.negative().is_empty() => {}
                    Err(e) => return Err(e),
                }
            }
            Decision::Ambiguous => {}
        }

        let (s_t_post, s_v_post) = self.scores(f_v)?;
        let s_post = fuse_post(s_t_post, s_v_post, cfg.lambda);

        Ok(ScoreRecord {
            sample_id,
            s_t_pre,
            s_v_pre,
            s_pre,
            delta,
            decision,
            predicted_class,
            predicted_negative,
            s_t_post,
            s_v_post,
            s_post,
        })
    }

    fn grow_negatives(&mut self, candidates: Vec<LabeledEmbedding>, sample_id: u64) {
        let appended =
            enqueue_negatives(&mut self.negative, &mut self.corpus, candidates, Some(sample_id));
        self.cache.expand_negatives(&appended);
    }
}

/// Everything a stream needs, already decoded into embeddings.
#[derive(Clone, Debug, Default)]
pub struct StreamInputs {
    pub id_classes: Vec<LabeledEmbedding>,
    pub corpus: Vec<LabeledEmbedding>,
    pub samples: Vec<Embedding>,
}

/// Processes `inputs.samples` strictly in order, returning the engine's final state too.
pub fn run_stream_with_state(config: &EngineConfig, inputs: &StreamInputs) -> Result<(RunOutput, Engine)> {
    let mut engine = Engine::new(config.clone(), inputs.id_classes.clone(), inputs.corpus.clone())?;
    let dim = engine.dim();
    if let Some((index, bad)) = inputs.samples.iter().enumerate().find(|(_, s)| s.dim() != dim) {
        return Err(Error::Record {
            index,
            source: Box::new(Error::contract(format!(
                "sample dimension {} does not match class dimension {dim}",
                bad.dim()
            ))),
        });
    }
    let mut out = RunOutput {
        records: Vec::with_capacity(inputs.samples.len()),
        skipped: Vec::new(),
    };
    for (index, f_v) in inputs.samples.iter().enumerate() {
        match engine.process_sample(index as u64, f_v) {
            Ok(record) => out.records.push(record),
            Err(error) => {
                log::warn!("sample {index} skipped: {error}");
                out.skipped.push(SkippedSample { index, error });
            }
        }
    }
    Ok((out, engine))
}

pub fn run_stream(config: &EngineConfig, inputs: &StreamInputs) -> Result<RunOutput> {
    run_stream_with_state(config, inputs).map(|(out, _)| out)
}
