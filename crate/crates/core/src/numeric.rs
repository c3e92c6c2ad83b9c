//! Numeric kernels shared by every scoring path.
//!
//! Everything here is a pure function over slices. Exponentials are always
//! evaluated after subtracting the maximum logit, so temperatures as small as
//! `0.01` on cosine similarities in `[-1, 1]` stay finite.

use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};

/// Tolerance on the norm of a freshly constructed [`Embedding`].
pub const NORM_TOLERANCE: f64 = 1e-4;

/// A unit-norm vector in `R^D`.
///
/// Construction renormalizes, so callers may hand in raw encoder output.
#[derive(Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Renormalizes `components` to unit length.
    ///
    /// Fails on an empty vector, a non-finite component, or a zero vector.
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::contract("embedding must have at least one component"));
        }
        if let Some(i) = components.iter().position(|c| !c.is_finite()) {
            return Err(Error::contract(format!("embedding component {i} is not finite")));
        }
        let norm = l2_norm(&components);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::contract("embedding has zero or non-finite norm"));
        }
        let mut components = components;
        if norm != 1.0 {
            components.iter_mut().for_each(|c| *c /= norm);
        }
        Ok(Embedding(components))
    }

    pub fn from_f32(components: &[f32]) -> Result<Self> {
        Self::new(components.iter().map(|&c| f64::from(c)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.0.iter().map(|&c| c as f32).collect()
    }
}

impl Deref for Embedding {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl fmt::Debug for Embedding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Embedding(dim={}, {:?})", self.0.len(), &self.0[..self.0.len().min(4)])
    }
}

/// An ID-confidence value in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Score(f64);

impl Score {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Score(value))
        } else {
            Err(Error::contract(format!("score {value} outside [0, 1]")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl From<Score> for f64 {
    fn from(s: Score) -> f64 {
        s.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity of two unit-norm embeddings, clamped to `[-1, 1]`.
pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    Ok(dot(a, b).clamp(-1.0, 1.0))
}

/// Cosine similarity between an embedding and an arbitrary (non-normalized) vector.
pub fn cosine_to_vector(a: &Embedding, v: &[f64]) -> Result<f64> {
    check_dims(a.dim(), v.len())?;
    let norm = l2_norm(v);
    if norm == 0.0 {
        return Err(Error::contract("cosine against a zero vector"));
    }
    Ok((dot(a, v) / norm).clamp(-1.0, 1.0))
}

pub(crate) fn check_dims(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::contract(format!("dimension mismatch: {a} vs {b}")))
    }
}

/// Share of the exponential mass carried by the positive group:
/// `Σ_pos e^(s/τ) / (Σ_pos e^(s/τ) + Σ_neg e^(s/τ))`.
///
/// An empty negative group yields exactly `1.0`.
pub fn group_ratio_score(pos_sims: &[f64], neg_sims: &[f64], tau: f64) -> Result<Score> {
    if pos_sims.is_empty() {
        return Err(Error::contract("positive similarity group is empty"));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::contract(format!("temperature must be positive, got {tau}")));
    }
    if pos_sims.iter().chain(neg_sims).any(|s| !s.is_finite()) {
        return Err(Error::contract("non-finite similarity"));
    }
    let max = pos_sims
        .iter()
        .chain(neg_sims)
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let mass = |sims: &[f64]| -> f64 { sims.iter().map(|s| ((s - max) / tau).exp()).sum() };
    let pos = mass(pos_sims);
    let neg = mass(neg_sims);
    // pos >= 1 whenever the maximum sits in the positive group; otherwise it may underflow to 0.
    let score = if neg == 0.0 { 1.0 } else { pos / (pos + neg) };
    Ok(Score(score.clamp(0.0, 1.0)))
}

fn normalized_exp(logits: impl Iterator<Item = f64> + Clone) -> Vec<f64> {
    let max = logits.clone().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.map(|x| (x - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|w| *w /= total);
    out
}

pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::contract("softmax of an empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::contract("softmax input is not finite"));
    }
    Ok(normalized_exp(v.iter().copied()))
}

/// Natural-log Shannon entropy; `0 · ln 0` counts as zero.
pub fn entropy(p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::contract("entropy of an empty distribution"));
    }
    if p.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::contract("distribution has a negative or non-finite entry"));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::contract(format!("distribution sums to {total}, not 1")));
    }
    let h: f64 = p
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.ln())
        .sum();
    Ok(h.clamp(0.0, (p.len() as f64).ln()))
}

/// Attention over cached slots: `w_l ∝ exp(-β (1 - s_l))`.
pub fn attention_weights(sims: &[f64], beta: f64) -> Result<Vec<f64>> {
    if sims.is_empty() {
        return Err(Error::contract("attention over an empty slot set"));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::contract(format!("beta must be positive, got {beta}")));
    }
    if sims.iter().any(|s| !s.is_finite()) {
        return Err(Error::contract("non-finite similarity"));
    }
    Ok(normalized_exp(sims.iter().map(|s| -beta * (1.0 - s))))
}
