#![allow(dead_code)]

pub mod reference;

use astro_float::{BigFloat, Consts, RoundingMode};
use coevo_core::Embedding;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const PREC: usize = 128;
const RM: RoundingMode = RoundingMode::ToEven;

/// Σpos e^(s/τ) / (Σpos e^(s/τ) + Σneg e^(s/τ)) evaluated literally in 128-bit floats.
pub fn ratio_extended(pos: &[f64], neg: &[f64], tau: f64, cc: &mut Consts) -> BigFloat {
    let inv_t = BigFloat::from_f64(1.0, PREC).div(&BigFloat::from_f64(tau, PREC), PREC, RM);
    let mut sum = |xs: &[f64]| {
        xs.iter().fold(BigFloat::from_f64(0.0, PREC), |acc, &s| {
            let e = BigFloat::from_f64(s, PREC).mul(&inv_t, PREC, RM).exp(PREC, RM, cc);
            acc.add(&e, PREC, RM)
        })
    };
    let p = sum(pos);
    let n = sum(neg);
    p.div(&p.add(&n, PREC, RM), PREC, RM)
}

/// |x − reference| / reference, in extended precision, rounded to f64.
pub fn relative_error(x: f64, reference: &BigFloat) -> f64 {
    let diff = BigFloat::from_f64(x, PREC).sub(reference, PREC, RM).abs();
    let rel = diff.div(reference, PREC, RM);
    format!("{rel}").parse().unwrap_or(f64::INFINITY)
}

pub fn pairwise_auroc(id: &[f64], ood: &[f64]) -> f64 {
    let mut wins = 0.0;
    for a in id {
        for b in ood {
            if a > b {
                wins += 1.0;
            } else if a == b {
                wins += 0.5;
            }
        }
    }
    wins / (id.len() * ood.len()) as f64
}

/// Largest observed threshold whose ID acceptance rate is at least 95%.
pub fn sweep_fpr95(id: &[f64], ood: &[f64]) -> f64 {
    let mut best: Option<f64> = None;
    for &t in id.iter().chain(ood) {
        let tpr = id.iter().filter(|&&s| s >= t).count() as f64 / id.len() as f64;
        if tpr >= 0.95 && best.is_none_or(|b| t > b) {
            best = Some(t);
        }
    }
    let t = best.expect("the smallest ID score always qualifies");
    ood.iter().filter(|&&s| s >= t).count() as f64 / ood.len() as f64
}

/// Exhaustive O(n²) search over midpoints of sorted unique scores for the split
/// minimizing the sum of the two within-group variances. Returns the interval of
/// thresholds producing that split: the two scores bracketing the best midpoint.
pub fn midpoint_minimizer(scores: &[f64]) -> Option<(f64, f64)> {
    let mut uniq = scores.to_vec();
    uniq.sort_by(|a, b| a.partial_cmp(b).unwrap());
    uniq.dedup();
    let var = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
    };
    let mut best: Option<(f64, (f64, f64))> = None;
    for pair in uniq.windows(2) {
        let t = 0.5 * (pair[0] + pair[1]);
        let lo: Vec<f64> = scores.iter().copied().filter(|&s| s <= t).collect();
        let hi: Vec<f64> = scores.iter().copied().filter(|&s| s > t).collect();
        let obj = var(&lo) + var(&hi);
        if best.is_none_or(|(b, _)| obj < b) {
            best = Some((obj, (pair[0], pair[1])));
        }
    }
    best.map(|(_, interval)| interval)
}

/// Orthogonal matrix from Gram-Schmidt on random rows.
pub fn random_rotation(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while rows.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for r in &rows {
            let d: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(r).for_each(|(a, b)| *a -= d * b);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            rows.push(v.iter().map(|x| x / n).collect());
        }
    }
    rows
}

pub fn rotate(rotation: &[Vec<f64>], e: &Embedding) -> Embedding {
    let v: Vec<f64> = rotation
        .iter()
        .map(|row| row.iter().zip(e.iter()).map(|(a, b)| a * b).sum())
        .collect();
    Embedding::new(v).expect("rotation preserves norm")
}

/// One line per criterion, collected for the final tally.
pub struct Report {
    failures: Vec<String>,
}

impl Report {
    pub fn new() -> Self {
        Report { failures: Vec::new() }
    }

    pub fn record(&mut self, name: &str, passed: bool, detail: impl AsRef<str>) {
        let tag = if passed { "PASS" } else { "FAIL" };
        println!("{tag}  {name}: {}", detail.as_ref());
        if !passed {
            self.failures.push(name.to_string());
        }
    }

    pub fn failures(&self) -> &[String] {
        &self.failures
    }
}
