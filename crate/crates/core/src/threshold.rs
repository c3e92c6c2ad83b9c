//! Adaptive decision threshold over a sliding window of fused scores, and
//! the confidence-margin gate that decides which samples may update caches.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

/// Threshold used until the window holds two distinct histogram bins.
pub const FALLBACK_DELTA: f64 = 0.5;

/// Objective differences below this are treated as ties (lowest edge wins).
const TIE_EPS: f64 = 1e-12;

/// Ring buffer of recent scores with an incrementally maintained histogram over `[0, 1]`.
///
/// Besides counts, each bin keeps the sum and sum of squares of its raw scores,
/// so the split objective at any edge is exact rather than bin-center rounded.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreWindow {
    buffer: VecDeque<f64>,
    capacity: usize,
    histogram: Vec<u64>,
    sums: Vec<(f64, f64)>,
}

impl ScoreWindow {
    pub fn new(capacity: usize, bins: usize) -> Self {
        assert!(capacity >= 1, "window capacity must be positive");
        assert!(bins >= 2, "need at least two histogram bins");
        ScoreWindow {
            buffer: VecDeque::with_capacity(capacity),
            capacity,
            histogram: vec![0; bins],
            sums: vec![(0.0, 0.0); bins],
        }
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn bins(&self) -> usize {
        self.histogram.len()
    }

    pub fn histogram(&self) -> &[u64] {
        &self.histogram
    }

    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.buffer.iter().copied()
    }

    fn bin_of(&self, s: f64) -> usize {
        let b = self.histogram.len();
        ((s * b as f64) as usize).min(b - 1)
    }

    pub fn push_score(&mut self, s: f64) {
        debug_assert!((0.0..=1.0).contains(&s), "score {s} outside [0, 1]");
        let s = s.clamp(0.0, 1.0);
        if self.buffer.len() == self.capacity {
            if let Some(old) = self.buffer.pop_front() {
                let bin = self.bin_of(old);
                self.histogram[bin] -= 1;
                // An emptied bin restarts from exact zero, so drift stays bounded.
                self.sums[bin] = if self.histogram[bin] == 0 {
                    (0.0, 0.0)
                } else {
                    (self.sums[bin].0 - old, self.sums[bin].1 - old * old)
                };
            }
        }
        let bin = self.bin_of(s);
        self.histogram[bin] += 1;
        self.sums[bin].0 += s;
        self.sums[bin].1 += s * s;
        self.buffer.push_back(s);
    }

    /// Interior bin edge minimizing the sum of the two within-group variances
    /// of the window's scores, splitting at bin boundaries.
    ///
    /// Edges that leave one side empty are skipped; among (near-)equal minima
    /// the lowest edge wins. Falls back to [`FALLBACK_DELTA`] when fewer than
    /// two bins are occupied.
    pub fn compute_delta(&self) -> f64 {
        let bins = self.histogram.len();
        let occupied = self.histogram.iter().filter(|&&c| c > 0).count();
        if self.buffer.len() < 2 || occupied < 2 {
            return FALLBACK_DELTA;
        }
        let n_all = self.buffer.len() as f64;
        let (s1_all, s2_all) = self.sums.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
        let variance = |n: f64, s1: f64, s2: f64| {
            let mean = s1 / n;
            (s2 / n - mean * mean).max(0.0)
        };

        let mut best: Option<(f64, f64)> = None;
        let (mut n_lo, mut s1_lo, mut s2_lo) = (0.0, 0.0, 0.0);
        for edge in 1..bins {
            let i = edge - 1;
            n_lo += self.histogram[i] as f64;
            s1_lo += self.sums[i].0;
            s2_lo += self.sums[i].1;
            let n_hi = n_all - n_lo;
            if n_lo == 0.0 || n_hi == 0.0 {
                continue;
            }
            let objective =
                variance(n_lo, s1_lo, s2_lo) + variance(n_hi, s1_all - s1_lo, s2_all - s2_lo);
            let delta = edge as f64 / bins as f64;
            match best {
                Some((b, _)) if objective >= b - TIE_EPS => {}
                _ => best = Some((objective, delta)),
            }
        }
        best.map_or(FALLBACK_DELTA, |(_, d)| d)
    }
}

/// Outcome of the confidence-margin gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Decision {
    PredId,
    PredOod,
    Ambiguous,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::PredId => "id",
            Decision::PredOod => "ood",
            Decision::Ambiguous => "ambiguous",
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Decision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "id" => Ok(Decision::PredId),
            "ood" => Ok(Decision::PredOod),
            "ambiguous" => Ok(Decision::Ambiguous),
            other => Err(format!("unknown decision `{other}`")),
        }
    }
}

/// Which lower bound defines a confident OOD prediction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MarginForm {
    /// `s < δ (1 - γ)`
    #[default]
    Alg1,
    /// `s < δ - γ (1 - δ)`
    MainText,
}

impl FromStr for MarginForm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "alg1" => Ok(MarginForm::Alg1),
            "maintext" => Ok(MarginForm::MainText),
            other => Err(format!("unknown margin form `{other}` (alg1 | maintext)")),
        }
    }
}

impl fmt::Display for MarginForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarginForm::Alg1 => "alg1",
            MarginForm::MainText => "maintext",
        })
    }
}

/// Confident ID above `δ + γ(1 - δ)`, confident OOD below the lower bound, ambiguous between.
pub fn gate(s: f64, delta: f64, gamma: f64, form: MarginForm) -> Decision {
    let upper = delta + gamma * (1.0 - delta);
    let lower = match form {
        MarginForm::Alg1 => delta * (1.0 - gamma),
        MarginForm::MainText => delta - gamma * (1.0 - delta),
    };
    if s >= upper {
        Decision::PredId
    } else if s < lower {
        Decision::PredOod
    } else {
        Decision::Ambiguous
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn window_of(scores: &[f64], capacity: usize, bins: usize) -> ScoreWindow {
        let mut w = ScoreWindow::new(capacity, bins);
        scores.iter().for_each(|&s| w.push_score(s));
        w
    }

    /// Brute force over every interior edge, splitting raw scores by bin and
    /// recomputing both variances with two-pass sums.
    fn edge_oracle(scores: &[f64], bins: usize) -> f64 {
        let bin = |s: f64| ((s * bins as f64).floor() as usize).min(bins - 1);
        let var = |xs: &[f64]| {
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
        };
        let mut best = (f64::INFINITY, FALLBACK_DELTA);
        for e in 1..bins {
            let d = e as f64 / bins as f64;
            let lo: Vec<f64> = scores.iter().copied().filter(|&s| bin(s) < e).collect();
            let hi: Vec<f64> = scores.iter().copied().filter(|&s| bin(s) >= e).collect();
            if lo.is_empty() || hi.is_empty() {
                continue;
            }
            let obj = var(&lo) + var(&hi);
            if obj < best.0 - 1e-12 {
                best = (obj, d);
            }
        }
        best.1
    }

    /// Exhaustive search over midpoints of sorted unique raw scores. Every
    /// threshold strictly between the two scores bracketing the best midpoint
    /// induces the same split, so the minimizer is returned as that interval.
    fn midpoint_oracle(scores: &[f64]) -> (f64, f64) {
        let mut uniq = scores.to_vec();
        uniq.sort_by(|a, b| a.partial_cmp(b).unwrap());
        uniq.dedup();
        let var = |xs: &[f64]| {
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
        };
        let mut best = (f64::INFINITY, (0.0, 0.0));
        for pair in uniq.windows(2) {
            let t = 0.5 * (pair[0] + pair[1]);
            let (lo, hi): (Vec<f64>, Vec<f64>) = scores.iter().partition(|&&s| s <= t);
            let obj = var(&lo) + var(&hi);
            if obj < best.0 {
                best = (obj, (pair[0], pair[1]));
            }
        }
        best.1
    }

    #[test]
    fn ring_semantics() {
        let w = window_of(&[0.1, 0.2, 0.3], 5, 8);
        assert_eq!(w.len(), 3);
        let w = window_of(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6], 5, 8);
        assert_eq!(w.len(), 5);
        assert_eq!(w.scores().next(), Some(0.2));
    }

    #[test]
    fn histogram_tracks_contents_under_fuzz() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut w = ScoreWindow::new(333, 256);
        for _ in 0..10_000 {
            w.push_score(rng.gen_range(0.0..=1.0));
        }
        let mut recount = vec![0u64; 256];
        for s in w.scores() {
            recount[((s * 256.0) as usize).min(255)] += 1;
        }
        assert_eq!(w.histogram(), &recount[..]);
        assert_eq!(w.histogram().iter().sum::<u64>(), w.len() as u64);
    }

    #[test]
    fn two_point_example() {
        let w = window_of(&[0.1, 0.1, 0.9, 0.9], 16, 4);
        assert_eq!(w.compute_delta(), 0.25);
        assert_eq!(edge_oracle(&[0.1, 0.1, 0.9, 0.9], 4), 0.25);
    }

    #[test]
    fn degenerate_windows_fall_back() {
        assert_eq!(ScoreWindow::new(8, 256).compute_delta(), FALLBACK_DELTA);
        assert_eq!(window_of(&[0.3], 8, 256).compute_delta(), FALLBACK_DELTA);
        assert_eq!(window_of(&[0.7; 6], 8, 256).compute_delta(), FALLBACK_DELTA);
    }

    #[test]
    fn separated_clusters_match_midpoint_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let normal = rand_distr::Normal::new(0.0, 0.02).unwrap();
        let mut scores = Vec::new();
        for &mu in &[0.2, 0.8] {
            for _ in 0..500 {
                let x: f64 = mu + rng.sample(normal);
                scores.push(x.clamp(0.0, 1.0));
            }
        }
        scores.shuffle(&mut rng);
        let delta = window_of(&scores, 2048, 256).compute_delta();

        let (lo, hi) = midpoint_oracle(&scores);
        let dist = if delta < lo { lo - delta } else if delta > hi { delta - hi } else { 0.0 };
        assert!(dist <= 1.0 / 256.0, "{delta} outside [{lo}, {hi}]");
    }

    #[test]
    fn gate_examples() {
        assert_eq!(gate(0.7, 0.5, 0.2, MarginForm::Alg1), Decision::PredId);
        assert_eq!(gate(0.3, 0.5, 0.2, MarginForm::Alg1), Decision::PredOod);
        assert_eq!(gate(0.5, 0.5, 0.2, MarginForm::Alg1), Decision::Ambiguous);
        // Lower bound 0.4 under alg1, 0.4 under maintext as well at δ = 0.5.
        assert_eq!(gate(0.39, 0.5, 0.2, MarginForm::MainText), Decision::PredOod);
        // δ = 0.6, γ = 0.2: alg1 lower = 0.48, maintext lower = 0.52.
        assert_eq!(gate(0.5, 0.6, 0.2, MarginForm::Alg1), Decision::Ambiguous);
        assert_eq!(gate(0.5, 0.6, 0.2, MarginForm::MainText), Decision::PredOod);
    }

    proptest! {
        #[test]
        fn zero_margin_has_no_ambiguous_band(s in 0.0f64..=1.0, delta in 0.0f64..=1.0) {
            let d = gate(s, delta, 0.0, MarginForm::Alg1);
            prop_assert_eq!(d, if s >= delta { Decision::PredId } else { Decision::PredOod });
        }

        #[test]
        fn ambiguous_band_grows_with_gamma(s in 0.0f64..=1.0, delta in 0.0f64..=1.0, g1 in 0.0f64..=1.0, g2 in 0.0f64..=1.0) {
            let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
            for form in [MarginForm::Alg1, MarginForm::MainText] {
                if gate(s, delta, lo, form) == Decision::Ambiguous {
                    prop_assert_eq!(gate(s, delta, hi, form), Decision::Ambiguous);
                }
            }
        }

        #[test]
        fn delta_ignores_order(seed in any::<u64>(), n in 2usize..300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
            let a = window_of(&scores, 4096, 256).compute_delta();
            scores.shuffle(&mut rng);
            prop_assert_eq!(a, window_of(&scores, 4096, 256).compute_delta());
        }

        #[test]
        fn delta_matches_edge_oracle(seed in any::<u64>(), n in 2usize..200, bins in 2usize..64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
            let w = window_of(&scores, 4096, bins);
            if w.histogram().iter().filter(|&&c| c > 0).count() >= 2 {
                prop_assert_eq!(w.compute_delta(), edge_oracle(&scores, bins));
            }
        }

        #[test]
        fn point_masses_are_separated(a in 0usize..256, gap in 1usize..256, count in 1usize..50) {
            let b = (a + gap).min(255);
            prop_assume!(b > a);
            let xa = (a as f64 + 0.5) / 256.0;
            let xb = (b as f64 + 0.5) / 256.0;
            let mut scores = vec![xa; count];
            scores.extend(std::iter::repeat_n(xb, count));
            let d = window_of(&scores, 4096, 256).compute_delta();
            prop_assert!(d > xa && d <= xb);
        }
    }
}
