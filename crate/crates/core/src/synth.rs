//! Seeded synthetic benchmark: clustered ID/OOD embeddings, text anchors and a
//! distractor corpus, with optional gradual rotation of the test stream.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::io::table::{write_table, EmbeddingTable, RecordFlag};
use crate::numeric::{dot, Embedding};

/// Largest cosine allowed between any two cluster centers.
pub const MAX_CENTER_COSINE: f64 = 0.5;
const MAX_ATTEMPTS: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub dim: usize,
    pub id_classes: usize,
    pub ood_clusters: usize,
    /// Total test samples.
    pub n_samples: usize,
    /// Fraction of test samples drawn from ID classes.
    pub id_fraction: f64,
    /// Cluster concentration: sample noise has variance `1 / kappa` per coordinate.
    pub kappa: f64,
    /// Norm of the noise separating each class text anchor from its cluster center.
    pub text_noise: f64,
    /// Corpus entries generated around every cluster center.
    pub corpus_per_center: usize,
    /// Extra noise norm of those corpus entries, on top of `text_noise`.
    pub corpus_spread: f64,
    /// Corpus entries drawn uniformly on the sphere.
    pub corpus_random: usize,
    /// Test sample `i` is rotated by `drift_deg * i / 100` degrees in a fixed plane.
    pub drift_deg: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            dim: 64,
            id_classes: 10,
            ood_clusters: 5,
            n_samples: 2000,
            id_fraction: 0.5,
            kappa: 40.0,
            text_noise: 1.4,
            corpus_per_center: 20,
            corpus_spread: 2.0,
            corpus_random: 10_000,
            drift_deg: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Synth(m.to_string()));
        if self.dim < 2 {
            return fail("dim must be at least 2");
        }
        if self.id_classes == 0 {
            return fail("need at least one ID class");
        }
        if !(0.0..=1.0).contains(&self.id_fraction) {
            return fail("id_fraction must lie in [0, 1]");
        }
        if self.ood_clusters == 0 && self.id_fraction < 1.0 && self.n_samples > 0 {
            return fail("OOD samples requested without OOD clusters");
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return fail("kappa must be positive");
        }
        if self.text_noise < 0.0 || self.corpus_spread < 0.0 || !self.drift_deg.is_finite() {
            return fail("noise levels must be non-negative and drift finite");
        }
        Ok(())
    }

    /// Number of ID samples in the test stream.
    pub fn n_id(&self) -> usize {
        (self.n_samples as f64 * self.id_fraction).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthData {
    pub id_text: EmbeddingTable,
    pub corpus: EmbeddingTable,
    pub test: EmbeddingTable,
}

pub const ID_TEXT_FILE: &str = "id_text.cevt";
pub const CORPUS_FILE: &str = "corpus.cevt";
pub const TEST_FILE: &str = "test.cevt";

impl SynthData {
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_table(dir.join(ID_TEXT_FILE), &self.id_text)?;
        write_table(dir.join(CORPUS_FILE), &self.corpus)?;
        write_table(dir.join(TEST_FILE), &self.test)
    }
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, std: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| std * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn random_direction(rng: &mut ChaCha8Rng, dim: usize) -> Result<Embedding> {
    for _ in 0..MAX_ATTEMPTS {
        if let Ok(e) = Embedding::new(gaussian(rng, dim, 1.0)) {
            return Ok(e);
        }
    }
    Err(Error::Synth("could not draw a random direction".into()))
}

/// `center + noise`, renormalized; `noise_std` is per coordinate.
fn perturb(rng: &mut ChaCha8Rng, center: &Embedding, noise_std: f64) -> Result<Embedding> {
    let noise = Normal::new(0.0, noise_std).map_err(|e| Error::Synth(e.to_string()))?;
    for _ in 0..MAX_ATTEMPTS {
        let v: Vec<f64> = center.iter().map(|c| c + noise.sample(rng)).collect();
        if let Ok(e) = Embedding::new(v) {
            return Ok(e);
        }
    }
    Err(Error::Synth("perturbation collapsed to zero".into()))
}

fn draw_centers(rng: &mut ChaCha8Rng, dim: usize, count: usize) -> Result<Vec<Embedding>> {
    let mut centers: Vec<Embedding> = Vec::with_capacity(count);
    while centers.len() < count {
        let mut accepted = false;
        for _ in 0..MAX_ATTEMPTS {
            let c = random_direction(rng, dim)?;
            if centers.iter().all(|o| dot(o, &c) <= MAX_CENTER_COSINE) {
                centers.push(c);
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::Synth(format!(
                "cannot place {count} centers in dimension {dim} with pairwise cosine <= {MAX_CENTER_COSINE}; use fewer classes or clusters, or a larger dimension"
            )));
        }
    }
    Ok(centers)
}

/// A rotation of the plane spanned by two orthonormal vectors.
struct PlaneRotation {
    u: Vec<f64>,
    w: Vec<f64>,
}

impl PlaneRotation {
    fn random(rng: &mut ChaCha8Rng, dim: usize) -> Result<Self> {
        let u = random_direction(rng, dim)?.into_inner();
        for _ in 0..MAX_ATTEMPTS {
            let v = gaussian(rng, dim, 1.0);
            let proj = dot(&u, &v);
            let w: Vec<f64> = v.iter().zip(&u).map(|(v, u)| v - proj * u).collect();
            if let Ok(w) = Embedding::new(w) {
                return Ok(PlaneRotation { u, w: w.into_inner() });
            }
        }
        Err(Error::Synth("could not draw a rotation plane".into()))
    }

    fn apply(&self, x: &Embedding, radians: f64) -> Result<Embedding> {
        let a = dot(x, &self.u);
        let b = dot(x, &self.w);
        let (sin, cos) = radians.sin_cos();
        let da = a * cos - b * sin - a;
        let db = a * sin + b * cos - b;
        let v: Vec<f64> = x
            .iter()
            .zip(self.u.iter().zip(&self.w))
            .map(|(x, (u, w))| x + da * u + db * w)
            .collect();
        Embedding::new(v)
    }
}

pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dim = spec.dim;
    let centers = draw_centers(&mut rng, dim, spec.id_classes + spec.ood_clusters)?;
    let (id_centers, ood_centers) = centers.split_at(spec.id_classes);
    let per_coord = |norm: f64| norm / (dim as f64).sqrt();
    let sample_std = (1.0 / spec.kappa).sqrt();

    let mut id_text = EmbeddingTable::new(dim as u32);
    for (k, c) in id_centers.iter().enumerate() {
        let anchor = if spec.text_noise > 0.0 {
            perturb(&mut rng, c, per_coord(spec.text_noise))?
        } else {
            c.clone()
        };
        id_text.push(RecordFlag::Unlabeled, Some(k as u32), format!("class{k}"), &anchor);
    }

    let mut corpus = EmbeddingTable::new(dim as u32);
    let mut word = 0usize;
    // Corpus words are text too, so they carry the anchors' noise plus their own.
    let word_noise = spec.text_noise.hypot(spec.corpus_spread);
    for c in &centers {
        for _ in 0..spec.corpus_per_center {
            let e = if word_noise > 0.0 {
                perturb(&mut rng, c, per_coord(word_noise))?
            } else {
                c.clone()
            };
            corpus.push(RecordFlag::Unlabeled, None, format!("word{word}"), &e);
            word += 1;
        }
    }
    for _ in 0..spec.corpus_random {
        let e = random_direction(&mut rng, dim)?;
        corpus.push(RecordFlag::Unlabeled, None, format!("word{word}"), &e);
        word += 1;
    }

    let n_id = spec.n_id();
    // `Some(k)` for ID class k, `None` for OOD.
    let mut order: Vec<Option<usize>> = (0..n_id)
        .map(|i| Some(i % spec.id_classes))
        .chain((n_id..spec.n_samples).map(|_| None))
        .collect();
    order.shuffle(&mut rng);
    let rotation = PlaneRotation::random(&mut rng, dim)?;

    let mut test = EmbeddingTable::new(dim as u32);
    for (i, slot) in order.into_iter().enumerate() {
        let (center, flag, class, label) = match slot {
            Some(k) => (&id_centers[k], RecordFlag::Id, Some(k as u32), format!("id{k}")),
            None => {
                let c = rng.gen_range(0..spec.ood_clusters);
                (&ood_centers[c], RecordFlag::Ood, None, format!("ood{c}"))
            }
        };
        let mut x = perturb(&mut rng, center, sample_std)?;
        if spec.drift_deg != 0.0 {
            x = rotation.apply(&x, (spec.drift_deg * i as f64 / 100.0).to_radians())?;
        }
        test.push(flag, class, label, &x);
    }

    Ok(SynthData {
        id_text,
        corpus,
        test,
    })
}
