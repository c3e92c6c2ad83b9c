use std::io::Write;

use coevo_core::io::RecordFlag;
use coevo_core::synth::{generate, SynthSpec, CORPUS_FILE, ID_TEXT_FILE, TEST_FILE};

use super::emit;
use crate::args::SynthArgs;
use crate::error::{CliError, CliResult};

/// Parses `a:b` into the ID fraction `a / (a + b)`.
pub(crate) fn parse_ratio(text: &str) -> CliResult<f64> {
    let bad = || CliError::Usage(format!("--ratio expects ID:OOD with positive parts, got `{text}`"));
    let (a, b) = text.split_once(':').ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(bad());
    }
    Ok(a / (a + b))
}

pub fn run(args: &SynthArgs, out: &mut impl Write) -> CliResult<()> {
    let spec = SynthSpec {
        dim: args.dim,
        id_classes: args.classes,
        ood_clusters: args.ood_clusters,
        n_samples: args.samples,
        id_fraction: parse_ratio(&args.ratio)?,
        kappa: args.kappa,
        text_noise: args.text_noise,
        corpus_per_center: args.corpus_per_center,
        corpus_spread: args.corpus_spread,
        corpus_random: args.corpus_random,
        drift_deg: args.drift,
        seed: args.seed,
    };
    let data = generate(&spec)?;
    data.write_to_dir(&args.out)?;
    let n_id = data.test.records.iter().filter(|r| r.flag == RecordFlag::Id).count();
    emit(
        out,
        format!(
            "synth id_text={} classes={} corpus={} corpus_size={} test={} samples={} n_id={} n_ood={} dim={}",
            args.out.join(ID_TEXT_FILE).display(),
            data.id_text.len(),
            args.out.join(CORPUS_FILE).display(),
            data.corpus.len(),
            args.out.join(TEST_FILE).display(),
            data.test.len(),
            n_id,
            data.test.len() - n_id,
            spec.dim,
        ),
    )
}
