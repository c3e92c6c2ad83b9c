use std::io::Write;

use coevo_core::io::{read_results, read_table, stream_inputs, EmbeddingTable};
use coevo_core::metrics::{summarize, text_argmax_predictions};
use coevo_core::textual::PositiveTextQueue;
use coevo_core::{fuse_post, fuse_pre, run_stream, Embedding, EngineConfig, GroundTruth, ScoreRecord};

use super::{emit, opt};
use crate::args::EvalArgs;
use crate::error::{CliError, CliResult};

/// Ground truth for each results record, matched by `sample_id`.
pub(crate) fn align(records: &[ScoreRecord], truth: &EmbeddingTable) -> CliResult<Vec<GroundTruth>> {
    let all = truth.ground_truth();
    let mut previous: Option<u64> = None;
    let mut labels = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        if previous.is_some_and(|p| r.sample_id <= p) {
            return Err(CliError::Data(format!(
                "results record {i}: sample_id {} is not increasing",
                r.sample_id
            )));
        }
        let label = all.get(r.sample_id as usize).ok_or_else(|| {
            CliError::Data(format!(
                "results record {i}: sample_id {} has no row in the truth table ({} rows)",
                r.sample_id,
                all.len()
            ))
        })?;
        labels.push(*label);
        previous = Some(r.sample_id);
    }
    if records.len() != all.len() {
        log::warn!("{} of {} truth rows have no results record", all.len() - records.len(), all.len());
    }
    Ok(labels)
}

struct Stage {
    name: &'static str,
    auroc: f64,
    fpr95: f64,
}

fn stage(name: &'static str, scores: &[f64], labels: &[GroundTruth]) -> CliResult<Stage> {
    let s = summarize(scores, labels, None)?;
    Ok(Stage {
        name,
        auroc: s.auroc,
        fpr95: s.fpr95,
    })
}

fn sweep_row(param: &str, value: f64, pre: &Stage, post: &Stage) -> String {
    format!(
        "sweep param={param} value={value:.1} auroc_pre={:.9} fpr95_pre={:.9} auroc_post={:.9} fpr95_post={:.9}",
        pre.auroc, pre.fpr95, post.auroc, post.fpr95
    )
}

pub fn run(args: &EvalArgs, out: &mut impl Write) -> CliResult<()> {
    let records = read_results(&args.results)?;
    let truth = read_table(&args.truth)?;
    let labels = align(&records, &truth)?;
    let n_id = labels.iter().filter(|l| l.is_id).count();

    let id_text = args.id_text.as_ref().map(read_table).transpose()?;
    let acc_text = match &id_text {
        Some(table) if n_id > 0 => {
            let t_p = PositiveTextQueue::new(table.labeled_embeddings()?)?;
            let samples: Vec<Embedding> = records
                .iter()
                .map(|r| truth.records[r.sample_id as usize].embedding())
                .collect::<Result<_, _>>()?;
            let preds = text_argmax_predictions(&samples, &t_p)?;
            summarize_acc(&preds, &labels)?
        }
        _ => None,
    };
    let visual_preds: Vec<Option<usize>> = records.iter().map(|r| r.predicted_class).collect();
    let acc_visual = if n_id > 0 { summarize_acc(&visual_preds, &labels)? } else { None };

    let pre: Vec<f64> = records.iter().map(|r| r.s_pre).collect();
    let post: Vec<f64> = records.iter().map(|r| r.s_post).collect();
    let stages = [stage("pre", &pre, &labels)?, stage("post", &post, &labels)?];

    let mut lines = Vec::new();
    for s in &stages {
        lines.push(format!(
            "eval stage={} auroc={:.9} fpr95={:.9} id_acc_text={} id_acc_visual={} n_id={} n_ood={}",
            s.name,
            s.auroc,
            s.fpr95,
            opt(acc_text),
            opt(acc_visual),
            n_id,
            labels.len() - n_id
        ));
    }
    lines.push(format!("{:<12}{:>12}{:>12}", "metric", "pre", "post"));
    lines.push(format!("{:<12}{:>12.6}{:>12.6}", "AUROC", stages[0].auroc, stages[1].auroc));
    lines.push(format!("{:<12}{:>12.6}{:>12.6}", "FPR95", stages[0].fpr95, stages[1].fpr95));
    lines.push(format!("{:<12}{:>12}{:>12}", "ID-ACC text", opt(acc_text), opt(acc_text)));
    lines.push(format!("{:<12}{:>12}{:>12}", "ID-ACC vis", opt(acc_visual), opt(acc_visual)));

    if args.sweep_lambda {
        for step in 1..=9 {
            let lambda = step as f64 / 10.0;
            let pre: Vec<f64> = records.iter().map(|r| fuse_pre(r.s_t_pre, r.s_v_pre, lambda)).collect();
            let post: Vec<f64> = records.iter().map(|r| fuse_post(r.s_t_post, r.s_v_post, lambda)).collect();
            lines.push(sweep_row(
                "lambda",
                lambda,
                &stage("pre", &pre, &labels)?,
                &stage("post", &post, &labels)?,
            ));
        }
    }

    if args.sweep_gamma {
        let (Some(id_text), Some(corpus_path)) = (&id_text, &args.corpus) else {
            return Err(CliError::Usage("--sweep-gamma needs --id-text and --corpus".into()));
        };
        let corpus = read_table(corpus_path)?;
        let (inputs, all_labels) = stream_inputs(id_text, &corpus, &truth)?;
        let base = args.engine.resolve()?;
        for step in 0..=10 {
            let config = EngineConfig {
                gamma: step as f64 / 10.0,
                ..base.clone()
            };
            let output = run_stream(&config, &inputs)?;
            let labels: Vec<GroundTruth> = output.records.iter().map(|r| all_labels[r.sample_id as usize]).collect();
            let pre: Vec<f64> = output.records.iter().map(|r| r.s_pre).collect();
            let post: Vec<f64> = output.records.iter().map(|r| r.s_post).collect();
            lines.push(sweep_row(
                "gamma",
                config.gamma,
                &stage("pre", &pre, &labels)?,
                &stage("post", &post, &labels)?,
            ));
        }
    }

    for line in &lines {
        emit(out, line)?;
    }
    if let Some(path) = &args.out {
        let mut text = lines.join("\n");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn summarize_acc(preds: &[Option<usize>], labels: &[GroundTruth]) -> CliResult<Option<f64>> {
    Ok(Some(coevo_core::id_acc(preds, labels)?))
}
