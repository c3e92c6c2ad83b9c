use std::fs::File;
use std::io::{Read, Write};

use coevo_core::io::table::MAGIC;
use coevo_core::io::{read_results, read_table, CacheSnapshot, SlotInfo};
use coevo_core::{Decision, ScoreRecord};

use super::{emit, quantile};
use crate::args::InspectArgs;
use crate::error::{CliError, CliResult};

pub fn run(args: &InspectArgs, out: &mut impl Write) -> CliResult<()> {
    if args.buckets == 0 {
        return Err(CliError::Usage("--buckets must be at least 1".into()));
    }
    let mut magic = [0u8; 4];
    let is_table = File::open(&args.path)
        .and_then(|mut f| f.read_exact(&mut magic))
        .map(|_| magic == MAGIC)
        .unwrap_or(false);
    if is_table {
        let snap = CacheSnapshot::from_table(&read_table(&args.path)?)?;
        inspect_snapshot(&snap, args.buckets, out)
    } else {
        let records = read_results(&args.path)?;
        inspect_results(&records, args.buckets, out)
    }
}

fn side(name: &str, slots: &[SlotInfo], queues: usize, capacity: usize, out: &mut impl Write) -> CliResult<()> {
    let occupancy = CacheSnapshot::occupancy(slots, queues);
    let seeds = slots.iter().filter(|s| s.entropy.is_none()).count();
    let full = occupancy.iter().filter(|&&n| n == capacity).count();
    emit(
        out,
        format!(
            "queues side={name} queues={queues} slots={} seed_slots={seeds} full_queues={full} min_populated={} max_populated={}",
            slots.len(),
            occupancy.iter().min().copied().unwrap_or(0),
            occupancy.iter().max().copied().unwrap_or(0),
        ),
    )?;
    for populated in 1..=capacity {
        let count = occupancy.iter().filter(|&&n| n == populated).count();
        if count > 0 {
            emit(out, format!("  {name:<9} {populated:>3} populated: {count} queues"))?;
        }
    }
    let mut h = CacheSnapshot::entropies(slots);
    h.sort_by(|a, b| a.total_cmp(b));
    if h.is_empty() {
        emit(out, format!("entropy side={name} count=0"))
    } else {
        emit(
            out,
            format!(
                "entropy side={name} count={} min={:.6} p25={:.6} median={:.6} p75={:.6} max={:.6}",
                h.len(),
                h[0],
                quantile(&h, 0.25),
                quantile(&h, 0.5),
                quantile(&h, 0.75),
                h[h.len() - 1]
            ),
        )
    }
}

fn inspect_snapshot(snap: &CacheSnapshot, buckets: usize, out: &mut impl Write) -> CliResult<()> {
    let k = snap.positive_labels.len();
    let m = snap.negative_labels.len();
    let v_n = snap.negative_slots.iter().map(|s| s.queue + 1).max().unwrap_or(0);
    let initial = snap.negative_added_at.iter().filter(|a| a.is_none()).count();
    emit(
        out,
        format!(
            "snapshot queue_len={} t_p={k} t_n={m} t_n_initial={initial} t_n_added={} v_p={} v_n={v_n} v_n_matches_t_n={}",
            snap.queue_len,
            m - initial,
            snap.positive_slots.iter().map(|s| s.queue + 1).max().unwrap_or(0),
            v_n == m,
        ),
    )?;
    side("positive", &snap.positive_slots, k, snap.queue_len, out)?;
    side("negative", &snap.negative_slots, m, snap.queue_len, out)?;

    let added: Vec<u64> = snap.negative_added_at.iter().flatten().copied().collect();
    if let Some(&last) = added.iter().max() {
        let span = last + 1;
        for b in 1..=buckets as u64 {
            let upto = (span * b).div_ceil(buckets as u64);
            let count = initial + added.iter().filter(|&&a| a < upto).count();
            emit(out, format!("growth bucket={b} before_sample={upto} t_n={count}"))?;
        }
    }
    Ok(())
}

fn inspect_results(records: &[ScoreRecord], buckets: usize, out: &mut impl Write) -> CliResult<()> {
    let count = |d: Decision, rs: &[ScoreRecord]| rs.iter().filter(|r| r.decision == d).count();
    let deltas: Vec<f64> = records.iter().map(|r| r.delta).collect();
    let (lo, hi) = deltas
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    emit(
        out,
        format!(
            "trajectory records={} delta_len={} pred_id={} pred_ood={} ambiguous={} delta_first={} delta_last={} delta_min={} delta_max={}",
            records.len(),
            deltas.len(),
            count(Decision::PredId, records),
            count(Decision::PredOod, records),
            count(Decision::Ambiguous, records),
            super::opt(deltas.first().copied()),
            super::opt(deltas.last().copied()),
            super::opt(deltas.first().map(|_| lo)),
            super::opt(deltas.first().map(|_| hi)),
        ),
    )?;
    let n = records.len();
    for b in 0..buckets.min(n) {
        let (start, end) = (n * b / buckets.min(n), n * (b + 1) / buckets.min(n));
        let chunk = &records[start..end];
        let mean = chunk.iter().map(|r| r.delta).sum::<f64>() / chunk.len() as f64;
        emit(
            out,
            format!(
                "delta bucket={} start={} end={} mean={mean:.6} pred_id={} pred_ood={} ambiguous={}",
                b + 1,
                chunk[0].sample_id,
                chunk[chunk.len() - 1].sample_id,
                count(Decision::PredId, chunk),
                count(Decision::PredOod, chunk),
                count(Decision::Ambiguous, chunk),
            ),
        )?;
    }
    Ok(())
}
