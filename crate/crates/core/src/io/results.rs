//! Tab-separated per-sample results, one line per processed sample.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::engine::ScoreRecord;
use crate::error::{Error, Result};

pub const RESULTS_HEADER: &str = "#sample_id\ts_t_pre\ts_v_pre\ts_pre\tdelta\tdecision\ts_t_post\ts_v_post\ts_post\tpredicted_class\tpredicted_negative";

const COLUMNS: usize = 11;

fn score(out: &mut String, v: f64) {
    // Nine significant digits.
    let _ = write!(out, "{v:.8e}\t");
}

fn optional(out: &mut String, v: Option<usize>) {
    match v {
        Some(v) => {
            let _ = write!(out, "{v}");
        }
        None => out.push('-'),
    }
}

pub fn format_record(r: &ScoreRecord) -> String {
    let mut out = format!("{}\t", r.sample_id);
    score(&mut out, r.s_t_pre);
    score(&mut out, r.s_v_pre);
    score(&mut out, r.s_pre);
    score(&mut out, r.delta);
    let _ = write!(out, "{}\t", r.decision);
    score(&mut out, r.s_t_post);
    score(&mut out, r.s_v_post);
    score(&mut out, r.s_post);
    optional(&mut out, r.predicted_class);
    out.push('\t');
    optional(&mut out, r.predicted_negative);
    out
}

pub fn parse_record(line: &str, line_no: usize) -> Result<ScoreRecord> {
    let err = |message: String| Error::Parse { line: line_no, message };
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != COLUMNS {
        return Err(err(format!("expected {COLUMNS} columns, found {}", fields.len())));
    }
    let float = |i: usize| -> Result<f64> {
        fields[i]
            .parse::<f64>()
            .map_err(|e| err(format!("column {}: {e}", i + 1)))
    };
    let opt = |i: usize| -> Result<Option<usize>> {
        match fields[i] {
            "-" => Ok(None),
            v => v.parse().map(Some).map_err(|e| err(format!("column {}: {e}", i + 1))),
        }
    };
    Ok(ScoreRecord {
        sample_id: fields[0].parse().map_err(|e| err(format!("column 1: {e}")))?,
        s_t_pre: float(1)?,
        s_v_pre: float(2)?,
        s_pre: float(3)?,
        delta: float(4)?,
        decision: fields[5].parse().map_err(|e: String| err(format!("column 6: {e}")))?,
        s_t_post: float(6)?,
        s_v_post: float(7)?,
        s_post: float(8)?,
        predicted_class: opt(9)?,
        predicted_negative: opt(10)?,
    })
}

pub fn write_results(path: impl AsRef<Path>, records: &[ScoreRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_results_to(&mut w, records).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_results_to(w: &mut impl Write, records: &[ScoreRecord]) -> std::io::Result<()> {
    writeln!(w, "{RESULTS_HEADER}")?;
    for r in records {
        writeln!(w, "{}", format_record(r))?;
    }
    Ok(())
}

pub fn parse_results(text: &str) -> Result<Vec<ScoreRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| parse_record(l, i + 1))
        .collect()
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ScoreRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        records.push(parse_record(&line, i + 1)?);
    }
    Ok(records)
}
