pub mod eval;
pub mod inspect;
pub mod run;
pub mod synth;

use std::io::Write;

use crate::error::{CliError, CliResult};

pub(crate) fn emit(out: &mut impl Write, line: impl AsRef<str>) -> CliResult<()> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| match e.kind() {
        std::io::ErrorKind::BrokenPipe => CliError::Closed,
        _ => CliError::Internal(format!("stdout: {e}")),
    })
}

pub(crate) fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"))
}

/// Nearest-rank quantile of already sorted data.
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    let i = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[i]
}
