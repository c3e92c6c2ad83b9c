use std::io::Write;

use coevo_core::io::{read_table_with_warnings, snapshot_table, stream_inputs, write_results, write_table};
use coevo_core::run_stream_with_state;

use super::emit;
use crate::args::RunArgs;
use crate::error::CliResult;

pub fn run(args: &RunArgs, out: &mut impl Write) -> CliResult<()> {
    let config = args.engine.resolve()?;
    let mut warnings = 0;
    let mut load = |path: &std::path::Path| -> CliResult<_> {
        let (table, w) = read_table_with_warnings(path)?;
        warnings += w;
        Ok(table)
    };
    let id_text = load(&args.inputs.id_text)?;
    let corpus = load(&args.inputs.corpus)?;
    let test = load(&args.inputs.test)?;
    let (inputs, _) = stream_inputs(&id_text, &corpus, &test)?;

    emit(out, format!("config {}", config.echo()))?;
    let (output, engine) = run_stream_with_state(&config, &inputs)?;
    write_results(&args.out, &output.records)?;
    if let Some(path) = &args.snapshot {
        write_table(path, &snapshot_table(&engine))?;
    }
    let initial = engine.negative().added_at().iter().filter(|a| a.is_none()).count();
    emit(
        out,
        format!(
            "run records={} skipped={} negatives_initial={} negatives_final={} norm_warnings={} results={}",
            output.records.len(),
            output.skipped.len(),
            initial,
            engine.negative().len(),
            warnings,
            args.out.display(),
        ),
    )
}
