//! File formats: embedding tables, per-sample results and cache snapshots.

pub mod results;
pub mod snapshot;
pub mod table;

pub use results::{parse_results, read_results, write_results, RESULTS_HEADER};
pub use snapshot::{snapshot_table, CacheSnapshot, SlotInfo};
pub use table::{
    read_table, read_table_with_warnings, write_table, EmbeddingTable, RecordFlag, TableReader,
    TableRecord,
};

use crate::engine::StreamInputs;
use crate::error::Result;
use crate::metrics::GroundTruth;

/// Assembles engine inputs from the three tables, plus the test-stream labels.
pub fn stream_inputs(
    id_text: &EmbeddingTable,
    corpus: &EmbeddingTable,
    test: &EmbeddingTable,
) -> Result<(StreamInputs, Vec<GroundTruth>)> {
    let inputs = StreamInputs {
        id_classes: id_text.labeled_embeddings()?,
        corpus: corpus.labeled_embeddings()?,
        samples: test.embeddings()?,
    };
    Ok((inputs, test.ground_truth()))
}
