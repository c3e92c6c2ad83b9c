//! Binary embedding tables.
//!
//! ```text
//! header (20 bytes)
//!   magic        4 bytes  "CEVT"
//!   version      u32 LE   1
//!   dim          u32 LE
//!   count        u64 LE
//! record (repeated `count` times)
//!   flag         u8       0 = OOD, 1 = ID, 2 = unlabeled / text
//!   class_index  u32 LE   0xFFFF_FFFF when absent
//!   label_len    u16 LE
//!   label        label_len bytes of UTF-8
//!   vector       dim x f32 LE
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::GroundTruth;
use crate::numeric::Embedding;
use crate::textual::LabeledEmbedding;

pub const MAGIC: [u8; 4] = *b"CEVT";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 20;
pub const NO_CLASS: u32 = u32::MAX;
/// Largest dimension the reader accepts.
pub const MAX_DIM: u32 = 1 << 20;

/// Norm deviation above which the loader warns (vectors are renormalized on use).
pub const NORM_WARN: f64 = 1e-3;
/// Norm deviation above which the loader rejects the record.
pub const NORM_REJECT: f64 = 1e-1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum RecordFlag {
    Ood = 0,
    Id = 1,
    Unlabeled = 2,
}

impl TryFrom<u8> for RecordFlag {
    type Error = u8;

    fn try_from(v: u8) -> std::result::Result<Self, u8> {
        match v {
            0 => Ok(RecordFlag::Ood),
            1 => Ok(RecordFlag::Id),
            2 => Ok(RecordFlag::Unlabeled),
            other => Err(other),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableRecord {
    pub flag: RecordFlag,
    pub class_index: Option<u32>,
    pub label: String,
    pub vector: Vec<f32>,
}

impl TableRecord {
    pub fn embedding(&self) -> Result<Embedding> {
        Embedding::from_f32(&self.vector)
    }

    pub fn labeled_embedding(&self) -> Result<LabeledEmbedding> {
        LabeledEmbedding::new(self.label.clone(), self.embedding()?)
    }

    pub fn ground_truth(&self) -> GroundTruth {
        match self.flag {
            RecordFlag::Id => GroundTruth {
                is_id: true,
                class_index: self.class_index.map(|c| c as usize),
            },
            _ => GroundTruth::ood(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub dim: u32,
    pub records: Vec<TableRecord>,
}

impl EmbeddingTable {
    pub fn new(dim: u32) -> Self {
        EmbeddingTable {
            dim,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, flag: RecordFlag, class_index: Option<u32>, label: impl Into<String>, embedding: &Embedding) {
        self.records.push(TableRecord {
            flag,
            class_index,
            label: label.into(),
            vector: embedding.to_f32(),
        });
    }

    pub fn labeled_embeddings(&self) -> Result<Vec<LabeledEmbedding>> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.labeled_embedding().map_err(|e| Error::Record {
                    index: i,
                    source: Box::new(e),
                })
            })
            .collect()
    }

    pub fn embeddings(&self) -> Result<Vec<Embedding>> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.embedding().map_err(|e| Error::Record {
                    index: i,
                    source: Box::new(e),
                })
            })
            .collect()
    }

    pub fn ground_truth(&self) -> Vec<GroundTruth> {
        self.records.iter().map(TableRecord::ground_truth).collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::with_capacity(HEADER_LEN as usize + self.records.len() * (11 + 4 * self.dim as usize));
        write_to(&mut buf, self).map_err(|e| match e {
            WriteError::Invalid(e) => e,
            WriteError::Io(e) => Error::contract(e.to_string()),
        })?;
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Ok(read_from(bytes, true)?.0)
    }
}

enum WriteError {
    Invalid(Error),
    Io(io::Error),
}

impl From<io::Error> for WriteError {
    fn from(e: io::Error) -> Self {
        WriteError::Io(e)
    }
}

fn write_to(w: &mut impl Write, table: &EmbeddingTable) -> std::result::Result<(), WriteError> {
    let invalid = |msg: String| WriteError::Invalid(Error::contract(msg));
    if table.dim == 0 || table.dim > MAX_DIM {
        return Err(invalid(format!("table dimension {} outside 1..={MAX_DIM}", table.dim)));
    }
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&table.dim.to_le_bytes())?;
    w.write_all(&(table.records.len() as u64).to_le_bytes())?;
    for (i, r) in table.records.iter().enumerate() {
        if r.vector.len() != table.dim as usize {
            return Err(invalid(format!(
                "record {i} has dimension {}, table has {}",
                r.vector.len(),
                table.dim
            )));
        }
        let label_len = u16::try_from(r.label.len())
            .map_err(|_| invalid(format!("record {i} label exceeds 65535 bytes")))?;
        let class = match (r.flag, r.class_index) {
            (_, Some(NO_CLASS)) => return Err(invalid(format!("record {i} uses the reserved class index"))),
            (RecordFlag::Id, None) => return Err(invalid(format!("record {i} is ID but has no class index"))),
            (_, c) => c.unwrap_or(NO_CLASS),
        };
        w.write_all(&[r.flag as u8])?;
        w.write_all(&class.to_le_bytes())?;
        w.write_all(&label_len.to_le_bytes())?;
        w.write_all(r.label.as_bytes())?;
        for x in &r.vector {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_table(path: impl AsRef<Path>, table: &EmbeddingTable) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    match write_to(&mut w, table) {
        Ok(()) => w.flush().map_err(|e| Error::io(path, e)),
        Err(WriteError::Invalid(e)) => Err(e),
        Err(WriteError::Io(e)) => Err(Error::io(path, e)),
    }
}

/// Streaming record reader. Tracks the byte offset for error messages.
pub struct TableReader<R> {
    inner: R,
    offset: u64,
    dim: u32,
    remaining: u64,
    index: u64,
    keep_labels: bool,
    warnings: usize,
    finished: bool,
}

fn format_err(offset: u64, message: impl Into<String>) -> Error {
    Error::Format {
        offset,
        message: message.into(),
    }
}

impl<R: Read> TableReader<R> {
    /// Reads and validates the header.
    pub fn new(mut inner: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN as usize];
        read_exact_at(&mut inner, &mut header, 0, "header")?;
        if header[0..4] != MAGIC {
            return Err(format_err(0, format!("bad magic {:?}", &header[0..4])));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(format_err(4, format!("unsupported version {version}")));
        }
        let dim = u32::from_le_bytes(header[8..12].try_into().unwrap());
        if dim == 0 || dim > MAX_DIM {
            return Err(format_err(8, format!("dimension {dim} outside 1..={MAX_DIM}")));
        }
        let count = u64::from_le_bytes(header[12..20].try_into().unwrap());
        Ok(TableReader {
            inner,
            offset: HEADER_LEN,
            dim,
            remaining: count,
            index: 0,
            keep_labels: true,
            warnings: 0,
            finished: false,
        })
    }

    /// When false, label bytes are skipped and records carry an empty label.
    pub fn keep_labels(mut self, keep: bool) -> Self {
        self.keep_labels = keep;
        self
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn remaining(&self) -> u64 {
        self.remaining
    }

    /// Records whose norm needed more than [`NORM_WARN`] of correction so far.
    pub fn warnings(&self) -> usize {
        self.warnings
    }

    fn take(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        read_exact_at(&mut self.inner, buf, self.offset, what)?;
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn read_record(&mut self) -> Result<TableRecord> {
        let start = self.offset;
        let mut fixed = [0u8; 7];
        self.take(&mut fixed, "record header")?;
        let flag = RecordFlag::try_from(fixed[0])
            .map_err(|v| format_err(start, format!("invalid flag {v}")))?;
        let class = u32::from_le_bytes(fixed[1..5].try_into().unwrap());
        let class_index = (class != NO_CLASS).then_some(class);
        if flag == RecordFlag::Id && class_index.is_none() {
            return Err(format_err(start + 1, "ID record without a class index"));
        }
        let label_len = u16::from_le_bytes(fixed[5..7].try_into().unwrap()) as usize;
        let label_at = self.offset;
        let mut label_bytes = vec![0u8; label_len];
        self.take(&mut label_bytes, "label")?;
        let label = if self.keep_labels {
            String::from_utf8(label_bytes).map_err(|_| format_err(label_at, "label is not valid UTF-8"))?
        } else {
            String::new()
        };
        let vector_at = self.offset;
        let mut raw = vec![0u8; 4 * self.dim as usize];
        self.take(&mut raw, "vector")?;
        let vector: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(format_err(vector_at, "vector has a non-finite component"));
        }
        let norm = vector.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
        let deviation = (norm - 1.0).abs();
        if deviation > NORM_REJECT {
            return Err(format_err(vector_at, format!("vector norm {norm} is not close to 1")));
        }
        if deviation > NORM_WARN {
            self.warnings += 1;
            log::warn!("record at byte {start}: norm {norm:.6} renormalized");
        }
        Ok(TableRecord {
            flag,
            class_index,
            label,
            vector,
        })
    }

    /// Confirms there is nothing after the last record.
    fn check_trailing(&mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        loop {
            match self.inner.read(&mut probe) {
                Ok(0) => return Ok(()),
                Ok(_) => return Err(format_err(self.offset, "trailing bytes after last record")),
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(format_err(self.offset, e.to_string())),
            }
        }
    }
}

impl<R: Read> Iterator for TableReader<R> {
    type Item = Result<TableRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        if self.remaining == 0 {
            self.finished = true;
            return self.check_trailing().err().map(Err);
        }
        self.remaining -= 1;
        let index = self.index;
        self.index += 1;
        let record = self.read_record().map_err(|e| match e {
            Error::Format { offset, message } => Error::Format {
                offset,
                message: format!("record {index}: {message}"),
            },
            other => other,
        });
        if record.is_err() {
            self.finished = true;
        }
        Some(record)
    }
}

fn read_exact_at(r: &mut impl Read, buf: &mut [u8], offset: u64, what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => format_err(offset, format!("truncated {what}")),
        _ => format_err(offset, e.to_string()),
    })
}

fn read_from(r: impl Read, keep_labels: bool) -> Result<(EmbeddingTable, usize)> {
    let mut reader = TableReader::new(r)?.keep_labels(keep_labels);
    let dim = reader.dim();
    // Cap the pre-allocation; a corrupt count must not trigger a huge allocation.
    let mut records = Vec::with_capacity(reader.remaining().min(1 << 16) as usize);
    for record in reader.by_ref() {
        records.push(record?);
    }
    Ok((EmbeddingTable { dim, records }, reader.warnings()))
}

/// Loads a table, returning the number of records that needed renormalization.
pub fn read_table_with_warnings(path: impl AsRef<Path>) -> Result<(EmbeddingTable, usize)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_from(BufReader::new(file), true)
}

pub fn read_table(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    read_table_with_warnings(path).map(|(t, _)| t)
}
