//! Exact k-nearest-neighbor cosine index with a checksummed on-disk format.
//!
//! File layout, little-endian throughout:
//!
//! ```text
//! magic        8 bytes  "QASUMIDX"
//! version      u16      FORMAT_VERSION
//! dim          u16
//! count        u64
//! count records:
//!   para_id    u16 length + UTF-8 bytes
//!   doc_id     u16 length + UTF-8 bytes
//!   note_type  u8
//!   vector     dim x f32
//! crc32        u32      over every byte between the magic and the checksum
//! ```
//!
//! Components are rounded to `f32` precision on insert and carried as `f64`,
//! so a saved and reloaded index scores exactly like the one in memory.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::corpus::NoteType;
use crate::embedding::{cosine, EmbeddingVector};

pub const MAGIC: &[u8; 8] = b"QASUMIDX";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 8 + 2 + 2 + 8;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("dimension mismatch: index has {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("index is empty")]
    EmptyIndex,
    #[error("k must be positive")]
    ZeroK,
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt index {path}: {kind}: {detail}")]
    Corrupt {
        path: PathBuf,
        kind: CorruptKind,
        detail: String,
    },
    #[error("index entry {para_id:?} cannot be persisted: {reason}")]
    Unpersistable { para_id: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorruptKind {
    Magic,
    Version,
    Truncated,
    Checksum,
    Record,
}

impl std::fmt::Display for CorruptKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CorruptKind::Magic => "magic",
            CorruptKind::Version => "version",
            CorruptKind::Truncated => "truncated",
            CorruptKind::Checksum => "checksum",
            CorruptKind::Record => "record",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub para_id: String,
    pub vector: EmbeddingVector,
    pub doc_id: String,
    pub note_type: NoteType,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchHit {
    pub para_id: String,
    pub score: f64,
    pub rank: usize,
}

/// Restricts a search to entries of some note types and/or documents.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchFilter {
    pub note_types: Option<BTreeSet<NoteType>>,
    pub doc_ids: Option<HashSet<String>>,
}

impl SearchFilter {
    pub fn note_types(types: impl IntoIterator<Item = NoteType>) -> SearchFilter {
        SearchFilter {
            note_types: Some(types.into_iter().collect()),
            doc_ids: None,
        }
    }

    pub fn matches(&self, entry: &IndexEntry) -> bool {
        self.note_types.as_ref().is_none_or(|t| t.contains(&entry.note_type))
            && self.doc_ids.as_ref().is_none_or(|d| d.contains(&entry.doc_id))
    }
}

/// Entries in insertion order plus a `para_id` lookup. Readers may share an
/// index freely; `insert` and `save` take `&mut self`/`&self` accordingly.
#[derive(Debug, Clone, Default)]
pub struct VectorIndex {
    dim: Option<usize>,
    entries: Vec<IndexEntry>,
    positions: HashMap<String, usize>,
}

impl VectorIndex {
    pub fn new() -> VectorIndex {
        VectorIndex::default()
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn get(&self, para_id: &str) -> Option<&IndexEntry> {
        self.positions.get(para_id).map(|&i| &self.entries[i])
    }

    /// Adds an entry; an existing `para_id` is replaced in place. The first
    /// insert fixes the index dimension.
    pub fn insert(&mut self, mut entry: IndexEntry) -> Result<(), IndexError> {
        let rounded: Vec<f64> = entry.vector.values().iter().map(|&x| f64::from(x as f32)).collect();
        entry.vector = EmbeddingVector::new(rounded).ok_or_else(|| IndexError::Unpersistable {
            para_id: entry.para_id.clone(),
            reason: "vector component outside f32 range".into(),
        })?;
        let found = entry.vector.dim();
        match self.dim {
            Some(expected) if expected != found => return Err(IndexError::DimensionMismatch { expected, found }),
            _ => self.dim = Some(found),
        }
        match self.positions.get(&entry.para_id) {
            Some(&i) => self.entries[i] = entry,
            None => {
                self.positions.insert(entry.para_id.clone(), self.entries.len());
                self.entries.push(entry);
            }
        }
        Ok(())
    }

    /// Exact top-`k` by cosine over every matching entry. Hits are ordered
    /// by score descending, then `para_id` ascending.
    pub fn search(
        &self,
        query: &EmbeddingVector,
        k: usize,
        filter: Option<&SearchFilter>,
    ) -> Result<Vec<SearchHit>, IndexError> {
        let dim = self.dim.ok_or(IndexError::EmptyIndex)?;
        if self.entries.is_empty() {
            return Err(IndexError::EmptyIndex);
        }
        if query.dim() != dim {
            return Err(IndexError::DimensionMismatch {
                expected: dim,
                found: query.dim(),
            });
        }
        if k == 0 {
            return Err(IndexError::ZeroK);
        }

        let mut scored: Vec<(f64, &str)> = self
            .entries
            .iter()
            .filter(|e| filter.is_none_or(|f| f.matches(e)))
            .map(|e| {
                let score = cosine(query, &e.vector).expect("dimensions checked on insert");
                (score, e.para_id.as_str())
            })
            .collect();

        let order = |a: &(f64, &str), b: &(f64, &str)| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1));
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, order);
            scored.truncate(k);
        }
        scored.sort_unstable_by(order);

        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(i, (score, para_id))| SearchHit {
                para_id: para_id.to_owned(),
                score,
                rank: i + 1,
            })
            .collect())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, IndexError> {
        let dim = self.dim.unwrap_or(0);
        let dim16 = u16::try_from(dim).map_err(|_| IndexError::Unpersistable {
            para_id: String::new(),
            reason: format!("dimension {dim} exceeds u16"),
        })?;
        let mut out = Vec::with_capacity(HEADER_LEN + self.entries.len() * (dim * 4 + 32) + 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&dim16.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for entry in &self.entries {
            for field in [&entry.para_id, &entry.doc_id] {
                let len = u16::try_from(field.len()).map_err(|_| IndexError::Unpersistable {
                    para_id: entry.para_id.clone(),
                    reason: "identifier longer than 65535 bytes".into(),
                })?;
                out.extend_from_slice(&len.to_le_bytes());
                out.extend_from_slice(field.as_bytes());
            }
            out.push(entry.note_type.code());
            for &x in entry.vector.values() {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out[MAGIC.len()..]);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let bytes = self.to_bytes()?;
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|source| IndexError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        fs::write(path, bytes).map_err(|source| IndexError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<VectorIndex, IndexError> {
        let bytes = fs::read(path).map_err(|source| IndexError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        VectorIndex::from_bytes(&bytes).map_err(|(kind, detail)| IndexError::Corrupt {
            path: path.to_path_buf(),
            kind,
            detail,
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<VectorIndex, (CorruptKind, String)> {
        if bytes.len() < MAGIC.len() {
            return Err((
                CorruptKind::Truncated,
                format!("{} bytes, no room for header", bytes.len()),
            ));
        }
        if &bytes[..MAGIC.len()] != MAGIC {
            return Err((CorruptKind::Magic, "file does not start with QASUMIDX".into()));
        }
        let mut reader = Reader {
            bytes,
            pos: MAGIC.len(),
        };
        let version = reader.u16()?;
        if version != FORMAT_VERSION {
            return Err((CorruptKind::Version, format!("unsupported format version {version}")));
        }
        let dim = usize::from(reader.u16()?);
        let count = reader.u64()?;

        let mut index = VectorIndex::new();
        for n in 0..count {
            let para_id = reader.string()?;
            let doc_id = reader.string()?;
            let code = reader.u8()?;
            let note_type = NoteType::from_code(code).ok_or_else(|| {
                (
                    CorruptKind::Record,
                    format!("record {n}: unknown note type code {code}"),
                )
            })?;
            let values = (0..dim)
                .map(|_| reader.f32().map(f64::from))
                .collect::<Result<Vec<_>, _>>()?;
            let vector = EmbeddingVector::new(values)
                .ok_or_else(|| (CorruptKind::Record, format!("record {n}: empty or non-finite vector")))?;
            if index.positions.contains_key(&para_id) {
                return Err((
                    CorruptKind::Record,
                    format!("record {n}: duplicate para_id {para_id:?}"),
                ));
            }
            index
                .insert(IndexEntry {
                    para_id,
                    vector,
                    doc_id,
                    note_type,
                })
                .map_err(|e| (CorruptKind::Record, e.to_string()))?;
        }

        let payload_end = reader.pos;
        let stored = reader.u32()?;
        if reader.pos != bytes.len() {
            return Err((
                CorruptKind::Record,
                format!("{} unexpected trailing bytes", bytes.len() - reader.pos),
            ));
        }
        let actual = crc32fast::hash(&bytes[MAGIC.len()..payload_end]);
        if stored != actual {
            return Err((
                CorruptKind::Checksum,
                format!("stored crc32 {stored:08x}, computed {actual:08x}"),
            ));
        }
        if count > 0 {
            index.dim = Some(dim);
        }
        Ok(index)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], (CorruptKind, String)> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                (
                    CorruptKind::Truncated,
                    format!("needed {n} bytes at offset {}, file has {}", self.pos, self.bytes.len()),
                )
            })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], (CorruptKind, String)> {
        Ok(self.take(N)?.try_into().expect("slice length equals N"))
    }

    fn u8(&mut self) -> Result<u8, (CorruptKind, String)> {
        Ok(self.array::<1>()?[0])
    }

    fn u16(&mut self) -> Result<u16, (CorruptKind, String)> {
        self.array().map(u16::from_le_bytes)
    }

    fn u32(&mut self) -> Result<u32, (CorruptKind, String)> {
        self.array().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64, (CorruptKind, String)> {
        self.array().map(u64::from_le_bytes)
    }

    fn f32(&mut self) -> Result<f32, (CorruptKind, String)> {
        self.array().map(f32::from_le_bytes)
    }

    fn string(&mut self) -> Result<String, (CorruptKind, String)> {
        let len = usize::from(self.u16()?);
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| (CorruptKind::Record, "identifier is not UTF-8".into()))
    }
}
