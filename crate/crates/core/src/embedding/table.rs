//! Binary embedding interchange format.
//!
//! Little-endian layout:
//!
//! ```text
//! b"CTE1" | u32 version (=1) | u32 dim | u64 count | u32 meta_len | meta (UTF-8)
//! count x { u16 id_len | id (UTF-8) | dim x f32 }
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CTE1";
pub const VERSION: u32 = 1;

/// Comment id -> vector map with a shared dimension. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    metadata: String,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    values: Vec<f32>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, metadata: impl Into<String>) -> Self {
        EmbeddingTable {
            dim,
            metadata: metadata.into(),
            ids: Vec::new(),
            index: HashMap::new(),
            values: Vec::new(),
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: &[f32]) -> Result<()> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if let Some(bad) = vector.iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value {bad} in vector `{id}`"
            )));
        }
        if id.len() > u16::MAX as usize {
            return Err(Error::Validation(format!(
                "id of {} bytes exceeds the 65535-byte limit",
                id.len()
            )));
        }
        if self.index.contains_key(&id) {
            return Err(Error::Validation(format!("duplicate id `{id}`")));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.values.extend_from_slice(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metadata(&self) -> &str {
        &self.metadata
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index
            .get(id)
            .map(|&i| &self.values[i * self.dim..(i + 1) * self.dim])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids
            .iter()
            .zip(self.values.chunks_exact(self.dim.max(1)))
            .map(|(id, v)| (id.as_str(), v))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        w.write_u32::<LittleEndian>(self.dim as u32)?;
        w.write_u64::<LittleEndian>(self.ids.len() as u64)?;
        w.write_u32::<LittleEndian>(self.metadata.len() as u32)?;
        w.write_all(self.metadata.as_bytes())?;
        for (id, vector) in self.iter() {
            w.write_u16::<LittleEndian>(id.len() as u16)?;
            w.write_all(id.as_bytes())?;
            for &v in vector {
                w.write_f32::<LittleEndian>(v)?;
            }
        }
        w.flush()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(truncated)?;
        if &magic != MAGIC {
            return Err(Error::Format(format!(
                "bad magic {magic:?}, expected {MAGIC:?}"
            )));
        }
        let version = r.read_u32::<LittleEndian>().map_err(truncated)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let dim = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        let count = r.read_u64::<LittleEndian>().map_err(truncated)?;
        let meta_len = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        let metadata = read_utf8(&mut r, meta_len)?;

        let mut table = EmbeddingTable::new(dim, metadata);
        let mut vector = vec![0f32; dim];
        for _ in 0..count {
            let id_len = r.read_u16::<LittleEndian>().map_err(truncated)? as usize;
            let id = read_utf8(&mut r, id_len)?;
            r.read_f32_into::<LittleEndian>(&mut vector)
                .map_err(truncated)?;
            table.insert(id, &vector)?;
        }
        let mut probe = [0u8; 1];
        match r.read(&mut probe) {
            Ok(0) => Ok(table),
            Ok(_) => Err(Error::Format("trailing bytes after last record".into())),
            Err(e) => Err(Error::Format(e.to_string())),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        EmbeddingTable::read_from(BufReader::new(file))
    }
}

fn truncated(e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::Format("truncated file".into())
    } else {
        Error::Format(e.to_string())
    }
}

fn read_utf8<R: Read>(r: &mut R, len: usize) -> Result<String> {
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(truncated)?;
    String::from_utf8(buf).map_err(|e| Error::Format(format!("invalid UTF-8: {e}")))
}
