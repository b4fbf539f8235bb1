//! Descriptor files.
//!
//! Two encodings carry the same logical document:
//!
//! * JSON: `{schema_version, person_id, provenance, seed, config, parts}`
//!   where `parts` is an array of part sets and each patch is
//!   `{"hsv": [40 floats], "y_pos": float}`.
//! * Binary (little-endian), see [`write_binary`].
//!
//! [`read_descriptor`] accepts either, detected from the leading bytes.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::descriptor::{
    HsvHistogram, PartSet, PatchDescriptor, PersonDescriptor, Provenance, HISTOGRAM_BINS,
};
use crate::error::{McmError, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const BINARY_MAGIC: &[u8; 4] = b"MCMD";

/// A descriptor together with the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorDocument {
    pub schema_version: u32,
    pub person_id: String,
    pub provenance: Provenance,
    pub seed: u64,
    pub config: serde_json::Value,
    pub parts: Vec<PartSet>,
}

impl DescriptorDocument {
    pub fn new(descriptor: PersonDescriptor, config: serde_json::Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            person_id: descriptor.person_id,
            provenance: descriptor.provenance,
            seed: descriptor.seed,
            config,
            parts: descriptor.parts,
        }
    }

    pub fn into_descriptor(self) -> PersonDescriptor {
        PersonDescriptor {
            person_id: self.person_id,
            provenance: self.provenance,
            seed: self.seed,
            parts: self.parts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Json,
    Binary,
}

impl Encoding {
    /// `.bin` selects the binary container, anything else JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => Encoding::Binary,
            _ => Encoding::Json,
        }
    }
}

fn check_version(found: u32) -> Result<()> {
    if found != SCHEMA_VERSION {
        return Err(McmError::SchemaVersion {
            found,
            expected: SCHEMA_VERSION,
        });
    }
    Ok(())
}

pub fn to_json(doc: &DescriptorDocument) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec(doc)?;
    out.push(b'\n');
    Ok(out)
}

pub fn from_json(bytes: &[u8]) -> Result<DescriptorDocument> {
    let value: serde_json::Value = serde_json::from_slice(bytes)?;
    let version = value
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| McmError::Format("missing schema_version".into()))?;
    check_version(u32::try_from(version).unwrap_or(u32::MAX))?;
    let doc: DescriptorDocument = serde_json::from_value(value)?;
    Ok(doc)
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

/// Binary layout:
///
/// ```text
/// magic "MCMD" | u32 schema_version
/// u32 len, utf-8 person_id | u8 provenance (0 template, 1 probe) | u64 seed
/// u32 len, utf-8 config JSON
/// u32 part_count, then per part: u32 patch_count,
///     then per patch: 40 x f64 hsv, f64 y_pos
/// ```
pub fn write_binary(doc: &DescriptorDocument, mut out: impl Write) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(BINARY_MAGIC);
    buf.extend_from_slice(&doc.schema_version.to_le_bytes());
    put_str(&mut buf, &doc.person_id);
    buf.push(match doc.provenance {
        Provenance::Template => 0,
        Provenance::Probe => 1,
    });
    buf.extend_from_slice(&doc.seed.to_le_bytes());
    put_str(&mut buf, &serde_json::to_string(&doc.config)?);
    buf.extend_from_slice(&(doc.parts.len() as u32).to_le_bytes());
    for part in &doc.parts {
        buf.extend_from_slice(&(part.len() as u32).to_le_bytes());
        for p in &part.patches {
            for b in p.hsv.bins() {
                buf.extend_from_slice(&b.to_le_bytes());
            }
            buf.extend_from_slice(&p.y_pos.to_le_bytes());
        }
    }
    out.write_all(&buf)
        .map_err(|e| McmError::Format(format!("write failed: {e}")))
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(McmError::Format("truncated binary descriptor".into()));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| McmError::Format("invalid utf-8 in binary descriptor".into()))
    }
}

pub fn read_binary(bytes: &[u8]) -> Result<DescriptorDocument> {
    let mut c = Cursor { bytes };
    if c.take(4)? != BINARY_MAGIC {
        return Err(McmError::Format("bad binary descriptor magic".into()));
    }
    let schema_version = c.u32()?;
    check_version(schema_version)?;
    let person_id = c.string()?;
    let provenance = match c.u8()? {
        0 => Provenance::Template,
        1 => Provenance::Probe,
        other => return Err(McmError::Format(format!("unknown provenance tag {other}"))),
    };
    let seed = c.u64()?;
    let config = serde_json::from_str(&c.string()?)?;
    let part_count = c.u32()? as usize;
    let mut parts = Vec::with_capacity(part_count.min(16));
    for _ in 0..part_count {
        let n = c.u32()? as usize;
        let mut patches = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let mut bins = [0.0; HISTOGRAM_BINS];
            for b in bins.iter_mut() {
                *b = c.f64()?;
            }
            let y_pos = c.f64()?;
            patches.push(PatchDescriptor::new(HsvHistogram::new(bins)?, y_pos)?);
        }
        parts.push(PartSet::new(patches));
    }
    if !c.bytes.is_empty() {
        return Err(McmError::Format(
            "trailing bytes after binary descriptor".into(),
        ));
    }
    Ok(DescriptorDocument {
        schema_version,
        person_id,
        provenance,
        seed,
        config,
        parts,
    })
}

pub fn write_descriptor(path: &Path, doc: &DescriptorDocument) -> Result<()> {
    let bytes = match Encoding::from_path(path) {
        Encoding::Json => to_json(doc)?,
        Encoding::Binary => {
            let mut buf = Vec::new();
            write_binary(doc, &mut buf)?;
            buf
        }
    };
    std::fs::write(path, bytes).map_err(|e| McmError::io(path, e))
}

pub fn read_descriptor(path: &Path) -> Result<DescriptorDocument> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| McmError::io(path, e))?;
    if bytes.starts_with(BINARY_MAGIC) {
        read_binary(&bytes)
    } else {
        from_json(&bytes)
    }
}
