//! Versioned binary checkpoint container shared by every model kind.
//!
//! Layout (little-endian): magic `OFCP`, `u32` version, `u32` section count,
//! then per section: `u8` tag, `u32` meta length + JSON metadata bytes,
//! `u32` tensor count, and per tensor `u32` name length + name bytes,
//! `u32` rows, `u32` cols, `rows*cols` `f64` values. Values are written as
//! raw bit patterns, so round-trips are bit-exact.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::autodiff::ParameterSet;
use crate::error::{OfrlError, Result};

const MAGIC: &[u8; 4] = b"OFCP";
const VERSION: u32 = 1;

pub const TAG_BEHAVIOR_MIXTURE: u8 = 1;
pub const TAG_BEHAVIOR_LAPLACE: u8 = 2;
pub const TAG_POLICY: u8 = 3;
pub const TAG_CRITIC_OFFSET: u8 = 4;
pub const TAG_CRITIC_PLAIN: u8 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointSection {
    pub tag: u8,
    pub meta_json: String,
    pub tensors: ParameterSet,
}

pub fn write_checkpoint(path: &Path, sections: &[CheckpointSection]) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(sections.len() as u32).to_le_bytes());
    for s in sections {
        buf.push(s.tag);
        let meta = s.meta_json.as_bytes();
        buf.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        buf.extend_from_slice(meta);
        buf.extend_from_slice(&(s.tensors.len() as u32).to_le_bytes());
        for e in s.tensors.entries() {
            let name = e.name.as_bytes();
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name);
            let (r, c) = e.value.dim();
            buf.extend_from_slice(&(r as u32).to_le_bytes());
            buf.extend_from_slice(&(c as u32).to_le_bytes());
            for &v in e.value.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    off: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.off + n > self.bytes.len() {
            return Err(OfrlError::Checkpoint("unexpected end of file".into()));
        }
        let s = &self.bytes[self.off..self.off + n];
        self.off += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_checkpoint(path: &Path) -> Result<Vec<CheckpointSection>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cur = Cursor {
        bytes: &bytes,
        off: 0,
    };
    if cur.take(4)? != MAGIC {
        return Err(OfrlError::Checkpoint("bad magic, not an OFCP file".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(OfrlError::Checkpoint(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let n_sections = cur.u32()? as usize;
    let mut sections = Vec::with_capacity(n_sections);
    for _ in 0..n_sections {
        let tag = cur.u8()?;
        let meta_len = cur.u32()? as usize;
        let meta_json = String::from_utf8(cur.take(meta_len)?.to_vec())
            .map_err(|e| OfrlError::Checkpoint(format!("meta not utf-8: {e}")))?;
        let n_tensors = cur.u32()? as usize;
        let mut tensors = ParameterSet::new();
        for _ in 0..n_tensors {
            let name_len = cur.u32()? as usize;
            let name = String::from_utf8(cur.take(name_len)?.to_vec())
                .map_err(|e| OfrlError::Checkpoint(format!("name not utf-8: {e}")))?;
            let rows = cur.u32()? as usize;
            let cols = cur.u32()? as usize;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                data.push(cur.f64()?);
            }
            tensors.push(
                name,
                ndarray::Array2::from_shape_vec((rows, cols), data)
                    .map_err(|e| OfrlError::Checkpoint(format!("tensor shape: {e}")))?,
            );
        }
        sections.push(CheckpointSection {
            tag,
            meta_json,
            tensors,
        });
    }
    if cur.off != bytes.len() {
        return Err(OfrlError::Checkpoint("trailing bytes after sections".into()));
    }
    Ok(sections)
}

/// First section with the given tag, or a descriptive error.
pub fn find_section(sections: &[CheckpointSection], tag: u8) -> Result<&CheckpointSection> {
    sections
        .iter()
        .find(|s| s.tag == tag)
        .ok_or_else(|| OfrlError::Checkpoint(format!("no section with tag {tag}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn roundtrip_bit_exact() {
        let mut p = ParameterSet::new();
        p.push("w0", Array2::from_shape_fn((3, 2), |(i, j)| (i * 2 + j) as f64 * 0.1));
        p.push("b0", Array2::from_elem((3, 1), f64::MIN_POSITIVE));
        let sections = vec![
            CheckpointSection {
                tag: TAG_POLICY,
                meta_json: r#"{"arch":"test"}"#.to_string(),
                tensors: p,
            },
            CheckpointSection {
                tag: TAG_BEHAVIOR_LAPLACE,
                meta_json: r#"{"loc":0.0}"#.to_string(),
                tensors: ParameterSet::new(),
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ofcp");
        write_checkpoint(&path, &sections).unwrap();
        let back = read_checkpoint(&path).unwrap();
        assert_eq!(sections, back);
        let b1 = std::fs::read(&path).unwrap();
        write_checkpoint(&path, &back).unwrap();
        assert_eq!(b1, std::fs::read(&path).unwrap());
    }

    #[test]
    fn truncation_detected() {
        let sections = vec![CheckpointSection {
            tag: TAG_POLICY,
            meta_json: "{}".to_string(),
            tensors: ParameterSet::new(),
        }];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ofcp");
        write_checkpoint(&path, &sections).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.pop();
        std::fs::write(&path, &bytes).unwrap();
        assert!(read_checkpoint(&path).is_err());
    }
}
