//! Transition records and the versioned binary dataset container.
//!
//! On-disk layout (little-endian):
//! magic `OFRL`, `u32` version, `u32` state-dim, `u32` action-dim,
//! `u64` count, one tier tag byte, then `count` fixed-width records of
//! `f64` fields `s | a | r | s' | done`.
//!
//! Fields that have no slot in the fixed layout (spec id, generation seed,
//! behavior-policy description, normalization references) travel in a JSON
//! sidecar `<path>.meta.json`; reading requires both files and the pair
//! round-trips exactly.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NormalizationRefs;
use crate::error::{OfrlError, Result};

const MAGIC: &[u8; 4] = b"OFRL";
const VERSION: u32 = 1;

/// One `(s, a, r, s', done)` record.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Data-quality tier, mirroring the usual benchmark row names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Tier {
    Random,
    Medium,
    Expert,
    Mixed,
}

impl Tier {
    fn tag(&self) -> u8 {
        match self {
            Tier::Random => 0,
            Tier::Medium => 1,
            Tier::Expert => 2,
            Tier::Mixed => 3,
        }
    }

    fn from_tag(t: u8) -> Result<Self> {
        Ok(match t {
            0 => Tier::Random,
            1 => Tier::Medium,
            2 => Tier::Expert,
            3 => Tier::Mixed,
            other => {
                return Err(OfrlError::Dataset(format!("unknown tier tag {other}")));
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub spec_id: String,
    pub state_dim: usize,
    pub action_dim: usize,
    pub tier: Tier,
    pub generation_seed: u64,
    pub behavior_policy: String,
    pub normalization: NormalizationRefs,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub transitions: Vec<Transition>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Validate dimensional and finiteness invariants on every record.
    pub fn validate(&self) -> Result<()> {
        if self.transitions.is_empty() {
            return Err(OfrlError::Dataset("dataset is empty".into()));
        }
        let (sd, ad) = (self.meta.state_dim, self.meta.action_dim);
        for (i, t) in self.transitions.iter().enumerate() {
            if t.state.len() != sd || t.next_state.len() != sd || t.action.len() != ad {
                return Err(OfrlError::Dataset(format!(
                    "record {i}: dims do not match header ({sd}, {ad})"
                )));
            }
            let finite = t.reward.is_finite()
                && t.state.iter().all(|x| x.is_finite())
                && t.action.iter().all(|x| x.is_finite())
                && t.next_state.iter().all(|x| x.is_finite());
            if !finite {
                return Err(OfrlError::Dataset(format!("record {i}: non-finite field")));
            }
        }
        Ok(())
    }

    /// Export to CSV for inspection: `s0..,a0..,r,sp0..,done`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let sd = self.meta.state_dim;
        let ad = self.meta.action_dim;
        for i in 0..sd {
            out.push_str(&format!("s{i},"));
        }
        for i in 0..ad {
            out.push_str(&format!("a{i},"));
        }
        out.push_str("r,");
        for i in 0..sd {
            out.push_str(&format!("sp{i},"));
        }
        out.push_str("done\n");
        for t in &self.transitions {
            for v in &t.state {
                out.push_str(&format!("{v},"));
            }
            for v in &t.action {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&format!("{},", t.reward));
            for v in &t.next_state {
                out.push_str(&format!("{v},"));
            }
            out.push_str(if t.done { "1\n" } else { "0\n" });
        }
        out
    }
}

fn meta_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    std::path::PathBuf::from(s)
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    ds.validate()?;
    let mut buf: Vec<u8> = Vec::with_capacity(
        21 + ds.len() * 8 * (2 * ds.meta.state_dim + ds.meta.action_dim + 2),
    );
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(ds.meta.state_dim as u32).to_le_bytes());
    buf.extend_from_slice(&(ds.meta.action_dim as u32).to_le_bytes());
    buf.extend_from_slice(&(ds.len() as u64).to_le_bytes());
    buf.push(ds.meta.tier.tag());
    for t in &ds.transitions {
        for v in &t.state {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in &t.action {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&t.reward.to_le_bytes());
        for v in &t.next_state {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&(if t.done { 1.0f64 } else { 0.0f64 }).to_le_bytes());
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    let meta = serde_json::to_string_pretty(&ds.meta)
        .map_err(|e| OfrlError::Dataset(format!("meta serialization: {e}")))?;
    fs::write(meta_path(path), meta)?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 25 {
        return Err(OfrlError::Dataset("file too short for header".into()));
    }
    if &bytes[0..4] != MAGIC {
        return Err(OfrlError::Dataset("bad magic, not an OFRL dataset".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(OfrlError::Dataset(format!(
            "unsupported dataset version {version} (expected {VERSION})"
        )));
    }
    let state_dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let action_dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let tier = Tier::from_tag(bytes[24])?;
    let record_f64s = 2 * state_dim + action_dim + 2;
    let expected = 25 + count * record_f64s * 8;
    if bytes.len() != expected {
        return Err(OfrlError::Dataset(format!(
            "truncated or oversized file: {} bytes, header implies {expected}",
            bytes.len()
        )));
    }

    let meta_file = meta_path(path);
    let meta: DatasetMeta = {
        let text = fs::read_to_string(&meta_file).map_err(|e| {
            OfrlError::Dataset(format!("missing sidecar {}: {e}", meta_file.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| OfrlError::Dataset(format!("sidecar parse: {e}")))?
    };
    if meta.state_dim != state_dim || meta.action_dim != action_dim || meta.tier != tier {
        return Err(OfrlError::Dataset(
            "sidecar metadata disagrees with binary header".into(),
        ));
    }

    let mut transitions = Vec::with_capacity(count);
    let mut off = 25;
    let take = |n: usize, off: &mut usize| {
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            v.push(f64::from_le_bytes(bytes[*off..*off + 8].try_into().unwrap()));
            *off += 8;
        }
        v
    };
    for _ in 0..count {
        let state = take(state_dim, &mut off);
        let action = take(action_dim, &mut off);
        let reward = take(1, &mut off)[0];
        let next_state = take(state_dim, &mut off);
        let done = take(1, &mut off)[0] != 0.0;
        transitions.push(Transition {
            state,
            action,
            reward,
            next_state,
            done,
        });
    }
    let ds = Dataset { meta, transitions };
    ds.validate()?;
    Ok(ds)
}
