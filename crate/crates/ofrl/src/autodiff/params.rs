use ndarray::Array2;

use super::tape::{Node, Tape};
use crate::error::{OfrlError, Result};

/// A named tensor with its current value. Parameters live outside any tape;
/// each training step binds them onto a fresh tape as parameter leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub value: Array2<f64>,
}

/// Ordered, named collection of parameter tensors. The entry count and
/// shapes are fixed after construction; only values change.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterSet {
    entries: Vec<ParamEntry>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: Array2<f64>) {
        self.entries.push(ParamEntry {
            name: name.into(),
            value,
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn entry(&self, i: usize) -> &ParamEntry {
        &self.entries[i]
    }

    pub fn value_mut(&mut self, i: usize) -> &mut Array2<f64> {
        &mut self.entries[i].value
    }

    /// Total scalar count across all tensors.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    /// Merge another set under a name prefix, e.g. `o1.` + `w0` -> `o1.w0`.
    pub fn merge_prefixed(&mut self, prefix: &str, other: &ParameterSet) {
        for e in &other.entries {
            self.push(format!("{prefix}{}", e.name), e.value.clone());
        }
    }

    /// Split out the entries under a prefix, stripping it.
    pub fn extract_prefixed(&self, prefix: &str) -> ParameterSet {
        let mut out = ParameterSet::new();
        for e in &self.entries {
            if let Some(stripped) = e.name.strip_prefix(prefix) {
                out.push(stripped, e.value.clone());
            }
        }
        out
    }

    /// Bind every tensor onto `tape` as a parameter leaf, preserving order.
    pub fn bind(&self, tape: &Tape) -> BoundParams {
        BoundParams {
            nodes: self
                .entries
                .iter()
                .map(|e| tape.parameter(e.value.clone()))
                .collect(),
        }
    }

    /// Bind as constants: values participate in the forward pass but no
    /// gradient ever flows to them (frozen networks).
    pub fn bind_const(&self, tape: &Tape) -> BoundParams {
        BoundParams {
            nodes: self
                .entries
                .iter()
                .map(|e| tape.constant(e.value.clone()))
                .collect(),
        }
    }

    /// In-place elementwise affine update: `p <- a * p + b * other`.
    /// Shapes must agree entry-for-entry (Polyak averaging, SGD steps).
    pub fn affine_update(&mut self, a: f64, b: f64, other: &ParameterSet) -> Result<()> {
        if self.entries.len() != other.entries.len() {
            return Err(OfrlError::ShapeMismatch {
                context: "affine_update",
                expected: format!("{} tensors", self.entries.len()),
                got: format!("{} tensors", other.entries.len()),
            });
        }
        for (e, o) in self.entries.iter_mut().zip(&other.entries) {
            if e.value.dim() != o.value.dim() {
                return Err(OfrlError::ShapeMismatch {
                    context: "affine_update",
                    expected: format!("{:?}", e.value.dim()),
                    got: format!("{:?}", o.value.dim()),
                });
            }
            e.value.zip_mut_with(&o.value, |x, &y| *x = a * *x + b * y);
        }
        Ok(())
    }

    /// FNV-1a hash over the exact f64 bit patterns; used by tests asserting
    /// that an update path never touched a parameter set.
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        for e in &self.entries {
            eat(e.name.as_bytes());
            for &v in e.value.iter() {
                eat(&v.to_bits().to_le_bytes());
            }
        }
        h
    }
}

/// Parameter leaves bound to one tape, in `ParameterSet` order.
pub struct BoundParams {
    pub nodes: Vec<Node>,
}

impl BoundParams {
    pub fn node(&self, i: usize) -> Node {
        self.nodes[i]
    }
}
