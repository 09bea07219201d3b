//! Shared field file format: a JSON document with header fields and
//! row-major flat arrays, and a binary twin (`RLMF` magic, header length,
//! JSON header, little-endian `f64` arrays). Both round-trip bit-exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::DiffeoField;
use crate::grid::{Axis, FdOrder, Grid, GridSpec};
use crate::rotsym::WarpedMetric;
use crate::tensor::{sym_pairs, MetricField, SymField};

pub const FORMAT: &str = "riccilab-field";
pub const VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"RLMF";

/// What the stored arrays describe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    /// Metric on a closed chart.
    Metric,
    /// Metric on a half-domain whose boundary is the mirror at axis 0.
    HalfMetric,
    /// Reflection-symmetric metric on a doubled domain.
    DoubledMetric,
    /// Warped metric `(f, C)` on a polar axis.
    Warped,
    /// Grid map displacement.
    Diffeo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub kind: FieldKind,
    pub dim: usize,
    pub axes: Vec<Axis>,
    #[serde(default)]
    pub order: FdOrder,
    /// Array names, in storage order.
    pub fields: Vec<String>,
    /// Nodes per axis; arrays are row-major with the last axis fastest.
    pub shape: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    /// Manifold dimension of a warped metric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warped_n: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDocument {
    #[serde(flatten)]
    pub header: Header,
    pub data: Vec<Vec<f64>>,
}

fn header(kind: FieldKind, grid: &Grid, fields: Vec<String>, time: Option<f64>) -> Header {
    Header {
        format: FORMAT.into(),
        version: VERSION,
        kind,
        dim: grid.dim,
        axes: grid.axes.clone(),
        order: grid.order,
        fields,
        shape: grid.shape(),
        time: time.filter(|t| t.is_finite()),
        warped_n: None,
    }
}

impl FieldDocument {
    pub fn from_metric(g: &MetricField, kind: FieldKind, time: Option<f64>) -> FieldDocument {
        let names = sym_pairs(g.dim()).into_iter().map(|(i, j)| format!("g{i}{j}")).collect();
        FieldDocument { header: header(kind, g.grid(), names, time), data: g.sym().comps.clone() }
    }

    pub fn from_warped(w: &WarpedMetric, time: Option<f64>) -> FieldDocument {
        let mut h = header(FieldKind::Warped, &GridSpec::new(vec![w.axis]).expect("validated axis"), vec!["f".into(), "c".into()], time);
        h.warped_n = Some(w.n);
        FieldDocument { header: h, data: vec![w.f.clone(), w.c.clone()] }
    }

    pub fn from_diffeo(d: &DiffeoField) -> FieldDocument {
        let names = (0..d.grid.dim).map(|k| format!("u{k}")).collect();
        FieldDocument { header: header(FieldKind::Diffeo, &d.grid, names, Some(d.time)), data: d.u.clone() }
    }

    fn validate(&self) -> Result<Grid> {
        let h = &self.header;
        if h.format != FORMAT || h.version != VERSION {
            return Err(Error::Format(format!("unknown format {} v{}", h.format, h.version)));
        }
        if h.axes.len() != h.dim || h.fields.len() != self.data.len() {
            return Err(Error::Format(format!("{} axes / {} arrays for dim {} with {} names", h.axes.len(), self.data.len(), h.dim, h.fields.len())));
        }
        let grid = GridSpec::with_order(h.axes.clone(), h.order).map_err(|e| Error::Format(e.to_string()))?;
        if grid.shape() != h.shape {
            return Err(Error::Format(format!("shape {:?} does not match axes {:?}", h.shape, grid.shape())));
        }
        if let Some(a) = self.data.iter().position(|a| a.len() != grid.len()) {
            return Err(Error::Format(format!("array {} has {} values, expected {}", h.fields[a], self.data[a].len(), grid.len())));
        }
        Ok(grid)
    }

    pub fn to_metric(&self) -> Result<MetricField> {
        if !matches!(self.header.kind, FieldKind::Metric | FieldKind::HalfMetric | FieldKind::DoubledMetric) {
            return Err(Error::Format(format!("{:?} file is not a metric", self.header.kind)));
        }
        let grid = self.validate()?;
        if self.data.len() != sym_pairs(grid.dim).len() {
            return Err(Error::Format(format!("{} components for dim {}", self.data.len(), grid.dim)));
        }
        MetricField::new_at(SymField { grid, comps: self.data.clone() }, self.header.time.unwrap_or(f64::NAN))
    }

    pub fn to_warped(&self) -> Result<WarpedMetric> {
        let n = match (self.header.kind, self.header.warped_n) {
            (FieldKind::Warped, Some(n)) => n,
            _ => return Err(Error::Format("file is not a warped metric".into())),
        };
        let grid = self.validate()?;
        if grid.dim != 1 || self.data.len() != 2 {
            return Err(Error::Format("warped metric needs one axis and two arrays".into()));
        }
        WarpedMetric::new(grid.axes[0], n, self.data[0].clone(), self.data[1].clone())
    }

    pub fn to_diffeo(&self) -> Result<DiffeoField> {
        if self.header.kind != FieldKind::Diffeo {
            return Err(Error::Format("file is not a grid map".into()));
        }
        let grid = self.validate()?;
        if self.data.len() != grid.dim {
            return Err(Error::Format(format!("{} displacement arrays for dim {}", self.data.len(), grid.dim)));
        }
        Ok(DiffeoField { grid, u: self.data.clone(), time: self.header.time.unwrap_or(0.0) })
    }

    pub fn to_text(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_text(s: &str) -> Result<FieldDocument> {
        let doc: FieldDocument = serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn to_binary(&self) -> Result<Vec<u8>> {
        let head = serde_json::to_vec(&self.header).map_err(|e| Error::Format(e.to_string()))?;
        let mut out = Vec::with_capacity(8 + head.len() + 8 * self.data.iter().map(Vec::len).sum::<usize>());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(head.len() as u32).to_le_bytes());
        out.extend_from_slice(&head);
        for v in self.data.iter().flatten() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_binary(bytes: &[u8]) -> Result<FieldDocument> {
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(Error::Format("missing binary magic".into()));
        }
        let hl = u32::from_le_bytes(bytes[4..8].try_into().expect("four bytes")) as usize;
        let body = bytes.get(8..8 + hl).ok_or_else(|| Error::Format("truncated header".into()))?;
        let header: Header = serde_json::from_slice(body).map_err(|e| Error::Format(e.to_string()))?;
        let per: usize = header.shape.iter().product();
        let values = &bytes[8 + hl..];
        if values.len() != 8 * per * header.fields.len() {
            return Err(Error::Format(format!("{} payload bytes for {} arrays of {per}", values.len(), header.fields.len())));
        }
        let flat: Vec<f64> = values.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes"))).collect();
        let data = if per == 0 { vec![Vec::new(); header.fields.len()] } else { flat.chunks(per).map(<[f64]>::to_vec).collect() };
        let doc = FieldDocument { header, data };
        doc.validate()?;
        Ok(doc)
    }

    /// Writes text for `.json` paths and binary otherwise.
    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = if is_text(path) { self.to_text()?.into_bytes() } else { self.to_binary()? };
        std::fs::write(path, bytes)?;
        Ok(())
    }

    /// Reads either encoding, detected by the binary magic.
    pub fn read(path: &Path) -> Result<FieldDocument> {
        let bytes = std::fs::read(path)?;
        if bytes.starts_with(MAGIC) {
            FieldDocument::from_binary(&bytes)
        } else {
            FieldDocument::from_text(std::str::from_utf8(&bytes).map_err(|e| Error::Format(e.to_string()))?)
        }
    }
}

fn is_text(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_rejects_bad_magic() {
        assert!(matches!(FieldDocument::from_binary(b"XXXX0000"), Err(Error::Format(_))));
    }
}
