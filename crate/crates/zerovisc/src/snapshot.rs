//! Field snapshot files.
//!
//! Layout (version 1):
//!
//! ```text
//! magic   8 bytes  "HSFIELD\0"
//! version u32 LE
//! hlen    u32 LE   length of the JSON header in bytes
//! header  hlen bytes of UTF-8 JSON (SnapshotHeader)
//! payload for each field in header order, nmodes * ny complex
//!         coefficients as (re, im) f64 LE, mode-major
//! ```
//!
//! A trajectory is a directory of snapshots plus `index.json` listing
//! `(t, file)` pairs in time order.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{SpectralField, VectorField, C};
use crate::grid::{Grid, GridSpec};

pub const MAGIC: &[u8; 8] = b"HSFIELD\0";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub grid: GridSpec,
    pub t: f64,
    pub fields: Vec<String>,
    /// Free-form scalars (for example `eps`).
    #[serde(default)]
    pub meta: BTreeMap<String, f64>,
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub fields: Vec<SpectralField>,
    pub meta: BTreeMap<String, f64>,
}

impl Snapshot {
    pub fn new(t: f64, fields: Vec<SpectralField>) -> Snapshot {
        Snapshot { t, fields, meta: BTreeMap::new() }
    }

    pub fn with_meta(mut self, key: &str, value: f64) -> Snapshot {
        self.meta.insert(key.to_string(), value);
        self
    }

    pub fn field(&self, name: &str) -> Option<&SpectralField> {
        self.fields.iter().find(|f| f.name() == name)
    }

    /// Velocity stored as `u0[, u1], v`.
    pub fn from_velocity(t: f64, u: &VectorField) -> Snapshot {
        let mut fields: Vec<SpectralField> =
            u.h.iter().enumerate().map(|(i, f)| f.clone().with_name(&format!("u{i}"))).collect();
        fields.push(u.v.clone().with_name("v"));
        Snapshot::new(t, fields)
    }

    pub fn velocity(&self) -> Result<VectorField> {
        let v = self.field("v").ok_or_else(|| Error::Format("no `v` field".into()))?;
        let d = v.grid().d();
        let h = (0..d)
            .map(|i| self.field(&format!("u{i}")).cloned().ok_or_else(|| Error::Format(format!("no `u{i}` field"))))
            .collect::<Result<_>>()?;
        Ok(VectorField { h, v: v.clone() })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let first = self.fields.first().ok_or_else(|| Error::Format("snapshot without fields".into()))?;
        let grid = first.grid().clone();
        for f in &self.fields[1..] {
            first.same_grid(f)?;
        }
        let header = SnapshotHeader {
            grid: grid.spec().clone(),
            t: self.t,
            fields: self.fields.iter().map(|f| f.name().to_string()).collect(),
            meta: self.meta.clone(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
        let mut out = Vec::with_capacity(16 + json.len() + 16 * self.fields.len() * first.coeffs().len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for f in &self.fields {
            for c in f.coeffs() {
                out.extend_from_slice(&c.re.to_le_bytes());
                out.extend_from_slice(&c.im.to_le_bytes());
            }
        }
        Ok(out)
    }

    /// Decode; `grid` is reused when its spec matches the header, so fields
    /// from several files can be combined.
    pub fn from_bytes(bytes: &[u8], grid: Option<&Arc<Grid>>) -> Result<Snapshot> {
        let take = |from: usize, n: usize| -> Result<&[u8]> {
            bytes.get(from..from + n).ok_or_else(|| Error::Format("truncated snapshot".into()))
        };
        if take(0, 8)? != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = u32::from_le_bytes(take(8, 4)?.try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let hlen = u32::from_le_bytes(take(12, 4)?.try_into().unwrap()) as usize;
        let header: SnapshotHeader =
            serde_json::from_slice(take(16, hlen)?).map_err(|e| Error::Format(format!("header: {e}")))?;
        let grid = match grid {
            Some(g) if *g.spec() == header.grid => g.clone(),
            _ => header.grid.build()?,
        };
        let n = grid.nmodes() * grid.ny();
        let mut pos = 16 + hlen;
        if bytes.len() != pos + 16 * n * header.fields.len() {
            return Err(Error::Format(format!(
                "payload is {} bytes, expected {}",
                bytes.len() - pos.min(bytes.len()),
                16 * n * header.fields.len()
            )));
        }
        let mut fields = Vec::with_capacity(header.fields.len());
        for name in &header.fields {
            let data: Vec<C> = (0..n)
                .map(|i| {
                    let b = &bytes[pos + 16 * i..pos + 16 * i + 16];
                    C::new(f64::from_le_bytes(b[..8].try_into().unwrap()), f64::from_le_bytes(b[8..].try_into().unwrap()))
                })
                .collect();
            pos += 16 * n;
            fields.push(SpectralField::from_coeffs(&grid, data, name)?);
        }
        Ok(Snapshot { t: header.t, fields, meta: header.meta })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::File::create(path)?.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: &Path, grid: Option<&Arc<Grid>>) -> Result<Snapshot> {
        let mut buf = Vec::new();
        fs::File::open(path)?.read_to_end(&mut buf)?;
        Snapshot::from_bytes(&buf, grid)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub t: f64,
    pub file: String,
}

/// Directory of snapshots with an `index.json`.
#[derive(Debug)]
pub struct Trajectory {
    dir: PathBuf,
    entries: Vec<IndexEntry>,
}

impl Trajectory {
    /// Start an empty trajectory in `dir` (created if needed).
    pub fn create(dir: &Path) -> Result<Trajectory> {
        fs::create_dir_all(dir)?;
        let t = Trajectory { dir: dir.to_path_buf(), entries: Vec::new() };
        t.write_index()?;
        Ok(t)
    }

    pub fn open(dir: &Path) -> Result<Trajectory> {
        let text = fs::read_to_string(dir.join("index.json"))?;
        let entries: Vec<IndexEntry> = serde_json::from_str(&text).map_err(|e| Error::Format(format!("index: {e}")))?;
        if entries.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::Format("index times are not increasing".into()));
        }
        Ok(Trajectory { dir: dir.to_path_buf(), entries })
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, snap: &Snapshot) -> Result<()> {
        if let Some(last) = self.entries.last() {
            if snap.t <= last.t {
                return Err(Error::Format(format!("snapshot time {} not after {}", snap.t, last.t)));
            }
        }
        let file = format!("snap_{:06}.hsf", self.entries.len());
        snap.write(&self.dir.join(&file))?;
        self.entries.push(IndexEntry { t: snap.t, file });
        self.write_index()
    }

    pub fn load(&self, i: usize, grid: Option<&Arc<Grid>>) -> Result<Snapshot> {
        let e = self.entries.get(i).ok_or_else(|| Error::Format(format!("no snapshot {i}")))?;
        Snapshot::read(&self.dir.join(&e.file), grid)
    }

    fn write_index(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.entries).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(self.dir.join("index.json"), text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Stretching;

    fn grid(d: usize) -> Arc<Grid> {
        GridSpec { d, nx: 8, box_len: 6.0, ny: 24, ly: 5.0, stretching: Stretching::Tanh { beta: 1.5 } }
            .build()
            .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for d in [1, 2] {
            let g = grid(d);
            let a = SpectralField::from_fn(&g, "a", |x, y| (x[0] + x[1]).sin() * (-y).exp() + 0.1);
            let b = SpectralField::from_fn(&g, "b", |x, y| x[0].cos() * y / (1.0 + y * y));
            let s = Snapshot::new(0.125, vec![a.clone(), b.clone()]).with_meta("eps", 0.05);
            let back = Snapshot::from_bytes(&s.to_bytes().unwrap(), None).unwrap();
            assert_eq!(back.t, 0.125);
            assert_eq!(back.meta["eps"], 0.05);
            assert_eq!(back.field("a").unwrap().coeffs(), a.coeffs());
            assert_eq!(back.field("b").unwrap().coeffs(), b.coeffs());
            assert_eq!(back.field("a").unwrap().grid().spec(), g.spec());
        }
    }

    #[test]
    fn rejects_damaged_files() {
        let g = grid(1);
        let s = Snapshot::new(0.0, vec![SpectralField::zeros(&g, "z")]);
        let bytes = s.to_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Snapshot::from_bytes(&bad, None), Err(Error::Format(_))));
        let mut newer = bytes.clone();
        newer[8] = 2;
        assert!(Snapshot::from_bytes(&newer, None).is_err());
        assert!(Snapshot::from_bytes(&bytes[..bytes.len() - 1], None).is_err());
        assert!(Snapshot::from_bytes(&bytes[..10], None).is_err());
        assert!(Snapshot::new(0.0, vec![]).to_bytes().is_err());
    }

    #[test]
    fn trajectory_index_orders_snapshots() {
        let dir = tempfile::tempdir().unwrap();
        let g = grid(1);
        let mut tr = Trajectory::create(dir.path()).unwrap();
        for (i, t) in [0.0, 0.1, 0.2].into_iter().enumerate() {
            let f = SpectralField::from_fn(&g, "w", |x, y| i as f64 * x[0].sin() * (-y).exp());
            tr.push(&Snapshot::new(t, vec![f])).unwrap();
        }
        assert!(tr.push(&Snapshot::new(0.2, vec![SpectralField::zeros(&g, "w")])).is_err());
        let back = Trajectory::open(dir.path()).unwrap();
        assert_eq!(back.len(), 3);
        let s = back.load(2, Some(&g)).unwrap();
        assert_eq!(s.t, 0.2);
        assert!(Arc::ptr_eq(s.fields[0].grid(), &g));
    }
}
