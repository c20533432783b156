//! Precomputed unit-domain integrals `∫ R(1, b̄, c̄)^p x^q y^r` on a `(b̄, ln c̄)` grid.
//!
//! Queries interpolate bilinearly; anything outside the grid, near the
//! definiteness boundary or touching an invalid cell is evaluated directly and
//! counted as a fallback.

use crate::analytic::{definite_rect_uncached, definite_tri_uncached, AnalyticError, IntegerTriple, Rect};
use crate::series::QuadraticForm;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"SX3DLUT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LookupError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("table format error: {0}")]
    Format(String),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    UnitSquare,
    ReferenceTriangle,
}

impl DomainKind {
    fn code(self) -> u8 {
        match self {
            DomainKind::UnitSquare => 0,
            DomainKind::ReferenceTriangle => 1,
        }
    }

    fn from_code(c: u8) -> Result<Self, LookupError> {
        match c {
            0 => Ok(DomainKind::UnitSquare),
            1 => Ok(DomainKind::ReferenceTriangle),
            _ => Err(LookupError::Format(format!("unknown domain kind {c}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DomainKind::UnitSquare => "square",
            DomainKind::ReferenceTriangle => "triangle",
        }
    }
}

/// Grid layout: `nb` uniform nodes on `[−b_max, b_max]`, `nc` log-uniform nodes on `[c_min, c_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nb: usize,
    pub nc: usize,
    pub b_max: f64,
    pub c_min: f64,
    pub c_max: f64,
    /// Nodes need `4c̄ − b̄² > delta_pd`.
    pub delta_pd: f64,
    /// Interpolation is used only where `(4c̄ − b̄²)/(4c̄) ≥ kappa` at all four corners.
    pub kappa: f64,
    /// A cell is served only if interpolation at its center agrees with direct
    /// evaluation to this relative tolerance.
    pub cell_tol: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { nb: 257, nc: 257, b_max: 8.0, c_min: 1e-2, c_max: 1e2, delta_pd: 1e-6, kappa: DEFAULT_KAPPA, cell_tol: DEFAULT_CELL_TOL }
    }
}

/// Margin on the normalized discriminant.
pub const DEFAULT_KAPPA: f64 = 0.01;
pub const DEFAULT_CELL_TOL: f64 = 2e-5;

impl GridSpec {
    /// Same ranges with `2n − 1` nodes per axis.
    pub fn refined(&self) -> Self {
        Self { nb: 2 * self.nb - 1, nc: 2 * self.nc - 1, ..*self }
    }

    pub fn b_node(&self, i: usize) -> f64 {
        if self.nb == 1 {
            return 0.0;
        }
        -self.b_max + 2.0 * self.b_max * i as f64 / (self.nb - 1) as f64
    }

    pub fn c_node(&self, j: usize) -> f64 {
        if self.nc == 1 {
            return self.c_min;
        }
        let f = j as f64 / (self.nc - 1) as f64;
        self.c_min * (self.c_max / self.c_min).powf(f)
    }

    fn validate(&self) -> Result<(), LookupError> {
        if self.nb == 0 || self.nc == 0 || !(self.b_max >= 0.0) || !(self.c_min > 0.0 && self.c_max >= self.c_min) {
            return Err(LookupError::Format(format!("invalid grid {self:?}")));
        }
        Ok(())
    }
}

/// Direct evaluation of the unit-domain integral.
pub fn direct_value(t: IntegerTriple, kind: DomainKind, bbar: f64, cbar: f64) -> Result<f64, AnalyticError> {
    let form = QuadraticForm::new(1.0, bbar, cbar)?;
    Ok(match kind {
        DomainKind::UnitSquare => definite_rect_uncached(t, &form, &Rect::unit())?.value,
        DomainKind::ReferenceTriangle => definite_tri_uncached(t, &form)?.value,
    })
}

/// Header fields mirrored into the JSON sidecar.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TableHeader {
    pub version: u32,
    pub p: i32,
    pub q: u32,
    pub r: u32,
    pub domain_kind: DomainKind,
    pub grid: GridSpec,
    pub invalid_nodes: usize,
    pub certified_cells: usize,
    pub total_cells: usize,
}

#[derive(Debug)]
pub struct LookupTable {
    triple: IntegerTriple,
    kind: DomainKind,
    grid: GridSpec,
    /// Row-major in `b̄` then `c̄`; `NaN` marks invalid nodes.
    values: Vec<f64>,
    /// Per-cell flag, row-major over `(nb − 1) × (nc − 1)`.
    certified: Vec<bool>,
    fallbacks: AtomicU64,
    queries: AtomicU64,
}

impl Clone for LookupTable {
    fn clone(&self) -> Self {
        Self {
            triple: self.triple,
            kind: self.kind,
            grid: self.grid,
            values: self.values.clone(),
            certified: self.certified.clone(),
            fallbacks: AtomicU64::new(self.fallback_count()),
            queries: AtomicU64::new(self.query_count()),
        }
    }
}

impl PartialEq for LookupTable {
    fn eq(&self, o: &Self) -> bool {
        self.triple == o.triple
            && self.kind == o.kind
            && self.grid == o.grid
            && self.certified == o.certified
            && self.values.len() == o.values.len()
            && self.values.iter().zip(&o.values).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl LookupTable {
    /// Fills every node in parallel; nodes violating `4c̄ − b̄² > δ_pd` or failing
    /// to evaluate are stored as `NaN`.
    pub fn build(triple: IntegerTriple, grid: GridSpec, kind: DomainKind) -> Result<Self, LookupError> {
        grid.validate()?;
        if triple.zeta0() <= -2 {
            return Err(AnalyticError::Divergent { p: triple.p, q: triple.q, r: triple.r, zeta0: triple.zeta0() }.into());
        }
        let values: Vec<f64> = (0..grid.nb * grid.nc)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / grid.nc, k % grid.nc);
                let (b, c) = (grid.b_node(i), grid.c_node(j));
                if 4.0 * c - b * b <= grid.delta_pd {
                    return f64::NAN;
                }
                direct_value(triple, kind, b, c).unwrap_or(f64::NAN)
            })
            .collect();
        let mut table = Self {
            triple,
            kind,
            grid,
            values,
            certified: Vec::new(),
            fallbacks: AtomicU64::new(0),
            queries: AtomicU64::new(0),
        };
        let (cb, cc) = table.cell_dims();
        table.certified = (0..cb * cc)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / cc, k % cc);
                let Some(v) = table.cell_value(i, j, 0.5, 0.5) else { return false };
                let b = 0.5 * (grid.b_node(i) + grid.b_node(i + 1));
                let c = (0.5 * (grid.c_node(j).ln() + grid.c_node(j + 1).ln())).exp();
                match direct_value(triple, kind, b, c) {
                    Ok(d) => ((v - d) / d).abs() <= grid.cell_tol,
                    Err(_) => false,
                }
            })
            .collect();
        Ok(table)
    }

    fn cell_dims(&self) -> (usize, usize) {
        (self.grid.nb.saturating_sub(1), self.grid.nc.saturating_sub(1))
    }

    pub fn certified_cells(&self) -> usize {
        self.certified.iter().filter(|&&c| c).count()
    }

    pub fn total_cells(&self) -> usize {
        self.certified.len()
    }

    /// Log-bilinear blend inside cell `(i, j)`; `None` if the cell violates the margin.
    fn cell_value(&self, i: usize, j: usize, fx: f64, fy: f64) -> Option<f64> {
        let g = &self.grid;
        let i1 = (i + 1).min(g.nb - 1);
        let j1 = (j + 1).min(g.nc - 1);
        let corners = [(i, j), (i1, j), (i, j1), (i1, j1)];
        for &(a, b) in &corners {
            let (bn, cn) = (g.b_node(a), g.c_node(b));
            if (4.0 * cn - bn * bn) / (4.0 * cn) < g.kappa {
                return None;
            }
        }
        let v = corners.map(|(a, b)| self.node_value(a, b));
        let w = [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy];
        // Interpolate ln f: the values are positive and close to power laws in c̄.
        let mut acc = 0.0;
        let mut exact = None;
        for k in 0..4 {
            if w[k] == 0.0 {
                continue;
            }
            if !(v[k].is_finite() && v[k] > 0.0) {
                return None;
            }
            if w[k] == 1.0 {
                exact = Some(v[k]);
            }
            acc += w[k] * v[k].ln();
        }
        Some(exact.unwrap_or_else(|| acc.exp()))
    }

    pub fn triple(&self) -> IntegerTriple {
        self.triple
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node_value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.nc + j]
    }

    pub fn invalid_nodes(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    pub fn fallback_count(&self) -> u64 {
        self.fallbacks.load(Ordering::Relaxed)
    }

    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn reset_counters(&self) {
        self.fallbacks.store(0, Ordering::Relaxed);
        self.queries.store(0, Ordering::Relaxed);
    }

    pub fn header(&self) -> TableHeader {
        TableHeader {
            version: FORMAT_VERSION,
            p: self.triple.p,
            q: self.triple.q,
            r: self.triple.r,
            domain_kind: self.kind,
            grid: self.grid,
            invalid_nodes: self.invalid_nodes(),
            certified_cells: self.certified_cells(),
            total_cells: self.total_cells(),
        }
    }

    /// Fractional grid coordinate, snapped onto nodes it rounds to.
    fn locate(u: f64, n: usize) -> Option<(usize, f64)> {
        if n == 1 {
            return (u == 0.0).then_some((0, 0.0));
        }
        let last = (n - 1) as f64;
        if !(u >= -1e-9 && u <= last + 1e-9) {
            return None;
        }
        let r = u.round();
        let u = if (u - r).abs() < 1e-9 { r } else { u };
        let i = (u.floor() as usize).min(n - 2);
        Some((i, u - i as f64))
    }

    /// Interpolated value, or `None` when the query must fall back.
    pub fn interpolate(&self, bbar: f64, cbar: f64) -> Option<f64> {
        let g = &self.grid;
        if !(cbar > 0.0) || (4.0 * cbar - bbar * bbar) / (4.0 * cbar) < g.kappa {
            return None;
        }
        let ub = if g.nb == 1 { bbar } else { (bbar + g.b_max) / (2.0 * g.b_max) * (g.nb - 1) as f64 };
        let uc = if g.nc == 1 {
            cbar.ln() - g.c_min.ln()
        } else {
            (cbar.ln() - g.c_min.ln()) / (g.c_max.ln() - g.c_min.ln()) * (g.nc - 1) as f64
        };
        let (i, fx) = Self::locate(ub, g.nb)?;
        let (j, fy) = Self::locate(uc, g.nc)?;
        let on_node = (fx == 0.0 || g.nb == 1) && (fy == 0.0 || g.nc == 1);
        if !on_node {
            let (_, cc) = self.cell_dims();
            if !self.certified.get(i * cc + j).copied().unwrap_or(false) {
                return None;
            }
        }
        self.cell_value(i, j, fx, fy)
    }

    /// Table value with direct-evaluation fallback.
    pub fn query(&self, bbar: f64, cbar: f64) -> Result<f64, AnalyticError> {
        self.queries.fetch_add(1, Ordering::Relaxed);
        if let Some(v) = self.interpolate(bbar, cbar) {
            return Ok(v);
        }
        self.fallbacks.fetch_add(1, Ordering::Relaxed);
        direct_value(self.triple, self.kind, bbar, cbar)
    }

    pub fn file_stem(triple: IntegerTriple, kind: DomainKind) -> String {
        format!("lut_p{}_q{}_r{}_{}", triple.p, triple.q, triple.r, kind.name())
    }

    /// Writes `<stem>.bin` and `<stem>.json` into `dir`; returns the binary path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf, LookupError> {
        std::fs::create_dir_all(dir)?;
        let stem = Self::file_stem(self.triple, self.kind);
        let bin = dir.join(format!("{stem}.bin"));
        let mut buf = Vec::with_capacity(96 + 8 * self.values.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&self.triple.p.to_le_bytes());
        buf.extend_from_slice(&self.triple.q.to_le_bytes());
        buf.extend_from_slice(&self.triple.r.to_le_bytes());
        buf.push(self.kind.code());
        buf.extend_from_slice(&(self.grid.nb as u32).to_le_bytes());
        buf.extend_from_slice(&(self.grid.nc as u32).to_le_bytes());
        for v in [self.grid.b_max, self.grid.c_min, self.grid.c_max, self.grid.delta_pd, self.grid.kappa, self.grid.cell_tol] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend(self.certified.iter().map(|&c| c as u8));
        std::fs::File::create(&bin)?.write_all(&buf)?;
        let json = serde_json::to_string_pretty(&self.header()).map_err(|e| LookupError::Format(e.to_string()))?;
        std::fs::write(dir.join(format!("{stem}.json")), json)?;
        Ok(bin)
    }

    pub fn load(path: &Path) -> Result<Self, LookupError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        if cur.take(8)? != MAGIC {
            return Err(LookupError::Format("bad magic".into()));
        }
        let version = cur.u32()?;
        if version != FORMAT_VERSION {
            return Err(LookupError::Format(format!("unsupported version {version}")));
        }
        let p = cur.u32()? as i32;
        let q = cur.u32()?;
        let r = cur.u32()?;
        let kind = DomainKind::from_code(cur.take(1)?[0])?;
        let nb = cur.u32()? as usize;
        let nc = cur.u32()? as usize;
        let grid = GridSpec {
            nb,
            nc,
            b_max: cur.f64()?,
            c_min: cur.f64()?,
            c_max: cur.f64()?,
            delta_pd: cur.f64()?,
            kappa: cur.f64()?,
            cell_tol: cur.f64()?,
        };
        grid.validate()?;
        let mut values = Vec::with_capacity(nb * nc);
        for _ in 0..nb * nc {
            values.push(cur.f64()?);
        }
        let cells = nb.saturating_sub(1) * nc.saturating_sub(1);
        let certified = cur.take(cells)?.iter().map(|&c| c != 0).collect();
        if cur.pos != bytes.len() {
            return Err(LookupError::Format("trailing bytes".into()));
        }
        let triple = IntegerTriple::new(p, q, r)?;
        Ok(Self { triple, kind, grid, values, certified, fallbacks: AtomicU64::new(0), queries: AtomicU64::new(0) })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LookupError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(LookupError::Format("truncated table file".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, LookupError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64, LookupError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GridSpec {
        GridSpec { nb: 9, nc: 9, ..GridSpec::default() }
    }

    #[test]
    fn node_and_anchor() {
        let t = IntegerTriple::new(-1, 0, 0).unwrap();
        let one = GridSpec { nb: 1, nc: 1, c_min: 1.0, c_max: 1.0, ..GridSpec::default() };
        let tab = LookupTable::build(t, one, DomainKind::UnitSquare).unwrap();
        assert!((tab.node_value(0, 0) - 2.0 * (1.0 + 2f64.sqrt()).ln()).abs() < 1e-14);
        let tab = LookupTable::build(t, small(), DomainKind::UnitSquare).unwrap();
        let g = tab.grid();
        let (b, c) = (g.b_node(4), g.c_node(6));
        assert_eq!(tab.query(b, c).unwrap(), tab.node_value(4, 6));
        assert_eq!(tab.fallback_count(), 0);
    }

    #[test]
    fn fallback_is_direct() {
        let t = IntegerTriple::new(-1, 1, 0).unwrap();
        let tab = LookupTable::build(t, small(), DomainKind::UnitSquare).unwrap();
        let v = tab.query(0.5, 500.0).unwrap();
        assert_eq!(v.to_bits(), direct_value(t, DomainKind::UnitSquare, 0.5, 500.0).unwrap().to_bits());
        assert_eq!(tab.fallback_count(), 1);
    }

    #[test]
    fn round_trip() {
        let t = IntegerTriple::new(-3, 2, 1).unwrap();
        let tab = LookupTable::build(t, small(), DomainKind::ReferenceTriangle).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = tab.save(dir.path()).unwrap();
        let back = LookupTable::load(&path).unwrap();
        assert_eq!(tab, back);
        assert!(dir.path().join(format!("{}.json", LookupTable::file_stem(t, DomainKind::ReferenceTriangle))).exists());
    }
}
