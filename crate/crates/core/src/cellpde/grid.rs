use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::PeriodicSamples;

/// Uniform periodic grid on `Q_R = [-R/2, R/2)ᵈ` with `n` nodes per unit length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    pub dim: usize,
    pub period: u64,
    pub n: u64,
}

impl PeriodicGrid {
    pub fn new(dim: usize, period: u64, n: u64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidArgument(format!("grids support d = 1, 2; got {dim}")));
        }
        if period == 0 || n == 0 {
            return Err(Error::InvalidArgument("grid period and resolution must be positive".into()));
        }
        Ok(Self { dim, period, n })
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Nodes per axis, `R n`.
    pub fn side(&self) -> usize {
        (self.period * self.n) as usize
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinate of index `j` along an axis.
    #[inline]
    pub fn coord(&self, j: usize) -> f64 {
        -(self.period as f64) / 2.0 + j as f64 * self.spacing()
    }

    /// Axis indices of a flat (row-major, axis 0 slowest) index.
    pub fn unravel(&self, idx: usize) -> [usize; 2] {
        let m = self.side();
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / m, idx % m]
        }
    }

    pub fn ravel(&self, j: [usize; 2]) -> usize {
        if self.dim == 1 {
            j[0]
        } else {
            j[0] * self.side() + j[1]
        }
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let j = self.unravel(idx);
        (0..self.dim).map(|a| self.coord(j[a])).collect()
    }

    /// `(i + k) mod side`.
    #[inline]
    pub fn wrap(&self, i: usize, k: i64) -> usize {
        (i as i64 + k).rem_euclid(self.side() as i64) as usize
    }

    /// Flat index of the node nearest the origin.
    pub fn origin_index(&self) -> usize {
        let m = self.side();
        let j0 = (self.period as f64 / 2.0 * self.n as f64).round() as usize % m;
        self.ravel([j0, j0])
    }
}

/// Nodal values on a [`PeriodicGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub grid: PeriodicGrid,
    pub values: Vec<f64>,
    pub name: String,
    /// Flat index at which the field was pinned to 0, if any.
    pub renormalized_at: Option<usize>,
}

impl GridField {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>, name: impl Into<String>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value at node {i}")));
        }
        Ok(Self {
            grid,
            values,
            name: name.into(),
            renormalized_at: None,
        })
    }

    pub fn zeros(grid: PeriodicGrid, name: impl Into<String>) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
            name: name.into(),
            renormalized_at: None,
        }
    }

    pub fn from_fn<F: FnMut(&[f64]) -> f64>(grid: PeriodicGrid, name: impl Into<String>, mut f: F) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self {
            grid,
            values,
            name: name.into(),
            renormalized_at: None,
        }
    }

    /// Adds a constant to every node.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v += c);
        out
    }

    /// Subtracts the value at the node nearest 0.
    pub fn renormalize_at_origin(&mut self) {
        let i0 = self.grid.origin_index();
        let v0 = self.values[i0];
        self.values.iter_mut().for_each(|v| *v -= v0);
        self.renormalized_at = Some(i0);
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest one-sided difference quotient over all axes.
    pub fn max_slope(&self) -> f64 {
        let g = self.grid;
        let h = g.spacing();
        let mut m: f64 = 0.0;
        for i in 0..g.len() {
            let j = g.unravel(i);
            for a in 0..g.dim {
                let mut k = j;
                k[a] = g.wrap(j[a], 1);
                m = m.max((self.values[g.ravel(k)] - self.values[i]).abs() / h);
            }
        }
        m
    }

    /// Copies a unit-period field onto `period` cells per axis.
    pub fn tile(&self, period: u64) -> Result<Self> {
        if self.grid.period != 1 {
            return Err(Error::InvalidArgument("only unit-period fields can be tiled".into()));
        }
        let target = PeriodicGrid::new(self.grid.dim, period, self.grid.n)?;
        let n = self.grid.n as usize;
        // Q_R starts at -R/2; shift by the unit-cell offset of the first node.
        let offset = |j: usize| -> usize {
            let x = target.coord(j);
            ((x + 0.5) * n as f64).round().rem_euclid(n as f64) as usize
        };
        let values = (0..target.len())
            .map(|i| {
                let j = target.unravel(i);
                let src = self.grid.ravel([offset(j[0]), offset(j[1])]);
                self.values[src]
            })
            .collect();
        Ok(Self {
            grid: target,
            values,
            name: self.name.clone(),
            renormalized_at: None,
        })
    }

    pub fn samples(&self) -> PeriodicSamples {
        PeriodicSamples::new(
            self.grid.dim,
            self.grid.side(),
            self.grid.coord(0),
            self.grid.spacing(),
            self.values.clone(),
        )
    }

    /// Header `d, R, n` as little-endian u64, then the values as little-endian f64.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        for h in [self.grid.dim as u64, self.grid.period, self.grid.n] {
            w.write_all(&h.to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R, name: impl Into<String>) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut header = [0u64; 3];
        for h in header.iter_mut() {
            r.read_exact(&mut word).map_err(|e| Error::Parse(format!("grid header: {e}")))?;
            *h = u64::from_le_bytes(word);
        }
        let grid = PeriodicGrid::new(header[0] as usize, header[1], header[2])
            .map_err(|e| Error::Parse(e.to_string()))?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            r.read_exact(&mut word).map_err(|e| Error::Parse(format!("grid body: {e}")))?;
            values.push(f64::from_le_bytes(word));
        }
        let mut extra = [0u8; 1];
        if r.read(&mut extra)? != 0 {
            return Err(Error::Parse("trailing bytes after grid body".into()));
        }
        Self::new(grid, values, name).map_err(|e| Error::Parse(e.to_string()))
    }

    /// CSV with columns `x1[,x2],value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        if self.grid.dim == 1 {
            writeln!(w, "x1,{}", self.name)?;
        } else {
            writeln!(w, "x1,x2,{}", self.name)?;
        }
        for (i, v) in self.values.iter().enumerate() {
            let x = self.grid.point(i);
            let coords: Vec<String> = x.iter().map(|c| format!("{c}")).collect();
            writeln!(w, "{},{v:e}", coords.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_roundtrip() {
        let g = PeriodicGrid::new(2, 3, 4).unwrap();
        assert_eq!(g.len(), 144);
        for i in 0..g.len() {
            assert_eq!(g.ravel(g.unravel(i)), i);
        }
        assert_eq!(g.wrap(0, -1), 11);
        assert_eq!(g.wrap(11, 1), 0);
        let x = g.point(g.origin_index());
        assert!(x.iter().all(|v| v.abs() <= 0.5 / 4.0 + 1e-15));
    }

    #[test]
    fn binary_roundtrip() {
        let g = PeriodicGrid::new(2, 2, 3).unwrap();
        let f = GridField::from_fn(g, "f", |x| x[0] - 2.0 * x[1]);
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 8 * 36);
        let back = GridField::read_binary(buf.as_slice(), "f").unwrap();
        assert_eq!(back.values, f.values);
        assert_eq!(back.grid, g);
        assert!(GridField::read_binary(&buf[..30], "f").is_err());
    }

    #[test]
    fn tiling_preserves_periodic_functions() {
        let g = PeriodicGrid::new(2, 1, 8).unwrap();
        let tau = 2.0 * std::f64::consts::PI;
        let f = GridField::from_fn(g, "f", |x| (tau * x[0]).sin() + (tau * x[1]).cos());
        let t = f.tile(3).unwrap();
        let direct = GridField::from_fn(t.grid, "f", |x| (tau * x[0]).sin() + (tau * x[1]).cos());
        for (a, b) in t.values.iter().zip(&direct.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let g = PeriodicGrid::new(1, 1, 4).unwrap();
        let f = GridField::from_fn(g, "chi", |x| x[0]);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("x1,chi\n-0.5,"));
    }
}
