//! Scalar fields on a velocity grid and their integral functionals.
//!
//! All functionals clamp negative node values to zero and use the plain
//! Riemann sum over nodes. Sums run serially so results are bit-stable.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{VelocityGrid, MAX_DIM};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: VelocityGrid,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalSummary {
    pub mass: f64,
    pub energy: f64,
    pub entropy: f64,
    pub entropy_prime: f64,
    pub sup_norm: f64,
}

#[inline]
fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

impl ScalarField {
    pub fn new(grid: VelocityGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!("{} values for a grid of {} nodes", values.len(), grid.len())));
        }
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { node, value });
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: VelocityGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: VelocityGrid) -> Self {
        Self { values: vec![0.0; grid.len()], grid }
    }

    /// Samples `f` at every node. Panics if `f` returns a non-finite value.
    pub fn from_fn(grid: VelocityGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let d = grid.dim();
        let values: Vec<f64> = (0..grid.len())
            .map(|i| {
                let v = grid.node(i);
                let x = f(&v[..d]);
                assert!(x.is_finite(), "non-finite sample at node {i}");
                x
            })
            .collect();
        Self { grid, values }
    }

    /// Standard Gaussian (2π)^{-d/2} exp(-|v|²/2).
    pub fn maxwellian(grid: VelocityGrid) -> Self {
        let norm = (2.0 * std::f64::consts::PI).powf(-(grid.dim() as f64) / 2.0);
        Self::from_fn(grid, |v| norm * (-0.5 * v.iter().map(|x| x * x).sum::<f64>()).exp())
    }

    /// Smooth compactly supported bump `height * exp(1 - 1/(1 - s²))`,
    /// `s = |v - center| / radius`.
    pub fn bump(grid: VelocityGrid, center: &[f64], radius: f64, height: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Param(format!("bump radius {radius} must be positive")));
        }
        if !(height.is_finite() && height >= 0.0) {
            return Err(Error::Param(format!("bump height {height} must be nonnegative")));
        }
        let d = grid.dim();
        if center.len() != d || center.iter().any(|c| !(c.abs() <= grid.half_width())) {
            return Err(Error::Param(format!("bump center {center:?} is not inside the grid")));
        }
        Ok(Self::from_fn(grid, |v| {
            let s2: f64 = v.iter().zip(center).map(|(x, c)| (x - c) * (x - c)).sum::<f64>() / (radius * radius);
            if s2 < 1.0 {
                height * (1.0 - 1.0 / (1.0 - s2)).exp()
            } else {
                0.0
            }
        }))
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|x| x * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self { grid: self.grid, values })
    }

    /// Shift by whole cells along each axis; values leaving the cube are
    /// dropped and vacated nodes become 0.
    pub fn shifted(&self, cells: &[isize]) -> Self {
        let g = &self.grid;
        let n = g.points_per_axis() as isize;
        let mut out = vec![0.0; g.len()];
        for (idx, &x) in self.values.iter().enumerate() {
            let ix = g.unravel(idx);
            let mut jx = [0usize; MAX_DIM];
            let mut inside = true;
            for k in 0..g.dim() {
                let j = ix[k] as isize + cells.get(k).copied().unwrap_or(0);
                if j < 0 || j >= n {
                    inside = false;
                    break;
                }
                jx[k] = j as usize;
            }
            if inside {
                out[g.ravel(&jx)] = x;
            }
        }
        Self { grid: *g, values: out }
    }

    /// Σ (1+|v|)^κ max(f,0)^p h^d.
    pub fn integrate(&self, kappa: f64, p: f64) -> f64 {
        let g = &self.grid;
        let sum: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &f)| {
                let f = f.max(0.0);
                if f == 0.0 {
                    return 0.0;
                }
                let w = if kappa == 0.0 { 1.0 } else { (1.0 + g.norm_sq(i).sqrt()).powf(kappa) };
                let fp = if p == 1.0 { f } else { f.powf(p) };
                w * fp
            })
            .sum();
        sum * g.cell_volume()
    }

    /// Weighted norm (Σ (1+|v|)^κ f^p h^d)^{1/p}.
    pub fn lp_kappa_norm(&self, kappa: f64, p: f64) -> f64 {
        self.integrate(kappa, p).powf(1.0 / p)
    }

    pub fn mass(&self) -> f64 {
        self.integrate(0.0, 1.0)
    }

    pub fn second_moment(&self) -> f64 {
        let g = &self.grid;
        let s: f64 = self.values.iter().enumerate().map(|(i, &f)| g.norm_sq(i) * f.max(0.0)).sum();
        s * g.cell_volume()
    }

    /// Σ f log f h^d with 0 log 0 = 0.
    pub fn entropy(&self) -> f64 {
        self.values.iter().map(|&f| xlogx(f.max(0.0))).sum::<f64>() * self.grid.cell_volume()
    }

    /// Σ f log(1+f) h^d.
    pub fn entropy_prime(&self) -> f64 {
        self.values.iter().map(|&f| f.max(0.0) * f.max(0.0).ln_1p()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, &f| m.max(f))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &f| m.min(f))
    }

    pub fn summary(&self) -> PhysicalSummary {
        PhysicalSummary {
            mass: self.mass(),
            energy: self.second_moment(),
            entropy: self.entropy(),
            entropy_prime: self.entropy_prime(),
            sup_norm: self.sup_norm(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let g = &self.grid;
        let d = g.dim();
        writeln!(w, "{}", csv_header(g))?;
        for (idx, f) in self.values.iter().enumerate() {
            let ix = g.unravel(idx);
            let v = g.node(idx);
            let mut row = String::new();
            for k in 0..d {
                row.push_str(&format!("{},", ix[k]));
            }
            for k in 0..d {
                row.push_str(&format!("{:e},", v[k]));
            }
            row.push_str(&format!("{f:e}"));
            writeln!(w, "{row}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Csv("empty input".into()))??;
        let grid = parse_csv_header(&header)?;
        let d = grid.dim();
        let mut values = vec![f64::NAN; grid.len()];
        let mut seen = 0usize;
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 2 * d + 1 {
                return Err(Error::Csv(format!(
                    "row {}: expected {} columns, found {}",
                    lineno + 2,
                    2 * d + 1,
                    cols.len()
                )));
            }
            let mut ix = [0usize; MAX_DIM];
            for k in 0..d {
                ix[k] = cols[k].parse().map_err(|e| Error::Csv(format!("row {}: index: {e}", lineno + 2)))?;
                if ix[k] >= grid.points_per_axis() {
                    return Err(Error::Csv(format!("row {}: index out of range", lineno + 2)));
                }
            }
            let f: f64 = cols[2 * d].parse().map_err(|e| Error::Csv(format!("row {}: value: {e}", lineno + 2)))?;
            values[grid.ravel(&ix)] = f;
            seen += 1;
        }
        if seen != grid.len() {
            return Err(Error::Csv(format!("expected {} rows, found {seen}", grid.len())));
        }
        Self::new(grid, values)
    }
}

pub(crate) fn csv_header(g: &VelocityGrid) -> String {
    format!("# d={} L={} n={}", g.dim(), g.half_width(), g.points_per_axis())
}

pub(crate) fn parse_csv_header(line: &str) -> Result<VelocityGrid> {
    let body = line.trim().strip_prefix('#').ok_or_else(|| Error::Csv(format!("bad header {line:?}")))?;
    let (mut d, mut l, mut n) = (None, None, None);
    for tok in body.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| Error::Csv(format!("bad header token {tok:?}")))?;
        let bad = |e: &dyn std::fmt::Display| Error::Csv(format!("header {k}: {e}"));
        match k {
            "d" => d = Some(v.parse::<usize>().map_err(|e| bad(&e))?),
            "L" => l = Some(v.parse::<f64>().map_err(|e| bad(&e))?),
            "n" => n = Some(v.parse::<usize>().map_err(|e| bad(&e))?),
            _ => return Err(Error::Csv(format!("unknown header key {k:?}"))),
        }
    }
    match (d, l, n) {
        (Some(d), Some(l), Some(n)) => VelocityGrid::new(d, l, n),
        _ => Err(Error::Csv(format!("header {line:?} must set d, L and n"))),
    }
}
