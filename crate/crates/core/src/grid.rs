//! Uniform tensor grids on the cube [-L, L]^d.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityGrid {
    d: usize,
    half_width: f64,
    n: usize,
    h: f64,
}

impl VelocityGrid {
    /// `n` points per axis on [-half_width, half_width]; `n` must be odd so
    /// the origin is a node.
    pub fn new(d: usize, half_width: f64, n: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&d) {
            return Err(Error::Grid(format!("dimension {d} not in 1..=3")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Grid(format!("half-width {half_width} must be positive")));
        }
        if n < 3 || n.is_multiple_of(2) {
            return Err(Error::Grid(format!("points per axis {n} must be odd and >= 3")));
        }
        Ok(Self { d, half_width, n, h: 2.0 * half_width / (n - 1) as f64 })
    }

    /// Grid with the given spacing and `n` points per axis, centred at 0.
    pub fn with_spacing(d: usize, h: f64, n: usize) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Grid(format!("spacing {h} must be positive")));
        }
        Self::new(d, 0.5 * h * (n.max(1) - 1) as f64, n)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of axis index `i`.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h
    }

    /// Axis index of the origin.
    pub fn center(&self) -> usize {
        (self.n - 1) / 2
    }

    pub fn origin_index(&self) -> usize {
        let c = self.center();
        self.ravel(&[c; MAX_DIM])
    }

    /// Row-major multi-index of a flat node index; unused axes are 0.
    #[inline]
    pub fn unravel(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for k in (0..self.d).rev() {
            out[k] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    #[inline]
    pub fn ravel(&self, ix: &[usize]) -> usize {
        ix[..self.d].iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Node coordinates; unused axes are 0.
    #[inline]
    pub fn node(&self, idx: usize) -> [f64; MAX_DIM] {
        let ix = self.unravel(idx);
        let mut v = [0.0; MAX_DIM];
        for k in 0..self.d {
            v[k] = self.coord(ix[k]);
        }
        v
    }

    #[inline]
    pub fn norm_sq(&self, idx: usize) -> f64 {
        self.node(idx).iter().map(|x| x * x).sum()
    }

    /// Flat stride of axis `k`.
    #[inline]
    pub fn stride(&self, k: usize) -> usize {
        self.n.pow((self.d - 1 - k) as u32)
    }

    /// Flat index of the node nearest to `v`, if `v` lies in the cube.
    pub fn nearest(&self, v: &[f64]) -> Option<usize> {
        let mut ix = [0; MAX_DIM];
        for k in 0..self.d {
            let x = *v.get(k).unwrap_or(&0.0);
            if !(x.abs() <= self.half_width) {
                return None;
            }
            ix[k] = (((x + self.half_width) / self.h).round() as usize).min(self.n - 1);
        }
        Some(self.ravel(&ix))
    }

    /// True when every axis index lies in 1..n-1.
    #[inline]
    pub fn is_interior(&self, idx: usize) -> bool {
        let ix = self.unravel(idx);
        ix[..self.d].iter().all(|&i| i >= 1 && i + 1 < self.n)
    }

    /// The grid obtained by halving the spacing (n -> 2n - 1).
    pub fn refined(&self) -> Self {
        Self::new(self.d, self.half_width, 2 * self.n - 1).expect("refinement of a valid grid")
    }
}
