//! Diffusion matrix ā and reaction coefficient c̄ of the Landau operator,
//! computed by direct convolution on the grid.
//!
//! ā(v) = a Σ_u (|w|² I - w⊗w)|w|^γ f(u) h^d and c̄(v) = c Σ_u |w|^γ f(u) h^d
//! with w = v - u. Sources outside the grid contribute nothing.
//!
//! Singular cell (w = 0). For c̄ the cell is replaced by the ball of equal
//! volume, giving h^{d+γ} σ r₁^{d+γ}/(d+γ) with |B_{r₁}| = 1. When d+γ < 2
//! that rule alone leaves a lattice defect of the discrete identity
//! c̄ + D²:ā = 0 which decays only like h^{d+γ-2} relative to c̄; the cell
//! weight is then shifted by the infinite-lattice defect (computed once per
//! (d, γ) at unit spacing and scaled). For γ ≤ -2 the ā kernel is itself
//! unbounded near 0 and its cell uses the same ball with the angular average
//! (1 - 1/d) I of the projection. At γ = -d, c̄ = c f pointwise.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Mutex;

use once_cell::sync::Lazy;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::field::{csv_header, ScalarField};
use crate::grid::{VelocityGrid, MAX_DIM};

/// Symmetric matrix stored densely; only the leading d×d block is used.
pub type SymMatrix = [[f64; MAX_DIM]; MAX_DIM];

pub const ZERO_MATRIX: SymMatrix = [[0.0; MAX_DIM]; MAX_DIM];

pub fn identity(d: usize) -> SymMatrix {
    let mut m = ZERO_MATRIX;
    for (k, row) in m.iter_mut().enumerate().take(d) {
        row[k] = 1.0;
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub gamma: f64,
    pub a_const: f64,
    pub c_const: f64,
}

impl KernelParams {
    /// a = 1 and c = (d-1)(d+γ).
    pub fn new(d: usize, gamma: f64) -> Result<Self> {
        Self::with_a(d, gamma, 1.0)
    }

    /// c defaults to a (d-1)(d+γ).
    pub fn with_a(d: usize, gamma: f64, a_const: f64) -> Result<Self> {
        let p = Self { gamma, a_const, c_const: a_const * default_c_factor(d, gamma) };
        p.validate(d)?;
        Ok(p)
    }

    pub fn with_constants(d: usize, gamma: f64, a_const: f64, c_const: f64) -> Result<Self> {
        let p = Self { gamma, a_const, c_const };
        p.validate(d)?;
        Ok(p)
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let lo = -(d as f64);
        if !(self.gamma >= lo && self.gamma <= 0.0) {
            return param(format!("gamma = {} outside the supported range [{lo}, 0]", self.gamma));
        }
        if !(self.a_const.is_finite() && self.a_const > 0.0) {
            return param(format!("aConst = {} must be positive", self.a_const));
        }
        if !(self.c_const.is_finite() && self.c_const >= 0.0) {
            return param(format!("cConst = {} must be nonnegative", self.c_const));
        }
        Ok(())
    }
}

/// (d-1)(d+γ): the reaction constant matching a = 1.
pub fn default_c_factor(d: usize, gamma: f64) -> f64 {
    (d as f64 - 1.0) * (d as f64 + gamma)
}

pub fn unit_sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => unreachable!("dimension checked by the grid"),
    }
}

pub fn unit_ball_volume(d: usize) -> f64 {
    unit_sphere_area(d) / d as f64
}

/// Radius of the ball with the volume of a unit cube.
fn unit_equal_volume_radius(d: usize) -> f64 {
    (1.0 / unit_ball_volume(d)).powf(1.0 / d as f64)
}

/// ∫_{B_r₁} |w|^γ dw for the unit cell.
fn ball_weight(d: usize, gamma: f64) -> f64 {
    let e = d as f64 + gamma;
    unit_sphere_area(d) * unit_equal_volume_radius(d).powf(e) / e
}

/// ∫_{B_r₁} (|w|² I - w⊗w)|w|^γ dw = ball_weight_a · I for the unit cell.
fn ball_weight_a(d: usize, gamma: f64) -> f64 {
    (1.0 - 1.0 / d as f64) * ball_weight(d, gamma + 2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    grid: VelocityGrid,
    abar: Vec<SymMatrix>,
    cbar: Vec<f64>,
}

impl CoefficientField {
    pub fn new(grid: VelocityGrid, abar: Vec<SymMatrix>, cbar: Vec<f64>) -> Result<Self> {
        if abar.len() != grid.len() || cbar.len() != grid.len() {
            return Err(Error::Grid("coefficient arrays do not match the grid".into()));
        }
        let d = grid.dim();
        for (node, (a, &c)) in abar.iter().zip(&cbar).enumerate() {
            if !c.is_finite() {
                return Err(Error::NonFinite { node, value: c });
            }
            for row in &a[..d] {
                for &x in &row[..d] {
                    if !x.is_finite() {
                        return Err(Error::NonFinite { node, value: x });
                    }
                }
            }
        }
        Ok(Self { grid, abar, cbar })
    }

    /// The same matrix and reaction rate at every node.
    pub fn uniform(grid: VelocityGrid, a: SymMatrix, c: f64) -> Result<Self> {
        Self::new(grid, vec![a; grid.len()], vec![c; grid.len()])
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn abar(&self) -> &[SymMatrix] {
        &self.abar
    }

    pub fn cbar(&self) -> &[f64] {
        &self.cbar
    }

    pub fn cbar_max(&self) -> f64 {
        self.cbar.iter().fold(0.0_f64, |m, &c| m.max(c))
    }

    /// CSV rows: indices, coordinates, upper triangle of ā row by row, c̄.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let g = &self.grid;
        let d = g.dim();
        writeln!(w, "{}", csv_header(g))?;
        for idx in 0..g.len() {
            let ix = g.unravel(idx);
            let v = g.node(idx);
            let mut row = String::new();
            for k in 0..d {
                row.push_str(&format!("{},", ix[k]));
            }
            for k in 0..d {
                row.push_str(&format!("{:e},", v[k]));
            }
            let a = &self.abar[idx];
            for i in 0..d {
                for j in i..d {
                    row.push_str(&format!("{:e},", a[i][j]));
                }
            }
            row.push_str(&format!("{:e}", self.cbar[idx]));
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

fn upper_pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect()
}

/// Kernel values at an offset w ≠ 0 (physical units): packed upper triangle
/// of (|w|² I - w⊗w)|w|^γ followed by |w|^γ.
#[inline]
fn kernel_at(w: &[f64], gamma: f64, pairs: &[(usize, usize)], out: &mut [f64]) {
    let r2: f64 = w.iter().map(|x| x * x).sum();
    let s = r2.powf(0.5 * gamma);
    for (slot, &(i, j)) in out.iter_mut().zip(pairs) {
        let delta = if i == j { r2 } else { 0.0 };
        *slot = (delta - w[i] * w[j]) * s;
    }
    out[pairs.len()] = s;
}

/// Weights of the w = 0 cell, in units multiplying f(v):
/// (scalar multiple of I for ā, value for c̄).
pub fn singular_cell_weights(d: usize, h: f64, params: &KernelParams) -> (f64, f64) {
    let g = params.gamma;
    let df = d as f64;
    let a_cell = if g <= -2.0 { params.a_const * h.powf(df + g + 2.0) * ball_weight_a(d, g) } else { 0.0 };
    let c_cell = if g == -df {
        params.c_const
    } else {
        let mut w = ball_weight(d, g);
        if df + g < 2.0 {
            w -= lattice_defect(d, g) / default_c_factor(d, g);
        }
        params.c_const * h.powf(df + g) * w
    };
    (a_cell, c_cell)
}

static DEFECT_CACHE: Lazy<Mutex<HashMap<(usize, u64), f64>>> = Lazy::new(Default::default);

/// Infinite-lattice sum at unit spacing of c₀|w|^γ + D²:K(w), with
/// c₀ = (d-1)(d+γ), a = 1 and the ball rules at w = 0. Truncated sums over
/// |w| ≤ R decay like R^{d+γ-2}; two radii remove the leading tail.
pub fn lattice_defect(d: usize, gamma: f64) -> f64 {
    let key = (d, gamma.to_bits());
    if let Some(&v) = DEFECT_CACHE.lock().unwrap().get(&key) {
        return v;
    }
    let r = match d {
        2 => 256,
        3 => 32,
        _ => 64,
    };
    let (s_half, s_full) = truncated_defect(d, gamma, r);
    let q = d as f64 + gamma - 2.0;
    let (x_half, x_full) = ((r as f64 / 2.0).powf(q), (r as f64).powf(q));
    let v = (s_full * x_half - s_half * x_full) / (x_half - x_full);
    DEFECT_CACHE.lock().unwrap().insert(key, v);
    v
}

/// Truncated defect sums over |w| ≤ R/2 and |w| ≤ R.
fn truncated_defect(d: usize, gamma: f64, r: i64) -> (f64, f64) {
    let pairs = upper_pairs(d);
    let np = pairs.len();
    let side = (2 * r + 3) as usize;
    let off = r + 1;
    let total = side.pow(d as u32);
    let c0 = default_c_factor(d, gamma);
    let a_cell = ball_weight_a(d, gamma);
    let c_cell = c0 * ball_weight(d, gamma);
    let coords = |mut idx: usize| {
        let mut w = [0i64; MAX_DIM];
        for k in (0..d).rev() {
            w[k] = (idx % side) as i64 - off;
            idx /= side;
        }
        w
    };
    let mut table = vec![0.0; total * (np + 1)];
    table.par_chunks_mut(np + 1).enumerate().for_each(|(idx, slot)| {
        let w = coords(idx);
        if w[..d].iter().all(|&x| x == 0) {
            for (s, &(i, j)) in slot.iter_mut().zip(&pairs) {
                *s = if i == j { a_cell } else { 0.0 };
            }
            slot[np] = c_cell;
        } else {
            let wf: Vec<f64> = w[..d].iter().map(|&x| x as f64).collect();
            kernel_at(&wf, gamma, &pairs, slot);
            slot[np] *= c0;
        }
    });
    let strides: Vec<usize> = (0..d).map(|k| side.pow((d - 1 - k) as u32)).collect();
    let at = |idx: usize, comp: usize| table[idx * (np + 1) + comp];
    let (r_half2, r2) = (((r / 2) * (r / 2)), r * r);
    let mut sums = (0.0, 0.0);
    for idx in 0..total {
        let w = coords(idx);
        let n2: i64 = w[..d].iter().map(|x| x * x).sum();
        if n2 > r2 {
            continue;
        }
        let mut m = at(idx, np);
        for (p, &(i, j)) in pairs.iter().enumerate() {
            if i == j {
                let s = strides[i];
                m += at(idx + s, p) + at(idx - s, p) - 2.0 * at(idx, p);
            } else {
                let (si, sj) = (strides[i], strides[j]);
                m += 0.5 * (at(idx + si + sj, p) - at(idx + si - sj, p) - at(idx - si + sj, p) + at(idx - si - sj, p));
            }
        }
        sums.1 += m;
        if n2 <= r_half2 {
            sums.0 += m;
        }
    }
    sums
}

/// Translation-invariant kernel values on offsets [-(n-1), n-1]^d.
struct KernelTable {
    m: usize,
    /// One table per component: packed ā entries, then c̄.
    comps: Vec<Vec<f64>>,
}

impl KernelTable {
    fn build(grid: &VelocityGrid, params: &KernelParams) -> Self {
        let d = grid.dim();
        let n = grid.points_per_axis();
        let h = grid.spacing();
        let m = 2 * n - 1;
        let total = m.pow(d as u32);
        let pairs = upper_pairs(d);
        let np = pairs.len();
        let vol = grid.cell_volume();
        let (a_cell, c_cell) = singular_cell_weights(d, h, params);
        let pointwise_c = params.gamma == -(d as f64);
        let mut packed = vec![0.0; total * (np + 1)];
        packed.par_chunks_mut(np + 1).enumerate().for_each(|(mut idx, slot)| {
            let mut w = [0.0; MAX_DIM];
            let mut origin = true;
            for k in (0..d).rev() {
                let o = (idx % m) as i64 - (n as i64 - 1);
                idx /= m;
                origin &= o == 0;
                w[k] = o as f64 * h;
            }
            if origin {
                for (s, &(i, j)) in slot.iter_mut().zip(&pairs) {
                    *s = if i == j { a_cell } else { 0.0 };
                }
                slot[np] = c_cell;
            } else {
                kernel_at(&w[..d], params.gamma, &pairs, slot);
                for s in &mut slot[..np] {
                    *s *= params.a_const * vol;
                }
                slot[np] = if pointwise_c { 0.0 } else { slot[np] * params.c_const * vol };
            }
        });
        let comps = (0..=np).map(|c| packed.iter().skip(c).step_by(np + 1).copied().collect()).collect();
        Self { m, comps }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let chunks = n / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn check_source(f: &ScalarField, params: &KernelParams) -> Result<()> {
    let d = f.grid().dim();
    if d < 2 {
        return param("coefficients need d >= 2 (the projection kernel vanishes for d = 1)");
    }
    params.validate(d)
}

fn assemble(pairs: &[(usize, usize)], vals: &[f64]) -> (SymMatrix, f64) {
    let mut a = ZERO_MATRIX;
    for (&(i, j), &x) in pairs.iter().zip(vals) {
        a[i][j] = x;
        a[j][i] = x;
    }
    (a, vals[pairs.len()])
}

/// ā and c̄ by the tabulated kernel; the production path.
pub fn compute_coefficients(f: &ScalarField, params: &KernelParams) -> Result<CoefficientField> {
    check_source(f, params)?;
    let grid = *f.grid();
    let d = grid.dim();
    let n = grid.points_per_axis();
    let pairs = upper_pairs(d);
    let table = KernelTable::build(&grid, params);
    let src: Vec<f64> = f.values().iter().map(|&x| x.max(0.0)).collect();
    let rows = grid.len() / n;
    let row_live: Vec<bool> = (0..rows).map(|r| src[r * n..(r + 1) * n].iter().any(|&x| x != 0.0)).collect();
    let m = table.m;
    let ncomp = table.comps.len();

    let out: Vec<(SymMatrix, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|t| {
            let a = grid.unravel(t);
            let mut acc = [0.0; 7];
            // The kernel is even, so T(v - u) = T(u - v) and the inner axis
            // reads a contiguous table slice that advances with u.
            let inner_start = n - 1 - a[d - 1];
            for r in 0..rows {
                if !row_live[r] {
                    continue;
                }
                let mut base = 0usize;
                let mut rr = r;
                let mut stride = m;
                for k in (0..d - 1).rev() {
                    let u = rr % n;
                    rr /= n;
                    base += (u + n - 1 - a[k]) * stride;
                    stride *= m;
                }
                let frow = &src[r * n..(r + 1) * n];
                let start = base + inner_start;
                for c in 0..ncomp {
                    acc[c] += dot(frow, &table.comps[c][start..start + n]);
                }
            }
            assemble(&pairs, &acc[..ncomp])
        })
        .collect();
    let (abar, cbar) = out.into_iter().unzip();
    CoefficientField::new(grid, abar, cbar)
}

/// ā and c̄ by evaluating the kernel for every pair of nodes. O(N²) and
/// only meant to cross-check the tabulated path on small grids.
pub fn compute_coefficients_reference(f: &ScalarField, params: &KernelParams) -> Result<CoefficientField> {
    check_source(f, params)?;
    let grid = *f.grid();
    let d = grid.dim();
    let pairs = upper_pairs(d);
    let np = pairs.len();
    let vol = grid.cell_volume();
    let (a_cell, c_cell) = singular_cell_weights(d, grid.spacing(), params);
    let pointwise_c = params.gamma == -(d as f64);
    let out: Vec<(SymMatrix, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|t| {
            let v = grid.node(t);
            let mut acc = [0.0; 7];
            let mut k = [0.0; 7];
            for (s, &fu) in f.values().iter().enumerate() {
                let fu = fu.max(0.0);
                if fu == 0.0 {
                    continue;
                }
                if s == t {
                    for (p, &(i, j)) in pairs.iter().enumerate() {
                        if i == j {
                            acc[p] += a_cell * fu;
                        }
                    }
                    acc[np] += c_cell * fu;
                    continue;
                }
                let u = grid.node(s);
                let mut w = [0.0; MAX_DIM];
                for q in 0..d {
                    w[q] = v[q] - u[q];
                }
                kernel_at(&w[..d], params.gamma, &pairs, &mut k);
                for p in 0..np {
                    acc[p] += params.a_const * k[p] * fu * vol;
                }
                if !pointwise_c {
                    acc[np] += params.c_const * k[np] * fu * vol;
                }
            }
            assemble(&pairs, &acc[..=np])
        })
        .collect();
    let (abar, cbar) = out.into_iter().unzip();
    CoefficientField::new(grid, abar, cbar)
}

/// Σ_ij D²_ij[g_ij](idx) for a matrix field, centred differences with the
/// 4-point cross for mixed terms (counted for both i<j and j<i).
pub(crate) fn second_difference_contraction<F>(grid: &VelocityGrid, idx: usize, a: F) -> f64
where
    F: Fn(usize, usize, usize) -> f64,
{
    let d = grid.dim();
    let h2 = grid.spacing() * grid.spacing();
    let mut s = 0.0;
    for i in 0..d {
        let si = grid.stride(i);
        s += (a(idx + si, i, i) + a(idx - si, i, i) - 2.0 * a(idx, i, i)) / h2;
        for j in i + 1..d {
            let sj = grid.stride(j);
            s += (a(idx + si + sj, i, j) - a(idx + si - sj, i, j) - a(idx - si + sj, i, j) + a(idx - si - sj, i, j))
                / (2.0 * h2);
        }
    }
    s
}

/// max over interior nodes of |c̄ + Σ_ij D²_ij ā_ij|.
pub fn divergence_identity_residual(coeffs: &CoefficientField) -> Result<f64> {
    let g = coeffs.grid();
    if g.points_per_axis() < 5 {
        return Err(Error::Grid("divergence residual needs at least 5 points per axis".into()));
    }
    let abar = coeffs.abar();
    let worst = (0..g.len())
        .into_par_iter()
        .filter(|&i| g.is_interior(i))
        .map(|i| {
            let div = second_difference_contraction(g, i, |k, p, q| abar[k][p][q]);
            (coeffs.cbar()[i] + div).abs()
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}
