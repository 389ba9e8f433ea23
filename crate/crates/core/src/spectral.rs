//! Closed-form spectra of small symmetric matrices and per-node
//! diagnostics of the diffusion matrix.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientField, SymMatrix};
use crate::error::{Error, Result};
use crate::field::csv_header;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeSpectrum {
    pub min_eig: f64,
    pub max_eig: f64,
    pub det: f64,
    /// ⟨ā v̂, v̂⟩, or the smallest eigenvalue at v = 0.
    pub radial_eig: f64,
    /// Smallest Rayleigh quotient over unit vectors orthogonal to v
    /// (all unit vectors at v = 0). NaN for d = 1.
    pub tangential_min_eig: f64,
}

fn eig2(a: f64, b: f64, c: f64) -> (f64, f64) {
    // [[a, b], [b, c]]
    let mean = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    (mean - rad, mean + rad)
}

/// Eigenvalues in ascending order; entries past `d` are 0.
pub fn sym_eigenvalues(m: &SymMatrix, d: usize) -> [f64; 3] {
    match d {
        1 => [m[0][0], 0.0, 0.0],
        2 => {
            let (lo, hi) = eig2(m[0][0], m[0][1], m[1][1]);
            [lo, hi, 0.0]
        }
        3 => eig3(m),
        _ => panic!("unsupported dimension {d}"),
    }
}

fn eig3(m: &SymMatrix) -> [f64; 3] {
    let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return [q; 3];
    }
    let mut b = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = (m[i][j] - if i == j { q } else { 0.0 }) / p;
        }
    }
    let r = (det3(&b) / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let mid = 3.0 * q - hi - lo;
    let mut out = [lo, mid, hi];
    out.sort_by(f64::total_cmp);
    out
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn determinant(m: &SymMatrix, d: usize) -> f64 {
    match d {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        3 => det3(m),
        _ => panic!("unsupported dimension {d}"),
    }
}

fn quad(m: &SymMatrix, x: &[f64], y: &[f64]) -> f64 {
    let d = x.len();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += x[i] * m[i][j] * y[j];
        }
    }
    s
}

pub fn node_spectrum(m: &SymMatrix, v: &[f64]) -> NodeSpectrum {
    let d = v.len();
    let ev = sym_eigenvalues(m, d);
    let (min_eig, max_eig) = (ev[0], ev[d - 1]);
    let det = determinant(m, d);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        let tangential = if d == 1 { f64::NAN } else { min_eig };
        return NodeSpectrum { min_eig, max_eig, det, radial_eig: min_eig, tangential_min_eig: tangential };
    }
    let u: Vec<f64> = v.iter().map(|x| x / norm).collect();
    let radial_eig = quad(m, &u, &u);
    let tangential_min_eig = match d {
        1 => f64::NAN,
        2 => {
            let e = [-u[1], u[0]];
            quad(m, &e, &e)
        }
        _ => {
            // Orthonormal basis of the plane orthogonal to u.
            let k = (0..3).min_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs())).unwrap();
            let mut axis = [0.0; 3];
            axis[k] = 1.0;
            let c = cross(&u, &axis);
            let cn = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            let e1 = [c[0] / cn, c[1] / cn, c[2] / cn];
            let e2 = cross(&u, &e1);
            eig2(quad(m, &e1, &e1), quad(m, &e1, &e2), quad(m, &e2, &e2)).0
        }
    };
    NodeSpectrum { min_eig, max_eig, det, radial_eig, tangential_min_eig }
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Per-node spectra; rejects matrices whose asymmetry exceeds 1e-12
/// relative to the largest entry (absolute below unit scale).
pub fn spectral_diagnostics(coeffs: &CoefficientField) -> Result<Vec<NodeSpectrum>> {
    let g = coeffs.grid();
    let d = g.dim();
    for (node, m) in coeffs.abar().iter().enumerate() {
        let scale = m[..d].iter().flat_map(|r| r[..d].iter()).fold(1.0_f64, |s, x| s.max(x.abs()));
        for i in 0..d {
            for j in i + 1..d {
                let gap = (m[i][j] - m[j][i]).abs();
                if gap > 1e-12 * scale {
                    return Err(Error::Asymmetric { node, gap });
                }
            }
        }
    }
    Ok((0..g.len())
        .into_par_iter()
        .map(|i| {
            let v = g.node(i);
            node_spectrum(&coeffs.abar()[i], &v[..d])
        })
        .collect())
}

/// Largest eigenvalue over all nodes.
pub fn max_eigenvalue(coeffs: &CoefficientField) -> f64 {
    let d = coeffs.grid().dim();
    coeffs.abar().par_iter().map(|m| sym_eigenvalues(m, d)[d - 1]).reduce(|| 0.0, f64::max)
}

pub fn write_spectra_csv<W: Write>(coeffs: &CoefficientField, spectra: &[NodeSpectrum], mut w: W) -> Result<()> {
    let g = coeffs.grid();
    let d = g.dim();
    writeln!(w, "{}", csv_header(g))?;
    for (idx, s) in spectra.iter().enumerate() {
        let ix = g.unravel(idx);
        let v = g.node(idx);
        let mut row = String::new();
        for k in 0..d {
            row.push_str(&format!("{},", ix[k]));
        }
        for k in 0..d {
            row.push_str(&format!("{:e},", v[k]));
        }
        row.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e}",
            s.min_eig, s.max_eig, s.det, s.radial_eig, s.tangential_min_eig
        ));
        writeln!(w, "{row}")?;
    }
    Ok(())
}
