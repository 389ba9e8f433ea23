//! Explicit Euler integration of f_t = ā_ij ∂_ij f + c̄ f with centred
//! differences, zero ghost values outside the grid, and monitors for mass,
//! energy, entropy and positivity.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{envelope_at, Envelope};
use crate::coefficients::{compute_coefficients, CoefficientField, KernelParams};
use crate::error::{param, Error, Result};
use crate::field::ScalarField;
use crate::grid::{VelocityGrid, MAX_DIM};
use crate::spectral::max_eigenvalue;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolverConfig {
    pub grid: VelocityGrid,
    pub kernel: KernelParams,
    pub cfl_safety: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Steps between coefficient recomputations; above 1 the coupling is
    /// lagged.
    pub refresh_every: usize,
    pub record_every: usize,
    pub clamp_negatives: bool,
    /// Relative entropy rise tolerated between records.
    pub entropy_tolerance: f64,
    /// Relative mass drift that aborts the run.
    pub abort_mass_drift: f64,
}

impl SolverConfig {
    pub fn new(grid: VelocityGrid, kernel: KernelParams, t_end: f64) -> Self {
        Self {
            grid,
            kernel,
            cfl_safety: 0.4,
            t_start: 0.0,
            t_end,
            refresh_every: 1,
            record_every: 1,
            clamp_negatives: true,
            entropy_tolerance: 1e-6,
            abort_mass_drift: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return param(format!("cflSafety = {} not in (0, 1]", self.cfl_safety));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return param(format!("tEnd = {} must be positive", self.t_end));
        }
        if !(self.t_start >= 0.0 && self.t_start.is_finite()) {
            return param(format!("tStart = {} must be nonnegative", self.t_start));
        }
        if !(self.t_end > self.t_start) {
            return param(format!("tEnd = {} must exceed tStart = {}", self.t_end, self.t_start));
        }
        if self.refresh_every == 0 || self.record_every == 0 {
            return param("refresh and record strides must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrajectoryRecord {
    pub t: f64,
    pub sup_f: f64,
    pub mass: f64,
    pub energy: f64,
    pub entropy: f64,
    pub envelope: Option<f64>,
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub entropy_increase: bool,
    /// Smallest node value before clamping, over the steps since the
    /// previous record.
    pub min_f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timestep {
    pub dt: f64,
    /// All coefficients vanished and the fallback tEnd/1000 step was used.
    pub fallback: bool,
}

/// dt = safety h² / (2 d max λ_max(ā) + h² max c̄).
pub fn cfl_timestep(coeffs: &CoefficientField, config: &SolverConfig) -> Timestep {
    let g = coeffs.grid();
    let h2 = g.spacing() * g.spacing();
    let denom = 2.0 * g.dim() as f64 * max_eigenvalue(coeffs) + h2 * coeffs.cbar_max();
    if denom > 0.0 {
        Timestep { dt: config.cfl_safety * h2 / denom, fallback: false }
    } else {
        Timestep { dt: config.cfl_safety * config.t_end / 1000.0, fallback: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub field: ScalarField,
    /// Smallest updated value before any clamping.
    pub min_before_clamp: f64,
}

/// One explicit Euler step.
pub fn step(f: &ScalarField, coeffs: &CoefficientField, dt: f64, clamp: bool) -> Result<StepOutcome> {
    let g = *f.grid();
    if coeffs.grid() != &g {
        return Err(Error::GridMismatch);
    }
    let d = g.dim();
    let n = g.points_per_axis() as isize;
    let h2 = g.spacing() * g.spacing();
    let vals = f.values();
    let strides: Vec<isize> = (0..d).map(|k| g.stride(k) as isize).collect();
    let updated: Vec<f64> = (0..g.len())
        .into_par_iter()
        .map(|idx| {
            let ix = g.unravel(idx);
            let at = |off: &[isize; MAX_DIM]| -> f64 {
                let mut flat = idx as isize;
                for k in 0..d {
                    let j = ix[k] as isize + off[k];
                    if j < 0 || j >= n {
                        return 0.0;
                    }
                    flat += off[k] * strides[k];
                }
                vals[flat as usize]
            };
            let a = &coeffs.abar()[idx];
            let f0 = vals[idx];
            let mut lap = 0.0;
            for i in 0..d {
                let mut e = [0isize; MAX_DIM];
                e[i] = 1;
                let plus = at(&e);
                e[i] = -1;
                let minus = at(&e);
                lap += a[i][i] * (plus + minus - 2.0 * f0);
                for j in i + 1..d {
                    let mut o = [0isize; MAX_DIM];
                    o[i] = 1;
                    o[j] = 1;
                    let pp = at(&o);
                    o[j] = -1;
                    let pm = at(&o);
                    o[i] = -1;
                    let mm = at(&o);
                    o[j] = 1;
                    let mp = at(&o);
                    lap += a[i][j] * 0.5 * (pp - pm - mp + mm);
                }
            }
            f0 + dt * (lap / h2 + coeffs.cbar()[idx] * f0)
        })
        .collect();
    if let Some(node) = updated.iter().position(|x| x.is_nan()) {
        return Err(Error::NanInStep { node });
    }
    let min_before_clamp = updated.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    let mut updated = updated;
    if clamp {
        for x in &mut updated {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
    }
    if let Some(node) = updated.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { node, value: updated[node] });
    }
    Ok(StepOutcome { field: ScalarField::from_raw(g, updated), min_before_clamp })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum AbortReason {
    MassDrift { t: f64, drift: f64 },
    Nan { t: f64, node: usize },
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    pub final_field: ScalarField,
    pub steps: usize,
    /// Some step fell back to tEnd/1000 because every coefficient vanished.
    pub dt_fallback: bool,
    pub aborted: Option<AbortReason>,
}

impl Trajectory {
    pub fn max_abs_mass_drift(&self) -> f64 {
        self.records.iter().fold(0.0, |m, r| m.max(r.mass_drift.abs()))
    }

    pub fn max_abs_energy_drift(&self) -> f64 {
        self.records.iter().fold(0.0, |m, r| m.max(r.energy_drift.abs()))
    }

    pub fn entropy_flags(&self) -> usize {
        self.records.iter().filter(|r| r.entropy_increase).count()
    }

    pub fn min_before_clamp(&self) -> f64 {
        self.records.iter().fold(f64::INFINITY, |m, r| m.min(r.min_f))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,supF,mass,energy,entropy,envelope,massDrift,energyDrift,minF")?;
        for r in &self.records {
            let env = r.envelope.map(|x| format!("{x:e}")).unwrap_or_default();
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{},{:e},{:e},{:e}",
                r.t, r.sup_f, r.mass, r.energy, r.entropy, env, r.mass_drift, r.energy_drift, r.min_f
            )?;
        }
        Ok(())
    }
}

fn relative(x: f64, x0: f64) -> f64 {
    if x0 == 0.0 {
        if x == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (x - x0) / x0
    }
}

/// Landau evolution: coefficients are recomputed from the current field.
pub fn evolve(f0: &ScalarField, config: &SolverConfig, env: Option<&Envelope>) -> Result<Trajectory> {
    let kernel = config.kernel;
    evolve_with(f0, config, env, |f| compute_coefficients(f, &kernel))
}

/// Evolution with a caller-supplied coefficient map, e.g. frozen
/// coefficients for linear tests.
pub fn evolve_with<F>(
    f0: &ScalarField,
    config: &SolverConfig,
    env: Option<&Envelope>,
    mut coefficients: F,
) -> Result<Trajectory>
where
    F: FnMut(&ScalarField) -> Result<CoefficientField>,
{
    config.validate()?;
    if f0.grid() != &config.grid {
        return Err(Error::GridMismatch);
    }
    if f0.min_value() < 0.0 {
        return param("initial field must be nonnegative");
    }
    let m0 = f0.mass();
    let e0 = f0.second_moment();
    let mut prev_entropy = f0.entropy();
    let t_final = config.t_end;

    let mut f = f0.clone();
    let mut t = config.t_start;
    let mut coeffs = coefficients(&f)?;
    let mut records = Vec::new();
    let mut steps = 0usize;
    let mut dt_fallback = false;
    let mut window_min = f64::INFINITY;
    let mut aborted = None;

    while t < t_final {
        if steps > 0 && steps.is_multiple_of(config.refresh_every) {
            coeffs = coefficients(&f)?;
        }
        let ts = cfl_timestep(&coeffs, config);
        dt_fallback |= ts.fallback;
        let remaining = t_final - t;
        // Land exactly on the final time; avoid a sliver step at the end.
        let dt = if ts.dt >= remaining * (1.0 - 1e-12) { remaining } else { ts.dt };
        let out = match step(&f, &coeffs, dt, config.clamp_negatives) {
            Ok(o) => o,
            Err(Error::NanInStep { node }) => {
                aborted = Some(AbortReason::Nan { t, node });
                break;
            }
            Err(e) => return Err(e),
        };
        f = out.field;
        window_min = window_min.min(out.min_before_clamp);
        steps += 1;
        t = if dt == remaining { t_final } else { t + dt };
        let last = t >= t_final;
        let mass = f.mass();
        let drift = relative(mass, m0);
        let over = drift.abs() > config.abort_mass_drift;
        if steps == 1 || steps.is_multiple_of(config.record_every) || last || over {
            let entropy = f.entropy();
            let rise = entropy - prev_entropy;
            records.push(TrajectoryRecord {
                t,
                sup_f: f.sup_norm(),
                mass,
                energy: f.second_moment(),
                entropy,
                envelope: env.map(|e| envelope_at(e, t)).transpose()?,
                mass_drift: drift,
                energy_drift: relative(f.second_moment(), e0),
                entropy_increase: rise > config.entropy_tolerance * prev_entropy.abs(),
                min_f: window_min,
            });
            prev_entropy = entropy;
            window_min = f64::INFINITY;
        }
        if over {
            aborted = Some(AbortReason::MassDrift { t, drift });
            break;
        }
    }
    Ok(Trajectory { records, final_field: f, steps, dt_fallback, aborted })
}
