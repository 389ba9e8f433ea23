//! Checks of the coefficient bounds on concrete distributions.
//!
//! The bounds are existence statements with unspecified constants, so each
//! check fits the tightest constant on the grid nodes; acceptance is about
//! positivity, finiteness and stability under refinement.

use serde::{Deserialize, Serialize};

use crate::coefficients::{unit_ball_volume, CoefficientField};
use crate::error::{param, Error, Result};
use crate::field::{PhysicalSummary, ScalarField};
use crate::spectral::{determinant, sym_eigenvalues};

/// Ball radius, density level and measure lower bound of a superlevel set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ThickSetParams {
    pub radius: f64,
    pub level: f64,
    pub measure: f64,
    pub t_threshold: f64,
}

/// R = sqrt(2E/M₁), ℓ = M₁/(4|B_R|), T = exp(8H̃/M₁) - 1, μ = M₁/(8T).
pub fn thick_set_params(summary: &PhysicalSummary, m1: f64, d: usize) -> Result<ThickSetParams> {
    if !(m1 > 0.0) {
        return param(format!("M1 = {m1} must be positive"));
    }
    if m1 > summary.mass {
        return param(format!("M1 = {m1} exceeds the mass {}", summary.mass));
    }
    if !(summary.energy.is_finite() && summary.entropy_prime.is_finite()) {
        return param("energy and entropy' must be finite");
    }
    let radius = (2.0 * summary.energy / m1).sqrt();
    let level = m1 / (4.0 * unit_ball_volume(d) * radius.powi(d as i32));
    let t_threshold = (8.0 * summary.entropy_prime / m1).exp_m1();
    Ok(ThickSetParams { radius, level, measure: m1 / (8.0 * t_threshold), t_threshold })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ThickSetCheck {
    pub measured_measure: f64,
    pub pass: bool,
}

/// Node count of {|v| ≤ R, f ≥ ℓ} times h^d, compared with μ.
pub fn verify_thick_set(f: &ScalarField, params: &ThickSetParams) -> ThickSetCheck {
    let g = f.grid();
    let r2 = params.radius * params.radius;
    let count = f.values().iter().enumerate().filter(|&(i, &x)| x >= params.level && g.norm_sq(i) <= r2).count();
    let measured_measure = count as f64 * g.cell_volume();
    ThickSetCheck { measured_measure, pass: measured_measure >= params.measure }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundSample {
    pub abs_v: f64,
    pub measured: f64,
    pub majorant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundCheckReport {
    pub lemma: String,
    pub gamma: f64,
    pub samples: Vec<BoundSample>,
    pub fitted_constant: f64,
    pub pass: bool,
}

impl BoundCheckReport {
    fn upper(lemma: &str, gamma: f64, samples: Vec<BoundSample>) -> Self {
        let fitted = samples.iter().map(|s| ratio(s.measured, s.majorant)).fold(0.0, f64::max);
        Self { lemma: lemma.into(), gamma, samples, fitted_constant: fitted, pass: fitted.is_finite() }
    }

    fn lower(lemma: &str, gamma: f64, samples: Vec<BoundSample>) -> Self {
        let fitted = samples.iter().map(|s| ratio(s.measured, s.majorant)).fold(f64::INFINITY, f64::min);
        let fitted = if samples.is_empty() { 0.0 } else { fitted };
        Self { lemma: lemma.into(), gamma, samples, fitted_constant: fitted, pass: fitted.is_finite() && fitted > 0.0 }
    }

    /// Whether the fitted constant respects a caller-supplied one.
    pub fn holds_with(&self, constant: f64, upper: bool) -> bool {
        if upper {
            self.fitted_constant <= constant
        } else {
            self.fitted_constant >= constant
        }
    }
}

/// measured/majorant with 0/0 read as 0.
fn ratio(measured: f64, majorant: f64) -> f64 {
    if measured == 0.0 {
        0.0
    } else {
        measured / majorant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SoftRegime {
    /// γ ∈ [-2, 0].
    ModeratelySoft,
    /// γ ∈ (-d-2, -2).
    VerySoft,
}

impl SoftRegime {
    pub fn for_gamma(gamma: f64) -> Self {
        if gamma >= -2.0 {
            Self::ModeratelySoft
        } else {
            Self::VerySoft
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AbarBoundReport {
    /// Fitted C in |ā| ≤ C(1+|v|^{γ+2}), or |ā| ≤ C ‖f‖∞^{-(γ+2)/d}.
    pub upper: BoundCheckReport,
    /// Fitted c in det ā ≥ c(1+|v|)^{(d-1)(γ+2)+γ}.
    pub lower: BoundCheckReport,
    pub pass: bool,
}

pub fn verify_abar_bounds(
    coeffs: &CoefficientField,
    gamma: f64,
    regime: SoftRegime,
    sup_f: f64,
) -> Result<AbarBoundReport> {
    let g = coeffs.grid();
    let d = g.dim();
    let df = d as f64;
    match regime {
        SoftRegime::ModeratelySoft if !(-2.0..=0.0).contains(&gamma) => {
            return param(format!("moderately soft bounds need gamma in [-2, 0], got {gamma}"))
        }
        SoftRegime::VerySoft if !(gamma > -df - 2.0 && gamma < -2.0) => {
            return param(format!("very soft bounds need gamma in (-d-2, -2), got {gamma}"))
        }
        _ => {}
    }
    if g.is_empty() {
        return Err(Error::Grid("empty grid".into()));
    }
    let det_exp = (df - 1.0) * (gamma + 2.0) + gamma;
    let mut up = Vec::with_capacity(g.len());
    let mut lo = Vec::with_capacity(g.len());
    for (i, m) in coeffs.abar().iter().enumerate() {
        let r = g.norm_sq(i).sqrt();
        let max_eig = sym_eigenvalues(m, d)[d - 1];
        let up_major = match regime {
            SoftRegime::ModeratelySoft => 1.0 + r.powf(gamma + 2.0),
            SoftRegime::VerySoft => sup_f.powf(-(gamma + 2.0) / df),
        };
        up.push(BoundSample { abs_v: r, measured: max_eig, majorant: up_major });
        lo.push(BoundSample { abs_v: r, measured: determinant(m, d), majorant: (1.0 + r).powf(det_exp) });
    }
    let upper = BoundCheckReport::upper("abar-upper", gamma, up);
    let lower = BoundCheckReport::lower("abar-det-lower", gamma, lo);
    let pass = upper.pass && lower.pass;
    Ok(AbarBoundReport { upper, lower, pass })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CbarVariant {
    /// c̄ ≲ M^{1+γ/d} ‖f‖∞^{-γ/d}, γ ∈ [-d, 0].
    Plain,
    /// c̄ ≤ C ‖f‖∞^{-γ/d} log(1+‖f‖∞)^{(d+γ)/(2γ)}, γ ∈ (-d, 0).
    LogImproved,
    /// c̄ ≤ C ‖f‖_p^{p(d+γ)/d} ‖f‖∞^{1-p(d+γ)/d}, p ∈ (d/(d+2+γ), d/(d+γ)).
    LpInterp,
}

impl CbarVariant {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Plain => "cbar-plain",
            Self::LogImproved => "cbar-log-improved",
            Self::LpInterp => "cbar-lp-interpolation",
        }
    }
}

/// Open interval of admissible Lebesgue exponents for the interpolation
/// bound; the upper end is +∞ at γ = -d.
pub fn lp_interp_interval(d: usize, gamma: f64) -> (f64, f64) {
    let df = d as f64;
    let hi = if gamma == -df { f64::INFINITY } else { df / (df + gamma) };
    (df / (df + 2.0 + gamma), hi)
}

pub fn verify_cbar_bound(
    coeffs: &CoefficientField,
    f: &ScalarField,
    gamma: f64,
    variant: CbarVariant,
    p: Option<f64>,
) -> Result<BoundCheckReport> {
    if coeffs.grid() != f.grid() {
        return Err(Error::GridMismatch);
    }
    let g = coeffs.grid();
    let df = g.dim() as f64;
    let sup = f.sup_norm();
    let majorant = match variant {
        CbarVariant::Plain => {
            if !(gamma >= -df && gamma <= 0.0) {
                return param(format!("plain bound needs gamma in [-d, 0], got {gamma}"));
            }
            f.mass().powf(1.0 + gamma / df) * sup.powf(-gamma / df)
        }
        CbarVariant::LogImproved => {
            if !(gamma > -df && gamma < 0.0) {
                return param(format!("log-improved bound needs gamma in the open range (-d, 0), got {gamma}"));
            }
            sup.powf(-gamma / df) * sup.ln_1p().powf((df + gamma) / (2.0 * gamma))
        }
        CbarVariant::LpInterp => {
            let p = p.ok_or_else(|| Error::Param("interpolation bound needs p".into()))?;
            let (lo, hi) = lp_interp_interval(g.dim(), gamma);
            if !(p > lo && p < hi) {
                return param(format!("p = {p} outside the open interval ({lo}, {hi})"));
            }
            let theta = p * (df + gamma) / df;
            f.lp_kappa_norm(0.0, p).powf(theta) * sup.powf(1.0 - theta)
        }
    };
    let samples = coeffs
        .cbar()
        .iter()
        .enumerate()
        .map(|(i, &c)| BoundSample { abs_v: g.norm_sq(i).sqrt(), measured: c, majorant })
        .collect();
    Ok(BoundCheckReport::upper(variant.name(), gamma, samples))
}

/// Constants fitted at one time slice, in the form the decay envelope uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FittedConstants {
    /// Determinant lower-bound constant.
    pub delta: f64,
    /// Diffusion upper-bound constant.
    pub lambda: f64,
    /// Constant multiplying ‖f‖∞^α (times the log factor at γ = -2) in the
    /// bound on c̄.
    pub nonlinearity: f64,
}

/// Fits δ, Λ and the reaction constant for γ ∈ [-2, 0]. The reaction
/// constant absorbs the mass factor of the plain bound; at γ = -2 it is the
/// log-improved constant.
pub fn fit_landau_constants(f: &ScalarField, coeffs: &CoefficientField, gamma: f64) -> Result<FittedConstants> {
    let abar = verify_abar_bounds(coeffs, gamma, SoftRegime::ModeratelySoft, f.sup_norm())?;
    let df = f.grid().dim() as f64;
    let nonlinearity = if gamma == -2.0 && df > 2.0 {
        verify_cbar_bound(coeffs, f, gamma, CbarVariant::LogImproved, None)?.fitted_constant
    } else {
        verify_cbar_bound(coeffs, f, gamma, CbarVariant::Plain, None)?.fitted_constant * f.mass().powf(1.0 + gamma / df)
    };
    Ok(FittedConstants { delta: abar.lower.fitted_constant, lambda: abar.upper.fitted_constant, nonlinearity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{compute_coefficients, KernelParams};
    use crate::grid::VelocityGrid;
    use std::f64::consts::PI;

    #[test]
    fn maxwellian_thick_set() {
        let g = VelocityGrid::new(2, 8.0, 129).unwrap();
        let f = ScalarField::maxwellian(g);
        let s = PhysicalSummary { mass: 1.0, energy: 2.0, ..f.summary() };
        let p = thick_set_params(&s, 1.0, 2).unwrap();
        assert!((p.radius - 2.0).abs() < 1e-15);
        assert!((p.level - 1.0 / (16.0 * PI)).abs() < 1e-15);
        assert_eq!(p.measure, 1.0 / (8.0 * p.t_threshold));
        let check = verify_thick_set(&f, &p);
        assert!(check.pass);
        // The superlevel set contains B_2, so the count is |B_2| up to
        // boundary cells.
        let perimeter = 4.0 * PI;
        assert!((check.measured_measure - 4.0 * PI).abs() <= 2.0 * g.spacing() * perimeter);
    }

    #[test]
    fn thick_set_guards_and_limits() {
        let s = PhysicalSummary { mass: 1.0, energy: 2.0, entropy: 0.0, entropy_prime: 0.1, sup_norm: 1.0 };
        assert!(thick_set_params(&s, 0.0, 2).is_err());
        assert!(thick_set_params(&s, 1.5, 2).is_err());
        let tiny = thick_set_params(&s, 1e-12, 2).unwrap();
        assert!(tiny.radius > 1e5);
    }

    #[test]
    fn thick_set_trivial_fields() {
        let g = VelocityGrid::new(2, 3.0, 31).unwrap();
        let p = ThickSetParams { radius: 2.0, level: 0.5, measure: 1.0, t_threshold: 1.0 };
        let zero = verify_thick_set(&ScalarField::zeros(g), &p);
        assert_eq!(zero.measured_measure, 0.0);
        assert!(!zero.pass);
        let flat = verify_thick_set(&ScalarField::new(g, vec![0.5; g.len()]).unwrap(), &p);
        assert!((flat.measured_measure - 4.0 * PI).abs() < 2.0 * g.spacing() * 4.0 * PI);
    }

    #[test]
    fn closed_form_det_ratio() {
        let g = VelocityGrid::new(2, 8.0, 129).unwrap();
        let co = compute_coefficients(&ScalarField::maxwellian(g), &KernelParams::new(2, 0.0).unwrap()).unwrap();
        for i in 0..g.len() {
            let r = g.norm_sq(i).sqrt();
            if r > 6.0 {
                continue;
            }
            // ā = (1 + |v|²)I - v⊗v for the unit Maxwellian, so det = 1 + |v|².
            let exact = 1.0 + r * r;
            let det = determinant(&co.abar()[i], 2);
            assert!((det - exact).abs() < 1e-3 * exact, "det {det} vs {exact} at |v| = {r}");
            let ratio = det / (1.0 + r).powi(2);
            assert!(ratio > 0.49 && ratio <= 1.0 + 1e-3);
        }
    }

    #[test]
    fn zero_field_has_no_lower_constant() {
        let g = VelocityGrid::new(2, 2.0, 9).unwrap();
        let co = compute_coefficients(&ScalarField::zeros(g), &KernelParams::new(2, -1.0).unwrap()).unwrap();
        let r = verify_abar_bounds(&co, -1.0, SoftRegime::ModeratelySoft, 0.0).unwrap();
        assert_eq!(r.lower.fitted_constant, 0.0);
        assert!(!r.pass);
    }

    #[test]
    fn regime_guards() {
        let g = VelocityGrid::new(3, 2.0, 5).unwrap();
        let co = compute_coefficients(&ScalarField::maxwellian(g), &KernelParams::new(3, -2.5).unwrap()).unwrap();
        assert!(verify_abar_bounds(&co, -2.5, SoftRegime::ModeratelySoft, 1.0).is_err());
        assert!(verify_abar_bounds(&co, -2.5, SoftRegime::VerySoft, 1.0).unwrap().pass);
        let f = ScalarField::maxwellian(g);
        assert!(verify_cbar_bound(&co, &f, -3.0, CbarVariant::LogImproved, None).is_err());
        assert!(verify_cbar_bound(&co, &f, -2.5, CbarVariant::LpInterp, Some(1.2)).is_err());
        assert!(verify_cbar_bound(&co, &f, -2.5, CbarVariant::LpInterp, Some(2.0)).is_ok());
        assert!(verify_cbar_bound(&co, &f, -2.5, CbarVariant::LpInterp, None).is_err());
    }

    #[test]
    fn endpoint_ratio_is_the_constant() {
        let g = VelocityGrid::new(2, 3.0, 21).unwrap();
        let f = ScalarField::maxwellian(g);
        let p = KernelParams::with_constants(2, -2.0, 1.0, 0.75).unwrap();
        let co = compute_coefficients(&f, &p).unwrap();
        for (c, x) in co.cbar().iter().zip(f.values()) {
            if *x > 0.0 {
                assert!((c / x - 0.75).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn plain_bound_scale_invariant_at_gamma_zero() {
        let g = VelocityGrid::new(2, 4.0, 33).unwrap();
        let p = KernelParams::new(2, 0.0).unwrap();
        let f = ScalarField::maxwellian(g);
        let base = verify_cbar_bound(&compute_coefficients(&f, &p).unwrap(), &f, 0.0, CbarVariant::Plain, None)
            .unwrap()
            .fitted_constant;
        for &lambda in &[0.1, 3.0, 250.0] {
            let fl = f.scaled(lambda);
            let c = verify_cbar_bound(&compute_coefficients(&fl, &p).unwrap(), &fl, 0.0, CbarVariant::Plain, None)
                .unwrap()
                .fitted_constant;
            assert!((c - base).abs() < 1e-12 * base);
        }
    }

    #[test]
    fn report_json_shape() {
        let r = BoundCheckReport::upper("x", -1.0, vec![BoundSample { abs_v: 0.5, measured: 1.0, majorant: 2.0 }]);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["fittedConstant"], 0.5);
        assert_eq!(v["samples"][0]["absV"], 0.5);
        assert_eq!(v["pass"], true);
    }
}
