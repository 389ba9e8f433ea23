//! Self-similar blow-up for f_t ≤ Δf + f^{1+α} when α ≥ 2p/d.
//!
//! With a radial bump φ supported in the closed unit ball,
//! f(t,x) = (1-t)^{-d/(2p)} φ(x/√(1-t)) keeps ‖f(t)‖_p fixed and
//! f(t,0) → ∞ as t → 1. The inequality reduces to the stationary one
//! (d/(2p))φ + ½ y·∇φ ≤ Δφ + φ^{1+α}, which holds near the edge through
//! Δφ alone and in the interior once the amplitude is large.

use serde::{Deserialize, Serialize};

use crate::bounds::Envelope;
use crate::coefficients::unit_sphere_area;
use crate::error::{param, Error, Result};

/// φ(r) = k exp(1 - 1/(1-r²)) on r < 1, zero outside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub amplitude: f64,
}

impl BumpProfile {
    pub fn new(amplitude: f64) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return param(format!("amplitude {amplitude} must be positive"));
        }
        Ok(Self { amplitude })
    }

    pub fn value(&self, r: f64) -> f64 {
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let u = 1.0 - r * r;
        self.amplitude * (1.0 - 1.0 / u).exp()
    }

    /// φ'(r) = -2r φ / u².
    pub fn derivative(&self, r: f64) -> f64 {
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let u = 1.0 - r * r;
        -2.0 * r * self.value(r) / (u * u)
    }

    /// φ''(r) = φ (4r²/u⁴ - 8r²/u³ - 2/u²).
    pub fn second_derivative(&self, r: f64) -> f64 {
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let u = 1.0 - r * r;
        let r2 = r * r;
        self.value(r) * (4.0 * r2 / u.powi(4) - 8.0 * r2 / u.powi(3) - 2.0 / (u * u))
    }

    /// Δφ/φ = 4r²/u⁴ - 8r²/u³ - 2d/u², finite at r = 0 (-2d).
    pub fn laplacian_over_value(r: f64, d: usize) -> f64 {
        let u = 1.0 - r * r;
        let r2 = r * r;
        4.0 * r2 / u.powi(4) - 8.0 * r2 / u.powi(3) - 2.0 * d as f64 / (u * u)
    }

    /// Radial Laplacian φ'' + (d-1)φ'/r.
    pub fn laplacian(&self, r: f64, d: usize) -> f64 {
        if r.abs() >= 1.0 {
            return 0.0;
        }
        self.value(r) * Self::laplacian_over_value(r, d)
    }

    /// Linear part of the stationary defect divided by φ:
    /// d/(2p) + (r φ'/2)/φ - Δφ/φ. Nonpositive means the linear terms
    /// alone satisfy the inequality.
    pub fn linear_bracket(r: f64, d: usize, p: f64) -> f64 {
        let u = 1.0 - r * r;
        d as f64 / (2.0 * p) - r * r / (u * u) - Self::laplacian_over_value(r, d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LimitCheck {
    pub radii: Vec<f64>,
    /// Δφ/|φ'| per radius.
    pub laplacian_over_gradient: Vec<f64>,
    /// Δφ/φ per radius.
    pub laplacian_over_value: Vec<f64>,
    pub monotone_divergent: bool,
}

/// Both ratios along a ray; they must set new maxima at every radius past
/// 0.9 and exceed 10³ at the last radius.
pub fn limit_condition_check(profile: &BumpProfile, d: usize, radii: &[f64]) -> Result<LimitCheck> {
    if radii.is_empty() {
        return param("radius grid is empty");
    }
    if let Some(r) = radii.iter().find(|&&r| !(0.0..1.0).contains(&r)) {
        return param(format!("radius {r} outside [0, 1)"));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return param("radius grid must increase");
    }
    let by_grad: Vec<f64> = radii.iter().map(|&r| profile.laplacian(r, d) / profile.derivative(r).abs()).collect();
    let by_value: Vec<f64> = radii
        .iter()
        .map(|&r| {
            let v = profile.value(r);
            if v > 0.0 {
                profile.laplacian(r, d) / v
            } else {
                BumpProfile::laplacian_over_value(r, d)
            }
        })
        .collect();
    let diverges = |seq: &[f64]| {
        let mut best = f64::NEG_INFINITY;
        for (&r, &x) in radii.iter().zip(seq) {
            if r >= 0.9 && !(x > best) {
                return false;
            }
            best = best.max(x);
        }
        seq.last().is_some_and(|&x| x > 1e3)
    };
    let monotone_divergent = diverges(&by_grad) && diverges(&by_value);
    Ok(LimitCheck {
        radii: radii.to_vec(),
        laplacian_over_gradient: by_grad,
        laplacian_over_value: by_value,
        monotone_divergent,
    })
}

pub const CALIBRATION_SAMPLES: usize = 10_000;
const MAX_SHELL_EXPONENT: i32 = 20;
const MAX_AMPLITUDE_EXPONENT: i32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Calibration {
    pub k: f64,
    pub delta_shell: f64,
    /// min over check radii of φ^α - (linear bracket); positive means the
    /// stationary inequality holds strictly there.
    pub min_margin: f64,
}

fn check_radii(samples: usize, extra: f64) -> Vec<f64> {
    let mut r: Vec<f64> = (0..samples).map(|i| i as f64 / samples as f64).collect();
    r.push(extra);
    r.sort_by(f64::total_cmp);
    r
}

/// Largest shell width 2^{-k} on which the linear terms win, then the
/// smallest amplitude 2^j making the full inequality hold inside; the
/// interface radius must satisfy both.
pub fn calibrate_profile(d: usize, p: f64, alpha: f64) -> Result<Calibration> {
    validate_family(d, p, alpha)?;
    let samples = CALIBRATION_SAMPLES;
    let mut delta = None;
    for k in 1..=MAX_SHELL_EXPONENT {
        let dl = 2f64.powi(-k);
        let edge = 1.0 - dl;
        let ok = check_radii(samples, edge)
            .iter()
            .filter(|&&r| r >= edge)
            .all(|&r| BumpProfile::linear_bracket(r, d, p) <= 0.0);
        if ok {
            delta = Some(dl);
            break;
        }
    }
    let delta =
        delta.ok_or_else(|| Error::Calibration(format!("no shell width 2^-k, k <= {MAX_SHELL_EXPONENT}, works")))?;
    let edge = 1.0 - delta;
    let radii = check_radii(samples, edge);
    for j in 0..=MAX_AMPLITUDE_EXPONENT {
        let k = 2f64.powi(j);
        let prof = BumpProfile { amplitude: k };
        let margin = |r: f64| prof.value(r).powf(alpha) - BumpProfile::linear_bracket(r, d, p);
        let inner_ok = radii.iter().filter(|&&r| r <= edge).all(|&r| margin(r) >= 0.0);
        let interface_ok = BumpProfile::linear_bracket(edge, d, p) <= 0.0 && margin(edge) >= 0.0;
        if inner_ok && interface_ok {
            let min_margin = radii.iter().map(|&r| margin(r)).fold(f64::INFINITY, f64::min);
            return Ok(Calibration { k, delta_shell: delta, min_margin });
        }
    }
    Err(Error::Calibration(format!("no amplitude 2^j, j <= {MAX_AMPLITUDE_EXPONENT}, works")))
}

fn validate_family(d: usize, p: f64, alpha: f64) -> Result<()> {
    if !(1..=3).contains(&d) {
        return param(format!("dimension {d} not in 1..=3"));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return param(format!("p = {p} must be at least 1"));
    }
    let crit = 2.0 * p / d as f64;
    if !(alpha >= crit) {
        return param(format!("alpha = {alpha} below 2p/d = {crit}: the blow-up family needs alpha >= 2p/d"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SelfSimilarFamily {
    pub d: usize,
    pub p: f64,
    pub alpha: f64,
    pub profile: BumpProfile,
    pub delta_shell: Option<f64>,
}

impl SelfSimilarFamily {
    pub fn new(d: usize, p: f64, alpha: f64, profile: BumpProfile) -> Result<Self> {
        validate_family(d, p, alpha)?;
        Ok(Self { d, p, alpha, profile, delta_shell: None })
    }

    pub fn calibrated(d: usize, p: f64, alpha: f64) -> Result<Self> {
        let c = calibrate_profile(d, p, alpha)?;
        Ok(Self { d, p, alpha, profile: BumpProfile { amplitude: c.k }, delta_shell: Some(c.delta_shell) })
    }

    fn exponent(&self) -> f64 {
        self.d as f64 / (2.0 * self.p)
    }

    /// f(t, x) at |x| = r.
    pub fn value(&self, t: f64, r: f64) -> f64 {
        let s = 1.0 - t;
        s.powf(-self.exponent()) * self.profile.value(r / s.sqrt())
    }

    pub fn at_origin(&self, t: f64) -> f64 {
        self.profile.amplitude * (1.0 - t).powf(-self.exponent())
    }

    /// f_t - Δf - f^{1+α} at |x| = r, evaluated through the similarity
    /// variable. A positive defect whose magnitude underflows is reported
    /// as the smallest positive number so it is never mistaken for 0.
    pub fn defect(&self, t: f64, r: f64) -> f64 {
        let s = 1.0 - t;
        let y = r / s.sqrt();
        if y >= 1.0 {
            return 0.0;
        }
        let phi = self.profile.value(y);
        let bracket = BumpProfile::linear_bracket(y, self.d, self.p)
            - s.powf(1.0 - self.alpha * self.exponent()) * phi.powf(self.alpha);
        let v = s.powf(-1.0 - self.exponent()) * phi * bracket;
        if bracket > 0.0 && !(v > 0.0) {
            f64::MIN_POSITIVE
        } else {
            v
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BlowupSample {
    pub t: f64,
    pub f_at0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SelfSimilarReport {
    pub k: f64,
    pub delta_shell: f64,
    pub max_residual: f64,
    pub lp_deviation: f64,
    pub lp_norms: Vec<f64>,
    pub blowup_samples: Vec<BlowupSample>,
}

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// ∫_{|x|<1} g(|x|) dx by composite Gauss-Legendre in the radius over fixed
/// panels of [0, 1].
pub fn radial_integral(d: usize, g: impl Fn(f64) -> f64) -> f64 {
    const PANELS: usize = 256;
    const ORDER: usize = 16;
    let (x, w) = gauss_legendre(ORDER);
    let hw = 0.5 / PANELS as f64;
    let mut s = 0.0;
    for k in 0..PANELS {
        let mid = (2 * k + 1) as f64 * hw;
        for (xi, wi) in x.iter().zip(&w) {
            let r = mid + hw * xi;
            s += wi * hw * g(r) * r.powi(d as i32 - 1);
        }
    }
    unit_sphere_area(d) * s
}

/// Checks the blow-up family on `t_grid` ⊂ (0, 1) at `radial_samples`
/// similarity radii per time.
pub fn verify_self_similar(
    family: &SelfSimilarFamily,
    t_grid: &[f64],
    radial_samples: usize,
) -> Result<SelfSimilarReport> {
    let delta = family.delta_shell.ok_or_else(|| Error::Calibration("family has not been calibrated".into()))?;
    if let Some(t) = t_grid.iter().find(|&&t| !(t > 0.0 && t < 1.0)) {
        return param(format!("time {t} outside (0, 1)"));
    }
    if radial_samples == 0 {
        return param("need at least one radial sample");
    }
    let p = family.p;
    let d = family.d;
    let mut max_residual = f64::NEG_INFINITY;
    for &t in t_grid {
        let scale = (1.0 - t).sqrt();
        for i in 0..radial_samples {
            let y = i as f64 / radial_samples as f64;
            max_residual = max_residual.max(family.defect(t, y * scale));
        }
    }
    let reference = radial_integral(d, |r| family.profile.value(r).powf(p)).powf(1.0 / p);
    let lp_norms: Vec<f64> =
        t_grid.iter().map(|&t| radial_integral(d, |r| family.value(t, r).powf(p)).powf(1.0 / p)).collect();
    let lp_deviation = lp_norms.iter().fold(0.0_f64, |m, &x| m.max((x - reference).abs() / reference));
    let blowup_samples = t_grid.iter().map(|&t| BlowupSample { t, f_at0: family.at_origin(t) }).collect();
    Ok(SelfSimilarReport {
        k: family.profile.amplitude,
        delta_shell: delta,
        max_residual,
        lp_deviation,
        lp_norms,
        blowup_samples,
    })
}

/// First time the family's peak k(1-t)^{-d/(2p)} exceeds the envelope.
pub fn predicted_envelope_failure(family: &SelfSimilarFamily, env: &Envelope) -> f64 {
    let e = family.exponent();
    let k = family.profile.amplitude;
    let y = (env.k / k).powf(1.0 / e);
    let t_free = y / (1.0 + y);
    let log_t_free = t_free.ln();
    if log_t_free <= env.log_t_cap {
        t_free
    } else {
        // Capped: k(1-t)^{-e} = K T^{-e}.
        1.0 - (env.log_t_cap + (k / env.k).ln() / e).exp()
    }
}

/// Failure time against the constant level `level`: 1 - (k/level)^{2p/d}.
pub fn constant_level_failure(family: &SelfSimilarFamily, level: f64) -> f64 {
    1.0 - (family.profile.amplitude / level).powf(1.0 / family.exponent())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::EnvelopeVariant;
    use proptest::prelude::*;

    #[test]
    fn profile_normalisation_and_support() {
        let p = BumpProfile::new(3.0).unwrap();
        assert_eq!(p.value(0.0), 3.0);
        assert_eq!(p.value(1.0), 0.0);
        assert_eq!(p.value(1.5), 0.0);
        assert_eq!(p.laplacian(0.0, 2), -12.0);
        assert!(BumpProfile::new(0.0).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = BumpProfile::new(1.0).unwrap();
        for &r in &[0.1, 0.3, 0.6, 0.8] {
            let h = 1e-5;
            let fd1 = (p.value(r + h) - p.value(r - h)) / (2.0 * h);
            let fd2 = (p.value(r + h) - 2.0 * p.value(r) + p.value(r - h)) / (h * h);
            assert!((fd1 - p.derivative(r)).abs() < 1e-6 * p.derivative(r).abs().max(1.0));
            assert!((fd2 - p.second_derivative(r)).abs() < 1e-4 * p.second_derivative(r).abs().max(1.0));
            for d in 1..=3 {
                let lap = p.second_derivative(r) + (d as f64 - 1.0) * p.derivative(r) / r;
                assert!((lap - p.laplacian(r, d)).abs() < 1e-12 * lap.abs().max(1.0));
            }
        }
    }

    #[test]
    fn limit_ratios_diverge() {
        let p = BumpProfile::new(1.0).unwrap();
        let c = limit_condition_check(&p, 2, &[0.9, 0.99, 0.999]).unwrap();
        assert!(c.monotone_divergent);
        assert!(c.laplacian_over_value[2] > 1e3 && c.laplacian_over_gradient[2] > 1e3);
        let scaled = limit_condition_check(&BumpProfile::new(2.0).unwrap(), 2, &[0.9, 0.99, 0.999]).unwrap();
        for (a, b) in c.laplacian_over_value.iter().zip(&scaled.laplacian_over_value) {
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
        for (a, b) in c.laplacian_over_gradient.iter().zip(&scaled.laplacian_over_gradient) {
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
        let at0 = limit_condition_check(&p, 2, &[0.0]).unwrap();
        assert_eq!(at0.laplacian_over_value[0], -4.0);
        assert!(limit_condition_check(&p, 2, &[0.9, 1.0]).is_err());
        assert!(limit_condition_check(&p, 2, &[0.99, 0.9]).is_err());
    }

    #[test]
    fn calibration_for_the_plane() {
        let c = calibrate_profile(2, 1.0, 1.0).unwrap();
        assert!(c.k >= 1.0 && c.min_margin > 0.0);
        // Centre: (d/(2p)) k ≤ Δφ(0) + k^{1+α} reads k^α ≥ d/(2p) + 2d.
        assert!(c.k >= 5.0);
        assert!(calibrate_profile(2, 1.0, 0.5).is_err());
        assert!(calibrate_profile(2, 2.0, 2.0).is_ok());
    }

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        let (x, w) = gauss_legendre(16);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((s - 2.0 / 31.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let area = radial_integral(2, |_| 1.0);
        assert!((area - std::f64::consts::PI).abs() < 1e-13);
    }

    #[test]
    fn uncalibrated_family_is_rejected() {
        let fam = SelfSimilarFamily::new(2, 1.0, 1.0, BumpProfile::new(8.0).unwrap()).unwrap();
        assert!(verify_self_similar(&fam, &[0.5], 100).is_err());
    }

    #[test]
    fn failure_time_formulas_agree() {
        let fam = SelfSimilarFamily::calibrated(2, 1.0, 1.0).unwrap();
        let env =
            Envelope { variant: EnvelopeVariant::Power, k: 100.0, t_cap: 0.5, log_t_cap: 0.5f64.ln(), exponent: 1.0 };
        let t = predicted_envelope_failure(&fam, &env);
        let cap = env.cap_value();
        assert!((t - constant_level_failure(&fam, cap)).abs() < 1e-14);
        assert!((fam.at_origin(t) - cap).abs() < 1e-9 * cap);
    }

    proptest! {
        #[test]
        fn support_shrinks_with_time(t in 0.0f64..0.999, r in 0.0f64..2.0) {
            let fam = SelfSimilarFamily::new(2, 1.0, 1.0, BumpProfile::new(8.0).unwrap()).unwrap();
            if r >= (1.0 - t).sqrt() {
                prop_assert_eq!(fam.value(t, r), 0.0);
            }
        }
    }
}
