//! Explicit L∞ decay envelopes m(t) = K t^{-d/(2p)} capped at time T, and
//! the parameter choices that feed them for the Landau coefficients.

use serde::{Deserialize, Serialize};

use crate::ellipticity::FittedConstants;
use crate::error::{param, Error, Result};
use crate::solver::TrajectoryRecord;

pub const DEFAULT_C1: f64 = 10.0;
pub const DEFAULT_C2: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundParams {
    pub d: usize,
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub delta: f64,
    pub lambda: f64,
    /// Bound on ∫(1+|v|)^κ f^p.
    pub n_bound: f64,
    /// Constant of the nonlinearity c̄ ≤ C ‖f‖∞^α.
    pub c_nonlin: f64,
    pub c1: f64,
    pub c2: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EnvelopeVariant {
    Power,
    LogCorrected,
}

impl BoundParams {
    fn check_common(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return param(format!("dimension {} not in 1..=3", self.d));
        }
        for (name, x) in [("delta", self.delta), ("Lambda", self.lambda), ("N", self.n_bound), ("C1", self.c1)] {
            if !(x.is_finite() && x > 0.0) {
                return param(format!("{name} = {x} must be positive and finite"));
            }
        }
        if !(self.p >= 1.0) {
            return param(format!("p = {} must be at least 1", self.p));
        }
        if !(self.beta >= -self.kappa / self.d as f64) {
            return param(format!("beta = {} violates beta >= -kappa/d = {}", self.beta, -self.kappa / self.d as f64));
        }
        Ok(())
    }

    /// Upper end 2p/d of the admissible nonlinearity exponents.
    pub fn critical_alpha(&self) -> f64 {
        2.0 * self.p / self.d as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Envelope {
    pub variant: EnvelopeVariant,
    pub k: f64,
    /// Cap time; may underflow to 0, in which case `log_t_cap` is used.
    pub t_cap: f64,
    pub log_t_cap: f64,
    /// d/(2p).
    pub exponent: f64,
}

pub fn compute_envelope(params: &BoundParams, variant: EnvelopeVariant) -> Result<Envelope> {
    params.check_common()?;
    let d = params.d as f64;
    let one_l = 1.0 + params.lambda;
    match variant {
        EnvelopeVariant::Power => {
            let crit = params.critical_alpha();
            if !(params.alpha >= 0.0) {
                return param(format!("alpha = {} must be nonnegative", params.alpha));
            }
            if params.alpha >= crit {
                return param(format!(
                    "alpha = {} >= 2p/d = {crit}: no decay bound of this form exists there \
                     (the self-similar blow-up family is a counterexample)",
                    params.alpha
                ));
            }
            if !(params.c_nonlin.is_finite() && params.c_nonlin > 0.0) {
                return param(format!("C = {} must be positive", params.c_nonlin));
            }
            let kp = params.c1 * one_l.powi(params.d as i32 + 1) * params.n_bound / params.delta;
            let k = kp.powf(1.0 / params.p);
            let e = 1.0 / (1.0 - params.alpha * d / (2.0 * params.p));
            let base = one_l / (params.c_nonlin * k.powf(params.alpha));
            let t_cap = base.powf(e);
            let log_t_cap = if t_cap > 0.0 && t_cap.is_finite() {
                t_cap.ln()
            } else {
                e * (one_l.ln() - params.c_nonlin.ln() - params.alpha * kp.ln() / params.p)
            };
            finish(variant, k, t_cap, log_t_cap, d / (2.0 * params.p))
        }
        EnvelopeVariant::LogCorrected => {
            if !(params.eps > 0.0) {
                return param(format!("eps = {} must be positive", params.eps));
            }
            if !(params.c2.is_finite() && params.c2 > 0.0) {
                return param(format!("C2 = {} must be positive", params.c2));
            }
            let k = params.c1 * params.n_bound * one_l.powi(params.d as i32 + 1) / params.delta;
            let k2d = k.powf(2.0 / d);
            let inner = (params.c2 * k2d / one_l).powf(1.0 / params.eps);
            let log_t_cap = (2.0 / d) * k.ln() - (2.0 / d) * inner;
            let t_cap = k2d * (-(2.0 / d) * inner).exp();
            finish(variant, k, t_cap, log_t_cap, d / 2.0)
        }
    }
}

fn finish(variant: EnvelopeVariant, k: f64, t_cap: f64, log_t_cap: f64, exponent: f64) -> Result<Envelope> {
    if !(k.is_finite() && k > 0.0) || log_t_cap.is_nan() {
        return Err(Error::Param(format!("envelope constants overflow (K = {k}, log T = {log_t_cap})")));
    }
    Ok(Envelope { variant, k, t_cap, log_t_cap, exponent })
}

impl Envelope {
    /// Largest value the envelope ever takes after the cap: K T^{-d/(2p)}.
    pub fn cap_value(&self) -> f64 {
        if self.t_cap > 0.0 && self.t_cap.is_finite() {
            self.k * self.t_cap.powf(-self.exponent)
        } else {
            (self.k.ln() - self.exponent * self.log_t_cap).exp()
        }
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        envelope_at(self, t)
    }
}

/// K t^{-d/(2p)} for t ≤ T, K T^{-d/(2p)} afterwards.
pub fn envelope_at(env: &Envelope, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return param(format!("envelope time t = {t} must be positive"));
    }
    let below = if env.t_cap > 0.0 && env.t_cap.is_finite() { t <= env.t_cap } else { t.ln() <= env.log_t_cap };
    Ok(if below { env.k * t.powf(-env.exponent) } else { env.cap_value() })
}

/// Bounds on mass, energy and entropy of the initial datum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MomentBounds {
    pub m1: f64,
    pub m0: f64,
    pub e0: f64,
    pub h0: f64,
}

/// Parameters for γ ∈ [-2, 0]: power variant with α = -γ/d, p = 1,
/// β = 2+γ, κ = 2, N = 2M₀ + 2E₀ for γ > -2; log variant with
/// ε = (d-2)/4, β = 0 at γ = -2 (needs d ≥ 3).
pub fn landau_bound_params(
    d: usize,
    gamma: f64,
    moments: &MomentBounds,
    fitted: &FittedConstants,
    c1: f64,
    c2: f64,
) -> Result<(BoundParams, EnvelopeVariant)> {
    if !(-2.0..=0.0).contains(&gamma) {
        return param(format!("gamma = {gamma} outside [-2, 0]; use the conditional parameters below -2"));
    }
    let df = d as f64;
    let n_bound = 2.0 * moments.m0 + 2.0 * moments.e0;
    let base = BoundParams {
        d,
        p: 1.0,
        alpha: -gamma / df,
        beta: 2.0 + gamma,
        kappa: 2.0,
        delta: fitted.delta,
        lambda: fitted.lambda,
        n_bound,
        c_nonlin: fitted.nonlinearity,
        c1,
        c2,
        eps: 0.0,
    };
    if gamma == -2.0 {
        if d < 3 {
            return param(format!("gamma = -2 needs the log-corrected bound, which requires d >= 3 (d = {d})"));
        }
        let p = BoundParams { alpha: 2.0 / df, beta: 0.0, eps: (df - 2.0) / 4.0, ..base };
        return Ok((p, EnvelopeVariant::LogCorrected));
    }
    Ok((base, EnvelopeVariant::Power))
}

/// Lower bound on κ for the conditional parameters.
pub fn conditional_kappa_floor(d: usize, gamma: f64, p: f64) -> f64 {
    let df = d as f64;
    (p * (2.0 + gamma + df) - df).max(2.0 + 0.5 * df * df * (1.0 - 1.0 / p) - df * (1.0 + gamma / 2.0))
}

/// Parameters for γ ∈ [-d, -2) under an L^p_κ bound W₀:
/// α = 1 - p(d+γ)/d, β = (2+γ+d-d/p)/2, N = W₀.
#[allow(clippy::too_many_arguments)]
pub fn conditional_bound_params(
    d: usize,
    gamma: f64,
    p: f64,
    kappa: f64,
    w0: f64,
    delta: f64,
    lambda: f64,
    c_nonlin: f64,
    c1: f64,
) -> Result<BoundParams> {
    let df = d as f64;
    if !(gamma >= -df && gamma < -2.0) {
        return param(format!("gamma = {gamma} outside [-d, -2) = [{}, -2)", -df));
    }
    let p_lo = df / (df + 2.0 + gamma);
    if !(p > p_lo) {
        return param(format!("p = {p} violates p > d/(d+2+gamma) = {p_lo}"));
    }
    if gamma > -df {
        let p_hi = df / (df + gamma);
        if !(p < p_hi) {
            return param(format!("p = {p} violates p < d/(d+gamma) = {p_hi}"));
        }
    }
    let k1 = p * (2.0 + gamma + df) - df;
    if !(kappa > k1) {
        return param(format!("kappa = {kappa} violates kappa > p(2+gamma+d) - d = {k1}"));
    }
    let k2 = 2.0 + 0.5 * df * df * (1.0 - 1.0 / p) - df * (1.0 + gamma / 2.0);
    if !(kappa > k2) {
        return param(format!("kappa = {kappa} violates kappa > 2 + (d^2/2)(1 - 1/p) - d(1 + gamma/2) = {k2}"));
    }
    let alpha = 1.0 - p * (df + gamma) / df;
    let beta = (2.0 + gamma + df - df / p) / 2.0;
    if !(beta > 0.0 && beta < 1.0) {
        return param(format!("beta = {beta} not in (0, 1)"));
    }
    if !(alpha < 2.0 * p / df) {
        return param(format!("alpha = {alpha} not below 2p/d = {}", 2.0 * p / df));
    }
    let out =
        BoundParams { d, p, alpha, beta, kappa, delta, lambda, n_bound: w0, c_nonlin, c1, c2: DEFAULT_C2, eps: 0.0 };
    out.check_common()?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EnvelopeCheck {
    pub worst_ratio: f64,
    pub worst_time: f64,
    pub pass: bool,
}

/// max over records of supF(t)/m(t); passes when at most 1.
pub fn envelope_check(trajectory: &[TrajectoryRecord], env: &Envelope) -> Result<EnvelopeCheck> {
    envelope_check_pairs(trajectory.iter().map(|r| (r.t, r.sup_f)), env)
}

/// Same as [`envelope_check`] on bare (t, sup f) pairs.
pub fn envelope_check_pairs(samples: impl IntoIterator<Item = (f64, f64)>, env: &Envelope) -> Result<EnvelopeCheck> {
    let mut worst = EnvelopeCheck { worst_ratio: 0.0, worst_time: f64::NAN, pass: true };
    let mut last = 0.0;
    let mut any = false;
    for (t, sup) in samples {
        if !(t > 0.0) {
            return param(format!("record time {t} must be positive"));
        }
        if any && t <= last {
            return param(format!("record times must increase ({last} then {t})"));
        }
        any = true;
        last = t;
        let r = sup / envelope_at(env, t)?;
        if r > worst.worst_ratio || worst.worst_time.is_nan() {
            worst.worst_ratio = r;
            worst.worst_time = t;
        }
    }
    if !any {
        return param("empty trajectory");
    }
    worst.pass = worst.worst_ratio <= 1.0;
    Ok(worst)
}
