//! The four subcommands. Each returns whether its checks passed; errors
//! are configuration or usage problems.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use landau_core::bounds::{
    compute_envelope, conditional_bound_params, conditional_kappa_floor, envelope_check, landau_bound_params,
    BoundParams, Envelope, EnvelopeVariant, MomentBounds,
};
use landau_core::counterexample::{calibrate_profile, verify_self_similar, SelfSimilarFamily};
use landau_core::ellipticity::{
    fit_landau_constants, lp_interp_interval, thick_set_params, verify_abar_bounds, verify_cbar_bound,
    verify_thick_set, CbarVariant, FittedConstants, SoftRegime,
};
use landau_core::solver::{evolve, AbortReason, SolverConfig};
use landau_core::spectral::{spectral_diagnostics, write_spectra_csv};
use landau_core::{compute_coefficients, divergence_identity_residual, CoefficientField, ScalarField};

use crate::config::RunConfig;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Echo of the resolved configuration plus what the run produced.
pub fn write_manifest(dir: &Path, command: &str, config: &RunConfig, outputs: &[&str], pass: bool) -> Result<()> {
    let kernel = config.kernel().ok();
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "resolvedKernel": kernel,
        "outputs": outputs,
        "pass": pass,
    });
    write_json(dir, "manifest.json", &manifest)
}

pub struct Run {
    pub pass: bool,
    pub outputs: Vec<&'static str>,
}

pub fn coeffs(config: &RunConfig, out: &Path) -> Result<Run> {
    let grid = config.grid()?;
    let kernel = config.kernel()?;
    let f = config.initial_field(grid)?;
    let co = compute_coefficients(&f, &kernel)?;
    let spectra = spectral_diagnostics(&co)?;
    let mut w = create(out, "field.csv")?;
    f.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(out, "coefficients.csv")?;
    co.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(out, "spectra.csv")?;
    write_spectra_csv(&co, &spectra, &mut w)?;
    w.flush()?;
    Ok(Run { pass: true, outputs: vec!["field.csv", "coefficients.csv", "spectra.csv"] })
}

fn parse_variant(name: &str) -> Result<CbarVariant> {
    Ok(match name {
        "plain" => CbarVariant::Plain,
        "logImproved" => CbarVariant::LogImproved,
        "lpInterp" => CbarVariant::LpInterp,
        other => bail!("unknown c̄ bound variant {other:?} (plain, logImproved, lpInterp)"),
    })
}

fn admissible_variants(d: usize, gamma: f64) -> Vec<CbarVariant> {
    let df = d as f64;
    let mut v = Vec::new();
    if (-df..=0.0).contains(&gamma) {
        v.push(CbarVariant::Plain);
    }
    if gamma > -df && gamma < 0.0 {
        v.push(CbarVariant::LogImproved);
    }
    v.push(CbarVariant::LpInterp);
    v
}

fn default_interp_exponent(d: usize, gamma: f64) -> f64 {
    let (lo, hi) = lp_interp_interval(d, gamma);
    if hi.is_finite() {
        0.5 * (lo + hi)
    } else {
        lo + 1.0
    }
}

pub fn verify(config: &RunConfig, out: &Path) -> Result<Run> {
    let grid = config.grid()?;
    let kernel = config.kernel()?;
    let d = grid.dim();
    let gamma = kernel.gamma;
    let f = config.initial_field(grid)?;
    let co = compute_coefficients(&f, &kernel)?;
    let summary = f.summary();

    let variants = match &config.verify.variants {
        Some(names) => names.iter().map(|n| parse_variant(n)).collect::<Result<Vec<_>>>()?,
        None => admissible_variants(d, gamma),
    };
    let p_interp = config.verify.p.unwrap_or_else(|| default_interp_exponent(d, gamma));
    let mut cbar_reports = Vec::new();
    for v in variants {
        let p = (v == CbarVariant::LpInterp).then_some(p_interp);
        cbar_reports.push(verify_cbar_bound(&co, &f, gamma, v, p)?);
    }

    let thick = if summary.mass > 0.0 {
        let m1 = config.verify.m1.unwrap_or(summary.mass);
        let params = thick_set_params(&summary, m1, d)?;
        let check = verify_thick_set(&f, &params);
        json!({ "params": params, "measuredMeasure": check.measured_measure, "pass": check.pass })
    } else {
        json!({ "params": null, "measuredMeasure": 0.0, "pass": false, "reason": "field has zero mass" })
    };
    let thick_pass = thick["pass"].as_bool().unwrap_or(false);

    let abar = verify_abar_bounds(&co, gamma, SoftRegime::for_gamma(gamma), f.sup_norm())?;
    let residual = divergence_identity_residual(&co)?;
    let divergence_pass = residual < config.verify.divergence_tolerance;

    let pass = thick_pass && abar.pass && cbar_reports.iter().all(|r| r.pass) && divergence_pass;
    write_json(out, "thick_set.json", &thick)?;
    write_json(out, "abar_bounds.json", &abar)?;
    write_json(out, "cbar_bounds.json", &cbar_reports)?;
    let summary_json = json!({
        "thickSet": thick_pass,
        "abarBounds": abar.pass,
        "cbarBounds": cbar_reports.iter().map(|r| json!({ "lemma": r.lemma, "pass": r.pass, "fittedConstant": r.fitted_constant })).collect::<Vec<_>>(),
        "divergenceResidual": residual,
        "divergencePass": divergence_pass,
        "pass": pass,
    });
    write_json(out, "verify.json", &summary_json)?;
    Ok(Run { pass, outputs: vec!["thick_set.json", "abar_bounds.json", "cbar_bounds.json", "verify.json"] })
}

/// Envelope parameters fitted on the initial field.
fn fitted_envelope(
    config: &RunConfig,
    f: &ScalarField,
    co: &CoefficientField,
) -> Result<(BoundParams, EnvelopeVariant, Value)> {
    let d = f.grid().dim();
    let gamma = config.kernel.gamma;
    let b = &config.bounds;
    let s = f.summary();
    if gamma >= -2.0 {
        let fitted = fit_landau_constants(f, co, gamma)?;
        let moments = MomentBounds { m1: b.m1.unwrap_or(s.mass), m0: s.mass, e0: s.energy, h0: s.entropy_prime };
        let (params, variant) = landau_bound_params(d, gamma, &moments, &fitted, b.c1, b.c2)?;
        return Ok((params, variant, json!({ "fitted": fitted, "moments": moments })));
    }
    let (Some(p), Some(w0)) = (b.p, b.w0) else {
        bail!("gamma = {gamma} < -2 needs the conditional bound: set bounds.p and bounds.W0");
    };
    let kappa = b.kappa.unwrap_or_else(|| conditional_kappa_floor(d, gamma, p) + 1.0);
    let abar = verify_abar_bounds(co, gamma, SoftRegime::VerySoft, f.sup_norm())?;
    let interp = verify_cbar_bound(co, f, gamma, CbarVariant::LpInterp, Some(p))?;
    let theta = p * (d as f64 + gamma) / d as f64;
    let fitted = FittedConstants {
        delta: abar.lower.fitted_constant,
        lambda: abar.upper.fitted_constant * f.sup_norm().powf(-(gamma + 2.0) / d as f64),
        nonlinearity: interp.fitted_constant * f.lp_kappa_norm(0.0, p).powf(theta),
    };
    let params =
        conditional_bound_params(d, gamma, p, kappa, w0, fitted.delta, fitted.lambda, fitted.nonlinearity, b.c1)?;
    Ok((params, EnvelopeVariant::Power, json!({ "fitted": fitted, "kappa": kappa })))
}

fn envelope_json(env: &Envelope, params: &BoundParams, extra: Value) -> Value {
    json!({
        "variant": env.variant,
        "K": env.k,
        "T": env.t_cap,
        "logT": env.log_t_cap,
        "exponent": env.exponent,
        "params": params,
        "constants": extra,
    })
}

pub fn evolve_cmd(config: &RunConfig, out: &Path) -> Result<Run> {
    let grid = config.grid()?;
    let kernel = config.kernel()?;
    let s = &config.solver;
    if s.t_end.is_nan() || s.t_end <= 0.0 {
        bail!("solver.tEnd = {} must be positive", s.t_end);
    }
    let f0 = config.initial_field(grid)?;
    let co0 = compute_coefficients(&f0, &kernel)?;
    let (params, variant, extra) = fitted_envelope(config, &f0, &co0)?;
    let env = compute_envelope(&params, variant)?;

    let mut cfg = SolverConfig::new(grid, kernel, s.t_end);
    cfg.cfl_safety = s.cfl_safety;
    cfg.refresh_every = s.refresh_every;
    cfg.record_every = s.record_every;
    cfg.clamp_negatives = s.clamp_negatives;
    cfg.entropy_tolerance = s.entropy_tolerance;
    cfg.abort_mass_drift = s.abort_mass_drift;
    let tr = evolve(&f0, &cfg, Some(&env))?;

    let mut w = create(out, "trajectory.csv")?;
    tr.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(out, "final_field.csv")?;
    tr.final_field.write_csv(&mut w)?;
    w.flush()?;

    let check = envelope_check(&tr.records, &env)?;
    let mass = tr.max_abs_mass_drift();
    let energy = tr.max_abs_energy_drift();
    let flags = tr.entropy_flags();
    let monitors = mass < s.mass_tolerance && energy < s.energy_tolerance && flags == 0;
    let aborted = tr.aborted.as_ref().map(|a| match a {
        AbortReason::MassDrift { t, drift } => format!("mass drift {drift:.3e} at t = {t}"),
        AbortReason::Nan { t, node } => format!("non-finite value at node {node}, t = {t}"),
    });
    let pass = check.pass && monitors && aborted.is_none();
    let mut doc = envelope_json(&env, &params, extra);
    doc["check"] = json!(check);
    doc["monitors"] = json!({
        "steps": tr.steps,
        "maxMassDrift": mass,
        "maxEnergyDrift": energy,
        "entropyFlags": flags,
        "minBeforeClamp": tr.min_before_clamp(),
        "dtFallback": tr.dt_fallback,
        "aborted": aborted,
        "pass": monitors,
    });
    doc["pass"] = json!(pass);
    write_json(out, "envelope.json", &doc)?;
    if let Some(msg) = aborted {
        eprintln!("run aborted: {msg}");
    }
    Ok(Run { pass, outputs: vec!["trajectory.csv", "final_field.csv", "envelope.json"] })
}

pub fn counterexample(config: &RunConfig, out: &Path) -> Result<Run> {
    let c = &config.counterexample;
    let cal = calibrate_profile(c.d, c.p, c.alpha)?;
    let family = SelfSimilarFamily::calibrated(c.d, c.p, c.alpha)?;
    let report = verify_self_similar(&family, &c.times, c.samples)?;
    let pass = report.max_residual <= 0.0 && report.lp_deviation <= 1e-6;
    let mut doc = serde_json::to_value(&report)?;
    doc["minMargin"] = json!(cal.min_margin);
    doc["pass"] = json!(pass);
    write_json(out, "counterexample.json", &doc)?;
    Ok(Run { pass, outputs: vec!["counterexample.json"] })
}

pub fn output_dir(config: &RunConfig) -> PathBuf {
    config.out.clone().unwrap_or_else(|| PathBuf::from("out").join(&config.name))
}
