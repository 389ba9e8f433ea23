//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Timed criteria run on a single-thread pool.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use landau_core::bounds::{
    compute_envelope, conditional_bound_params, conditional_kappa_floor, envelope_check, landau_bound_params,
    BoundParams, EnvelopeVariant, MomentBounds, DEFAULT_C1, DEFAULT_C2,
};
use landau_core::coefficients::identity;
use landau_core::counterexample::{
    calibrate_profile, constant_level_failure, predicted_envelope_failure, verify_self_similar, BumpProfile,
    SelfSimilarFamily, CALIBRATION_SAMPLES,
};
use landau_core::ellipticity::{
    fit_landau_constants, thick_set_params, verify_abar_bounds, verify_thick_set, SoftRegime,
};
use landau_core::solver::{evolve, evolve_with, SolverConfig};
use landau_core::spectral::determinant;
use landau_core::{
    compute_coefficients, divergence_identity_residual, CoefficientField, KernelParams, ScalarField, VelocityGrid,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> (T, Duration) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("thread pool");
    let start = Instant::now();
    let out = pool.install(f);
    (out, start.elapsed())
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn bimodal(g: VelocityGrid) -> ScalarField {
    let d = g.dim() as f64;
    ScalarField::from_fn(g, |v| {
        let lobe = |s: f64| {
            let r2: f64 = v.iter().enumerate().map(|(k, x)| if k == 0 { (x - s).powi(2) } else { x * x }).sum();
            0.5 * (2.0 * PI * 0.5).powf(-d / 2.0) * (-r2 / (2.0 * 0.5)).exp()
        };
        lobe(1.5) + lobe(-1.5)
    })
}

fn coefficient_oracle() -> Outcome {
    let ((res, cmax), elapsed) = single_threaded(|| {
        let g = VelocityGrid::new(2, 8.0, 129).unwrap();
        let f = ScalarField::maxwellian(g);
        let kp = KernelParams::new(2, 0.0).unwrap();
        let co = compute_coefficients(&f, &kp).unwrap();
        let mut worst_a = 0.0_f64;
        let mut worst_c = 0.0_f64;
        for i in 0..g.len() {
            let v = g.node(i);
            if g.norm_sq(i) <= 16.0 {
                for p in 0..2 {
                    for q in 0..2 {
                        let exact = if p == q { g.norm_sq(i) + 1.0 } else { 0.0 } - v[p] * v[q];
                        worst_a = worst_a.max((co.abar()[i][p][q] - exact).abs());
                    }
                }
            }
            worst_c = worst_c.max((co.cbar()[i] - kp.c_const * f.mass()).abs());
        }
        (worst_a, worst_c)
    });
    let detail =
        format!("max |abar - exact| = {res:.3e}, max |cbar - c M| = {cmax:.3e}, {:.1} s", elapsed.as_secs_f64());
    check(res < 1e-3 && cmax < 1e-6 && elapsed < Duration::from_secs(60), detail)
}

fn divergence_identity() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for gamma in [0.0, -1.0] {
        let kp = KernelParams::new(2, gamma).unwrap();
        let residual = |n: usize| {
            let g = VelocityGrid::new(2, 8.0, n).unwrap();
            let co = compute_coefficients(&ScalarField::maxwellian(g), &kp).unwrap();
            (divergence_identity_residual(&co).unwrap(), co.cbar_max())
        };
        let (coarse, cmax) = residual(129);
        let (fine, _) = residual(257);
        let ratio = coarse / fine;
        let floor = 1e-10 * cmax;
        let rounding = coarse < floor && fine < floor;
        ok &= coarse < 1e-2 && (ratio >= 3.0 || rounding);
        parts.push(format!(
            "gamma {gamma}: {coarse:.3e} -> {fine:.3e} (x{ratio:.2}{})",
            if rounding { ", rounding floor" } else { "" }
        ));
    }
    check(ok, parts.join("; "))
}

fn thick_set() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for d in [2usize, 3] {
        let g = VelocityGrid::new(d, 6.0, if d == 2 { 121 } else { 49 }).unwrap();
        let cases = [
            ("maxwellian", ScalarField::maxwellian(g)),
            ("bump", ScalarField::bump(g, &vec![0.5; d], 2.0, 1.0).unwrap()),
            ("bimodal", bimodal(g)),
        ];
        for (name, f) in cases {
            let s = f.summary();
            let m1 = if name == "maxwellian" { 1.0_f64.min(s.mass) } else { s.mass };
            let p = thick_set_params(&s, m1, d).unwrap();
            if d == 2 && name == "maxwellian" {
                ok &= (p.radius - 2.0).abs() < 1e-3 && (p.level * 16.0 * PI - 1.0).abs() < 1e-3;
            }
            let c = verify_thick_set(&f, &p);
            ok &= c.pass;
            parts.push(format!("d{d} {name}: {:.3e} >= {:.3e}", c.measured_measure, p.measure));
        }
    }
    check(ok, parts.join("; "))
}

fn ellipticity() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for gamma in [-0.5, -1.0, -2.0] {
        let kp = KernelParams::new(2, gamma).unwrap();
        for (name, make) in [
            ("maxwellian", ScalarField::maxwellian as fn(VelocityGrid) -> ScalarField),
            ("bimodal", bimodal as fn(VelocityGrid) -> ScalarField),
        ] {
            let fit = |n: usize| {
                let g = VelocityGrid::new(2, 8.0, n).unwrap();
                let f = make(g);
                let co = compute_coefficients(&f, &kp).unwrap();
                let r = verify_abar_bounds(&co, gamma, SoftRegime::ModeratelySoft, f.sup_norm()).unwrap();
                (r.upper.fitted_constant, r.lower.fitted_constant)
            };
            let (up65, lo65) = fit(65);
            let (up129, lo129) = fit(129);
            let du = (up129 - up65).abs() / up129;
            let dl = (lo129 - lo65).abs() / lo129;
            ok &= up129.is_finite() && lo129 > 0.0 && du <= 0.05 && dl <= 0.05;
            parts.push(format!(
                "g{gamma} {name}: C {up129:.3e} ({:.1}%), c {lo129:.3e} ({:.1}%)",
                du * 100.0,
                dl * 100.0
            ));
        }
    }
    let g = VelocityGrid::new(2, 8.0, 129).unwrap();
    let co = compute_coefficients(&ScalarField::maxwellian(g), &KernelParams::new(2, 0.0).unwrap()).unwrap();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for i in 0..g.len() {
        let r = g.norm_sq(i).sqrt();
        if r <= 6.0 {
            let ratio = determinant(&co.abar()[i], 2) / (1.0 + r).powi(2);
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    // The exact ratio (1+r²)/(1+r)² touches 1/2 at r = 1; allow quadrature error there.
    ok &= lo >= 0.5 - 1e-3 && hi <= 2.0;
    parts.push(format!("gamma 0 det ratio in [{lo:.6}, {hi:.6}]"));
    check(ok, parts.join("; "))
}

fn bound_formulas() -> Outcome {
    let base = BoundParams {
        d: 2,
        p: 1.0,
        alpha: 0.0,
        beta: 1.0,
        kappa: 2.0,
        delta: 1.0,
        lambda: 1.0,
        n_bound: 1.0,
        c_nonlin: 1.0,
        c1: 1.0,
        c2: 1.0,
        eps: 1.0,
    };
    let env = |p: BoundParams| compute_envelope(&p, EnvelopeVariant::Power).unwrap();
    let mut ok = true;
    let e0 = env(base);
    ok &= e0.k == 8.0 && e0.t_cap == 2.0;
    let e_half = env(BoundParams { alpha: 0.5, ..base });
    let t_half_err = (e_half.t_cap - 0.5).abs();
    ok &= e_half.k == 8.0 && t_half_err <= 2.0 * f64::EPSILON;
    let mut lin_err = 0.0_f64;
    for p in [1.0, 1.5, 3.0] {
        let kp = |q: BoundParams| env(q).k.powf(q.p);
        let q = BoundParams { p, ..base };
        for s in [2.0, 7.0, 0.125] {
            lin_err = lin_err.max((kp(BoundParams { n_bound: s, ..q }) / kp(q) - s).abs() / s);
            lin_err = lin_err.max((kp(BoundParams { delta: 1.0 / s, ..q }) / kp(q) - s).abs() / s);
        }
    }
    ok &= lin_err <= 8.0 * f64::EPSILON;
    let mut alpha0_err = 0.0_f64;
    for (lambda, c) in [(0.3, 2.0), (4.0, 0.7), (10.0, 3.0)] {
        let e = env(BoundParams { lambda, c_nonlin: c, ..base });
        alpha0_err = alpha0_err.max((e.t_cap - (1.0 + lambda) / c).abs() / e.t_cap);
    }
    ok &= alpha0_err <= 2.0 * f64::EPSILON;
    check(
        ok,
        format!(
            "K={} T={}; alpha=1/2: T-1/2 = {t_half_err:.1e}; K^p linearity rel err {lin_err:.1e}; alpha=0 T rel err {alpha0_err:.1e}",
            e0.k, e0.t_cap
        ),
    )
}

fn heat_kernel(g: VelocityGrid, t: f64) -> ScalarField {
    ScalarField::from_fn(g, |v| {
        let r2: f64 = v.iter().map(|x| x * x).sum();
        (4.0 * PI * t).recip() * (-r2 / (4.0 * t)).exp()
    })
}

fn heat_oracle() -> Outcome {
    let g = VelocityGrid::with_spacing(2, 0.1, 201).unwrap();
    let kp = KernelParams::new(2, 0.0).unwrap();
    let frozen = CoefficientField::uniform(g, identity(2), 0.0).unwrap();
    let mut cfg = SolverConfig::new(g, kp, 0.6);
    cfg.t_start = 0.5;
    cfg.clamp_negatives = false;
    let f0 = heat_kernel(g, 0.5);
    let mut worst = 0.0_f64;
    let mut cfg_short = cfg;
    for t_end in [0.52, 0.54, 0.56, 0.58, 0.6] {
        cfg_short.t_end = t_end;
        let tr = evolve_with(&f0, &cfg_short, None, |_| Ok(frozen.clone())).unwrap();
        let exact = heat_kernel(g, t_end);
        let err = tr.final_field.values().iter().zip(exact.values()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(err);
    }
    cfg.t_end = 2.0;
    let tr = evolve_with(&f0, &cfg, None, |_| Ok(frozen.clone())).unwrap();
    let (mut sx, mut sy, mut sxx, mut sxy, mut m) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let pts = std::iter::once((0.5, f0.sup_norm())).chain(tr.records.iter().map(|r| (r.t, r.sup_f)));
    for (t, s) in pts {
        let (x, y) = (f64::ln(t), f64::ln(s));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        m += 1.0;
    }
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    check(
        worst < 1e-4 && (slope + 1.0).abs() <= 0.05,
        format!("max error on [0.5, 0.6] = {worst:.3e}; log-log slope on [0.5, 2] = {slope:.4}"),
    )
}

fn landau_run() -> Outcome {
    let ((ok, detail), elapsed) = single_threaded(|| {
        let g = VelocityGrid::new(2, 0.0065, 65).unwrap();
        let gamma = -1.0;
        let kp = KernelParams::new(2, gamma).unwrap();
        let f0 = ScalarField::bump(g, &[0.0, 0.0], 0.005, 50.0).unwrap();
        let co0 = compute_coefficients(&f0, &kp).unwrap();
        let fitted = fit_landau_constants(&f0, &co0, gamma).unwrap();
        let s = f0.summary();
        let moments = MomentBounds { m1: s.mass, m0: s.mass, e0: s.energy, h0: s.entropy_prime };
        let (params, variant) = landau_bound_params(2, gamma, &moments, &fitted, DEFAULT_C1, DEFAULT_C2).unwrap();
        let env = compute_envelope(&params, variant).unwrap();
        let cfg = SolverConfig::new(g, kp, 0.5);
        let tr = evolve(&f0, &cfg, Some(&env)).unwrap();
        let mass = tr.max_abs_mass_drift();
        let energy = tr.max_abs_energy_drift();
        let flags = tr.entropy_flags();
        let ec = envelope_check(&tr.records, &env).unwrap();
        let scaled = tr.records.iter().map(|r| r.sup_f * r.t).fold(0.0_f64, f64::max);
        let scaled_cap = env.k * (0.5 / env.t_cap).max(1.0);
        let ok = tr.aborted.is_none()
            && mass < 1e-3
            && energy < 1e-2
            && flags == 0
            && ec.pass
            && scaled.is_finite()
            && scaled <= scaled_cap;
        let detail = format!(
            "{} steps, mass drift {mass:.2e}, energy drift {energy:.2e}, entropy flags {flags}, \
             envelope worst ratio {:.2e}, max supF*t {scaled:.3e} (cap {scaled_cap:.3e})",
            tr.steps, ec.worst_ratio
        );
        (ok, detail)
    });
    check(ok && elapsed < Duration::from_secs(600), format!("{detail}, {:.1} s", elapsed.as_secs_f64()))
}

fn equilibrium() -> Outcome {
    let g = VelocityGrid::new(2, 6.0, 65).unwrap();
    let kp = KernelParams::new(2, -1.0).unwrap();
    let f0 = ScalarField::maxwellian(g);
    let tr = evolve(&f0, &SolverConfig::new(g, kp, 0.5), None).unwrap();
    let dev =
        tr.final_field.values().iter().zip(f0.values()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())) / f0.sup_norm();
    let sup_dev = tr.records.iter().map(|r| (r.sup_f - f0.sup_norm()).abs()).fold(0.0_f64, f64::max) / f0.sup_norm();
    check(
        dev < 1e-2 && sup_dev < 1e-2 && tr.aborted.is_none(),
        format!("{} steps, sup-norm deviation {sup_dev:.2e}, final max deviation {dev:.2e}", tr.steps),
    )
}

fn counterexample() -> Outcome {
    let ((ok, detail), elapsed) = single_threaded(|| {
        let cal = calibrate_profile(2, 1.0, 1.0).unwrap();
        let fam = SelfSimilarFamily::calibrated(2, 1.0, 1.0).unwrap();
        let times = [0.1, 0.5, 0.9, 0.99];
        let rep = verify_self_similar(&fam, &times, CALIBRATION_SAMPLES).unwrap();
        let stationary = (0..CALIBRATION_SAMPLES)
            .map(|i| {
                let r = i as f64 / CALIBRATION_SAMPLES as f64;
                let phi = fam.profile.value(r);
                phi * (BumpProfile::linear_bracket(r, 2, 1.0) - phi)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let growth = rep.blowup_samples.iter().all(|s| s.f_at0 * (1.0 - s.t) == cal.k);
        let mut fail_err = 0.0_f64;
        for level in [16.0, 100.0, 1e4] {
            let t_star = constant_level_failure(&fam, level);
            let before = fam.at_origin(t_star - 1e-9);
            let after = fam.at_origin(t_star + 1e-9);
            fail_err = fail_err.max(if before <= level && after > level { 0.0 } else { 1.0 });
        }
        for (k, t_cap) in [(50.0, 0.3), (20.0, 0.01), (1e3, 0.9)] {
            let env = landau_core::bounds::Envelope {
                variant: EnvelopeVariant::Power,
                k,
                t_cap,
                log_t_cap: f64::ln(t_cap),
                exponent: 1.0,
            };
            let t_star = predicted_envelope_failure(&fam, &env);
            let below = fam.at_origin(t_star - 1e-9) <= env.at(t_star - 1e-9).unwrap();
            let above = fam.at_origin(t_star + 1e-9) > env.at(t_star + 1e-9).unwrap();
            fail_err = fail_err.max(if below && above { 0.0 } else { 1.0 });
        }
        let ok = stationary <= 0.0 && rep.max_residual <= 0.0 && rep.lp_deviation < 1e-6 && growth && fail_err == 0.0;
        let detail = format!(
            "k = {}, shell {}, stationary max {stationary:.2e}, evolving max {:.2e}, L1 deviation {:.2e}, \
             (1-t) f(t,0) = k: {growth}, failure times match: {}",
            cal.k,
            cal.delta_shell,
            rep.max_residual,
            rep.lp_deviation,
            fail_err == 0.0
        );
        (ok, detail)
    });
    check(ok && elapsed < Duration::from_secs(10), format!("{detail}, {:.2} s", elapsed.as_secs_f64()))
}

fn parameter_guards() -> Outcome {
    let d = 3usize;
    let df = d as f64;
    let mut mismatches = 0;
    let mut accepted = 0;
    let mut cases = 0;
    for i in 0..20 {
        let gamma = -3.0 + i as f64 * 0.05;
        let lo = df / (df + 2.0 + gamma);
        let hi = if gamma == -df { f64::INFINITY } else { df / (df + gamma) };
        let mut ps: Vec<f64> = (0..20).map(|j| 1.0 + j as f64 * 0.2).collect();
        ps.push(lo);
        if hi.is_finite() {
            ps.push(hi);
        }
        for p in ps {
            let floor = conditional_kappa_floor(d, gamma, p);
            let inside = p > lo && p < hi;
            let run = |kappa: f64| conditional_bound_params(d, gamma, p, kappa, 1.0, 1.0, 1.0, 1.0, DEFAULT_C1);
            let above = run(floor + 0.05);
            let at = run(floor);
            cases += 1;
            if above.is_ok() != inside || at.is_ok() {
                mismatches += 1;
            }
            if let Err(e) = &at {
                if inside && !e.to_string().contains("kappa") {
                    mismatches += 1;
                }
            }
            if let Err(e) = &above {
                if !inside && !e.to_string().contains("violates p") {
                    mismatches += 1;
                }
            }
            accepted += above.is_ok() as usize;
        }
    }
    let m = MomentBounds { m1: 1.0, m0: 1.0, e0: 3.0, h0: 0.0 };
    let fit = landau_core::ellipticity::FittedConstants { delta: 0.1, lambda: 1.0, nonlinearity: 1.0 };
    let routed = matches!(
        landau_bound_params(3, -2.0, &m, &fit, DEFAULT_C1, DEFAULT_C2),
        Ok((p, EnvelopeVariant::LogCorrected)) if p.eps == 0.25
    );
    let rejects_plane = landau_bound_params(2, -2.0, &m, &fit, DEFAULT_C1, DEFAULT_C2).is_err();
    check(
        mismatches == 0 && routed && rejects_plane,
        format!(
            "{cases} (gamma, p) cases, {accepted} admissible, {mismatches} mismatches; \
             gamma=-2 log variant eps=1/4: {routed}; d=2 rejected: {rejects_plane}"
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("coefficient oracle", coefficient_oracle),
        ("divergence identity", divergence_identity),
        ("thick set", thick_set),
        ("ellipticity bounds", ellipticity),
        ("bound formulas", bound_formulas),
        ("heat-equation oracle", heat_oracle),
        ("landau run", landau_run),
        ("equilibrium", equilibrium),
        ("blow-up family", counterexample),
        ("parameter guards", parameter_guards),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        match run() {
            Ok(detail) => println!("criterion {:2} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:2} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
