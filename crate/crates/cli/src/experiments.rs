//! The experiment registry: each entry reads a resolved config, writes its
//! data files and returns the headline numbers for `summary.json`.

use std::fs::File;

use landau_core::dispersion::{dispersion_root, penrose_margin, stability_threshold, PenroseReport, RootOptions};
use landau_core::equilibria::EquilibriumSpec;
use landau_core::fit::{exponential_rate, linear_regression, FitWindow, LineFit};
use landau_core::gevrey::{
    bootstrap_monitor, bootstrap_series, product_rule_check, schur_diagonal, schur_kernel_sum, triangle_ineq_check,
    BootstrapInput, BootstrapNormalization, GevreyParams, ProductRuleOptions, SchurReport, TriangleOptions,
};
use landau_core::linear::{
    fktld_check, free_transport_density, linear_vp_density, scattering_profile, DensityHistory, LinearOptions,
    PhaseSpaceGrid, SpectralField,
};
use landau_core::nonlinear::{
    echo_chain_prediction, echo_experiment, simulate, spectral_initial_data, Checkpoint, Simulation, Trajectory,
};
use landau_core::C64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{BootstrapConfig, ExperimentConfig, Packet};
use crate::output::{num, OutputDir};

/// Failure classes, mapped to exit codes by the driver.
#[derive(Debug)]
pub enum RunError {
    Config(String),
    Numerical(landau_core::Error),
    Io(std::io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "configuration error: {m}"),
            RunError::Numerical(e) => write!(f, "numerical failure: {e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<landau_core::Error> for RunError {
    fn from(e: landau_core::Error) -> Self {
        use landau_core::Error as E;
        match e {
            E::Argument(_) | E::OutOfRange { .. } | E::Domain { .. } => RunError::Config(e.to_string()),
            E::Checkpoint(_) => RunError::Config(e.to_string()),
            _ => RunError::Numerical(e),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

type Outcome = Result<Value, RunError>;

pub fn run(cfg: &ExperimentConfig, out: &mut OutputDir) -> Outcome {
    match cfg.experiment.as_str() {
        "transport" => transport(cfg, out),
        "linear" => linear(cfg, out),
        "simulate" => simulate_run(cfg, out),
        "echo" => echo(cfg, out),
        "penrose" => penrose(cfg, out),
        "diagnose" => diagnose(cfg, out),
        other => Err(RunError::Config(format!("unknown experiment `{other}`"))),
    }
}

#[derive(Serialize)]
struct ModeValue {
    k: Vec<i64>,
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct DensityRow {
    t: f64,
    e_norm: f64,
    rho: Vec<ModeValue>,
}

fn density_rows<'a>(
    times: &'a [f64],
    e_norm: &'a [f64],
    modes: &'a [Vec<i64>],
    rho: &'a [Vec<C64>],
) -> impl Iterator<Item = DensityRow> + 'a {
    times.iter().enumerate().map(move |(i, &t)| DensityRow {
        t,
        e_norm: e_norm.get(i).copied().unwrap_or(f64::NAN),
        rho: modes
            .iter()
            .zip(rho)
            .map(|(k, r)| ModeValue {
                k: k.clone(),
                re: r[i].re,
                im: r[i].im,
            })
            .collect(),
    })
}

fn fit_json(fit: landau_core::Result<LineFit>) -> Value {
    match fit {
        Ok(f) => json!({"rate": f.slope, "r2": f.r2, "points": f.points}),
        Err(e) => json!({"error": e.to_string()}),
    }
}

/// Decay fit unless the series ends above where it started.
fn auto_fit(t: &[f64], y: &[f64], t_min: f64) -> (&'static str, landau_core::Result<LineFit>) {
    let (first, last) = (y.first().copied().unwrap_or(0.0), y.last().copied().unwrap_or(0.0));
    if last > first {
        let t_end = t.last().copied().unwrap_or(0.0);
        ("growth", exponential_rate(t, y, &FitWindow::growth(t_min.max(0.5 * t_end), t_end)))
    } else {
        ("decay", exponential_rate(t, y, &FitWindow::decay(t_min)))
    }
}

fn packets_field(grid: &PhaseSpaceGrid, packets: &[Packet]) -> SpectralField {
    SpectralField::for_grid(grid, |k, eta| {
        let mut v = 0.0;
        for p in packets {
            if k == p.k {
                v += p.amplitude * p.shape.eval(eta - p.eta0);
            }
            if k == -p.k {
                v += p.amplitude * p.shape.eval(-eta - p.eta0);
            }
        }
        C64::new(v, 0.0)
    })
}

fn initial_field(cfg: &ExperimentConfig) -> Result<SpectralField, RunError> {
    Ok(spectral_initial_data(cfg.grid(), &cfg.equilibrium, &cfg.initial.modes)?)
}

fn time_grid(grid: &PhaseSpaceGrid) -> Vec<f64> {
    (0..=grid.steps()).map(|i| i as f64 * grid.dt).collect()
}

// ---------------------------------------------------------------------------

fn transport(cfg: &ExperimentConfig, out: &mut OutputDir) -> Outcome {
    let grid = cfg.grid();
    let tc = cfg.transport.as_ref().expect("resolved");
    let g_in = if tc.packets.is_empty() {
        initial_field(cfg)?
    } else {
        packets_field(grid, &tc.packets)
    };
    for &k in &tc.modes {
        if g_in.mode_index(k).is_none() {
            return Err(RunError::Config(format!("transport.modes: {k} is outside the lattice")));
        }
    }
    let times = time_grid(grid);
    let mut truncated = false;
    let rho: Vec<Vec<C64>> = tc
        .modes
        .iter()
        .map(|&k| {
            times
                .iter()
                .map(|&t| {
                    let s = free_transport_density(&g_in, k, t);
                    truncated |= s.truncated;
                    s.value
                })
                .collect()
        })
        .collect();
    let modes: Vec<Vec<i64>> = tc.modes.iter().map(|&k| vec![k]).collect();
    let nan = vec![f64::NAN; times.len()];
    out.write_ndjson("density.ndjson", density_rows(&times, &nan, &modes, &rho))?;

    let per_mode: Vec<Value> = tc
        .modes
        .iter()
        .zip(&rho)
        .map(|(&k, series)| {
            let (i_max, peak) = series
                .iter()
                .enumerate()
                .map(|(i, c)| (i, c.norm()))
                .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
            let predicted: Vec<f64> = tc.packets.iter().filter(|p| p.k == k && k != 0).map(|p| p.eta0 / k as f64).collect();
            json!({"k": k, "peak_time": times[i_max], "peak_amplitude": peak, "predicted_focus_times": predicted})
        })
        .collect();
    let estimate = if tc.estimate {
        let p = &cfg.gevrey;
        match fktld_check(&g_in, p.m, p.sigma, p.lambda_inf, p.s, grid.t_final) {
            Ok(e) => json!({"lhs": e.lhs, "rhs": e.rhs, "ratio": e.ratio, "inconclusive": e.inconclusive}),
            Err(e) => json!({"error": e.to_string()}),
        }
    } else {
        Value::Null
    };
    Ok(json!({"modes": per_mode, "truncated": truncated, "transport_estimate": estimate}))
}

// ---------------------------------------------------------------------------

/// Starting points for the root search: a configured guess, then the fitted
/// rate paired with the Bohm–Gross frequency and with zero frequency.
fn root_guesses(cfg: &ExperimentConfig, k: i64, fitted: Option<f64>) -> Vec<C64> {
    let mut out = Vec::new();
    if let Some(g) = cfg.linear.as_ref().and_then(|l| l.root_guesses.iter().find(|g| g.k == k)) {
        out.push(C64::new(g.re, g.im));
    }
    // Bohm–Gross: ω² = n₀|k|²Ŵ + 3k²v_th²
    let kf = k as f64;
    let w = cfg.interaction.symbol(&[kf]).unwrap_or(0.0);
    let vs = cfg.equilibrium.velocity_scale();
    let omega = (cfg.equilibrium.density() * kf * kf * w + 3.0 * kf * kf * vs * vs).max(0.0).sqrt();
    let rate = fitted.unwrap_or(-0.01);
    out.extend([C64::new(rate, omega), C64::new(rate, 0.0), C64::new(-0.01, omega)]);
    out
}

/// The converged root with the largest real part over all starting points.
fn leading_root(cfg: &ExperimentConfig, k: i64, fitted: Option<f64>) -> Option<C64> {
    root_guesses(cfg, k, fitted)
        .into_iter()
        .filter_map(|z0| {
            dispersion_root(&cfg.equilibrium, &cfg.interaction, &[k as f64], z0, &RootOptions::default())
                .ok()
                .and_then(|s| s.root)
        })
        .map(|z| C64::new(z.re, z.im.abs()))
        .reduce(|a, b| if b.re > a.re + 1e-9 { b } else { a })
}

fn mode_report(cfg: &ExperimentConfig, hist: &DensityHistory, t_min: f64) -> Vec<Value> {
    hist.modes
        .iter()
        .zip(&hist.rho)
        .filter(|(&k, r)| k > 0 && r.iter().any(|c| c.norm() > 0.0))
        .map(|(&k, r)| {
            let amp: Vec<f64> = r.iter().map(|c| c.norm()).collect();
            let (kind, fit) = auto_fit(&hist.times, &amp, t_min);
            let rate = fit.as_ref().ok().map(|f| f.slope);
            let root = leading_root(cfg, k, rate);
            let rel = match (rate, root) {
                (Some(r), Some(z)) if z.re != 0.0 => Some((r - z.re).abs() / z.re.abs()),
                _ => None,
            };
            json!({
                "k": k,
                "fit_kind": kind,
                "fit": fit_json(fit),
                "root": root.map(|z| json!({"re": z.re, "im": z.im})),
                "rate_relative_error": rel,
            })
        })
        .collect()
}

fn linear(cfg: &ExperimentConfig, out: &mut OutputDir) -> Outcome {
    let grid = cfg.grid();
    if grid.d != 1 {
        return Err(RunError::Config("grid.d: the linear experiment works in d = 1".into()));
    }
    let lc = cfg.linear.as_ref().expect("resolved");
    let g_in = initial_field(cfg)?;
    let opts = LinearOptions {
        dt: grid.dt,
        t_final: grid.t_final,
        modes: if lc.modes.is_empty() { None } else { Some(lc.modes.clone()) },
    };
    let hist = linear_vp_density(&g_in, &cfg.equilibrium, &cfg.interaction, &opts)?;
    let modes: Vec<Vec<i64>> = hist.modes.iter().map(|&k| vec![k]).collect();
    out.write_ndjson("density.ndjson", density_rows(&hist.times, &hist.e_norm, &modes, &hist.rho))?;
    let (kind, e_fit) = auto_fit(&hist.times, &hist.e_norm, lc.fit_t_min);
    let mut summary = json!({
        "modes": mode_report(cfg, &hist, lc.fit_t_min),
        "e_norm_fit_kind": kind,
        "e_norm_fit": fit_json(e_fit),
        "truncated": hist.truncated,
    });
    if lc.scattering_checkpoints > 0 {
        let sc = scattering_profile(&hist, &g_in, &cfg.equilibrium, lc.scattering_checkpoints, f64::INFINITY)?;
        out.write_csv(
            "scattering.csv",
            &["t", "distance_to_limit"],
            sc.convergence.iter().map(|(t, d)| vec![num(*t), num(*d)]),
        )?;
        summary["scattering"] = json!({"tail_estimate": sc.tail_estimate, "limit_l2": sc.f_inf.l2_norm()});
    }
    Ok(summary)
}

// ---------------------------------------------------------------------------

fn bootstrap_summary(
    cfg: &ExperimentConfig,
    bc: &BootstrapConfig,
    traj: &Trajectory,
    reference: &DensityHistory,
    g_in: &SpectralField,
    out: &mut OutputDir,
) -> Outcome {
    let eps = bc
        .epsilon
        .unwrap_or_else(|| cfg.initial.modes.iter().map(|r| r.amplitude.abs()).fold(0.0, f64::max));
    if !(eps > 0.0) {
        return Err(RunError::Config("simulate.bootstrap.epsilon: needs a non-zero perturbation".into()));
    }
    let p = &cfg.gevrey;
    let sc = scattering_profile(reference, g_in, &cfg.equilibrium, bc.snapshots.max(1), f64::INFINITY)?;
    let ref_series = bootstrap_series(
        &BootstrapInput {
            times: &reference.times,
            modes: &reference.modes,
            rho: &reference.rho,
            profiles: &sc.snapshots,
        },
        p,
        bc.noise_floor,
    )?;
    let norm = BootstrapNormalization::from_reference(&ref_series, eps, bc.multiple);
    let modes: Vec<i64> = traj.modes.iter().map(|k| k[0]).collect();
    let profiles = traj.profiles();
    let series = bootstrap_series(
        &BootstrapInput {
            times: &traj.times,
            modes: &modes,
            rho: &traj.rho,
            profiles: &profiles,
        },
        p,
        bc.noise_floor,
    )?;
    let report = bootstrap_monitor(series, norm);
    out.write_csv(
        "bootstrap_density.csv",
        &["t", "ratio"],
        report.series.times.iter().zip(&report.density_ratio).map(|(t, r)| vec![num(*t), num(*r)]),
    )?;
    out.write_csv(
        "bootstrap_profile.csv",
        &["t", "ratio"],
        report.series.profile_times.iter().zip(&report.profile_ratio).map(|(t, r)| vec![num(*t), num(*r)]),
    )?;
    Ok(json!({
        "epsilon": eps,
        "multiple": bc.multiple,
        "k0_density": norm.k0_density,
        "k0_profile": norm.k0_profile,
        "max_density_ratio": report.max_density_ratio,
        "max_profile_ratio": report.max_profile_ratio,
        "exceeded_at": report.exceeded_at,
        "reliable": report.series.reliable && ref_series.reliable,
    }))
}

fn simulate_run(cfg: &ExperimentConfig, out: &mut OutputDir) -> Outcome {
    let grid = cfg.grid().clone();
    let sc = cfg.simulate.as_ref().expect("resolved");
    let setup = cfg.sim_setup();
    let mut sim = match &cfg.initial.checkpoint {
        Some(path) => {
            let mut f = File::open(path).map_err(|e| RunError::Config(format!("initial.checkpoint: {}: {e}", path.display())))?;
            Simulation::from_checkpoint(setup, Checkpoint::read(&mut f)?)?
        }
        None => Simulation::from_recipe(setup, &cfg.initial.modes)?,
    };
    let from_recipe = cfg.initial.checkpoint.is_none();
    let mut rec = cfg.output.recording();
    if let Some(bc) = &sc.bootstrap {
        if rec.snapshot_every == 0 {
            rec.snapshot_every = (grid.steps() / bc.snapshots.max(1)).max(1);
        }
    }
    let traj = simulate(&mut sim, grid.t_final, &rec)?;
    out.write_ndjson("density.ndjson", density_rows(&traj.times, &traj.e_norm, &traj.modes, &traj.rho))?;
    out.write_ndjson("diagnostics.ndjson", traj.diagnostics.iter())?;
    if cfg.output.checkpoint {
        let mut bytes = Vec::new();
        sim.write_checkpoint(&mut bytes)?;
        out.write_bytes("checkpoint.bin", &bytes)?;
    }
    let (kind, fit) = auto_fit(&traj.times, &traj.e_norm, 0.0);
    let mut summary = json!({
        "steps": sim.steps_taken(),
        "t_final": sim.time(),
        "drift": traj.drift(),
        "final": traj.diagnostics.last(),
        "min_value": traj.diagnostics.iter().map(|c| c.min_value).fold(f64::INFINITY, f64::min),
        "max_boundary_fraction": traj.diagnostics.iter().map(|c| c.boundary_fraction).fold(0.0, f64::max),
        "e_norm_fit_kind": kind,
        "e_norm_fit": fit_json(fit),
    });

    let wants_linear = sc.compare_linear || sc.bootstrap.is_some();
    if wants_linear && (grid.d != 1 || !from_recipe) {
        return Err(RunError::Config(
            "simulate.compare_linear / simulate.bootstrap: need d = 1 and recipe initial data".into(),
        ));
    }
    if wants_linear {
        let g_in = initial_field(cfg)?;
        let lin = linear_vp_density(
            &g_in,
            &cfg.equilibrium,
            &cfg.interaction,
            &LinearOptions {
                dt: grid.dt,
                t_final: grid.t_final,
                modes: None,
            },
        )?;
        if sc.compare_linear {
            let stride = rec.density_every.max(1);
            let mut worst: f64 = 0.0;
            let mut worst_t = 0.0;
            let mut compared = 0usize;
            let mut rows = Vec::new();
            for (i, (&t, &e)) in traj.times.iter().zip(&traj.e_norm).enumerate() {
                let j = (i * stride).min(lin.e_norm.len() - 1);
                let l = lin.e_norm[j];
                rows.push(vec![num(t), num(e), num(l)]);
                if l > sc.comparison_floor {
                    compared += 1;
                    let r = (e - l).abs() / l;
                    if r > worst {
                        worst = r;
                        worst_t = t;
                    }
                }
            }
            out.write_csv("comparison.csv", &["t", "simulated", "linear"], rows)?;
            summary["linear_comparison"] = json!({
                "max_relative_error": worst,
                "at": worst_t,
                "samples": compared,
                "floor": sc.comparison_floor,
            });
        }
        if let Some(bc) = &sc.bootstrap {
            summary["bootstrap"] = bootstrap_summary(cfg, bc, &traj, &lin, &g_in, out)?;
        }
    }
    Ok(summary)
}

// ---------------------------------------------------------------------------

fn echo(cfg: &ExperimentConfig, out: &mut OutputDir) -> Outcome {
    let ec = cfg.echo.as_ref().expect("resolved");
    let rec = cfg.output.recording();
    let (report, traj) = echo_experiment(cfg.sim_setup(), &ec.params(ec.eps_drv), &rec)?;
    out.write_ndjson("density.ndjson", density_rows(&traj.times, &traj.e_norm, &traj.modes, &traj.rho))?;
    let burst_rows = [&report.seed, &report.driver].into_iter().flat_map(|m| {
        m.bursts.iter().map(move |b| {
            vec![
                b.mode.to_string(),
                num(b.time),
                num(b.amplitude),
                num(b.prominence),
                num(m.predicted_time),
            ]
        })
    });
    out.write_csv("bursts.csv", &["mode", "time", "amplitude", "prominence", "predicted_time"], burst_rows)?;

    let mut summary = json!({
        "report": report,
        "drift": traj.drift(),
        "chain_prediction": echo_chain_prediction(ec.eps_drv.abs().max(f64::MIN_POSITIVE), ec.eta0, ec.chain_constant)?,
    });
    if !ec.sweep.is_empty() {
        let mut amps: Vec<f64> = std::iter::once(ec.eps_drv).chain(ec.sweep.iter().copied()).collect();
        amps.sort_by(f64::total_cmp);
        amps.dedup();
        let mut rows = Vec::new();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &a in &amps {
            let echo_amp = if a == ec.eps_drv {
                report.seed.nearest.map(|b| b.amplitude)
            } else {
                echo_experiment(cfg.sim_setup(), &ec.params(a), &rec)?.0.seed.nearest.map(|b| b.amplitude)
            };
            rows.push(vec![num(a), echo_amp.map(num).unwrap_or_default()]);
            if let Some(y) = echo_amp {
                xs.push(a);
                ys.push(y);
            }
        }
        out.write_csv("sweep.csv", &["eps_drv", "echo_amplitude"], rows)?;
        summary["sweep"] = match linear_regression(&xs, &ys) {
            Ok(f) => json!({"slope": f.slope, "intercept": f.intercept, "r2": f.r2, "points": f.points}),
            Err(e) => json!({"error": e.to_string(), "points": xs.len()}),
        };
    }
    Ok(summary)
}

// ---------------------------------------------------------------------------

fn penrose_json(r: &PenroseReport) -> Value {
    json!({
        "stable": r.stable,
        "kappa": r.kappa,
        "refinement_change": r.refinement_change,
        "warnings": r.warnings,
        "modes": r.modes.iter().map(|m| json!({
            "k": m.k,
            "kappa": m.kappa,
            "enclosed_zeros": m.enclosed_zeros,
            "tail_floor": m.tail_floor,
            "root": m.root.map(|z| json!({"re": z.re, "im": z.im})),
        })).collect::<Vec<_>>(),
    })
}

fn penrose(cfg: &ExperimentConfig, out: &mut OutputDir) -> Outcome {
    let pc = cfg.penrose.as_ref().expect("resolved");
    let opts = pc.options();
    let report = penrose_margin(&cfg.equilibrium, &cfg.interaction, &pc.modes, &opts)?;
    out.write_csv(
        "penrose.csv",
        &["k", "kappa", "enclosed_zeros", "tail_floor", "root_re", "root_im"],
        report.modes.iter().map(|m| {
            let k: Vec<String> = m.k.iter().map(|x| num(*x)).collect();
            vec![
                k.join(" "),
                num(m.kappa),
                m.enclosed_zeros.to_string(),
                num(m.tail_floor),
                m.root.map(|z| num(z.re)).unwrap_or_default(),
                m.root.map(|z| num(z.im)).unwrap_or_default(),
            ]
        }),
    )?;
    let mut summary = penrose_json(&report);
    if let Some(sw) = &pc.sweep {
        let check = |u: f64| -> landau_core::Result<PenroseReport> {
            let spec = EquilibriumSpec::two_stream(sw.density, sw.temperature, u).with_dim(cfg.equilibrium.dim);
            penrose_margin(&spec, &cfg.interaction, &pc.modes, &opts)
        };
        let mut rows = Vec::new();
        let mut verdicts = Vec::new();
        for &u in &sw.separations {
            let r = check(u)?;
            let growth = r.modes.iter().filter_map(|m| m.root).map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            rows.push(vec![num(u), r.stable.to_string(), num(r.kappa), if growth.is_finite() { num(growth) } else { String::new() }]);
            verdicts.push((u, r.stable));
        }
        out.write_csv("sweep.csv", &["separation", "stable", "kappa", "growth_rate"], rows)?;
        let mut thresholds = Vec::new();
        for w in verdicts.windows(2) {
            if w[0].1 != w[1].1 {
                let t = stability_threshold(|u| check(u).map(|r| r.stable), w[0].0, w[1].0, sw.threshold_tolerance)?;
                thresholds.push(t);
            }
        }
        summary["sweep"] = json!({
            "separations": sw.separations,
            "stable": verdicts.iter().map(|v| v.1).collect::<Vec<_>>(),
            "thresholds": thresholds,
        });
    }
    Ok(summary)
}

// ---------------------------------------------------------------------------

fn schur_json(r: &SchurReport) -> Value {
    serde_json::to_value(r).expect("schur report serializes")
}

fn diagnose(cfg: &ExperimentConfig, _out: &mut OutputDir) -> Outcome {
    let dc = cfg.diagnose.as_ref().expect("resolved");
    let p = cfg.gevrey;
    let tri = triangle_ineq_check(&TriangleOptions {
        s: p.s,
        k: dc.triangle_k,
        samples: dc.triangle_samples,
        seed: dc.seed,
    })?;
    let product = |trials: usize| {
        product_rule_check(&ProductRuleOptions {
            s: p.s,
            lambda: dc.product_lambda,
            d: p.d,
            trials,
            band: dc.product_band,
            seed: dc.seed,
        })
    };
    let (pr1, pr2) = (product(dc.product_trials)?, product(2 * dc.product_trials)?);
    let schur = schur_kernel_sum(&p, &dc.schur)?;
    let mut compare = Vec::new();
    for &s in &dc.schur_compare {
        let q = GevreyParams { s, ..p };
        compare.push(json!({"s": s, "report": schur_json(&schur_kernel_sum(&q, &dc.schur)?)}));
    }
    let diagonal = (1..=dc.schur.k_max)
        .flat_map(|k| (1..=dc.schur.n_times).map(move |i| (k, dc.schur.t_max * i as f64 / dc.schur.n_times as f64)))
        .map(|(k, t)| schur_diagonal(&p, t, k))
        .fold(0.0, f64::max);
    Ok(json!({
        "triangle": {"report": tri, "holds": tri.holds()},
        "product_rule": {
            "constant": pr1.c,
            "sobolev_exponent": pr1.sobolev_exponent,
            "ratio": pr1.ratio,
            "ratio_doubled_trials": pr2.ratio,
            "relative_change": (pr2.ratio - pr1.ratio).abs() / pr1.ratio,
        },
        "schur": schur_json(&schur),
        "schur_compare": compare,
        "schur_diagonal_sup": diagonal,
        "regularity_threshold_met": p.meets_regularity_threshold(),
    }))
}
