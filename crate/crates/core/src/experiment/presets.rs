//! Preset pipelines. Each writes its CSV reports and records headline
//! numbers in the manifest summary.

use std::io::Write;

use num_complex::Complex64;

use super::{ExperimentConfig, ExperimentError, OutputDir, Preset};
use crate::analysis::{
    detect_concentration, local_energy_inequality_check, second_derivative_trace, ConcentrationParams,
    ConcentrationReport,
};
use crate::dynamics::{
    centered_rate, discrete_energy, energy_density, energy_rate, evolve_observed, evolve_trajectory, rhs_for,
    EnergyTrace, Trajectory,
};
use crate::frames::{amplitude_exponent, cap_holonomy, torus_residual, transport_frame, write_residual_csv};
use crate::grid::{laplacian, lp_norm, ComplexField, GridSpec, ScalarField, Vec3, VectorField};
use crate::interpolant::{
    equivalence_row, localized_sobolev_check, write_census_csv, BilinearInterpolant, CensusRow, CutoffFunction,
    InterpolantNorm,
};
use crate::kernels::{
    apply_kernel, duhamel_solve, euler_oracle, kernel_1d, scaled_bessel_i0, to_complex,
    verify_lplq, KernelD, TimeRange,
};
use crate::sample;
use crate::target::{Surface, UnitSphere};

type Outcome = Result<(), ExperimentError>;

pub(super) fn execute(cfg: &ExperimentConfig, dir: &mut OutputDir) -> Outcome {
    match cfg.preset {
        Preset::EnergyDecay | Preset::EnergyConservation => energy_run(cfg, dir),
        Preset::KernelSlopes => kernel_slopes(cfg, dir),
        Preset::KernelMass => kernel_mass(cfg, dir),
        Preset::DuhamelOracle => duhamel_oracle(cfg, dir),
        Preset::InterpolantCensus => interpolant_census(cfg, dir),
        Preset::SobolevCensus => sobolev_census(cfg, dir),
        Preset::FrameHolonomy => frame_holonomy(cfg, dir),
        Preset::LinearizationResidual => linearization(cfg, dir),
        Preset::LocalEnergy => local_energy(cfg, dir),
        Preset::ConcentrationBubble => concentration_bubble(cfg, dir),
        Preset::SmallEnergyRegularity => small_energy(cfg, dir),
    }
}

fn config_error(field: &str, reason: impl Into<String>) -> ExperimentError {
    ExperimentError::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn require_sphere(cfg: &ExperimentConfig) -> Outcome {
    match cfg.solver.surface {
        Surface::Sphere(_) => Ok(()),
        other => Err(config_error("target.surface", format!("preset needs the sphere, got {other}"))),
    }
}

fn base_point(surface: &Surface) -> Vec3 {
    match surface {
        Surface::Torus(t) => t.embed(0.3, 0.7),
        _ => Vec3::z(),
    }
}

fn smooth_data(cfg: &ExperimentConfig, spec: GridSpec, amplitude: f64) -> crate::Result<VectorField> {
    let surface = &cfg.solver.surface;
    sample::smooth_map(
        spec,
        surface,
        base_point(surface),
        amplitude,
        cfg.analysis.kmax,
        &mut sample::rng(cfg.seed),
    )
}

/// Grid over the configured window with `n` nodes per side.
fn ladder_spec(cfg: &ExperimentConfig, n: usize) -> crate::Result<GridSpec> {
    let (lx, _) = cfg.grid.extent();
    GridSpec::new(lx / n as f64, n, n, cfg.grid.boundary())
}

/// `count` indices spread evenly over `0..=last`.
fn frame_indices(last: usize, count: usize) -> Vec<usize> {
    let mut out: Vec<usize> = match count {
        0 => Vec::new(),
        1 => vec![last],
        _ => (0..count).map(|k| k * last / (count - 1)).collect(),
    };
    out.dedup();
    out
}

fn write_frames(dir: &mut OutputDir, states: &[(usize, &VectorField)]) -> Outcome {
    for (k, (_, u)) in states.iter().enumerate() {
        dir.write_pgm(&format!("energy_density_{k:02}.pgm"), "energy_density", &energy_density(u))?;
    }
    Ok(())
}

fn write_trajectory_frames(cfg: &ExperimentConfig, dir: &mut OutputDir, traj: &Trajectory) -> Outcome {
    let picks = frame_indices(traj.states.len().saturating_sub(1), cfg.frames);
    let states: Vec<(usize, &VectorField)> = picks.iter().map(|&i| (i, &traj.states[i].u)).collect();
    write_frames(dir, &states)
}

fn write_energy(dir: &mut OutputDir, trace: &EnergyTrace) -> Outcome {
    dir.write_with("energy.csv", |w| trace.write_csv(w))
}

fn spread(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo > 0.0 {
        hi / lo - 1.0
    } else {
        f64::INFINITY
    }
}

/// Largest `|C(h/2)/C(h) − 1|` along a ladder ordered coarse to fine.
fn halving_change(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|w| if w[0] > 0.0 { (w[1] / w[0] - 1.0).abs() } else { f64::INFINITY })
        .fold(0.0, f64::max)
}

fn energy_run(cfg: &ExperimentConfig, dir: &mut OutputDir) -> Outcome {
    let config = &cfg.solver;
    let u0 = smooth_data(cfg, cfg.grid, cfg.analysis.amplitude)?;
    dir.write_snapshot("initial.llgf", &u0)?;
    let (n, dt) = config.mesh(cfg.grid.h());
    let frame_steps = frame_indices(n, cfg.frames);
    let mut chain = Vec::new();
    let mut frames = Vec::new();
    let mut step = 0usize;
    let (last, trace) = evolve_observed(u0, config, |s| {
        if step % config.record_every == 0 || step == n {
            chain.push(energy_rate(&s.u, &rhs_for(&s.u, config))?);
        }
        if frame_steps.contains(&step) {
            frames.push(energy_density(&s.u));
        }
        step += 1;
        Ok(())
    })?;
    dir.write_snapshot("final.llgf", &last.u)?;
    write_energy(dir, &trace)?;
    for (k, f) in frames.iter().enumerate() {
        dir.write_pgm(&format!("energy_density_{k:02}.pgm"), "energy_density", f)?;
    }

    let w = config.dissipation_weight();
    let energies = trace.energies();
    let e0 = energies[0];
    // the fourth-order difference needs uniform spacing; a short final step is dropped
    let uniform = if n % config.record_every == 0 { energies.len() } else { energies.len() - 1 };
    let fd: Vec<Option<f64>> = {
        let mut v = vec![None; energies.len()];
        for (i, d) in centered_rate(&energies[..uniform], dt * config.record_every as f64) {
            v[i] = Some(d);
        }
        v
    };
    let mut identity = Vec::new();
    writeln!(identity, "t,energy,chain_rate,dissipation_rate,identity_residual,fd_rate,fd_residual")
        .map_err(crate::LatticeError::from)?;
    let (mut worst, mut worst_fd, mut drift) = (0.0_f64, 0.0_f64, 0.0_f64);
    for (i, s) in trace.samples.iter().enumerate() {
        let target = -w * s.dissipation;
        let residual = chain[i] - target;
        worst = worst.max(residual.abs());
        drift = drift.max((s.energy - e0).abs());
        let (fd_cell, fd_res) = match fd[i] {
            Some(d) => {
                worst_fd = worst_fd.max((d - target).abs());
                (d.to_string(), (d - target).to_string())
            }
            None => (String::new(), String::new()),
        };
        writeln!(identity, "{},{},{},{},{},{},{}", s.t, s.energy, chain[i], target, residual, fd_cell, fd_res)
            .map_err(crate::LatticeError::from)?;
    }
    dir.write("identity.csv", &identity)?;

    let increase = trace.max_increase();
    dir.record("steps", n);
    dir.record("dt", dt);
    dir.record("dissipation_weight", w);
    dir.record("energy_initial", e0);
    dir.record("energy_final", *energies.last().unwrap_or(&e0));
    dir.record("max_energy_increase", increase);
    dir.record("energy_nonincreasing", increase == 0.0);
    dir.record("max_identity_residual", worst);
    dir.record("max_fd_identity_residual", worst_fd);
    dir.record("identity_tolerance", 1e-6 * (1.0 + e0));
    dir.record("max_relative_energy_drift", if e0 > 0.0 { drift / e0 } else { 0.0 });
    dir.record(
        "max_offmanifold",
        trace.samples.iter().map(|s| s.max_offmanifold).fold(0.0, f64::max),
    );
    Ok(())
}

fn kernel_cases(cfg: &ExperimentConfig) -> [(&'static str, Complex64); 2] {
    [("heat", Complex64::new(1.0, 0.0)), ("damped", Complex64::new(cfg.solver.alpha, 1.0))]
}

fn kernel_slopes(cfg: &ExperimentConfig, dir: &mut OutputDir) -> Outcome {
    let h = cfg.grid.h();
    let range = TimeRange {
        t_min: 10.0 * h * h,
        t_max: 1e4 * h * h,
        samples: cfg.analysis.samples,
    };
    let mut table = String::from("case,coeff_re,coeff_im,d,p,q,order,slope,target,deviation,pass\n");
    for (name, coeff) in kernel_cases(cfg) {
        for order in [0, 1] {
            let r = verify_lplq(coeff, h, f64::INFINITY, 1.0, order, 2, range)?;
            table.push_str(&format!(
                "{name},{},{},2,inf,1,{order},{},{},{},{}\n",
                coeff.re,
                coeff.im,
                r.slope,
                r.target,
                r.deviation(),
                u8::from(r.passes())
            ));
            dir.write_with(&format!("norms_{name}_order{order}.csv"), |w| r.write_csv(w))?;
            dir.record(&format!("slope_{name}_order{order}"), r.slope);
            dir.record(&format!("pass_{name}_order{order}"), r.passes());
        }
    }
    dir.write("slopes.csv", table.as_bytes())
}

const MASS_TIMES: [f64; 4] = [0.1, 1.0, 10.0, 100.0];

fn kernel_mass(cfg: &ExperimentConfig, dir: &mut OutputDir) -> Outcome {
    let h = cfg.grid.h();
    let mut table = String::from("t_over_h2,mass,mass_error,k0,bessel_oracle,k0_error\n");
    let mut profile = String::from("t_over_h2,j,value\n");
    let (mut mass_err, mut k0_err, mut k0_raw) = (0.0_f64, 0.0_f64, 0.0_f64);
    for x in MASS_TIMES {
        let t = x * h * h;
        let mass = KernelD::heat(t, h)?.mass();
        let line = kernel_1d(t, h, Complex64::new(1.0, 0.0))?;
        let k0 = line.value(0).re;
        let oracle = scaled_bessel_i0(x) / h;
        let (me, ke) = ((mass - 1.0).norm(), (k0 - oracle).abs() * h);
        mass_err = mass_err.max(me);
        k0_err = k0_err.max(ke);
        k0_raw = k0_raw.max((k0 - oracle).abs());
        table.push_str(&format!("{x},{},{me},{k0},{oracle},{ke}\n", mass.re));
        for j in -10..=10 {
            profile.push_str(&format!("{x},{j},{}\n", line.value(j).re));
        }
    }
    dir.write("mass.csv", table.as_bytes())?;
    dir.write("profile.csv", profile.as_bytes())?;
    dir.record("max_mass_error", mass_err);
    dir.record("max_k0_error_scaled", k0_err);
    dir.record("max_k0_error", k0_raw);
    Ok(())
}

fn relative_l2(a: &ComplexField, b: &ComplexField) -> crate::Result<f64> {
    Ok(lp_norm(&a.sub(b)?, 2.0)? / lp_norm(b, 2.0)?)
}

fn duhamel_oracle(cfg: &ExperimentConfig, dir: &mut OutputDir) -> Outcome {
    let spec = cfg.grid;
    let h = spec.h();
    let t = cfg.analysis.oracle_time * h * h;
    let steps = cfg.analysis.oracle_steps;
    let mut rng = sample::rng(cfg.seed);
    let f = to_complex(&sample::smooth_scalar(spec, cfg.analysis.kmax, &mut rng));
    let g = to_complex(&sample::smooth_scalar(spec, cfg.analysis.kmax, &mut rng));
    let mut table = String::from("case,coeff_re,coeff_im,t,steps,rel_l2_error\n");
    let mut worst = 0.0_f64;
    for (name, coeff) in kernel_cases(cfg) {
        let exact = apply_kernel(&KernelD::new(t, h, coeff, 2)?, &f)?;
        let oracle = euler_oracle(&f, coeff, t, steps)?;
        let err = relative_l2(&exact, &oracle)?;
        worst = worst.max(err);
        table.push_str(&format!("{name},{},{},{t},{steps},{err}\n", coeff.re, coeff.im));
        dir.record(&format!("apply_error_{name}"), err);

        // constant forcing from zero data
        let forcing = vec![g.clone(); cfg.analysis.samples.max(1)];
        let zero = ComplexField::zeros(spec);
        let duhamel = duhamel_solve(&zero, &forcing, coeff, t)?;
        let dt = t / steps as f64;
        let mut w = zero;
        for _ in 0..steps {
            let rhs = laplacian(&w).map(|v| v * coeff).add(&g)?;
            w = w.axpy(dt, &rhs)?;
        }
        let err = relative_l2(&duhamel, &w)?;
        table.push_str(&format!("{name}-forced,{},{},{t},{steps},{err}\n", coeff.re, coeff.im));
        dir.record(&format!("duhamel_error_{name}"), err);
    }
    dir.write("oracle.csv", table.as_bytes())?;
    dir.record("max_apply_error", worst);
    Ok(())
}

const NORMS: [(InterpolantNorm, &str); 3] = [
    (InterpolantNorm::L2, "L2"),
    (InterpolantNorm::GradL2, "grad_L2"),
    (InterpolantNorm::L4, "L4"),
];

fn interpolant_census(cfg: &ExperimentConfig, dir: &mut OutputDir) -> Outcome {
    let mut exact = String::from("h,node_mismatch,edge_mismatch,bilinear_error\n");
    let mut rows: Vec<Vec<CensusRow>> = vec![Vec::new(); NORMS.len()];
    let bilinear = |x: f64, y: f64| 3.0 + 2.0 * x - y + 5.0 * x * y;
    let (mut node_worst, mut edge_worst, mut bil_worst) = (0.0_f64, 0.0_f64, 0.0_f64);
    for &n in &cfg.analysis.ladder {
        let spec = ladder_spec(cfg, n)?;
        let u = sample::smooth_map(
            spec,
            &UnitSphere,
            Vec3::z(),
            cfg.analysis.amplitude,
            cfg.analysis.kmax,
            &mut sample::rng(cfg.seed),
        )?;
        let p = BilinearInterpolant::new(&u);
        let (node, edge) = (p.node_mismatch(&u), p.edge_mismatch());
        // bilinear data on interior cells, away from any wrap
        let b = ScalarField::sample(spec, bilinear);
        let pb = BilinearInterpolant::new(&b);
        let span = (n - 1) as f64 * spec.h();
        let mut bil = 0.0_f64;
        for k in 0..=40 {
            for m in 0..=40 {
                let (x, y) = (span * k as f64 / 40.0, span * m as f64 / 40.0);
                bil = bil.max((pb.eval(x, y)? - bilinear(x, y)).abs());
            }
        }
        exact.push_str(&format!("{},{node},{edge},{bil}\n", spec.h()));
        node_worst = node_worst.max(node);
        edge_worst = edge_worst.max(edge);
        bil_worst = bil_worst.max(bil);
        for (i, (which, _)) in NORMS.iter().enumerate() {
            rows[i].push(equivalence_row(&u, *which)?);
        }
    }
    dir.write("exactness.csv", exact.as_bytes())?;
    for (i, (_, name)) in NORMS.iter().enumerate() {
        dir.write_with(&format!("equivalence_{name}.csv"), |w| write_census_csv(&rows[i], w))?;
        let ratios: Vec<f64> = rows[i].iter().map(|r| r.ratio).collect();
        dir.record(&format!("ratio_spread_{name}"), spread(&ratios));
    }
    dir.record("max_node_mismatch", node_worst);
    dir.record("max_edge_mismatch", edge_worst);
    dir.record("max_bilinear_error", bil_worst);
    Ok(())
}

/// `(s, p, q)` with `(s+1)/(2s) = 1/p + 1/q`.
const SOBOLEV_CASES: [(f64, f64, f64); 2] = [(1.0, 2.0, 2.0), (2.0, 4.0, 2.0)];

fn sobolev_census(cfg: &ExperimentConfig, dir: &mut OutputDir) -> Outcome {
    let a = &cfg.analysis;
    let mut detail = String::from("s,p,q,h,field,lhs,rhs,ratio\n");
    let mut fit = String::from("s,p,q,h,c_fit\n");
    for (s, p, q) in SOBOLEV_CASES {
        let mut constants = Vec::new();
        for &n in &a.ladder {
            let spec = ladder_spec(cfg, n)?;
            let cutoff = CutoffFunction::new(spec, a.center, a.radius)?;
            let mut c = 0.0_f64;
            for field in 0..a.fields {
                let u = sample::smooth_scalar(spec, a.kmax, &mut sample::rng(cfg.seed.wrapping_add(field as u64)));
                let row = localized_sobolev_check(&u, &cutoff, s, p, q)?;
                c = c.max(row.ratio);
                detail.push_str(&format!("{s},{p},{q},{},{field},{},{},{}\n", row.h, row.lhs, row.rhs, row.ratio));
            }
            fit.push_str(&format!("{s},{p},{q},{},{c}\n", spec.h()));
            constants.push(c);
        }
        dir.record(&format!("c_fit_s{s}"), constants.clone());
        dir.record(&format!("c_halving_change_s{s}"), halving_change(&constants));
    }
    dir.write("sobolev.csv", detail.as_bytes())?;
    dir.write("sobolev_fit.csv", fit.as_bytes())
}

fn frame_holonomy(cfg: &ExperimentConfig, dir: &mut OutputDir) -> Outcome {
    let a = &cfg.analysis;
    let colatitude = a.cos_colatitude.acos();
    let mut holonomy = String::from("n,h,measured,exact,rel_error\n");
    let mut frames = String::from("n,h,invariant_defect\n");
    let (mut worst_defect, mut finest_error) = (0.0_f64, f64::NAN);
    for &n in &a.ladder {
        let (measured, exact) = cap_holonomy(n, colatitude)?;
        let rel = ((measured - exact) / exact).abs();
        holonomy.push_str(&format!("{n},{},{measured},{exact},{rel}\n", 1.0 / n as f64));
        finest_error = rel;

        let spec = ladder_spec(cfg, n)?;
        let u = sample::smooth_map(spec, &UnitSphere, Vec3::z(), a.amplitude, a.kmax, &mut sample::rng(cfg.seed))?;
        let v0 = u.get(0, 0);
        let seed = (Vec3::x() - v0 * v0.x).normalize();
        let f = transport_frame(&u, &UnitSphere, seed)?;
        let defect = f.invariant_defect(&u, &UnitSphere)?;
        worst_defect = worst_defect.max(defect);
        frames.push_str(&format!("{n},{},{defect}\n", spec.h()));
    }
    dir.write("holonomy.csv", holonomy.as_bytes())?;
    dir.write("frames.csv", frames.as_bytes())?;
    dir.record("holonomy_rel_error_finest", finest_error);
    dir.record("max_invariant_defect", worst_defect);
    Ok(())
}

fn linearization(cfg: &ExperimentConfig, dir: &mut OutputDir) -> Outcome {
    let torus = match cfg.solver.surface {
        Surface::Torus(t) => t,
        other => return Err(config_error("target.surface", format!("preset needs a torus, got {other}"))),
    };
    let a = &cfg.analysis;
    let rows = a
        .ladder
        .iter()
        .map(|&n| torus_residual(&torus, n, a.amplitude, cfg.seed).map(|r| r.row()))
        .collect::<crate::Result<Vec<_>>>()?;
    dir.write_with("residual.csv", |w| write_residual_csv(&rows, w))?;
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio_max).collect();
    dir.record("ratio_max", ratios.clone());
    dir.record("ratio_halving_change", halving_change(&ratios));

    let (slope, amp_rows) = amplitude_exponent(&torus, cfg.grid.nx(), &a.amplitudes, cfg.seed)?;
    dir.write_with("amplitude.csv", |w| {
        write_residual_csv(&amp_rows, &mut *w)?;
        writeln!(w, "# n={} amplitudes={:?} slope={slope}", cfg.grid.nx(), a.amplitudes)?;
        Ok(())
    })?;
    dir.record("amplitude_exponent", slope);
    Ok(())
}

fn local_energy(cfg: &ExperimentConfig, dir: &mut OutputDir) -> Outcome {
    let a = &cfg.analysis;
    let u0 = smooth_data(cfg, cfg.grid, a.amplitude)?;
    let (traj, trace) = evolve_trajectory(u0, &cfg.solver, cfg.store_every)?;
    write_energy(dir, &trace)?;
    let report = local_energy_inequality_check(&traj, &cfg.solver, a.center, a.radius, 0.0, cfg.solver.t_end)?;
    dir.write_with("local_energy.csv", |w| report.write_csv(w))?;
    let d2 = second_derivative_trace(&traj, a.center, a.radius)?;
    dir.write_with("d2_trace.csv", |w| d2.write_csv(w))?;
    write_trajectory_frames(cfg, dir, &traj)?;
    dir.record("min_slack", report.min_slack());
    dir.record("c_cutoff", report.c_cutoff);
    dir.record("c_fit", report.c_fit);
    dir.record("y_sup", d2.sup());
    Ok(())
}

fn concentration_params(cfg: &ExperimentConfig) -> ConcentrationParams {
    ConcentrationParams {
        eps0: cfg.analysis.eps0,
        delta: cfg.analysis.delta,
        r0: cfg.analysis.r0,
    }
}

fn record_concentration(dir: &mut OutputDir, report: &ConcentrationReport) -> Outcome {
    dir.write_with("concentration.csv", |w| report.write_csv(w))?;
    dir.record("eps0", report.eps0);
    dir.record("delta", report.delta);
    dir.record("energy_initial", report.initial_energy);
    dir.record("flagged", report.flagged.len());
    dir.record("selected", report.selected().count());
    dir.record("sum_r2", report.sum_r2());
    dir.record("sum_bound", report.sum_bound());
    dir.record("max_slice_count", report.max_slice_count());
    dir.record("count_bound", report.count_bound());
    dir.record("disjoint", report.is_disjoint());
    dir.record("vitali", report.has_vitali_property());
    Ok(())
}

fn concentration_bubble(cfg: &ExperimentConfig, dir: &mut OutputDir) -> Outcome {
    require_sphere(cfg)?;
    let a = &cfg.analysis;
    let u0 = sample::equivariant_bubble(cfg.grid, a.center, a.lambda, a.r_out);
    dir.write_snapshot("initial.llgf", &u0)?;
    let (traj, trace) = evolve_trajectory(u0, &cfg.solver, cfg.store_every)?;
    write_energy(dir, &trace)?;
    if let Some(last) = traj.states.last() {
        dir.write_snapshot("final.llgf", &last.u)?;
    }
    write_trajectory_frames(cfg, dir, &traj)?;
    let report = detect_concentration(&traj, concentration_params(cfg))?;
    record_concentration(dir, &report)?;
    let nearest = report
        .flagged
        .iter()
        .map(|f| (f.cylinder.center.0 - a.center.0).hypot(f.cylinder.center.1 - a.center.1))
        .fold(f64::INFINITY, f64::min);
    dir.record("nearest_flag_distance_over_h", nearest / cfg.grid.h());
    Ok(())
}

/// Amplitude whose smooth data has energy `target`, by bisection.
fn amplitude_for_energy(cfg: &ExperimentConfig, target: f64) -> crate::Result<(f64, VectorField)> {
    let energy = |amp: f64| smooth_data(cfg, cfg.grid, amp).map(|u| discrete_energy(&u));
    let mut hi = 1.0;
    while energy(hi)? < target {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(crate::LatticeError::InvalidParameter {
                name: "energy_fraction".into(),
                reason: format!("no amplitude reaches energy {target}"),
            });
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if energy(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, smooth_data(cfg, cfg.grid, lo)?))
}

fn small_energy(cfg: &ExperimentConfig, dir: &mut OutputDir) -> Outcome {
    require_sphere(cfg)?;
    let a = &cfg.analysis;
    let target = a.energy_fraction * a.eps0;
    let (amplitude, u0) = amplitude_for_energy(cfg, target)?;
    dir.record("amplitude", amplitude);
    dir.record("energy_target", target);
    let (traj, trace) = evolve_trajectory(u0, &cfg.solver, cfg.store_every)?;
    write_energy(dir, &trace)?;
    write_trajectory_frames(cfg, dir, &traj)?;
    let report = detect_concentration(&traj, concentration_params(cfg))?;
    record_concentration(dir, &report)?;

    let mut summary = String::from("n,h,energy,y_sup\n");
    let mut sups = Vec::new();
    for &n in &a.ladder {
        let spec = ladder_spec(cfg, n)?;
        let u = smooth_data(cfg, spec, amplitude)?;
        let e = discrete_energy(&u);
        let (run, _) = evolve_trajectory(u, &cfg.solver, cfg.store_every)?;
        let d2 = second_derivative_trace(&run, a.center, a.radius)?;
        dir.write_with(&format!("y_trace_n{n}.csv"), |w| d2.write_csv(w))?;
        summary.push_str(&format!("{n},{},{e},{}\n", spec.h(), d2.sup()));
        sups.push(d2.sup());
    }
    dir.write("y_summary.csv", summary.as_bytes())?;
    dir.record("y_sup", sups.clone());
    dir.record("y_halving_change", halving_change(&sups));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_indices_cover_both_ends() {
        assert_eq!(frame_indices(10, 4), vec![0, 3, 6, 10]);
        assert_eq!(frame_indices(10, 1), vec![10]);
        assert!(frame_indices(10, 0).is_empty());
        assert_eq!(frame_indices(1, 4), vec![0, 1]);
    }

    #[test]
    fn halving_change_and_spread() {
        assert_eq!(halving_change(&[1.0, 1.5, 1.2]), 0.5);
        assert!((spread(&[1.0, 1.1]) - 0.1).abs() < 1e-12);
        assert!(spread(&[0.0, 1.0]).is_infinite());
    }

    #[test]
    fn presets_needing_a_surface_reject_others() {
        let cfg = ExperimentConfig::build(
            Some(Preset::ConcentrationBubble),
            Some("[target]\nsurface = torus:2,0.7\n"),
            None,
        )
        .unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let mut dir = OutputDir::open(tmp.path()).unwrap();
        let err = execute(&cfg, &mut dir).unwrap_err();
        assert!(err.to_string().contains("target.surface"));
    }

    #[test]
    fn sobolev_cases_satisfy_the_exponent_relation() {
        for (s, p, q) in SOBOLEV_CASES {
            assert!(((s + 1.0) / (2.0 * s) - 1.0 / p - 1.0 / q).abs() < 1e-15);
        }
    }
}
