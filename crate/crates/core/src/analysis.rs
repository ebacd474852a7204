//! Local energy monitoring, second-difference traces and the concentration
//! detector built on parabolic cylinders.

use std::io::Write;

use crate::dynamics::{discrete_energy, energy_density, local_energy, rhs_for, SolverConfig, Trajectory};
use crate::error::{invalid, LatticeError, Result};
use crate::grid::{lp_norm_masked, pairwise_sum, Boundary, GridSpec, MultiIndex, ScalarField};
use crate::interpolant::CutoffFunction;

/// Default concentration threshold, `0.3` of the energy `4π` of a sphere bubble.
pub const DEFAULT_EPS0: f64 = 0.3 * 4.0 * std::f64::consts::PI;

/// `P_R(x₀, t₀) = B_R(x₀) × [t₀ − δR²/2, t₀ + δR²/2]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParabolicCylinder {
    pub center: (f64, f64),
    pub t0: f64,
    pub radius: f64,
    pub half_width: f64,
}

impl ParabolicCylinder {
    pub fn new(center: (f64, f64), t0: f64, radius: f64, delta: f64, h: f64) -> Result<Self> {
        if !(radius > h) {
            return Err(invalid("R", format!("radius {radius} must exceed h = {h}")));
        }
        if !(delta > 0.0) {
            return Err(invalid("delta", "must be positive"));
        }
        Ok(Self {
            center,
            t0,
            radius,
            half_width: 0.5 * delta * radius * radius,
        })
    }

    pub fn t_start(&self) -> f64 {
        self.t0 - self.half_width
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.half_width
    }
}

/// Both sides of the local energy inequality
/// `E(t; B_R) + w∫‖∂ₜu ζ‖² ≤ E(t₀; B_2R) + C(t − t₀)/R²·E[f]`
/// at every stored time of a window, where `w` is the flow's dissipation
/// weight and `E[f]` the energy of the first stored state.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalEnergyReport {
    pub center: (f64, f64),
    pub radius: f64,
    pub t0: f64,
    pub times: Vec<f64>,
    pub ball_energy: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub initial_outer: f64,
    pub initial_total: f64,
    /// `4k²` with `k = R·max|D¹ζ|` of the cutoff.
    pub c_cutoff: f64,
    /// Smallest `C` for which every sampled time satisfies the inequality.
    pub c_fit: f64,
    /// Right side minus left side with `C = c_cutoff`.
    pub slack: Vec<f64>,
}

impl LocalEnergyReport {
    pub fn min_slack(&self) -> f64 {
        self.slack.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,ball_energy,dissipation,rhs_cutoff,slack")?;
        for i in 0..self.times.len() {
            let rhs = self.ball_energy[i] + self.dissipation[i] + self.slack[i];
            writeln!(w, "{},{},{},{},{}", self.times[i], self.ball_energy[i], self.dissipation[i], rhs, self.slack[i])?;
        }
        writeln!(
            w,
            "# x0={} y0={} R={} t0={} c_cutoff={} c_fit={}",
            self.center.0, self.center.1, self.radius, self.t0, self.c_cutoff, self.c_fit
        )?;
        Ok(())
    }
}

fn stored_window(traj: &Trajectory, t0: f64, t1: f64) -> Result<(usize, usize)> {
    let tol = 1e-9 * t1.abs().max(1.0);
    let first = traj.states.iter().position(|s| s.t >= t0 - tol);
    let last = traj.states.iter().rposition(|s| s.t <= t1 + tol);
    match (first, last) {
        (Some(a), Some(b)) if b >= a + 2 => Ok((a, b)),
        _ => Err(LatticeError::InsufficientSampling(format!(
            "need at least 3 stored states in [{t0}, {t1}]"
        ))),
    }
}

/// Evaluates the local energy inequality on `[t₀, t₁]` for the ball
/// `B_R(x₀)`; the time integral is a trapezoid rule over stored states.
pub fn local_energy_inequality_check(
    traj: &Trajectory,
    config: &SolverConfig,
    center: (f64, f64),
    radius: f64,
    t0: f64,
    t1: f64,
) -> Result<LocalEnergyReport> {
    let first = traj
        .states
        .first()
        .ok_or_else(|| LatticeError::InsufficientSampling("empty trajectory".into()))?;
    let spec = *first.u.spec();
    let (a, b) = stored_window(traj, t0, t1)?;
    let cutoff = CutoffFunction::new(spec, center, radius)?;
    let weight = config.dissipation_weight();
    let zeta_sq: Vec<f64> = cutoff.zeta.values().iter().map(|z| z * z).collect();
    let rate = |i: usize| {
        let rhs = rhs_for(&traj.states[i].u, config);
        let terms: Vec<f64> = rhs.values().iter().zip(&zeta_sq).map(|(v, z)| v.norm_squared() * z).collect();
        weight * spec.cell_area() * pairwise_sum(&terms)
    };
    let start = traj.states[a].t;
    let initial_outer = local_energy(&traj.states[a].u, center, 2.0 * radius);
    let initial_total = discrete_energy(&first.u);
    let c_cutoff = 4.0 * cutoff.k1 * cutoff.k1;
    let mut times = Vec::new();
    let mut ball_energy = Vec::new();
    let mut dissipation = Vec::new();
    let mut acc = 0.0;
    let mut prev = rate(a);
    for i in a..=b {
        if i > a {
            let now = rate(i);
            acc += 0.5 * (prev + now) * (traj.states[i].t - traj.states[i - 1].t);
            prev = now;
        }
        times.push(traj.states[i].t);
        ball_energy.push(local_energy(&traj.states[i].u, center, radius));
        dissipation.push(acc);
    }
    let growth = |t: f64| (t - start) / (radius * radius) * initial_total;
    let mut c_fit = 0.0_f64;
    for i in 0..times.len() {
        let excess = ball_energy[i] + dissipation[i] - initial_outer;
        if excess > 0.0 {
            let g = growth(times[i]);
            c_fit = c_fit.max(if g > 0.0 { excess / g } else { f64::INFINITY });
        }
    }
    let slack = (0..times.len())
        .map(|i| initial_outer + c_cutoff * growth(times[i]) - ball_energy[i] - dissipation[i])
        .collect();
    Ok(LocalEnergyReport {
        center,
        radius,
        t0: start,
        times,
        ball_energy,
        dissipation,
        initial_outer,
        initial_total,
        c_cutoff,
        c_fit,
        slack,
    })
}

/// `‖D²u(t)‖_{L²_h(B_R(x₀))}` over stored states, with the running
/// `y(t) = sup_{s ≤ t} s^{1/2}‖D²u(s)‖`.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondDerivativeTrace {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub running_sup: Vec<f64>,
}

impl SecondDerivativeTrace {
    pub fn sup(&self) -> f64 {
        self.running_sup.last().copied().unwrap_or(0.0)
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,d2_norm,y")?;
        for i in 0..self.times.len() {
            writeln!(w, "{},{},{}", self.times[i], self.norms[i], self.running_sup[i])?;
        }
        Ok(())
    }
}

fn ball_mask(spec: &GridSpec, center: (f64, f64), radius: f64) -> Vec<bool> {
    (0..spec.len())
        .map(|k| {
            let (ix, iy) = spec.node(k);
            let (dx, dy) = spec.displacement(center, ix, iy);
            dx * dx + dy * dy < radius * radius
        })
        .collect()
}

pub fn second_derivative_trace(traj: &Trajectory, center: (f64, f64), radius: f64) -> Result<SecondDerivativeTrace> {
    let first = traj
        .states
        .first()
        .ok_or_else(|| LatticeError::InsufficientSampling("empty trajectory".into()))?;
    let mask = ball_mask(first.u.spec(), center, radius);
    let indices = MultiIndex::all_of_order(2);
    let mut times = Vec::with_capacity(traj.states.len());
    let mut norms = Vec::with_capacity(traj.states.len());
    let mut running_sup = Vec::with_capacity(traj.states.len());
    let mut sup = 0.0_f64;
    for s in &traj.states {
        let mut sq = 0.0;
        for alpha in &indices {
            let n = lp_norm_masked(&alpha.apply(&s.u), 2.0, &mask)?;
            sq += n * n;
        }
        let norm = sq.sqrt();
        sup = sup.max(s.t.max(0.0).sqrt() * norm);
        times.push(s.t);
        norms.push(norm);
        running_sup.push(sup);
    }
    Ok(SecondDerivativeTrace { times, norms, running_sup })
}

/// Parameters of the concentration scan. `delta = None` selects
/// `ε₀/(2Eʰ[f])`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConcentrationParams {
    pub eps0: f64,
    pub delta: Option<f64>,
    pub r0: f64,
}

impl ConcentrationParams {
    pub fn new(eps0: f64, r0: f64) -> Self {
        Self { eps0, delta: None, r0 }
    }
}

/// One flagged cylinder at a center `x₀` where `E(u(T_j); B_2R(x₀)) > ε₀/2`
/// for every radius `R` of the ladder, at the base time `T_j` of slice `j`.
/// The cylinder's time is snapped to the slice, `t₀ = T_j + δR²/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlaggedCylinder {
    pub cylinder: ParabolicCylinder,
    pub slice: usize,
    pub local_energy: f64,
    pub selected: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationReport {
    pub eps0: f64,
    pub delta: f64,
    pub r0: f64,
    pub initial_energy: f64,
    pub slice_length: f64,
    pub slices: usize,
    /// Grid spacings used; local energies are minima over all of them.
    pub spacings: Vec<f64>,
    pub radii: Vec<f64>,
    /// Window extent when distances wrap periodically.
    pub period: Option<(f64, f64)>,
    pub flagged: Vec<FlaggedCylinder>,
}

impl ConcentrationReport {
    pub fn selected(&self) -> impl Iterator<Item = &FlaggedCylinder> {
        self.flagged.iter().filter(|f| f.selected)
    }

    pub fn sum_r2(&self) -> f64 {
        self.selected().map(|f| f.cylinder.radius * f.cylinder.radius).fold(0.0, |acc, r2| acc + r2)
    }

    pub fn slice_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.slices];
        for f in self.selected() {
            counts[f.slice] += 1;
        }
        counts
    }

    pub fn max_slice_count(&self) -> usize {
        self.slice_counts().into_iter().max().unwrap_or(0)
    }

    /// `Eʰ[f]/(2ε₀)`, the per-slice ball count bound as stated for the covering.
    pub fn count_bound(&self) -> f64 {
        self.initial_energy / (2.0 * self.eps0)
    }

    /// `Eʰ[f]/(2δε₀)`, the scale of the `ΣR_k²` bound.
    pub fn sum_bound(&self) -> f64 {
        self.initial_energy / (2.0 * self.delta * self.eps0)
    }

    /// Selected `B_2R` balls within each slice are pairwise disjoint.
    pub fn is_disjoint(&self) -> bool {
        let sel: Vec<&FlaggedCylinder> = self.selected().collect();
        sel.iter().enumerate().all(|(i, a)| {
            sel[i + 1..]
                .iter()
                .all(|b| a.slice != b.slice || !balls_meet(a, b, self.period))
        })
    }

    /// Every flagged ball meets a selected ball of at least its radius in the
    /// same slice.
    pub fn has_vitali_property(&self) -> bool {
        self.flagged.iter().all(|f| {
            self.selected().any(|s| {
                s.slice == f.slice && s.cylinder.radius >= f.cylinder.radius && balls_meet(s, f, self.period)
            })
        })
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "x0,y0,t0,R,local_energy,selected")?;
        for f in &self.flagged {
            let c = &f.cylinder;
            writeln!(
                w,
                "{},{},{},{},{},{}",
                c.center.0,
                c.center.1,
                c.t0,
                c.radius,
                f.local_energy,
                u8::from(f.selected)
            )?;
        }
        let spacings: Vec<String> = self.spacings.iter().map(|h| h.to_string()).collect();
        writeln!(
            w,
            "# sum_R2={} eps0={} delta={} R0={} E_f={} slices={} max_slice_count={} count_bound={} sum_bound={} h=[{}]",
            self.sum_r2(),
            self.eps0,
            self.delta,
            self.r0,
            self.initial_energy,
            self.slices,
            self.max_slice_count(),
            self.count_bound(),
            self.sum_bound(),
            spacings.join(";")
        )?;
        Ok(())
    }
}

fn balls_meet(a: &FlaggedCylinder, b: &FlaggedCylinder, period: Option<(f64, f64)>) -> bool {
    let (mut dx, mut dy) = (a.cylinder.center.0 - b.cylinder.center.0, a.cylinder.center.1 - b.cylinder.center.1);
    if let Some((lx, ly)) = period {
        dx -= lx * (dx / lx).round();
        dy -= ly * (dy / ly).round();
    }
    dx.hypot(dy) < 2.0 * (a.cylinder.radius + b.cylinder.radius)
}

/// Integer node offsets inside the open disc of the given radius.
fn disc_offsets(h: f64, radius: f64) -> Vec<(isize, isize)> {
    let m = (radius / h).ceil() as isize;
    let mut out = Vec::new();
    for dy in -m..=m {
        for dx in -m..=m {
            let (x, y) = (dx as f64 * h, dy as f64 * h);
            if x * x + y * y < radius * radius {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Energy of `B_radius` around the coarse nodes `centers`, located at node
/// `(ix·step, iy·step)` of the grid carrying `density`.
fn ball_energies(density: &ScalarField, coarse: &GridSpec, centers: &[usize], step: usize, radius: f64) -> Vec<f64> {
    let spec = density.spec();
    let offsets = disc_offsets(spec.h(), radius);
    let area = spec.cell_area();
    let one = |k: usize| {
        let (cx, cy) = coarse.node(k);
        let (fx, fy) = ((cx * step) as isize, (cy * step) as isize);
        let terms: Vec<f64> = offsets.iter().map(|&(dx, dy)| density.at(fx + dx, fy + dy)).collect();
        area * pairwise_sum(&terms)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        centers.par_iter().map(|&k| one(k)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    centers.iter().map(|&k| one(k)).collect()
}

/// Single-grid concentration scan.
pub fn detect_concentration(traj: &Trajectory, params: ConcentrationParams) -> Result<ConcentrationReport> {
    detect_concentration_multi(&[traj], params)
}

/// Concentration scan over an `h`-ladder of runs from the same data: each
/// local energy is the minimum over the ladder, evaluated at the nodes of the
/// coarsest grid. Spacings must be nested by powers of two over a common
/// window.
pub fn detect_concentration_multi(trajs: &[&Trajectory], params: ConcentrationParams) -> Result<ConcentrationReport> {
    if trajs.is_empty() || trajs.iter().any(|t| t.states.is_empty()) {
        return Err(LatticeError::InsufficientSampling("need at least one non-empty trajectory".into()));
    }
    if !(params.eps0 > 0.0) {
        return Err(invalid("eps0", "must be positive"));
    }
    let mut order: Vec<&Trajectory> = trajs.to_vec();
    order.sort_by(|a, b| b.states[0].u.spec().h().total_cmp(&a.states[0].u.spec().h()));
    let coarse = *order[0].states[0].u.spec();
    let mut steps = Vec::with_capacity(order.len());
    for t in &order {
        let spec = t.states[0].u.spec();
        let ratio = coarse.h() / spec.h();
        let step = ratio.round() as usize;
        let nested = (ratio - step as f64).abs() < 1e-9
            && step.is_power_of_two()
            && spec.nx() == coarse.nx() * step
            && spec.ny() == coarse.ny() * step
            && spec.boundary() == coarse.boundary();
        if !nested {
            return Err(LatticeError::IncompatibleGrids(format!(
                "h = {} is not a power-of-two refinement of h = {} on the same window",
                spec.h(),
                coarse.h()
            )));
        }
        steps.push(step);
    }
    let initial_energy = discrete_energy(&order[0].states[0].u);
    let delta = params.delta.unwrap_or(params.eps0 / (2.0 * initial_energy));
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid("delta", format!("must be positive, got {delta}")));
    }
    if !(params.r0 > coarse.h()) {
        return Err(invalid("R0", format!("{} must exceed h = {}", params.r0, coarse.h())));
    }
    let slice_length = 0.5 * delta * params.r0 * params.r0;
    for t in &order {
        let cadence = t.cadence();
        if cadence > 0.5 * slice_length * (1.0 + 1e-9) {
            return Err(LatticeError::MeshTooCoarse(format!(
                "stored cadence {cadence:e} exceeds δR₀²/4 = {:e}",
                0.5 * slice_length
            )));
        }
    }
    let t_final = order.iter().map(|t| t.states.last().map_or(0.0, |s| s.t)).fold(f64::INFINITY, f64::min);
    let mut radii = Vec::new();
    let mut r = params.r0;
    while r > coarse.h() {
        radii.push(r);
        r *= 0.5;
    }
    let slices = ((t_final / slice_length) * (1.0 + 1e-12)).floor() as usize + 1;
    let threshold = 0.5 * params.eps0;
    let mut flagged = Vec::new();
    for slice in 0..slices {
        let base = slice as f64 * slice_length;
        let densities: Vec<ScalarField> = order
            .iter()
            .map(|t| {
                let nearest = t
                    .states
                    .iter()
                    .min_by(|a, b| (a.t - base).abs().total_cmp(&(b.t - base).abs()))
                    .expect("non-empty");
                energy_density(&nearest.u)
            })
            .collect();
        // a center concentrates when every radius of the ladder exceeds ε₀/2;
        // small balls are cheapest and prune the most, so they go first
        let mut centers: Vec<usize> = (0..coarse.len()).collect();
        let mut per_radius = vec![vec![0.0; coarse.len()]; radii.len()];
        for (r, &radius) in radii.iter().enumerate().rev() {
            let mut energies = vec![f64::INFINITY; centers.len()];
            for (density, &step) in densities.iter().zip(&steps) {
                let e = ball_energies(density, &coarse, &centers, step, 2.0 * radius);
                for (m, v) in energies.iter_mut().zip(e) {
                    *m = m.min(v);
                }
            }
            let mut kept = Vec::new();
            for (&k, &e) in centers.iter().zip(&energies) {
                per_radius[r][k] = e;
                if e > threshold {
                    kept.push(k);
                }
            }
            centers = kept;
        }
        let mut in_slice = Vec::new();
        for &k in &centers {
            let (ix, iy) = coarse.node(k);
            for (&radius, energies) in radii.iter().zip(&per_radius) {
                if base + delta * radius * radius > t_final * (1.0 + 1e-12) {
                    continue;
                }
                let t0 = base + 0.5 * delta * radius * radius;
                in_slice.push(FlaggedCylinder {
                    cylinder: ParabolicCylinder::new(coarse.position(ix, iy), t0, radius, delta, coarse.h())?,
                    slice,
                    local_energy: energies[k],
                    selected: false,
                });
            }
        }
        select_disjoint(&mut in_slice, period_of(&coarse));
        flagged.extend(in_slice);
    }
    Ok(ConcentrationReport {
        eps0: params.eps0,
        delta,
        r0: params.r0,
        initial_energy,
        slice_length,
        slices,
        spacings: order.iter().map(|t| t.states[0].u.spec().h()).collect(),
        radii,
        period: period_of(&coarse),
        flagged,
    })
}

fn period_of(spec: &GridSpec) -> Option<(f64, f64)> {
    match spec.boundary() {
        Boundary::Periodic => Some(spec.extent()),
        Boundary::ConstantFarField => None,
    }
}

/// Greedy Vitali selection: largest radius first, ties broken by the
/// lexicographic center `(x, y)`.
fn select_disjoint(cands: &mut [FlaggedCylinder], period: Option<(f64, f64)>) {
    cands.sort_by(|a, b| {
        b.cylinder
            .radius
            .total_cmp(&a.cylinder.radius)
            .then(a.cylinder.center.0.total_cmp(&b.cylinder.center.0))
            .then(a.cylinder.center.1.total_cmp(&b.cylinder.center.1))
    });
    let mut chosen: Vec<usize> = Vec::new();
    for i in 0..cands.len() {
        if chosen.iter().all(|&c| !balls_meet(&cands[c], &cands[i], period)) {
            cands[i].selected = true;
            chosen.push(i);
        }
    }
}
