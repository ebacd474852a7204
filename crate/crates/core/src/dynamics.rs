//! Semi-discrete LLG and harmonic map heat flow.
//!
//! The lattice system is
//!
//! ```text
//! ∂ₜu_j = ν_j ∧ Δʰu_j + α(Δʰu_j + λ_j ν_j),   λ_j = −Δʰu_j·ν_j
//! ```
//!
//! and the heat flow keeps only `Δʰu_j + λ_j ν_j`. Time integration is
//! classical RK4 followed by a node-wise nearest-point retraction.

use std::io::Write;

use crate::error::{invalid, LatticeError, Result};
use crate::grid::{
    build, diff, Boundary, laplacian, pairwise_sum, Axis, DiffKind, Field, ScalarField, Vec3, VectorField,
};
use crate::grid::calculus::laplacian_at;
use crate::target::{Hypersurface, Surface, TOL_N};

/// Which right-hand side to integrate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Flow {
    /// `ν ∧ Δʰu + α(Δʰu + λν)`.
    Llg,
    /// `Δʰu + λν`.
    HeatFlow,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DtPolicy {
    Fixed(f64),
    /// `dt = c·h²/(1 + α)`.
    Cfl(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    NearestPoint,
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub alpha: f64,
    pub flow: Flow,
    pub surface: Surface,
    pub dt_policy: DtPolicy,
    pub projection: Projection,
    pub t_end: f64,
    /// Record an energy sample every this many steps.
    pub record_every: usize,
}

impl SolverConfig {
    pub const DEFAULT_CFL: f64 = 0.125;

    pub fn new(surface: Surface, alpha: f64, t_end: f64) -> Self {
        Self {
            alpha,
            flow: Flow::Llg,
            surface,
            dt_policy: DtPolicy::Cfl(Self::DEFAULT_CFL),
            projection: Projection::NearestPoint,
            t_end,
            record_every: 1,
        }
    }

    pub fn heat_flow(surface: Surface, t_end: f64) -> Self {
        Self {
            flow: Flow::HeatFlow,
            ..Self::new(surface, 1.0, t_end)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(invalid("alpha", format!("damping must be ≥ 0, got {}", self.alpha)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(invalid("t_end", format!("must be ≥ 0, got {}", self.t_end)));
        }
        match self.dt_policy {
            DtPolicy::Fixed(dt) if !(dt.is_finite() && dt > 0.0) => {
                Err(invalid("dt", format!("must be positive, got {dt}")))
            }
            DtPolicy::Cfl(c) if !(c > 0.0 && c <= 0.25) => {
                Err(invalid("cfl", format!("must lie in (0, 1/4], got {c}")))
            }
            _ if self.record_every == 0 => Err(invalid("record_every", "must be ≥ 1")),
            _ => Ok(()),
        }
    }

    /// Weight `w` in `dEʰ/dt = −w‖∂ₜu‖²_{L²_h}`: `α/(1 + α²)` for LLG and 1
    /// for heat flow.
    pub fn dissipation_weight(&self) -> f64 {
        match self.flow {
            Flow::Llg => self.alpha / (1.0 + self.alpha * self.alpha),
            Flow::HeatFlow => 1.0,
        }
    }

    /// Nominal step size for grid spacing `h`.
    pub fn dt(&self, h: f64) -> f64 {
        match self.dt_policy {
            DtPolicy::Fixed(dt) => dt,
            DtPolicy::Cfl(c) => c * h * h / (1.0 + self.alpha),
        }
    }

    /// Number of uniform steps reaching `t_end` and the step actually used.
    pub fn mesh(&self, h: f64) -> (usize, f64) {
        if self.t_end == 0.0 {
            return (0, self.dt(h));
        }
        let n = ((self.t_end / self.dt(h)) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        (n, self.t_end / n as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: VectorField,
}

impl State {
    /// Wraps initial data after checking every node (and the far value) is on `N`.
    pub fn new<S: Hypersurface + ?Sized>(u: VectorField, surface: &S) -> Result<Self> {
        check_on_manifold(&u, surface)?;
        Ok(Self { t: 0.0, u })
    }
}

fn check_on_manifold<S: Hypersurface + ?Sized>(u: &VectorField, surface: &S) -> Result<()> {
    u.check_finite()?;
    for (k, v) in u.values().iter().enumerate() {
        let d = surface.distance(v);
        if d > 10.0 * TOL_N {
            let (ix, iy) = u.spec().node(k);
            return Err(LatticeError::OffManifoldNode { ix, iy, distance: d });
        }
    }
    if u.spec().boundary() == Boundary::ConstantFarField {
        let far = u.far_value();
        let d = surface.distance(&far);
        if d > 10.0 * TOL_N {
            return Err(LatticeError::OffManifold { point: [far.x, far.y, far.z], distance: d });
        }
    }
    Ok(())
}

/// Node-wise energy density `e_j = ¼ Σᵢ (|D₊ᵢu_j|² + |D₋ᵢu_j|²)`, so that
/// `Eʰ = h² Σ_j e_j`.
pub fn energy_density(u: &VectorField) -> ScalarField {
    let spec = *u.spec();
    let inv_h2 = 1.0 / spec.cell_area();
    let values = build(&spec, |k| {
        let here = u.values()[k];
        let s = (u.neighbor(k, 1, 0) - here).norm_squared()
            + (u.neighbor(k, -1, 0) - here).norm_squared()
            + (u.neighbor(k, 0, 1) - here).norm_squared()
            + (u.neighbor(k, 0, -1) - here).norm_squared();
        0.25 * s * inv_h2
    });
    Field::new(spec, values).expect("finite input gives finite density")
}

/// `Eʰ[u] = ½h² Σ_j ½ Σᵢ (|D₊ᵢu_j|² + |D₋ᵢu_j|²)`.
pub fn discrete_energy(u: &VectorField) -> f64 {
    u.spec().cell_area() * pairwise_sum(energy_density(u).values())
}

/// Energy restricted to nodes `j` with `|jh − center| < radius`
/// (minimum-image distance on periodic grids).
pub fn local_energy(u: &VectorField, center: (f64, f64), radius: f64) -> f64 {
    let density = energy_density(u);
    local_sum(&density, center, radius)
}

pub(crate) fn local_sum(density: &ScalarField, center: (f64, f64), radius: f64) -> f64 {
    let spec = density.spec();
    let terms: Vec<f64> = (0..spec.len())
        .map(|k| {
            let (ix, iy) = spec.node(k);
            let (dx, dy) = spec.displacement(center, ix, iy);
            if dx * dx + dy * dy < radius * radius {
                density.values()[k]
            } else {
                0.0
            }
        })
        .collect();
    spec.cell_area() * pairwise_sum(&terms)
}

/// `λ_j = −Δʰu_j·ν_j`.
pub fn lagrange_multiplier<S: Hypersurface + ?Sized>(u: &VectorField, surface: &S) -> Result<ScalarField> {
    check_on_manifold(u, surface)?;
    let lap = laplacian(u);
    u.zip_map(&lap, |v, l| -l.dot(&surface.extended_normal(&v)))
}

/// LLG right-hand side at an on-manifold state.
pub fn rhs_llg<S: Hypersurface + ?Sized>(u: &VectorField, alpha: f64, surface: &S) -> Result<VectorField> {
    check_on_manifold(u, surface)?;
    Ok(rhs_unchecked(u, Flow::Llg, alpha, surface))
}

/// Heat-flow right-hand side at an on-manifold state.
pub fn rhs_heatflow<S: Hypersurface + ?Sized>(u: &VectorField, surface: &S) -> Result<VectorField> {
    check_on_manifold(u, surface)?;
    Ok(rhs_unchecked(u, Flow::HeatFlow, 1.0, surface))
}

/// Right-hand side with `ν` taken from the extended normal field, valid for
/// the slightly off-manifold RK stage values.
pub(crate) fn rhs_unchecked<S: Hypersurface + ?Sized>(
    u: &VectorField,
    flow: Flow,
    alpha: f64,
    surface: &S,
) -> VectorField {
    let spec = *u.spec();
    let inv_h2 = 1.0 / spec.cell_area();
    let values = build(&spec, |k| {
        let lap: Vec3 = laplacian_at(u, k, inv_h2);
        let nu = surface.extended_normal(&u.values()[k]);
        let tangent = lap - nu * lap.dot(&nu);
        match flow {
            Flow::Llg => nu.cross(&lap) + tangent * alpha,
            Flow::HeatFlow => tangent,
        }
    });
    Field::from_raw(spec, values, Vec3::zeros())
}

pub(crate) fn rhs_for(u: &VectorField, config: &SolverConfig) -> VectorField {
    rhs_unchecked(u, config.flow, config.alpha, &config.surface)
}

/// Largest node distance to the target.
pub fn max_offmanifold<S: Hypersurface + ?Sized>(u: &VectorField, surface: &S) -> f64 {
    u.values().iter().map(|v| surface.distance(v)).fold(0.0, f64::max)
}

/// RK4 update without retraction.
pub fn rk4_increment(u: &VectorField, dt: f64, config: &SolverConfig) -> Result<VectorField> {
    let k1 = rhs_for(u, config);
    let k2 = rhs_for(&u.axpy(0.5 * dt, &k1)?, config);
    let k3 = rhs_for(&u.axpy(0.5 * dt, &k2)?, config);
    let k4 = rhs_for(&u.axpy(dt, &k3)?, config);
    let w = dt / 6.0;
    let spec = *u.spec();
    let values = build(&spec, |k| {
        u.values()[k]
            + (k1.values()[k] + (k2.values()[k] + k3.values()[k]) * 2.0 + k4.values()[k]) * w
    });
    Ok(Field::from_raw(spec, values, u.far_value()))
}

/// Node-wise nearest-point retraction.
pub fn retract<S: Hypersurface + ?Sized>(u: &VectorField, surface: &S) -> Result<VectorField> {
    let mut values = Vec::with_capacity(u.spec().len());
    for (k, v) in u.values().iter().enumerate() {
        let (ix, iy) = u.spec().node(k);
        if !v.iter().all(|c| c.is_finite()) {
            return Err(LatticeError::NonFinite { ix, iy });
        }
        let p = surface
            .closest_point(v)
            .map_err(|e| LatticeError::RetractionFailed { ix, iy, reason: e.to_string() })?;
        values.push(p.position());
    }
    Ok(Field::from_raw(*u.spec(), values, u.far_value()))
}

/// One RK4 step of size `dt`, then retraction if configured.
pub fn step_with(state: &State, dt: f64, config: &SolverConfig) -> Result<State> {
    let raw = rk4_increment(&state.u, dt, config)?;
    let u = match config.projection {
        Projection::NearestPoint => retract(&raw, &config.surface)?,
        Projection::None => {
            raw.check_finite()?;
            raw
        }
    };
    Ok(State { t: state.t + dt, u })
}

/// One step at the configured nominal step size.
pub fn step(state: &State, config: &SolverConfig) -> Result<State> {
    config.validate()?;
    step_with(state, config.dt(state.u.spec().h()), config)
}

/// One row of an [`EnergyTrace`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergySample {
    pub t: f64,
    pub energy: f64,
    /// `‖∂ₜu‖²_{L²_h}` with `∂ₜu` the analytic right-hand side.
    pub dissipation: f64,
    pub max_offmanifold: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergyTrace {
    pub samples: Vec<EnergySample>,
}

impl EnergyTrace {
    pub fn energies(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.energy).collect()
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,energy,dissipation,max_offmanifold")?;
        for s in &self.samples {
            writeln!(w, "{},{},{},{}", s.t, s.energy, s.dissipation, s.max_offmanifold)?;
        }
        Ok(())
    }

    /// Largest single-step energy increase `max(E_{n+1} − E_n, 0)`.
    pub fn max_increase(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].energy - w[0].energy).max(0.0))
            .fold(0.0, f64::max)
    }
}

pub fn energy_sample(state: &State, config: &SolverConfig) -> EnergySample {
    let rhs = rhs_for(&state.u, config);
    let norm_sq = state.u.spec().cell_area()
        * pairwise_sum(&rhs.values().iter().map(|v| v.norm_squared()).collect::<Vec<_>>());
    EnergySample {
        t: state.t,
        energy: discrete_energy(&state.u),
        dissipation: norm_sq,
        max_offmanifold: max_offmanifold(&state.u, &config.surface),
    }
}

/// Integrates to `t_end`, recording energy samples every `record_every` steps
/// (plus the final state), and handing every accepted state to `observe`.
pub fn evolve_observed(
    initial: VectorField,
    config: &SolverConfig,
    mut observe: impl FnMut(&State) -> Result<()>,
) -> Result<(State, EnergyTrace)> {
    config.validate()?;
    let mut state = State::new(initial, &config.surface)?;
    let (n, dt) = config.mesh(state.u.spec().h());
    let mut trace = EnergyTrace::default();
    trace.samples.push(energy_sample(&state, config));
    observe(&state)?;
    for i in 1..=n {
        state = step_with(&state, dt, config)?;
        if i == n {
            state.t = config.t_end;
        }
        if i % config.record_every == 0 || i == n {
            trace.samples.push(energy_sample(&state, config));
        }
        observe(&state)?;
    }
    Ok((state, trace))
}

pub fn evolve(initial: VectorField, config: &SolverConfig) -> Result<(State, EnergyTrace)> {
    evolve_observed(initial, config, |_| Ok(()))
}

/// States stored at a fixed step cadence.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<State>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    /// Largest gap between consecutive stored times.
    pub fn cadence(&self) -> f64 {
        self.states.windows(2).map(|w| w[1].t - w[0].t).fold(0.0, f64::max)
    }
}

/// Like [`evolve`], additionally storing every `store_every`-th state.
pub fn evolve_trajectory(
    initial: VectorField,
    config: &SolverConfig,
    store_every: usize,
) -> Result<(Trajectory, EnergyTrace)> {
    if store_every == 0 {
        return Err(invalid("store_every", "must be ≥ 1"));
    }
    let mut states = Vec::new();
    let mut count = 0usize;
    let (n, _) = config.mesh(initial.spec().h());
    let (_, trace) = evolve_observed(initial, config, |s| {
        if count % store_every == 0 || count == n {
            states.push(s.clone());
        }
        count += 1;
        Ok(())
    })?;
    Ok((Trajectory { states }, trace))
}

/// `dEʰ/dt` along the flow by the chain rule, `−(Δʰu, ∂ₜu)_{L²_h}`. Exact
/// on periodic grids.
pub fn energy_rate(u: &VectorField, rhs: &VectorField) -> Result<f64> {
    let lap = laplacian(u);
    Ok(-crate::grid::inner_l2h(&lap, rhs)?)
}

/// Fourth-order centered difference of uniformly sampled values; returns
/// `(index, derivative)` for the interior samples.
pub fn centered_rate(values: &[f64], dt: f64) -> Vec<(usize, f64)> {
    (2..values.len().saturating_sub(2))
        .map(|i| {
            let d = (values[i - 2] - 8.0 * values[i - 1] + 8.0 * values[i + 1] - values[i + 2])
                / (12.0 * dt);
            (i, d)
        })
        .collect()
}

/// Largest observed `|D₊λ| / (|D¹u|³ + |D¹u||D²u|)` over nodes where the
/// denominator is non-negligible; the fitted constant of the `D¹λ` bound.
pub fn lambda_gradient_ratio<S: Hypersurface + ?Sized>(u: &VectorField, surface: &S) -> Result<f64> {
    let lambda = lagrange_multiplier(u, surface)?;
    let spec = *u.spec();
    let mut d1 = vec![0.0; spec.len()];
    let mut d2 = vec![0.0; spec.len()];
    let mut dl = vec![0.0; spec.len()];
    for axis in Axis::BOTH {
        for kind in [DiffKind::Forward, DiffKind::Backward] {
            let du = diff(u, axis, kind);
            for (a, v) in d1.iter_mut().zip(du.values()) {
                *a = f64::max(*a, v.norm());
            }
        }
        let dlam = diff(&lambda, axis, DiffKind::Forward);
        for (a, v) in dl.iter_mut().zip(dlam.values()) {
            *a = f64::max(*a, v.abs());
        }
        for axis2 in Axis::BOTH {
            let dd = diff(&diff(u, axis, DiffKind::Forward), axis2, DiffKind::Backward);
            for (a, v) in d2.iter_mut().zip(dd.values()) {
                *a = f64::max(*a, v.norm());
            }
        }
    }
    let scale: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| a * a * a + a * b).collect();
    let cutoff = 1e-3 * scale.iter().copied().fold(0.0, f64::max);
    Ok(dl
        .iter()
        .zip(&scale)
        .filter(|(_, s)| **s > cutoff && **s > 0.0)
        .map(|(l, s)| l / s)
        .fold(0.0, f64::max))
}
