//! Tangent frames along a mapped lattice, complex coordinates of difference
//! derivatives, and the residual of the linearized flow for those coordinates.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;

use crate::dynamics::{evolve_trajectory, DtPolicy, SolverConfig, State};
use crate::error::{invalid, LatticeError, Result};
use crate::grid::{
    diff, laplacian, lp_norm, Axis, ComplexField, DiffKind, Field, GridSpec, ScalarField, Vec3,
    VectorField,
};
use crate::kernels::fit_line;
use crate::sample;
use crate::target::{Hypersurface, Surface, Torus};

/// Orthonormal tangent pair `(e¹, e² = ν ∧ e¹)` at every node.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameField {
    spec: GridSpec,
    e1: Vec<Vec3>,
    e2: Vec<Vec3>,
}

impl FrameField {
    /// Frame from the target's global frame, `e(u_j)`.
    pub fn global<S: Hypersurface + ?Sized>(u: &VectorField, surface: &S) -> Result<Self> {
        let mut e1 = Vec::with_capacity(u.spec().len());
        let mut e2 = Vec::with_capacity(u.spec().len());
        for v in u.values() {
            let (a, b) = surface.global_frame(v)?;
            e1.push(a);
            e2.push(b);
        }
        Ok(Self { spec: *u.spec(), e1, e2 })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn e1(&self) -> &[Vec3] {
        &self.e1
    }

    pub fn e2(&self) -> &[Vec3] {
        &self.e2
    }

    /// `(e¹, e²)` at node `(ix, iy)`.
    pub fn at(&self, ix: usize, iy: usize) -> (Vec3, Vec3) {
        let k = self.spec.index(ix, iy);
        (self.e1[k], self.e2[k])
    }

    /// Complex coordinate `v·e¹ + i v·e²` of `v` at node `k`.
    pub fn coordinate(&self, k: usize, v: &Vec3) -> Complex64 {
        Complex64::new(v.dot(&self.e1[k]), v.dot(&self.e2[k]))
    }

    /// Tangent vector `Re(q)e¹ + Im(q)e²` at node `k`.
    pub fn vector(&self, k: usize, q: Complex64) -> Vec3 {
        self.e1[k] * q.re + self.e2[k] * q.im
    }

    /// Largest violation of unit length, tangency and `e² = ν ∧ e¹` over all
    /// nodes.
    pub fn invariant_defect<S: Hypersurface + ?Sized>(&self, u: &VectorField, surface: &S) -> Result<f64> {
        self.spec.ensure_same(u.spec())?;
        let mut worst = 0.0_f64;
        for (k, v) in u.values().iter().enumerate() {
            let nu = surface.normal(v)?;
            let (a, b) = (self.e1[k], self.e2[k]);
            worst = worst
                .max((a.norm() - 1.0).abs())
                .max((b.norm() - 1.0).abs())
                .max(a.dot(&nu).abs())
                .max(b.dot(&nu).abs())
                .max(a.dot(&b).abs())
                .max((nu.cross(&a) - b).norm());
        }
        Ok(worst)
    }

    /// Node-wise angle of `other`'s `e¹` measured in this frame.
    pub fn rotation_to(&self, other: &FrameField) -> Result<ScalarField> {
        self.spec.ensure_same(&other.spec)?;
        let values = (0..self.spec.len())
            .map(|k| other.e1[k].dot(&self.e2[k]).atan2(other.e1[k].dot(&self.e1[k])))
            .collect();
        ScalarField::new(self.spec, values)
    }
}

/// One discrete transport step: tangent projection at `to`, renormalized.
fn transport_step<S: Hypersurface + ?Sized>(
    surface: &S,
    e: &Vec3,
    to: &Vec3,
    node: (usize, usize),
) -> Result<(Vec3, Vec3)> {
    let nu = surface.normal(to)?;
    let p = e - nu * e.dot(&nu);
    let length = p.norm();
    if !(length >= 0.5) {
        return Err(LatticeError::DegenerateTransport { ix: node.0, iy: node.1, length });
    }
    let e1 = p / length;
    // one more projection removes the rounding left by the normalization
    let e1 = (e1 - nu * e1.dot(&nu)).normalize();
    Ok((e1, nu.cross(&e1)))
}

/// Transports `seed` from node `(0, 0)` along row 0, then up every column,
/// projecting and renormalizing across each edge.
pub fn transport_frame<S: Hypersurface + ?Sized>(u: &VectorField, surface: &S, seed: Vec3) -> Result<FrameField> {
    let spec = *u.spec();
    let origin = u.get(0, 0);
    let nu = surface.normal(&origin)?;
    if (seed.norm() - 1.0).abs() > 1e-8 || seed.dot(&nu).abs() > 1e-8 {
        return Err(invalid("seed", "must be a unit tangent vector at node (0, 0)"));
    }
    let (nx, ny) = (spec.nx(), spec.ny());
    let mut e1 = vec![Vec3::zeros(); spec.len()];
    let mut e2 = vec![Vec3::zeros(); spec.len()];
    let (a, b) = transport_step(surface, &seed, &origin, (0, 0))?;
    e1[0] = a;
    e2[0] = b;
    for ix in 1..nx {
        let (a, b) = transport_step(surface, &e1[ix - 1], &u.get(ix, 0), (ix, 0))?;
        e1[ix] = a;
        e2[ix] = b;
    }
    for ix in 0..nx {
        for iy in 1..ny {
            let prev = e1[spec.index(ix, iy - 1)];
            let (a, b) = transport_step(surface, &prev, &u.get(ix, iy), (ix, iy))?;
            let k = spec.index(ix, iy);
            e1[k] = a;
            e2[k] = b;
        }
    }
    Ok(FrameField { spec, e1, e2 })
}

/// Transports `seed` around the closed polygon `points` (back to the first
/// point) and returns the signed rotation of the result about `ν`.
pub fn loop_holonomy<S: Hypersurface + ?Sized>(points: &[Vec3], surface: &S, seed: Vec3) -> Result<f64> {
    if points.len() < 3 {
        return Err(invalid("points", "a loop needs at least 3 points"));
    }
    let nu0 = surface.normal(&points[0])?;
    if (seed.norm() - 1.0).abs() > 1e-8 || seed.dot(&nu0).abs() > 1e-8 {
        return Err(invalid("seed", "must be a unit tangent vector at the first point"));
    }
    let mut e = seed;
    for (k, p) in points.iter().enumerate().skip(1).chain(std::iter::once((0, &points[0]))) {
        e = transport_step(surface, &e, p, (k, 0))?.0;
    }
    let f2 = nu0.cross(&seed);
    Ok(e.dot(&f2).atan2(e.dot(&seed)))
}

/// Holonomy of the lattice row `row` of a periodic field, closed through the
/// periodic seam.
pub fn row_holonomy<S: Hypersurface + ?Sized>(u: &VectorField, surface: &S, row: usize, seed: Vec3) -> Result<f64> {
    if row >= u.spec().ny() {
        return Err(invalid("row", format!("{row} is outside the grid")));
    }
    let points: Vec<Vec3> = (0..u.spec().nx()).map(|ix| u.get(ix, row)).collect();
    loop_holonomy(&points, surface, seed)
}

/// Measured and exact holonomy of the latitude circle at polar angle
/// `colatitude`, sampled by `n` lattice points on row 0 of a unit-sphere map.
/// The exact value is the cap's solid angle `2π(1 − cos θ)`.
pub fn cap_holonomy(n: usize, colatitude: f64) -> Result<(f64, f64)> {
    if !(colatitude > 0.0 && colatitude < std::f64::consts::PI) {
        return Err(invalid("colatitude", "must lie in (0, π)"));
    }
    let spec = GridSpec::periodic(n, 1.0 / n as f64)?;
    let (s, c) = colatitude.sin_cos();
    let u = VectorField::from_fn(spec, |ix, iy| {
        let phi = TAU * ix as f64 / n as f64;
        let lift = iy as f64 / n as f64;
        // rows above 0 sweep toward the pole so the field stays smooth
        let theta = colatitude * (1.0 - lift);
        let (st, ct) = theta.sin_cos();
        Vec3::new(st * phi.cos(), st * phi.sin(), ct)
    });
    let sphere = crate::target::UnitSphere;
    let seed = Vec3::new(c, 0.0, -s);
    let measured = row_holonomy(&u, &sphere, 0, seed)?;
    Ok((measured, TAU * (1.0 - c)))
}

/// Complex tangent coordinates `q^{±k}` and normal parts `a^{±k}` of the
/// one-sided differences of `u`, with `k = 0` the x axis and `k = 1` the y axis.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexDerivativeField {
    pub q_plus: [ComplexField; 2],
    pub q_minus: [ComplexField; 2],
    pub a_plus: [ScalarField; 2],
    pub a_minus: [ScalarField; 2],
}

impl ComplexDerivativeField {
    pub fn spec(&self) -> &GridSpec {
        self.q_plus[0].spec()
    }

    /// The coordinate field for one axis and direction.
    pub fn q(&self, axis: Axis, kind: DiffKind) -> Result<&ComplexField> {
        let k = axis_index(axis);
        match kind {
            DiffKind::Forward => Ok(&self.q_plus[k]),
            DiffKind::Backward => Ok(&self.q_minus[k]),
            DiffKind::Centered => Err(LatticeError::Unsupported("centered q coordinates".into())),
        }
    }
}

fn axis_index(axis: Axis) -> usize {
    match axis {
        Axis::X => 0,
        Axis::Y => 1,
    }
}

/// Splits `D_{±k}u_j` into `q e_j + a ν_j`.
pub fn decompose<S: Hypersurface + ?Sized>(
    u: &VectorField,
    frames: &FrameField,
    surface: &S,
) -> Result<ComplexDerivativeField> {
    frames.spec.ensure_same(u.spec())?;
    let spec = *u.spec();
    let normals: Vec<Vec3> = u.values().iter().map(|v| surface.normal(v)).collect::<Result<_>>()?;
    let split = |d: &VectorField| -> Result<(ComplexField, ScalarField)> {
        let q = (0..spec.len()).map(|k| frames.coordinate(k, &d.values()[k])).collect();
        let a = (0..spec.len()).map(|k| d.values()[k].dot(&normals[k])).collect();
        Ok((ComplexField::new(spec, q)?, ScalarField::new(spec, a)?))
    };
    let (qx, ax) = split(&diff(u, Axis::X, DiffKind::Forward))?;
    let (qy, ay) = split(&diff(u, Axis::Y, DiffKind::Forward))?;
    let (mx, bx) = split(&diff(u, Axis::X, DiffKind::Backward))?;
    let (my, by) = split(&diff(u, Axis::Y, DiffKind::Backward))?;
    Ok(ComplexDerivativeField {
        q_plus: [qx, qy],
        q_minus: [mx, my],
        a_plus: [ax, ay],
        a_minus: [bx, by],
    })
}

/// `R_j = ∂ₜq_j − (1 + i)Δʰq_j` at one time, with the reference scale
/// `max_l |q_l|³ + max_l |q_l||D¹q_l|` over `j` and its nearest neighbors,
/// where `|q_l|` and `|D¹q_l|` are maxima over all four `q^{±k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearizationResidual {
    pub t: f64,
    pub dt: f64,
    pub q: ComplexField,
    pub residual: ComplexField,
    pub reference: ScalarField,
    /// Estimated error of the centered time difference in `L²_h`.
    pub temporal_error: f64,
    /// Largest `|R_j| / reference_j` over nodes whose reference exceeds
    /// `RATIO_FLOOR` times its maximum.
    pub ratio_max: f64,
}

impl LinearizationResidual {
    pub const RATIO_FLOOR: f64 = 1e-3;
    /// Largest admissible `temporal_error / ‖R‖_{L²_h}`.
    pub const TEMPORAL_SHARE: f64 = 0.1;

    pub fn q_max(&self) -> f64 {
        self.q.max_norm()
    }

    pub fn residual_l2(&self) -> f64 {
        lp_norm(&self.residual, 2.0).unwrap_or(f64::NAN)
    }

    pub fn row(&self) -> ResidualRow {
        ResidualRow {
            h: self.q.spec().h(),
            dt: self.dt,
            q_max: self.q_max(),
            residual_l2: self.residual_l2(),
            ratio_max: self.ratio_max,
        }
    }
}

/// Node-wise `max(|D_{±k}q|)` over both axes and directions.
fn first_difference_size(q: &ComplexField) -> ScalarField {
    let parts: Vec<ComplexField> = Axis::BOTH
        .iter()
        .flat_map(|&a| [diff(q, a, DiffKind::Forward), diff(q, a, DiffKind::Backward)])
        .collect();
    ScalarField::from_fn(*q.spec(), |ix, iy| parts.iter().map(|p| p.get(ix, iy).norm()).fold(0.0, f64::max))
}

fn neighborhood_max(f: &ScalarField) -> ScalarField {
    let spec = *f.spec();
    let values = (0..spec.len())
        .map(|k| {
            [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .map(|&(dx, dy)| f.neighbor(k, dx, dy))
                .fold(0.0, f64::max)
        })
        .collect();
    Field::new(spec, values).expect("same lattice")
}

/// Residual of the linearized equation for `q = q^{±k}` at the middle of five
/// or more equally spaced states, each paired with its frame. The centered
/// difference over `±dt` is checked against the one over `±2dt`; if the
/// implied truncation error is not small against `R`, the mesh is rejected.
pub fn linearization_residual<S: Hypersurface + ?Sized>(
    states: &[State],
    frames: &[FrameField],
    surface: &S,
    axis: Axis,
    kind: DiffKind,
) -> Result<LinearizationResidual> {
    if states.len() < 5 || frames.len() != states.len() {
        return Err(LatticeError::InsufficientSampling(format!(
            "need at least 5 states with one frame each, got {} states and {} frames",
            states.len(),
            frames.len()
        )));
    }
    let dt = states[1].t - states[0].t;
    if !(dt > 0.0) || states.windows(2).any(|w| ((w[1].t - w[0].t) - dt).abs() > 1e-9 * dt) {
        return Err(invalid("states", "time stamps must be strictly increasing and equally spaced"));
    }
    let m = states.len() / 2;
    let parts = (m - 2..=m + 2)
        .map(|i| decompose(&states[i].u, &frames[i], surface))
        .collect::<Result<Vec<_>>>()?;
    let qs = parts.iter().map(|d| d.q(axis, kind).cloned()).collect::<Result<Vec<_>>>()?;
    let q = qs[2].clone();
    let fine = qs[3].sub(&qs[1])?.scale(0.5 / dt);
    let coarse = qs[4].sub(&qs[0])?.scale(0.25 / dt);
    let linear = laplacian(&q).map(|z| z * Complex64::new(1.0, 1.0));
    let residual = fine.sub(&linear)?;
    // both differences have error ∝ dt², coarse four times the fine one
    let temporal_error = lp_norm(&coarse.sub(&fine)?, 2.0)? / 3.0;
    let residual_l2 = lp_norm(&residual, 2.0)?;
    if temporal_error > LinearizationResidual::TEMPORAL_SHARE * residual_l2 {
        return Err(LatticeError::MeshTooCoarse(format!(
            "centered-difference error {temporal_error:e} is not small against ‖R‖ = {residual_l2:e} at dt = {dt:e}"
        )));
    }
    // the nonlinearity couples every difference direction, so the scale uses
    // all four coordinates
    let all = &parts[2];
    let coords = [&all.q_plus[0], &all.q_plus[1], &all.q_minus[0], &all.q_minus[1]];
    let size = ScalarField::from_fn(*q.spec(), |ix, iy| {
        coords.iter().map(|c| c.get(ix, iy).norm()).fold(0.0, f64::max)
    });
    let steps: Vec<ScalarField> = coords.iter().map(|c| first_difference_size(c)).collect();
    let dq = ScalarField::from_fn(*q.spec(), |ix, iy| steps.iter().map(|d| d.get(ix, iy)).fold(0.0, f64::max));
    let cubic = neighborhood_max(&size.map(|s| s * s * s));
    let mixed = neighborhood_max(&size.zip_map(&dq, |s, d| s * d)?);
    let reference = cubic.add(&mixed)?;
    let floor = LinearizationResidual::RATIO_FLOOR * reference.max_norm();
    let ratio_max = residual
        .values()
        .iter()
        .zip(reference.values())
        .filter(|(_, &r)| r > floor && r > 0.0)
        .map(|(z, r)| z.norm() / r)
        .fold(0.0, f64::max);
    Ok(LinearizationResidual {
        t: states[m].t,
        dt,
        q,
        residual,
        reference,
        temporal_error,
        ratio_max,
    })
}

/// One line of the residual census.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualRow {
    pub h: f64,
    pub dt: f64,
    pub q_max: f64,
    pub residual_l2: f64,
    pub ratio_max: f64,
}

pub fn write_residual_csv(rows: &[ResidualRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "h,dt,q_max,residual_l2,ratio_max")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.h, r.dt, r.q_max, r.residual_l2, r.ratio_max)?;
    }
    Ok(())
}

/// Smooth torus map on the periodic unit square: fixed base angles plus
/// `amplitude` times seeded smooth perturbations of both angles.
pub fn torus_data(torus: &Torus, n: usize, amplitude: f64, seed: u64) -> Result<VectorField> {
    let spec = GridSpec::periodic(n, 1.0 / n as f64)?;
    let mut rng = sample::rng(seed);
    let f = sample::FourierSeries::random(&spec, 2, &mut rng);
    let g = sample::FourierSeries::random(&spec, 2, &mut rng);
    Ok(VectorField::sample(spec, |x, y| {
        torus.embed(0.3 + amplitude * f.eval(x, y), 0.7 + amplitude * g.eval(x, y))
    }))
}

/// Runs the α = 1 flow on the torus from [`torus_data`] with `dt = h²/16`
/// for four steps and evaluates the residual for `q^{+1}` in the global frame.
pub fn torus_residual(torus: &Torus, n: usize, amplitude: f64, seed: u64) -> Result<LinearizationResidual> {
    let u = torus_data(torus, n, amplitude, seed)?;
    let h = u.spec().h();
    let dt = h * h / 16.0;
    let mut config = SolverConfig::new(Surface::Torus(*torus), 1.0, 4.0 * dt);
    config.dt_policy = DtPolicy::Fixed(dt);
    let (trajectory, _) = evolve_trajectory(u, &config, 1)?;
    let frames = trajectory
        .states
        .iter()
        .map(|s| FrameField::global(&s.u, torus))
        .collect::<Result<Vec<_>>>()?;
    linearization_residual(&trajectory.states, &frames, torus, Axis::X, DiffKind::Forward)
}

/// Fitted exponent of `‖R‖_{L²_h}` against `‖q‖_{L^∞}` over the given
/// amplitudes, with the rows used.
pub fn amplitude_exponent(torus: &Torus, n: usize, amplitudes: &[f64], seed: u64) -> Result<(f64, Vec<ResidualRow>)> {
    if amplitudes.len() < 2 {
        return Err(LatticeError::InsufficientSampling("need at least two amplitudes".into()));
    }
    let rows = amplitudes
        .iter()
        .map(|&s| torus_residual(torus, n, s, seed).map(|r| r.row()))
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = rows.iter().map(|r| r.q_max.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.residual_l2.ln()).collect();
    Ok((fit_line(&x, &y).0, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::target::UnitSphere;

    #[test]
    fn constant_field_keeps_the_seed() {
        let spec = GridSpec::periodic(8, 0.1).unwrap();
        let u = VectorField::constant(spec, Vec3::z());
        let f = transport_frame(&u, &UnitSphere, Vec3::x()).unwrap();
        assert!(f.e1().iter().all(|e| *e == Vec3::x()));
        assert!(f.e2().iter().all(|e| *e == Vec3::y()));
        let d = decompose(&u, &f, &UnitSphere).unwrap();
        assert_eq!(d.q_plus[0].max_norm(), 0.0);
        assert_eq!(d.a_minus[1].max_norm(), 0.0);
    }

    #[test]
    fn transported_frame_satisfies_invariants() {
        let spec = GridSpec::periodic(32, 1.0 / 32.0).unwrap();
        let u = sample::smooth_map(spec, &UnitSphere, Vec3::z(), 0.4, 3, &mut sample::rng(5)).unwrap();
        let v0 = u.get(0, 0);
        let seed = (Vec3::x() - v0 * v0.x).normalize();
        let f = transport_frame(&u, &UnitSphere, seed).unwrap();
        assert!(f.invariant_defect(&u, &UnitSphere).unwrap() < 1e-12);
    }

    #[test]
    fn bad_seed_and_antipodal_neighbors_are_rejected() {
        let spec = GridSpec::periodic(4, 0.1).unwrap();
        let u = VectorField::from_fn(spec, |ix, _| if ix == 2 { -Vec3::z() } else { Vec3::z() });
        assert!(transport_frame(&u, &UnitSphere, Vec3::z()).is_err());
        // a seed rotated onto the normal at the next node degenerates
        let tilt = VectorField::from_fn(spec, |ix, _| if ix == 1 { Vec3::x() } else { Vec3::z() });
        let err = transport_frame(&tilt, &UnitSphere, Vec3::x()).unwrap_err();
        assert!(matches!(err, LatticeError::DegenerateTransport { ix: 1, iy: 0, .. }));
    }

    #[test]
    fn cap_holonomy_matches_solid_angle() {
        let (measured, exact) = cap_holonomy(64, (0.75_f64).acos()).unwrap();
        assert!((exact - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(((measured - exact) / exact).abs() < 0.01, "{measured} vs {exact}");
    }

    #[test]
    fn torus_frames_differ_by_smooth_rotation() {
        let torus = Torus::new(2.0, 0.7).unwrap();
        let u = torus_data(&torus, 32, 0.3, 1).unwrap();
        let global = FrameField::global(&u, &torus).unwrap();
        let (e1, _) = torus.global_frame(&u.get(0, 0)).unwrap();
        let moved = transport_frame(&u, &torus, e1).unwrap();
        assert!(global.invariant_defect(&u, &torus).unwrap() < 1e-12);
        assert!(moved.invariant_defect(&u, &torus).unwrap() < 1e-12);
        let angle = global.rotation_to(&moved).unwrap();
        assert!(angle.get(0, 0).abs() < 1e-14);
        // neighboring angles differ by O(h)
        let jump = (0..angle.spec().len())
            .map(|k| {
                let d = angle.neighbor(k, 0, 1) - angle.values()[k];
                d.sin().abs()
            })
            .fold(0.0, f64::max);
        assert!(jump < 0.2, "{jump}");
    }

    #[test]
    fn decomposition_matches_tangent_parts_and_complex_structure() {
        let spec = GridSpec::periodic(16, 1.0 / 16.0).unwrap();
        let u = sample::smooth_map(spec, &UnitSphere, Vec3::z(), 0.5, 2, &mut sample::rng(6)).unwrap();
        let v0 = u.get(0, 0);
        let f = transport_frame(&u, &UnitSphere, (Vec3::y() - v0 * v0.y).normalize()).unwrap();
        let d = decompose(&u, &f, &UnitSphere).unwrap();
        let dx = diff(&u, Axis::X, DiffKind::Forward);
        for k in 0..spec.len() {
            let nu = u.values()[k];
            let w = dx.values()[k];
            let tangent = w - nu * w.dot(&nu);
            let q = d.q_plus[0].values()[k];
            assert!((q.norm() - tangent.norm()).abs() < 1e-12);
            assert!((d.a_plus[0].values()[k] - w.dot(&nu)).abs() < 1e-15);
            let turned = f.coordinate(k, &nu.cross(&tangent));
            assert!((turned - Complex64::i() * q).norm() < 1e-12);
            // observation (4): the tangent part controls the whole difference
            assert!(w.norm_squared() <= 2.0 * q.norm_sqr() + 1e-12);
        }
    }

    #[test]
    fn normal_parts_are_quadratically_small() {
        let spec = GridSpec::periodic(32, 1.0 / 32.0).unwrap();
        let u = sample::noisy_sphere_map(spec, 0.5, 0.1, &mut sample::rng(2)).unwrap();
        let f = transport_frame(&u, &UnitSphere, {
            let v = u.get(0, 0);
            (Vec3::x() - v * v.x).normalize()
        })
        .unwrap();
        let d = decompose(&u, &f, &UnitSphere).unwrap();
        let h = spec.h();
        let c_n = UnitSphere.graph_constant();
        for (axis, k) in [(Axis::X, 0), (Axis::Y, 1)] {
            let du = diff(&u, axis, DiffKind::Forward);
            for (a, w) in d.a_plus[k].values().iter().zip(du.values()) {
                assert!(a.abs() <= c_n * h * w.norm_squared() * (1.0 + 1e-9) + 1e-15);
            }
        }
    }

    #[test]
    fn constant_trajectory_has_zero_residual() {
        let torus = Torus::new(2.0, 0.7).unwrap();
        let spec = GridSpec::periodic(8, 0.125).unwrap();
        let u = VectorField::constant(spec, torus.embed(0.1, 0.2));
        let states: Vec<State> = (0..5).map(|i| State { t: i as f64 * 0.01, u: u.clone() }).collect();
        let frames: Vec<FrameField> = states.iter().map(|s| FrameField::global(&s.u, &torus).unwrap()).collect();
        let r = linearization_residual(&states, &frames, &torus, Axis::X, DiffKind::Forward).unwrap();
        assert_eq!(r.residual_l2(), 0.0);
        assert_eq!(r.ratio_max, 0.0);
        assert!(linearization_residual(&states[..4], &frames[..4], &torus, Axis::X, DiffKind::Forward).is_err());
    }

    #[test]
    fn coarse_time_mesh_is_rejected() {
        let torus = Torus::new(2.0, 0.7).unwrap();
        let spec = GridSpec::periodic(16, 1.0 / 16.0).unwrap();
        // fast oscillation in time: the centered difference cannot resolve it
        let (omega, dt) = (300.0, 0.005);
        let states: Vec<State> = (0..5)
            .map(|i| {
                let t = i as f64 * dt;
                let u = VectorField::sample(spec, |x, _| {
                    torus.embed(0.3 + 0.1 * (TAU * x).sin() * (omega * t).cos(), 0.7)
                });
                State { t, u }
            })
            .collect();
        let frames: Vec<FrameField> = states.iter().map(|s| FrameField::global(&s.u, &torus).unwrap()).collect();
        let r = linearization_residual(&states, &frames, &torus, Axis::X, DiffKind::Forward);
        assert!(matches!(r, Err(LatticeError::MeshTooCoarse(_))), "{r:?}");
    }

    #[test]
    fn residual_grows_quadratically_with_amplitude() {
        let torus = Torus::new(2.0, 0.7).unwrap();
        let (slope, rows) = amplitude_exponent(&torus, 32, &[0.2, 0.1, 0.05], 7).unwrap();
        assert!(slope >= 1.9, "{slope} {rows:?}");
    }
}
