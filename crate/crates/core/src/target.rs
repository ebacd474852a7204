//! Compact hypersurface targets `N ⊂ R³`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, LatticeError, Result};
use crate::grid::Vec3;

/// Default on-manifold tolerance `tol_N`.
pub const TOL_N: f64 = 1e-10;
const MAX_ITER: usize = 50;

/// A point known to lie on a target within [`TOL_N`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint(Vec3);

impl SurfacePoint {
    pub fn position(&self) -> Vec3 {
        self.0
    }
}

/// Target-manifold interface used by the dynamics, frames and analysis code.
pub trait Hypersurface: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    /// Unsigned distance from `x` to the surface.
    fn distance(&self, x: &Vec3) -> f64;

    /// Unit normal field extended off the surface (normalized gradient of
    /// the defining function). Agrees with the outward normal on `N`.
    fn extended_normal(&self, x: &Vec3) -> Vec3;

    /// Nearest point on `N` to `x`.
    fn closest_point(&self, x: &Vec3) -> Result<SurfacePoint>;

    /// `c_ν ≥ sup |∇ν|`.
    fn curvature_bound(&self) -> f64;

    /// `c_e ≥ sup |∇e|` for the global frame, when one exists.
    fn frame_bound(&self) -> Option<f64>;

    /// Radius `δ_N` of the balls on which the quadratic graph bound holds.
    fn delta_n(&self) -> f64;

    /// `C_N` in `|(u′ − u)·ν(u)| ≤ C_N |u′ − u|²` for `|u′ − u| < δ_N`.
    fn graph_constant(&self) -> f64;

    /// Global orthonormal tangent frame `(e1, ν ∧ e1)`.
    fn global_frame(&self, u: &Vec3) -> Result<(Vec3, Vec3)>;

    /// Deterministic on-surface sample for censuses and fits.
    fn sample_point(&self, rng: &mut ChaCha8Rng) -> Vec3;

    fn has_global_frame(&self) -> bool {
        self.frame_bound().is_some()
    }

    /// Checks that `u` is within `10·tol_N` of the surface.
    fn check_on(&self, u: &Vec3) -> Result<()> {
        let d = self.distance(u);
        if d <= 10.0 * TOL_N {
            Ok(())
        } else {
            Err(LatticeError::OffManifold {
                point: [u.x, u.y, u.z],
                distance: d,
            })
        }
    }

    /// Outward unit normal at an on-surface point.
    fn normal(&self, u: &Vec3) -> Result<Vec3> {
        self.check_on(u)?;
        Ok(self.extended_normal(u))
    }

    /// `v − (v·ν)ν`.
    fn tangent_project(&self, u: &Vec3, v: &Vec3) -> Result<Vec3> {
        let nu = self.normal(u)?;
        Ok(project_out(v, &nu))
    }

    /// Wraps an on-surface position.
    fn point(&self, u: Vec3) -> Result<SurfacePoint> {
        self.check_on(&u)?;
        Ok(SurfacePoint(u))
    }
}

#[inline]
pub(crate) fn project_out(v: &Vec3, nu: &Vec3) -> Vec3 {
    v - nu * v.dot(nu)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitSphere;

impl Hypersurface for UnitSphere {
    fn name(&self) -> String {
        "sphere".into()
    }

    fn distance(&self, x: &Vec3) -> f64 {
        (x.norm() - 1.0).abs()
    }

    fn extended_normal(&self, x: &Vec3) -> Vec3 {
        x / x.norm()
    }

    fn closest_point(&self, x: &Vec3) -> Result<SurfacePoint> {
        let n = x.norm();
        if !(n.is_finite() && n > 1e-8) {
            return Err(LatticeError::OutsideTube { point: [x.x, x.y, x.z] });
        }
        Ok(SurfacePoint(x / n))
    }

    fn curvature_bound(&self) -> f64 {
        1.0
    }

    fn frame_bound(&self) -> Option<f64> {
        None
    }

    fn delta_n(&self) -> f64 {
        1.0
    }

    fn graph_constant(&self) -> f64 {
        0.5
    }

    fn global_frame(&self, _u: &Vec3) -> Result<(Vec3, Vec3)> {
        Err(LatticeError::NoGlobalFrame(self.name()))
    }

    fn sample_point(&self, rng: &mut ChaCha8Rng) -> Vec3 {
        random_unit(rng)
    }
}

/// `x²/a² + y²/b² + z²/c² = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipsoid {
    axes: [f64; 3],
    delta_n: f64,
    c_n: f64,
}

impl Ellipsoid {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b), ("c", c)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("semi-axis must be positive, got {v}")));
            }
        }
        let mut e = Self {
            axes: [a, b, c],
            delta_n: 0.0,
            c_n: 0.0,
        };
        e.delta_n = 0.5 * e.min_radius();
        e.c_n = fit_graph_constant(&e, e.delta_n);
        Ok(e)
    }

    pub fn axes(&self) -> [f64; 3] {
        self.axes
    }

    fn a_min(&self) -> f64 {
        self.axes.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn a_max(&self) -> f64 {
        self.axes.iter().copied().fold(0.0, f64::max)
    }

    /// Smallest principal radius of curvature, `a_min²/a_max`.
    fn min_radius(&self) -> f64 {
        self.a_min() * self.a_min() / self.a_max()
    }

    fn gradient(&self, x: &Vec3) -> Vec3 {
        let [a, b, c] = self.axes;
        Vec3::new(x.x / (a * a), x.y / (b * b), x.z / (c * c))
    }

    fn algebraic_distance(&self, x: &Vec3) -> f64 {
        let [a, b, c] = self.axes;
        let f = (x.x / a).powi(2) + (x.y / b).powi(2) + (x.z / c).powi(2) - 1.0;
        0.5 * f.abs() / self.gradient(x).norm().max(1e-300)
    }

    /// Solves `g(t) = Σ (xᵢaᵢ/(aᵢ² + t))² − 1 = 0` for the Lagrange
    /// multiplier `t` by Newton's method, seeded at `t = 0` and safeguarded
    /// by a bisection bracket.
    fn solve_multiplier(&self, x: &Vec3) -> Result<f64> {
        let a2 = self.axes.map(|a| a * a);
        let g = |t: f64| {
            let mut s = -1.0;
            let mut ds = 0.0;
            for i in 0..3 {
                let q = x[i] * self.axes[i] / (a2[i] + t);
                s += q * q;
                ds += -2.0 * q * q / (a2[i] + t);
            }
            (s, ds)
        };
        let pole = -a2.iter().copied().fold(f64::INFINITY, f64::min);
        let (mut lo, mut hi) = if g(0.0).0 >= 0.0 {
            let mut hi = 1.0_f64.max(x.norm() * self.a_max());
            while g(hi).0 > 0.0 {
                hi *= 2.0;
            }
            (0.0, hi)
        } else {
            (pole, 0.0)
        };
        let mut t = 0.0;
        for _ in 0..MAX_ITER {
            let (val, der) = g(t);
            if val.abs() < 1e-15 {
                return Ok(t);
            }
            if val > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let mut next = t - val / der;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() <= 1e-15 * (1.0 + t.abs()) {
                return Ok(next);
            }
            t = next;
        }
        Err(LatticeError::NoConvergence { iterations: MAX_ITER })
    }
}

impl Hypersurface for Ellipsoid {
    fn name(&self) -> String {
        let [a, b, c] = self.axes;
        format!("ellipsoid:{a},{b},{c}")
    }

    fn distance(&self, x: &Vec3) -> f64 {
        match self.closest_point(x) {
            Ok(p) => (x - p.0).norm(),
            Err(_) => self.algebraic_distance(x),
        }
    }

    fn extended_normal(&self, x: &Vec3) -> Vec3 {
        self.gradient(x).normalize()
    }

    fn closest_point(&self, x: &Vec3) -> Result<SurfacePoint> {
        if !(x.iter().all(|c| c.is_finite()))
            || self.algebraic_distance(x) >= 0.9 * self.min_radius()
        {
            return Err(LatticeError::OutsideTube { point: [x.x, x.y, x.z] });
        }
        let t = self.solve_multiplier(x)?;
        let p = Vec3::from_fn(|i, _| x[i] * self.axes[i] * self.axes[i] / (self.axes[i] * self.axes[i] + t));
        Ok(SurfacePoint(p))
    }

    fn curvature_bound(&self) -> f64 {
        self.a_max() / (self.a_min() * self.a_min())
    }

    fn frame_bound(&self) -> Option<f64> {
        None
    }

    fn delta_n(&self) -> f64 {
        self.delta_n
    }

    fn graph_constant(&self) -> f64 {
        self.c_n
    }

    fn global_frame(&self, _u: &Vec3) -> Result<(Vec3, Vec3)> {
        Err(LatticeError::NoGlobalFrame(self.name()))
    }

    fn sample_point(&self, rng: &mut ChaCha8Rng) -> Vec3 {
        let d = random_unit(rng);
        let [a, b, c] = self.axes;
        Vec3::new(a * d.x, b * d.y, c * d.z)
    }
}

/// Torus of revolution about the z-axis with major radius `R` and minor `r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Torus {
    major: f64,
    minor: f64,
    delta_n: f64,
    c_n: f64,
}

impl Torus {
    pub fn new(major: f64, minor: f64) -> Result<Self> {
        if !(minor.is_finite() && minor > 0.0) {
            return Err(invalid("r", format!("minor radius must be positive, got {minor}")));
        }
        if !(major.is_finite() && major > minor) {
            return Err(invalid("R", format!("major radius must exceed r = {minor}, got {major}")));
        }
        let mut t = Self {
            major,
            minor,
            delta_n: 0.0,
            c_n: 0.0,
        };
        t.delta_n = 0.5 / t.curvature_bound();
        t.c_n = fit_graph_constant(&t, t.delta_n);
        Ok(t)
    }

    pub fn radii(&self) -> (f64, f64) {
        (self.major, self.minor)
    }

    /// Point with major angle `theta` and minor angle `phi`.
    pub fn embed(&self, theta: f64, phi: f64) -> Vec3 {
        let rho = self.major + self.minor * phi.cos();
        Vec3::new(rho * theta.cos(), rho * theta.sin(), self.minor * phi.sin())
    }

    /// `(θ, φ)` of the nearest surface point.
    pub fn angles(&self, x: &Vec3) -> (f64, f64) {
        let theta = x.y.atan2(x.x);
        let rho = x.x.hypot(x.y);
        let phi = x.z.atan2(rho - self.major);
        (theta, phi)
    }

    fn core_offset(&self, x: &Vec3) -> Option<Vec3> {
        let rho = x.x.hypot(x.y);
        if rho < 1e-12 {
            return None;
        }
        let core = Vec3::new(self.major * x.x / rho, self.major * x.y / rho, 0.0);
        Some(x - core)
    }

    fn tube_radius(&self) -> f64 {
        self.minor.min(self.major - self.minor)
    }
}

impl Hypersurface for Torus {
    fn name(&self) -> String {
        format!("torus:{},{}", self.major, self.minor)
    }

    fn distance(&self, x: &Vec3) -> f64 {
        let rho = x.x.hypot(x.y);
        ((rho - self.major).hypot(x.z) - self.minor).abs()
    }

    fn extended_normal(&self, x: &Vec3) -> Vec3 {
        match self.core_offset(x) {
            Some(d) => d.normalize(),
            None => Vec3::z(),
        }
    }

    fn closest_point(&self, x: &Vec3) -> Result<SurfacePoint> {
        let outside = || LatticeError::OutsideTube { point: [x.x, x.y, x.z] };
        if !x.iter().all(|c| c.is_finite()) || self.distance(x) >= self.tube_radius() {
            return Err(outside());
        }
        let d = self.core_offset(x).ok_or_else(outside)?;
        let len = d.norm();
        if len < 1e-12 {
            return Err(outside());
        }
        Ok(SurfacePoint(x - d + d * (self.minor / len)))
    }

    fn curvature_bound(&self) -> f64 {
        (1.0 / self.minor).max(1.0 / (self.major - self.minor))
    }

    fn frame_bound(&self) -> Option<f64> {
        Some(self.curvature_bound())
    }

    fn delta_n(&self) -> f64 {
        self.delta_n
    }

    fn graph_constant(&self) -> f64 {
        self.c_n
    }

    fn global_frame(&self, u: &Vec3) -> Result<(Vec3, Vec3)> {
        let nu = self.normal(u)?;
        let (theta, _) = self.angles(u);
        let e1 = Vec3::new(-theta.sin(), theta.cos(), 0.0);
        Ok((e1, nu.cross(&e1)))
    }

    fn sample_point(&self, rng: &mut ChaCha8Rng) -> Vec3 {
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        self.embed(theta, phi)
    }
}

pub(crate) fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Random pair `(u, u′)` on `N` with `0 < |u′ − u| < delta`.
pub fn sample_close_pair<S: Hypersurface + ?Sized>(
    surface: &S,
    delta: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec3, Vec3) {
    loop {
        let u = surface.sample_point(rng);
        let nu = surface.extended_normal(&u);
        let dir = project_out(&random_unit(rng), &nu);
        if dir.norm() < 1e-6 {
            continue;
        }
        let step = delta * rng.gen_range(0.01..1.0);
        if let Ok(p) = surface.closest_point(&(u + dir.normalize() * step)) {
            let d = (p.0 - u).norm();
            if d > 0.0 && d < delta {
                return (u, p.0);
            }
        }
    }
}

/// Largest sampled `|(u′ − u)·ν(u)| / |u′ − u|²` over close pairs, plus a 20%
/// margin.
fn fit_graph_constant<S: Hypersurface>(surface: &S, delta: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9);
    let mut worst = 0.0_f64;
    for _ in 0..20_000 {
        let (u, v) = sample_close_pair(surface, delta, &mut rng);
        let d = v - u;
        let ratio = d.dot(&surface.extended_normal(&u)).abs() / d.norm_squared();
        worst = worst.max(ratio);
    }
    1.2 * worst
}

/// Concrete target selected by a config string.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Surface {
    Sphere(UnitSphere),
    Ellipsoid(Ellipsoid),
    Torus(Torus),
}

impl Surface {
    pub fn sphere() -> Self {
        Surface::Sphere(UnitSphere)
    }

    fn inner(&self) -> &dyn Hypersurface {
        match self {
            Surface::Sphere(s) => s,
            Surface::Ellipsoid(e) => e,
            Surface::Torus(t) => t,
        }
    }
}

impl Hypersurface for Surface {
    fn name(&self) -> String {
        self.inner().name()
    }
    #[inline]
    fn distance(&self, x: &Vec3) -> f64 {
        match self {
            Surface::Sphere(s) => s.distance(x),
            Surface::Ellipsoid(e) => e.distance(x),
            Surface::Torus(t) => t.distance(x),
        }
    }
    #[inline]
    fn extended_normal(&self, x: &Vec3) -> Vec3 {
        match self {
            Surface::Sphere(s) => s.extended_normal(x),
            Surface::Ellipsoid(e) => e.extended_normal(x),
            Surface::Torus(t) => t.extended_normal(x),
        }
    }
    #[inline]
    fn closest_point(&self, x: &Vec3) -> Result<SurfacePoint> {
        match self {
            Surface::Sphere(s) => s.closest_point(x),
            Surface::Ellipsoid(e) => e.closest_point(x),
            Surface::Torus(t) => t.closest_point(x),
        }
    }
    fn curvature_bound(&self) -> f64 {
        self.inner().curvature_bound()
    }
    fn frame_bound(&self) -> Option<f64> {
        self.inner().frame_bound()
    }
    fn delta_n(&self) -> f64 {
        self.inner().delta_n()
    }
    fn graph_constant(&self) -> f64 {
        self.inner().graph_constant()
    }
    fn global_frame(&self, u: &Vec3) -> Result<(Vec3, Vec3)> {
        self.inner().global_frame(u)
    }
    fn sample_point(&self, rng: &mut ChaCha8Rng) -> Vec3 {
        self.inner().sample_point(rng)
    }
}

impl fmt::Display for Surface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Surface {
    type Err = LatticeError;

    /// `sphere`, `ellipsoid:a,b,c` or `torus:R,r`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, args) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a)),
            None => (s, None),
        };
        let numbers = |want: usize| -> Result<Vec<f64>> {
            let raw = args.ok_or_else(|| invalid("target", format!("`{kind}` needs {want} parameters")))?;
            let vals = raw
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| invalid("target", format!("`{}` is not a number", p.trim())))
                })
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != want {
                return Err(invalid("target", format!("`{kind}` needs {want} parameters, got {}", vals.len())));
            }
            Ok(vals)
        };
        match kind {
            "sphere" if args.is_none() => Ok(Surface::sphere()),
            "ellipsoid" => {
                let v = numbers(3)?;
                Ok(Surface::Ellipsoid(Ellipsoid::new(v[0], v[1], v[2])?))
            }
            "torus" => {
                let v = numbers(2)?;
                Ok(Surface::Torus(Torus::new(v[0], v[1])?))
            }
            _ => Err(invalid("target", format!("unknown target `{s}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces() -> Vec<Surface> {
        vec![
            Surface::sphere(),
            "ellipsoid:1.5,1,0.75".parse().unwrap(),
            "torus:2,0.75".parse().unwrap(),
        ]
    }

    #[test]
    fn parse_round_trip() {
        for s in surfaces() {
            assert_eq!(s.name().parse::<Surface>().unwrap(), s);
        }
        assert!("cube".parse::<Surface>().is_err());
        assert!("torus:1,2".parse::<Surface>().is_err());
        assert!("ellipsoid:1,2".parse::<Surface>().is_err());
        assert!("ellipsoid:1,-2,3".parse::<Surface>().is_err());
    }

    #[test]
    fn normals_are_unit_and_tangent_projection_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for s in surfaces() {
            for _ in 0..200 {
                let u = s.sample_point(&mut rng);
                let nu = s.normal(&u).unwrap();
                assert!((nu.norm() - 1.0).abs() < 1e-12);
                let v = random_unit(&mut rng) * 3.0;
                let p = s.tangent_project(&u, &v).unwrap();
                assert!(p.dot(&nu).abs() < 1e-14);
                let pp = s.tangent_project(&u, &p).unwrap();
                assert!((pp - p).norm() < 1e-14);
                let split = p.norm_squared() + v.dot(&nu).powi(2);
                assert!((split - v.norm_squared()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ellipsoid_normal_on_axis() {
        let e = Ellipsoid::new(2.0, 1.0, 0.5).unwrap();
        let nu = e.normal(&Vec3::new(2.0, 0.0, 0.0)).unwrap();
        assert!((nu - Vec3::x()).norm() < 1e-15);
    }

    #[test]
    fn torus_normal_matches_finite_difference_gradient() {
        let t = Torus::new(2.0, 0.75).unwrap();
        let f = |x: &Vec3| {
            let rho = x.x.hypot(x.y);
            (rho - 2.0).powi(2) + x.z * x.z - 0.75 * 0.75
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let u = t.sample_point(&mut rng);
            let eps = 1e-6;
            let g = Vec3::from_fn(|i, _| {
                let mut a = u;
                let mut b = u;
                a[i] += eps;
                b[i] -= eps;
                (f(&a) - f(&b)) / (2.0 * eps)
            });
            assert!((g.normalize() - t.normal(&u).unwrap()).norm() < 1e-8);
        }
    }

    #[test]
    fn closest_point_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for s in surfaces() {
            for _ in 0..200 {
                let u = s.sample_point(&mut rng);
                let x = u + random_unit(&mut rng) * 0.1;
                let p = s.closest_point(&x).unwrap().position();
                assert!(s.distance(&p) < TOL_N);
                let q = s.closest_point(&p).unwrap().position();
                assert!((p - q).norm() < 2.0 * TOL_N);
            }
        }
    }

    #[test]
    fn ellipsoid_closest_point_beats_dense_sampling() {
        let e = Ellipsoid::new(1.5, 1.0, 0.75).unwrap();
        let x = Vec3::new(1.1, 0.5, 0.3);
        let p = e.closest_point(&x).unwrap().position();
        let best = (x - p).norm();
        let n = 1000;
        for i in 0..n {
            let th = std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
            for k in 0..n {
                let ph = std::f64::consts::TAU * k as f64 / n as f64;
                let q = Vec3::new(1.5 * th.sin() * ph.cos(), th.sin() * ph.sin(), 0.75 * th.cos());
                assert!((x - q).norm() >= best - 1e-12);
            }
        }
    }

    #[test]
    fn tube_is_enforced() {
        assert!(UnitSphere.closest_point(&Vec3::zeros()).is_err());
        let t = Torus::new(2.0, 0.5).unwrap();
        assert!(t.closest_point(&Vec3::new(0.0, 0.0, 1.0)).is_err());
        assert!(t.closest_point(&Vec3::new(2.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn off_manifold_normal_is_rejected() {
        assert!(matches!(
            UnitSphere.normal(&Vec3::new(0.0, 0.0, 1.1)),
            Err(LatticeError::OffManifold { .. })
        ));
    }

    #[test]
    fn global_frames() {
        assert!(matches!(
            UnitSphere.global_frame(&Vec3::z()),
            Err(LatticeError::NoGlobalFrame(_))
        ));
        let t = Torus::new(2.0, 0.75).unwrap();
        let ce = t.frame_bound().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let (u, v) = sample_close_pair(&t, 0.05, &mut rng);
            let (e1, e2) = t.global_frame(&u).unwrap();
            let nu = t.normal(&u).unwrap();
            assert!((e1.norm() - 1.0).abs() < 1e-12 && (e2.norm() - 1.0).abs() < 1e-12);
            assert!(e1.dot(&e2).abs() < 1e-12 && e1.dot(&nu).abs() < 1e-12);
            let (f1, _) = t.global_frame(&v).unwrap();
            let d = (u - v).norm();
            assert!((e1 - f1).norm() <= ce * d + 4.0 * d * d);
        }
    }

    #[test]
    fn graph_bound_holds_on_independent_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for s in surfaces() {
            let (delta, c) = (s.delta_n(), s.graph_constant());
            for _ in 0..100_000 {
                let (u, v) = sample_close_pair(&s, delta, &mut rng);
                let d = v - u;
                assert!(d.dot(&s.normal(&u).unwrap()).abs() <= c * d.norm_squared() + 1e-15, "{}", s);
            }
        }
    }
}
