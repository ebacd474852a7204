//! Bilinear `H¹` interpolant and the localized Sobolev-interpolation census.

use std::io::Write;
use std::str::FromStr;

use crate::error::{invalid, LatticeError, Result};
use crate::grid::{
    grad_lp_norm, laplacian, lp_norm, lp_norm_masked, pairwise_sum, scale_by, Boundary, Field,
    GridSpec, LatticeValue, MultiIndex, ScalarField,
};

/// Per-cell polynomial `a₀ + a₁ξ + a₂η + a₃ξη` in local coordinates
/// `ξ, η ∈ [0, h]`, with `a = (u_j, D₊₁u_j, D₊₂u_j, D₊₁D₊₂u_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BilinearInterpolant<T> {
    spec: GridSpec,
    cells_x: usize,
    cells_y: usize,
    coeffs: Vec<[T; 4]>,
    corners: Vec<[T; 4]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterpolantNorm {
    L2,
    GradL2,
    L4,
}

impl FromStr for InterpolantNorm {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L2" | "l2" => Ok(Self::L2),
            "gradL2" | "grad_l2" => Ok(Self::GradL2),
            "L4" | "l4" => Ok(Self::L4),
            other => Err(LatticeError::Unsupported(format!("interpolant norm `{other}`"))),
        }
    }
}

// Q1 mass matrix on the unit square (corner order 00, 10, 01, 11), times 36.
const MASS: [[f64; 4]; 4] = [[4.0, 2.0, 2.0, 1.0], [2.0, 4.0, 1.0, 2.0], [2.0, 1.0, 4.0, 2.0], [1.0, 2.0, 2.0, 4.0]];
// Q1 stiffness matrix, times 6; independent of h in two dimensions.
const STIFF: [[f64; 4]; 4] = [
    [4.0, -1.0, -1.0, -2.0],
    [-1.0, 4.0, -2.0, -1.0],
    [-1.0, -2.0, 4.0, -1.0],
    [-2.0, -1.0, -1.0, 4.0],
];

const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

impl<T: LatticeValue> BilinearInterpolant<T> {
    /// Builds `p_h`. Periodic grids get `nx × ny` cells; far-field grids
    /// cover the node hull with `(nx−1) × (ny−1)` cells.
    pub fn new(u: &Field<T>) -> Self {
        let spec = *u.spec();
        let (cells_x, cells_y) = match spec.boundary() {
            Boundary::Periodic => (spec.nx(), spec.ny()),
            Boundary::ConstantFarField => (spec.nx() - 1, spec.ny() - 1),
        };
        let inv_h = 1.0 / spec.h();
        let mut coeffs = Vec::with_capacity(cells_x * cells_y);
        let mut corners = Vec::with_capacity(cells_x * cells_y);
        for iy in 0..cells_y {
            for ix in 0..cells_x {
                let (x, y) = (ix as isize, iy as isize);
                let c = [u.at(x, y), u.at(x + 1, y), u.at(x, y + 1), u.at(x + 1, y + 1)];
                let a1 = (c[1] - c[0]) * inv_h;
                let a2 = (c[2] - c[0]) * inv_h;
                let a3 = (c[3] - c[1] - c[2] + c[0]) * (inv_h * inv_h);
                coeffs.push([c[0], a1, a2, a3]);
                corners.push(c);
            }
        }
        Self {
            spec,
            cells_x,
            cells_y,
            coeffs,
            corners,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Area of the interpolation domain.
    pub fn domain_area(&self) -> f64 {
        (self.cells_x * self.cells_y) as f64 * self.spec.cell_area()
    }

    fn cell_value(&self, cell: usize, xi: f64, eta: f64) -> T {
        let [a0, a1, a2, a3] = self.coeffs[cell];
        a0 + a1 * xi + a2 * eta + a3 * (xi * eta)
    }

    fn cell_gradient(&self, cell: usize, xi: f64, eta: f64) -> (T, T) {
        let [_, a1, a2, a3] = self.coeffs[cell];
        (a1 + a3 * eta, a2 + a3 * xi)
    }

    fn locate(&self, x: f64, y: f64) -> Result<(usize, f64, f64)> {
        let h = self.spec.h();
        let (mut x, mut y) = (x, y);
        if self.spec.boundary() == Boundary::Periodic {
            let (lx, ly) = self.spec.extent();
            x = x.rem_euclid(lx);
            y = y.rem_euclid(ly);
        }
        let ix = ((x / h).floor() as isize).clamp(0, self.cells_x as isize - 1);
        let iy = ((y / h).floor() as isize).clamp(0, self.cells_y as isize - 1);
        let (xi, eta) = (x - ix as f64 * h, y - iy as f64 * h);
        if xi < -1e-12 * h || eta < -1e-12 * h || xi > h * (1.0 + 1e-12) || eta > h * (1.0 + 1e-12) {
            return Err(invalid("point", format!("({x}, {y}) lies outside the interpolation domain")));
        }
        Ok((iy as usize * self.cells_x + ix as usize, xi, eta))
    }

    /// `p_h(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> Result<T> {
        let (cell, xi, eta) = self.locate(x, y)?;
        Ok(self.cell_value(cell, xi, eta))
    }

    /// `∇p_h(x, y)` as `(∂x, ∂y)`.
    pub fn gradient(&self, x: f64, y: f64) -> Result<(T, T)> {
        let (cell, xi, eta) = self.locate(x, y)?;
        Ok(self.cell_gradient(cell, xi, eta))
    }

    /// Largest disagreement between the two polynomials sharing an interior
    /// edge, sampled at 5 points per edge.
    pub fn edge_mismatch(&self) -> f64 {
        let h = self.spec.h();
        let mut worst = 0.0_f64;
        let periodic = self.spec.boundary() == Boundary::Periodic;
        for iy in 0..self.cells_y {
            for ix in 0..self.cells_x {
                let here = iy * self.cells_x + ix;
                let right = if ix + 1 < self.cells_x {
                    Some(iy * self.cells_x + ix + 1)
                } else if periodic {
                    Some(iy * self.cells_x)
                } else {
                    None
                };
                let up = if iy + 1 < self.cells_y {
                    Some((iy + 1) * self.cells_x + ix)
                } else if periodic {
                    Some(ix)
                } else {
                    None
                };
                for k in 0..5 {
                    let s = h * k as f64 / 4.0;
                    if let Some(r) = right {
                        let d = self.cell_value(here, h, s) - self.cell_value(r, 0.0, s);
                        worst = worst.max(d.norm());
                    }
                    if let Some(u) = up {
                        let d = self.cell_value(here, s, h) - self.cell_value(u, s, 0.0);
                        worst = worst.max(d.norm());
                    }
                }
            }
        }
        worst
    }

    /// Largest `|p_h(jh) − u_j|` over nodes that are cell corners.
    pub fn node_mismatch(&self, u: &Field<T>) -> f64 {
        let mut worst = 0.0_f64;
        for iy in 0..self.cells_y {
            for ix in 0..self.cells_x {
                let cell = iy * self.cells_x + ix;
                let d = self.cell_value(cell, 0.0, 0.0) - u.get(ix, iy);
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    pub fn norm(&self, which: InterpolantNorm) -> f64 {
        let h = self.spec.h();
        let per_cell: Vec<f64> = match which {
            InterpolantNorm::L2 => self.corners.iter().map(|c| quadratic_form(&MASS, c) * h * h / 36.0).collect(),
            InterpolantNorm::GradL2 => self.corners.iter().map(|c| quadratic_form(&STIFF, c) / 6.0).collect(),
            InterpolantNorm::L4 => (0..self.coeffs.len())
                .map(|cell| {
                    let mut acc = 0.0;
                    for (gx, wx) in GAUSS4 {
                        for (gy, wy) in GAUSS4 {
                            let v = self.cell_value(cell, 0.5 * h * (gx + 1.0), 0.5 * h * (gy + 1.0));
                            acc += wx * wy * v.norm_sq() * v.norm_sq();
                        }
                    }
                    acc * 0.25 * h * h
                })
                .collect(),
        };
        let total = pairwise_sum(&per_cell).max(0.0);
        match which {
            InterpolantNorm::L4 => total.powf(0.25),
            _ => total.sqrt(),
        }
    }
}

fn quadratic_form<T: LatticeValue>(m: &[[f64; 4]; 4], c: &[T; 4]) -> f64 {
    let mut s = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            s += m[a][b] * c[a].dot(&c[b]);
        }
    }
    s
}

/// `‖∇p(· + δ) − ∇p‖_{L²}` for a whole-node shift `δ = (k₁h, k₂h)` on a
/// periodic grid.
pub fn translation_defect<T: LatticeValue>(u: &Field<T>, k1: isize, k2: isize) -> Result<f64> {
    if u.spec().boundary() != Boundary::Periodic {
        return Err(LatticeError::Unsupported("translation census needs a periodic grid".into()));
    }
    let d = u.shifted(k1, k2).sub(u)?;
    Ok(BilinearInterpolant::new(&d).norm(InterpolantNorm::GradL2))
}

/// Radial cutoff equal to 1 on `B_R`, 0 outside `B_{2R}`, with a quintic
/// smoothstep in between.
#[derive(Clone, Debug, PartialEq)]
pub struct CutoffFunction {
    pub center: (f64, f64),
    pub radius: f64,
    pub zeta: ScalarField,
    /// `max |D^α ζ|·R` over `|α| = 1`.
    pub k1: f64,
    /// `max |Δʰζ|·R²`.
    pub k2: f64,
}

pub fn smoothstep_profile(r: f64, radius: f64) -> f64 {
    if r <= radius {
        1.0
    } else if r >= 2.0 * radius {
        0.0
    } else {
        let s = (r - radius) / radius;
        1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }
}

impl CutoffFunction {
    pub fn new(spec: GridSpec, center: (f64, f64), radius: f64) -> Result<Self> {
        if !(radius > spec.h()) {
            return Err(invalid("R", format!("cutoff radius {radius} must exceed h = {}", spec.h())));
        }
        let zeta = ScalarField::from_fn(spec, |ix, iy| {
            let (dx, dy) = spec.displacement(center, ix, iy);
            smoothstep_profile(dx.hypot(dy), radius)
        });
        let mut k1 = 0.0_f64;
        for alpha in MultiIndex::all_of_order(1) {
            k1 = k1.max(alpha.apply(&zeta).max_norm() * radius);
        }
        let k2 = laplacian(&zeta).max_norm() * radius * radius;
        Ok(Self {
            center,
            radius,
            zeta,
            k1,
            k2,
        })
    }

    /// Nodes inside `B_{2R}`, the support region `Ω`.
    pub fn support_mask(&self) -> Vec<bool> {
        let spec = self.zeta.spec();
        (0..spec.len())
            .map(|k| {
                let (ix, iy) = spec.node(k);
                let (dx, dy) = spec.displacement(self.center, ix, iy);
                dx.hypot(dy) < 2.0 * self.radius
            })
            .collect()
    }
}

/// Both sides of `‖|u|²ζ‖_{L^{2s}_h} ≤ C ‖u‖_{Lᵖ_h(Ω)} ‖D¹(uζ)‖_{L^q_h}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CensusRow {
    pub h: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

pub fn localized_sobolev_check<T: LatticeValue>(
    u: &Field<T>,
    cutoff: &CutoffFunction,
    s: f64,
    p: f64,
    q: f64,
) -> Result<CensusRow> {
    let relation = (s + 1.0) / (2.0 * s) - (1.0 / p + 1.0 / q);
    if !(s >= 1.0) || relation.abs() > 1e-12 {
        return Err(invalid(
            "s, p, q",
            format!("need (s+1)/(2s) = 1/p + 1/q, got s = {s}, p = {p}, q = {q}"),
        ));
    }
    let weighted = u.zip_map(&cutoff.zeta, |v, z| v.norm_sq() * z)?;
    let lhs = lp_norm(&weighted, 2.0 * s)?;
    let local = lp_norm_masked(u, p, &cutoff.support_mask())?;
    let grad = grad_lp_norm(&scale_by(&cutoff.zeta, u)?, q)?;
    let rhs = local * grad;
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    Ok(CensusRow {
        h: u.spec().h(),
        lhs,
        rhs,
        ratio,
    })
}

/// Norm-equivalence row: `lhs` is the interpolant norm, `rhs` the lattice norm.
pub fn equivalence_row<T: LatticeValue>(u: &Field<T>, which: InterpolantNorm) -> Result<CensusRow> {
    let p = BilinearInterpolant::new(u);
    let lhs = p.norm(which);
    let rhs = match which {
        InterpolantNorm::L2 => lp_norm(u, 2.0)?,
        InterpolantNorm::GradL2 => grad_lp_norm(u, 2.0)?,
        InterpolantNorm::L4 => lp_norm(u, 4.0)?,
    };
    Ok(CensusRow {
        h: u.spec().h(),
        lhs,
        rhs,
        ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 },
    })
}

pub fn write_census_csv(rows: &[CensusRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "h,lhs,rhs,ratio")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.h, r.lhs, r.rhs, r.ratio)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Vec3, VectorField};
    use crate::sample;
    use rand::Rng;

    #[test]
    fn constant_field_gives_constant_interpolant() {
        let spec = GridSpec::periodic(8, 0.25).unwrap();
        let u = ScalarField::constant(spec, 1.5);
        let p = BilinearInterpolant::new(&u);
        assert_eq!(p.eval(0.37, 1.91).unwrap(), 1.5);
        let area = p.domain_area();
        assert!((p.norm(InterpolantNorm::L2) - 1.5 * area.sqrt()).abs() < 1e-14);
        assert!((p.norm(InterpolantNorm::L2) - lp_norm(&u, 2.0).unwrap()).abs() < 1e-14);
        assert!(p.norm(InterpolantNorm::GradL2) < 1e-14);
    }

    #[test]
    fn bilinear_functions_are_reproduced() {
        let spec = GridSpec::new(0.1, 12, 9, Boundary::ConstantFarField).unwrap();
        let g = |x: f64, y: f64| 3.0 + 2.0 * x - y + 5.0 * x * y;
        let u = ScalarField::sample(spec, g);
        let p = BilinearInterpolant::new(&u);
        let mut rng = sample::rng(1);
        for _ in 0..100 {
            let (x, y) = (rng.gen_range(0.0..1.1), rng.gen_range(0.0..0.8));
            assert!((p.eval(x, y).unwrap() - g(x, y)).abs() < 1e-12);
        }
    }

    #[test]
    fn nodes_and_edges_match() {
        let spec = GridSpec::periodic(16, 1.0 / 16.0).unwrap();
        let u = sample::smooth_map(spec, &crate::target::UnitSphere, Vec3::z(), 1.0, 3, &mut sample::rng(2)).unwrap();
        let p = BilinearInterpolant::new(&u);
        assert_eq!(p.node_mismatch(&u), 0.0);
        assert!(p.edge_mismatch() < 1e-13);
    }

    #[test]
    fn sup_error_is_second_order() {
        let err = |n: usize| {
            let spec = GridSpec::periodic(n, 1.0 / n as f64).unwrap();
            let u = ScalarField::sample(spec, |x, _| (std::f64::consts::TAU * x).sin());
            let p = BilinearInterpolant::new(&u);
            (0..997)
                .map(|k| {
                    let x = k as f64 / 997.0;
                    (p.eval(x, 0.3).unwrap() - (std::f64::consts::TAU * x).sin()).abs()
                })
                .fold(0.0, f64::max)
        };
        let order = (err(16) / err(32)).log2();
        assert!(order >= 1.9, "{order}");
    }

    #[test]
    fn exact_integrals_match_quadrature() {
        let spec = GridSpec::periodic(8, 0.3).unwrap();
        let u = sample::smooth_scalar(spec, 2, &mut sample::rng(3));
        let p = BilinearInterpolant::new(&u);
        // midpoint-refined quadrature of |p|² and |∇p|²
        let m = 40;
        let (lx, ly) = spec.extent();
        let (mut l2, mut g2) = (0.0, 0.0);
        for i in 0..m * 8 {
            for j in 0..m * 8 {
                let x = (i as f64 + 0.5) * lx / (m * 8) as f64;
                let y = (j as f64 + 0.5) * ly / (m * 8) as f64;
                let v = p.eval(x, y).unwrap();
                let (gx, gy) = p.gradient(x, y).unwrap();
                let w = lx * ly / ((m * 8) * (m * 8)) as f64;
                l2 += v * v * w;
                g2 += (gx * gx + gy * gy) * w;
            }
        }
        assert!((p.norm(InterpolantNorm::L2) - l2.sqrt()).abs() < 1e-4 * l2.sqrt());
        assert!((p.norm(InterpolantNorm::GradL2) - g2.sqrt()).abs() < 1e-4 * g2.sqrt());
    }

    #[test]
    fn l4_norm_of_constant_vector() {
        let spec = GridSpec::periodic(4, 0.5).unwrap();
        let u = VectorField::constant(spec, Vec3::new(0.0, 2.0, 0.0));
        let p = BilinearInterpolant::new(&u);
        assert!((p.norm(InterpolantNorm::L4) - 2.0 * p.domain_area().powf(0.25)).abs() < 1e-13);
        assert!("H3".parse::<InterpolantNorm>().is_err());
    }

    #[test]
    fn cutoff_properties() {
        let spec = GridSpec::periodic(64, 1.0 / 64.0).unwrap();
        let c = CutoffFunction::new(spec, (0.5, 0.5), 0.2).unwrap();
        assert!(c.zeta.values().iter().all(|z| (0.0..=1.0).contains(z)));
        assert_eq!(c.zeta.get(32, 32), 1.0);
        assert_eq!(c.zeta.get(0, 0), 0.0);
        // quintic smoothstep has max slope 15/8 per unit of s
        assert!(c.k1 <= 1.875 + 1e-9 && c.k1 > 1.5);
        assert!(c.k2.is_finite());
        assert!(CutoffFunction::new(spec, (0.5, 0.5), 0.01).is_err());
    }

    #[test]
    fn localized_check_rejects_bad_exponents_and_handles_zero() {
        let spec = GridSpec::periodic(16, 1.0 / 16.0).unwrap();
        let c = CutoffFunction::new(spec, (0.5, 0.5), 0.2).unwrap();
        let zero = ScalarField::zeros(spec);
        let r = localized_sobolev_check(&zero, &c, 1.0, 2.0, 2.0).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        assert!(localized_sobolev_check(&zero, &c, 1.0, 4.0, 2.0).is_err());
        assert!(localized_sobolev_check(&zero, &c, 2.0, 4.0, 2.0).is_ok());
    }

    #[test]
    fn translation_defect_is_linear_in_small_shifts() {
        let spec = GridSpec::periodic(32, 1.0 / 32.0).unwrap();
        let u = sample::smooth_scalar(spec, 2, &mut sample::rng(4));
        let d1 = translation_defect(&u, 1, 0).unwrap();
        let d2 = translation_defect(&u, 2, 0).unwrap();
        assert!(d2 / d1 > 1.8 && d2 / d1 < 2.1);
    }
}
