//! Seeded smooth random fields and preset initial data.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::grid::{GridSpec, ScalarField, Vec3, VectorField};
use crate::target::Hypersurface;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random trigonometric polynomial with wavenumbers `|k| ≤ kmax` on the
/// grid window, coefficients decaying like `1/(1 + |k|²)`.
#[derive(Clone, Debug)]
pub struct FourierSeries {
    modes: Vec<(f64, f64, f64, f64)>,
}

impl FourierSeries {
    pub fn random(spec: &GridSpec, kmax: i32, rng: &mut impl Rng) -> Self {
        let (lx, ly) = spec.extent();
        let mut modes = Vec::new();
        for kx in -kmax..=kmax {
            for ky in 0..=kmax {
                if (ky == 0 && kx < 0) || kx * kx + ky * ky > kmax * kmax {
                    continue;
                }
                let weight = 1.0 / (1.0 + (kx * kx + ky * ky) as f64);
                let a = rng.gen_range(-1.0..1.0) * weight;
                let phase = rng.gen_range(0.0..TAU);
                modes.push((TAU * kx as f64 / lx, TAU * ky as f64 / ly, a, phase));
            }
        }
        Self { modes }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.modes
            .iter()
            .map(|&(wx, wy, a, ph)| a * (wx * x + wy * y + ph).cos())
            .sum()
    }

    /// Gradient `(∂x, ∂y)`.
    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        self.modes.iter().fold((0.0, 0.0), |(gx, gy), &(wx, wy, a, ph)| {
            let s = -a * (wx * x + wy * y + ph).sin();
            (gx + s * wx, gy + s * wy)
        })
    }
}

/// Smooth random scalar field, periodic on the grid window.
pub fn smooth_scalar(spec: GridSpec, kmax: i32, rng: &mut impl Rng) -> ScalarField {
    let f = FourierSeries::random(&spec, kmax, rng);
    ScalarField::sample(spec, |x, y| f.eval(x, y))
}

/// Smooth random map into `N`: a base point plus `amplitude` times a smooth
/// random displacement, retracted onto the surface.
pub fn smooth_map<S: Hypersurface + ?Sized>(
    spec: GridSpec,
    surface: &S,
    base: Vec3,
    amplitude: f64,
    kmax: i32,
    rng: &mut impl Rng,
) -> Result<VectorField> {
    let series: Vec<FourierSeries> = (0..3).map(|_| FourierSeries::random(&spec, kmax, rng)).collect();
    let base = surface.closest_point(&base)?.position();
    let mut values = Vec::with_capacity(spec.len());
    for iy in 0..spec.ny() {
        for ix in 0..spec.nx() {
            let (x, y) = spec.position(ix, iy);
            let w = Vec3::new(series[0].eval(x, y), series[1].eval(x, y), series[2].eval(x, y));
            values.push(surface.closest_point(&(base + w * amplitude))?.position());
        }
    }
    Ok(VectorField::new(spec, values)?.with_far_value(base))
}

/// Smooth random sphere map with independent node-wise noise of size at most
/// `noise`, so difference quotients are large at the grid scale.
pub fn noisy_sphere_map(
    spec: GridSpec,
    amplitude: f64,
    noise: f64,
    rng: &mut impl Rng,
) -> Result<VectorField> {
    if !(noise >= 0.0 && amplitude >= 0.0) {
        return Err(invalid("noise", "amplitudes must be nonnegative"));
    }
    let smooth = smooth_map(spec, &crate::target::UnitSphere, Vec3::z(), amplitude, 2, rng)?;
    let values = smooth
        .values()
        .iter()
        .map(|v| {
            let d = crate::target::random_unit(rng) * (noise * rng.gen_range(0.0..1.0));
            (v + d).normalize()
        })
        .collect();
    VectorField::new(spec, values)
}

/// Largest `|u_{j+e} − u_j|` over lattice edges, ghosts included.
pub fn max_edge_gap(u: &VectorField) -> f64 {
    let mut gap = 0.0_f64;
    for k in 0..u.spec().len() {
        let here = u.values()[k];
        gap = gap.max((u.neighbor(k, 1, 0) - here).norm());
        gap = gap.max((u.neighbor(k, 0, 1) - here).norm());
    }
    gap
}

/// Degree-one equivariant map into the unit sphere concentrated at `center`:
/// polar angle `2·atan(λ/r)` times a cutoff that brings the map back to the
/// north pole at radius `r_out`.
pub fn equivariant_bubble(spec: GridSpec, center: (f64, f64), lambda: f64, r_out: f64) -> VectorField {
    let field = VectorField::sample(spec, |x, y| {
        let (dx, dy) = (x - center.0, y - center.1);
        let r = dx.hypot(dy);
        let fade = if r >= r_out {
            0.0
        } else {
            let s = r / r_out;
            1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
        };
        let theta = if r == 0.0 { PI } else { 2.0 * (lambda / r).atan() * fade };
        let phi = dy.atan2(dx);
        // theta = π at the center maps it to the south pole
        Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
    });
    field.with_far_value(Vec3::z())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::target::UnitSphere;

    #[test]
    fn smooth_map_is_seed_deterministic_and_on_surface() {
        let spec = GridSpec::periodic(16, 0.25).unwrap();
        let a = smooth_map(spec, &UnitSphere, Vec3::z(), 0.7, 2, &mut rng(9)).unwrap();
        let b = smooth_map(spec, &UnitSphere, Vec3::z(), 0.7, 2, &mut rng(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.values().iter().all(|v| (v.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn noisy_map_gap_is_controlled_by_noise() {
        let spec = GridSpec::periodic(32, 1.0 / 32.0).unwrap();
        let smooth = noisy_sphere_map(spec, 0.5, 0.0, &mut rng(3)).unwrap();
        let noisy = noisy_sphere_map(spec, 0.5, 0.2, &mut rng(3)).unwrap();
        assert!(max_edge_gap(&smooth) < 0.5);
        // normalizing vectors of length ≥ 0.8 stretches gaps by at most 1/0.8
        assert!(max_edge_gap(&noisy) < (max_edge_gap(&smooth) + 0.4) / 0.8);
        assert!(noisy.values().iter().all(|v| (v.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn bubble_is_on_sphere() {
        let spec = GridSpec::new(0.1, 20, 20, crate::grid::Boundary::ConstantFarField).unwrap();
        let u = equivariant_bubble(spec, (1.0, 1.0), 0.4, 0.9);
        assert!(u.values().iter().all(|v| (v.norm() - 1.0).abs() < 1e-14));
        assert!((u.get(10, 10) + Vec3::z()).norm() < 1e-14);
        assert_eq!(u.get(0, 0), Vec3::z());
    }
}
