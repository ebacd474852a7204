//! Browser bindings: kernel profiles, a steppable flow with an
//! energy-density image, and spherical-cap holonomy.

use llg_lattice::dynamics::{discrete_energy, energy_density, step_with, SolverConfig, State};
use llg_lattice::frames;
use llg_lattice::grid::{Boundary, GridSpec, Vec3};
use llg_lattice::kernels::kernel_1d;
use llg_lattice::sample;
use llg_lattice::target::{Surface, UnitSphere};
use llg_lattice::LatticeError;
use num_complex::Complex64;
use wasm_bindgen::prelude::*;

fn js(e: LatticeError) -> JsError {
    JsError::new(&e.to_string())
}

/// Values of the 1-D lattice kernel with coefficient `re + i·im` at
/// `t = t_over_h2·h²` and `h = 1`, for offsets `−radius..=radius`, as
/// interleaved `[re, im]` pairs.
pub fn kernel_profile_values(t_over_h2: f64, re: f64, im: f64, radius: usize) -> Result<Vec<f64>, LatticeError> {
    let k = kernel_1d(t_over_h2, 1.0, Complex64::new(re, im))?;
    let r = radius as isize;
    Ok((-r..=r).flat_map(|j| {
        let v = k.value(j);
        [v.re, v.im]
    })
    .collect())
}

#[wasm_bindgen]
pub fn kernel_profile(t_over_h2: f64, re: f64, im: f64, radius: usize) -> Result<Vec<f64>, JsError> {
    kernel_profile_values(t_over_h2, re, im, radius).map_err(js)
}

/// `[measured, exact]` holonomy of the latitude circle with `cos θ = cos_colatitude`
/// sampled by `n` points.
#[wasm_bindgen]
pub fn cap_holonomy(n: usize, cos_colatitude: f64) -> Result<Vec<f64>, JsError> {
    let (measured, exact) = frames::cap_holonomy(n, cos_colatitude.acos()).map_err(js)?;
    Ok(vec![measured, exact])
}

/// Sphere-valued flow on an `n×n` unit window that can be advanced in
/// chunks and rendered as an energy-density image.
#[wasm_bindgen]
pub struct Simulation {
    state: State,
    config: SolverConfig,
    dt: f64,
    steps: usize,
}

impl Simulation {
    /// `data` is `"bubble"` (degree-one bubble of width `param`, far field)
    /// or `"smooth"` (periodic smooth map of amplitude `param`).
    pub fn build(data: &str, n: usize, alpha: f64, heat: bool, seed: u32, param: f64) -> Result<Self, LatticeError> {
        let h = 1.0 / n as f64;
        let u = match data {
            "bubble" => {
                let spec = GridSpec::new(h, n, n, Boundary::ConstantFarField)?;
                sample::equivariant_bubble(spec, (0.5, 0.5), param, 0.4)
            }
            "smooth" => {
                let spec = GridSpec::periodic(n, h)?;
                sample::smooth_map(spec, &UnitSphere, Vec3::z(), param, 2, &mut sample::rng(u64::from(seed)))?
            }
            other => {
                return Err(LatticeError::InvalidParameter {
                    name: "data".into(),
                    reason: format!("expected `bubble` or `smooth`, got `{other}`"),
                })
            }
        };
        let config = if heat {
            SolverConfig::heat_flow(Surface::sphere(), 0.0)
        } else {
            SolverConfig::new(Surface::sphere(), alpha, 0.0)
        };
        config.validate()?;
        let dt = config.dt(h);
        Ok(Self {
            state: State::new(u, &config.surface)?,
            config,
            dt,
            steps: 0,
        })
    }

    pub fn advance(&mut self, count: usize) -> Result<(), LatticeError> {
        for _ in 0..count {
            self.state = step_with(&self.state, self.dt, &self.config)?;
            self.steps += 1;
        }
        Ok(())
    }

    /// RGBA pixels of the energy density, rows from the top, scaled to
    /// the current maximum.
    pub fn rgba(&self) -> Vec<u8> {
        let e = energy_density(&self.state.u);
        let spec = *e.spec();
        let max = self.density_max();
        let mut out = Vec::with_capacity(4 * spec.len());
        for iy in (0..spec.ny()).rev() {
            for ix in 0..spec.nx() {
                let s = if max > 0.0 { e.get(ix, iy) / max } else { 0.0 };
                out.extend_from_slice(&ramp(s));
                out.push(255);
            }
        }
        out
    }
}

/// Dark blue through red to pale yellow.
fn ramp(s: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 3] = [[12.0, 16.0, 60.0], [200.0, 40.0, 60.0], [252.0, 240.0, 170.0]];
    let s = s.clamp(0.0, 1.0) * 2.0;
    let i = (s.floor() as usize).min(1);
    let f = s - i as f64;
    let mix = |c: usize| (STOPS[i][c] + (STOPS[i + 1][c] - STOPS[i][c]) * f).round() as u8;
    [mix(0), mix(1), mix(2)]
}

#[wasm_bindgen]
impl Simulation {
    #[wasm_bindgen(constructor)]
    pub fn new(data: &str, n: usize, alpha: f64, heat: bool, seed: u32, param: f64) -> Result<Simulation, JsError> {
        Self::build(data, n, alpha, heat, seed, param).map_err(js)
    }

    pub fn step(&mut self, count: usize) -> Result<(), JsError> {
        self.advance(count).map_err(js)
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn energy(&self) -> f64 {
        discrete_energy(&self.state.u)
    }

    pub fn size(&self) -> usize {
        self.state.u.spec().nx()
    }

    pub fn density_max(&self) -> f64 {
        energy_density(&self.state.u).max_norm()
    }

    pub fn pixels(&self) -> Vec<u8> {
        self.rgba()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_profile_is_symmetric_with_unit_mass() {
        let v = kernel_profile_values(2.0, 1.0, 0.0, 40).unwrap();
        assert_eq!(v.len(), 2 * 81);
        let re: Vec<f64> = v.chunks(2).map(|c| c[0]).collect();
        assert!((re.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(re[0], re[80]);
        assert!(v.chunks(2).all(|c| c[1] == 0.0));
        assert!(kernel_profile_values(1.0, -1.0, 0.0, 4).is_err());
    }

    #[test]
    fn heat_flow_lowers_the_bubble_energy() {
        let mut sim = Simulation::build("bubble", 32, 1.0, true, 0, 0.1).unwrap();
        let e0 = sim.energy();
        sim.advance(20).unwrap();
        assert!(sim.energy() < e0);
        assert_eq!(sim.steps(), 20);
        assert!(sim.time() > 0.0);
        let px = sim.rgba();
        assert_eq!(px.len(), 4 * 32 * 32);
        assert!(px.chunks(4).all(|p| p[3] == 255));
        assert!(Simulation::build("cube", 8, 1.0, true, 0, 0.1).is_err());
    }

    #[test]
    fn llg_keeps_the_smooth_map_on_the_sphere() {
        let mut sim = Simulation::build("smooth", 16, 0.5, false, 3, 0.5).unwrap();
        sim.advance(5).unwrap();
        assert!(sim.state.u.values().iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn ramp_ends() {
        assert_eq!(ramp(0.0), [12, 16, 60]);
        assert_eq!(ramp(1.0), [252, 240, 170]);
        assert_eq!(ramp(0.5), [200, 40, 60]);
    }
}
