//! Uniform-grid containers and the difference calculus.
//!
//! Fields live on an `nx × ny` lattice with spacing `h`; node `(ix, iy)` sits at
//! `(ix·h, iy·h)` and values are stored row-major (`iy` outer, `ix` inner).
//! Edge neighbors are resolved by the grid's [`Boundary`] rule: periodic wrap,
//! or a constant far-field value carried by the field itself.

pub(crate) mod calculus;
mod norms;
pub mod snapshot;

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{LatticeError, Result};

pub use calculus::{
    diff, diff_axes, laplacian, laplacian_split, pointwise_dot, scale_by, second_diff, Axis,
    DiffKind,
};
pub use norms::{
    grad_lp_norm, inner_l2h, lp_norm, lp_norm_masked, pairwise_sum, sobolev_norm, MultiIndex,
};

/// Point in R³.
pub type Vec3 = nalgebra::Vector3<f64>;

/// Neighbor rule at the edges of the computational window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Boundary {
    /// Indices wrap around; summation by parts is exact.
    Periodic,
    /// Ghost nodes take the field's configured far-field value.
    ConstantFarField,
}

impl Boundary {
    pub fn code(self) -> u8 {
        match self {
            Boundary::Periodic => 0,
            Boundary::ConstantFarField => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Boundary::Periodic),
            1 => Some(Boundary::ConstantFarField),
            _ => None,
        }
    }
}

/// Lattice geometry: spacing, node counts and edge rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    h: f64,
    nx: usize,
    ny: usize,
    boundary: Boundary,
}

impl GridSpec {
    pub fn new(h: f64, nx: usize, ny: usize, boundary: Boundary) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(LatticeError::InvalidGrid(format!("h must be positive, got {h}")));
        }
        if nx < 4 || ny < 4 {
            return Err(LatticeError::InvalidGrid(format!(
                "need at least 4 nodes per axis, got {nx}×{ny}"
            )));
        }
        Ok(Self { h, nx, ny, boundary })
    }

    /// Square periodic grid with `n` nodes per axis.
    pub fn periodic(n: usize, h: f64) -> Result<Self> {
        Self::new(h, n, n, Boundary::Periodic)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell area `h²`, the weight of the discrete integrals.
    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    #[inline]
    pub fn node(&self, index: usize) -> (usize, usize) {
        (index % self.nx, index / self.nx)
    }

    /// Physical coordinates of a node.
    pub fn position(&self, ix: usize, iy: usize) -> (f64, f64) {
        (ix as f64 * self.h, iy as f64 * self.h)
    }

    /// Physical side lengths of the window.
    pub fn extent(&self) -> (f64, f64) {
        (self.nx as f64 * self.h, self.ny as f64 * self.h)
    }

    /// Displacement from `from` to node `(ix, iy)`; minimum image on periodic grids.
    pub fn displacement(&self, from: (f64, f64), ix: usize, iy: usize) -> (f64, f64) {
        let (x, y) = self.position(ix, iy);
        let mut dx = x - from.0;
        let mut dy = y - from.1;
        if self.boundary == Boundary::Periodic {
            let (lx, ly) = self.extent();
            dx -= lx * (dx / lx).round();
            dy -= ly * (dy / ly).round();
        }
        (dx, dy)
    }

    /// Resolves a possibly out-of-range index; `None` means a far-field ghost.
    #[inline]
    pub fn resolve(&self, ix: isize, iy: isize) -> Option<usize> {
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        match self.boundary {
            Boundary::Periodic => {
                Some(self.index(ix.rem_euclid(nx) as usize, iy.rem_euclid(ny) as usize))
            }
            Boundary::ConstantFarField => {
                if ix < 0 || iy < 0 || ix >= nx || iy >= ny {
                    None
                } else {
                    Some(self.index(ix as usize, iy as usize))
                }
            }
        }
    }

    pub fn same_lattice(&self, other: &GridSpec) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.boundary == other.boundary
            && (self.h - other.h).abs() <= 1e-15 * self.h
    }

    pub fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self.same_lattice(other) {
            Ok(())
        } else {
            Err(LatticeError::IncompatibleGrids(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Values that can sit on lattice nodes.
pub trait LatticeValue:
    Copy
    + Send
    + Sync
    + std::fmt::Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
    + AddAssign
    + 'static
{
    fn zero() -> Self;
    /// Squared Euclidean magnitude.
    fn norm_sq(&self) -> f64;
    /// Real inner product.
    fn dot(&self, other: &Self) -> f64;
    fn is_finite(&self) -> bool;

    fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }
}

impl LatticeValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn norm_sq(&self) -> f64 {
        self * self
    }
    fn dot(&self, other: &Self) -> f64 {
        self * other
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl LatticeValue for Vec3 {
    fn zero() -> Self {
        Vec3::zeros()
    }
    fn norm_sq(&self) -> f64 {
        self.norm_squared()
    }
    fn dot(&self, other: &Self) -> f64 {
        nalgebra::Matrix::dot(self, other)
    }
    fn is_finite(&self) -> bool {
        self.iter().all(|c| c.is_finite())
    }
}

impl LatticeValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn norm_sq(&self) -> f64 {
        Complex64::norm_sqr(self)
    }
    fn dot(&self, other: &Self) -> f64 {
        self.re * other.re + self.im * other.im
    }
    fn is_finite(&self) -> bool {
        Complex64::is_finite(*self)
    }
}

/// Node values on a grid, plus the far-field value used by
/// [`Boundary::ConstantFarField`] ghosts.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    spec: GridSpec,
    values: Vec<T>,
    far: T,
}

pub type VectorField = Field<Vec3>;
pub type ScalarField = Field<f64>;
pub type ComplexField = Field<Complex64>;

impl<T: LatticeValue> Field<T> {
    /// Wraps row-major values; rejects wrong lengths and non-finite entries.
    pub fn new(spec: GridSpec, values: Vec<T>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(LatticeError::InvalidGrid(format!(
                "expected {} values, got {}",
                spec.len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let (ix, iy) = spec.node(k);
            return Err(LatticeError::NonFinite { ix, iy });
        }
        Ok(Self {
            spec,
            values,
            far: T::zero(),
        })
    }

    pub(crate) fn from_raw(spec: GridSpec, values: Vec<T>, far: T) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        Self { spec, values, far }
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self::from_raw(spec, vec![T::zero(); spec.len()], T::zero())
    }

    /// Constant field; the far-field value is set to the same constant.
    pub fn constant(spec: GridSpec, value: T) -> Self {
        Self::from_raw(spec, vec![value; spec.len()], value)
    }

    /// Samples `f(ix, iy)` at every node.
    pub fn from_fn(spec: GridSpec, f: impl Fn(usize, usize) -> T + Sync) -> Self {
        let values = build(&spec, |k| {
            let (ix, iy) = spec.node(k);
            f(ix, iy)
        });
        Self::from_raw(spec, values, T::zero())
    }

    /// Samples a function of physical position.
    pub fn sample(spec: GridSpec, f: impl Fn(f64, f64) -> T + Sync) -> Self {
        Self::from_fn(spec, |ix, iy| {
            let (x, y) = spec.position(ix, iy);
            f(x, y)
        })
    }

    pub fn with_far_value(mut self, far: T) -> Self {
        self.far = far;
        self
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn far_value(&self) -> T {
        self.far
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize) -> T {
        self.values[self.spec.index(ix, iy)]
    }

    /// Value at a possibly out-of-range index, resolved by the boundary rule.
    #[inline]
    pub fn at(&self, ix: isize, iy: isize) -> T {
        match self.spec.resolve(ix, iy) {
            Some(k) => self.values[k],
            None => self.far,
        }
    }

    /// Value at the neighbor of node `k` shifted by `(dx, dy)`.
    #[inline]
    pub fn neighbor(&self, k: usize, dx: isize, dy: isize) -> T {
        let (ix, iy) = self.spec.node(k);
        self.at(ix as isize + dx, iy as isize + dy)
    }

    pub fn map<U: LatticeValue>(&self, f: impl Fn(T) -> U + Sync) -> Field<U> {
        let values = build(&self.spec, |k| f(self.values[k]));
        Field::from_raw(self.spec, values, f(self.far))
    }

    /// Node-wise combination of two fields on the same lattice.
    pub fn zip_map<U: LatticeValue, V: LatticeValue>(
        &self,
        other: &Field<U>,
        f: impl Fn(T, U) -> V + Sync,
    ) -> Result<Field<V>> {
        self.spec.ensure_same(&other.spec)?;
        let values = build(&self.spec, |k| f(self.values[k], other.values[k]));
        Ok(Field::from_raw(self.spec, values, f(self.far, other.far)))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b * s)
    }

    /// Field translated by whole nodes: `out(ix, iy) = self(ix + sx, iy + sy)`.
    pub fn shifted(&self, sx: isize, sy: isize) -> Self {
        let spec = self.spec;
        let values = build(&spec, |k| self.neighbor(k, sx, sy));
        Self::from_raw(spec, values, self.far)
    }

    /// Maximum node magnitude.
    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// First non-finite node, if any.
    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(k) => {
                let (ix, iy) = self.spec.node(k);
                Err(LatticeError::NonFinite { ix, iy })
            }
            None => Ok(()),
        }
    }
}

impl VectorField {
    /// Separates the three Cartesian components.
    pub fn components(&self) -> [ScalarField; 3] {
        [0, 1, 2].map(|c| self.map(move |v| v[c]))
    }
}

/// Builds a row-major vector of node values, in parallel over row bands when
/// the `parallel` feature is enabled. Element-wise, so results never depend
/// on the thread count.
pub(crate) fn build<T: Send>(spec: &GridSpec, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if spec.len() >= 4096 {
            return (0..spec.len()).into_par_iter().with_min_len(spec.nx()).map(&f).collect();
        }
    }
    (0..spec.len()).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(GridSpec::new(0.0, 8, 8, Boundary::Periodic).is_err());
        assert!(GridSpec::new(-1.0, 8, 8, Boundary::Periodic).is_err());
        assert!(GridSpec::new(0.1, 3, 8, Boundary::Periodic).is_err());
        assert!(GridSpec::new(f64::NAN, 8, 8, Boundary::Periodic).is_err());
    }

    #[test]
    fn periodic_lookup_wraps() {
        let spec = GridSpec::periodic(4, 1.0).unwrap();
        let f = ScalarField::from_fn(spec, |ix, iy| (ix + 10 * iy) as f64);
        assert_eq!(f.at(-1, 0), 3.0);
        assert_eq!(f.at(4, 5), 10.0);
    }

    #[test]
    fn far_field_ghosts_use_far_value() {
        let spec = GridSpec::new(1.0, 4, 4, Boundary::ConstantFarField).unwrap();
        let f = ScalarField::constant(spec, 0.5).with_far_value(2.0);
        assert_eq!(f.at(-1, 0), 2.0);
        assert_eq!(f.at(1, 4), 2.0);
        assert_eq!(f.at(1, 1), 0.5);
    }

    #[test]
    fn new_rejects_non_finite() {
        let spec = GridSpec::periodic(4, 1.0).unwrap();
        let mut v = vec![0.0; 16];
        v[5] = f64::NAN;
        assert_eq!(ScalarField::new(spec, v), Err(LatticeError::NonFinite { ix: 1, iy: 1 }));
    }

    #[test]
    fn minimum_image_displacement() {
        let spec = GridSpec::periodic(8, 0.5).unwrap();
        let (dx, dy) = spec.displacement((0.0, 0.0), 7, 1);
        assert!((dx + 0.5).abs() < 1e-15);
        assert!((dy - 0.5).abs() < 1e-15);
    }
}
