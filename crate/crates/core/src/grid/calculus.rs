use super::{build, Field, LatticeValue, ScalarField};
use crate::error::Result;

/// Lattice axis; `X` is the first index `j₁`, `Y` the second.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::X, Axis::Y];

    #[inline]
    pub(crate) fn step(self) -> (isize, isize) {
        match self {
            Axis::X => (1, 0),
            Axis::Y => (0, 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DiffKind {
    /// `(u_{j+1} − u_j)/h`
    Forward,
    /// `(u_j − u_{j−1})/h`
    Backward,
    /// `(u_{j+1} − u_{j−1})/(2h)`
    Centered,
}

/// First difference along one axis.
pub fn diff<T: LatticeValue>(field: &Field<T>, axis: Axis, kind: DiffKind) -> Field<T> {
    let spec = *field.spec();
    let inv_h = 1.0 / spec.h();
    let (sx, sy) = axis.step();
    let values = build(&spec, |k| {
        let here = field.values[k];
        match kind {
            DiffKind::Forward => (field.neighbor(k, sx, sy) - here) * inv_h,
            DiffKind::Backward => (here - field.neighbor(k, -sx, -sy)) * inv_h,
            DiffKind::Centered => {
                (field.neighbor(k, sx, sy) - field.neighbor(k, -sx, -sy)) * (0.5 * inv_h)
            }
        }
    });
    Field::from_raw(spec, values, T::zero())
}

/// Forward or backward differences along both axes.
pub fn diff_axes<T: LatticeValue>(field: &Field<T>, kind: DiffKind) -> [Field<T>; 2] {
    [diff(field, Axis::X, kind), diff(field, Axis::Y, kind)]
}

/// `δ²ᵢu = (u_{j+1} − 2u_j + u_{j−1})/h²` along one axis.
pub fn second_diff<T: LatticeValue>(field: &Field<T>, axis: Axis) -> Field<T> {
    let spec = *field.spec();
    let inv_h2 = 1.0 / (spec.h() * spec.h());
    let (sx, sy) = axis.step();
    let values = build(&spec, |k| {
        let here = field.values[k];
        (field.neighbor(k, sx, sy) + field.neighbor(k, -sx, -sy) - here * 2.0) * inv_h2
    });
    Field::from_raw(spec, values, T::zero())
}

/// Five-point discrete Laplacian `Δʰ = Σᵢ δ²ᵢ`.
pub fn laplacian<T: LatticeValue>(field: &Field<T>) -> Field<T> {
    let spec = *field.spec();
    let inv_h2 = 1.0 / (spec.h() * spec.h());
    let values = build(&spec, |k| laplacian_at(field, k, inv_h2));
    Field::from_raw(spec, values, T::zero())
}

#[inline]
pub(crate) fn laplacian_at<T: LatticeValue>(field: &Field<T>, k: usize, inv_h2: f64) -> T {
    let here = field.values[k];
    (field.neighbor(k, 1, 0)
        + field.neighbor(k, -1, 0)
        + field.neighbor(k, 0, 1)
        + field.neighbor(k, 0, -1)
        - here * 4.0)
        * inv_h2
}

/// The Laplacian assembled as `Σᵢ (1/h)(D₊ᵢ − D₋ᵢ)u`, used to cross-check
/// [`laplacian`].
pub fn laplacian_split<T: LatticeValue>(field: &Field<T>) -> Field<T> {
    let inv_h = 1.0 / field.spec().h();
    let mut acc = Field::zeros(*field.spec());
    for axis in Axis::BOTH {
        let fwd = diff(field, axis, DiffKind::Forward);
        let bwd = diff(field, axis, DiffKind::Backward);
        for ((a, f), b) in acc.values.iter_mut().zip(&fwd.values).zip(&bwd.values) {
            *a += (*f - *b) * inv_h;
        }
    }
    acc
}

/// Node-wise product `ζ_j u_j`.
pub fn scale_by<T: LatticeValue>(zeta: &ScalarField, field: &Field<T>) -> Result<Field<T>> {
    zeta.zip_map(field, |z, u| u * z)
}

/// Node-wise inner product `u_j · v_j`.
pub fn pointwise_dot<T: LatticeValue>(u: &Field<T>, v: &Field<T>) -> Result<ScalarField> {
    u.zip_map(v, |a, b| a.dot(&b))
}
